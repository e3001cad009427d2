import itertools
import random

import pytest

from mkgc import circuits as cir
from mkgc.circuits import AdderCellKind
from mkgc.gates import ClearBackend
from mkgc.lwe import NoiseBudgetExceeded


def wrap(v, w):
    return ((v + (1 << (w - 1))) % (1 << w)) - (1 << (w - 1))


def tdiv(a, b):
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def enc(v, w, backend):
    return cir.encode_int(v, w, backend)


def test_encode_decode_examples(clear_backend):
    ct = enc(-1, 4, clear_backend)
    assert [clear_backend.decrypt(b) for b in ct.bits] == [1, 1, 1, 1]
    ct = enc(5, 4, clear_backend)
    assert [clear_backend.decrypt(b) for b in ct.bits] == [1, 0, 1, 0]
    assert cir.decode_int(enc(0, 4, clear_backend)) == 0
    with pytest.raises(ValueError):
        enc(8, 4, clear_backend)
    with pytest.raises(ValueError):
        enc(-9, 4, clear_backend)


@pytest.mark.parametrize("w", [2, 4, 8])
def test_encode_decode_round_trip_exhaustive(w, clear_backend):
    lo, hi = cir.int_range(w)
    for v in range(lo, hi + 1):
        assert cir.decode_int(enc(v, w, clear_backend)) == v


def test_full_adder_cell_all_combos(clear_backend, two_party):
    keys, _, lwe_backend, sampler = two_party
    for a, b, c in itertools.product((0, 1), repeat=3):
        want = (a + b + c) & 1, (a + b + c) >> 1
        s, co = cir.full_adder_cell(clear_backend.encrypt(a),
                                    clear_backend.encrypt(b),
                                    clear_backend.encrypt(c))
        assert (clear_backend.decrypt(s), clear_backend.decrypt(co)) == want
        xs = [lwe_backend.encrypt(m, keys[i % 2], sampler) for i, m in enumerate((a, b, c))]
        s, co = cir.full_adder_cell(*xs)
        assert (lwe_backend.decrypt(s, keys), lwe_backend.decrypt(co, keys)) == want


def test_full_adder_cell_costs(clear_backend):
    c = clear_backend.counter
    x, y, z = (clear_backend.encrypt(m) for m in (1, 1, 0))
    before = c.snapshot()
    cir.full_adder_cell(x, y, z)
    after = c.snapshot()
    assert after["refreshes"] - before["refreshes"] == 5
    assert after["xor_gates"] - before["xor_gates"] == 2
    assert after["and_gates"] - before["and_gates"] == 2
    assert after["or_gates"] - before["or_gates"] == 1
    before = c.snapshot()
    cir.full_adder_cell(x, y, z, carrier="naive")
    after = c.snapshot()
    assert after["refreshes"] - before["refreshes"] == 7


@pytest.mark.parametrize("w,count", [(1, 5), (4, 20), (8, 40)])
def test_add_gate_counts(w, count):
    backend = ClearBackend()
    lo, hi = cir.int_range(w)
    cir.add_w(enc(hi, w, backend), enc(lo, w, backend))
    assert backend.counter.boots_gates == count


def test_add_examples(clear_backend):
    assert cir.decode_int(cir.add_w(enc(3, 4, clear_backend), enc(-5, 4, clear_backend))) == -2


@pytest.mark.parametrize("w", [1, 2, 4])
def test_add_exhaustive(w, clear_backend):
    lo, hi = cir.int_range(w)
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            got = cir.decode_int(cir.add_w(enc(a, w, clear_backend), enc(b, w, clear_backend)))
            assert got == wrap(a + b, w), (a, b)


def test_add_width_mismatch(clear_backend):
    with pytest.raises(ValueError):
        cir.add_w(enc(1, 4, clear_backend), enc(1, 8, clear_backend))


@pytest.mark.parametrize("w,count", [(1, 6), (4, 24), (8, 48)])
def test_sub_gate_counts(w, count):
    backend = ClearBackend()
    lo, hi = cir.int_range(w)
    cir.sub_w(enc(hi, w, backend), enc(lo, w, backend))
    assert backend.counter.boots_gates == count


def test_sub_examples(clear_backend):
    assert cir.decode_int(cir.sub_w(enc(2, 4, clear_backend), enc(7, 4, clear_backend))) == -5
    rng = random.Random(5)
    for _ in range(20):
        a = rng.randint(-8, 7)
        assert cir.decode_int(cir.sub_w(enc(a, 4, clear_backend), enc(a, 4, clear_backend))) == 0


@pytest.mark.parametrize("w", [1, 2, 4])
def test_sub_exhaustive(w, clear_backend):
    lo, hi = cir.int_range(w)
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            got = cir.decode_int(cir.sub_w(enc(a, w, clear_backend), enc(b, w, clear_backend)))
            assert got == wrap(a - b, w), (a, b)


def test_homadder_kinds(clear_backend):
    fa = lambda a, b, c: ((a + b + c) & 1, (a + b + c) >> 1)
    for a, b, c in itertools.product((0, 1), repeat=3):
        bits = lambda: (clear_backend.encrypt(a), clear_backend.encrypt(b),
                        clear_backend.encrypt(c))
        s, co = cir.homadder_cell(AdderCellKind.ADDER0, *bits())
        assert (clear_backend.decrypt(s), clear_backend.decrypt(co)) == fa(a, b, c)
        s, co = cir.homadder_cell(AdderCellKind.ADDER1, *bits())
        ref_s, ref_c = fa(1 - a, b, c)
        assert (clear_backend.decrypt(s), clear_backend.decrypt(co)) == (1 - ref_s, ref_c)
        s, co = cir.homadder_cell(AdderCellKind.ADDER2, *bits())
        ref_s, ref_c = fa(1 - a, 1 - b, c)
        assert (clear_backend.decrypt(s), clear_backend.decrypt(co)) == (ref_s, 1 - ref_c)


def test_homadder_cost_is_five_gates(clear_backend):
    for kind in AdderCellKind:
        before = clear_backend.counter.refreshes
        cir.homadder_cell(kind, clear_backend.encrypt(1), clear_backend.encrypt(0),
                          clear_backend.encrypt(1))
        assert clear_backend.counter.refreshes - before == 5


@pytest.mark.parametrize("w,count", [(2, 14), (4, 84), (8, 392)])
def test_mul_gate_counts(w, count):
    backend = ClearBackend()
    cir.mul_w(enc(1, w, backend), enc(-1, w, backend))
    assert backend.counter.boots_gates == count


def test_mul_examples(clear_backend):
    assert cir.decode_int(cir.mul_w(enc(-3, 8, clear_backend), enc(5, 8, clear_backend))) == -15
    with pytest.raises(ValueError):
        cir.mul_w(enc(0, 1, clear_backend), enc(0, 1, clear_backend))


@pytest.mark.parametrize("w", [2, 3, 4])
def test_mul_exhaustive(w, clear_backend):
    lo, hi = cir.int_range(w)
    for a in range(lo, hi + 1):
        for b in range(lo, hi + 1):
            got = cir.decode_int(cir.mul_w(enc(a, w, clear_backend), enc(b, w, clear_backend)))
            assert got == wrap(a * b, w), (a, b)


def test_cas_cell_semantics(clear_backend):
    maj = lambda x, y, z: (x & y) | (x & z) | (y & z)
    for a, b, c in itertools.product((0, 1), repeat=3):
        # p=0: plain full adder
        s, co = cir.cas_cell(clear_backend.encrypt(a), clear_backend.encrypt(b),
                             clear_backend.encrypt(c), clear_backend.encrypt(0))
        assert clear_backend.decrypt(s) == a ^ b ^ c
        assert clear_backend.decrypt(co) == maj(a, b, c)
        # p=1: the conditional-subtract cell (adds the complemented divisor bit)
        s, co = cir.cas_cell(clear_backend.encrypt(a), clear_backend.encrypt(b),
                             clear_backend.encrypt(c), clear_backend.encrypt(1))
        assert clear_backend.decrypt(s) == a ^ (1 - b) ^ c
        assert clear_backend.decrypt(co) == maj(a, 1 - b, c)


def test_cas_cell_cost(clear_backend):
    c = clear_backend.counter
    before = c.snapshot()
    cir.cas_cell(clear_backend.encrypt(1), clear_backend.encrypt(0),
                 clear_backend.encrypt(1), clear_backend.encrypt(1))
    after = c.snapshot()
    assert after["refreshes"] - before["refreshes"] == 7
    assert after["xor_gates"] - before["xor_gates"] == 3
    assert after["or_gates"] - before["or_gates"] == 2
    assert after["and_gates"] - before["and_gates"] == 2


def test_compensate(clear_backend):
    for v in range(0, 8):
        ct = cir.compensate(enc(v, 4, clear_backend))
        assert [clear_backend.decrypt(b) for b in ct.bits] == \
            [clear_backend.decrypt(b) for b in enc(v, 4, clear_backend).bits]
    ct = cir.compensate(enc(-5, 4, clear_backend))
    assert [clear_backend.decrypt(b) for b in ct.bits] == [1, 0, 1, 1]
    for v in range(-7, 8):
        ct = cir.compensate(cir.compensate(enc(v, 4, clear_backend)))
        assert cir.decode_int(ct) == v


@pytest.mark.parametrize("w", [1, 2, 3])
def test_div_exhaustive_valid(w, clear_backend):
    lo2, hi2 = cir.int_range(2 * w)
    lo, hi = cir.int_range(w)
    for a in range(lo2, hi2 + 1):
        for b in range(lo, hi + 1):
            if b == 0:
                continue
            qt = tdiv(a, b)
            if not lo <= qt <= hi:
                continue
            q, r = cir.div_w(enc(a, 2 * w, clear_backend), enc(b, w, clear_backend))
            assert (cir.decode_int(q), cir.decode_int(r)) == (qt, a - qt * b), (a, b)


def test_div_example_and_layers():
    backend = ClearBackend()
    q, r = cir.div_w(cir.encode_int(7, 8, backend), cir.encode_int(-2, 4, backend))
    assert (cir.decode_int(q), cir.decode_int(r)) == (-3, 1)
    assert backend.counter.div_layers == 4
    with pytest.raises(ValueError):
        cir.div_w(cir.encode_int(1, 8, backend), cir.encode_int(1, 3, backend))


def test_ring_laws_w4():
    backend = ClearBackend()
    w = 4
    values = range(-8, 8)
    cts = {v: enc(v, w, backend) for v in values}
    for a in values:
        for b in values:
            ab = cir.decode_int(cir.add_w(cts[a], cts[b]))
            ba = cir.decode_int(cir.add_w(cts[b], cts[a]))
            assert ab == ba == wrap(a + b, w)
            mab = cir.decode_int(cir.mul_w(cts[a], cts[b]))
            mba = cir.decode_int(cir.mul_w(cts[b], cts[a]))
            assert mab == mba == wrap(a * b, w)
    rng = random.Random(3)
    for _ in range(60):
        a, b, c = (rng.randint(-8, 7) for _ in range(3))
        left = cir.add_w(cir.add_w(cts[a], cts[b]), cts[c])
        right = cir.add_w(cts[a], cir.add_w(cts[b], cts[c]))
        assert cir.decode_int(left) == cir.decode_int(right) == wrap(a + b + c, w)
        dist_l = cir.mul_w(cts[a], cir.add_w(cts[b], cts[c]))
        dist_r = cir.add_w(cir.mul_w(cts[a], cts[b]), cir.mul_w(cts[a], cts[c]))
        assert cir.decode_int(dist_l) == cir.decode_int(dist_r) == wrap(a * (b + c), w)


def test_lwe_backend_operators(two_party):
    keys, _, backend, sampler = two_party
    rng = random.Random(77)
    w = 4
    for _ in range(6):
        a, b = rng.randint(-8, 7), rng.randint(-8, 7)
        A = cir.encode_int(a, w, backend, keys[0], sampler)
        B = cir.encode_int(b, w, backend, keys[1], sampler)
        assert cir.decode_int(cir.add_w(A, B), keys) == wrap(a + b, w)
        assert cir.decode_int(cir.sub_w(A, B), keys) == wrap(a - b, w)
        assert cir.decode_int(cir.mul_w(A, B), keys) == wrap(a * b, w)
    a, b = 7, -2
    A = cir.encode_int(a, 2 * w, backend, keys[0], sampler)
    B = cir.encode_int(b, w, backend, keys[1], sampler)
    q, r = cir.div_w(A, B)
    assert (cir.decode_int(q, keys), cir.decode_int(r, keys)) == (-3, 1)


def test_no_noise_budget_error_at_w16(two_party):
    keys, _, backend, sampler = two_party
    A = cir.encode_int(12345, 16, backend, keys[0], sampler)
    B = cir.encode_int(-321, 16, backend, keys[1], sampler)
    try:
        cir.add_w(A, B)
        cir.sub_w(A, B)
    except NoiseBudgetExceeded as exc:  # pragma: no cover
        pytest.fail(f"refresh margin violated: {exc}")


def test_int_serialization_round_trip(two_party):
    keys, _, backend, sampler = two_party
    ct = cir.encode_int(-7, 6, backend, keys[0], sampler)
    blob = ct.serialize()
    assert blob[:4] == b"MKIN"
    back = cir.deserialize_int(blob, backend)
    assert back.width == 6
    assert cir.decode_int(back, keys) == -7
    assert back.serialize() == blob


def test_widen_preserves_value(clear_backend):
    for v in (-8, -1, 0, 7):
        assert cir.decode_int(cir.widen(enc(v, 4, clear_backend), 8)) == v
    backend = ClearBackend()
    before = backend.counter.snapshot()
    cir.widen(enc(-3, 4, backend), 12)
    assert backend.counter.snapshot() == before
