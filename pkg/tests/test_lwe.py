import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mkgc import lwe
from mkgc.lwe import (
    LweParams,
    NoiseBudgetExceeded,
    RefreshOracle,
    band_decision,
    extend,
    keygen,
    lwe_add,
    lwe_mul_const,
    lwe_sub,
    phase,
    sym_dec,
    sym_enc,
    trivial_ct,
)
from mkgc.torus import TORUS_MOD, NoiseSampler, Torus32, torus_from_rational

NOISELESS = LweParams(n=32, alpha=0.0)


def _nl_sampler(seed=0):
    return NoiseSampler(0.0, seed=seed)


def test_keygen_length_and_determinism():
    params = LweParams()
    key = keygen(params, 0, NoiseSampler(params.alpha, seed=5))
    assert len(key.s) == 560
    k1 = keygen(NOISELESS, 1, _nl_sampler(9))
    k2 = keygen(NOISELESS, 1, _nl_sampler(9))
    assert (k1.s == k2.s).all()


def test_keygen_independent_keys():
    params = LweParams(n=256, alpha=0.0)
    dists = []
    for trial in range(50):
        a = keygen(params, 0, _nl_sampler(trial * 2))
        b = keygen(params, 1, _nl_sampler(trial * 2 + 1))
        dists.append(int((a.s != b.s).sum()))
    mean = sum(dists) / len(dists)
    assert abs(mean - params.n / 2) < params.n * 0.08


def test_enc_dec_round_trip(two_party):
    keys, _, _, enc = two_party
    for m in (0, 1):
        ct = sym_enc(keys[0], m, keys and LweParams(n=32, alpha=1e-7), enc)
        assert sym_dec(ct, [keys[0]]) == m


def test_noiseless_phase_is_exact():
    key = keygen(NOISELESS, 0, _nl_sampler(1))
    for m in (0, 1):
        ct = sym_enc(key, m, NOISELESS, _nl_sampler(2))
        assert phase(ct, [key]) == torus_from_rational(m, 4)


def test_phase_linearity_and_extension():
    key = keygen(NOISELESS, 0, _nl_sampler(3))
    c1 = sym_enc(key, 1, NOISELESS, _nl_sampler(4))
    c2 = sym_enc(key, 1, NOISELESS, _nl_sampler(5))
    s = lwe_add(c1, c2)
    assert phase(s, [key]) == torus_from_rational(1, 2)
    other = keygen(NOISELESS, 1, _nl_sampler(6))
    ext = extend(c1, (0, 1))
    assert phase(ext, [key, other]) == phase(c1, [key])


def test_phase_missing_key():
    key = keygen(NOISELESS, 0, _nl_sampler(1))
    ct = extend(sym_enc(key, 0, NOISELESS, _nl_sampler(2)), (0, 1))
    with pytest.raises(KeyError):
        phase(ct, [key])


def test_sym_dec_nearest_and_tie():
    key = keygen(NOISELESS, 0, _nl_sampler(1))
    def ct_with_phase(t):
        return trivial_ct(t, (0,), NOISELESS.n)
    assert sym_dec(ct_with_phase(Torus32(round(0.01 * TORUS_MOD))), [key]) == 0
    assert sym_dec(ct_with_phase(Torus32(round(0.24 * TORUS_MOD))), [key]) == 1
    # exact tie at distance 1/8 breaks toward 1, on both sides
    assert sym_dec(ct_with_phase(torus_from_rational(1, 8)), [key]) == 1
    assert sym_dec(ct_with_phase(torus_from_rational(5, 8)), [key]) == 1


def test_extend_structure_and_idempotence():
    key = keygen(NOISELESS, 0, _nl_sampler(7))
    ct = sym_enc(key, 1, NOISELESS, _nl_sampler(8))
    ext = extend(ct, (0, 1))
    assert ext.parties == (0, 1)
    assert (ext.a[1] == 0).all()
    assert extend(ext, (0, 1)) is ext
    other = keygen(NOISELESS, 1, _nl_sampler(9))
    assert sym_dec(ext, [key, other]) == sym_dec(ct, [key])
    with pytest.raises(ValueError):
        extend(ct, (1, 2))


def test_lwe_add_phases_and_variance():
    key = keygen(NOISELESS, 0, _nl_sampler(1))
    c1 = sym_enc(key, 1, NOISELESS, _nl_sampler(2))
    c2 = sym_enc(key, 0, NOISELESS, _nl_sampler(3))
    s = lwe_add(c1, c2)
    assert phase(s, [key]) == phase(c1, [key]) + phase(c2, [key])
    t1 = trivial_ct(Torus32(0), (0,), 32)
    a = lwe.MkLweCiphertext((0,), 0, t1.a, 1e-9)
    b = lwe.MkLweCiphertext((0,), 0, t1.a, 4e-9)
    assert lwe_add(a, b).variance == pytest.approx(5e-9)


def test_lwe_add_party_mismatch():
    t1 = trivial_ct(Torus32(0), (0,), 8)
    t2 = trivial_ct(Torus32(0), (1,), 8)
    with pytest.raises(ValueError):
        lwe_add(t1, t2)


def test_lwe_mul_const_rules():
    key = keygen(NOISELESS, 0, _nl_sampler(4))
    c1 = sym_enc(key, 1, NOISELESS, _nl_sampler(5))
    c2 = sym_enc(key, 1, NOISELESS, _nl_sampler(6))
    same = lwe_mul_const(c1, c2, 0)
    assert same.b == c1.b and (same.a == c1.a).all() and same.variance == c1.variance
    assert phase(lwe_mul_const(c1, c2, 1), [key]) == phase(lwe_add(c1, c2), [key])
    zero = trivial_ct(Torus32(0), (0,), 32)
    v = lwe.MkLweCiphertext((0,), 0, zero.a, 2.5e-10)
    scaled = lwe_mul_const(zero, v, 2)
    assert scaled.variance == pytest.approx(4 * 2.5e-10)
    with pytest.raises(ValueError):
        lwe_mul_const(c1, c2, 17)


def test_lwe_sub():
    key = keygen(NOISELESS, 0, _nl_sampler(7))
    c = sym_enc(key, 1, NOISELESS, _nl_sampler(8))
    assert phase(lwe_sub(c, c), [key]).raw == 0
    c0 = sym_enc(key, 0, NOISELESS, _nl_sampler(9))
    assert phase(lwe_sub(c, c0), [key]) == torus_from_rational(1, 4)
    a = lwe.MkLweCiphertext((0,), 0, c.a, 1e-10)
    b = lwe.MkLweCiphertext((0,), 0, c.a, 2e-10)
    assert lwe_sub(a, b).variance == pytest.approx(3e-10)


def test_trivial_ct_key_independent():
    k0 = keygen(NOISELESS, 0, _nl_sampler(1))
    k1 = keygen(NOISELESS, 1, _nl_sampler(2))
    zero = trivial_ct(Torus32(0), (0, 1), NOISELESS.n)
    quarter = trivial_ct(torus_from_rational(1, 4), (0, 1), NOISELESS.n)
    assert sym_dec(zero, [k0, k1]) == 0
    assert sym_dec(quarter, [k0, k1]) == 1
    assert phase(quarter, [k0, k1]) == torus_from_rational(1, 4)


def test_refresh_band_membership(two_party):
    keys, oracle, _, _ = two_party
    n = oracle.params.n
    # the four NAND input phases under the 1/4 encoding
    for eighths, want in ((5, 1), (3, 1), (1, 0)):
        ct = trivial_ct(torus_from_rational(eighths, 8), (0, 1), n)
        out = oracle.refresh(ct)
        assert sym_dec(out, keys) == want
        assert out.variance == pytest.approx(2 * oracle.params.alpha**2)
        assert band_decision(torus_from_rational(eighths, 8)) == want


def test_refresh_noise_budget():
    params = LweParams(n=16, alpha=0.0)
    key = keygen(params, 0, _nl_sampler(1))
    oracle = RefreshOracle([key], params)
    hot = lwe.MkLweCiphertext((0,), 0, np.zeros((1, 16), dtype=np.uint32),
                              (1 / 40) ** 2)  # 6*sigma > 1/8
    with pytest.raises(NoiseBudgetExceeded):
        oracle.refresh(hot)


def test_refresh_requires_all_keys(two_party):
    keys, oracle, _, _ = two_party
    stranger = trivial_ct(Torus32(0), (0, 5), oracle.params.n)
    with pytest.raises(KeyError):
        oracle.refresh(stranger)


def test_refresh_fresh_slots_nontrivial(two_party):
    keys, oracle, _, _ = two_party
    ct = oracle.refresh(trivial_ct(torus_from_rational(3, 8), (0, 1), oracle.params.n))
    assert (ct.a[0] != 0).any() and (ct.a[1] != 0).any()


def test_band_misclassification_rate():
    """Refreshing noisy gate-output phases with the real alpha never lands on
    the wrong side of the band (margin 1/8 vs 6 sigma of a few 1e-4)."""
    params = LweParams(n=64, alpha=3.05e-5)
    smp = NoiseSampler(params.alpha, seed=21)
    key = keygen(params, 0, smp)
    oracle = RefreshOracle([key], params, seed=22)
    noise = NoiseSampler(4 * params.alpha, seed=23)  # worst-case gate combo noise
    rng = np.random.default_rng(24)
    ideal = [0, TORUS_MOD // 8, 3 * TORUS_MOD // 8, 5 * TORUS_MOD // 8,
             7 * TORUS_MOD // 8, TORUS_MOD // 2]
    bad = 0
    for _ in range(2000):
        base = int(rng.choice(ideal))
        ph = Torus32(base + noise.sample().raw)
        ct = trivial_ct(ph, (0,), params.n)
        want = band_decision(Torus32(base))
        got = sym_dec(oracle.refresh(ct), [key])
        bad += got != want
    assert bad == 0


def test_serialization_round_trip_and_size(two_party):
    keys, _, _, enc = two_party
    params = LweParams(n=32, alpha=1e-7)
    ct = extend(sym_enc(keys[0], 1, params, enc), (0, 1))
    blob = ct.serialize()
    assert blob[:4] == b"MKLW"
    assert len(blob) == lwe.serialized_size(2, 32) == 12 + 4 * (1 + 2 * 32) + 8
    back = lwe.deserialize(blob, (0, 1))
    assert back.b == ct.b
    assert (back.a == ct.a).all()
    assert back.variance == ct.variance
    with pytest.raises(ValueError):
        lwe.deserialize(b"XXXX" + blob[4:], (0, 1))
    with pytest.raises(ValueError):
        lwe.deserialize(blob, (0, 1, 2))


@settings(max_examples=40, deadline=None)
@given(st.lists(st.sampled_from([-2, -1, 1, 2]), min_size=1, max_size=8))
def test_variance_ledger_matches_symbolic(coeffs):
    """After any add/mul-const chain on fresh ciphertexts the tracked variance
    is the symbolic sum of k_i^2 * alpha^2, to binary64 rounding."""
    params = LweParams(n=8, alpha=1e-6)
    smp = NoiseSampler(params.alpha, seed=31)
    key = keygen(params, 0, smp)
    acc = sym_enc(key, 0, params, smp)
    expect = params.alpha**2
    for k in coeffs:
        fresh = sym_enc(key, 0, params, smp)
        acc = lwe_mul_const(acc, fresh, k)
        expect += k * k * params.alpha**2
    assert acc.variance == pytest.approx(expect, rel=1e-12)


def test_add_with_noiseless_zero_matches_clear_oracle():
    params = LweParams(n=32, alpha=0.0)
    key = keygen(params, 0, _nl_sampler(41))
    enc = _nl_sampler(42)
    for m in (0, 1):
        for _ in range(25):
            c = sym_enc(key, m, params, enc)
            z = sym_enc(key, 0, params, enc)
            assert sym_dec(lwe_add(c, z), [key]) == m
