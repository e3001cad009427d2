"""Two's-complement integer circuits over the gate layer.

Widths are little-endian bit vectors; the top bit is the sign. The adder is a
ripple of 5-gate full-adder cells (two XOR for the sum, a fused three-gate
carrier reusing the first XOR), the subtractor negates with w bootstrapped
XOR-with-one gates and adds with carry-in one, the multiplier is a signed
diagonal-sum array of 0/1/2-type adder cells, and the divider is a
non-restoring array of controlled add/subtract (CAS) cells wrapped in
sign handling.

Costs (bootstrapped gates, measured): adder 5w, subtractor 6w, multiplier
7w(w-1), divider w quotient layers of CAS cells plus sign/remainder stages.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .gates import (
    BitCt,
    GateBackend,
    TorusLweBackend,
    boots_and,
    boots_or,
    boots_xor,
    constant_bit,
    hom_not,
)
from . import lwe as _lwe

INT_MAGIC = b"MKIN"


class AdderCellKind(Enum):
    """Full-adder variants of the signed multiplier array; the index says how
    many ports carry negated logic (handling weight -1 partial products)."""

    ADDER0 = 0
    ADDER1 = 1
    ADDER2 = 2


@dataclass(frozen=True)
class IntCiphertext:
    """Width-w little-endian vector of bit ciphertexts, two's complement."""

    width: int
    bits: tuple[BitCt, ...]

    def __post_init__(self):
        if self.width < 1 or len(self.bits) != self.width:
            raise ValueError(f"need exactly {self.width} bits, got {len(self.bits)}")

    @property
    def backend(self) -> GateBackend:
        return self.bits[0].backend

    @property
    def sign(self) -> BitCt:
        return self.bits[-1]

    def serialize(self) -> bytes:
        head = INT_MAGIC + struct.pack("<H", self.width)
        return head + b"".join(bit.value.serialize() for bit in self.bits)


def parse_int_blob(data: bytes, parties: Sequence[int], n: int) -> tuple[int, list["_lwe.MkLweCiphertext"]]:
    """Split a serialized integer ciphertext into its width and raw bit
    ciphertexts, without binding to an evaluation backend."""
    if data[:4] != INT_MAGIC:
        raise ValueError("bad magic; not a serialized integer ciphertext")
    (w,) = struct.unpack_from("<H", data, 4)
    off = 6
    per = _lwe.serialized_size(len(parties), n)
    cts = []
    for _ in range(w):
        cts.append(_lwe.deserialize(data[off:off + per], parties))
        off += per
    return w, cts


def deserialize_int(data: bytes, backend: TorusLweBackend) -> IntCiphertext:
    w, cts = parse_int_blob(data, backend.parties, backend.params.n)
    return IntCiphertext(w, tuple(BitCt(backend, ct) for ct in cts))


def int_range(w: int) -> tuple[int, int]:
    return -(1 << (w - 1)), (1 << (w - 1)) - 1


def encode_int(v: int, w: int, backend: GateBackend, key=None, sampler=None) -> IntCiphertext:
    lo, hi = int_range(w)
    if not lo <= v <= hi:
        raise ValueError(f"{v} outside the {w}-bit two's complement range [{lo}, {hi}]")
    u = v & ((1 << w) - 1)
    bits = tuple(backend.encrypt((u >> i) & 1, key, sampler) for i in range(w))
    return IntCiphertext(w, bits)


def decode_int(ct: IntCiphertext, keys=None) -> int:
    u = 0
    for i, bit in enumerate(ct.bits):
        u |= ct.backend.decrypt(bit, keys) << i
    if u >= 1 << (ct.width - 1):
        u -= 1 << ct.width
    return u


def _require_same(a: IntCiphertext, b: IntCiphertext) -> None:
    if a.width != b.width:
        raise ValueError(f"width mismatch: {a.width} vs {b.width}")
    if a.backend is not b.backend:
        raise ValueError("operands belong to different backends")


def full_adder_cell(a: BitCt, b: BitCt, cin: BitCt, carrier: str = "fused",
                    cin_zero: bool = False) -> tuple[BitCt, BitCt]:
    """One-bit adder: 5 bootstrapped gates (2 XOR + 2 AND + 1 OR).

    ``carrier="naive"`` evaluates the textbook 3-AND/2-OR majority instead
    (7 gates total), kept for the cost comparison. ``cin_zero`` may only be
    set when ``cin`` is the constant-0 carry-in; it swaps the second AND to
    (a AND cin), which shortens the refresh chain at the same cost.
    """
    s1 = boots_xor(a, b)
    out = boots_xor(cin, s1)
    if carrier == "naive":
        g1 = boots_and(a, b)
        g2 = boots_and(a, cin)
        g3 = boots_and(b, cin)
        cout = boots_or(boots_or(g1, g2), g3)
    else:
        g1 = boots_and(a, b)
        g2 = boots_and(a if cin_zero else s1, cin)
        cout = boots_or(g1, g2)
    return out, cout


def add_w(a: IntCiphertext, b: IntCiphertext, carrier: str = "fused") -> IntCiphertext:
    """w-bit sum modulo 2**w; carry-in fixed to 0 and the last carry-out,
    though evaluated, is abandoned. 5w bootstrapped gates."""
    _require_same(a, b)
    carry = constant_bit(0, a.backend)
    outs = []
    for i in range(a.width):
        s, carry = full_adder_cell(a.bits[i], b.bits[i], carry, carrier=carrier,
                                   cin_zero=(i == 0 and carrier != "naive"))
        outs.append(s)
    return IntCiphertext(a.width, tuple(outs))


def sub_w(a: IntCiphertext, b: IntCiphertext) -> IntCiphertext:
    """a - b via two's complement negation: every bit of b flips through a
    bootstrapped XOR-with-one and the +1 rides the adder's carry-in.
    6w bootstrapped gates."""
    _require_same(a, b)
    one = constant_bit(1, a.backend)
    carry = one
    outs = []
    for i in range(a.width):
        nb = boots_xor(b.bits[i], one)
        s, carry = full_adder_cell(a.bits[i], nb, carry)
        outs.append(s)
    return IntCiphertext(a.width, tuple(outs))


def homadder_cell(kind: AdderCellKind, a: BitCt, b: BitCt, cin: BitCt) -> tuple[BitCt, BitCt]:
    """The three multiplier cell variants; negations are zero-cost NOTs, so
    each kind stays at 5 bootstrapped gates.

    ADDER0: plain full adder.
    ADDER1: full adder on (NOT a, b, cin) with the sum negated.
    ADDER2: full adder on (NOT a, NOT b, cin) with the carry negated.
    """
    if kind is AdderCellKind.ADDER0:
        return full_adder_cell(a, b, cin)
    if kind is AdderCellKind.ADDER1:
        s, c = full_adder_cell(hom_not(a), b, cin)
        return hom_not(s), c
    s, c = full_adder_cell(hom_not(a), hom_not(b), cin)
    return s, hom_not(c)


def _signed_cell(ops: list[tuple[BitCt, bool]]) -> tuple[BitCt, bool, BitCt, bool]:
    """Dispatch one multiplier cell on (wire, negative-weight) operand pairs.

    Cell kind follows the count of negative-weight inputs; with all three
    negative a plain adder serves, with both outputs re-tagged negative
    (-x-y-z = -(sum) - 2*(carry)). Returns (sum, sum_neg, carry, carry_neg).
    """
    ops = sorted(ops, key=lambda t: not t[1])  # negative-weight operands first
    wires = [t[0] for t in ops]
    negs = sum(1 for t in ops if t[1])
    if negs == 0:
        s, c = homadder_cell(AdderCellKind.ADDER0, *wires)
        return s, False, c, False
    if negs == 1:
        s, c = homadder_cell(AdderCellKind.ADDER1, *wires)
        return s, True, c, False
    if negs == 2:
        s, c = homadder_cell(AdderCellKind.ADDER2, *wires)
        return s, False, c, True
    s, c = homadder_cell(AdderCellKind.ADDER0, *wires)
    return s, True, c, True


def mul_w(a: IntCiphertext, b: IntCiphertext) -> IntCiphertext:
    """Signed array multiplier, low word of the product (mod 2**w).

    w-1 diagonal-sum rows of w cells: row r absorbs the partial products of
    b_r; sums route diagonally down, carries ripple along the row, and the
    top column hands its carry to the row below. Sign-bit partial products
    carry weight -1 and steer the 0/1/2 cell kinds. Every cell forms both of
    its addend inputs through an AND gate (accumulation rows pass the routed
    operand through an AND with constant one), keeping the uniform 7-gate
    cell budget: 7w(w-1) bootstrapped gates total. The high word, whose top
    bit is the final row's carry-out, is evaluated and discarded.
    """
    _require_same(a, b)
    w = a.width
    if w < 2:
        raise ValueError("multiplier needs width >= 2")
    backend = a.backend
    zero = constant_bit(0, backend)
    one = constant_bit(1, backend)

    def pp(j: int, i: int) -> tuple[BitCt, bool]:
        neg = (j == w - 1) != (i == w - 1)
        return boots_and(a.bits[j], b.bits[i]), neg

    outs = [boots_and(a.bits[0], b.bits[0])]

    sums: list[tuple[BitCt, bool]] = []
    carries: list[tuple[BitCt, bool]] = []
    for r in range(1, w):
        new_sums: list[tuple[BitCt, bool]] = []
        new_carries: list[tuple[BitCt, bool]] = []
        for c in range(w):
            x = pp(c, r)
            if r == 1:
                y = pp(c + 1, 0) if c + 1 <= w - 1 else (zero, False)
            else:
                routed = sums[c + 1] if c + 1 <= w - 1 else carries[w - 1]
                y = (boots_and(routed[0], one), routed[1])
            z = (zero, False) if c == 0 else new_carries[c - 1]
            s, s_neg, co, co_neg = _signed_cell([x, y, z])
            new_sums.append((s, s_neg))
            new_carries.append((co, co_neg))
        sums, carries = new_sums, new_carries
        out_bit, out_neg = sums[0]
        assert not out_neg, "result bits of the signed array must be positive-weight"
        outs.append(out_bit)
    return IntCiphertext(w, tuple(outs))


def cas_cell(a: BitCt, b: BitCt, cin: BitCt, p: BitCt) -> tuple[BitCt, BitCt]:
    """Controlled add/subtract cell: adds b when p=0, subtracts when p=1.
    3 XOR + 2 OR + 2 AND = 7 bootstrapped gates."""
    x1 = boots_xor(b, p)
    x2 = boots_xor(x1, cin)
    out = boots_xor(a, x2)
    o1 = boots_or(a, cin)
    a1 = boots_and(o1, x1)
    a2 = boots_and(a, cin)
    cout = boots_or(a1, a2)
    return out, cout


def _cas_row(avec: Sequence[BitCt], bvec: Sequence[BitCt], p: BitCt) -> list[BitCt]:
    """One divider row: avec +/- bvec under control p; the row's carry-in is
    p itself (the +1 of two's complement subtraction) and the final carry is
    dropped, i.e. the row works modulo the window width."""
    cin = p
    outs = []
    for a, b in zip(avec, bvec):
        o, cin = cas_cell(a, b, cin, p)
        outs.append(o)
    return outs


def _negate_if(bits: list[BitCt], s: BitCt) -> list[BitCt]:
    """Conditional two's complement negation: (bits XOR s) + s.

    The low bit passes through unchanged (x0 ^ s ^ s); the borrow chain is
    c1 = NOT(x0) AND s, c_{i+1} = y_i AND c_i. 3v-3 bootstrapped gates."""
    v = len(bits)
    if v == 0:
        return []
    out = [bits[0]]
    if v == 1:
        return out
    c = boots_and(hom_not(bits[0]), s)
    for i in range(1, v):
        y = boots_xor(bits[i], s)
        out.append(boots_xor(y, c))
        if i < v - 1:
            c = boots_and(y, c)
    return out


def compensate(x: IntCiphertext) -> IntCiphertext:
    """Map between two's complement and sign-magnitude form (both ways: the
    operation is its own inverse). The sign bit conditions a negation of the
    magnitude bits; values whose magnitude needs the full width (the minimum
    value) are outside the sign-magnitude range and come back as garbage."""
    s = x.sign
    low = _negate_if(list(x.bits[:-1]), s)
    return IntCiphertext(x.width, tuple(low + [s]))


def div_w(a: IntCiphertext, b: IntCiphertext) -> tuple[IntCiphertext, IntCiphertext]:
    """Non-restoring array division: 2w-bit dividend, w-bit divisor ->
    (quotient, remainder), truncating toward zero; the remainder takes the
    dividend's sign.

    Stages: full-width conditional negations produce |a| and |b|; w quotient
    layers of (w+1)-cell CAS rows run the non-restoring recurrence (each
    layer's control is the previous remainder's sign, first layer subtracts);
    a correction row adds |b| back when the last remainder is negative; one
    bootstrapped XOR forms the quotient sign and conditional negations re-encode
    the outputs. The caller owes b != 0 and a quotient that fits in w bits —
    under encryption neither is detectable, and violations yield well-defined
    garbage.
    """
    w = b.width
    if a.width != 2 * w:
        raise ValueError(f"dividend must be {2 * w} bits for a {w}-bit divisor")
    if a.backend is not b.backend:
        raise ValueError("operands belong to different backends")
    backend = a.backend
    zero = constant_bit(0, backend)
    one = constant_bit(1, backend)

    sa, sb = a.sign, b.sign
    d_mag = _negate_if(list(a.bits), sa)       # |a|, 2w-bit unsigned
    b_mag = _negate_if(list(b.bits), sb)       # |b|, w-bit unsigned
    b_op = b_mag + [zero]                      # window is divisor width + sign

    rem = [d_mag[w + i] for i in range(w)] + [zero]
    p = one                                    # remainder starts >= 0: subtract
    qbits: list[Optional[BitCt]] = [None] * w
    for i in range(w - 1, -1, -1):
        window = [d_mag[i]] + rem[:w]          # 2R + next dividend bit
        rem = _cas_row(window, b_op, p)
        backend.counter.div_layers += 1
        q = hom_not(rem[w])                    # quotient bit: remainder >= 0
        qbits[i] = q
        p = q
    # non-restoring remainders end in (-|b|, |b|); add |b| back when negative
    gated = [boots_and(b_mag[j], rem[w]) for j in range(w)] + [zero]
    rem = _cas_row(rem, gated, zero)

    sq = boots_xor(sa, sb)
    quot = IntCiphertext(w, tuple(_negate_if(qbits, sq)))
    rema = IntCiphertext(w, tuple(_negate_if(rem[:w], sa)))
    return quot, rema


def widen(x: IntCiphertext, new_width: int) -> IntCiphertext:
    """Sign extension by wire copies of the top bit; costs no gates."""
    if new_width < x.width:
        raise ValueError("widen cannot shrink")
    return IntCiphertext(new_width, x.bits + (x.sign,) * (new_width - x.width))
