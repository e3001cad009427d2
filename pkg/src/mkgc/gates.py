"""Seven basic homomorphic gates behind a two-backend abstraction.

Every bootstrapped gate is one linear combination of ciphertexts followed by
one refresh; the NOT gate is a single subtraction from a noiseless constant
and costs no refresh. The ``Clear`` backend evaluates the same circuit on
plaintext bits and serves as the correctness oracle for the ``TorusLwe``
backend; both share the gate/refresh accounting so cost reports can run on
either.

Gate constants (as torus points added to the combination):

    AND  -1/8 + c1 + c2        NAND  5/8 - c1 - c2
    OR    1/8 + c1 + c2        NOR   3/8 - c1 - c2
    XOR   2 * (c1 - c2)        XNOR  1/2 - 2 * (c1 - c2)
    NOT   1/4 - c  (no refresh)

NOR's published constant 1/8 fails NOR(0,0) under the m/4 encoding, and
XNOR's published constant 1/4 puts its output phases exactly on the decision
band edges (correct only at zero noise); both are replaced by the unique
margin-consistent constants above. The published variants are preserved in
:func:`nor_combination_phase` / :func:`xnor_combination_phase` so the
discrepancy stays reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

from . import lwe as _lwe
from .lwe import LweParams, LweSecretKey, MkLweCiphertext, RefreshOracle
from .torus import NoiseSampler, Torus32, torus_from_rational


@dataclass
class GateCounter:
    """Monotone evaluation counters: per-gate-type, refreshes, and the
    ciphertext-combinator calls behind them."""

    and_gates: int = 0
    or_gates: int = 0
    nand_gates: int = 0
    nor_gates: int = 0
    xor_gates: int = 0
    xnor_gates: int = 0
    not_gates: int = 0
    constants: int = 0
    refreshes: int = 0
    adds: int = 0
    subs: int = 0
    muls: int = 0
    mod_to_ts: int = 0
    div_layers: int = 0

    _FIELDS = (
        "and_gates", "or_gates", "nand_gates", "nor_gates", "xor_gates",
        "xnor_gates", "not_gates", "constants", "refreshes", "adds", "subs",
        "muls", "mod_to_ts", "div_layers",
    )

    @property
    def boots_gates(self) -> int:
        return (self.and_gates + self.or_gates + self.nand_gates +
                self.nor_gates + self.xor_gates + self.xnor_gates)

    def snapshot(self) -> dict:
        return {name: getattr(self, name) for name in self._FIELDS}

    def merge(self, other: "GateCounter") -> None:
        for name in self._FIELDS:
            setattr(self, name, getattr(self, name) + getattr(other, name))

    def reset(self) -> None:
        for name in self._FIELDS:
            setattr(self, name, 0)


class BitCt:
    """One encrypted (or clear) bit plus its refresh-chain depth."""

    __slots__ = ("backend", "value", "depth")

    def __init__(self, backend, value, depth=0):
        self.backend = backend
        self.value = value
        self.depth = depth


class ClearBackend:
    """Plaintext oracle substrate: BitCt.value is a bool."""

    kind = "clear"

    def __init__(self, counter: Optional[GateCounter] = None):
        self.counter = counter or GateCounter()

    def spawn(self, key: int) -> "ClearBackend":
        return ClearBackend(GateCounter())

    def constant(self, m: int) -> BitCt:
        self.counter.constants += 1
        return BitCt(self, bool(m))

    def encrypt(self, m: int, key=None, sampler=None) -> BitCt:
        return BitCt(self, bool(m))

    def decrypt(self, bit: BitCt, keys=None) -> int:
        return int(bit.value)

    def gate_and(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.and_gates += 1
        c.refreshes += 1
        return BitCt(self, x.value & y.value, max(x.depth, y.depth) + 1)

    def gate_or(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.or_gates += 1
        c.refreshes += 1
        return BitCt(self, x.value | y.value, max(x.depth, y.depth) + 1)

    def gate_nand(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.nand_gates += 1
        c.refreshes += 1
        return BitCt(self, not (x.value & y.value), max(x.depth, y.depth) + 1)

    def gate_nor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.nor_gates += 1
        c.refreshes += 1
        return BitCt(self, not (x.value | y.value), max(x.depth, y.depth) + 1)

    def gate_xor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.xor_gates += 1
        c.refreshes += 1
        return BitCt(self, x.value ^ y.value, max(x.depth, y.depth) + 1)

    def gate_xnor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.xnor_gates += 1
        c.refreshes += 1
        return BitCt(self, not (x.value ^ y.value), max(x.depth, y.depth) + 1)

    def gate_not(self, x: BitCt) -> BitCt:
        self.counter.not_gates += 1
        return BitCt(self, not x.value, x.depth)


class TorusLweBackend:
    """Real substrate: BitCt.value is a multi-key LWE ciphertext."""

    kind = "torus-lwe"

    def __init__(self, params: LweParams, parties: Sequence[int], oracle: RefreshOracle,
                 counter: Optional[GateCounter] = None):
        self.params = params
        self.parties = tuple(parties)
        self.oracle = oracle
        self.counter = counter or GateCounter()
        self._const_cache: dict[tuple[int, int], MkLweCiphertext] = {}

    def spawn(self, key: int) -> "TorusLweBackend":
        return TorusLweBackend(self.params, self.parties, self.oracle.spawn(key), GateCounter())

    def _const(self, num: int, den: int) -> MkLweCiphertext:
        ct = self._const_cache.get((num, den))
        if ct is None:
            ct = _lwe.trivial_ct(torus_from_rational(num, den), self.parties, self.params.n)
            self._const_cache[(num, den)] = ct
        return ct

    def constant(self, m: int) -> BitCt:
        c = self.counter
        c.constants += 1
        if m:
            c.mod_to_ts += 1
        return BitCt(self, self._const(m, 4))

    def encrypt(self, m: int, key: LweSecretKey, sampler: NoiseSampler) -> BitCt:
        ct = _lwe.sym_enc(key, m, self.params, sampler)
        return BitCt(self, _lwe.extend(ct, self.parties))

    def decrypt(self, bit: BitCt, keys) -> int:
        return _lwe.sym_dec(bit.value, keys)

    # Each bootstrapped gate: constant + linear combination, then refresh.

    def gate_and(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.and_gates += 1
        c.mod_to_ts += 1
        c.adds += 2
        c.refreshes += 1
        combo = _lwe.lwe_add(_lwe.lwe_add(self._const(-1, 8), x.value), y.value)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_or(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.or_gates += 1
        c.mod_to_ts += 1
        c.adds += 2
        c.refreshes += 1
        combo = _lwe.lwe_add(_lwe.lwe_add(self._const(1, 8), x.value), y.value)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_nand(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.nand_gates += 1
        c.mod_to_ts += 1
        c.subs += 2
        c.refreshes += 1
        combo = _lwe.lwe_sub(_lwe.lwe_sub(self._const(5, 8), x.value), y.value)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_nor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.nor_gates += 1
        c.mod_to_ts += 1
        c.subs += 2
        c.refreshes += 1
        combo = _lwe.lwe_sub(_lwe.lwe_sub(self._const(3, 8), x.value), y.value)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_xor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.xor_gates += 1
        c.subs += 1
        c.muls += 1
        c.refreshes += 1
        diff = _lwe.lwe_sub(x.value, y.value)
        combo = _lwe.lwe_mul_const(self._const(0, 1), diff, 2)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_xnor(self, x: BitCt, y: BitCt) -> BitCt:
        c = self.counter
        c.xnor_gates += 1
        c.mod_to_ts += 1
        c.subs += 1
        c.muls += 1
        c.refreshes += 1
        diff = _lwe.lwe_sub(x.value, y.value)
        combo = _lwe.lwe_mul_const(self._const(1, 2), diff, -2)
        return BitCt(self, self.oracle.refresh(combo), max(x.depth, y.depth) + 1)

    def gate_not(self, x: BitCt) -> BitCt:
        c = self.counter
        c.not_gates += 1
        c.mod_to_ts += 1
        c.subs += 1
        combo = _lwe.lwe_sub(self._const(1, 4), x.value)
        return BitCt(self, combo, x.depth)


GateBackend = ClearBackend | TorusLweBackend


def _check_same_backend(x: BitCt, y: BitCt) -> None:
    if x.backend is not y.backend:
        raise ValueError("gate inputs belong to different backends")


def boots_and(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_and(x, y)


def boots_or(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_or(x, y)


def boots_nand(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_nand(x, y)


def boots_nor(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_nor(x, y)


def boots_xor(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_xor(x, y)


def boots_xnor(x: BitCt, y: BitCt) -> BitCt:
    _check_same_backend(x, y)
    return x.backend.gate_xnor(x, y)


def hom_not(x: BitCt) -> BitCt:
    return x.backend.gate_not(x)


def constant_bit(m: int, backend: GateBackend) -> BitCt:
    if m not in (0, 1):
        raise ValueError(f"constant bit must be 0 or 1, got {m}")
    return backend.constant(m)


def nor_combination_phase(m1: int, m2: int, constant_eighths: int = 1) -> Torus32:
    """Exact phase of the published NOR combination t - c1 - c2 for noiseless
    inputs, with t given in eighths (published value 1, corrected value 3)."""
    t = torus_from_rational(constant_eighths, 8)
    return t - torus_from_rational(m1, 4) - torus_from_rational(m2, 4)


def xnor_combination_phase(m1: int, m2: int, constant_eighths: int = 2) -> Torus32:
    """Exact phase of the XNOR combination t - 2*(c1 - c2) for noiseless
    inputs, with t in eighths (published value 2 = 1/4, corrected 4 = 1/2)."""
    t = torus_from_rational(constant_eighths, 8)
    diff = torus_from_rational(m1, 4) - torus_from_rational(m2, 4)
    return t - diff.scale(2)
