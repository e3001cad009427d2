"""Multi-key LWE ciphertexts over the discretized torus.

A ciphertext is ``(b, a_1 .. a_p)`` with one mask row per party and a tracked
noise variance. The decryption functional (phase) is ``b + sum_i <a_i, s_i>``;
messages are encoded as ``m/4``. The two linear combinators mirror the
multi-key ciphertext addition / constant-multiplication algorithms, including
their variance bookkeeping. Bootstrapping is replaced by a trusted
:class:`RefreshOracle` that evaluates the exact phase, decides the message by
the band [1/4, 3/4), and re-encrypts with fresh noise — functionally
equivalent to gate bootstrapping at desk scale, and NOT cryptographic.
"""

from __future__ import annotations

import hashlib
import math
import struct
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .torus import TORUS_MASK, TORUS_MOD, NoiseSampler, Torus32

#: Table-style default parameters: LWE dimension and fresh-noise stddev are
#: operational; the remaining columns are carried for report output only
#: (the ring/bootstrapping side is out of scope with the trusted refresh).
DEFAULT_METADATA = {
    "decomp_base_ks": 4,      # B' = 2^2
    "decomp_len_ks": 8,       # d'
    "rlwe_n": 1024,           # N
    "rlwe_beta": 3.72e-9,     # beta
    "decomp_base_bk": 512,    # B = 2^9
    "decomp_len_bk": 3,       # d
}

QUARTER = TORUS_MOD // 4
EIGHTH = TORUS_MOD // 8

SERIAL_MAGIC = b"MKLW"
SERIAL_VERSION = 1


class NoiseBudgetExceeded(Exception):
    """Tracked variance too large for a safe refresh; a refresh was skipped upstream."""


@dataclass(frozen=True)
class LweParams:
    n: int = 560
    alpha: float = 3.05e-5
    metadata: Mapping[str, float] = field(default_factory=lambda: dict(DEFAULT_METADATA))

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("LWE dimension n must be >= 1")
        if self.alpha < 0:
            raise ValueError("noise stddev alpha must be >= 0")

    def digest(self) -> str:
        """Stable hash of the operational parameters, for manifests."""
        blob = f"n={self.n},alpha={self.alpha!r}".encode()
        return hashlib.sha256(blob).hexdigest()[:16]


@dataclass(frozen=True)
class LweSecretKey:
    party_id: int
    s: np.ndarray  # shape (n,), entries in {0, 1}

    def __post_init__(self):
        self.s.flags.writeable = False


def keygen(params: LweParams, party_id: int, sampler: NoiseSampler) -> LweSecretKey:
    """Fresh uniform binary secret key for one party."""
    return LweSecretKey(party_id, sampler.uniform_bits(params.n))


@dataclass(frozen=True)
class MkLweCiphertext:
    parties: tuple[int, ...]
    b: int                    # raw torus value
    a: np.ndarray             # shape (p, n), raw uint32
    variance: float           # torus-units squared

    def __post_init__(self):
        if self.a.shape[0] != len(self.parties):
            raise ValueError("mask matrix must have one row per party")
        if self.variance < 0:
            raise ValueError("variance must be >= 0")
        object.__setattr__(self, "b", self.b & TORUS_MASK)
        self.a.flags.writeable = False

    @property
    def n(self) -> int:
        return self.a.shape[1]

    def serialize(self) -> bytes:
        """Little-endian wire format: magic, version u16, p u16, n u32,
        b u32, p*n mask words u32, variance f64."""
        head = SERIAL_MAGIC + struct.pack(
            "<HHI", SERIAL_VERSION, len(self.parties), self.n
        )
        body = struct.pack("<I", self.b) + self.a.astype("<u4").tobytes()
        return head + body + struct.pack("<d", self.variance)


def deserialize(data: bytes, parties: Sequence[int]) -> MkLweCiphertext:
    """Inverse of :meth:`MkLweCiphertext.serialize`; the party roster is
    carried out of band (bundle manifests)."""
    if data[:4] != SERIAL_MAGIC:
        raise ValueError("bad magic; not a serialized ciphertext")
    version, p, n = struct.unpack_from("<HHI", data, 4)
    if version != SERIAL_VERSION:
        raise ValueError(f"unsupported ciphertext version {version}")
    if p != len(parties):
        raise ValueError("party roster does not match serialized width")
    off = 12
    (b,) = struct.unpack_from("<I", data, off)
    off += 4
    a = np.frombuffer(data, dtype="<u4", count=p * n, offset=off).reshape(p, n).copy()
    off += 4 * p * n
    (variance,) = struct.unpack_from("<d", data, off)
    return MkLweCiphertext(tuple(parties), b, a, variance)


def serialized_size(p: int, n: int) -> int:
    """Exact byte size: 12-byte header + (1 + p*n) words + f64 variance."""
    return 12 + 4 * (1 + p * n) + 8


def _dot(row: np.ndarray, s: np.ndarray) -> int:
    # uint32 multiply/sum wrap mod 2**32, which is exactly torus arithmetic
    return int(np.sum(row * s, dtype=np.uint32))


def sym_enc(key: LweSecretKey, m: int, params: LweParams, sampler: NoiseSampler) -> MkLweCiphertext:
    """Single-party encryption of a bit with the 1/4 scaling factor."""
    if m not in (0, 1):
        raise ValueError(f"message bit must be 0 or 1, got {m}")
    return _enc_share(key, m * QUARTER, params, sampler)


def _enc_share(key: LweSecretKey, mu_raw: int, params: LweParams, sampler: NoiseSampler) -> MkLweCiphertext:
    """Encrypt an arbitrary torus point under one key (used for refresh shares)."""
    a = sampler.uniform_raw(params.n)
    e = sampler.sample().raw if params.alpha > 0 else 0
    b = (mu_raw - _dot(a, key.s) + e) & TORUS_MASK
    return MkLweCiphertext((key.party_id,), b, a.reshape(1, -1), params.alpha**2)


def _key_map(keys: Iterable[LweSecretKey]) -> dict[int, LweSecretKey]:
    if isinstance(keys, Mapping):
        return dict(keys)
    return {k.party_id: k for k in keys}


def phase(ct: MkLweCiphertext, keys: Iterable[LweSecretKey]) -> Torus32:
    """Decryption functional b + sum_i <a_i, s_i>, exact on the torus."""
    km = _key_map(keys)
    acc = ct.b
    for i, pid in enumerate(ct.parties):
        if pid not in km:
            raise KeyError(f"missing secret key for party {pid}")
        acc = (acc + _dot(ct.a[i], km[pid].s)) & TORUS_MASK
    return Torus32(acc)


def sym_dec(ct: MkLweCiphertext, keys: Iterable[LweSecretKey]) -> int:
    """Nearest-message decoding over {0, 1/4}; the tie at distance 1/8
    breaks toward m = 1 (fixed for reproducibility)."""
    x = phase(ct, keys).raw
    d0 = min(x, TORUS_MOD - x)
    d1 = min((x - QUARTER) & TORUS_MASK, (QUARTER - x) & TORUS_MASK)
    return 1 if d1 <= d0 else 0


def extend(ct: MkLweCiphertext, target_parties: Sequence[int]) -> MkLweCiphertext:
    """Zero-pad the mask to a larger party roster; phase is invariant."""
    target = tuple(target_parties)
    missing = set(ct.parties) - set(target)
    if missing:
        raise ValueError(f"ciphertext parties {sorted(missing)} absent from target roster")
    if target == ct.parties:
        return ct
    a = np.zeros((len(target), ct.n), dtype=np.uint32)
    index = {pid: i for i, pid in enumerate(ct.parties)}
    for j, pid in enumerate(target):
        if pid in index:
            a[j] = ct.a[index[pid]]
    return MkLweCiphertext(target, ct.b, a, ct.variance)


def _check_compatible(c1: MkLweCiphertext, c2: MkLweCiphertext) -> None:
    if c1.parties != c2.parties:
        raise ValueError(f"party lists differ: {c1.parties} vs {c2.parties}")
    if c1.n != c2.n:
        raise ValueError("LWE dimensions differ")


def lwe_add(c1: MkLweCiphertext, c2: MkLweCiphertext) -> MkLweCiphertext:
    """Coordinatewise sum; variances add."""
    _check_compatible(c1, c2)
    return MkLweCiphertext(
        c1.parties,
        (c1.b + c2.b) & TORUS_MASK,
        c1.a + c2.a,
        c1.variance + c2.variance,
    )


def lwe_mul_const(c1: MkLweCiphertext, c2: MkLweCiphertext, k: int) -> MkLweCiphertext:
    """c1 + k * c2 with the k**2 variance rule."""
    _check_compatible(c1, c2)
    if abs(k) > 16:
        raise ValueError("scalar coefficient limited to |k| <= 16")
    ku = np.uint32(k & TORUS_MASK)
    return MkLweCiphertext(
        c1.parties,
        (c1.b + k * c2.b) & TORUS_MASK,
        c1.a + c2.a * ku,
        c1.variance + k * k * c2.variance,
    )


def lwe_sub(c1: MkLweCiphertext, c2: MkLweCiphertext) -> MkLweCiphertext:
    return lwe_mul_const(c1, c2, -1)


def trivial_ct(mu: Torus32, parties: Sequence[int], n: int) -> MkLweCiphertext:
    """Noiseless constant (0, mu): zero mask, zero variance."""
    return MkLweCiphertext(tuple(parties), mu.raw, np.zeros((len(parties), n), dtype=np.uint32), 0.0)


def band_decision(ph: Torus32) -> int:
    """Bootstrap decision band: message 1 iff phase in [1/4, 3/4)."""
    return 1 if QUARTER <= ph.raw < 3 * QUARTER else 0


class RefreshOracle:
    """Trusted stand-in for gate bootstrapping plus key switching.

    Holds every party's secret key behind an explicit trust boundary,
    evaluates the exact phase, decides the message by the band, and returns a
    fresh multi-key encryption built from one share per party (so every
    party's mask slot is non-trivial, mirroring post-key-switch structure).
    Read-only after construction; safe to share across workers that own
    their own samplers.
    """

    #: refresh refuses ciphertexts whose 6-sigma noise reaches the 1/8 margin
    MARGIN = 1.0 / 8.0

    def __init__(self, keys: Iterable[LweSecretKey], params: LweParams, seed: int = 0):
        self.keys = _key_map(keys)
        self.params = params
        self._sampler = NoiseSampler(params.alpha, seed)

    def spawn(self, key: int) -> "RefreshOracle":
        """Clone with an independent deterministic sampler (worker use)."""
        clone = object.__new__(RefreshOracle)
        clone.keys = self.keys
        clone.params = self.params
        clone._sampler = self._sampler.spawn(key)
        return clone

    def refresh(self, ct: MkLweCiphertext) -> MkLweCiphertext:
        if 6.0 * math.sqrt(ct.variance) >= self.MARGIN:
            raise NoiseBudgetExceeded(
                f"6*sigma = {6 * math.sqrt(ct.variance):.3g} reaches the 1/8 margin; "
                "a refresh was skipped somewhere upstream"
            )
        for pid in ct.parties:
            if pid not in self.keys:
                raise KeyError(f"refresh oracle lacks the key for party {pid}")
        m = band_decision(phase(ct, self.keys))
        return self._fresh_encrypt(m, ct.parties)

    def _fresh_encrypt(self, m: int, parties: tuple[int, ...]) -> MkLweCiphertext:
        # additive shares of m/4, one fresh single-party encryption each
        p = len(parties)
        shares = [int(x) for x in self._sampler.uniform_raw(p - 1)] if p > 1 else []
        last = (m * QUARTER - sum(shares)) & TORUS_MASK
        shares.append(last)
        a = np.empty((p, self.params.n), dtype=np.uint32)
        b = 0
        for i, pid in enumerate(parties):
            part = _enc_share(self.keys[pid], shares[i], self.params, self._sampler)
            a[i] = part.a[0]
            b = (b + part.b) & TORUS_MASK
        return MkLweCiphertext(parties, b, a, p * self.params.alpha**2)


def refresh(ct: MkLweCiphertext, oracle: RefreshOracle) -> MkLweCiphertext:
    return oracle.refresh(ct)
