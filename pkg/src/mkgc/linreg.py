"""Encrypted unary linear regression built solely on the integer circuits.

Two trainers: the closed-form solution (mean, slope, intercept via encrypted
sums, products and truncating divisions) and integer-scaled gradient descent,
where the zoom multiple Z turns the fractional learning rate and parameters
into integers the boolean circuits can process.

Every trainer has a plaintext integer simulator that mirrors the circuit
computation step for step — same operation order, same truncation-toward-zero
divisions, same width wrapping — so decrypted results and per-iteration
traces must match the simulator exactly: the encryption layer adds no
arithmetic divergence.

Gradient-descent update, with parameters stored at scale Z (omega = slope*Z,
b = intercept*Z) and learning rate p/q in lowest terms:

    r_i = y_i*Z - (omega*x_i + b)
    S_b = sum r_i            S_w = sum r_i*x_i
    t   = ((S div m) * 2p) div q          for each of S_b, S_w
    b' = b + t_b             omega' = omega + t_omega

The slope update carries the x_i factor of the standard least-squares
gradient; without it, slope and intercept would stay equal forever from the
shared zero initialization.
"""

from __future__ import annotations

import csv
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Optional, Sequence

from . import circuits as cir
from .circuits import IntCiphertext
from .gates import BitCt, ClearBackend, GateBackend, constant_bit


@dataclass
class EncryptedDataset:
    """m encrypted (x, y) pairs, all extended to the common party roster."""

    width: int
    xs: list[IntCiphertext]
    ys: list[IntCiphertext]
    owners: list[int] = field(default_factory=list)

    def __post_init__(self):
        if len(self.xs) != len(self.ys):
            raise ValueError("xs and ys must pair up")
        if not self.owners:
            self.owners = [0] * len(self.xs)

    @property
    def m(self) -> int:
        return len(self.xs)

    @property
    def backend(self) -> GateBackend:
        return self.xs[0].backend


@dataclass
class ModelCiphertext:
    slope: IntCiphertext       # omega, scaled by zoom
    intercept: IntCiphertext   # b, scaled by zoom
    zoom: int
    width: int


@dataclass(frozen=True)
class GdConfig:
    learning_rate: Fraction = Fraction(1, 1000)
    zoom: int = 10_000
    iterations: int = 10
    width: int = 16
    threads: int = 1

    def __post_init__(self):
        if self.zoom < 1 or self.iterations < 0 or self.width < 2:
            raise ValueError("zoom >= 1, iterations >= 0, width >= 2 required")
        if (self.learning_rate * self.zoom).denominator != 1:
            raise ValueError("learning_rate * zoom must be an integer")


def encode_const(v: int, w: int, backend: GateBackend) -> IntCiphertext:
    """Trivially-encrypted plaintext integer (noiseless constant bits)."""
    lo, hi = cir.int_range(w)
    if not lo <= v <= hi:
        raise ValueError(f"{v} outside the {w}-bit range")
    u = v & ((1 << w) - 1)
    return IntCiphertext(w, tuple(constant_bit((u >> i) & 1, backend) for i in range(w)))


def _div_by(x: IntCiphertext, divisor: IntCiphertext) -> IntCiphertext:
    q, _ = cir.div_w(cir.widen(x, 2 * divisor.width), divisor)
    return q


def _fold_add(terms: Sequence[IntCiphertext]) -> IntCiphertext:
    acc = terms[0]
    for t in terms[1:]:
        acc = cir.add_w(acc, t)
    return acc


def _rebind(ct: IntCiphertext, backend: GateBackend) -> IntCiphertext:
    return IntCiphertext(ct.width, tuple(BitCt(backend, b.value, b.depth) for b in ct.bits))


def _map_samples(backend: GateBackend, fn: Callable, items: Sequence, threads: int) -> list:
    """Evaluate independent per-sample subcircuits, optionally on a worker
    pool. Each item gets a backend clone keyed by its index (deterministic
    refresh noise regardless of scheduling); clone counters merge back and
    results rebind to the shared backend."""
    if threads <= 1 or len(items) <= 1:
        return [fn(backend, it) for it in items]
    clones = [backend.spawn(i) for i in range(len(items))]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        results = list(pool.map(lambda pair: fn(pair[0], pair[1]), zip(clones, items)))
    for clone in clones:
        backend.counter.merge(clone.counter)
    return [
        tuple(_rebind(ct, backend) for ct in res) if isinstance(res, tuple)
        else _rebind(res, backend)
        for res in results
    ]


# ---------------------------------------------------------------------------
# closed-form training

def train_closed_form(ds: EncryptedDataset, threads: int = 1) -> ModelCiphertext:
    """Closed-form least squares on ciphertexts:

        xbar  = (sum x_i) / m
        omega = sum y_i*(x_i - xbar) / (sum x_i^2 - (sum x_i)^2 / m)
        b     = sum (y_i - omega*x_i) / m

    All arithmetic is w-bit wrapping with truncating division; the caller
    owes a non-degenerate dataset (plaintext denominator nonzero and
    division quotients in range).
    """
    w = ds.width
    backend = ds.backend
    m_ct = encode_const(ds.m, w, backend)

    sx = _fold_add(ds.xs)
    xbar = _div_by(sx, m_ct)

    def num_term(bk, pair):
        x, y = pair
        return cir.mul_w(_rebind(y, bk), cir.sub_w(_rebind(x, bk), _rebind(xbar, bk)))

    def sq_term(bk, pair):
        x, _ = pair
        xr = _rebind(x, bk)
        return cir.mul_w(xr, xr)

    pairs = list(zip(ds.xs, ds.ys))
    num = _fold_add(_map_samples(backend, num_term, pairs, threads))
    sxx = _fold_add(_map_samples(backend, sq_term, pairs, threads))
    den = cir.sub_w(sxx, _div_by(cir.mul_w(sx, sx), m_ct))
    omega = _div_by(num, den)

    def resid_term(bk, pair):
        x, y = pair
        return cir.sub_w(_rebind(y, bk), cir.mul_w(_rebind(omega, bk), _rebind(x, bk)))

    b = _div_by(_fold_add(_map_samples(backend, resid_term, pairs, threads)), m_ct)
    return ModelCiphertext(omega, b, zoom=1, width=w)


def simulate_closed_form(xs: Sequence[int], ys: Sequence[int], w: int) -> tuple[int, int]:
    """Plaintext mirror of :func:`train_closed_form`: identical operation
    order, width wrapping and rounding."""
    wrap = _wrapper(w)
    tdiv = _trunc_div
    m = len(xs)
    sx = _wrap_fold(xs, w)
    xbar = tdiv(sx, m)
    num = _wrap_fold([wrap(y * wrap(x - xbar)) for x, y in zip(xs, ys)], w)
    sxx = _wrap_fold([wrap(x * x) for x in xs], w)
    den = wrap(sxx - tdiv(wrap(sx * sx), m))
    omega = tdiv(num, den)
    b = tdiv(_wrap_fold([wrap(y - wrap(omega * x)) for x, y in zip(xs, ys)], w), m)
    return omega, b


# ---------------------------------------------------------------------------
# gradient descent

def train_gd(ds: EncryptedDataset, cfg: GdConfig,
             on_iteration: Optional[Callable[[int, ModelCiphertext], None]] = None) -> ModelCiphertext:
    """Exactly cfg.iterations rounds of the integer-scaled update, starting
    from omega = b = 0. ``on_iteration`` fires after every round with the
    current model (the lockstep-trace hook). Overflow is the caller's
    obligation via width/zoom selection; wrapping is well-defined and the
    simulator wraps identically."""
    w = cfg.width
    if ds.width != w:
        raise ValueError(f"dataset width {ds.width} != configured width {w}")
    backend = ds.backend
    p = cfg.learning_rate.numerator
    q = cfg.learning_rate.denominator
    m_ct = encode_const(ds.m, w, backend)
    two_p = encode_const(2 * p, w, backend)
    q_ct = encode_const(q, w, backend)
    z_ct = encode_const(cfg.zoom, w, backend)

    omega = encode_const(0, w, backend)
    b = encode_const(0, w, backend)
    pairs = list(zip(ds.xs, ds.ys))

    for it in range(cfg.iterations):
        def resid(bk, pair, _omega=omega, _b=b):
            x, y = pair
            yz = cir.mul_w(_rebind(y, bk), _rebind(z_ct, bk))
            pred = cir.add_w(cir.mul_w(_rebind(_omega, bk), _rebind(x, bk)), _rebind(_b, bk))
            r = cir.sub_w(yz, pred)
            return r, cir.mul_w(r, _rebind(x, bk))

        terms = _map_samples(backend, resid, pairs, cfg.threads)
        s_b = _fold_add([t[0] for t in terms])
        s_w = _fold_add([t[1] for t in terms])

        def step(s):
            u = _div_by(s, m_ct)
            v = cir.mul_w(u, two_p)
            return _div_by(v, q_ct)

        b = cir.add_w(b, step(s_b))
        omega = cir.add_w(omega, step(s_w))
        if on_iteration is not None:
            on_iteration(it, ModelCiphertext(omega, b, cfg.zoom, w))
    return ModelCiphertext(omega, b, cfg.zoom, w)


def simulate_gd(xs: Sequence[int], ys: Sequence[int], cfg: GdConfig) -> list[tuple[int, int]]:
    """Plaintext mirror of :func:`train_gd`; returns the (omega, b) trace
    after each iteration."""
    w = cfg.width
    wrap = _wrapper(w)
    p = cfg.learning_rate.numerator
    q = cfg.learning_rate.denominator
    omega = b = 0
    trace = []
    for _ in range(cfg.iterations):
        rs = []
        rxs = []
        for x, y in zip(xs, ys):
            yz = wrap(y * cfg.zoom)
            pred = wrap(wrap(omega * x) + b)
            r = wrap(yz - pred)
            rs.append(r)
            rxs.append(wrap(r * x))
        s_b = _wrap_fold(rs, w)
        s_w = _wrap_fold(rxs, w)

        def step(s):
            return _trunc_div(wrap(_trunc_div(s, len(xs)) * 2 * p), q)

        b = wrap(b + step(s_b))
        omega = wrap(omega + step(s_w))
        trace.append((omega, b))
    return trace


def simulate_loss_float(xs: Sequence[int], ys: Sequence[int], omega: int, b: int, zoom: int) -> float:
    """Real-valued tracking loss (1/m) * sum (y_i - (omega*x_i + b)/Z)^2 for
    a zoom-scaled integer model; monitoring only, not a circuit mirror."""
    m = len(xs)
    return sum((y - (omega * x + b) / zoom) ** 2 for x, y in zip(xs, ys)) / m


# ---------------------------------------------------------------------------
# encrypted evaluation

def loss(ds: EncryptedDataset, model: ModelCiphertext, threads: int = 1) -> IntCiphertext:
    """Encrypted scaled squared-error loss (1/m) * sum (y_i - (w*x_i+b)/Z)^2."""
    w = model.width
    backend = ds.backend
    z_ct = encode_const(model.zoom, w, backend)
    m_ct = encode_const(ds.m, w, backend)

    def term(bk, pair):
        x, y = pair
        pred = _div_by(cir.add_w(cir.mul_w(_rebind(model.slope, bk), _rebind(x, bk)),
                                 _rebind(model.intercept, bk)), _rebind(z_ct, bk))
        e = cir.sub_w(_rebind(y, bk), pred)
        return cir.mul_w(e, e)

    total = _fold_add(_map_samples(backend, term, list(zip(ds.xs, ds.ys)), threads))
    return _div_by(total, m_ct)


def simulate_loss(xs: Sequence[int], ys: Sequence[int], omega: int, b: int,
                  zoom: int, w: int) -> int:
    wrap = _wrapper(w)
    terms = []
    for x, y in zip(xs, ys):
        pred = _trunc_div(wrap(wrap(omega * x) + b), zoom)
        e = wrap(y - pred)
        terms.append(wrap(e * e))
    return _trunc_div(_wrap_fold(terms, w), len(xs))


def predict(model: ModelCiphertext, x: IntCiphertext) -> IntCiphertext:
    """(omega*x + b) / Z on ciphertexts."""
    backend = x.backend
    z_ct = encode_const(model.zoom, model.width, backend)
    return _div_by(cir.add_w(cir.mul_w(model.slope, x), model.intercept), z_ct)


def simulate_predict(x: int, omega: int, b: int, zoom: int, w: int) -> int:
    wrap = _wrapper(w)
    return _trunc_div(wrap(wrap(omega * x) + b), zoom)


# ---------------------------------------------------------------------------
# integer helpers and dataset I/O

def _wrapper(w: int):
    mod = 1 << w
    half = mod >> 1

    def wrap(v: int) -> int:
        return ((v + half) % mod) - half

    return wrap


def _wrap_fold(values: Sequence[int], w: int) -> int:
    wrap = _wrapper(w)
    acc = values[0]
    for v in values[1:]:
        acc = wrap(acc + v)
    return acc


def _trunc_div(a: int, b: int) -> int:
    """Division truncating toward zero, matching the divider circuit."""
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def quantize(v: float) -> int:
    """Round half away from zero, the input quantization rule."""
    import math
    return int(math.floor(v + 0.5)) if v >= 0 else -int(math.floor(-v + 0.5))


def load_dataset_csv(path) -> list[tuple[int, int, int]]:
    """Rows of (x, y, party). Accepts an optional 'x,y,party' header; a
    missing party column assigns everything to party 0."""
    rows = []
    with open(path, newline="") as fh:
        for rec in csv.reader(fh):
            if not rec or rec[0].strip().lower() in ("x", ""):
                continue
            x, y = quantize(float(rec[0])), quantize(float(rec[1]))
            party = int(rec[2]) if len(rec) > 2 and rec[2].strip() else 0
            rows.append((x, y, party))
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return rows


def model_to_json(slope: int, intercept: int, zoom: int) -> str:
    return json.dumps({"slope": slope, "intercept": intercept, "zoom": zoom})
