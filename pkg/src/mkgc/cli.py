"""Command-line front end: key generation, operator evaluation, training
runs and benchmark reports.

Exit codes: 0 success, 1 usage error, 2 I/O error, 3 domain error (values out
of range and similar). Every command is deterministic under --seed; the
MKGC_SEED environment variable is the fallback seed source.
"""

from __future__ import annotations

import argparse
import os
import struct
import sys
from fractions import Fraction
from pathlib import Path

from . import circuits as cir
from . import linreg, metrics, protocol
from . import lwe as _lwe
from .gates import ClearBackend, TorusLweBackend
from .torus import NoiseSampler

KEY_MAGIC = b"MKSK"
KEY_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_DOMAIN = 0, 1, 2, 3


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _default_seed() -> int:
    return int(os.environ.get("MKGC_SEED", "0"))


def write_key(path: Path, key: _lwe.LweSecretKey) -> None:
    blob = KEY_MAGIC + struct.pack("<HHI", KEY_VERSION, key.party_id, len(key.s))
    path.write_bytes(blob + bytes(int(b) for b in key.s))


def read_key(path: Path) -> _lwe.LweSecretKey:
    import numpy as np

    blob = path.read_bytes()
    if blob[:4] != KEY_MAGIC:
        raise ValueError(f"{path} is not a key file")
    _, pid, n = struct.unpack_from("<HHI", blob, 4)
    s = np.frombuffer(blob, dtype=np.uint8, count=n, offset=12).astype(np.uint32)
    return _lwe.LweSecretKey(pid, s)


def _make_parties(p: int, params: _lwe.LweParams, seed: int):
    keys = []
    for pid in range(p):
        sampler = NoiseSampler(params.alpha, seed=seed + 1000 * pid + 1)
        keys.append((_lwe.keygen(params, pid, sampler), sampler))
    return keys


def cmd_keygen(args) -> int:
    params = _lwe.LweParams()
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        for key, _ in _make_parties(args.parties, params, args.seed):
            write_key(out / f"key_{key.party_id}.bin", key)
    except OSError as exc:
        print(f"keygen: cannot write keys: {exc}", file=sys.stderr)
        return EXIT_IO
    print(f"wrote {args.parties} key file(s) to {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    op = args.op
    w = args.w
    a_width = 2 * w if op == "div" else w
    for name, v, width in (("--a", args.a, a_width), ("--b", args.b, w)):
        lo, hi = cir.int_range(width)
        if not lo <= v <= hi:
            print(f"eval: {name}={v} outside the {width}-bit range [{lo}, {hi}]",
                  file=sys.stderr)
            return EXIT_DOMAIN
    if op == "div" and args.b == 0:
        print("warning: divisor zero: undefined output", file=sys.stderr)

    if args.backend == "clear":
        backend = ClearBackend()
        keys = None
        enc = lambda v, width: cir.encode_int(v, width, backend)
    else:
        params = _lwe.LweParams()
        parties = _make_parties(args.parties, params, args.seed)
        keys = [k for k, _ in parties]
        oracle = _lwe.RefreshOracle(keys, params, seed=args.seed)
        backend = TorusLweBackend(params, tuple(range(args.parties)), oracle)
        enc = lambda v, width: cir.encode_int(
            v, width, backend, parties[0][0], parties[0][1])

    before = backend.counter.snapshot()
    A, B = enc(args.a, a_width), enc(args.b, w)
    if op == "div":
        q, r = cir.div_w(A, B)
        bits = list(q.bits) + list(r.bits)
        print(f"q={cir.decode_int(q, keys)} r={cir.decode_int(r, keys)}")
    else:
        out = {"add": cir.add_w, "sub": cir.sub_w, "mul": cir.mul_w}[op](A, B)
        bits = list(out.bits)
        print(cir.decode_int(out, keys))
    after = backend.counter.snapshot()
    gates = after["refreshes"] - before["refreshes"]
    formula = metrics.PAPER_FORMULAS[op](w)
    print(f"op={op} w={w} gates={gates} nots={after['not_gates'] - before['not_gates']} "
          f"depth={max(b.depth for b in bits)} "
          f"layers={after['div_layers'] - before['div_layers']} "
          f"paper={formula} match={'yes' if gates == formula else 'no'}")
    return EXIT_OK


def cmd_train(args) -> int:
    try:
        rows = linreg.load_dataset_csv(args.data)
    except OSError as exc:
        print(f"train: cannot read {args.data}: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    if args.parties:
        rows = [(x, y, i % args.parties) for i, (x, y, _) in enumerate(rows)]
    width = args.w or (16 if args.method == "gd" else 8)
    cfg = None
    if args.method == "gd":
        cfg = linreg.GdConfig(Fraction(args.lr), args.zoom, args.iters, width,
                              threads=args.threads)

    try:
        if args.backend == "clear":
            backend = ClearBackend()
            ds = linreg.EncryptedDataset(
                width,
                [cir.encode_int(x, width, backend) for x, _, _ in rows],
                [cir.encode_int(y, width, backend) for _, y, _ in rows],
                [p for _, _, p in rows],
            )
            model = (linreg.train_closed_form(ds, threads=args.threads)
                     if args.method == "formula" else linreg.train_gd(ds, cfg))
            result = {
                "slope": cir.decode_int(model.slope),
                "intercept": cir.decode_int(model.intercept),
                "zoom": model.zoom,
            }
            log_csv = ""
        else:
            by_party: dict[int, list[tuple[int, int]]] = {}
            for x, y, p in rows:
                by_party.setdefault(p, []).append((x, y))
            res = protocol.run_protocol(by_party, _lwe.LweParams(), width,
                                        args.method, cfg, seed=args.seed,
                                        threads=args.threads)
            result = res.plaintext_model
            log_csv = res.log.to_csv()
            print(f"extensions={res.server.extensions} "
                  f"extended_bytes={res.server.extended_bytes}")
    except ValueError as exc:
        print(f"train: {exc}", file=sys.stderr)
        return EXIT_DOMAIN

    out_json = linreg.model_to_json(result["slope"], result["intercept"], result["zoom"])
    print(out_json)
    if log_csv:
        print(log_csv, end="")
    try:
        if args.out:
            Path(args.out).write_text(out_json + "\n")
        if args.log and log_csv:
            Path(args.log).write_text(log_csv)
    except OSError as exc:
        print(f"train: cannot write output: {exc}", file=sys.stderr)
        return EXIT_IO
    return EXIT_OK


def _parse_range(spec: str) -> list[int]:
    if ":" in spec:
        lo, hi = spec.split(":", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(spec)]


def cmd_bench(args) -> int:
    ops = [o.strip() for o in args.ops.split(",") if o.strip()]
    widths = _parse_range(args.w_range)
    reports = []
    for op in ops:
        for w in widths:
            if op == "mul" and w < 2:
                continue
            reports.append(metrics.measure(op, w))
    if args.format == "csv":
        print(metrics.reports_to_csv(reports), end="")
    else:
        print(metrics.reports_to_text(reports), end="")
        if args.gates:
            print()
            print(metrics.comparison_to_text(metrics.naive_gate_comparison()), end="")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="mkgc", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("keygen", help="generate party key files")
    p.add_argument("--parties", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=_default_seed())
    p.set_defaults(fn=cmd_keygen)

    p = sub.add_parser("eval", help="evaluate one operator end to end")
    p.add_argument("--op", choices=("add", "sub", "mul", "div"), required=True)
    p.add_argument("--w", type=int, required=True)
    p.add_argument("--a", type=int, required=True)
    p.add_argument("--b", type=int, required=True)
    p.add_argument("--parties", type=int, default=2)
    p.add_argument("--backend", choices=("lwe", "clear"), default="lwe")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=1)
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("train", help="train linear regression on a CSV dataset")
    p.add_argument("--method", choices=("formula", "gd"), required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--parties", type=int, default=0,
                   help="reassign rows round-robin to this many parties")
    p.add_argument("--w", type=int, default=0)
    p.add_argument("--zoom", type=int, default=10_000)
    p.add_argument("--lr", default="0.001")
    p.add_argument("--iters", type=int, default=10)
    p.add_argument("--backend", choices=("lwe", "clear"), default="lwe")
    p.add_argument("--seed", type=int, default=_default_seed())
    p.add_argument("--threads", type=int, default=1)
    p.add_argument("--out", default="")
    p.add_argument("--log", default="")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("bench", help="gate-count and layer reports")
    p.add_argument("--ops", default="add,sub,mul,div")
    p.add_argument("--w-range", dest="w_range", default="1:8")
    p.add_argument("--format", choices=("text", "csv"), default="text")
    p.add_argument("--gates", action="store_true",
                   help="also print the direct-vs-NAND-composed gate table")
    p.set_defaults(fn=cmd_bench)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "keygen" and args.parties < 1:
        parser.error("--parties must be >= 1")
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
