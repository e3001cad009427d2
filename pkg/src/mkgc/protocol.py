"""Three-role distributed training flow, simulated in-process.

Participants encrypt their rows under their own keys and upload serialized
bundles; the cloud server extends everything to the common roster and trains
on multi-key ciphertexts (it never holds a secret key — only the refresh
oracle handle, the modeled trust boundary standing in for bootstrapping-key
reconstruction); the decryption party gathers every participant's key and
jointly decrypts the model. Decryption is all-or-nothing: one withheld key
stops it before any bit is decoded.

Roles exchange bytes through in-memory bundles with on-disk equivalents
(directory of serialized integer ciphertexts plus a JSON manifest), so a
networked deployment is a transport swap.
"""

from __future__ import annotations

import json
import struct
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from . import circuits as cir
from . import linreg
from . import lwe as _lwe
from .circuits import INT_MAGIC, IntCiphertext
from .gates import BitCt, TorusLweBackend
from .linreg import EncryptedDataset, GdConfig, ModelCiphertext
from .torus import NoiseSampler


class MissingKey(Exception):
    """A roster party withheld its key; nothing was decrypted."""

    def __init__(self, party_id: int):
        super().__init__(f"party {party_id} has not contributed its key")
        self.party_id = party_id


@dataclass
class ParticipantState:
    party_id: int
    params: _lwe.LweParams
    key: _lwe.LweSecretKey
    sampler: NoiseSampler


@dataclass
class UploadBundle:
    """One participant's upload: manifest plus serialized integer ciphertexts
    in row order (x0, y0, x1, y1, ...)."""

    manifest: dict
    blobs: list[bytes]

    def save(self, directory) -> None:
        d = Path(directory)
        d.mkdir(parents=True, exist_ok=True)
        (d / "manifest.json").write_text(json.dumps(self.manifest, indent=1))
        for i, blob in enumerate(self.blobs):
            (d / f"ct_{i:04d}.bin").write_bytes(blob)

    @classmethod
    def load(cls, directory) -> "UploadBundle":
        d = Path(directory)
        manifest = json.loads((d / "manifest.json").read_text())
        blobs = [
            (d / f"ct_{i:04d}.bin").read_bytes() for i in range(manifest["count"])
        ]
        return cls(manifest, blobs)


def _encrypt_int_blob(v: int, w: int, key: _lwe.LweSecretKey,
                      params: _lwe.LweParams, sampler: NoiseSampler) -> bytes:
    lo, hi = cir.int_range(w)
    if not lo <= v <= hi:
        raise ValueError(f"{v} outside the {w}-bit range [{lo}, {hi}]")
    u = v & ((1 << w) - 1)
    head = INT_MAGIC + struct.pack("<H", w)
    body = b"".join(
        _lwe.sym_enc(key, (u >> i) & 1, params, sampler).serialize() for i in range(w)
    )
    return head + body


def participant_prepare(rows: Sequence[tuple[int, int]], party_id: int,
                        params: _lwe.LweParams, width: int,
                        seed: int = 0) -> tuple[ParticipantState, UploadBundle]:
    """Key generation plus per-value encryption and serialization for one
    participant. Deterministic under the seed."""
    sampler = NoiseSampler(params.alpha, seed=seed)
    key = _lwe.keygen(params, party_id, sampler)
    state = ParticipantState(party_id, params, key, sampler)
    blobs = []
    for x, y in rows:
        blobs.append(_encrypt_int_blob(x, width, key, params, sampler))
        blobs.append(_encrypt_int_blob(y, width, key, params, sampler))
    manifest = {
        "party_id": party_id,
        "w": width,
        "count": len(blobs),
        "params": params.digest(),
    }
    return state, UploadBundle(manifest, blobs)


def build_refresh_oracle(participants: Iterable[ParticipantState],
                         params: _lwe.LweParams, seed: int = 0) -> _lwe.RefreshOracle:
    """The modeled bootstrapping-key reconstruction: participants hand their
    keys across the trust boundary into the refresh oracle."""
    return _lwe.RefreshOracle([p.key for p in participants], params, seed=seed)


@dataclass
class StepEntry:
    phase: str
    parties: int
    refreshes: int
    elapsed_ms: float


@dataclass
class StepLog:
    entries: list[StepEntry] = field(default_factory=list)

    def add(self, phase: str, parties: int, refreshes: int, elapsed_ms: float) -> None:
        self.entries.append(StepEntry(phase, parties, refreshes, elapsed_ms))

    def to_csv(self) -> str:
        lines = ["phase,parties,refreshes,elapsed_ms"]
        lines += [f"{e.phase},{e.parties},{e.refreshes},{e.elapsed_ms:.3f}"
                  for e in self.entries]
        return "\n".join(lines) + "\n"


@dataclass
class ServerState:
    """Cloud-server side state; holds ciphertexts and the oracle handle, and
    by construction no secret key field exists to read."""

    params: _lwe.LweParams
    roster: tuple[int, ...]
    width: int
    backend: TorusLweBackend
    dataset: EncryptedDataset
    extensions: int = 0
    extended_bytes: int = 0
    log: StepLog = field(default_factory=StepLog)
    model: Optional[ModelCiphertext] = None


def server_assemble(bundles: Sequence[UploadBundle], params: _lwe.LweParams,
                    oracle: _lwe.RefreshOracle) -> ServerState:
    """Validate uploads, fix the canonical roster (ascending party id) and
    extend every ciphertext to it."""
    if not bundles:
        raise ValueError("need at least one upload bundle")
    pids = [b.manifest["party_id"] for b in bundles]
    if len(set(pids)) != len(pids):
        raise ValueError(f"duplicate party ids in uploads: {sorted(pids)}")
    widths = {b.manifest["w"] for b in bundles}
    if len(widths) != 1:
        raise ValueError(f"width mismatch across bundles: {sorted(widths)}")
    digests = {b.manifest["params"] for b in bundles}
    if len(digests) != 1 or digests != {params.digest()}:
        raise ValueError("parameter-set mismatch across bundles")
    width = widths.pop()
    roster = tuple(sorted(pids))
    backend = TorusLweBackend(params, roster, oracle)

    t0 = time.perf_counter()
    state = ServerState(params, roster, width, backend,
                        EncryptedDataset(width, [], []))
    for bundle in bundles:
        pid = bundle.manifest["party_id"]
        for i, blob in enumerate(bundle.blobs):
            w, cts = cir.parse_int_blob(blob, (pid,), params.n)
            if w != width:
                raise ValueError("width mismatch inside bundle")
            ext_bits = []
            for ct in cts:
                ext = _lwe.extend(ct, roster)
                state.extensions += 1
                state.extended_bytes += _lwe.serialized_size(len(roster), params.n)
                ext_bits.append(BitCt(backend, ext))
            ival = IntCiphertext(w, tuple(ext_bits))
            if i % 2 == 0:
                state.dataset.xs.append(ival)
            else:
                state.dataset.ys.append(ival)
        state.dataset.owners += [pid] * (len(bundle.blobs) // 2)
    state.log.add("extension", len(roster), 0,
                  (time.perf_counter() - t0) * 1e3)
    return state


def server_train(state: ServerState, method: str, cfg: Optional[GdConfig] = None,
                 threads: int = 1) -> ModelCiphertext:
    """Train on the assembled multi-key dataset; phases mirror the protocol
    step table (training, then an evaluation pass computing the encrypted
    loss of the trained model)."""
    counter = state.backend.counter
    before = counter.refreshes
    t0 = time.perf_counter()
    if method == "formula":
        model = linreg.train_closed_form(state.dataset, threads=threads)
    elif method == "gd":
        if cfg is None:
            raise ValueError("gd training needs a GdConfig")
        model = linreg.train_gd(state.dataset, cfg)
    else:
        raise ValueError(f"unknown training method {method!r}")
    state.log.add("training", len(state.roster), counter.refreshes - before,
                  (time.perf_counter() - t0) * 1e3)

    before = counter.refreshes
    t0 = time.perf_counter()
    linreg.loss(state.dataset, model, threads=threads)
    state.log.add("evaluation", len(state.roster), counter.refreshes - before,
                  (time.perf_counter() - t0) * 1e3)
    state.model = model
    return model


@dataclass
class DecryptionSession:
    """Joint decryption with the all-or-nothing guarantee."""

    model: ModelCiphertext
    roster: tuple[int, ...]
    collected: dict[int, _lwe.LweSecretKey] = field(default_factory=dict)

    def submit_key(self, key: _lwe.LweSecretKey) -> None:
        self.collected[key.party_id] = key

    def decrypt(self) -> dict:
        for pid in self.roster:
            if pid not in self.collected:
                raise MissingKey(pid)
        keys = [self.collected[pid] for pid in self.roster]
        return {
            "slope": cir.decode_int(self.model.slope, keys),
            "intercept": cir.decode_int(self.model.intercept, keys),
            "zoom": self.model.zoom,
        }


def joint_decrypt(session: DecryptionSession) -> dict:
    return session.decrypt()


@dataclass
class ProtocolResult:
    plaintext_model: dict
    model: ModelCiphertext
    server: ServerState
    log: StepLog


def run_protocol(rows_by_party: dict[int, Sequence[tuple[int, int]]],
                 params: _lwe.LweParams, width: int, method: str,
                 cfg: Optional[GdConfig] = None, seed: int = 0,
                 threads: int = 1) -> ProtocolResult:
    """End-to-end in-process run: prepare, assemble, train, jointly decrypt."""
    log = StepLog()
    t0 = time.perf_counter()
    participants = []
    bundles = []
    for i, (pid, rows) in enumerate(sorted(rows_by_party.items())):
        st, bundle = participant_prepare(rows, pid, params, width, seed=seed + 1000 * i + 1)
        participants.append(st)
        bundles.append(bundle)
    oracle = build_refresh_oracle(participants, params, seed=seed)
    log.add("keygen", len(participants), 0, (time.perf_counter() - t0) * 1e3)

    state = server_assemble(bundles, params, oracle)
    state.log.entries[0:0] = log.entries
    model = server_train(state, method, cfg, threads=threads)

    session = DecryptionSession(model, state.roster)
    for st in participants:
        session.submit_key(st.key)
    plain = session.decrypt()
    return ProtocolResult(plain, model, state, state.log)
