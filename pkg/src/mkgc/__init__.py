"""Multi-key torus-LWE boolean gate engine with tracked noise, signed integer
circuits built from bootstrapped gates, cost reporting, and a three-role
encrypted linear-regression protocol.

The refresh step is a trusted oracle (exact phase, band decision, fresh
re-encryption), not a cryptographic bootstrap; see the README threat model.
"""

from .torus import NoiseSampler, Torus32, mod_to_t, torus_from_rational
from .lwe import (
    LweParams,
    LweSecretKey,
    MkLweCiphertext,
    NoiseBudgetExceeded,
    RefreshOracle,
    extend,
    keygen,
    lwe_add,
    lwe_mul_const,
    lwe_sub,
    phase,
    refresh,
    sym_dec,
    sym_enc,
    trivial_ct,
)
from .gates import (
    BitCt,
    ClearBackend,
    GateCounter,
    TorusLweBackend,
    boots_and,
    boots_nand,
    boots_nor,
    boots_or,
    boots_xnor,
    boots_xor,
    constant_bit,
    hom_not,
)
from .circuits import (
    AdderCellKind,
    IntCiphertext,
    add_w,
    cas_cell,
    compensate,
    decode_int,
    div_w,
    encode_int,
    full_adder_cell,
    homadder_cell,
    mul_w,
    sub_w,
    widen,
)
from .linreg import (
    EncryptedDataset,
    GdConfig,
    ModelCiphertext,
    loss,
    predict,
    simulate_closed_form,
    simulate_gd,
    train_closed_form,
    train_gd,
)
from .metrics import CostReport, measure, naive_gate_comparison, scaling_report
from .protocol import (
    DecryptionSession,
    MissingKey,
    ParticipantState,
    ServerState,
    UploadBundle,
    build_refresh_oracle,
    joint_decrypt,
    participant_prepare,
    run_protocol,
    server_assemble,
    server_train,
)

__version__ = "0.1.0"
