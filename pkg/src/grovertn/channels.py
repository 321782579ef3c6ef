"""Single-qubit Kraus channels and the unitary mixing freedom between equivalent sets.

A channel is a finite set of 2x2 operators {E_m} with sum_m E_m^dag E_m = 1.
Any unitary matrix U acting on the operator index produces an equivalent set
F_m = sum_n U_mn E_n that generates the identical density-matrix map; the
stochastic unraveling of the two sets can nevertheless differ trajectory by
trajectory, which is what the adaptive unraveling strategies exploit.

Channels are immutable values: transformations return new channels, so they
can be shared freely across parallel workers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import StateError, ValidationError

COMPLETENESS_TOL = 1e-12

PHASE_FLIP = "phase_flip"
AMPLITUDE_DAMPING = "amplitude_damping"
CUSTOM = "custom"

_SIGMA_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
_SIGMA_MINUS = np.array([[0.0, 1.0], [0.0, 0.0]])  # |0><1|


def _as_operator(op) -> np.ndarray:
    arr = np.array(op)
    if arr.shape != (2, 2):
        raise ValidationError(f"Kraus operators must be 2x2, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class KrausChannel:
    """An ordered set of single-qubit Kraus operators with its rate parameter."""

    operators: tuple[np.ndarray, ...]
    rate: float
    kind: str = CUSTOM

    def __post_init__(self):
        if len(self.operators) == 0:
            raise ValidationError("a channel needs at least one Kraus operator")
        object.__setattr__(self, "operators", tuple(_as_operator(op) for op in self.operators))
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError(f"rate must lie in [0, 1], got {self.rate}")
        residual = verify_completeness(self)
        if residual > COMPLETENESS_TOL:
            raise ValidationError(f"Kraus completeness residual {residual:.3e} exceeds {COMPLETENESS_TOL}")

    @property
    def num_operators(self) -> int:
        return len(self.operators)


@dataclass(frozen=True)
class GlobalDepolarizing:
    """Global depolarizing map rho -> (1-p) rho + (p / 2^n) * identity.

    Acts on a full dense density matrix, never per qubit; used only as the
    analytically solvable baseline at small n.
    """

    rate: float

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ValidationError(f"rate must lie in [0, 1], got {self.rate}")


def make_phase_flip(p: float) -> KrausChannel:
    """Phase-flip channel {sqrt(p) sigma_z, sqrt(1-p) identity}."""
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"phase-flip probability must lie in [0, 1], got {p}")
    ops = (np.sqrt(p) * _SIGMA_Z, np.sqrt(1.0 - p) * np.eye(2))
    return KrausChannel(ops, rate=p, kind=PHASE_FLIP)


def make_amplitude_damping(p: float) -> KrausChannel:
    """Amplitude-damping channel {sqrt(p) sigma_minus, |0><0| + sqrt(1-p) |1><1|}.

    Applied to |1> the first (jump) operator fires with probability exactly p.
    """
    if not 0.0 <= p <= 1.0:
        raise ValidationError(f"damping probability must lie in [0, 1], got {p}")
    ops = (np.sqrt(p) * _SIGMA_MINUS, np.diag([1.0, np.sqrt(1.0 - p)]))
    return KrausChannel(ops, rate=p, kind=AMPLITUDE_DAMPING)


def verify_completeness(channel) -> float:
    """Max-norm residual of sum_m E_m^dag E_m - identity.

    Accepts a KrausChannel or a bare sequence of 2x2 matrices, so that
    candidate operator sets can be checked before constructing a channel.
    """
    ops = channel.operators if isinstance(channel, KrausChannel) else [np.asarray(op) for op in channel]
    acc = np.zeros((2, 2), dtype=np.result_type(*(op.dtype for op in ops), np.float64))
    for op in ops:
        acc += op.conj().T @ op
    return float(np.max(np.abs(acc - np.eye(2))))


def mix_channel(channel: KrausChannel, unitary) -> KrausChannel:
    """Equivalent Kraus set F_m = sum_n U_mn E_n under a unitary mixing matrix.

    The induced density-matrix map is unchanged; only the stochastic
    decomposition into pure-state outcomes differs.
    """
    u = np.asarray(unitary)
    m = channel.num_operators
    if u.shape != (m, m):
        raise ValidationError(f"mixing matrix must be {m}x{m} for {m} operators, got {u.shape}")
    residual = np.max(np.abs(u.conj().T @ u - np.eye(m)))
    if residual > 1e-12:
        raise ValidationError(f"mixing matrix is not unitary (residual {residual:.3e})")
    mixed = tuple(
        sum(u[row, col] * channel.operators[col] for col in range(m)) for row in range(m)
    )
    return KrausChannel(mixed, rate=channel.rate, kind=CUSTOM)


def apply_channel_dense(channel: KrausChannel, rho) -> np.ndarray:
    """Density-matrix map sum_m E_m rho E_m^dag on a single qubit."""
    rho = np.asarray(rho)
    out = np.zeros((2, 2), dtype=np.result_type(rho.dtype, *(op.dtype for op in channel.operators)))
    for op in channel.operators:
        out += op @ rho @ op.conj().T
    return out


def local_superoperator(channel: KrausChannel) -> np.ndarray:
    """4x4 matrix sum_m F_m (x) conj(F_m) acting on vectorized 2x2 matrices.

    Vectorization convention is by matrix units, |i><j| -> index 2i+j, so a
    unitary U lifts to exactly U (x) conj(U) with no basis change.
    """
    dtype = np.result_type(*(op.dtype for op in channel.operators), np.float64)
    out = np.zeros((4, 4), dtype=dtype)
    for op in channel.operators:
        out += np.kron(op, op.conj())
    return out


def apply_depolarizing_dense(dm: np.ndarray, channel: GlobalDepolarizing) -> np.ndarray:
    """Apply the global depolarizing map to a full density matrix."""
    dm = np.asarray(dm)
    dim = dm.shape[0]
    trace = np.trace(dm)
    if abs(trace - 1.0) > 1e-8:
        raise StateError(f"density matrix trace {trace} deviates from 1 beyond 1e-8")
    out = (1.0 - channel.rate) * dm
    out[np.diag_indices(dim)] += channel.rate / dim
    return out
