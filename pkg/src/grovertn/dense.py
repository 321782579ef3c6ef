"""Brute-force statevector and density-matrix evolution at small qubit counts.

This is the ground-truth engine: every tensor-network result is validated
against it within the memory guards (statevector up to 14 qubits, density
matrix up to 12).  The two search reflections are applied as rank-1 updates
in O(2^n) rather than as materialized matrices.

Index convention: qubit 0 is the most significant bit of a basis index, so
the bitstring "0011" labels basis state 3 on four qubits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import analytic
from .channels import GlobalDepolarizing, KrausChannel, apply_depolarizing_dense
from .errors import ResourceError, StateError, ValidationError

STATEVECTOR_MAX_QUBITS = 14
DENSITY_MAX_QUBITS = 12


def omega_index(omega: str) -> int:
    """Integer basis index of a target bitstring."""
    if not omega or set(omega) - {"0", "1"}:
        raise ValidationError(f"target must be a non-empty string of 0/1, got {omega!r}")
    return int(omega, 2)


def check_omega(omega: str, n: int) -> None:
    if len(omega) != n:
        raise ValidationError(f"target bitstring {omega!r} does not have {n} bits")
    omega_index(omega)


@dataclass
class DenseState:
    """Statevector over n qubits; amplitudes indexed by basis integer."""

    amplitudes: np.ndarray
    n: int

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=np.complex128)
        if self.amplitudes.shape != (2**self.n,):
            raise ValidationError("amplitude vector length does not match qubit count")
        norm = np.linalg.norm(self.amplitudes)
        if abs(norm - 1.0) > 1e-10:
            raise StateError(f"statevector norm {norm} deviates from 1 beyond 1e-10")


@dataclass
class DenseDensityMatrix:
    """Full density matrix over n qubits (Hermitian, unit trace)."""

    entries: np.ndarray
    n: int

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.complex128)
        dim = 2**self.n
        if self.entries.shape != (dim, dim):
            raise ValidationError("density matrix shape does not match qubit count")
        if np.max(np.abs(self.entries - self.entries.conj().T)) > 1e-12:
            raise StateError("density matrix is not Hermitian within 1e-12")
        trace = np.trace(self.entries).real
        if abs(trace - 1.0) > 1e-10:
            raise StateError(f"density matrix trace {trace} deviates from 1 beyond 1e-10")

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue; positivity is checked on demand (O(8^n))."""
        return float(np.linalg.eigvalsh(self.entries)[0])


@dataclass
class RunTrace:
    """Per-iteration record of a full circuit run.

    `entropy` holds the equal-cut von Neumann entropy for pure-state runs
    and the operator entanglement for density-matrix runs, both in bits.
    """

    k: np.ndarray
    success: np.ndarray
    entropy: np.ndarray
    mode: str
    trace_drift: np.ndarray | None = None
    discarded_weight: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def init_uniform(n: int) -> DenseState:
    """Uniform superposition |s> with every amplitude 2^(-n/2)."""
    if not 2 <= n <= STATEVECTOR_MAX_QUBITS:
        raise ResourceError(f"statevector engine supports 2 <= n <= {STATEVECTOR_MAX_QUBITS}, got {n}")
    amps = np.full(2**n, 2.0 ** (-n / 2.0), dtype=np.complex128)
    return DenseState(amps, n)


def init_uniform_dm(n: int) -> DenseDensityMatrix:
    """Pure projector |s><s| as a dense density matrix."""
    if not 2 <= n <= DENSITY_MAX_QUBITS:
        raise ResourceError(f"density engine supports 2 <= n <= {DENSITY_MAX_QUBITS}, got {n}")
    amps = np.full(2**n, 2.0 ** (-n / 2.0), dtype=np.complex128)
    return DenseDensityMatrix(np.outer(amps, amps.conj()), n)


def apply_oracle(state, omega: str):
    """Flip the sign of the target amplitude: |w> -> -|w>, all else unchanged."""
    idx = omega_index(omega)
    if isinstance(state, DenseState):
        check_omega(omega, state.n)
        state.amplitudes[idx] = -state.amplitudes[idx]
    elif isinstance(state, DenseDensityMatrix):
        check_omega(omega, state.n)
        state.entries[idx, :] *= -1.0
        state.entries[:, idx] *= -1.0
    else:
        raise ValidationError(f"unsupported state type {type(state).__name__}")
    return state


def apply_diffusion(state):
    """Reflect about the uniform superposition: 2|s><s| - 1, as a rank-1 update."""
    if isinstance(state, DenseState):
        mean = np.mean(state.amplitudes)
        state.amplitudes *= -1.0
        state.amplitudes += 2.0 * mean
    elif isinstance(state, DenseDensityMatrix):
        rho = state.entries
        # U rho U^dag with U = 2|s><s| - 1, applied from each side in turn.
        col_mean = np.mean(rho, axis=0)
        rho *= -1.0
        rho += 2.0 * col_mean[np.newaxis, :]
        row_mean = np.mean(rho, axis=1)
        rho *= -1.0
        rho += 2.0 * row_mean[:, np.newaxis]
    else:
        raise ValidationError(f"unsupported state type {type(state).__name__}")
    return state


def apply_channel_everywhere(dm: DenseDensityMatrix, channel: KrausChannel) -> DenseDensityMatrix:
    """Apply a single-qubit channel to every qubit of a dense density matrix."""
    n = dm.n
    rho = dm.entries
    for qubit in range(n):
        left = 2**qubit
        right = 2 ** (n - 1 - qubit)
        work = rho.reshape(left, 2, right, left, 2, right)
        acc = np.zeros_like(work)
        for op in channel.operators:
            acc += np.einsum("ua,vb,iajkbl->iujkvl", op, op.conj(), work, optimize=True)
        rho = acc.reshape(2**n, 2**n)
    dm.entries = rho
    return dm


def grover_iteration(state, omega: str, channel=None):
    """One full iteration: oracle, diffusion, then the noise layer on every qubit."""
    apply_oracle(state, omega)
    apply_diffusion(state)
    if channel is None:
        return state
    if isinstance(channel, GlobalDepolarizing):
        if not isinstance(state, DenseDensityMatrix):
            raise ValidationError("global depolarizing noise acts on density matrices only")
        state.entries = apply_depolarizing_dense(state.entries, channel)
        return state
    if isinstance(channel, KrausChannel):
        if not isinstance(state, DenseDensityMatrix):
            raise ValidationError("per-qubit channels need the density-matrix mode")
        return apply_channel_everywhere(state, channel)
    raise ValidationError(f"unsupported channel type {type(channel).__name__}")


def success_probability(state, omega: str) -> float:
    """Overlap probability with the target bitstring: |<w|psi>|^2 or <w|rho|w>."""
    idx = omega_index(omega)
    if isinstance(state, DenseState):
        check_omega(omega, state.n)
        return float(np.abs(state.amplitudes[idx]) ** 2)
    if isinstance(state, DenseDensityMatrix):
        check_omega(omega, state.n)
        return float(state.entries[idx, idx].real)
    raise ValidationError(f"unsupported state type {type(state).__name__}")


def reduced_density_matrix(state, cut: int) -> np.ndarray:
    """Partial trace over the qubits to the right of the cut (cut = size of left block)."""
    n = state.n
    if not 1 <= cut <= n - 1:
        raise ValidationError(f"cut must lie in [1, {n - 1}], got {cut}")
    left, right = 2**cut, 2 ** (n - cut)
    if isinstance(state, DenseState):
        coeff = state.amplitudes.reshape(left, right)
        return coeff @ coeff.conj().T
    if isinstance(state, DenseDensityMatrix):
        work = state.entries.reshape(left, right, left, right)
        return np.einsum("ixjx->ij", work)
    raise ValidationError(f"unsupported state type {type(state).__name__}")


def entropy_bits(matrix: np.ndarray) -> float:
    """Von Neumann entropy -Tr[rho log2 rho] with eigenvalues clamped at 0."""
    eigs = np.linalg.eigvalsh(matrix)
    eigs = np.clip(eigs.real, 0.0, None)
    nonzero = eigs[eigs > 0.0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


def schmidt_values(state: DenseState, cut: int) -> np.ndarray:
    """Descending Schmidt coefficients of a pure state across the cut."""
    n = state.n
    if not 1 <= cut <= n - 1:
        raise ValidationError(f"cut must lie in [1, {n - 1}], got {cut}")
    coeff = state.amplitudes.reshape(2**cut, 2 ** (n - cut))
    return np.linalg.svd(coeff, compute_uv=False)


def state_entropy(state: DenseState, cut: int) -> float:
    """Bipartite entropy of a pure state, in bits, from its Schmidt spectrum."""
    lams = schmidt_values(state, cut) ** 2
    nonzero = lams[lams > 0.0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


def operator_entanglement(dm: DenseDensityMatrix, cut: int) -> float:
    """Entropy of the squared, Frobenius-normalized operator-Schmidt coefficients.

    The density matrix is rearranged into a (4^cut) x (4^(n-cut)) matrix in
    the matrix-unit convention before taking singular values.
    """
    n = dm.n
    if not 1 <= cut <= n - 1:
        raise ValidationError(f"cut must lie in [1, {n - 1}], got {cut}")
    left, right = 2**cut, 2 ** (n - cut)
    block = dm.entries.reshape(left, right, left, right).transpose(0, 2, 1, 3)
    sigmas = np.linalg.svd(block.reshape(left * left, right * right), compute_uv=False)
    lams = sigmas**2
    total = lams.sum()
    if total <= 0.0:
        return 0.0
    lams = lams / total
    nonzero = lams[lams > 0.0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


def run_grover(n: int, omega: str, channel=None, iters: int | None = None, cut: int | None = None) -> RunTrace:
    """Evolve the search circuit for `iters` iterations and record the time series.

    Without a channel the run uses the statevector; any channel switches to
    the density-matrix representation.  The record at k=0 is the uniform
    initial state, and each later row is taken after the full iteration
    (both reflections, then noise).
    """
    check_omega(omega, n)
    if iters is None:
        iters = analytic.optimal_iterations(n)
    if cut is None:
        cut = n // 2
    density_mode = channel is not None
    if density_mode:
        state = init_uniform_dm(n)
    else:
        state = init_uniform(n)

    ks = np.arange(iters + 1)
    success = np.empty(iters + 1)
    entropy = np.empty(iters + 1)

    def record(i: int) -> None:
        success[i] = success_probability(state, omega)
        if density_mode:
            entropy[i] = operator_entanglement(state, cut)
        else:
            entropy[i] = state_entropy(state, cut)

    record(0)
    for k in range(1, iters + 1):
        grover_iteration(state, omega, channel)
        record(k)
    mode = "density" if density_mode else "statevector"
    return RunTrace(ks, success, entropy, mode, meta={"n": n, "omega": omega, "cut": cut})


def final_density_matrix(n: int, omega: str, channel, iters: int) -> DenseDensityMatrix:
    """Exact density matrix after `iters` noisy iterations (crosscheck helper)."""
    check_omega(omega, n)
    state = init_uniform_dm(n)
    for _ in range(iters):
        grover_iteration(state, omega, channel)
    return state
