"""Matrix-product density-operator engine over vectorized local sites.

Each site carries the 4-dimensional vectorization of a single-qubit density
matrix in the matrix-unit convention |i><j| -> index 2i+j, so a unitary MPO
lifts to its superoperator form site by site as W (x) conj(W), and a channel
acts as the 4x4 local superoperator contracted into one tensor.

Truncating singular values of an operator decomposition can break trace and
positivity; the run loop renormalizes the trace after each iteration, logs
the raw drift, and monitors positivity only through purity and probability
bounds (full positivity checks are exponential).
"""

from __future__ import annotations

import numpy as np

from . import analytic
from .channels import KrausChannel, local_superoperator
from .dense import RunTrace, check_omega
from .errors import ResourceError, StateError, ValidationError
from .tensornet import (
    MpoOperator,
    MpsState,
    TruncationPolicy,
    _MatrixProduct,
    _schmidt_entropy,
    build_diffusion_mpo,
    build_oracle_mpo,
)

_TRACE_VEC = np.array([1.0, 0.0, 0.0, 1.0])
_SWAP_INDEX = np.array([0, 2, 1, 3])  # transposes the vectorized |i><j| index

_SIGMA_X = np.array([[0.0, 1.0], [1.0, 0.0]])
_SIGMA_Y = np.array([[0.0, -1.0j], [1.0j, 0.0]])
_SIGMA_PLUS = np.array([[0.0, 0.0], [1.0, 0.0]])  # |1><0|
_HERMITICITY_PROBES = (_SIGMA_X, _SIGMA_Y, _SIGMA_PLUS)

TRACE_DRIFT_LIMIT = 1e-6


class MpdoState(_MatrixProduct):
    """Matrix-product decomposition of an n-qubit density operator."""

    def __init__(self, tensors, center=None):
        super().__init__(tensors, center)
        self.trace_log: list[float] = []

    def copy(self) -> "MpdoState":
        dup = MpdoState(list(self.tensors), self.center)
        dup.discarded_weight = self.discarded_weight
        dup.trace_log = list(self.trace_log)
        return dup

    # -- measurements ----------------------------------------------------

    def trace(self) -> float:
        env = np.ones(1)
        for t in self.tensors:
            env = env @ (t[:, 0, :] + t[:, 3, :])
        return float(env[0].real)

    def success_probability(self, omega: str) -> float:
        """Tr(rho P_omega) by contracting the local projector component per site."""
        check_omega(omega, self.n_sites)
        env = np.ones(1)
        for char, t in zip(omega, self.tensors):
            env = env @ t[:, 3 * int(char), :]
        return float(env[0].real)

    def purity(self) -> float:
        """Tr(rho^2) by self-contraction with the transposing index pairing."""
        env = np.ones((1, 1))
        for t in self.tensors:
            swapped = t[:, _SWAP_INDEX, :]
            env = np.tensordot(env, t, axes=(1, 0))
            env = np.tensordot(swapped, env, axes=([0, 1], [0, 1]))
        return float(env[0, 0].real)

    def local_operator_expectation(self, qubit: int, op) -> complex:
        """Tr(rho A_qubit) for a 2x2 operator A on one site (trace vectors elsewhere)."""
        op = np.asarray(op)
        probe = op.T.reshape(4)  # component v=2i+j picks rho_ij A_ji
        env = np.ones(1)
        for site, t in enumerate(self.tensors):
            vec = probe if site == qubit else _TRACE_VEC
            env = env @ np.tensordot(vec, t, axes=(0, 1))
        return complex(env[0])

    def hermiticity_residual(self) -> float:
        """Max over probe operators and sites of |<A> - conj(<A^dag>)|."""
        worst = 0.0
        for qubit in range(self.n_sites):
            for probe in _HERMITICITY_PROBES:
                forward = self.local_operator_expectation(qubit, probe)
                backward = self.local_operator_expectation(qubit, probe.conj().T)
                worst = max(worst, abs(forward - np.conj(backward)))
        return worst

    def operator_entanglement(self, cut: int) -> float:
        """Entropy (bits) of squared operator-Schmidt coefficients at the cut.

        Schmidt coefficients are normalized by the Frobenius norm of the
        operator (sum of squares = 1), so a pure product projector and the
        maximally mixed state both give 0.
        """
        return _schmidt_entropy(self.schmidt_values(cut))

    # -- evolution ---------------------------------------------------------

    def apply_super_mpo(self, lifted: MpoOperator, policy: TruncationPolicy) -> "MpdoState":
        """Apply a physical-dimension-4 superoperator MPO, then compress."""
        self._contract_mpo(lifted)
        self._compress(policy)
        return self

    def apply_channel(self, qubit: int, channel: KrausChannel) -> "MpdoState":
        """Contract the channel's 4x4 local superoperator into one site (exact)."""
        if not 0 <= qubit < self.n_sites:
            raise ValidationError(f"qubit {qubit} out of range")
        s = local_superoperator(channel)
        t = np.tensordot(s, self.tensors[qubit], axes=(1, 1)).transpose(1, 0, 2)
        self.tensors[qubit] = t
        if self.center != qubit:
            self.center = None
        return self

    def renormalize_trace(self, drift_limit: float = TRACE_DRIFT_LIMIT) -> float:
        """Divide out the current trace; returns the raw drift |trace - 1|."""
        t = self.trace()
        drift = abs(t - 1.0)
        if drift > drift_limit:
            raise StateError(
                f"trace drifted to {t} (|drift| {drift:.3e} > {drift_limit:.0e}); "
                "likely over-truncation"
            )
        site = self.center if self.center is not None else 0
        self.tensors[site] = self.tensors[site] / t
        self.trace_log.append(t)
        return drift

    def to_dense_dm(self) -> np.ndarray:
        """Full 2^n x 2^n density matrix (small-n cross-checks only)."""
        if self.n_sites > 8:
            raise ResourceError("refusing dense conversion beyond 8 sites")
        vec = self.tensors[0].reshape(self.tensors[0].shape[1], -1)
        for t in self.tensors[1:]:
            vec = np.tensordot(vec, t, axes=(1, 0))
            vec = vec.reshape(-1, t.shape[2])
        n = self.n_sites
        full = vec[:, 0].reshape((2, 2) * n)
        row_axes = tuple(range(0, 2 * n, 2))
        col_axes = tuple(range(1, 2 * n, 2))
        return full.transpose(row_axes + col_axes).reshape(2**n, 2**n)


def mpdo_from_pure_product(local_vectors) -> MpdoState:
    """Vectorized |v><v| per site; bond dimension 1, trace 1."""
    tensors = []
    for vec in local_vectors:
        arr = np.asarray(vec)
        if arr.shape != (2,):
            raise ValidationError(f"local vectors must have 2 entries, got shape {arr.shape}")
        if abs(np.linalg.norm(arr) - 1.0) > 1e-12:
            raise ValidationError("local vectors must be normalized")
        tensors.append(np.outer(arr, arr.conj()).reshape(1, 4, 1))
    if not tensors:
        raise ValidationError("need at least one site")
    return MpdoState(tensors, center=0)


def mpdo_from_mps(mps: MpsState) -> MpdoState:
    """Vectorized projector |psi><psi| of an arbitrary MPS (bond dims square)."""
    tensors = []
    for t in mps.tensors:
        dl, _, dr = t.shape
        dub = np.einsum("lar,mbs->lmabrs", t, t.conj()).reshape(dl * dl, 4, dr * dr)
        tensors.append(dub)
    return MpdoState(tensors, center=None)


def lift_unitary_mpo(mpo: MpoOperator) -> MpoOperator:
    """Superoperator MPO W (x) conj(W) per site; bond dimensions square.

    Applying the lifted operator to a vectorized density matrix implements
    U rho U^dag.
    """
    lifted = []
    for w in mpo.tensors:
        wl, dout, din, wr = w.shape
        v = np.einsum("labr,mcds->lmacbdrs", w, w.conj())
        lifted.append(v.reshape(wl * wl, dout * dout, din * din, wr * wr))
    return MpoOperator(lifted, label=f"lift[{mpo.label}]")


def run_grover_mpdo(
    n: int,
    omega: str,
    channel: KrausChannel | None,
    iters: int | None = None,
    policy: TruncationPolicy | None = None,
    cut: int | None = None,
    record_entropy: bool = True,
    trace_drift_limit: float = TRACE_DRIFT_LIMIT,
) -> RunTrace:
    """Evolve the noisy circuit in MPDO form and record the per-iteration series.

    Each iteration applies the lifted oracle, the lifted diffusion operator
    (compressing after each), then the channel on every qubit, and finally
    renormalizes the trace.  Operator entanglement is recorded at the equal
    cut when `record_entropy` is set (requires even n).  Raw trace drift
    beyond `trace_drift_limit` raises a state error as an over-truncation
    diagnostic; sweeps that rely on the bond-doubling flag instead may relax
    the limit.
    """
    check_omega(omega, n)
    if iters is None:
        iters = analytic.optimal_iterations(n)
    if policy is None:
        policy = TruncationPolicy(chi_max=8, sv_cutoff=1e-12, renormalize=False)
    if policy.chi_max < 2:
        raise ValidationError("MPDO evolution needs chi_max >= 2")
    if cut is None:
        cut = n // 2
    if record_entropy and n % 2 != 0:
        raise ValidationError("entropy reporting assumes an equal bipartition (even n)")

    state = mpdo_from_pure_product([np.array([0.5**0.5, 0.5**0.5])] * n)
    oracle = lift_unitary_mpo(build_oracle_mpo(omega))
    diffusion = lift_unitary_mpo(build_diffusion_mpo(n))

    ks = np.arange(iters + 1)
    success = np.empty(iters + 1)
    entropy = np.full(iters + 1, np.nan)
    drift = np.zeros(iters + 1)
    discarded = np.zeros(iters + 1)

    def record(i: int) -> None:
        success[i] = state.success_probability(omega)
        if record_entropy:
            entropy[i] = state.operator_entanglement(cut)
        discarded[i] = state.discarded_weight

    record(0)
    peak_bond = 1
    for k in range(1, iters + 1):
        state.apply_super_mpo(oracle, policy)
        state.apply_super_mpo(diffusion, policy)
        if channel is not None:
            for qubit in range(n):
                state.apply_channel(qubit, channel)
        peak_bond = max(peak_bond, max(state.bond_dimensions()))
        drift[k] = state.renormalize_trace(trace_drift_limit)
        record(k)
    return RunTrace(
        ks,
        success,
        entropy,
        mode="mpdo",
        trace_drift=drift,
        discarded_weight=discarded,
        meta={"n": n, "omega": omega, "cut": cut, "chi_max": policy.chi_max, "peak_bond": peak_bond},
    )
