"""Stochastic quantum-trajectory ensembles over MPS states.

A trajectory applies the two search reflections as MPO contractions, then
sweeps the qubits in ascending order: for each qubit the active unraveling
strategy picks a (possibly unitarily mixed) Kraus set, outcome probabilities
p_m = <psi|F_m^dag F_m|psi> are evaluated through the canonical center, one
outcome is drawn, and the operator is applied with renormalization.

Trajectory i of an ensemble is seeded deterministically from (master seed,
i) through a counter-based generator, so results are bit-identical no matter
how trajectories are scheduled across workers.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field

import numpy as np

from . import dense
from .channels import KrausChannel, mix_channel
from .errors import NumericalError, ResourceError, ValidationError
from .tensornet import (
    MpoOperator,
    MpsState,
    TruncationPolicy,
    build_diffusion_mpo,
    build_oracle_mpo,
    uniform_mps,
)

NAIVE = "naive"
MAX_NONUNITARITY = "max_nonunitarity"
GREEDY_ENTROPY_MIN = "greedy_entropy_min"

_GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
_FLATNESS_TOL = 1e-14


def overlap_deficit(u: np.ndarray, expectations: np.ndarray, gram: np.ndarray) -> float:
    """Default non-unitarity score 1 - sum_m |<psi|F_m|psi>|^2 for F = U E.

    Vanishes exactly when every mixed operator acts as a phase on the state.
    Because the operator expectations transform linearly under the mixing
    (f = U e), the score is the same for every unitary U; the optimizer's
    flatness fallback then keeps the bare Kraus set.  It is retained as the
    default for its cost (two local expectations) and as the reference point
    for plug-in alternatives.
    """
    f = u @ expectations
    return 1.0 - float(np.real(np.vdot(f, f)))


NONUNITARITY_FUNCTIONALS = {"overlap_deficit": overlap_deficit}


@dataclass(frozen=True)
class UnravelingStrategy:
    """Which Kraus set a trajectory applies at each qubit, plus optimizer settings."""

    tag: str = NAIVE
    grid_resolution: int = 12
    refine_iters: int = 24
    functional: str = "overlap_deficit"

    def __post_init__(self):
        if self.tag not in (NAIVE, MAX_NONUNITARITY, GREEDY_ENTROPY_MIN):
            raise ValidationError(f"unknown strategy tag {self.tag!r}")
        if self.grid_resolution < 4:
            raise ValidationError("grid resolution must be >= 4")
        if self.functional not in NONUNITARITY_FUNCTIONALS:
            raise ValidationError(f"unknown non-unitarity functional {self.functional!r}")


def naive_strategy() -> UnravelingStrategy:
    return UnravelingStrategy(tag=NAIVE)


def numu_strategy(grid_resolution: int = 12, refine_iters: int = 24, functional: str = "overlap_deficit") -> UnravelingStrategy:
    return UnravelingStrategy(MAX_NONUNITARITY, grid_resolution, refine_iters, functional)


def greedy_strategy(grid_resolution: int = 8) -> UnravelingStrategy:
    return UnravelingStrategy(GREEDY_ENTROPY_MIN, grid_resolution)


@dataclass(frozen=True)
class TrajectoryConfig:
    """Full description of a trajectory ensemble run."""

    n: int
    omega: str
    channel: KrausChannel
    iters: int
    n_trajectories: int
    policy: TruncationPolicy = TruncationPolicy(chi_max=64, sv_cutoff=1e-10)
    strategy: UnravelingStrategy = UnravelingStrategy()
    seed: int = 0
    cut: int | None = None
    keep_records: bool = True

    def __post_init__(self):
        dense.check_omega(self.omega, self.n)
        if self.iters < 1:
            raise ValidationError("need at least one iteration")
        if self.n_trajectories < 1:
            raise ValidationError("need at least one trajectory")
        if self.seed < 0:
            raise ValidationError("master seed must be non-negative")
        cut = self.cut if self.cut is not None else self.n // 2
        if not 1 <= cut <= self.n - 1:
            raise ValidationError(f"cut must lie in [1, {self.n - 1}], got {cut}")
        object.__setattr__(self, "cut", cut)


@dataclass
class TrajectoryRecord:
    """One trajectory's entropy/success time series and its jump history."""

    index: int
    entropy_series: np.ndarray
    success_series: np.ndarray
    jump_log: list[tuple[int, int, int]]
    final_success: float
    seed_used: tuple[int, int]


@dataclass
class EnsembleResult:
    """Ensemble statistics; percentile bands only when records were retained."""

    config: TrajectoryConfig
    mean_entropy_series: np.ndarray
    mean_success_series: np.ndarray
    stderr_success_series: np.ndarray
    mean_success: float
    stderr_success: float
    percentile_bands: dict[int, np.ndarray] | None = None
    min_series: np.ndarray | None = None
    max_series: np.ndarray | None = None
    records: list[TrajectoryRecord] | None = None
    var_entropy_series: np.ndarray | None = None
    meta: dict = field(default_factory=dict)


def trajectory_rng(seed: int, index: int) -> np.random.Generator:
    """Counter-based generator keyed on (master seed, trajectory index)."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy=seed, spawn_key=(index,))))


def _mixing_unitary(phi: float, chi: float) -> np.ndarray:
    """Two-parameter unitary family covering U(2) modulo per-row phases."""
    c, s = math.cos(phi), math.sin(phi)
    return np.array([[c, s * np.exp(1j * chi)], [-s * np.exp(-1j * chi), c]])


def _kraus_moments(state: MpsState, qubit: int, channel: KrausChannel):
    """Local expectations e_n = <E_n> and Gram matrix G_nm = <E_n^dag E_m>."""
    rho = state.local_density_matrix(qubit)
    ops = channel.operators
    m = len(ops)
    expectations = np.array([np.trace(op @ rho) for op in ops])
    gram = np.empty((m, m), dtype=complex)
    for a in range(m):
        for b in range(m):
            gram[a, b] = np.trace(ops[a].conj().T @ ops[b] @ rho)
    return expectations, gram


def _golden_max(fun, lo: float, hi: float, iters: int) -> float:
    """Golden-section maximization of a unimodal section; returns the best point."""
    a, b = lo, hi
    c = b - _GOLDEN * (b - a)
    d = a + _GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iters):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - _GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + _GOLDEN * (b - a)
            fd = fun(d)
    return c if fc > fd else d


def optimize_mixing_nonunitarity(
    state: MpsState,
    qubit: int,
    channel: KrausChannel,
    grid_resolution: int = 12,
    refine_iters: int = 24,
    functional: str = "overlap_deficit",
) -> np.ndarray:
    """Mixing unitary maximizing the non-unitarity score; deterministic given the state.

    Coarse grid over the two mixing parameters, then golden-section
    refinement of each in turn.  Falls back to the identity whenever the
    score is flat over the grid to within 1e-14 (which includes the default
    functional, see `overlap_deficit`) or the identity already attains the
    optimum.
    """
    if channel.num_operators != 2:
        raise ValidationError("mixing optimization expects a two-operator channel")
    score_fn = NONUNITARITY_FUNCTIONALS[functional]
    expectations, gram = _kraus_moments(state, qubit, channel)

    def score(phi: float, chi: float) -> float:
        return score_fn(_mixing_unitary(phi, chi), expectations, gram)

    phis = np.linspace(0.0, math.pi / 2.0, grid_resolution)
    chis = np.linspace(0.0, 2.0 * math.pi, grid_resolution, endpoint=False)
    values = np.array([[score(p, c) for c in chis] for p in phis])
    if float(values.max() - values.min()) <= _FLATNESS_TOL:
        return np.eye(2)
    best_p, best_c = np.unravel_index(int(values.argmax()), values.shape)
    phi, chi = float(phis[best_p]), float(chis[best_c])
    dphi = phis[1] - phis[0]
    dchi = chis[1] - chis[0]
    phi = _golden_max(lambda p: score(p, chi), max(0.0, phi - dphi), min(math.pi / 2.0, phi + dphi), refine_iters)
    chi = _golden_max(lambda c: score(phi, c), chi - dchi, chi + dchi, refine_iters)
    if score(phi, chi) <= score(0.0, 0.0) + _FLATNESS_TOL:
        return np.eye(2)
    return _mixing_unitary(phi, chi)


def optimize_mixing_entropy(
    state: MpsState,
    qubit: int,
    channel: KrausChannel,
    cut: int,
    grid_resolution: int = 8,
) -> np.ndarray:
    """Mixing unitary minimizing the expected post-outcome entropy at the cut.

    Evaluates sum_m p_m S(psi_m) by trial application and SVD for every grid
    point; this is the expensive baseline the cheap strategies are compared
    against.  Ties break toward the identity.
    """
    if channel.num_operators != 2:
        raise ValidationError("mixing optimization expects a two-operator channel")
    state.ensure_center(qubit)
    _, gram = _kraus_moments(state, qubit, channel)

    def expected_entropy(u: np.ndarray) -> float:
        ops = [sum(u[row, col] * channel.operators[col] for col in range(2)) for row in range(2)]
        total = 0.0
        for row, op in enumerate(ops):
            prob = float(np.real(np.conj(u[row]) @ gram @ u[row]))
            if prob < 1e-14:
                continue
            trial = state.copy()
            trial.apply_local_op(qubit, op, renormalize=True)
            total += prob * trial.bipartite_entropy(cut)
        return total

    identity = np.eye(2)
    best_u, best_val = identity, expected_entropy(identity)
    phis = np.linspace(0.0, math.pi / 2.0, grid_resolution)
    chis = np.linspace(0.0, 2.0 * math.pi, grid_resolution, endpoint=False)
    for phi in phis:
        for chi in chis:
            u = _mixing_unitary(phi, chi)
            val = expected_entropy(u)
            if val < best_val - 1e-14:
                best_u, best_val = u, val
    return best_u


def _select_kraus(state: MpsState, qubit: int, cfg: TrajectoryConfig) -> tuple[np.ndarray, ...]:
    strategy = cfg.strategy
    if strategy.tag == NAIVE or cfg.channel.num_operators != 2:
        return cfg.channel.operators
    if strategy.tag == MAX_NONUNITARITY:
        u = optimize_mixing_nonunitarity(
            state, qubit, cfg.channel, strategy.grid_resolution, strategy.refine_iters, strategy.functional
        )
    else:
        u = optimize_mixing_entropy(state, qubit, cfg.channel, cfg.cut, strategy.grid_resolution)
    if np.array_equal(u, np.eye(2)):
        return cfg.channel.operators
    return mix_channel(cfg.channel, u).operators


def _probability_vectors(ops) -> np.ndarray:
    """Rows v_m with <F_m^dag F_m> = v_m . vec(rho_local) for a flattened 2x2 rho."""
    return np.stack([(op.conj().T @ op).T.reshape(4) for op in ops])


def _default_branch(ops) -> int:
    """Index of the operator with the largest average weight Tr(F^dag F)."""
    weights = [float(np.real(np.trace(op.conj().T @ op))) for op in ops]
    return int(np.argmax(weights))


def outcome_probabilities(state: MpsState, qubit: int, ops, prob_vectors=None) -> np.ndarray:
    """Born probabilities <psi|F_m^dag F_m|psi> for each operator in the set."""
    rho = state.local_density_matrix(qubit)
    if prob_vectors is None:
        prob_vectors = _probability_vectors(ops)
    probs = np.real(prob_vectors @ rho.reshape(4))
    if abs(probs.sum() - 1.0) > 1e-8:
        raise NumericalError(f"outcome probabilities sum to {probs.sum()}, not 1")
    return probs


_SAMPLER_CACHE: dict = {}


def _channel_sampler(channel: KrausChannel):
    """Per-channel constants for the naive draw (keyed by channel identity)."""
    key = id(channel)
    entry = _SAMPLER_CACHE.get(key)
    if entry is None or entry[0] is not channel:
        entry = (channel, _probability_vectors(channel.operators), _default_branch(channel.operators))
        _SAMPLER_CACHE[key] = entry
    return entry[1], entry[2]


def step_trajectory(
    state: MpsState, cfg: TrajectoryConfig, rng: np.random.Generator, iteration: int = 0
) -> list[tuple[int, int, int]]:
    """One full iteration in place: both reflections, then the stochastic noise layer.

    Returns the jump log entries (iteration, qubit, outcome index) for draws
    that deviated from the dominant branch of the applied Kraus set.
    """
    state.apply_mpo(_oracle_mpo(cfg.omega), cfg.policy)
    state.apply_mpo(_diffusion_mpo(cfg.n), cfg.policy)
    jumps = []
    naive_vectors, naive_default = _channel_sampler(cfg.channel)
    for qubit in range(cfg.n):
        ops = _select_kraus(state, qubit, cfg)
        if ops is cfg.channel.operators:
            vectors, default = naive_vectors, naive_default
        else:
            vectors, default = _probability_vectors(ops), _default_branch(ops)
        probs = outcome_probabilities(state, qubit, ops, vectors)
        cumulative = np.cumsum(probs)
        outcome = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
        outcome = min(outcome, len(ops) - 1)
        state.apply_local_op(qubit, ops[outcome], renormalize=True)
        if outcome != default:
            jumps.append((iteration, qubit, outcome))
    return jumps


_MPO_CACHE: dict = {}


def _oracle_mpo(omega: str) -> MpoOperator:
    key = ("oracle", omega)
    if key not in _MPO_CACHE:
        _MPO_CACHE[key] = build_oracle_mpo(omega)
    return _MPO_CACHE[key]


def _diffusion_mpo(n: int) -> MpoOperator:
    key = ("diffusion", n)
    if key not in _MPO_CACHE:
        _MPO_CACHE[key] = build_diffusion_mpo(n)
    return _MPO_CACHE[key]


def run_trajectory(cfg: TrajectoryConfig, index: int) -> TrajectoryRecord:
    """Evolve one seeded trajectory; entropy is recorded after each noise layer."""
    rng = trajectory_rng(cfg.seed, index)
    state = uniform_mps(cfg.n)
    entropy = np.empty(cfg.iters + 1)
    success = np.empty(cfg.iters + 1)
    entropy[0] = state.bipartite_entropy(cfg.cut)
    success[0] = state.success_probability(cfg.omega)
    jumps: list[tuple[int, int, int]] = []
    for k in range(1, cfg.iters + 1):
        jumps.extend(step_trajectory(state, cfg, rng, iteration=k))
        entropy[k] = state.bipartite_entropy(cfg.cut)
        success[k] = state.success_probability(cfg.omega)
    return TrajectoryRecord(index, entropy, success, jumps, float(success[-1]), (cfg.seed, index))


def _run_block(cfg: TrajectoryConfig, indices) -> list[TrajectoryRecord]:
    return [run_trajectory(cfg, i) for i in indices]


def _kahan_add(total: np.ndarray, comp: np.ndarray, value: np.ndarray) -> None:
    y = value - comp
    t = total + y
    comp[:] = (t - total) - y
    total[:] = t


def run_ensemble(cfg: TrajectoryConfig, workers: int = 1) -> EnsembleResult:
    """Run `cfg.n_trajectories` independent trajectories and reduce the statistics.

    Trajectories are embarrassingly parallel; results are merged in index
    order so the output is identical for any worker count.  Without record
    retention only compensated streaming means/variances are kept and the
    percentile bands are unavailable.
    """
    indices = range(cfg.n_trajectories)
    if workers > 1:
        blocks = np.array_split(np.asarray(indices), min(workers * 4, cfg.n_trajectories))
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_block, cfg, [int(i) for i in block]) for block in blocks if block.size]
            records_iter = [rec for fut in futures for rec in fut.result()]
        records = sorted(records_iter, key=lambda r: r.index)
    else:
        records = [run_trajectory(cfg, i) for i in indices]

    steps = cfg.iters + 1
    if cfg.keep_records:
        entropy_matrix = np.stack([r.entropy_series for r in records])
        success_matrix = np.stack([r.success_series for r in records])
        mean_entropy = entropy_matrix.mean(axis=0)
        var_entropy = entropy_matrix.var(axis=0, ddof=1) if len(records) > 1 else np.zeros(steps)
        mean_success = success_matrix.mean(axis=0)
        std_success = success_matrix.std(axis=0, ddof=1) if len(records) > 1 else np.zeros(steps)
        bands = {
            q: np.percentile(entropy_matrix, q, axis=0) for q in (5, 25, 50, 75, 95)
        }
        result = EnsembleResult(
            config=cfg,
            mean_entropy_series=mean_entropy,
            mean_success_series=mean_success,
            stderr_success_series=std_success / math.sqrt(len(records)),
            mean_success=float(mean_success[-1]),
            stderr_success=float(std_success[-1] / math.sqrt(len(records))),
            percentile_bands=bands,
            min_series=entropy_matrix.min(axis=0),
            max_series=entropy_matrix.max(axis=0),
            records=records,
            var_entropy_series=var_entropy,
        )
        return result

    # Streaming reduction in index order with compensated summation.
    ent_sum, ent_comp = np.zeros(steps), np.zeros(steps)
    ent_sq, ent_sq_comp = np.zeros(steps), np.zeros(steps)
    suc_sum, suc_comp = np.zeros(steps), np.zeros(steps)
    suc_sq, suc_sq_comp = np.zeros(steps), np.zeros(steps)
    for rec in records:
        _kahan_add(ent_sum, ent_comp, rec.entropy_series)
        _kahan_add(ent_sq, ent_sq_comp, rec.entropy_series**2)
        _kahan_add(suc_sum, suc_comp, rec.success_series)
        _kahan_add(suc_sq, suc_sq_comp, rec.success_series**2)
    count = len(records)
    mean_entropy = ent_sum / count
    mean_success = suc_sum / count
    if count > 1:
        var_entropy = np.clip((ent_sq - count * mean_entropy**2) / (count - 1), 0.0, None)
        var_success = np.clip((suc_sq - count * mean_success**2) / (count - 1), 0.0, None)
    else:
        var_entropy = np.zeros(steps)
        var_success = np.zeros(steps)
    stderr_success = np.sqrt(var_success / count)
    return EnsembleResult(
        config=cfg,
        mean_entropy_series=mean_entropy,
        mean_success_series=mean_success,
        stderr_success_series=stderr_success,
        mean_success=float(mean_success[-1]),
        stderr_success=float(stderr_success[-1]),
        var_entropy_series=var_entropy,
    )


@dataclass
class DenseCrosscheckResult:
    """Trajectory-averaged density matrix against the exact dense evolution."""

    averaged_dm: np.ndarray
    exact_dm: np.ndarray
    max_distance: float
    n_trajectories: int


def _dense_apply_local(psi: np.ndarray, n: int, qubit: int, op: np.ndarray) -> np.ndarray:
    left = 2**qubit
    right = 2 ** (n - 1 - qubit)
    work = psi.reshape(left, 2, right)
    return np.einsum("ua,iar->iur", op, work).reshape(-1)


def dense_trajectory_crosscheck(cfg: TrajectoryConfig) -> DenseCrosscheckResult:
    """Average dense-statevector trajectories and compare to the exact density matrix.

    The distance (max norm) shrinks with the trajectory count at the usual
    Monte Carlo rate; it is reported, not asserted against a fixed value.
    """
    if cfg.n > 8:
        raise ResourceError(f"dense crosscheck supports n <= 8, got n={cfg.n}")
    exact = dense.final_density_matrix(cfg.n, cfg.omega, cfg.channel, cfg.iters)
    dim = 2**cfg.n
    accumulated = np.zeros((dim, dim), dtype=np.complex128)
    for index in range(cfg.n_trajectories):
        rng = trajectory_rng(cfg.seed, index)
        psi = dense.init_uniform(cfg.n).amplitudes
        for _ in range(cfg.iters):
            idx = dense.omega_index(cfg.omega)
            psi[idx] = -psi[idx]
            psi = 2.0 * np.mean(psi) - psi
            for qubit in range(cfg.n):
                probs = np.array(
                    [float(np.linalg.norm(_dense_apply_local(psi, cfg.n, qubit, op)) ** 2) for op in cfg.channel.operators]
                )
                cumulative = np.cumsum(probs)
                outcome = int(np.searchsorted(cumulative, rng.random() * cumulative[-1], side="right"))
                outcome = min(outcome, len(cfg.channel.operators) - 1)
                psi = _dense_apply_local(psi, cfg.n, qubit, cfg.channel.operators[outcome])
                psi = psi / np.linalg.norm(psi)
        accumulated += np.outer(psi, psi.conj())
    averaged = accumulated / cfg.n_trajectories
    distance = float(np.max(np.abs(averaged - exact.entries)))
    return DenseCrosscheckResult(averaged, exact.entries, distance, cfg.n_trajectories)


def ensemble_vs_dense_sigma(cfg: TrajectoryConfig, workers: int = 1) -> tuple[float, EnsembleResult]:
    """Distance, in standard errors, between ensemble mean success and the dense value."""
    result = run_ensemble(cfg, workers=workers)
    exact = dense.final_density_matrix(cfg.n, cfg.omega, cfg.channel, cfg.iters)
    reference = dense.success_probability(exact, cfg.omega)
    sigma = abs(result.mean_success - reference) / max(result.stderr_success, 1e-30)
    return float(sigma), result
