"""Scaling sweeps over noise rate and qubit number, and the decay-law fits.

The final success probability after the optimal iteration count decays, in
the asymptotic window, like P_f ~ 2^(-n) + exp(-b*n) * p^(-a) for both noise
channels; the fit works on log(excess) = -b*n - a*log(p), which is exactly
linear, after subtracting the random-bitstring floor 2^(-n).

Amplitude damping breaks the target independence enjoyed by phase flips, so
its sweep averages the n+1 success probabilities of representative targets
(n1 ones followed by zeros) with exact binomial weights.
"""

from __future__ import annotations

import concurrent.futures
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import analytic, dense
from .channels import AMPLITUDE_DAMPING, PHASE_FLIP, make_amplitude_damping, make_phase_flip
from .errors import FitError, ValidationError
from .mpdo import run_grover_mpdo
from .tensornet import TruncationPolicy

ENGINE_MPDO = "mpdo"
ENGINE_DENSE = "dense"

TARGET_ALL_ONES = "fixed_all_ones"
TARGET_BINOMIAL = "binomial_average"

CONVERGENCE_TOL = 1e-6


def default_p_grid(count: int = 20, low: float = 5e-3, high: float = 5e-1) -> tuple[float, ...]:
    """Log-spaced noise-rate grid covering the probed decay range."""
    return tuple(float(p) for p in np.geomspace(low, high, count))


@dataclass(frozen=True)
class SweepSpec:
    """Declarative description of one scaling sweep."""

    channel_kind: str
    n_list: tuple[int, ...]
    p_grid: tuple[float, ...] = field(default_factory=default_p_grid)
    chi_max: int = 64
    sv_cutoff: float = 1e-12
    engine: str = ENGINE_MPDO
    target_policy: str = ""
    check_convergence: bool = True

    def __post_init__(self):
        if self.channel_kind not in (PHASE_FLIP, AMPLITUDE_DAMPING):
            raise ValidationError(f"unknown channel kind {self.channel_kind!r}")
        if self.engine not in (ENGINE_MPDO, ENGINE_DENSE):
            raise ValidationError(f"unknown engine {self.engine!r}")
        if not self.n_list:
            raise ValidationError("n_list must not be empty")
        for n in self.n_list:
            if n % 2 != 0 or n < 2:
                raise ValidationError(f"qubit counts must be even and >= 2, got {n}")
        for p in self.p_grid:
            if not 0.0 < p < 1.0:
                raise ValidationError(f"noise rates must lie in (0, 1), got {p}")
        if not self.target_policy:
            default = TARGET_ALL_ONES if self.channel_kind == PHASE_FLIP else TARGET_BINOMIAL
            object.__setattr__(self, "target_policy", default)
        if self.target_policy not in (TARGET_ALL_ONES, TARGET_BINOMIAL):
            raise ValidationError(f"unknown target policy {self.target_policy!r}")


@dataclass(frozen=True)
class ScalingPoint:
    """One (n, p) sample of the final success probability.

    Excess may be genuinely negative: under heavy amplitude damping the
    target-averaged success probability dips below the random-bitstring
    floor (measured -1.4e-4 at n=8, p=0.5), so the only hard bound is
    excess >= -2^(-n).  Fits only ever see positive-excess windows.
    """

    n: int
    p: float
    final_probability: float
    excess: float
    converged: bool
    chi_max: int
    engine: str
    targets_averaged: int = 1

    def __post_init__(self):
        if not 0.0 <= self.final_probability <= 1.0 + 1e-12:
            raise ValidationError(f"final probability {self.final_probability} outside [0, 1]")
        if self.excess < -(2.0 ** (-self.n)) - 1e-12:
            raise ValidationError(f"excess {self.excess} below the hard floor -2^(-{self.n})")


@dataclass(frozen=True)
class FitWindow:
    """Excess-probability band retained for fitting.

    At large rates the excess saturates at a stationary floor of a few times
    2^(-n) where the decay law no longer applies; `floor_scale` (in units of
    2^(-n), disabled at 0) excludes that band per qubit count, which no
    absolute floor can do across different n.
    """

    floor: float = 1e-9
    ceiling: float = 1e-2
    floor_scale: float = 0.0

    def __post_init__(self):
        if not self.floor < self.ceiling:
            raise ValidationError("window floor must lie below its ceiling")
        if self.floor_scale < 0.0:
            raise ValidationError("floor_scale must be >= 0")

    def contains(self, excess: float, n: int | None = None) -> bool:
        floor = self.floor
        if self.floor_scale > 0.0 and n is not None:
            floor = max(floor, self.floor_scale * 2.0 ** (-n))
        return floor <= excess <= self.ceiling


@dataclass(frozen=True)
class FitResult:
    """Fitted decay exponents with normal-equation standard errors."""

    model: str
    rate_exponent: float
    qubit_exponent: float
    rate_exponent_err: float
    qubit_exponent_err: float
    residual_norm: float
    window: FitWindow
    n_points: int
    intercept: float | None = None

    def as_dict(self) -> dict:
        out = {
            "model": self.model,
            "rate_exponent": self.rate_exponent,
            "qubit_exponent": self.qubit_exponent,
            "rate_exponent_err": self.rate_exponent_err,
            "qubit_exponent_err": self.qubit_exponent_err,
            "residual_norm": self.residual_norm,
            "window_floor": self.window.floor,
            "window_ceiling": self.window.ceiling,
            "window_floor_scale": self.window.floor_scale,
            "n_points": self.n_points,
        }
        if self.intercept is not None:
            out["intercept"] = self.intercept
        return out


def _channel_for(kind: str, p: float):
    return make_phase_flip(p) if kind == PHASE_FLIP else make_amplitude_damping(p)


def _final_probability(spec: SweepSpec, n: int, p: float, omega: str, chi_max: int) -> tuple[float, int]:
    channel = _channel_for(spec.channel_kind, p)
    iters = analytic.optimal_iterations(n)
    if spec.engine == ENGINE_DENSE:
        trace = dense.run_grover(n, omega, channel, iters)
        return float(trace.success[-1]), 0
    policy = TruncationPolicy(chi_max=chi_max, sv_cutoff=spec.sv_cutoff, renormalize=False)
    trace = run_grover_mpdo(
        n, omega, channel, iters, policy, record_entropy=False, trace_drift_limit=np.inf
    )
    return float(trace.success[-1]), int(trace.meta["peak_bond"])


def _sweep_job(spec: SweepSpec, n: int, p: float, omega: str) -> tuple[float, bool]:
    """Final probability for one target, plus the bond-doubling convergence flag.

    When the bond cap never binds (peak bond below chi_max), a doubled-cap
    rerun is bit-identical under the same relative cutoff, so the flag is
    set converged without the second run.
    """
    value, peak_bond = _final_probability(spec, n, p, omega, spec.chi_max)
    converged = True
    if spec.check_convergence and spec.engine == ENGINE_MPDO and peak_bond >= spec.chi_max:
        doubled, _ = _final_probability(spec, n, p, omega, 2 * spec.chi_max)
        converged = abs(doubled - value) <= CONVERGENCE_TOL
    return value, converged


def binomial_weights(n: int) -> list[Fraction]:
    """Exact weights C(n, k) / 2^n; they sum to 1 by construction."""
    denom = 2**n
    weights = [Fraction(math.comb(n, k), denom) for k in range(n + 1)]
    assert sum(weights) == 1
    return weights


def representative_target(n: int, n1: int) -> str:
    """Canonical target with n1 ones followed by zeros (permutation symmetry)."""
    if not 0 <= n1 <= n:
        raise ValidationError(f"n1 must lie in [0, {n}], got {n1}")
    return "1" * n1 + "0" * (n - n1)


def _jobs_for(spec: SweepSpec) -> list[tuple[int, float, int, str]]:
    jobs = []
    for n in spec.n_list:
        for p in spec.p_grid:
            if spec.target_policy == TARGET_ALL_ONES:
                jobs.append((n, p, -1, "1" * n))
            else:
                for n1 in range(n + 1):
                    jobs.append((n, p, n1, representative_target(n, n1)))
    return jobs


def run_sweep(spec: SweepSpec, workers: int = 1) -> list[ScalingPoint]:
    """Execute every (n, p[, target]) job and reduce to one point per (n, p).

    Jobs are independent and may run on a worker pool; results are keyed by
    (n, p, target) so the output ordering is canonical regardless of the
    completion order.
    """
    jobs = _jobs_for(spec)
    if workers > 1:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_one_job, [(spec, job) for job in jobs], chunksize=1))
    else:
        outcomes = [_run_one_job((spec, job)) for job in jobs]
    results = {job[:3]: outcome for job, outcome in zip(jobs, outcomes)}

    points = []
    for n in spec.n_list:
        weights = binomial_weights(n)
        for p in spec.p_grid:
            if spec.target_policy == TARGET_ALL_ONES:
                value, converged = results[(n, p, -1)]
                targets = 1
            else:
                value = 0.0
                converged = True
                for n1 in range(n + 1):
                    part, part_ok = results[(n, p, n1)]
                    value += float(weights[n1]) * part
                    converged = converged and part_ok
                targets = n + 1
            points.append(
                ScalingPoint(
                    n=n,
                    p=p,
                    final_probability=value,
                    excess=value - 2.0 ** (-n),
                    converged=converged,
                    chi_max=spec.chi_max if spec.engine == ENGINE_MPDO else 0,
                    engine=spec.engine,
                    targets_averaged=targets,
                )
            )
    return points


def _run_one_job(packed) -> tuple[float, bool]:
    spec, (n, p, _, omega) = packed
    return _sweep_job(spec, n, p, omega)


def run_phase_flip_sweep(spec: SweepSpec, workers: int = 1) -> list[ScalingPoint]:
    """Phase-flip sweep with the target fixed to all ones (results are target-independent)."""
    if spec.channel_kind != PHASE_FLIP:
        raise ValidationError("spec does not describe a phase-flip sweep")
    return run_sweep(spec, workers=workers)


def run_amplitude_damping_sweep(spec: SweepSpec, workers: int = 1) -> list[ScalingPoint]:
    """Amplitude-damping sweep, binomially averaged over representative targets."""
    if spec.channel_kind != AMPLITUDE_DAMPING:
        raise ValidationError("spec does not describe an amplitude-damping sweep")
    if spec.target_policy != TARGET_BINOMIAL:
        raise ValidationError("amplitude-damping sweeps require the binomial target policy")
    return run_sweep(spec, workers=workers)


def select_fit_window(points, floor: float = 1e-9, ceiling: float = 1e-2, floor_scale: float = 0.0):
    """Retain points whose excess lies within the window (see FitWindow)."""
    window = FitWindow(floor, ceiling, floor_scale)
    retained = [pt for pt in points if window.contains(pt.excess, pt.n)]
    return window, retained


def fit_scaling(points, model: str, window: FitWindow | None = None, intercept: bool = False) -> FitResult:
    """Least-squares fit of log(excess) = -qubit_exp * n - rate_exp * log(p).

    Only unflagged (converged) points inside the window enter the fit; at
    least 8 are required.  Standard errors come from the normal equations.
    """
    if window is None:
        window = FitWindow()
    usable = [pt for pt in points if pt.converged and window.contains(pt.excess, pt.n)]
    if not usable:
        raise FitError("no unflagged points inside the fit window")
    bad = [pt for pt in usable if pt.excess <= 0.0]
    if bad:
        listing = ", ".join(f"(n={pt.n}, p={pt.p:.4g}, excess={pt.excess:.3g})" for pt in bad)
        raise FitError(f"non-positive excess inside the window: {listing}")
    if len(usable) < 8:
        raise FitError(f"need at least 8 points inside the window, found {len(usable)}")

    y = np.log([pt.excess for pt in usable])
    n_col = np.array([float(pt.n) for pt in usable])
    logp_col = np.log([pt.p for pt in usable])
    columns = [n_col, logp_col]
    if intercept:
        columns.append(np.ones_like(n_col))
    design = np.column_stack(columns)
    coef, _, _, _ = np.linalg.lstsq(design, y, rcond=None)
    residuals = y - design @ coef
    dof = max(len(usable) - design.shape[1], 1)
    sigma2 = float(residuals @ residuals) / dof
    covariance = sigma2 * np.linalg.inv(design.T @ design)
    errors = np.sqrt(np.diag(covariance))
    return FitResult(
        model=model,
        rate_exponent=float(-coef[1]),
        qubit_exponent=float(-coef[0]),
        rate_exponent_err=float(errors[1]),
        qubit_exponent_err=float(errors[0]),
        residual_norm=float(np.linalg.norm(residuals)),
        window=window,
        n_points=len(usable),
        intercept=float(coef[2]) if intercept else None,
    )


def window_sensitivity(points, model: str, window: FitWindow | None = None) -> dict:
    """Re-fit with the ceiling halved and doubled; reports exponent shifts."""
    if window is None:
        window = FitWindow()
    out = {}
    for label, factor in (("ceiling_half", 0.5), ("ceiling_double", 2.0)):
        try:
            alt = fit_scaling(points, model, FitWindow(window.floor, window.ceiling * factor, window.floor_scale))
            out[label] = alt.as_dict()
        except FitError as exc:
            out[label] = {"error": str(exc)}
    return out


def generate_synthetic(
    model: str,
    rate_exponent: float,
    qubit_exponent: float,
    n_list,
    p_grid,
    jitter: float = 0.0,
    seed: int = 0,
) -> list[ScalingPoint]:
    """Points drawn from the decay law, optionally with relative Gaussian jitter."""
    if jitter < 0.0:
        raise ValidationError("jitter must be >= 0")
    rng = np.random.default_rng(seed)
    points = []
    for n in n_list:
        for p in p_grid:
            excess = math.exp(-qubit_exponent * n) * p ** (-rate_exponent)
            if jitter > 0.0:
                excess *= 1.0 + jitter * rng.standard_normal()
            prob = min(2.0 ** (-n) + excess, 1.0)
            points.append(
                ScalingPoint(
                    n=n,
                    p=float(p),
                    final_probability=prob,
                    excess=prob - 2.0 ** (-n),
                    converged=True,
                    chi_max=0,
                    engine="synthetic",
                )
            )
    return points
