"""Closed-form two-level model of the noiseless search iteration.

After k iterations the register state lies in the plane spanned by the
target basis state and the uniform superposition of all other basis
states, rotated by an angle theta_k = (2k+1) arcsin(2^(-n/2)).  Success
probability and the bipartite entropy at an equal cut follow from theta_k
in closed form, which makes this module the exact reference every
numerical engine is checked against.

Entropies are reported in bits (log base 2) so the rank-2 bound on the
equal-cut entropy is exactly 1.
"""

from __future__ import annotations

import math

from .errors import NumericalError, ValidationError


def _check_n(n: int, even: bool = False) -> None:
    if n < 2:
        raise ValidationError(f"need at least 2 qubits, got n={n}")
    if even and n % 2 != 0:
        raise ValidationError(f"equal bipartition requires even n, got n={n}")


def grover_angle(n: int, k: int) -> float:
    """Rotation angle theta_k = (2k+1) * arcsin(2^(-n/2)) after k iterations."""
    _check_n(n)
    if k < 0:
        raise ValidationError(f"iteration index must be >= 0, got k={k}")
    return (2 * k + 1) * math.asin(2.0 ** (-n / 2.0))


def ideal_success_probability(n: int, k: int) -> float:
    """Noiseless probability sin^2(theta_k) of measuring the target after k iterations."""
    return math.sin(grover_angle(n, k)) ** 2


def optimal_iterations(n: int) -> int:
    """Iteration count M = floor((pi/4) * sqrt(2^n)) that brings the state closest to the target."""
    _check_n(n)
    return math.floor((math.pi / 4.0) * 2.0 ** (n / 2.0))


def reduced_dm_elements(n: int, theta: float) -> tuple[float, float, float]:
    """Matrix elements (alpha, beta, gamma) of the equal-cut reduced density matrix.

    For the two-level state sin(theta)|target> + cos(theta)|rest>, tracing
    out half of an n-qubit register (n even) leaves a sqrt(N) x sqrt(N)
    matrix, N = 2^n, of the arrowhead form

        [[alpha, beta, ..., beta],
         [beta,  gamma, ..., gamma],
         [...                    ],
         [beta,  gamma, ..., gamma]]

    with alpha on the diagonal entry of the target's left-half bitstring.
    Satisfies the trace identity alpha + (sqrt(N)-1)*gamma = 1.
    """
    _check_n(n, even=True)
    big_n = 2.0**n
    root_n = 2.0 ** (n / 2)
    cos2 = math.cos(theta) ** 2
    sincos = math.sin(theta) * math.cos(theta)
    alpha = (root_n - 1.0) / (big_n - 1.0) * cos2 + math.sin(theta) ** 2
    beta = (root_n - 1.0) / (big_n - 1.0) * cos2 + sincos / math.sqrt(big_n - 1.0)
    gamma = root_n / (big_n - 1.0) * cos2
    return alpha, beta, gamma


def reduced_eigenvalues(n: int, theta: float) -> tuple[float, float]:
    """The two non-zero eigenvalues (lambda_plus, lambda_minus) of the equal-cut reduced state.

    All other eigenvalues vanish (the Schmidt rank across the cut is 2):

        lambda_pm = 1/2 +- 1/2 * sqrt[(alpha - (sqrt(N)-1) gamma)^2 + 4 (sqrt(N)-1) beta^2]

    Tiny negative lambda_minus from rounding (>= -1e-12) is clamped to 0.
    """
    alpha, beta, gamma = reduced_dm_elements(n, theta)
    root_n = 2.0 ** (n / 2)
    gap = math.sqrt((alpha - (root_n - 1.0) * gamma) ** 2 + 4.0 * (root_n - 1.0) * beta**2)
    lam_plus = 0.5 + 0.5 * gap
    lam_minus = 0.5 - 0.5 * gap
    if lam_minus < -1e-12:
        raise NumericalError(f"reduced eigenvalue {lam_minus} below clamping tolerance")
    lam_minus = max(lam_minus, 0.0)
    lam_plus = min(lam_plus, 1.0)
    return lam_plus, lam_minus


def two_level_entropy(n: int, theta: float) -> float:
    """Equal-cut von Neumann entropy, in bits, of the two-level state at angle theta.

    Bounded by 1 bit for every n and theta; the bound is saturated only in
    the limit of infinitely many qubits at theta = pi/4.
    """
    lam_plus, lam_minus = reduced_eigenvalues(n, theta)
    ent = 0.0
    for lam in (lam_plus, lam_minus):
        if lam > 0.0:
            ent -= lam * math.log2(lam)
    return ent
