"""Matrix-product state/operator core: canonical forms, SVD truncation, entropies.

Site tensors are rank-3 arrays (left bond, physical, right bond) for states
and rank-4 arrays (left bond, physical out, physical in, right bond) for
operators; boundary bonds have dimension 1.  The code is agnostic to the
physical dimension, so the density-operator engine reuses the same sweeps
with local dimension 4.

Canonical form is maintained lazily: operations record where the isometry
center sits (or that it is unknown) and re-canonicalize only when an entropy
or expectation query requires it.  All methods replace site tensors rather
than writing into them, so a shallow copy of the tensor list is an
independent state.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.linalg import get_lapack_funcs

from .errors import ImpossibleOutcomeError, ResourceError, ValidationError

DENSE_CONVERSION_MAX_SITES = 20

_PLUS = np.array([0.5**0.5, 0.5**0.5])

# Sweeps run thousands of decompositions on small matrices, where the
# wrapper overhead of np.linalg dominates the LAPACK call itself; the raw
# routines are fetched once per dtype.
_LAPACK_CACHE: dict = {}


def _lapack(kind: str, matrix: np.ndarray):
    key = (kind, matrix.dtype.char)
    funcs = _LAPACK_CACHE.get(key)
    if funcs is None:
        names = ("geqrf", "orgqr") if kind == "qr" else ("gesdd",)
        funcs = get_lapack_funcs(names, (matrix,))
        _LAPACK_CACHE[key] = funcs
    return funcs


def _thin_qr(matrix: np.ndarray):
    """Reduced QR via geqrf/orgqr (or ungqr); returns (q, r)."""
    geqrf, orgqr = _lapack("qr", matrix)
    k = min(matrix.shape)
    raw, tau, _, info = geqrf(matrix)
    if info != 0:
        return np.linalg.qr(matrix)
    r = np.triu(raw[:k, :])
    q, _, info = orgqr(raw[:, :k], tau)
    if info != 0:
        return np.linalg.qr(matrix)
    return q, r


def _svd(matrix: np.ndarray):
    """SVD with a divide-and-conquer to QR-based LAPACK fallback."""
    (gesdd,) = _lapack("svd", matrix)
    u, s, vh, info = gesdd(matrix, compute_uv=1, full_matrices=0)
    if info != 0:
        return scipy.linalg.svd(matrix, full_matrices=False, lapack_driver="gesvd")
    return u, s, vh


@dataclass(frozen=True)
class TruncationPolicy:
    """Bond-dimension cap and relative singular-value cutoff for compressions."""

    chi_max: int
    sv_cutoff: float = 1e-12
    renormalize: bool = True

    def __post_init__(self):
        if self.chi_max < 1:
            raise ValidationError(f"chi_max must be >= 1, got {self.chi_max}")
        if self.sv_cutoff < 0.0:
            raise ValidationError(f"sv_cutoff must be >= 0, got {self.sv_cutoff}")

    def keep_count(self, sigmas: np.ndarray) -> int:
        if sigmas.size == 0 or sigmas[0] <= 0.0:
            return 1
        above = int(np.searchsorted(-sigmas, -self.sv_cutoff * sigmas[0], side="right"))
        return max(1, min(self.chi_max, above))


EXACT_POLICY = TruncationPolicy(chi_max=2**30, sv_cutoff=0.0, renormalize=False)


class _MatrixProduct:
    """Shared sweep machinery for matrix-product states and density operators."""

    def __init__(self, tensors: list[np.ndarray], center: int | None = None):
        self.tensors = tensors
        self.center = center
        self.discarded_weight = 0.0

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    @property
    def phys_dim(self) -> int:
        return self.tensors[0].shape[1]

    def bond_dimensions(self) -> list[int]:
        """Bond dimensions between consecutive sites (length n_sites - 1)."""
        return [t.shape[2] for t in self.tensors[:-1]]

    # -- canonical-form bookkeeping ------------------------------------

    def _shift_right(self, i: int) -> None:
        dl, d, dr = self.tensors[i].shape
        q, r = _thin_qr(self.tensors[i].reshape(dl * d, dr))
        self.tensors[i] = q.reshape(dl, d, -1)
        nxt = self.tensors[i + 1]
        self.tensors[i + 1] = (r @ nxt.reshape(dr, -1)).reshape(-1, nxt.shape[1], nxt.shape[2])

    def _shift_left(self, i: int) -> None:
        dl, d, dr = self.tensors[i].shape
        q, r = _thin_qr(self.tensors[i].reshape(dl, d * dr).conj().T)
        self.tensors[i] = q.conj().T.reshape(-1, d, dr)
        prev = self.tensors[i - 1]
        carry = r.conj().T
        self.tensors[i - 1] = (prev.reshape(-1, dl) @ carry).reshape(prev.shape[0], prev.shape[1], -1)

    def ensure_center(self, site: int) -> None:
        """Bring the isometry center to `site`, re-canonicalizing if unknown."""
        if not 0 <= site < self.n_sites:
            raise ValidationError(f"site {site} out of range for {self.n_sites} sites")
        if self.center is None:
            for i in range(site):
                self._shift_right(i)
            for i in range(self.n_sites - 1, site, -1):
                self._shift_left(i)
        elif self.center < site:
            for i in range(self.center, site):
                self._shift_right(i)
        else:
            for i in range(self.center, site, -1):
                self._shift_left(i)
        self.center = site

    # -- contraction and compression -----------------------------------

    def _contract_mpo(self, mpo: "MpoOperator") -> None:
        if mpo.n_sites != self.n_sites:
            raise ValidationError("operator and state site counts differ")
        new_tensors = []
        for a, w in zip(self.tensors, mpo.tensors):
            dl, din, dr = a.shape
            wl, dout, _, wr = w.shape
            wm = w.transpose(0, 1, 3, 2).reshape(wl * dout * wr, din)
            am = a.transpose(1, 0, 2).reshape(din, dl * dr)
            t = (wm @ am).reshape(wl, dout, wr, dl, dr)
            t = t.transpose(3, 0, 1, 4, 2).reshape(dl * wl, dout, dr * wr)
            new_tensors.append(t)
        self.tensors = new_tensors
        self.center = None

    def _compress(self, policy: TruncationPolicy) -> float:
        """Two-sweep compression; leaves the center at site 0 and returns the norm.

        Left-to-right QR establishes left isometries (no truncation), then a
        right-to-left SVD sweep truncates every bond optimally against the
        policy.  Discarded weight (relative discarded sigma^2, summed over
        bonds) accumulates on the state.
        """
        for i in range(self.n_sites - 1):
            self._shift_right(i)
        discarded = 0.0
        for i in range(self.n_sites - 1, 0, -1):
            dl, d, dr = self.tensors[i].shape
            u, s, vh = _svd(self.tensors[i].reshape(dl, d * dr))
            keep = policy.keep_count(s)
            total = float(s @ s)
            if keep < s.size and total > 0.0:
                tail = s[keep:]
                discarded += float(tail @ tail) / total
            self.tensors[i] = vh[:keep].reshape(keep, d, dr)
            prev = self.tensors[i - 1]
            carry = u[:, :keep] * s[:keep]
            self.tensors[i - 1] = (prev.reshape(-1, dl) @ carry).reshape(prev.shape[0], prev.shape[1], keep)
        self.discarded_weight += discarded
        self.center = 0
        return float(np.linalg.norm(self.tensors[0]))

    def schmidt_values(self, cut: int) -> np.ndarray:
        """Descending singular values across the bond after `cut` sites."""
        if not 1 <= cut <= self.n_sites - 1:
            raise ValidationError(f"cut must lie in [1, {self.n_sites - 1}], got {cut}")
        self.ensure_center(cut - 1)
        dl, d, dr = self.tensors[cut - 1].shape
        return np.linalg.svd(self.tensors[cut - 1].reshape(dl * d, dr), compute_uv=False)


def _schmidt_entropy(sigmas: np.ndarray) -> float:
    lams = sigmas**2
    total = lams.sum()
    if total <= 0.0:
        return 0.0
    lams = lams / total
    nonzero = lams[lams > 0.0]
    return float(-np.sum(nonzero * np.log2(nonzero)))


class MpsState(_MatrixProduct):
    """Matrix-product state over qubits (physical dimension 2)."""

    def copy(self) -> "MpsState":
        dup = MpsState(list(self.tensors), self.center)
        dup.discarded_weight = self.discarded_weight
        return dup

    def norm(self) -> float:
        env = np.ones((1, 1))
        for t in self.tensors:
            env = np.tensordot(env, t, axes=(1, 0))
            env = np.tensordot(t.conj(), env, axes=([0, 1], [0, 1]))
        return float(np.sqrt(abs(env[0, 0])))

    def normalize(self) -> "MpsState":
        self.ensure_center(self.center if self.center is not None else 0)
        nrm = float(np.linalg.norm(self.tensors[self.center]))
        if nrm == 0.0:
            raise ImpossibleOutcomeError("cannot normalize a zero state")
        self.tensors[self.center] = self.tensors[self.center] / nrm
        return self

    def apply_mpo(self, mpo: "MpoOperator", policy: TruncationPolicy) -> "MpsState":
        """Exact contraction with `mpo` followed by a two-sweep compression."""
        self._contract_mpo(mpo)
        nrm = self._compress(policy)
        if policy.renormalize and nrm > 0.0:
            self.tensors[0] = self.tensors[0] / nrm
        return self

    def apply_local_op(self, qubit: int, op, renormalize: bool = True) -> float:
        """Contract a 2x2 operator into one site; returns the pre-normalization squared norm.

        With the center moved to the site first, the returned value equals
        <psi|op^dag op|psi>, i.e. the outcome probability when `op` is a
        Kraus operator.  A zero-norm result cannot be renormalized and
        signals an impossible outcome.
        """
        self.ensure_center(qubit)
        op = np.asarray(op)
        old = self.tensors[qubit]
        dl, d, dr = old.shape
        t = (op @ old.transpose(1, 0, 2).reshape(d, dl * dr)).reshape(d, dl, dr).transpose(1, 0, 2)
        sq_norm = float(np.vdot(t, t).real)
        if renormalize:
            if sq_norm < 1e-24:
                raise ImpossibleOutcomeError(f"outcome probability {sq_norm:.3e} is numerically zero")
            t = t / np.sqrt(sq_norm)
        self.tensors[qubit] = t
        return sq_norm

    def local_density_matrix(self, qubit: int) -> np.ndarray:
        """Single-site reduced density matrix via the canonical center."""
        self.ensure_center(qubit)
        t = self.tensors[qubit]
        dl, d, dr = t.shape
        m = t.transpose(1, 0, 2).reshape(d, dl * dr)
        return m @ m.conj().T

    def local_expectation(self, qubit: int, op) -> complex:
        """<psi| op_qubit |psi> at O(chi^2) cost once the center is at the site."""
        rho = self.local_density_matrix(qubit)
        return complex(np.trace(np.asarray(op) @ rho))

    def bipartite_entropy(self, cut: int) -> float:
        """Entropy (bits) of the squared Schmidt values at the bond after `cut` sites."""
        return _schmidt_entropy(self.schmidt_values(cut))

    def success_probability(self, omega: str) -> float:
        """|<omega|psi>|^2 for a basis bitstring, by direct product contraction."""
        if len(omega) != self.n_sites:
            raise ValidationError(f"target bitstring {omega!r} does not have {self.n_sites} bits")
        env = np.ones(1)
        for char, t in zip(omega, self.tensors):
            env = env @ t[:, int(char), :]
        return float(abs(env[0]) ** 2)

    def overlap(self, other: "MpsState") -> complex:
        """<self|other> by zipper contraction."""
        if other.n_sites != self.n_sites:
            raise ValidationError("site counts differ")
        env = np.ones((1, 1))
        for a, b in zip(self.tensors, other.tensors):
            env = np.tensordot(env, b, axes=(1, 0))
            env = np.tensordot(a.conj(), env, axes=([0, 1], [0, 1]))
        return complex(env[0, 0])

    def to_dense(self) -> np.ndarray:
        """Full statevector (guarded against unreasonable site counts)."""
        if self.n_sites > DENSE_CONVERSION_MAX_SITES:
            raise ResourceError(f"refusing dense conversion beyond {DENSE_CONVERSION_MAX_SITES} sites")
        vec = self.tensors[0].reshape(self.tensors[0].shape[1], -1)
        for t in self.tensors[1:]:
            vec = np.tensordot(vec, t, axes=(1, 0))
            vec = vec.reshape(-1, t.shape[2])
        return vec[:, 0]


def mps_from_product(local_vectors) -> MpsState:
    """Bond-dimension-1 state from per-site 2-vectors (each must be normalized)."""
    tensors = []
    for vec in local_vectors:
        arr = np.asarray(vec)
        if arr.shape != (2,):
            raise ValidationError(f"local vectors must have 2 entries, got shape {arr.shape}")
        if abs(np.linalg.norm(arr) - 1.0) > 1e-12:
            raise ValidationError("local vectors must be normalized")
        tensors.append(arr.reshape(1, 2, 1))
    if not tensors:
        raise ValidationError("need at least one site")
    return MpsState(tensors, center=0)


def uniform_mps(n: int) -> MpsState:
    """The all-|+> product state, the circuit's initial state."""
    return mps_from_product([_PLUS] * n)


def mps_from_dense(vector, policy: TruncationPolicy = EXACT_POLICY) -> MpsState:
    """Sequential-SVD decomposition of a dense statevector into an MPS."""
    vec = np.asarray(vector)
    n = int(np.log2(vec.size))
    if 2**n != vec.size:
        raise ValidationError("statevector length must be a power of 2")
    tensors = []
    rank = 1
    rest = vec
    for _ in range(n - 1):
        u, s, vh = _svd(rest.reshape(rank * 2, -1))
        keep = policy.keep_count(s)
        tensors.append(u[:, :keep].reshape(rank, 2, keep))
        rest = (s[:keep, np.newaxis] * vh[:keep])
        rank = keep
    tensors.append(rest.reshape(rank, 2, 1))
    return MpsState(tensors, center=n - 1)


class MpoOperator:
    """Matrix-product operator; site tensors (left, phys out, phys in, right)."""

    def __init__(self, tensors: list[np.ndarray], label: str = ""):
        self.tensors = tensors
        self.label = label

    @property
    def n_sites(self) -> int:
        return len(self.tensors)

    def bond_dimensions(self) -> list[int]:
        return [t.shape[3] for t in self.tensors[:-1]]

    def to_dense(self) -> np.ndarray:
        """Full matrix of the operator (for small-site cross-checks)."""
        if self.n_sites > 10:
            raise ResourceError("refusing dense MPO conversion beyond 10 sites")
        mat = self.tensors[0][0]  # (dout, din, wr)
        rows, cols = mat.shape[0], mat.shape[1]
        for t in self.tensors[1:]:
            mat = np.tensordot(mat, t, axes=(2, 0))  # (rows, cols, dout, din, wr)
            rows *= t.shape[1]
            cols *= t.shape[2]
            mat = mat.transpose(0, 2, 1, 3, 4).reshape(rows, cols, t.shape[3])
        return mat[:, :, 0]


def _two_term_product_mpo(first_ops, second_ops, first_coeff, second_coeff, label) -> MpoOperator:
    """MPO for coeff_a * (A_0 x ... x A_last) + coeff_b * (B_0 x ...), bond dimension 2.

    The scalar coefficients sit on the last site so every other tensor keeps
    the bare 0/1-structured operators.
    """
    n = len(first_ops)
    dtype = np.result_type(*(np.asarray(op).dtype for op in first_ops + second_ops), np.float64)
    if n == 1:
        w = np.zeros((1, 2, 2, 1), dtype=dtype)
        w[0, :, :, 0] = first_coeff * first_ops[0] + second_coeff * second_ops[0]
        return MpoOperator([w], label)
    tensors = []
    head = np.zeros((1, 2, 2, 2), dtype=dtype)
    head[0, :, :, 0] = first_ops[0]
    head[0, :, :, 1] = second_ops[0]
    tensors.append(head)
    for j in range(1, n - 1):
        mid = np.zeros((2, 2, 2, 2), dtype=dtype)
        mid[0, :, :, 0] = first_ops[j]
        mid[1, :, :, 1] = second_ops[j]
        tensors.append(mid)
    tail = np.zeros((2, 2, 2, 1), dtype=dtype)
    tail[0, :, :, 0] = first_coeff * first_ops[-1]
    tail[1, :, :, 0] = second_coeff * second_ops[-1]
    tensors.append(tail)
    return MpoOperator(tensors, label)


def build_oracle_mpo(omega: str) -> MpoOperator:
    """The target reflection 1 - 2 |omega><omega| as a bond-dimension-2 MPO."""
    if not omega or set(omega) - {"0", "1"}:
        raise ValidationError(f"target must be a non-empty string of 0/1, got {omega!r}")
    eye = np.eye(2)
    projectors = []
    for char in omega:
        proj = np.zeros((2, 2))
        proj[int(char), int(char)] = 1.0
        projectors.append(proj)
    return _two_term_product_mpo([eye] * len(omega), projectors, 1.0, -2.0, label=f"oracle[{omega}]")


def build_diffusion_mpo(n: int) -> MpoOperator:
    """The reflection 2 |s><s| - 1 about the uniform state, bond dimension 2."""
    if n < 2:
        raise ValidationError(f"diffusion operator needs n >= 2, got {n}")
    plus_proj = np.full((2, 2), 0.5)
    eye = np.eye(2)
    return _two_term_product_mpo([plus_proj] * n, [eye] * n, 2.0, -1.0, label="diffusion")


def identity_mpo(n: int) -> MpoOperator:
    """Bond-dimension-1 identity operator."""
    return MpoOperator([np.eye(2).reshape(1, 2, 2, 1)] * n, label="identity")
