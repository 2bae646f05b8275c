"""Spectral solvers: open-system quadratic eigenproblem and closed-chain modes.

The open system is governed by the matrix polynomial

    Q(s) = s^2 C_red + s (Z0/Z_W) delta_b + L_red_inv        (s dimensionless)

whose finite eigenvalues are the complex poles of the propagator
G(s) = Q(s)^{-1}.  Q is linearized in first companion form and solved as a
real generalized pencil; each pole then gets its right/left null vectors from
the smallest singular triplet of Q(s_p), a Newton polish of the pole on the
holomorphic scalar u^H Q(s) v, and the rank-one residue

    R_p = v_p u_p^H / (u_p^H Q'(s_p) v_p),   Q'(s) = 2 s C_red + (Z0/Z_W) delta_b.

Residues are stored in factored form; materialize one with
``ModeSet.residue(p)``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from threadpoolctl import threadpool_limits

from .circuit import CircuitParams, ReducedSystem, build_closed_jja
from .errors import DomainError, SolverError

__all__ = [
    "ModeSet",
    "JJAModeSet",
    "solve_quadratic_modes",
    "solve_closed_jja_modes",
    "analytic_dispersion",
    "analytic_mode",
]

# Poles closer than this (in units of Omega0) are merged as one.
POLE_MERGE_TOL = 1e-9
# |u^H Q' v| below this (unit-norm u, v) marks a defective pole.
DEFECTIVE_TOL = 1e-12


@dataclass
class ModeSet:
    """Poles and factored residues of the open-system propagator.

    ``poles`` are the dimensionless Laplace eigenvalues s_p.  For pole p the
    residue matrix is ``right[:, p] * conj(left[:, p]).T / denom[p]``.
    ``defective`` marks poles excluded from dynamical expansions (vanishing
    residue denominator or merged multiplicity); ``multiplicity`` records how
    many pencil eigenvalues were merged into each entry.
    """

    poles: np.ndarray
    right_vectors: np.ndarray
    left_vectors: np.ndarray
    denominators: np.ndarray
    residual_norms: np.ndarray
    defective: np.ndarray
    multiplicity: np.ndarray
    z_ratio: float
    system: ReducedSystem = field(repr=False)

    @property
    def n_poles(self) -> int:
        return len(self.poles)

    def residue(self, p: int) -> np.ndarray:
        """Materialize the M x M residue matrix of pole p."""
        u = self.left_vectors[:, p]
        v = self.right_vectors[:, p]
        return np.outer(v, u.conj()) / self.denominators[p]

    def residue_row(self, p: int, j: int) -> np.ndarray:
        """Row j of R_p without materializing the full matrix."""
        return self.right_vectors[j, p] * self.left_vectors[:, p].conj() / self.denominators[p]

    def kept(self) -> np.ndarray:
        """Indices of poles that participate in expansions."""
        return np.flatnonzero(~self.defective)

    def quadratic_matrix(self, s: complex) -> np.ndarray:
        return _qmat(s, self.system, self.z_ratio)

    def quadratic_matrix_derivative(self, s: complex) -> np.ndarray:
        sys = self.system
        Qp = (2.0 * s) * sys.C_red.astype(complex)
        Qp[sys.boundary_index, sys.boundary_index] += self.z_ratio
        return Qp


def _qmat(s: complex, sys: ReducedSystem, z_ratio: float) -> np.ndarray:
    Q = (s * s) * sys.C_red + sys.L_red_inv.astype(complex)
    Q[sys.boundary_index, sys.boundary_index] += s * z_ratio
    return Q


def _companion_pencil(sys: ReducedSystem, z_ratio: float):
    M = sys.M
    A = np.zeros((2 * M, 2 * M))
    B = np.zeros((2 * M, 2 * M))
    A[:M, M:] = np.eye(M)
    A[M:, :M] = -sys.L_red_inv
    A[M + sys.boundary_index, M + sys.boundary_index] = -z_ratio
    B[:M, :M] = np.eye(M)
    B[M:, M:] = sys.C_red
    return A, B


def _merge_close(poles: np.ndarray, vectors: np.ndarray):
    """Cluster pencil eigenvalues closer than POLE_MERGE_TOL.

    Returns representative poles, one representative right vector per
    cluster, and the cluster sizes.
    """
    order = np.lexsort((poles.imag, poles.real))
    poles = poles[order]
    vectors = vectors[:, order]
    reps, vecs, counts = [], [], []
    i = 0
    while i < len(poles):
        j = i + 1
        while j < len(poles) and abs(poles[j] - poles[i]) < POLE_MERGE_TOL:
            j += 1
        cluster = poles[i:j]
        reps.append(cluster.mean())
        vecs.append(vectors[:, i])
        counts.append(j - i)
        i = j
    return np.array(reps), np.column_stack(vecs), np.array(counts, dtype=int)


def _singular_triplet(Q: np.ndarray):
    """Smallest singular triplet (u, sigma, v) of Q."""
    U, S, Vh = sla.svd(Q)
    return U[:, -1], S[-1], Vh[-1, :].conj()


def solve_quadratic_modes(
    sys: ReducedSystem,
    z_ratio: float | None = None,
    refine: str = "auto",
    newton_steps: int = 4,
) -> ModeSet:
    """All finite eigenvalues of Q(s) with null vectors and residue factors.

    Parameters
    ----------
    sys : ReducedSystem
    z_ratio : float, optional
        Boundary damping strength Z0/Z_W; defaults to the system's own value.
        Pass 0.0 for the lossless limit.
    refine : {"auto", "svd", "conj"}
        "svd" extracts left/right null vectors from the smallest singular
        triplet of Q(s_p) and Newton-polishes each pole (the default for
        M <= 512).  "conj" exploits that Q is complex symmetric, taking
        u = conj(v) with v from the pencil eigenvector; much faster for
        large arrays and equivalent up to an irrelevant phase.
    """
    if z_ratio is None:
        z_ratio = sys.Z0 / sys.params.Z_W
    if refine == "auto":
        refine = "svd" if sys.M <= 512 else "conj"
    if refine not in ("svd", "conj"):
        raise DomainError(f"unknown refine mode {refine!r}")

    A, B = _companion_pencil(sys, z_ratio)
    try:
        eigvals, eigvecs = sla.eig(A, B, right=True)
    except Exception as exc:  # LinAlgError or LAPACK failure
        cond = np.linalg.cond(B)
        raise SolverError(
            f"generalized eigensolver failed on the companion pencil "
            f"(dim {2 * sys.M}, cond(B) ~ {cond:.3e}): {exc}"
        ) from exc
    finite = np.isfinite(eigvals)
    if not finite.all():
        cond = np.linalg.cond(B)
        raise SolverError(
            f"companion pencil produced {np.count_nonzero(~finite)} non-finite "
            f"eigenvalues; cond(B) ~ {cond:.3e}"
        )

    poles, vecs, counts = _merge_close(eigvals, eigvecs[: sys.M, :])

    P = len(poles)
    M = sys.M
    right = np.zeros((M, P), dtype=complex)
    left = np.zeros((M, P), dtype=complex)
    denom = np.zeros(P, dtype=complex)
    resid = np.zeros(P)
    defective = counts > 1

    # many small SVDs thrash a multithreaded BLAS pool; pin it to one thread
    with threadpool_limits(limits=1):
        _refine_all(
            sys, z_ratio, refine, newton_steps, poles, vecs, right, left, denom,
            resid, defective,
        )

    return ModeSet(
        poles=poles,
        right_vectors=right,
        left_vectors=left,
        denominators=denom,
        residual_norms=resid,
        defective=defective,
        multiplicity=counts,
        z_ratio=z_ratio,
        system=sys,
    )


def _refine_all(sys, z_ratio, refine, newton_steps, poles, vecs, right, left,
                denom, resid, defective):
    P = len(poles)
    for p in range(P):
        s = poles[p]
        v = vecs[:, p]
        v = v / np.linalg.norm(v)
        if refine == "svd":
            fresh = False  # whether (u, v) belong to the current s
            for _ in range(newton_steps):
                u, sigma, v = _singular_triplet(_qmat(s, sys, z_ratio))
                fresh = True
                Qp_v = 2.0 * s * (sys.C_red @ v)
                Qp_v[sys.boundary_index] += z_ratio * v[sys.boundary_index]
                d = u.conj() @ Qp_v
                if abs(d) < DEFECTIVE_TOL or sigma < 1e-15:
                    break
                step = sigma / d
                if abs(step) > 1e-3 * max(1.0, abs(s)):
                    break  # refusing a jump that would leave the pole's basin
                if abs(step) < 1e-13 * max(1.0, abs(s)):
                    break  # already converged; the triplet is current
                s = s - step
                fresh = False
            if not fresh:
                u, sigma, v = _singular_triplet(_qmat(s, sys, z_ratio))
        else:
            u = v.conj()
        Qs = _qmat(s, sys, z_ratio)
        Qp_v = 2.0 * s * (sys.C_red @ v)
        Qp_v[sys.boundary_index] += z_ratio * v[sys.boundary_index]
        d = u.conj() @ Qp_v
        poles[p] = s
        right[:, p] = v
        left[:, p] = u
        denom[p] = d
        resid[p] = np.linalg.norm(Qs @ v) / np.linalg.norm(v)
        if abs(d) < DEFECTIVE_TOL:
            defective[p] = True


@dataclass
class JJAModeSet:
    """Closed-chain eigenfrequencies [rad/s] (ascending) and real modes.

    ``modes[:, k]`` is the k-th eigenvector over chain nodes 1..N, normalized
    to Phi^T C_chain Phi = (C_g + 2C) in SI units and sign-fixed so the
    atom-end amplitude Phi_k(1) is >= 0.
    """

    frequencies: np.ndarray
    modes: np.ndarray
    params: CircuitParams = field(repr=False)

    @property
    def atom_end_amplitudes(self) -> np.ndarray:
        return self.modes[0, :]


def solve_closed_jja_modes(
    C_JJA: np.ndarray, L_JJA_inv: np.ndarray, params: CircuitParams
) -> JJAModeSet:
    """Generalized symmetric-definite eigensolve of the closed chain.

    ``C_JJA`` and ``L_JJA_inv`` are the dimensionless matrices from
    ``build_closed_jja``.
    """
    try:
        w, V = sla.eigh(L_JJA_inv, C_JJA)
    except Exception as exc:
        raise SolverError(f"closed-chain factorization failed: {exc}") from exc
    w = np.clip(w, 0.0, None)  # chi = 0 zero mode may round to -1e-18
    freqs = params.Omega0 * np.sqrt(w)

    # eigh normalizes V^T C V = I; rescale to Phi^T (C * C_JJA) Phi = C_g + 2C
    target = (params.C_g + 2.0 * params.C) / params.C
    V = V * np.sqrt(target)
    sign = np.where(V[0, :] >= 0.0, 1.0, -1.0)
    first_zero = np.abs(V[0, :]) < 1e-14 * np.abs(V).max(axis=0)
    if first_zero.any():
        idx = np.argmax(np.abs(V) > 1e-14, axis=0)
        sign = np.where(
            first_zero, np.where(V[idx, np.arange(V.shape[1])] >= 0, 1.0, -1.0), sign
        )
    V = V * sign
    return JJAModeSet(frequencies=freqs, modes=V, params=params)


def _theta(k: float, bc: str, N: int) -> float:
    if bc == "NN":
        return k * np.pi / N
    if bc == "DN":
        return (k + 0.5) * np.pi / N
    raise DomainError(f"bc must be 'NN' or 'DN', got {bc!r}")


def analytic_dispersion(k: float, bc: str, params: CircuitParams) -> float:
    """Large-N standing-wave dispersion for the closed chain.

    NN uses integer mode numbers (both ends free); DN carries the
    half-integer offset of a pinned atomic end.  Returns rad/s.
    """
    if not 0 <= k <= params.N:
        raise DomainError(f"mode number k={k} outside [0, {params.N}]")
    th = _theta(k, bc, params.N)
    ratio = params.C_g / (2.0 * params.C)
    x = 1.0 - np.cos(th)
    return params.Omega0 * np.sqrt(x / (ratio + x))


def analytic_mode(k: float, n, bc: str, params: CircuitParams):
    """Standing-wave amplitude at chain node(s) n (1-based, atom end = 1).

    The printed closed forms pair the half-integer (DN) branch with a profile
    that is small at the atomic end and the integer (NN) branch with one that
    is extremal there; a ghost-node analysis of the discrete chain fixes the
    shapes to sin(theta n) for DN and cos(theta (n - 1/2)) for NN, which is
    what the numerical eigenvectors reproduce.
    """
    if not 0 <= k <= params.N:
        raise DomainError(f"mode number k={k} outside [0, {params.N}]")
    n = np.asarray(n)
    if np.any(n < 1) or np.any(n > params.N):
        raise DomainError(f"node index outside [1, {params.N}]")
    th = _theta(k, bc, params.N)
    C, C_g, N = params.C, params.C_g, params.N
    amp = np.sqrt((C_g + 2.0 * C) / (N * (C * (1.0 - np.cos(th)) + C_g / 2.0)))
    if bc == "DN":
        return amp * np.sin(th * n)
    return amp * np.cos(th * (n - 0.5))


def closed_jja_of(params: CircuitParams) -> JJAModeSet:
    """Convenience: build and solve the closed chain in one call."""
    C_JJA, L_JJA_inv = build_closed_jja(params)
    return solve_closed_jja_modes(C_JJA, L_JJA_inv, params)


def pencil_candidates(sys: ReducedSystem, z_ratio: float | None = None):
    """Deduplicated poles and unit right vectors, no per-pole refinement.

    Cheap path for adiabatic tracking, where only eigenvalue/eigenvector
    pairs are needed at every ramp step.
    """
    if z_ratio is None:
        z_ratio = sys.Z0 / sys.params.Z_W
    A, B = _companion_pencil(sys, z_ratio)
    try:
        eigvals, eigvecs = sla.eig(A, B, right=True)
    except Exception as exc:
        raise SolverError(f"generalized eigensolver failed: {exc}") from exc
    poles, vecs, _ = _merge_close(eigvals, eigvecs[: sys.M, :])
    vecs = vecs / np.linalg.norm(vecs, axis=0, keepdims=True)
    return poles, vecs


def refine_pole(sys: ReducedSystem, s: complex, z_ratio: float | None = None,
                newton_steps: int = 6):
    """SVD/Newton refinement of a single pole.

    Returns (s, v, u, denom, residual_norm) with unit null vectors.
    """
    if z_ratio is None:
        z_ratio = sys.Z0 / sys.params.Z_W
    u = v = None
    fresh = False
    with threadpool_limits(limits=1):
        for _ in range(newton_steps):
            u, sigma, v = _singular_triplet(_qmat(s, sys, z_ratio))
            fresh = True
            Qp_v = 2.0 * s * (sys.C_red @ v)
            Qp_v[sys.boundary_index] += z_ratio * v[sys.boundary_index]
            d = u.conj() @ Qp_v
            if abs(d) < DEFECTIVE_TOL or sigma < 1e-15:
                break
            step = sigma / d
            if abs(step) > 1e-3 * max(1.0, abs(s)):
                break
            if abs(step) < 1e-13 * max(1.0, abs(s)):
                break
            s = s - step
            fresh = False
        if not fresh:
            u, sigma, v = _singular_triplet(_qmat(s, sys, z_ratio))
    Qp_v = 2.0 * s * (sys.C_red @ v)
    Qp_v[sys.boundary_index] += z_ratio * v[sys.boundary_index]
    d = u.conj() @ Qp_v
    resid = np.linalg.norm(_qmat(s, sys, z_ratio) @ v)
    return s, v, u, d, resid
