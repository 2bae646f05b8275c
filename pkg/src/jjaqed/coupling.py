"""Exact closed-system Hamiltonian data: renormalizations and couplings.

With the waveguide detached, the atom+chain system in the basis
(atom flux; chain eigenmodes) takes the quadratic form

    H = q_A^2/(2 C_A'') + Phi_A^2/(2 L_A')
        + sum_k [ q_k^2/(2 Ct) + omega_k^2 Ct Phi_k^2 / 2 ]
        + (C0/(C_A'' Ct)) sum_k phi_k q_A q_k
        - (1/L0) sum_k phi_k Phi_A Phi_k
        + (C0^2/(2 C_A'' Ct^2)) (sum_k phi_k q_k)^2

with Ct = C_g + 2C and phi_k = Phi_k(1) the mode amplitude at the atom end.
Expressed through bosonic operators at impedances Z_A = sqrt(L_A'/C_A'') and
Z_k = 1/(Ct omega_k), this yields the flux/charge couplings g_{k,phi}, g_{k,q}
and the atom-mediated mode-mode coupling xi below.  No mode truncation is
applied when building the set; truncation is exposed only through
``diagonalize_truncated``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .circuit import CircuitParams
from .errors import DomainError, InstabilityError, RenormalizationError
from .spectral import JJAModeSet

__all__ = [
    "CouplingSet",
    "build_coupling_set",
    "classify_regimes",
    "free_spectral_range",
    "diagonalize_truncated",
]

ULTRASTRONG_RATIO = 0.1  # the "g comparable to omega" threshold for region A


def flux_coupling(chi, L, Z_A, Z_k, phi1):
    """g_{k,phi} = -(chi sqrt(Z_A Z_k) / 2L) * Phi_k(1); linear in chi."""
    return -(chi * np.sqrt(Z_A * Z_k) / (2.0 * L)) * phi1


def charge_coupling(chi, C, C_g, C_A_dprime, Z_A, Z_k, phi1):
    """g_{k,q} = -(chi C / (2 (C_g+2C) C_A'' sqrt(Z_A Z_k))) * Phi_k(1)."""
    ct = C_g + 2.0 * C
    return -(chi * C / (2.0 * ct * C_A_dprime * np.sqrt(Z_A * Z_k))) * phi1


@dataclass
class CouplingSet:
    """Renormalized frequencies, impedances and coupling tables.

    All frequencies in rad/s, impedances in ohm, couplings in rad/s.  Arrays
    are indexed by ascending chain-mode number k.  ``xi`` is the symmetric
    K x K atom-mediated mode-mode coupling with zero diagonal (the self terms
    are absorbed into ``omega_k_prime``).
    """

    omega_A_prime: float
    C_A_dprime: float
    omega_A_dprime: float
    omega_k: np.ndarray
    omega_k_prime: np.ndarray
    Z_A: float
    Z_k: np.ndarray
    g_k_phi: np.ndarray
    g_k_q: np.ndarray
    xi: np.ndarray
    regimes: np.ndarray
    params: CircuitParams = field(repr=False)
    mode_weight: float = 0.0  # sum_k Phi_k(1)^2

    @property
    def K(self) -> int:
        return len(self.omega_k)


def build_coupling_set(params: CircuitParams, jja_modes: JJAModeSet) -> CouplingSet:
    """Coupling data from the closed-chain modes at the matching chi.

    The mode shapes must come from matrices built with the same chi: the
    coupler elements sit on the first chain diagonal, so Phi_k(1) depends on
    the coupling strength.
    """
    c, L = params.C, params.L
    ct = params.C_g + 2.0 * c
    chi = params.chi
    C0 = params.C0

    C_A_prime = params.C_A + C0
    L_A_prime = 1.0 / (1.0 / params.L_A + chi / L)
    omega_A_prime = 1.0 / np.sqrt(L_A_prime * C_A_prime)

    phi1 = jja_modes.atom_end_amplitudes
    weight = float(np.sum(phi1**2))
    C_A_dprime = C_A_prime - C0**2 / ct * weight
    if C_A_dprime <= 0:
        raise RenormalizationError(
            f"renormalized atomic capacitance non-positive "
            f"(C_A''={C_A_dprime:.4e} F, sum_k Phi_k(1)^2 = {weight:.6e})",
            mode_weight=weight,
        )
    omega_A_dprime = 1.0 / np.sqrt(L_A_prime * C_A_dprime)
    Z_A = np.sqrt(L_A_prime / C_A_dprime)

    omega_k = jja_modes.frequencies.copy()
    with np.errstate(divide="ignore"):
        Z_k = np.where(omega_k > 0, 1.0 / (ct * np.where(omega_k > 0, omega_k, 1.0)), np.inf)
    renorm = np.sqrt(1.0 + C0**2 * phi1**2 / (C_A_dprime * ct))
    omega_k_prime = omega_k / renorm

    if chi == 0.0:
        K = len(omega_k)
        g_phi = np.zeros(K)
        g_q = np.zeros(K)
        xi = np.zeros((K, K))
    else:
        g_phi = flux_coupling(chi, L, Z_A, Z_k, phi1)
        g_q = charge_coupling(chi, c, params.C_g, C_A_dprime, Z_A, Z_k, phi1)
        inv_sqrt_z = 1.0 / np.sqrt(Z_k)
        xi = (C0**2 / (4.0 * ct**2 * C_A_dprime)) * np.outer(
            phi1 * inv_sqrt_z, phi1 * inv_sqrt_z
        )
        np.fill_diagonal(xi, 0.0)

    cs = CouplingSet(
        omega_A_prime=float(omega_A_prime),
        C_A_dprime=float(C_A_dprime),
        omega_A_dprime=float(omega_A_dprime),
        omega_k=omega_k,
        omega_k_prime=omega_k_prime,
        Z_A=float(Z_A),
        Z_k=Z_k,
        g_k_phi=g_phi,
        g_k_q=g_q,
        xi=xi,
        regimes=np.array([]),
        params=params,
        mode_weight=weight,
    )
    cs.regimes = classify_regimes(cs, free_spectral_range(cs))
    return cs


def free_spectral_range(cs: CouplingSet) -> np.ndarray:
    """Forward difference of the renormalized mode frequencies, last repeated."""
    fsr = np.empty_like(cs.omega_k_prime)
    if cs.K > 1:
        fsr[:-1] = np.diff(cs.omega_k_prime)
        fsr[-1] = fsr[-2]
    else:
        fsr[:] = cs.omega_k_prime
    return np.abs(fsr)


def classify_regimes(cs: CouplingSet, fsr: np.ndarray) -> np.ndarray:
    """Per-mode coupling-regime labels.

    A: g_k / min(omega'_k, omega_A'') >= 0.1 (ultrastrong/deep strong);
    B: g_k at least the local free spectral range but well below the mode
    frequencies (superstrong/multimode strong); C: otherwise.
    """
    g = np.maximum(np.abs(cs.g_k_phi), np.abs(cs.g_k_q))
    w = np.minimum(cs.omega_k_prime, cs.omega_A_dprime)
    labels = np.full(cs.K, "C", dtype="<U1")
    is_b = (g >= fsr) & (g < ULTRASTRONG_RATIO * w)
    labels[is_b] = "B"
    with np.errstate(divide="ignore", invalid="ignore"):
        is_a = np.where(w > 0, g / np.where(w > 0, w, 1.0) >= ULTRASTRONG_RATIO, g > 0)
    labels[is_a] = "A"
    return labels


def diagonalize_truncated(cs: CouplingSet, k_max: int):
    """Normal-mode frequencies of the Hamiltonian truncated to k_max modes.

    Builds the classical quadratic form H = (1/2) p^T T p + (1/2) x^T V x in
    the quadratures of (atom, modes 1..k_max), where

        V = diag(omega_A'', omega_k),        V[atom, k] = 2 g_{k,phi}
        T = diag(omega_A'', omega_k^3/omega'_k^2),  T[atom, k] = -2 g_{k,q},
        T[k, k'] = 4 xi_{kk'}

    (the kinetic chain diagonal carries the self-term that defines
    omega'_k), and diagonalizes x'' = -T V x through a symmetric square
    root of T.  Returns (atom_branch_frequency, all_frequencies) in rad/s,
    the atom branch being the normal mode with the largest flux-quadrature
    amplitude at the atom.
    """
    if not 1 <= k_max <= cs.K:
        raise DomainError(f"k_max={k_max} outside [1, {cs.K}]")
    sel = slice(0, k_max)
    n = k_max + 1
    V = np.zeros((n, n))
    T = np.zeros((n, n))
    V[0, 0] = T[0, 0] = cs.omega_A_dprime
    V[1:, 1:] = np.diag(cs.omega_k[sel])
    with np.errstate(divide="ignore", invalid="ignore"):
        t_diag = np.where(
            cs.omega_k[sel] > 0,
            cs.omega_k[sel] ** 3 / np.where(cs.omega_k_prime[sel] > 0,
                                            cs.omega_k_prime[sel], 1.0) ** 2,
            0.0,
        )
    T[1:, 1:] = 4.0 * cs.xi[sel, sel]
    T[np.arange(1, n), np.arange(1, n)] = t_diag
    V[0, 1:] = V[1:, 0] = 2.0 * cs.g_k_phi[sel]
    T[0, 1:] = T[1:, 0] = -2.0 * cs.g_k_q[sel]

    scale = max(abs(T).max(), 1.0)
    tw, tv = sla.eigh(T)
    if tw.min() < -1e-12 * scale:
        raise InstabilityError(
            f"kinetic quadratic form not positive semidefinite "
            f"(min eigenvalue {tw.min():.3e} rad/s)"
        )
    root = tv @ (np.sqrt(np.clip(tw, 0.0, None))[:, None] * tv.T)
    w2, y = sla.eigh(root @ V @ root)
    if w2.min() < -1e-9 * max(w2.max(), 1.0):
        raise InstabilityError(
            f"potential quadratic form not positive semidefinite under the "
            f"truncated couplings (min omega^2 {w2.min():.3e})"
        )
    freqs = np.sqrt(np.clip(w2, 0.0, None))
    x = root @ y  # back to flux quadratures
    norms = np.linalg.norm(x, axis=0)
    norms[norms == 0] = 1.0
    atom_amp = np.abs(x[0, :]) / norms
    atom_branch = float(freqs[int(np.argmax(atom_amp))])
    return atom_branch, freqs
