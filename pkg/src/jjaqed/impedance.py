"""Perturbative baselines: ladder-network impedance and second-order shifts.

The environment seen by the atom is the chain + waveguide reduced to a single
complex impedance by the standard ladder recursion: starting from the
external load Z_ext = Z_W + 1/(i w C_c), each chain cell adds a series LC
element and a shunt to ground,

    Z_eff^(n) = Z_LC + (1/Z_g + 1/Z_eff^(n-1))^{-1},

and the final step uses the coupler impedance Z_LC / chi.  The decay rate of
the atom against this environment is Gamma_eff = Re[1/Z_eff(omega_A)]/(2 pi C_A),
implemented exactly in that form (no amplitude/power convention factor is
inserted; comparisons against |Im omega_A| follow the same convention).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .circuit import CircuitParams
from .coupling import CouplingSet
from .errors import AtomDecoupledError, DomainError, ImpedanceSingularityError, ResonanceError

__all__ = [
    "ImpedanceProfile",
    "z_eff",
    "z_infinity",
    "purcell_pt",
    "lamb_shift_pt2",
    "impedance_profile",
]

SINGULARITY_TOL = 1e-9  # relative distance to Omega0 treated as on-resonance


@dataclass
class ImpedanceProfile:
    """Effective and infinite-array impedances over a frequency grid [rad/s]."""

    omega: np.ndarray
    Z_eff: np.ndarray
    Z_inf: np.ndarray


def _z_lc(params: CircuitParams, omega: float) -> complex:
    """Impedance of one series cell, i w L / (1 - w^2/Omega0^2)."""
    det = 1.0 - (omega / params.Omega0) ** 2
    return 1j * omega * params.L / det


def _check_omega(params: CircuitParams, omega: float):
    if omega <= 0:
        raise DomainError(f"omega must be positive, got {omega!r}")
    if abs(omega - params.Omega0) < SINGULARITY_TOL * params.Omega0:
        raise ImpedanceSingularityError(
            f"omega = {omega!r} rad/s is within {SINGULARITY_TOL:g}*Omega0 of the "
            f"cell resonance {params.Omega0!r} rad/s"
        )


def ladder_impedance(params: CircuitParams, omega: float, n_cells: int) -> complex:
    """Impedance after n_cells chain cells, seeded by the external load.

    n_cells = 0 returns the seed Z_ext = Z_W + 1/(i omega C_c) exactly.
    """
    _check_omega(params, omega)
    z = params.Z_W + 1.0 / (1j * omega * params.C_c)
    z_lc = _z_lc(params, omega)
    z_g = 1.0 / (1j * omega * params.C_g)
    for _ in range(n_cells):
        z = z_lc + 1.0 / (1.0 / z_g + 1.0 / z)
    return z


def z_eff(params: CircuitParams, omega: float) -> complex:
    """Effective environment impedance at the atom.

    The chain of N nodes carries N-1 internal cells; the recursion therefore
    runs the seed plus N-1 cell steps plus the final coupler step, the
    coupler contributing Z_LC/chi in series (its elements L/chi and chi*C
    share the cell resonance) above the shunted input of the first chain
    node.  This reproduces exact nodal analysis of the linear network to
    machine precision.  chi = 0 means an open circuit at the atom.
    """
    if params.chi == 0:
        raise AtomDecoupledError("chi = 0: the atom sees an open circuit")
    z = ladder_impedance(params, omega, params.N - 1)
    z_g = 1.0 / (1j * omega * params.C_g)
    return _z_lc(params, omega) / params.chi + 1.0 / (1.0 / z_g + 1.0 / z)


def z_infinity(params: CircuitParams, omega: float) -> complex:
    """Impedance of the infinite chain, sqrt(Z_LC * Z_g).

    Principal branch with Re >= 0; above the cell resonance the product is
    negative real and the root is taken toward +i, matching the inductive
    high-frequency form.
    """
    _check_omega(params, omega)
    prod = complex(_z_lc(params, omega) / (1j * omega * params.C_g))
    z = np.sqrt(prod)
    if z.real < 0 or (z.real == 0 and z.imag < 0):
        z = -z
    if abs(z.real) < 1e-14 * abs(z):
        z = 1j * abs(z.imag) if omega > params.Omega0 else z
    return complex(z)


def purcell_pt(params: CircuitParams, use_infinite: bool = False) -> float:
    """Perturbative decay rate (1/(2 pi C_A)) Re[1/Z(omega_A)], rad/s.

    ``use_infinite`` selects the infinite-array impedance instead of the
    full ladder recursion.
    """
    z = z_infinity(params, params.omega_A) if use_infinite else z_eff(params, params.omega_A)
    return float((1.0 / (2.0 * np.pi * params.C_A)) * (1.0 / z).real)


def lamb_shift_pt2(cs: CouplingSet) -> float:
    """Second-order perturbative shift of the atomic frequency [rad/s].

    Sum over modes of (g_phi - g_q)^2/(omega_A'' - omega'_k)
    - (g_phi + g_q)^2/(omega_A'' + omega'_k).  The unperturbed frequencies
    are the renormalized ones; only the g couplings act as the perturbation.
    """
    wa = cs.omega_A_dprime
    det = wa - cs.omega_k_prime
    near = np.abs(det) < 1e-6 * cs.params.Omega0
    if near.any():
        k = int(np.argmax(near))
        raise ResonanceError(
            f"omega_A'' within 1e-6*Omega0 of mode k={k} "
            f"(omega'_k = {cs.omega_k_prime[k]!r} rad/s)",
            k=k,
        )
    shift = np.sum(
        (cs.g_k_phi - cs.g_k_q) ** 2 / det
        - (cs.g_k_phi + cs.g_k_q) ** 2 / (wa + cs.omega_k_prime)
    )
    return float(shift)


def impedance_profile(params: CircuitParams, omega_grid) -> ImpedanceProfile:
    """Z_eff and Z_inf over a grid, for admittance-comparison tables."""
    omega_grid = np.asarray(omega_grid, dtype=float)
    ze = np.array([z_eff(params, w) for w in omega_grid])
    zi = np.array([z_infinity(params, w) for w in omega_grid])
    return ImpedanceProfile(omega=omega_grid, Z_eff=ze, Z_inf=zi)
