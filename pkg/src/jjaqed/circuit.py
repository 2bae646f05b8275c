"""Circuit parameters and assembly of the reduced-subspace matrices.

The physical system is an artificial atom (a linearized junction with
capacitance ``C_A`` and inductance ``L_A``) attached through a tunable LC
coupler ``(L0, C0) = (L/chi, chi*C)`` to a chain of ``N`` junction cells
(series links with inductance ``L`` and capacitance ``C``, each node shunted
to ground by ``C_g``).  The last chain node couples through ``C_c`` to a
semi-infinite transmission line of impedance ``Z_W``; the line is replaced by
a resistive boundary plus a noise source at its first node, so the retained
state is atom + N chain nodes + one waveguide node.

Index convention (0-based): atom = 0, chain nodes = 1..N, boundary = N+1.

All matrices produced here are dimensionless: capacitance matrices are in
units of ``C`` and inverse-inductance matrices in units of ``1/L``.  The
scales ``Z0 = sqrt(L/C)`` and ``Omega0 = 1/sqrt(L*C)`` restore SI units.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constants import E_CHARGE
from .errors import DomainError

__all__ = [
    "CircuitParams",
    "ReducedSystem",
    "derive_atom_elements",
    "build_reduced_system",
    "build_closed_jja",
    "build_closed_system",
]


def derive_atom_elements(E_C_A: float, omega_A: float) -> tuple[float, float]:
    """Atomic capacitance and inductance from charging energy and frequency.

    ``C_A = e^2 / (2 E_C_A)`` and ``L_A = 1 / (omega_A^2 C_A)``, with
    ``E_C_A`` in joule and ``omega_A`` in rad/s.
    """
    if E_C_A <= 0 or omega_A <= 0:
        raise DomainError(
            f"charging energy and atomic frequency must be positive, "
            f"got E_C_A={E_C_A!r}, omega_A={omega_A!r}"
        )
    C_A = E_CHARGE**2 / (2.0 * E_C_A)
    L_A = 1.0 / (omega_A**2 * C_A)
    return C_A, L_A


@dataclass(frozen=True)
class CircuitParams:
    """Physical circuit element values (SI units).

    Parameters
    ----------
    N : int
        Number of junction cells in the array, >= 1.
    L, C : float
        Junction inductance [H] and capacitance [F].
    C_g : float
        Ground capacitance per node [F].
    C_c : float
        Waveguide coupling capacitance [F].
    chi : float
        Dimensionless coupling knob; the coupler elements are
        ``L0 = L/chi`` and ``C0 = chi*C``.  ``chi = 0`` decouples the atom
        exactly.
    E_C_A : float
        Atomic charging energy [J].
    omega_A : float
        Bare atomic angular frequency [rad/s].
    Z_W : float
        Waveguide impedance [ohm].
    T : float
        Temperature [K] (>= 0).
    """

    N: int
    L: float
    C: float
    C_g: float
    C_c: float
    chi: float
    E_C_A: float
    omega_A: float
    Z_W: float
    T: float = 0.0

    def __post_init__(self):
        if int(self.N) != self.N or self.N < 1:
            raise DomainError(f"N must be an integer >= 1, got {self.N!r}")
        for name in ("L", "C", "C_g", "C_c", "E_C_A", "omega_A", "Z_W"):
            if getattr(self, name) <= 0:
                raise DomainError(f"{name} must be positive, got {getattr(self, name)!r}")
        if self.chi < 0:
            raise DomainError(f"chi must be >= 0, got {self.chi!r}")
        if self.T < 0:
            raise DomainError(f"T must be >= 0, got {self.T!r}")

    # -- derived elements ---------------------------------------------------

    @property
    def C_A(self) -> float:
        return derive_atom_elements(self.E_C_A, self.omega_A)[0]

    @property
    def L_A(self) -> float:
        return derive_atom_elements(self.E_C_A, self.omega_A)[1]

    @property
    def C0(self) -> float:
        return self.chi * self.C

    @property
    def L0_inv(self) -> float:
        """Inverse coupler inductance; finite at chi = 0 where 1/L0 -> 0."""
        return self.chi / self.L

    @property
    def Z0(self) -> float:
        return float(np.sqrt(self.L / self.C))

    @property
    def Omega0(self) -> float:
        """Plasma angular frequency of a single cell, 1/sqrt(L C)."""
        return 1.0 / float(np.sqrt(self.L * self.C))

    @property
    def omega_c(self) -> float:
        """Band-edge angular frequency of the chain, 1/sqrt(L (C_g/2 + C))."""
        return 1.0 / float(np.sqrt(self.L * (self.C_g / 2.0 + self.C)))

    def replace(self, **kwargs) -> "CircuitParams":
        from dataclasses import replace as _replace

        return _replace(self, **kwargs)


@dataclass(frozen=True)
class ReducedSystem:
    """Dimensionless matrices and scales of the reduced subspace.

    ``C_red`` is symmetric positive definite (units of C); ``L_red_inv`` is
    symmetric positive semidefinite (units of 1/L) with its boundary row and
    column identically zero.  ``atom_index`` and ``boundary_index`` locate the
    atom node and the retained waveguide node.
    """

    M: int
    C_red: np.ndarray
    L_red_inv: np.ndarray
    Z0: float
    Omega0: float
    atom_index: int
    boundary_index: int
    params: CircuitParams = field(repr=False)

    def to_si(self) -> tuple[np.ndarray, np.ndarray]:
        """Rebuild the SI-unit matrices [F] and [1/H] from the scales."""
        return self.C_red * self.params.C, self.L_red_inv / self.params.L


def _chain_blocks(params: CircuitParams, with_waveguide: bool):
    """Stamp the chain-sector entries shared by the open and closed builds.

    Returns dimensionless (cap, ind) blocks over nodes 1..N; the first
    diagonal carries the coupler on-site terms C0 and 1/L0.  The last
    diagonal carries C_c only when ``with_waveguide`` is set.
    """
    N = params.N
    c = params.C
    cg = params.C_g / c
    chi = params.chi

    cap = np.zeros((N, N))
    ind = np.zeros((N, N))
    for n in range(N):
        links_c = 0.0
        links_l = 0.0
        if n == 0:
            links_c += chi          # coupler to the atom
            links_l += chi
        else:
            links_c += 1.0          # internal link to the left
            links_l += 1.0
        if n < N - 1:
            links_c += 1.0          # internal link to the right
            links_l += 1.0
            cap[n, n + 1] = cap[n + 1, n] = -1.0
            ind[n, n + 1] = ind[n + 1, n] = -1.0
        elif with_waveguide:
            links_c += params.C_c / c
        cap[n, n] = cg + links_c
        ind[n, n] = links_l
    return cap, ind


def build_reduced_system(params: CircuitParams) -> ReducedSystem:
    """Assemble the (N+2)-node open-system matrices.

    The retained waveguide node keeps only its coupling capacitance C_c (the
    lattice capacitance of the eliminated line vanishes in the continuum
    limit), and the boundary row of the inductance matrix is zero: loss
    enters through the resistive boundary term, not through these matrices.
    """
    N = params.N
    M = N + 2
    c = params.C
    C_red = np.zeros((M, M))
    L_red_inv = np.zeros((M, M))

    cap_jja, ind_jja = _chain_blocks(params, with_waveguide=True)
    C_red[1 : N + 1, 1 : N + 1] = cap_jja
    L_red_inv[1 : N + 1, 1 : N + 1] = ind_jja

    C_red[0, 0] = (params.C_A + params.C0) / c
    C_red[0, 1] = C_red[1, 0] = -params.C0 / c
    L_red_inv[0, 0] = params.L * (1.0 / params.L_A) + params.chi
    L_red_inv[0, 1] = L_red_inv[1, 0] = -params.chi

    C_red[N, N + 1] = C_red[N + 1, N] = -params.C_c / c
    C_red[N + 1, N + 1] = params.C_c / c

    return ReducedSystem(
        M=M,
        C_red=C_red,
        L_red_inv=L_red_inv,
        Z0=params.Z0,
        Omega0=params.Omega0,
        atom_index=0,
        boundary_index=N + 1,
        params=params,
    )


def build_closed_jja(params: CircuitParams) -> tuple[np.ndarray, np.ndarray]:
    """Chain-sector matrices with C_c -> 0 (closed array).

    The first diagonal keeps the on-site coupler contributions C0 and 1/L0,
    so the mode shapes feel the atom-side boundary condition set by chi.
    Both matrices are dimensionless (units of C and 1/L).
    """
    return _chain_blocks(params, with_waveguide=False)


def build_closed_system(params: CircuitParams) -> tuple[np.ndarray, np.ndarray]:
    """(N+1)-node atom+chain matrices with the waveguide removed (C_c -> 0).

    Dimensionless, same conventions as ``build_reduced_system``; used for
    closed-system spectra and Hamiltonian consistency checks.
    """
    N = params.N
    c = params.C
    cap = np.zeros((N + 1, N + 1))
    ind = np.zeros((N + 1, N + 1))
    cap_jja, ind_jja = _chain_blocks(params, with_waveguide=False)
    cap[1:, 1:] = cap_jja
    ind[1:, 1:] = ind_jja
    cap[0, 0] = (params.C_A + params.C0) / c
    cap[0, 1] = cap[1, 0] = -params.C0 / c
    ind[0, 0] = params.L / params.L_A + params.chi
    ind[0, 1] = ind[1, 0] = -params.chi
    return cap, ind
