import numpy as np
import pytest

from jjaqed.circuit import CircuitParams
from jjaqed.constants import HBAR, TWO_PI

E_C_15GHZ = HBAR * TWO_PI * 15e9


def make_params(N=100, chi=1.0, f_atom=15e9, T=0.05, **kw):
    """Fig-1 style parameter set with the knobs tests actually vary."""
    base = dict(
        N=N,
        L=1e-9,
        C=150e-15,
        C_g=0.1e-15,
        C_c=100e-15,
        chi=chi,
        E_C_A=E_C_15GHZ,
        omega_A=TWO_PI * f_atom,
        Z_W=50.0,
        T=T,
    )
    base.update(kw)
    return CircuitParams(**base)


@pytest.fixture(scope="session")
def params_factory():
    return make_params


@pytest.fixture(scope="session")
def modeset_n30():
    """Shared open-system mode set, N=30, chi=1, atom at 5 GHz."""
    from jjaqed.circuit import build_reduced_system
    from jjaqed.spectral import solve_quadratic_modes

    sys_ = build_reduced_system(make_params(N=30, chi=1.0, f_atom=5e9))
    return sys_, solve_quadratic_modes(sys_)


def exact_env_impedance(params, omega):
    """Nodal-analysis oracle for the impedance seen by the atom.

    Assembles the full (chain + waveguide-node) admittance matrix of the
    linear environment, terminates the line resistively, and adds the
    coupler in series; independent of the ladder recursion.
    """
    N = params.N
    n = N + 1
    C = np.zeros((n, n))
    Linv = np.zeros((n, n))
    for i in range(N):
        C[i, i] += params.C_g
        if i < N - 1:
            C[i, i] += params.C
            C[i + 1, i + 1] += params.C
            C[i, i + 1] -= params.C
            C[i + 1, i] -= params.C
            Linv[i, i] += 1 / params.L
            Linv[i + 1, i + 1] += 1 / params.L
            Linv[i, i + 1] -= 1 / params.L
            Linv[i + 1, i] -= 1 / params.L
    C[N - 1, N - 1] += params.C_c
    C[N, N] += params.C_c
    C[N - 1, N] -= params.C_c
    C[N, N - 1] -= params.C_c
    Y = 1j * omega * C + Linv / (1j * omega)
    Y[N, N] += 1 / params.Z_W
    z_in = np.linalg.inv(Y)[0, 0]
    det = 1.0 - (omega / params.Omega0) ** 2
    z_coupler = 1j * omega * params.L / det / params.chi
    return z_coupler + z_in
