import numpy as np
import pytest

from jjaqed.constants import TWO_PI
from jjaqed.coupling import build_coupling_set
from jjaqed.errors import (
    AtomDecoupledError,
    DomainError,
    ImpedanceSingularityError,
    ResonanceError,
)
from jjaqed.impedance import (
    impedance_profile,
    ladder_impedance,
    lamb_shift_pt2,
    purcell_pt,
    z_eff,
    z_infinity,
)
from jjaqed.spectral import closed_jja_of
from jjaqed.tracking import track_atomic_mode

from conftest import exact_env_impedance, make_params


def test_recursion_base_is_external_load():
    p = make_params(N=5)
    w = TWO_PI * 4e9
    want = p.Z_W + 1.0 / (1j * w * p.C_c)
    assert ladder_impedance(p, w, 0) == pytest.approx(want, rel=1e-14)


def test_z_infinity_low_frequency():
    p = make_params(N=5)
    z = z_infinity(p, p.Omega0 / 100)
    assert abs(z) == pytest.approx(np.sqrt(p.L / p.C_g), rel=0.01)
    assert abs(z) == pytest.approx(3.16e3, rel=0.01)
    assert abs(z.imag) < 1e-9 * abs(z)


def test_z_infinity_high_frequency():
    p = make_params(N=5)
    w = 20 * p.Omega0
    z = z_infinity(p, w)
    assert z.real == 0.0 and z.imag > 0
    assert abs(z) == pytest.approx((p.Omega0 / w) * np.sqrt(p.L / p.C_g), rel=0.01)


def test_z_infinity_diverges_at_resonance():
    p = make_params(N=5)
    assert abs(z_infinity(p, p.Omega0 * (1 - 1e-7))) > 1e6
    with pytest.raises(ImpedanceSingularityError):
        z_infinity(p, p.Omega0)
    with pytest.raises(DomainError):
        z_infinity(p, -1.0)


def test_z_eff_matches_nodal_oracle():
    p = make_params(N=40, chi=0.01, f_atom=5e9)
    for f in (2e9, 5e9, 9e9, 11e9, 14e9):
        w = TWO_PI * f
        want = exact_env_impedance(p, w)
        assert z_eff(p, w) == pytest.approx(want, rel=1e-10)


def test_z_eff_passivity_and_oscillation():
    p = make_params(N=200, chi=1.0, f_atom=5e9)
    grid = TWO_PI * np.linspace(0.5e9, 12.5e9, 160)
    prof = impedance_profile(p, grid)
    g = (1.0 / prof.Z_eff).real
    assert np.all(prof.Z_eff.real >= -1e-9 * np.abs(prof.Z_eff))
    assert np.all(g >= -1e-20)
    # in-band conductance oscillates through the mode comb
    slope_signs = np.sign(np.diff(g))
    assert np.count_nonzero(np.diff(slope_signs) != 0) > 10


def test_z_eff_chi_zero_open_circuit():
    p = make_params(N=10, chi=0.0)
    with pytest.raises(AtomDecoupledError):
        z_eff(p, TWO_PI * 5e9)


def test_ladder_cell_convergence_off_resonance():
    # in-band the recursion settles into a slowly rotating standing-wave
    # cycle whose per-cell change scales with the per-cell phase; at low
    # in-band frequency the change drops below 1e-3, and everywhere off
    # resonance the cycle stays bounded (no runaway)
    p = make_params(N=1000, chi=1.0)
    w = TWO_PI * 0.2e9
    a = ladder_impedance(p, w, 1000)
    b = ladder_impedance(p, w, 999)
    assert abs(a - b) / abs(a) < 1e-3
    for f in (4.1e9, 7.3e9):
        w = TWO_PI * f
        tail = np.array([ladder_impedance(p, w, n) for n in (800, 900, 1000)])
        assert np.max(np.abs(tail)) < 1e7
        a, b = ladder_impedance(p, w, 1000), ladder_impedance(p, w, 999)
        assert abs(a - b) / abs(a) < 0.2


def test_purcell_above_band_infinite_array_is_zero():
    p = make_params(N=10, chi=1.0, f_atom=15e9)
    assert purcell_pt(p, use_infinite=True) == 0.0


def test_purcell_eff_vs_infinite_differ():
    p = make_params(N=200, chi=1.0, f_atom=5e9)
    g_eff = purcell_pt(p)
    g_inf = purcell_pt(p, use_infinite=True)
    assert abs(g_inf - g_eff) > 0.2 * max(g_eff, g_inf)


def test_purcell_positive_on_grid():
    p = make_params(N=100, chi=0.5, f_atom=5e9)
    for f in np.linspace(1e9, 12e9, 25):
        assert purcell_pt(p.replace(omega_A=TWO_PI * f)) >= 0.0


def test_lamb_shift_zero_coupling():
    p = make_params(N=20, chi=0.0, f_atom=15e9)
    cs = build_coupling_set(p, closed_jja_of(p))
    assert lamb_shift_pt2(cs) == 0.0


def test_lamb_shift_crossover():
    p1 = make_params(N=60, chi=0.01, f_atom=15e9)
    cs1 = build_coupling_set(p1, closed_jja_of(p1))
    tr1 = track_atomic_mode(p1, 0.01)
    err1 = abs(cs1.omega_A_dprime + lamb_shift_pt2(cs1) - tr1.frequencies[-1].real)
    assert err1 < 0.01 * p1.omega_A

    p2 = make_params(N=60, chi=1.0, f_atom=15e9)
    cs2 = build_coupling_set(p2, closed_jja_of(p2))
    tr2 = track_atomic_mode(p2, 1.0)
    err2 = abs(cs2.omega_A_dprime + lamb_shift_pt2(cs2) - tr2.frequencies[-1].real)
    assert err2 > 0.05 * p2.omega_A


def test_lamb_shift_term_signs_and_resonance_guard():
    p = make_params(N=30, chi=0.02, f_atom=15e9)
    cs = build_coupling_set(p, closed_jja_of(p))
    shift = lamb_shift_pt2(cs)
    assert np.isfinite(shift) and np.imag(shift) == 0
    # push omega_A'' onto a mode frequency: resonance error names the mode
    cs.omega_A_dprime = float(cs.omega_k_prime[3])
    with pytest.raises(ResonanceError) as exc:
        lamb_shift_pt2(cs)
    assert exc.value.k == 3
