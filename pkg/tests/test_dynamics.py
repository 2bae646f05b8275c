import numpy as np
import pytest
import scipy.linalg as sla

from jjaqed.circuit import build_reduced_system
from jjaqed.dynamics import (
    DynamicsTrace,
    atom_occupation_modal,
    beat_spectrum,
    covariance_ode_oracle,
    eta_zeta,
    matrix_exponential_oracle,
    steady_state,
    steady_state_oracle,
    _first_order_matrix,
)
from jjaqed.errors import DivergenceError, DomainError, ResolutionError
from jjaqed.spectral import solve_quadratic_modes

from conftest import make_params


@pytest.fixture(scope="module")
def toy():
    p = make_params(N=1, chi=1.0, f_atom=5e9, T=0.05)
    sys_ = build_reduced_system(p)
    return p, sys_, solve_quadratic_modes(sys_)


def test_eta_rows_sum_to_zero(toy):
    _, sys_, ms = toy
    eta, _ = eta_zeta(ms, sys_, observe_node=sys_.atom_index)
    assert np.max(np.abs(eta.sum(axis=0))) < 1e-10


def test_zeta_is_pole_weighted_capacitance_row(toy):
    _, sys_, ms = toy
    eta, zeta = eta_zeta(ms, sys_, observe_node=sys_.atom_index)
    for row, p in enumerate(ms.kept()):
        R = ms.residue(p)
        want = ms.poles[p] * (sys_.C_red @ R)[sys_.atom_index, :]
        assert np.allclose(zeta[row], want, rtol=1e-10, atol=1e-12)
        assert np.allclose(eta[row], R[sys_.atom_index, :], rtol=1e-10, atol=1e-12)


def test_flux_reconstruction_vs_matrix_exponential(toy):
    p, sys_, ms = toy
    M = sys_.M
    rng = np.random.default_rng(7)
    x0 = rng.normal(size=2 * M)
    t = np.linspace(0.0, 30.0, 121)
    z_ratio = ms.z_ratio

    # modal route: Phi(t) = sum_p e^{s t} R_p [(s C + z delta_b) Phi0 + Z0 Q0]
    phi0, q0 = x0[:M], x0[M:]
    modal = np.zeros((M, len(t)))
    for q in ms.kept():
        R = ms.residue(q)
        s = ms.poles[q]
        y = s * (sys_.C_red @ phi0) + q0
        y[sys_.boundary_index] += z_ratio * phi0[sys_.boundary_index]
        modal += np.real(np.outer(R @ y, np.exp(s * t)))

    A = _first_order_matrix(sys_)
    for i, ti in enumerate(t):
        exact = (sla.expm(A * ti) @ x0)[:M]
        assert np.max(np.abs(modal[:, i] - exact)) < 1e-8 * np.max(np.abs(x0))


def test_occupation_starts_at_one(toy):
    p, _, ms = toy
    tr = atom_occupation_modal(p, np.array([0.0, 1.0]), modes=ms)
    assert tr.n_A[0] == pytest.approx(1.0, abs=1e-10)
    assert tr.part_initial[0] == pytest.approx(0.5, abs=1e-10)
    assert tr.part_vacuum[0] == pytest.approx(0.5, abs=1e-10)
    assert tr.part_thermal[0] == pytest.approx(0.0, abs=1e-12)


def test_decoupled_lossless_atom_stays_excited():
    p = make_params(N=3, chi=0.0, f_atom=5e9, T=0.0)
    t = np.linspace(0, 200, 401)
    tr = atom_occupation_modal(p, t)
    assert np.max(np.abs(tr.n_A - 1.0)) < 1e-8
    oracle = covariance_ode_oracle(p, t)
    assert np.max(np.abs(oracle.n_A - 1.0)) < 1e-8


def test_modal_matches_covariance_oracle_small():
    p = make_params(N=4, chi=0.8, f_atom=5e9, T=0.05)
    t = np.linspace(0, 150, 601)
    m = atom_occupation_modal(p, t)
    o = covariance_ode_oracle(p, t)
    assert np.max(np.abs(m.n_A - o.n_A)) < 1e-7 * np.max(o.n_A)
    for a, b in [(m.part_initial, o.part_initial), (m.part_vacuum, o.part_vacuum),
                 (m.part_thermal, o.part_thermal)]:
        assert np.max(np.abs(a - b)) < 1e-6 * np.max(o.n_A)


def test_two_independent_oracle_routes(toy):
    p, _, _ = toy
    t = np.linspace(0.0, 50.0, 201)
    a = covariance_ode_oracle(p, t, rtol=1e-12, atol=1e-14)
    b = matrix_exponential_oracle(p, t)
    assert np.max(np.abs(a.n_A - b.n_A)) < 1e-9 * np.max(a.n_A)


def test_reality_and_conjugate_closure(toy):
    p, sys_, ms = toy
    kept = ms.kept()
    s = ms.poles[kept]
    A = sys_.atom_index
    d = ms.denominators[kept]
    vA = ms.right_vectors[A, kept]
    Cu = sys_.C_red @ ms.left_vectors[:, kept].conj()
    f1 = s * vA * Cu[A, :] / d
    t = np.linspace(0, 40, 161)
    full = (f1[:, None] * np.exp(np.outer(s, t))).sum(axis=0)
    assert np.max(np.abs(full.imag)) < 1e-9 * np.max(np.abs(full.real))

    upper = s.imag > 1e-12
    half = (f1[upper, None] * np.exp(np.outer(s[upper], t))).sum(axis=0)
    real_poles = np.abs(s.imag) <= 1e-12
    rest = (f1[real_poles, None] * np.exp(np.outer(s[real_poles], t))).sum(axis=0)
    recombined = 2 * half.real + rest
    assert np.max(np.abs(recombined - full.real)) < 1e-10 * max(1.0, np.max(np.abs(full)))


def test_zero_temperature_trace_decays():
    p = make_params(N=1, chi=1.0, f_atom=5e9, T=0.0)
    ms = solve_quadratic_modes(build_reduced_system(p))
    s = ms.poles[ms.kept()]
    rates = np.abs(s.real[np.abs(s.imag) > 1e-9])
    horizon = 8.0 / rates.min()  # several lifetimes of the slowest mode
    t = np.linspace(0, horizon, 400)
    tr = atom_occupation_modal(p, t, modes=ms)
    assert tr.part_thermal.max() == 0.0
    assert tr.n_A[-1] < 1e-2
    assert np.all(tr.n_A >= -1e-9)
    assert tr.n_A_inf == 0.0


def test_steady_state_monotone_and_matches_oracle():
    vals = []
    for chi in (1e-2, 1e-1, 1.0):
        p = make_params(N=30, chi=chi, f_atom=5e9, T=0.05)
        n_modal = steady_state(p)
        n_oracle = steady_state_oracle(p)
        assert n_modal == pytest.approx(n_oracle, rel=0.01)
        vals.append(n_modal)
    assert vals[0] < vals[1] < vals[2]


def test_steady_state_zero_temperature():
    p = make_params(N=10, chi=0.5, f_atom=5e9, T=0.0)
    assert steady_state(p) == 0.0
    with pytest.raises(DomainError):
        steady_state(p, T=-1.0)


def test_steady_state_divergence_guard():
    p = make_params(N=3, chi=0.8, f_atom=5e9, T=0.05)
    ms = solve_quadratic_modes(build_reduced_system(p))
    ms.poles = ms.poles - ms.poles.real  # force undamped poles, keep weights
    with pytest.raises(DivergenceError):
        steady_state(p, modes=ms)


def test_delta_noise_ratio_reported(toy):
    p, _, ms = toy
    tr = atom_occupation_modal(p, np.linspace(0, 10, 21), modes=ms)
    assert tr.delta_noise_ratio >= 0.0


def test_beat_peaks_match_pole_pairs(toy):
    p, _, ms = toy
    t = np.arange(0.0, 3000.0, 0.25)
    tr = atom_occupation_modal(p, t, modes=ms)
    peaks = beat_spectrum(tr, ms)
    assert len(peaks) >= 2
    assert all(pk.matched_pair is not None for pk in peaks)
    assert all(pk.offset_bins <= 2.0 for pk in peaks)


def test_single_pair_self_beat(toy):
    p, _, ms = toy
    t = np.arange(0.0, 3000.0, 0.25)
    kept = ms.kept()
    s = ms.poles[kept]
    i = int(np.argmax(s.imag))  # strongest oscillatory pole
    y = np.exp(s[i] * t)
    trace = DynamicsTrace(
        t_grid=t, n_A=(y.real**2), part_initial=None, part_vacuum=None,
        part_thermal=None, n_A_inf=None, method="modal",
    )
    peaks = beat_spectrum(trace, ms)
    assert len(peaks) == 1
    assert peaks[0].frequency == pytest.approx(2 * s[i].imag, abs=0.01)
    assert peaks[0].matched_pair is not None


def test_flat_trace_has_no_peaks(toy):
    _, _, ms = toy
    t = np.arange(0.0, 3000.0, 0.25)
    trace = DynamicsTrace(
        t_grid=t, n_A=np.ones_like(t), part_initial=None, part_vacuum=None,
        part_thermal=None, n_A_inf=None, method="modal",
    )
    assert beat_spectrum(trace, ms) == []


def test_beat_spectrum_grid_validation(toy):
    _, _, ms = toy
    short = DynamicsTrace(
        t_grid=np.linspace(0, 10, 64), n_A=np.zeros(64), part_initial=None,
        part_vacuum=None, part_thermal=None, n_A_inf=None, method="modal",
    )
    with pytest.raises(ResolutionError):
        beat_spectrum(short, ms)
    ragged = DynamicsTrace(
        t_grid=np.r_[np.linspace(0, 10, 50), 20.0], n_A=np.zeros(51),
        part_initial=None, part_vacuum=None, part_thermal=None, n_A_inf=None,
        method="modal",
    )
    with pytest.raises(ResolutionError):
        beat_spectrum(ragged, ms)


def test_negative_temperature_rejected(toy):
    p, _, ms = toy
    with pytest.raises(DomainError):
        atom_occupation_modal(p, np.linspace(0, 1, 5), T=-0.1, modes=ms)


def test_stronger_coupling_larger_plateau():
    # late-time occupation grows with the coupling at fixed temperature
    t = np.linspace(0.0, 400.0, 801)
    tails = []
    for chi in (0.1, 1.0):
        p = make_params(N=100, chi=chi, f_atom=5e9, T=0.05)
        tr = atom_occupation_modal(p, t)
        tails.append(tr.n_A[-200:].mean())
    assert tails[1] > tails[0]
