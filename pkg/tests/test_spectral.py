import numpy as np
import pytest

from jjaqed.circuit import build_closed_jja, build_reduced_system
from jjaqed.errors import DomainError
from jjaqed.spectral import (
    analytic_dispersion,
    analytic_mode,
    closed_jja_of,
    pencil_candidates,
    solve_closed_jja_modes,
    solve_quadratic_modes,
)

from conftest import make_params


def det_polynomial_roots(sys, z_ratio):
    """Brute-force oracle: roots of det Q(s) via exact interpolation.

    det Q is a degree-2M scalar polynomial; interpolating it at 2M+1 sample
    points recovers the coefficients exactly, and np.roots is an independent
    companion-matrix root finder on the scalar polynomial.
    """
    M = sys.M
    deg = 2 * M
    pts = np.exp(2j * np.pi * np.arange(deg + 1) / (deg + 1)) * 1.3
    vals = []
    for s in pts:
        Q = s * s * sys.C_red + sys.L_red_inv.astype(complex)
        Q[sys.boundary_index, sys.boundary_index] += s * z_ratio
        vals.append(np.linalg.det(Q))
    V = np.vander(pts, deg + 1)
    coeffs = np.linalg.solve(V, np.array(vals))
    return np.roots(coeffs)


def test_n1_poles_match_determinant_oracle():
    p = make_params(N=1, chi=1.0, f_atom=5e9)
    sys = build_reduced_system(p)
    ms = solve_quadratic_modes(sys)
    oracle = det_polynomial_roots(sys, ms.z_ratio)
    for s in ms.poles:
        assert np.min(np.abs(oracle - s)) < 1e-10 * max(1.0, abs(s))
    for r in oracle:
        assert np.min(np.abs(ms.poles - r)) < 1e-10 * max(1.0, abs(r))


def test_lossless_limit_pure_imaginary():
    p = make_params(N=10, chi=1.0, f_atom=5e9)
    ms = solve_quadratic_modes(build_reduced_system(p), z_ratio=0.0)
    assert np.max(np.abs(ms.poles.real)) < 1e-12


def test_conjugation_closure_and_passivity(modeset_n30):
    _, ms = modeset_n30
    assert np.all(ms.poles.real <= 1e-10)
    for s in ms.poles:
        dist = np.min(np.abs(ms.poles - np.conj(s)))
        assert dist < 1e-8 * max(1.0, abs(s))


def test_pole_count_and_residuals(modeset_n30):
    sys, ms = modeset_n30
    assert ms.n_poles + (ms.multiplicity[ms.multiplicity > 1] - 1).sum() == 2 * sys.M
    assert np.max(ms.residual_norms) < 1e-8


def test_residue_partial_fraction_identities(modeset_n30):
    sys, ms = modeset_n30
    S0 = np.zeros((sys.M, sys.M), complex)
    S1 = np.zeros((sys.M, sys.M), complex)
    for p in ms.kept():
        R = ms.residue(p)
        S0 += R
        S1 += ms.poles[p] * R
    assert np.max(np.abs(S0)) < 1e-6
    assert np.max(np.abs(S1 - np.linalg.inv(sys.C_red))) < 1e-6


def test_denominator_matches_sigma_min_slope():
    # Near a simple pole sigma_min(s) = |u^H Q' v| |s - s_p| + O(|s-s_p|^2):
    # a cone.  Sampling the two central-stencil points along the pole
    # direction, the cone's even symmetry puts the slope in the symmetric
    # combination (sigma_+ + sigma_-)/(2 eps).
    p = make_params(N=8, chi=0.8, f_atom=5e9)
    sys = build_reduced_system(p)
    ms = solve_quadratic_modes(sys)
    for q in ms.kept():
        s, d = ms.poles[q], ms.denominators[q]
        if abs(s) < 1e-6:
            continue  # the origin is a stationary boundary pole, slope 0
        direction = np.exp(-1j * np.angle(d))
        eps = 3e-6 * max(1.0, abs(s))

        def smin(z):
            return np.linalg.svd(ms.quadratic_matrix(z), compute_uv=False)[-1]

        def sym_slope(e):
            return (smin(s + e * direction) + smin(s - e * direction)) / (2 * e)

        # symmetric stencil is second-order; one Richardson step removes the
        # eps^2 curvature so the SVD noise floor does not force tiny steps
        slope = (4 * sym_slope(eps / 2) - sym_slope(eps)) / 3
        assert slope == pytest.approx(abs(d), rel=1e-6)


def test_zero_pole_boundary_supported(modeset_n30):
    sys, ms = modeset_n30
    i0 = int(np.argmin(np.abs(ms.poles)))
    assert abs(ms.poles[i0]) < 1e-10
    v = np.abs(ms.right_vectors[:, i0])
    assert v[sys.boundary_index] == pytest.approx(1.0, abs=1e-8)
    assert np.max(np.abs(ms.residue(i0)[sys.atom_index, :])) < 1e-10


def test_closed_limit_linear_in_inverse_impedance():
    p = make_params(N=6, chi=1.0, f_atom=5e9)
    sys = build_reduced_system(p)
    rates = []
    for zw in (5e4, 5e5):
        ms = solve_quadratic_modes(sys, z_ratio=sys.Z0 / zw)
        rates.append(np.max(np.abs(ms.poles.real)))
    assert rates[1] == pytest.approx(rates[0] / 10, rel=0.05)


def test_left_vectors_are_conjugate_right():
    # Q(s) is complex symmetric, so SVD left vectors equal conj(right) up
    # to a phase, which cancels in the residues.
    p = make_params(N=5, chi=0.5, f_atom=5e9)
    ms = solve_quadratic_modes(build_reduced_system(p))
    for q in ms.kept():
        u = ms.left_vectors[:, q]
        v = ms.right_vectors[:, q]
        assert abs(np.vdot(u, v.conj())) == pytest.approx(1.0, abs=1e-8)


# --- closed-chain modes ---------------------------------------------------


def test_jja_orthonormality_and_order():
    p = make_params(N=60, chi=0.3)
    C, Linv = build_closed_jja(p)
    jja = solve_closed_jja_modes(C, Linv, p)
    assert np.all(np.diff(jja.frequencies) >= 0)
    target = (p.C_g + 2 * p.C) / p.C
    G = jja.modes.T @ C @ jja.modes
    assert np.max(np.abs(G - target * np.eye(p.N))) < 1e-10 * target
    # the discrete band top exceeds the printed 1/sqrt(L(C_g/2+C)) by
    # ~C_g/(8C); allow for it on top of the numerical tolerance
    assert np.all(jja.frequencies <= p.omega_c * (1 + 1e-6 + p.C_g / (4 * p.C)))
    assert np.all(jja.modes[0, :] >= -1e-12 * np.abs(jja.modes).max())


def test_jja_sign_convention():
    jja = closed_jja_of(make_params(N=25, chi=1.0))
    assert np.all(jja.atom_end_amplitudes >= 0)


def test_dispersion_endpoints():
    p = make_params(N=100)
    assert analytic_dispersion(0, "NN", p) == 0.0
    want = p.Omega0 * np.sqrt(2.0 / (p.C_g / (2 * p.C) + 2.0))
    assert analytic_dispersion(p.N, "NN", p) == pytest.approx(want, rel=1e-12)
    with pytest.raises(DomainError):
        analytic_dispersion(p.N + 1, "NN", p)
    with pytest.raises(DomainError):
        analytic_dispersion(3, "XX", p)


def test_dispersion_interlace():
    p = make_params(N=1000)
    nn = np.array([analytic_dispersion(k, "NN", p) for k in range(0, p.N)])
    dn = np.array([analytic_dispersion(k, "DN", p) for k in range(0, p.N)])
    assert np.all(nn[:-1] < dn[:-1]) and np.all(dn[:-1] < nn[1:])


def test_analytic_vs_numeric_dispersion_small_k():
    p = make_params(N=400, chi=1e-5)
    jja = closed_jja_of(p)
    for k in range(1, p.N // 4):
        want = analytic_dispersion(k, "NN", p)
        assert jja.frequencies[k] == pytest.approx(want, rel=2e-3)


def test_mode_shape_extrema():
    p = make_params(N=200)
    n = np.arange(1, p.N + 1)
    dn = analytic_mode(3, n, "DN", p)
    nn = analytic_mode(3, n, "NN", p)
    assert abs(dn[0]) < 0.15 * np.max(np.abs(dn))  # small at the atomic end
    assert abs(nn[0]) > 0.95 * np.max(np.abs(nn))  # extremal at the atomic end
    with pytest.raises(DomainError):
        analytic_mode(3, 0, "NN", p)


@pytest.mark.parametrize("chi,bc", [(1.0, "DN"), (1e-5, "NN")])
@pytest.mark.parametrize("k", [2, 3])
def test_mode_overlap_numeric(chi, bc, k):
    p = make_params(N=1000, chi=chi)
    jja = closed_jja_of(p)
    n = np.arange(1, p.N + 1)
    analytic = analytic_mode(k, n, bc, p)
    numeric = jja.modes[:, k]
    ov = abs(analytic @ numeric) / (np.linalg.norm(analytic) * np.linalg.norm(numeric))
    assert ov > 0.99


def test_pencil_candidates_agree_with_full_solver(modeset_n30):
    sys, ms = modeset_n30
    poles, vecs = pencil_candidates(sys)
    assert len(poles) == ms.n_poles
    for s in ms.poles:
        assert np.min(np.abs(poles - s)) < 1e-8 * max(1.0, abs(s))
    assert np.allclose(np.linalg.norm(vecs, axis=0), 1.0)


def test_conjugation_closure_n100():
    p = make_params(N=100, chi=1.0, f_atom=5e9)
    poles, _ = pencil_candidates(build_reduced_system(p))
    for s in poles:
        assert np.min(np.abs(poles - np.conj(s))) < 1e-8 * max(1.0, abs(s))
