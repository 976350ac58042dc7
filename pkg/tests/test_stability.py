import numpy as np
import pytest
from scipy.linalg import solve_triangular

from imexpeer import available_methods, builtin_tableau
from imexpeer.coeffs import assemble, compute_Q
from imexpeer import stability as st

ALL = list(available_methods())


@pytest.mark.parametrize("name", ALL)
def test_matrix_at_origin_is_p(name):
    t = builtin_tableau(name)
    np.testing.assert_allclose(st.imex_stability_matrix(t, 0.0, 0.0), t.P, atol=1e-14)
    np.testing.assert_allclose(st.implicit_stability_matrix(t, 0.0, 0.7), t.P, atol=1e-14)


def test_explicit_matrix_two_evaluation_paths():
    # (I - z0 Rhat)^{-1}(P + z0 Qhat) via generic solve vs triangular solve
    t = builtin_tableau("2sve")
    co = assemble(t, 1.0)
    z0 = -1.0
    M1 = st.imex_stability_matrix(t, z0, 0.0)
    A = np.eye(2) - z0 * co.Rhat
    M2 = solve_triangular(A, t.P + z0 * co.Qhat, lower=True)
    np.testing.assert_allclose(M1, M2, atol=1e-13)


def test_implicit_matrix_stiff_limit():
    t = builtin_tableau("3sv")
    Q1 = compute_Q(t, 1.0)
    lim = -np.linalg.solve(t.R, Q1)
    M = st.implicit_stability_matrix(t, -1e8, 1.0)
    assert np.linalg.norm(M - lim) <= 1e-6 * np.linalg.norm(lim)


def test_damping_radius_reference_values():
    targets = {"2sve": 0.863, "3sv": 0.254, "4sv": 0.632, "4sve": 0.118}
    for name, rho in targets.items():
        assert st.damping_radius(builtin_tableau(name)) == pytest.approx(rho, abs=2e-3)


@pytest.mark.parametrize("name", ALL)
def test_damping_profile_moderate_on_clamp_range(name):
    # the shipped coefficients keep the stiff damping radius moderate over
    # the controller's ratio clamp; it does drift above 1 away from sigma=1
    t = builtin_tableau(name)
    sig = np.linspace(0.8, 1.2, 161)
    vals = st.damping_profile(t, sig)
    assert np.all(vals <= 1.2)
    assert vals[80] == pytest.approx(st.damping_radius(t), abs=1e-12)
    # continuity: the largest sample-to-sample jump shrinks under refinement
    # (the profile has steep eigenvalue-crossing kinks but no discontinuity)
    fine = st.damping_profile(t, np.linspace(0.8, 1.2, 641))
    assert np.max(np.abs(np.diff(fine))) < 0.75 * max(np.max(np.abs(np.diff(vals))), 0.02)


@pytest.mark.parametrize("name", ALL)
def test_a_stability(name):
    rep = st.check_a_stability(builtin_tableau(name))
    assert rep.ok
    assert rep.max_rho <= 1.0 + 1e-8
    assert rep.n_points >= 2000


def test_explicit_part_not_a_stable():
    for name in ALL:
        t = builtin_tableau(name)
        assert st.explicit_spectral_radius(t, -1e6) > 1.0


def test_rho_of_p_is_one():
    t = builtin_tableau("4sv")
    M = st.implicit_stability_matrix(t, 0.0, 1.0)
    assert np.max(np.abs(np.linalg.eigvals(M))) == pytest.approx(1.0, abs=1e-12)


def test_singularity_raises():
    t = builtin_tableau("2sve")
    with pytest.raises(st.StabilityError):
        st.implicit_stability_matrix(t, 1.0 / t.gamma, 1.0)


def test_conjugate_symmetry_spot_samples():
    t = builtin_tableau("3sv")
    co = assemble(t, 1.0)
    mats = (t.P, co.Q, co.Qhat, t.R, co.Rhat)
    from imexpeer import kernels
    rng = np.random.default_rng(3)
    z0 = rng.normal(size=6) * 0.5 + 1j * rng.normal(size=6)
    z1 = -np.abs(rng.normal(size=6)) + 1j * rng.normal(size=6)
    r1 = kernels.rho_pairs(*mats, z0, z1)
    r2 = kernels.rho_pairs(*mats, z0.conj(), z1.conj())
    np.testing.assert_allclose(r1, r2, rtol=1e-9)


def test_wedge_monotonicity_masks():
    # S_alpha shrinks as the wedge widens, cell-by-cell on a fixed grid
    t = builtin_tableau("3sv")
    grid = st.GridSpec(-0.35, 0.02, 0.5, 60, 60)
    masks = {}
    for alpha in (0.0, 45.0, 90.0):
        masks[alpha] = st.scan_region(t, alpha, grid=grid).mask
    assert np.all(masks[90.0] <= masks[45.0])
    assert np.all(masks[45.0] <= masks[0.0])


def test_region_auto_scan_3sv_extents():
    scan = st.scan_region(builtin_tableau("3sv"), 90.0, rays=st.SUMMARY_RAYS,
                          resolution=120)
    assert scan.x_max == pytest.approx(-0.25, rel=0.05)
    assert not scan.empty
    assert scan.area == pytest.approx(0.11, rel=0.2)


def test_empty_region_not_an_error():
    # damping radius above one empties the scan regardless of the grid
    t = builtin_tableau("3sv")
    scan = st.scan_region(t, 90.0, bound=1e-6)
    assert scan.empty and scan.area == 0.0


def test_region_boundary_polyline():
    t = builtin_tableau("2sve")
    scan = st.scan_region(t, 0.0, rays=st.SUMMARY_RAYS, resolution=80)
    pts = st.region_boundary(scan)
    assert pts.shape[1] == 2
    finite = pts[np.isfinite(pts[:, 0])]
    assert len(finite) > 20
    # boundary stays within the scanned box, mirrored about the real axis
    assert finite[:, 1].min() < 0 < finite[:, 1].max()


def test_alpha_validation():
    with pytest.raises(ValueError):
        st.scan_region(builtin_tableau("2sve"), 120.0)


def test_explicit_region_scan():
    scan = st.explicit_region(builtin_tableau("2sve"), resolution=70)
    assert scan.area > 0
    assert scan.x_max < 0
    # the explicit region contains the origin-adjacent real segment
    assert scan.x_max <= -0.004
