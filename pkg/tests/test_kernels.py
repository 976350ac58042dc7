import numpy as np
import pytest

from imexpeer import builtin_tableau
from imexpeer.coeffs import assemble
from imexpeer import kernels


def _mats(name, sigma=1.0):
    t = builtin_tableau(name)
    co = assemble(t, sigma)
    return t.P, co.Q, co.Qhat, t.R, co.Rhat


def test_backend_selected():
    assert kernels.BACKEND in ("cython", "python")
    assert "python" in kernels.available_backends()


requires_compiled = pytest.mark.skipif(
    "cython" not in kernels.available_backends(),
    reason="compiled kernel not built")


@requires_compiled
@pytest.mark.parametrize("name", ["2sve", "3sv", "4sv", "4sve"])
def test_backend_parity_rho(name):
    back = kernels.available_backends()
    mats = _mats(name)
    rng = np.random.default_rng(7)
    n = 4000
    z0 = -3.0 * rng.random(n) + 2j * rng.random(n)
    z1 = -np.abs(rng.normal(1.0, 10.0, n)) + 1j * rng.normal(0, 3, n)
    r_py = back["python"].rho_pairs(*mats, z0, z1)
    r_cy = back["cython"].rho_pairs(*mats, z0, z1)
    np.testing.assert_allclose(r_cy, r_py, rtol=1e-9, atol=1e-11)


@requires_compiled
def test_backend_parity_mask():
    back = kernels.available_backends()
    mats = _mats("4sve")
    rng = np.random.default_rng(11)
    z0 = -2.5 * rng.random(3000) + 1.5j * rng.random(3000)
    z1 = np.concatenate([[0j], -np.geomspace(1e-3, 1e6, 40)])
    m_py = back["python"].stable_mask(*mats, z0, z1, 1 + 1e-10)
    m_cy = back["cython"].stable_mask(*mats, z0, z1, 1 + 1e-10)
    assert m_py.tolist() == m_cy.tolist()
    assert 0 < m_py.sum() < len(z0)


def test_singular_system_counts_unstable():
    t = builtin_tableau("2sve")
    mats = _mats("2sve")
    z1 = np.array([1.0 / t.gamma + 0j])   # I - z1 R singular
    for mod in kernels.available_backends().values():
        r = mod.rho_pairs(*mats, np.array([0j]), z1)
        assert not np.isfinite(r[0])
        m = mod.stable_mask(*mats, np.array([0j]), z1, 1 + 1e-10)
        assert m[0] == 0


def test_rho_against_dense_eigendecomposition():
    mats = _mats("3sv")
    P, Q, Qh, R, Rh = (np.asarray(a, complex) for a in mats)
    rng = np.random.default_rng(5)
    for _ in range(25):
        z0 = complex(rng.normal(), rng.normal())
        z1 = complex(-abs(rng.normal()) * 10, rng.normal())
        M = np.linalg.solve(np.eye(3) - z0 * Rh - z1 * R, P + z0 * Qh + z1 * Q)
        want = np.abs(np.linalg.eigvals(M)).max()
        got = kernels.rho_pairs(*mats, np.array([z0]), np.array([z1]))[0]
        assert got == pytest.approx(want, rel=1e-10, abs=1e-12)


def test_pair_length_validation():
    mats = _mats("2sve")
    for mod in kernels.available_backends().values():
        if mod is kernels.available_backends()["python"]:
            continue
        with pytest.raises(ValueError):
            mod.rho_pairs(*mats, np.zeros(3, complex), np.zeros(2, complex))
