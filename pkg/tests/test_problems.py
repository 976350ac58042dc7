import dataclasses

import numpy as np
import pytest

from imexpeer import builtin_tableau
from imexpeer.integrator import Controller, integrate
from imexpeer.jacobians import Banded, BlockDiagonal2x2, Dense, fd_jacobian
from imexpeer.problems import (
    advection_reaction,
    burgers,
    dahlquist_split,
    fold_implicit,
    prothero_robinson,
    van_der_pol,
)


def test_prothero_plug_in_values():
    p = prothero_robinson()
    u = np.array([1.0, 0.0])
    np.testing.assert_allclose(p.f0(0.0, u), [0.0, 1.0])
    np.testing.assert_allclose(p.f1(0.0, u), [0.0, 0.0])
    # sum equals the exact derivative on the trajectory
    for t in (0.0, 0.7, 2.3):
        y = p.exact(t)
        dy = np.array([-np.sin(t), np.cos(t)])
        np.testing.assert_allclose(p.f0(t, y) + p.f1(t, y), dy, atol=1e-9)
    np.testing.assert_allclose(p.jac1(0.0, u), [[-1e6, 1e3], [0.0, 0.0]])


def test_van_der_pol_values():
    p = van_der_pol()
    np.testing.assert_allclose(p.f1(0.0, np.array([2.0, 0.0])), [0.0, -2e6])
    for k in (-3.0, 0.5, 7.0):
        assert p.f1(0.0, np.array([1.0, k]))[1] == -1e6
    J = p.jac1(0.0, np.array([2.0, 0.5]))
    np.testing.assert_allclose(J, [[0, 0], [1e6 * (-2 * 2 * 0.5 - 1), 1e6 * (1 - 4)]])


def test_burgers_source_profile():
    from imexpeer.problems import _burgers_source_profile as r
    xs = np.array([-1.0, -1 / 3, 0.0, 2 / 3, -1 / 6, 1.0, 0.5])
    np.testing.assert_allclose(r(xs), [0, 0, 1, 0, 0.5, 0, 0.25])


def test_burgers_dimensions_and_jacobian():
    p = burgers(1 / 400)
    assert p.m == 799
    J = p.jac1(0.0, p.u0)
    a = 0.1 * 400 ** 2
    np.testing.assert_allclose(J[1], -2 * a)
    np.testing.assert_allclose(J[0, 1:], a)
    with pytest.raises(ValueError, match="does not divide"):
        burgers(0.0003)


def test_burgers_heat_mode_decay():
    # diffusion only: the initial condition is a Laplacian eigenmode and
    # decays like exp(-0.1 pi^2 t)
    p = burgers(1 / 400, advection=False, source=False)
    p = dataclasses.replace(p, t_span=(0.0, 1.0))
    res = integrate(p, builtin_tableau("4sv"), Controller(atol=1e-9, rtol=1e-9),
                    tau=1e-4)
    x = -1 + (1 / 400) * np.arange(1, p.m + 1)
    uex = np.exp(-0.1 * np.pi ** 2) * np.sin(np.pi * (x + 1))
    assert np.max(np.abs(res.y - uex)) / np.max(np.abs(uex)) < 0.01


def test_burgers_diffusion_energy_decay():
    p = burgers(1 / 100, advection=False, source=False)
    rng = np.random.default_rng(0)
    u = rng.normal(size=p.m)
    # discrete energy dissipation: d/dt ||u||^2 = 2 u . F1(u) <= 0
    assert u @ p.f1(0.0, u) <= 0
    assert p.u0 @ p.f1(0.0, p.u0) <= 0


def test_advection_reaction_initial_equilibrium():
    p = advection_reaction(100)
    F1 = p.f1(0.0, p.u0)
    np.testing.assert_allclose(F1[0::2], 1.0, atol=1e-9)       # = s2 per node
    np.testing.assert_allclose(F1[0::2] + F1[1::2], 0.0, atol=1e-12)


def test_advection_reaction_block_eigenvalues():
    p = advection_reaction(50)
    blk = p.jac1(0.0, p.u0)[7]
    lam = np.sort(np.linalg.eigvals(blk))
    np.testing.assert_allclose(lam, [-3e6, 0.0], atol=1e-6)


def test_advection_reaction_stencil_exactness():
    # inflow is zero at t = pi/24, matching g = 0 for polynomial data x^3
    p = advection_reaction(200)
    m, h = 200, 1 / 200
    x = h * np.arange(1, m + 1)
    w = np.zeros(2 * m)
    w[0::2] = x ** 3
    F0 = p.f0(np.pi / 24, w)
    np.testing.assert_allclose(F0[0::2], -3 * x ** 2, atol=1e-10)
    np.testing.assert_allclose(F0[1::2], 1.0)


@pytest.mark.parametrize("maker,state_scale", [
    (prothero_robinson, 1.0), (van_der_pol, 2.0),
    (lambda: burgers(1 / 50), 0.5), (lambda: advection_reaction(40), 1.0),
])
def test_fd_jacobians_match_analytic(maker, state_scale):
    p = maker()
    rng = np.random.default_rng(1)
    u = p.u0 + 0.1 * state_scale * rng.normal(size=p.m)
    for jac, struct, f in ((p.jac1, p.structure1, p.f1), (p.jac0, p.structure0, p.f0)):
        if jac is None:
            continue
        Ja = struct.to_dense(jac(0.3, u)) if not isinstance(struct, Dense) else jac(0.3, u)
        Jf = fd_jacobian(struct, f, 0.3, u)
        Jf = struct.to_dense(Jf) if not isinstance(struct, Dense) else Jf
        scale = max(1.0, np.max(np.abs(Ja)))
        assert np.max(np.abs(Ja - Jf)) / scale < 1e-6


def test_dahlquist_exactness():
    p = dahlquist_split(0.0, -1.0)
    np.testing.assert_allclose(p.exact(1.0), [np.exp(-1.0), 0.0])
    p2 = dahlquist_split(1j, 0.0)
    for t in np.linspace(0, 1, 7):
        assert np.linalg.norm(p2.exact(t)) == pytest.approx(1.0, abs=1e-14)


def test_fold_implicit_consistency():
    for maker in (prothero_robinson, van_der_pol,
                  lambda: burgers(1 / 50), lambda: advection_reaction(30)):
        p = maker()
        fp = fold_implicit(p)
        u = p.u0 * 1.01
        np.testing.assert_allclose(fp.f1(0.2, u), p.f0(0.2, u) + p.f1(0.2, u),
                                   atol=1e-12)
        assert np.all(fp.f0(0.2, u) == 0)
        Jf = fp.structure1.to_dense(fp.jacobian1(0.2, u))
        Jd = p.structure1.to_dense(p.jac1(0.2, u)) if not isinstance(p.structure1, Dense) else p.jac1(0.2, u)
        J0 = p.structure0.to_dense(p.jac0(0.2, u)) if not isinstance(p.structure0, Dense) else p.jac0(0.2, u)
        np.testing.assert_allclose(Jf, Jd + J0, atol=1e-9)


def test_structures_expose_expected_tags():
    assert isinstance(burgers(1 / 50).structure1, Banded)
    assert isinstance(advection_reaction(30).structure1, BlockDiagonal2x2)
    assert isinstance(prothero_robinson().structure1, Dense)
