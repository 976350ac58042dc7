"""Benchmark problems as split right-hand sides u' = F0(u) + F1(u).

F1 collects the stiff terms (treated implicitly) and carries a structured
Jacobian; F0 is evaluated explicitly.  All right-hand sides are reentrant
and side-effect free; problem objects are immutable in practice and safe to
share.  ``fold_implicit`` merges F0 into F1 for fully implicit reference
runs.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable

import numpy as np

from .jacobians import (
    Banded,
    BlockDiagonal2x2,
    Dense,
    JacobianStructure,
    Tridiagonal,
    add_in_union,
    fd_jacobian,
    union_structure,
)

__all__ = [
    "SplitProblem",
    "advection_reaction",
    "burgers",
    "dahlquist_split",
    "fold_implicit",
    "prothero_robinson",
    "van_der_pol",
]


@dataclass(frozen=True)
class SplitProblem:
    """A split ODE system with Jacobian structure and initial data.

    ``jac1`` returns the Jacobian of ``f1`` in the compact storage of
    ``structure1``; when it is None the integrator falls back to structured
    forward differences.  ``jac0``/``structure0`` are optional and used by
    the starting integrator and by ``fold_implicit``.
    """

    name: str
    m: int
    f0: Callable[[float, np.ndarray], np.ndarray]
    f1: Callable[[float, np.ndarray], np.ndarray]
    structure1: JacobianStructure
    u0: np.ndarray
    t_span: tuple[float, float]
    jac1: Callable[[float, np.ndarray], np.ndarray] | None = None
    jac0: Callable[[float, np.ndarray], np.ndarray] | None = None
    structure0: JacobianStructure | None = None
    exact: Callable[[float], np.ndarray] | None = None

    def jacobian1(self, t: float, u: np.ndarray, f1_of_u=None) -> np.ndarray:
        if self.jac1 is not None:
            return self.jac1(t, u)
        return fd_jacobian(self.structure1, self.f1, t, u, f1_of_u)


def fold_implicit(p: SplitProblem) -> SplitProblem:
    """Move F0 into F1 (fully implicit form), merging Jacobian structures.

    Used for stiff reference solutions where the whole right-hand side is
    solved implicitly.
    """
    union = union_structure(p.structure1, p.structure0 or Dense(p.m))

    def f1(t, u):
        return p.f0(t, u) + p.f1(t, u)

    def zero(t, u):
        return np.zeros_like(u)

    if p.jac0 is not None or p.structure0 is not None:
        s0 = p.structure0 or Dense(p.m)

        def jac(t, u):
            j1 = p.jacobian1(t, u)
            j0 = p.jac0(t, u) if p.jac0 is not None else fd_jacobian(s0, p.f0, t, u)
            return add_in_union(union, [(p.structure1, j1), (s0, j0)])
    else:
        jac = None   # structured finite differences on the sum

    return replace(p, name=p.name + "-implicit", f0=zero, f1=f1,
                   structure1=union, jac1=jac, jac0=None, structure0=None)


# ---------------------------------------------------------------------------

def prothero_robinson() -> SplitProblem:
    """Stiff linear test equation with exact solution (cos t, sin t).

    The implicit part pins y1 to cos(t) with stiffness 1e6; the explicit
    part couples the components mildly.  t in [0, 5].
    """
    def f0(t, y):
        return np.array([0.0, y[0] + y[1] - np.sin(t)])

    def f1(t, y):
        return np.array([-1e6 * (y[0] - np.cos(t)) + 1e3 * (y[1] - np.sin(t)) - np.sin(t),
                         0.0])

    J1 = np.array([[-1e6, 1e3], [0.0, 0.0]])
    J0 = np.array([[0.0, 0.0], [1.0, 1.0]])

    def exact(t):
        return np.array([np.cos(t), np.sin(t)])

    return SplitProblem(
        name="prothero_robinson", m=2, f0=f0, f1=f1,
        structure1=Dense(2), jac1=lambda t, y: J1,
        structure0=Dense(2), jac0=lambda t, y: J0,
        u0=exact(0.0), t_span=(0.0, 5.0), exact=exact)


def van_der_pol(mu: float = 1e6) -> SplitProblem:
    """Van der Pol oscillator in the stiff regime, y(0) = (2, 0), t in [0, 2]."""
    def f0(t, y):
        return np.array([y[1], 0.0])

    def f1(t, y):
        return np.array([0.0, mu * ((1.0 - y[0] ** 2) * y[1] - y[0])])

    def jac1(t, y):
        return np.array([[0.0, 0.0],
                         [mu * (-2.0 * y[0] * y[1] - 1.0), mu * (1.0 - y[0] ** 2)]])

    J0 = np.array([[0.0, 1.0], [0.0, 0.0]])

    return SplitProblem(
        name="van_der_pol", m=2, f0=f0, f1=f1,
        structure1=Dense(2), jac1=jac1,
        structure0=Dense(2), jac0=lambda t, y: J0,
        u0=np.array([2.0, 0.0]), t_span=(0.0, 2.0))


def _burgers_source_profile(x: np.ndarray) -> np.ndarray:
    # piecewise-linear hat: 0 up to -1/3, rises to 1 at x=0, falls to 0 at 2/3
    r = np.zeros_like(x)
    rise = (x >= -1/3) & (x <= 0)
    fall = (x >= 0) & (x <= 2/3)
    r[rise] = 3.0 * (x[rise] + 1/3)
    r[fall] = 1.5 * (2/3 - x[fall])
    return r


def burgers(dx: float = 1/400, nu: float = 0.1, advection: bool = True,
            source: bool = True) -> SplitProblem:
    """Viscous Burgers equation on [-1, 1] with a time-periodic source.

        u_t = nu u_xx + u u_x + phi(t, x),  u(0, x) = sin(pi (x+1)),

    homogeneous Dirichlet boundaries, t in [0, 2].  Central differences with
    spacing ``dx``; diffusion is implicit, advection and source explicit.
    The keyword switches exist for discretization tests.
    """
    n_cells = 2.0 / dx
    if abs(n_cells - round(n_cells)) > 1e-9:
        raise ValueError(f"dx={dx} does not divide the interval [-1, 1]")
    m = int(round(n_cells)) - 1
    x = -1.0 + dx * np.arange(1, m + 1)
    r = _burgers_source_profile(x)
    a = nu / dx ** 2

    def f1(t, u):
        out = -2.0 * u
        out[:-1] += u[1:]
        out[1:] += u[:-1]
        return a * out

    tri = Tridiagonal(m)
    Jdiff = tri.empty()
    Jdiff[0, 1:] = a
    Jdiff[1, :] = -2.0 * a
    Jdiff[2, :-1] = a

    def jac1(t, u):
        return Jdiff.copy()

    inv2dx = 1.0 / (2.0 * dx)

    def f0(t, u):
        out = np.zeros_like(u)
        if advection:
            du = np.empty_like(u)
            du[1:-1] = (u[2:] - u[:-2]) * inv2dx
            du[0] = u[1] * inv2dx
            du[-1] = -u[-2] * inv2dx
            out += u * du
        if source:
            out += r * np.sin(t)
        return out

    def jac0(t, u):
        J = tri.empty()
        if advection:
            du = np.empty_like(u)
            du[1:-1] = (u[2:] - u[:-2]) * inv2dx
            du[0] = u[1] * inv2dx
            du[-1] = -u[-2] * inv2dx
            J[1, :] = du
            J[0, 1:] = u[:-1] * inv2dx
            J[2, :-1] = -u[1:] * inv2dx
        return J

    return SplitProblem(
        name="burgers", m=m, f0=f0, f1=f1,
        structure1=tri, jac1=jac1, structure0=Tridiagonal(m), jac0=jac0,
        u0=np.sin(np.pi * (x + 1.0)), t_span=(0.0, 2.0))


def advection_reaction(m_nodes: int = 400, k1: float = 1e6) -> SplitProblem:
    """Linear advection with a stiff two-species reaction on (0, 1], t in [0, 1].

        u_t + u_x = -k1 u + k2 v,      v_t = k1 u - k2 v + 1,

    k2 = 2 k1, inflow u(0, t) = 1 - sin(12 t)^4, no boundary condition for v.
    Fourth-order centered differences in the interior with third-order
    upwind-biased closures at the boundary rows; the reaction is implicit
    (block-diagonal 2x2 Jacobian), advection and sources explicit.  State is
    interleaved (u_1, v_1, u_2, v_2, ...) over m uniform nodes x_j = j/m.
    """
    k2 = 2.0 * k1
    s2 = 1.0
    m = int(m_nodes)
    h = 1.0 / m
    x = h * np.arange(1, m + 1)

    def inflow(t):
        return 1.0 - np.sin(12.0 * t) ** 4

    def reaction(t, w):
        u = w[0::2]
        v = w[1::2]
        out = np.empty_like(w)
        out[0::2] = -k1 * u + k2 * v
        out[1::2] = k1 * u - k2 * v
        return out

    blocks = np.broadcast_to(np.array([[-k1, k2], [k1, -k2]]), (m, 2, 2)).copy()

    def jac1(t, w):
        return blocks.copy()

    c1, c2 = 1.0 / (12.0 * h), 1.0 / (6.0 * h)

    def ux_of(u, g):
        # d/dx by the 4th-order upwind-biased stencil (three points upstream,
        # one downstream); its dissipation keeps the advected front clean.
        # 3rd-order biased closures at the two inflow rows, one-sided
        # backward stencil at the outflow row.
        du = np.empty_like(u)
        du[3:-1] = (-u[:-4] + 6.0 * u[1:-3] - 18.0 * u[2:-2]
                    + 10.0 * u[3:-1] + 3.0 * u[4:]) * c1
        du[0] = (-2.0 * g - 3.0 * u[0] + 6.0 * u[1] - u[2]) * c2
        du[1] = (g - 6.0 * u[0] + 3.0 * u[1] + 2.0 * u[2]) * c2
        du[2] = (-g + 6.0 * u[0] - 18.0 * u[1] + 10.0 * u[2] + 3.0 * u[3]) * c1
        du[-1] = (-2.0 * u[-4] + 9.0 * u[-3] - 18.0 * u[-2] + 11.0 * u[-1]) * c2
        return du

    def f0(t, w):
        u = w[0::2]
        out = np.empty_like(w)
        out[0::2] = -ux_of(u, inflow(t))
        out[1::2] = s2
        return out

    # advection Jacobian: constant banded matrix in interleaved indexing
    adv = Banded(2 * m, 6, 4)
    Jadv = adv.empty()

    def put(i, j, val):
        Jadv[adv.u + i - j, j] = val

    for row in range(m):
        i = 2 * row
        if row == 0:
            stenc = {0: -3.0 * c2, 1: 6.0 * c2, 2: -c2}
        elif row == 1:
            stenc = {0: -6.0 * c2, 1: 3.0 * c2, 2: 2.0 * c2}
        elif row == 2:
            stenc = {0: 6.0 * c1, 1: -18.0 * c1, 2: 10.0 * c1, 3: 3.0 * c1}
        elif row == m - 1:
            stenc = {row - 3: -2.0 * c2, row - 2: 9.0 * c2, row - 1: -18.0 * c2, row: 11.0 * c2}
        else:
            stenc = {row - 3: -c1, row - 2: 6.0 * c1, row - 1: -18.0 * c1,
                     row: 10.0 * c1, row + 1: 3.0 * c1}
        for col, val in stenc.items():
            put(i, 2 * col, -val)
    Jadv.setflags(write=False)

    def jac0(t, w):
        return Jadv

    u0 = 1.0 + s2 * x
    v0 = (k1 / k2) * u0 + s2 / k2
    w0 = np.empty(2 * m)
    w0[0::2] = u0
    w0[1::2] = v0

    return SplitProblem(
        name="advection_reaction", m=2 * m, f0=f0, f1=reaction,
        structure1=BlockDiagonal2x2(2 * m), jac1=jac1,
        structure0=adv, jac0=jac0,
        u0=w0, t_span=(0.0, 1.0))


def dahlquist_split(lambda0: complex, lambda1: complex,
                    y0: complex = 1.0 + 0.0j, T: float = 1.0) -> SplitProblem:
    """Split scalar test equation y' = lambda0 y + lambda1 y as a real 2-system.

    The state encodes one complex number as (Re y, Im y); the exact solution
    is exp((lambda0 + lambda1) t) y0.
    """
    def real_mat(lam):
        return np.array([[lam.real, -lam.imag], [lam.imag, lam.real]])

    A0 = real_mat(complex(lambda0))
    A1 = real_mat(complex(lambda1))

    def exact(t):
        y = np.exp((complex(lambda0) + complex(lambda1)) * t) * complex(y0)
        return np.array([y.real, y.imag])

    return SplitProblem(
        name="dahlquist_split", m=2,
        f0=lambda t, y: A0 @ y, f1=lambda t, y: A1 @ y,
        structure1=Dense(2), jac1=lambda t, y: A1,
        structure0=Dense(2), jac0=lambda t, y: A0,
        u0=exact(0.0), t_span=(0.0, float(T)), exact=exact)
