"""Step-size-ratio dependent coefficients and order-condition checks.

Everything here is a pure function of a :class:`~imexpeer.tableau.PeerTableau`
and the ratio ``sigma = dt_n / dt_{n-1}``.  The implicit weight update

    Q(sigma) = ((C V0 - R V0 D) S - P (C - I) V1 / sigma) (V1 D)^{-1}

enforces stage order s for any sigma > 0; the cross-step extrapolation

    E1(sigma) = (I - E2) V0 S V1^{-1}

reconstructs degree s-1 polynomial data from the previous stages.  The
``check_superconvergence`` routine evaluates the algebraic conditions under
which the extra order s+1 survives arbitrary step-size changes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from math import factorial

import numpy as np

from .tableau import PeerTableau

__all__ = [
    "ConditionReport",
    "SigmaCoefficients",
    "VandermondeSet",
    "assemble",
    "check_stage_order",
    "check_superconvergence",
    "compute_E1",
    "compute_Q",
    "defect",
    "error_constants",
    "extrapolation_defect",
    "left_null_vector",
    "sigma_polynomial",
    "tilde_c",
    "vandermonde_set",
    "CONDITION_MODES",
]


@dataclass(frozen=True)
class VandermondeSet:
    """Node-based matrices shared by all coefficient formulas.

    ``V0[i,j] = c_i^j`` and ``V1[i,j] = (c_i - 1)^j`` for j = 0..s-1; both are
    invertible because the nodes are distinct.
    """

    V0: np.ndarray
    V1: np.ndarray
    C: np.ndarray
    D: np.ndarray
    Dtilde: np.ndarray

    @property
    def s(self) -> int:
        return self.V0.shape[0]

    def S(self, sigma: float) -> np.ndarray:
        """diag(1, sigma, ..., sigma^{s-1})."""
        return np.diag(sigma ** np.arange(self.s, dtype=float))


@lru_cache(maxsize=64)
def vandermonde_set(t: PeerTableau) -> VandermondeSet:
    s = t.s
    V0 = np.vander(t.c, N=s, increasing=True)
    V1 = np.vander(t.c - 1.0, N=s, increasing=True)
    D = np.diag(np.arange(1, s + 1, dtype=float))
    Dtilde = (s + 1) * np.diag(1.0 / np.arange(1, s + 1)) - np.eye(s)
    return VandermondeSet(V0=V0, V1=V1, C=np.diag(t.c), D=D, Dtilde=Dtilde)


def _check_sigma(sigma: float) -> float:
    sigma = float(sigma)
    if not sigma > 0:
        raise ValueError(f"step-size ratio must be positive, got {sigma}")
    return sigma


def compute_Q(t: PeerTableau, sigma: float) -> np.ndarray:
    """Implicit old-stage weights at ratio ``sigma`` (stage order s by construction)."""
    sigma = _check_sigma(sigma)
    v = vandermonde_set(t)
    s = t.s
    lhs = (v.C @ v.V0 - t.R @ v.V0 @ v.D) @ v.S(sigma) \
        - (t.P @ (v.C - np.eye(s)) @ v.V1) / sigma
    return np.linalg.solve((v.V1 @ v.D).T, lhs.T).T


def compute_E1(t: PeerTableau, sigma: float) -> np.ndarray:
    """Cross-step extrapolation weights at ratio ``sigma``."""
    sigma = _check_sigma(sigma)
    v = vandermonde_set(t)
    rhs = (np.eye(t.s) - t.E2) @ v.V0 @ v.S(sigma)
    return np.linalg.solve(v.V1.T, rhs.T).T


@dataclass(frozen=True)
class SigmaCoefficients:
    """All ratio-dependent matrices needed for one step at ratio ``sigma``."""

    sigma: float
    Q: np.ndarray
    E1: np.ndarray
    Qhat: np.ndarray   # Q + R E1: explicit-part weights on old stages
    Rhat: np.ndarray   # R E2: explicit-part weights on current stages


def assemble(t: PeerTableau, sigma: float) -> SigmaCoefficients:
    """Compute Q, E1 and the derived explicit-part matrices at ``sigma``."""
    Q = compute_Q(t, sigma)
    E1 = compute_E1(t, sigma)
    Rhat = t.R @ t.E2
    # R E2 is strictly lower triangular exactly; zero out roundoff fill-in
    Rhat[np.triu_indices(t.s)] = 0.0
    return SigmaCoefficients(sigma=float(sigma), Q=Q, E1=E1, Qhat=Q + t.R @ E1,
                             Rhat=Rhat)


def defect(t: PeerTableau, sigma: float, j: int) -> np.ndarray:
    """Stage-order defect d_j(sigma); vanishes for j = 1..s.

    d_j = (c^j - P (c-e)^j / sigma^j - j Q(sigma) (c-e)^{j-1} / sigma^{j-1}
           - j R c^{j-1}) / j!
    """
    if j < 1:
        raise ValueError("defect index must be >= 1")
    sigma = _check_sigma(sigma)
    c = t.c
    e = np.ones_like(c)
    Q = compute_Q(t, sigma)
    val = (c ** j
           - t.P @ (c - e) ** j / sigma ** j
           - j * (Q @ (c - e) ** (j - 1)) / sigma ** (j - 1)
           - j * (t.R @ c ** (j - 1)))
    return val / factorial(j)


def extrapolation_defect(t: PeerTableau, sigma: float, j: int) -> np.ndarray:
    """Extrapolation defect l_j(sigma); vanishes for j = 0..s-1."""
    if j < 0:
        raise ValueError("extrapolation defect index must be >= 0")
    sigma = _check_sigma(sigma)
    c = t.c
    e = np.ones_like(c)
    E1 = compute_E1(t, sigma)
    val = (np.eye(t.s) - t.E2) @ c ** j - E1 @ (c - e) ** j / sigma ** j
    return val / factorial(j)


def check_stage_order(t: PeerTableau, sigmas=None, tol: float = 1e-11) -> dict:
    """Worst defect norms over a sigma sweep (j = 1..s and l-defects 0..s-1)."""
    if sigmas is None:
        sigmas = np.geomspace(0.2, 5.0, 20)
    worst_d = 0.0
    worst_l = 0.0
    for sg in sigmas:
        for j in range(1, t.s + 1):
            worst_d = max(worst_d, np.max(np.abs(defect(t, sg, j))))
        for j in range(t.s):
            worst_l = max(worst_l, np.max(np.abs(extrapolation_defect(t, sg, j))))
    return {"max_defect": worst_d, "max_extrapolation_defect": worst_l,
            "ok": worst_d <= tol and worst_l <= tol}


def left_null_vector(t: PeerTableau, tol: float = 1e-8) -> np.ndarray:
    """Unit vector v with (I - P^T) v = 0, first nonzero component positive.

    Raises ``ValueError`` when the null space of I - P^T is not one-dimensional
    (the method would not be zero-stable).
    """
    A = np.eye(t.s) - t.P.T
    _, sv, Vt = np.linalg.svd(A)
    if t.s > 1 and sv[-2] <= tol:
        raise ValueError("left null space of I - P^T is degenerate "
                         f"(second singular value {sv[-2]:.2e})")
    v = Vt[-1]
    lead = np.flatnonzero(np.abs(v) > tol * np.max(np.abs(v)))[0]
    if v[lead] < 0:
        v = -v
    return v / np.linalg.norm(v)


def tilde_c(t: PeerTableau) -> np.ndarray:
    """V1^{-1} (c-e)^s; first component vanishes because c_s = 1."""
    v = vandermonde_set(t)
    return np.linalg.solve(v.V1, (t.c - 1.0) ** t.s)


def sigma_polynomial(t: PeerTableau, v: np.ndarray | None = None) -> np.ndarray:
    """Coefficients h_0..h_{s+1} of v^T d_{s+1}(sigma) as a polynomial in 1/sigma.

    Requires v^T P = v^T (v defaults to the left null vector).  Index j holds
    the coefficient of sigma^{-j}.
    """
    if v is None:
        v = left_null_vector(t)
    s = t.s
    c = t.c
    vd = vandermonde_set(t)
    ct = tilde_c(t)
    h = np.zeros(s + 2)
    h[0] = v @ (c ** (s + 1) - (s + 1) * t.R @ c ** s) / factorial(s + 1)
    vt = (v @ (t.R @ vd.V0 - vd.C @ vd.V0 @ np.diag(1.0 / np.arange(1, s + 1)))) / factorial(s)
    for j in range(1, s + 1):
        h[j] = vt[s - j] * ct[s - j]
    h[s + 1] = v @ (vd.C - np.eye(s)) @ vd.V1 @ vd.Dtilde @ ct / factorial(s + 1)
    return h


CONDITION_MODES = ("implicit-variable", "explicit-variable", "imex-variable",
                   "imex-relaxed")


@dataclass(frozen=True)
class ConditionReport:
    """Residuals of one super-convergence condition set."""

    method: str
    mode: str
    residuals: dict[str, float]
    tol: float

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values())

    @property
    def passed(self) -> bool:
        return self.max_residual <= self.tol

    def __str__(self):
        lines = [f"{self.method} [{self.mode}]: "
                 f"{'PASS' if self.passed else 'FAIL'} (tol {self.tol:g})"]
        lines += [f"  {k:22s} {r:.3e}" for k, r in self.residuals.items()]
        return "\n".join(lines)


def check_superconvergence(t: PeerTableau, mode: str,
                           tol: float = 1e-9) -> ConditionReport:
    """Evaluate one of the algebraic condition sets for order s+1.

    Modes
    -----
    implicit-variable
        The implicit method keeps order s+1 under step-size changes.
    explicit-variable
        The extrapolated explicit method keeps order s+1.
    imex-variable
        The combined scheme keeps order s+1 for variable steps (full set).
    imex-relaxed
        Explicit part variable-step super-convergent, implicit part only at
        constant steps (the weaker set satisfied by the *sve methods).
    """
    if mode not in CONDITION_MODES:
        raise ValueError(f"unknown mode {mode!r}; choose from {CONDITION_MODES}")
    s = t.s
    c = t.c
    e = np.ones(s)
    I = np.eye(s)
    v = left_null_vector(t)
    vd = vandermonde_set(t)
    ct = tilde_c(t)
    res: dict[str, float] = {}

    res["range_condition"] = abs(v @ (vd.C - I) @ vd.V1 @ vd.Dtilde @ ct)
    if mode in ("implicit-variable", "imex-variable"):
        for j in range(2, s + 2):
            res[f"implicit_moment_{j}"] = abs(v @ (c ** j - j * t.R @ c ** (j - 1)))
    if mode in ("explicit-variable", "imex-relaxed"):
        for j in range(2, s + 2):
            res[f"explicit_moment_{j}"] = abs(v @ (c ** j - j * t.R @ t.E2 @ c ** (j - 1)))
    if mode == "imex-variable":
        for j in range(2, s + 2):
            res[f"coupling_{j}"] = abs(v @ t.R @ (t.E2 - I) @ c ** (j - 1))
    if mode == "imex-relaxed":
        res["constant_step_residual"] = abs(
            v @ t.R @ (I - t.E2) @ (c ** s - vd.V0 @ np.linalg.solve(vd.V1, (c - e) ** s)))
    return ConditionReport(method=t.name, mode=mode, residuals=res, tol=tol)


def error_constants(t: PeerTableau, sigma: float = 1.0) -> tuple[float, float]:
    """Leading error constants (Euclidean norm of d_{s+1} and of R l_s).

    The 2-norm reproduces the reference characteristics of the shipped
    methods; evaluated at sigma = 1 (constant steps).
    """
    d = defect(t, sigma, t.s + 1)
    rl = t.R @ extrapolation_defect(t, sigma, t.s)
    return float(np.linalg.norm(d)), float(np.linalg.norm(rl))
