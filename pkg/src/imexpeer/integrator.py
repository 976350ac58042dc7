"""Time stepping: stage solves, error estimation, step-size control, startup.

One step of the scheme advances the stage block W_{n-1} -> W_n through

    W_n = P W_{n-1} + dt_n (Qhat F0(W_{n-1}) + Rhat F0(W_n)
                            + Q F1(W_{n-1}) + R F1(W_n)),

solved stage by stage: the strictly lower triangular Rhat/R parts couple
only to already-computed stages, so each stage i requires a single
m-dimensional nonlinear solve w = rhs_i + dt*gamma*F1(t_i, w), handled by a
simplified Newton iteration with a structured, reused Jacobian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from .coeffs import SigmaCoefficients, assemble, vandermonde_set
from .problems import SplitProblem, fold_implicit
from .tableau import PeerTableau

__all__ = [
    "Controller",
    "IntegrationError",
    "IntegrationResult",
    "StageBlock",
    "StartupError",
    "Stats",
    "StepFailure",
    "control",
    "error_estimate",
    "integrate",
    "start",
    "step",
]


class StepFailure(RuntimeError):
    """A stage solve did not converge; the caller shortens the step."""


class StartupError(RuntimeError):
    """The starting procedure failed (usually: shrink tau)."""


class IntegrationError(RuntimeError):
    """Unrecoverable failure of an integration run."""


@dataclass
class StageBlock:
    """Stage vectors of one step with cached right-hand-side values.

    Stage i approximates the solution at ``t + c_i * dt``; the last stage
    sits at ``t + dt`` because c_s = 1.
    """

    t: float
    dt: float
    stages: np.ndarray      # (s, m)
    f0: np.ndarray          # (s, m)
    f1: np.ndarray          # (s, m)

    @property
    def t_end(self) -> float:
        return self.t + self.dt

    @property
    def last(self) -> np.ndarray:
        return self.stages[-1]


@dataclass
class Controller:
    """Error-control configuration and safety bounds."""

    atol: float | np.ndarray = 1e-6
    rtol: float = 1e-6
    delta: float = 0.0          # estimator weighting: 0 = old function values
    tol: float = 1.0            # acceptance threshold for the weighted error
    fac_min: float = 0.8
    fac_max: float = 1.2
    safety: float = 0.9
    dt_max: float = np.inf
    dt_min: float | None = None     # default 1e-14 * (T - t0)
    # the 0.8 clamp shrinks dt slowly, so traversing an initial transient
    # layer can take dozens of consecutive rejections (van der Pol with
    # tau = atol needs ~70); the cap only guards against divergence
    max_rejects: int = 300
    newton_kappa: float = 0.01
    newton_max_iter: int = 10


@dataclass
class Stats:
    n_accept: int = 0
    n_reject: int = 0
    n_f0: int = 0
    n_f1: int = 0
    n_newton: int = 0
    n_jac: int = 0
    n_lu: int = 0

    def row(self) -> dict:
        return dict(self.__dict__)


@dataclass
class IntegrationResult:
    t: float
    y: np.ndarray
    stats: Stats
    block: StageBlock
    accepted_dts: np.ndarray
    status: str = "completed"
    history: list | None = None     # (t_end, dt, err, accepted) when recorded


def _scaled_norm(r, wref, atol, rtol):
    return float(np.max(np.abs(r) / (atol + rtol * np.abs(wref))))


class _Newton:
    """Simplified Newton for the stage equations with Jacobian reuse.

    The iteration matrix I - dt*gamma*J uses the Jacobian of F1 evaluated at
    the first stage's predictor; it is kept across stages and accepted steps
    until the step size moves by more than 20 percent, convergence degrades
    (rate above 0.5), or a stage fails.  Factorizations are cached per step
    size so alternating-step patterns reuse them.
    """

    def __init__(self, problem: SplitProblem, gamma: float, ctrl: Controller,
                 stats: Stats, f1):
        self.problem = problem
        self.gamma = gamma
        self.ctrl = ctrl
        self.stats = stats
        self.f1 = f1
        self.J = None
        self.J_dt = None
        self.degraded = True    # force evaluation on first use
        self._lu = {}

    def refresh(self, t, w, f1_of_w=None):
        self.J = self.problem.jacobian1(t, w, f1_of_w)
        self.stats.n_jac += 1
        self.degraded = False
        self._lu.clear()

    def ensure(self, t, w, dt):
        if self.J is None or self.degraded or \
                (self.J_dt is not None and abs(dt - self.J_dt) > 0.2 * self.J_dt):
            self.refresh(t, w)
            self.J_dt = dt

    def factor(self, dt):
        fac = self._lu.get(dt)
        if fac is None:
            fac = self.problem.structure1.factor(1.0, -dt * self.gamma, self.J)
            self.stats.n_lu += 1
            if len(self._lu) >= 4:
                self._lu.clear()
            self._lu[dt] = fac
        return fac

    def _tolerance(self, w, rhs, hg, f1w):
        # controller-scaled tolerance plus a roundoff floor built from the
        # magnitudes that enter the residual evaluation
        ctrl = self.ctrl
        floor = 16.0 * np.finfo(float).eps * (
            np.abs(w) + np.abs(rhs) + abs(hg) * np.abs(f1w))
        return np.maximum(ctrl.newton_kappa * (ctrl.atol + ctrl.rtol * np.abs(w)),
                          floor)

    def solve_stage(self, t, rhs, w0, dt):
        """Solve w = rhs + dt*gamma*F1(t, w) starting from predictor w0.

        Convergence accepts on either a small residual or a small Newton
        increment; the increment test is what terminates on stiff problems
        whose residual carries amplified evaluation noise.  Returns
        (w, f1(t, w)); raises StepFailure after newton_max_iter iterations
        with at most one Jacobian refresh.
        """
        ctrl = self.ctrl
        hg = dt * self.gamma
        refreshed = False
        w = w0.copy()
        f1w = self.f1(t, w)
        res = rhs + hg * f1w - w
        prev_ratio = np.inf
        it = 0
        while True:
            try:
                fac = self.factor(dt)
                dw = fac.solve(res)
            except np.linalg.LinAlgError as exc:
                raise StepFailure(f"singular stage system at t={t}") from exc
            w += dw
            f1w = self.f1(t, w)
            res = rhs + hg * f1w - w
            it += 1
            self.stats.n_newton += 1
            tol = self._tolerance(w, rhs, hg, f1w)
            res_ratio = float(np.max(np.abs(res) / tol))
            inc_ratio = float(np.max(np.abs(dw) / tol))
            ratio = min(res_ratio, inc_ratio if it > 1 else np.inf)
            if not math.isfinite(ratio):
                ratio = np.inf
            if ratio <= 1.0:
                if ratio > 0.5 * prev_ratio and prev_ratio < np.inf:
                    self.degraded = True
                return w, f1w
            if it >= ctrl.newton_max_iter or ratio > 4.0 * prev_ratio:
                if not refreshed:
                    refreshed = True
                    self.refresh(t, w, f1w)
                    self.J_dt = dt
                    w = w0.copy()
                    f1w = self.f1(t, w)
                    res = rhs + hg * f1w - w
                    prev_ratio = np.inf
                    it = 0
                    continue
                raise StepFailure(f"stage Newton did not converge at t={t}")
            prev_ratio = ratio


def step(problem: SplitProblem, tab: PeerTableau, coef: SigmaCoefficients,
         prev: StageBlock, dt: float, newton: _Newton, f0) -> StageBlock:
    """Advance one step of length dt from the previous stage block."""
    s = tab.s
    c = tab.c
    # old-stage contributions of all stages at once
    base = tab.P @ prev.stages + dt * (coef.Qhat @ prev.f0 + coef.Q @ prev.f1)
    stages = np.empty_like(prev.stages)
    f0_new = np.empty_like(prev.f0)
    f1_new = np.empty_like(prev.f1)
    t_new = prev.t_end
    predictor = coef.E1 @ prev.stages
    for i in range(s):
        t_i = t_new + c[i] * dt
        rhs = base[i].copy()
        if i:
            rhs += dt * (coef.Rhat[i, :i] @ f0_new[:i] + tab.R[i, :i] @ f1_new[:i])
        w0 = predictor[i] + tab.E2[i, :i] @ stages[:i] if i else predictor[i]
        if i == 0:
            newton.ensure(t_i, w0, dt)
        stages[i], f1_new[i] = newton.solve_stage(t_i, rhs, w0, dt)
        f0_new[i] = f0(t_i, stages[i])
    return StageBlock(t=t_new, dt=dt, stages=stages, f0=f0_new, f1=f1_new)


@lru_cache(maxsize=64)
def _estimator_weights(tab: PeerTableau):
    vd = vandermonde_set(tab)
    es = np.zeros(tab.s)
    es[-1] = math.factorial(tab.s - 1)
    return np.linalg.solve(vd.V0.T, es), np.linalg.solve(vd.V1.T, es)


def error_estimate(prev: StageBlock, curr: StageBlock, tab: PeerTableau,
                   sigma: float, delta: float = 0.0) -> np.ndarray:
    """Local error estimate ~ dt^s u^(s)(t_n) from cached function values.

    est = dt_n * sum_i(alpha_i F(w_{n,i}) + beta_i F(w_{n-1,i})) with weights
    that annihilate polynomial data of degree below s; delta blends new
    (delta=1) against old (delta=0) function values.
    """
    s = tab.s
    alpha0, beta0 = _estimator_weights(tab)
    est = np.zeros_like(curr.stages[0])
    if delta != 0.0:
        est += (delta * alpha0) @ (curr.f0 + curr.f1)
    if delta != 1.0:
        est += ((1.0 - delta) * sigma ** (s - 1) * beta0) @ (prev.f0 + prev.f1)
    return curr.dt * est


@dataclass(frozen=True)
class Decision:
    accept: bool
    err: float
    dt_next: float      # next step if accepted, retry step if rejected


def control(est: np.ndarray, curr: StageBlock, prev: StageBlock,
            ctrl: Controller, remaining: float, s: int) -> Decision:
    """Weighted-error test and new step size with clamp and end adjustment.

    err is the max of |est_i| over atol + rtol*(delta |w_n,s,i| +
    (1-delta) |w_{n-1},s,i|); the step factor is clamped to [0.8, 1.2] and
    the result stretched so the remaining interval is an integer number of
    steps.  ``remaining`` is measured from the end of the current step when
    accepting and from its start when rejecting.
    """
    wref = ctrl.delta * np.abs(curr.last) + (1.0 - ctrl.delta) * np.abs(prev.last)
    err = float(np.max(np.abs(est) / (ctrl.atol + ctrl.rtol * wref)))
    fac = ctrl.safety * err ** (-1.0 / s) if err > 0 else ctrl.fac_max
    fac = min(ctrl.fac_max, max(ctrl.fac_min, fac))
    dt_new = fac * curr.dt
    accept = err <= ctrl.tol
    rem = remaining if accept else remaining + curr.dt
    if rem > 0:
        dt_new = rem / math.floor(1.0 + rem / dt_new)
    return Decision(accept=accept, err=err, dt_next=dt_new)


# ---------------------------------------------------------------------------
# Starting procedure

_SDIRK_GAMMA = 0.435866521508459
_SDIRK_C = np.array([_SDIRK_GAMMA, (1.0 + _SDIRK_GAMMA) / 2.0, 1.0])
_SDIRK_A = np.array([
    [_SDIRK_GAMMA, 0.0, 0.0],
    [(1.0 - _SDIRK_GAMMA) / 2.0, _SDIRK_GAMMA, 0.0],
    [-1.5 * _SDIRK_GAMMA ** 2 + 4.0 * _SDIRK_GAMMA - 0.25,
     1.5 * _SDIRK_GAMMA ** 2 - 5.0 * _SDIRK_GAMMA + 1.25, _SDIRK_GAMMA],
])


class _HermitePath:
    """Piecewise cubic Hermite interpolant through (t_k, y_k, f_k)."""

    def __init__(self, ts, ys, fs):
        self.ts = ts
        self.ys = ys
        self.fs = fs

    def __call__(self, t: float) -> np.ndarray:
        ts = self.ts
        k = min(max(int(np.searchsorted(ts, t) - 1), 0), len(ts) - 2)
        h = ts[k + 1] - ts[k]
        th = (t - ts[k]) / h
        h00 = (1 + 2 * th) * (1 - th) ** 2
        h10 = th * (1 - th) ** 2
        h01 = th ** 2 * (3 - 2 * th)
        h11 = th ** 2 * (th - 1)
        return (h00 * self.ys[k] + h * h10 * self.fs[k]
                + h01 * self.ys[k + 1] + h * h11 * self.fs[k + 1])


def _sdirk_path(problem: SplitProblem, t0: float, tau: float, n_sub: int,
                ctrl: Controller, stats: Stats) -> _HermitePath:
    """Integrate the full right-hand side over [t0, t0+tau] with an L-stable
    third-order SDIRK scheme and return a dense-output path."""
    fp = fold_implicit(problem)

    def f(t, y):
        stats.n_f0 += 1
        stats.n_f1 += 1
        return fp.f1(t, y)

    h = tau / n_sub
    y = problem.u0.astype(float).copy()
    ts = [t0]
    ys = [y.copy()]
    fs = [f(t0, y)]
    for k in range(n_sub):
        tk = t0 + k * h
        J = fp.jacobian1(tk, y)
        stats.n_jac += 1
        fac = fp.structure1.factor(1.0, -h * _SDIRK_GAMMA, J)
        stats.n_lu += 1
        kvals = np.empty((3, len(y)))
        z = y.copy()
        for i in range(3):
            t_i = tk + _SDIRK_C[i] * h
            base = y + h * (_SDIRK_A[i, :i] @ kvals[:i]) if i else y.copy()
            w = z.copy()
            for it in range(25):
                fw = f(t_i, w)
                res = base + h * _SDIRK_GAMMA * fw - w
                if _scaled_norm(res, w, min(np.min(ctrl.atol), 1e-8),
                                min(ctrl.rtol, 1e-8)) <= 1e-2:
                    break
                try:
                    w += fac.solve(res)
                except np.linalg.LinAlgError as exc:
                    raise StartupError("singular system in starting integrator; "
                                       "reduce tau") from exc
                stats.n_newton += 1
            else:
                raise StartupError("starting integrator Newton did not converge; "
                                   "reduce tau")
            kvals[i] = fw
            z = w
        y = w          # stiffly accurate: last stage is the step value
        ts.append(tk + h)
        ys.append(y.copy())
        fs.append(kvals[2])
    return _HermitePath(np.array(ts), np.array(ys), np.array(fs))


def start(problem: SplitProblem, tau: float, tab: PeerTableau,
          ctrl: Controller | None = None, stats: Stats | None = None,
          n_sub: int = 8):
    """Build the starting stage block over a window of length tau.

    Returns (t1, dt0, block0): the base time of the first computed step, the
    starting step size, and the initial stage block.  The stage whose node is
    the smallest equals the initial value exactly.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    ctrl = ctrl or Controller()
    stats = stats or Stats()
    c_min = float(np.min(tab.c))
    c_max = float(np.max(tab.c))
    span = c_max - c_min
    dt0 = tau / span
    t0 = problem.t_span[0]
    t1 = t0 + (1.0 - c_min) / span * tau
    path = _sdirk_path(problem, t0, tau, n_sub, ctrl, stats)
    stages = np.empty((tab.s, problem.m))
    f0c = np.empty_like(stages)
    f1c = np.empty_like(stages)
    base = t1 - dt0
    for i, ci in enumerate(tab.c):
        t_i = t0 + (ci - c_min) / span * tau
        stages[i] = problem.u0 if ci == c_min else path(t_i)
        f0c[i] = problem.f0(t_i, stages[i])
        f1c[i] = problem.f1(t_i, stages[i])
        stats.n_f0 += 1
        stats.n_f1 += 1
    return t1, dt0, StageBlock(t=base, dt=dt0, stages=stages, f0=f0c, f1=f1c)


def _exact_block(problem: SplitProblem, t_base: float, dt: float,
                 tab: PeerTableau, stats: Stats) -> StageBlock:
    if problem.exact is None:
        raise ValueError("prescribed-step mode needs an exact solution "
                         "or a starting procedure")
    stages = np.empty((tab.s, problem.m))
    f0c = np.empty_like(stages)
    f1c = np.empty_like(stages)
    for i, ci in enumerate(tab.c):
        t_i = t_base + ci * dt
        stages[i] = problem.exact(t_i)
        f0c[i] = problem.f0(t_i, stages[i])
        f1c[i] = problem.f1(t_i, stages[i])
        stats.n_f0 += 1
        stats.n_f1 += 1
    return StageBlock(t=t_base, dt=dt, stages=stages, f0=f0c, f1=f1c)


def integrate(problem: SplitProblem, tab: PeerTableau,
              ctrl: Controller | None = None, tau: float | None = None,
              steps: Sequence[float] | None = None,
              record: bool = False) -> IntegrationResult:
    """Run one integration to the final time of ``problem.t_span``.

    Adaptive mode (``steps=None``) starts from a window of length ``tau``
    (default sqrt(atol)) and controls the step size with the weighted error
    estimate.  Prescribed mode executes exactly the given step sequence,
    taking the starting block from the exact solution with dt0 = steps[0];
    no error control is applied.
    """
    ctrl = ctrl or Controller()
    stats = Stats()
    t0, T = problem.t_span
    horizon = T - t0

    def f0(t, u):
        stats.n_f0 += 1
        return problem.f0(t, u)

    def f1(t, u):
        stats.n_f1 += 1
        return problem.f1(t, u)

    newton = _Newton(problem, tab.gamma, ctrl, stats, f1)
    accepted = []
    history = [] if record else None

    if steps is not None:
        steps = np.asarray(steps, float)
        if len(steps) < 2:
            raise ValueError("a prescribed run needs at least two step sizes")
        prev = _exact_block(problem, t0, steps[0], tab, stats)
        dt_prev = steps[0]
        last_sigma = None
        coef = None
        for dt in steps[1:]:
            sigma = dt / dt_prev
            if sigma != last_sigma:
                coef = assemble(tab, sigma)
                last_sigma = sigma
            prev = step(problem, tab, coef, prev, dt, newton, f0)
            stats.n_accept += 1
            accepted.append(dt)
            dt_prev = dt
        return IntegrationResult(t=prev.t_end, y=prev.last.copy(), stats=stats,
                                 block=prev, accepted_dts=np.array(accepted))

    if tau is None:
        tau = float(np.sqrt(np.min(ctrl.atol)))
    dt_min = ctrl.dt_min if ctrl.dt_min is not None else 1e-14 * horizon
    try:
        t1, dt0, prev = start(problem, tau, tab, ctrl, stats)
    except StartupError:
        raise
    dt_prev = dt0
    # first computed step: same length as the starting block, end-adjusted
    remaining = T - t1
    dt = remaining / math.floor(1.0 + remaining / dt0) if remaining > 0 else dt0
    rejects = 0
    last_sigma = None
    coef = None
    while True:
        remaining = T - prev.t_end
        if remaining <= 4.0 * np.finfo(float).eps * max(abs(T), 1.0):
            break
        dt = min(dt, remaining, ctrl.dt_max)
        if dt < dt_min:
            raise IntegrationError(f"step size underflow at t={prev.t_end:.6g}")
        sigma = dt / dt_prev
        if sigma != last_sigma:
            coef = assemble(tab, sigma)
            last_sigma = sigma
        try:
            curr = step(problem, tab, coef, prev, dt, newton, f0)
            failed = False
        except StepFailure:
            failed = True
        if failed:
            stats.n_reject += 1
            rejects += 1
            if rejects > ctrl.max_rejects:
                raise IntegrationError(f"too many rejected steps at t={prev.t_end:.6g}")
            dt = 0.5 * dt
            continue
        est = error_estimate(prev, curr, tab, sigma, ctrl.delta)
        dec = control(est, curr, prev, ctrl, T - curr.t_end, tab.s)
        if history is not None:
            history.append((curr.t_end, dt, dec.err, dec.accept))
        if dec.accept:
            stats.n_accept += 1
            accepted.append(dt)
            prev = curr
            dt_prev = dt
            dt = dec.dt_next
            rejects = 0
        else:
            stats.n_reject += 1
            rejects += 1
            if rejects > ctrl.max_rejects:
                raise IntegrationError(f"too many rejected steps at t={prev.t_end:.6g}")
            dt = dec.dt_next
    result = IntegrationResult(t=prev.t_end, y=prev.last.copy(), stats=stats,
                               block=prev, accepted_dts=np.array(accepted))
    if history is not None:
        result.history = history
    return result
