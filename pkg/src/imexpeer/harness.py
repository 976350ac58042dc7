"""Experiment orchestration: convergence studies, work-precision, verification.

Ties the method data, the integrator and the benchmark problems together and
emits CSV-ready rows.  Reference solutions are produced by folding the split
right-hand side into a fully implicit system and integrating at a tight
tolerance; they are stored as headered CSV vectors with a content hash.
"""

from __future__ import annotations

import hashlib
import io
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import stability
from .coeffs import check_stage_order, check_superconvergence, error_constants
from .integrator import Controller, IntegrationError, StepFailure, integrate
from .problems import (
    SplitProblem,
    advection_reaction,
    burgers,
    dahlquist_split,
    fold_implicit,
    prothero_robinson,
    van_der_pol,
)
from .tableau import PeerTableau, builtin_tableau, check_zero_stability

__all__ = [
    "ConvergenceReport",
    "MethodReport",
    "ReferenceSolution",
    "fit_order",
    "global_error",
    "load_reference",
    "make_reference",
    "problem_by_name",
    "run_sigma_study",
    "run_work_precision",
    "save_reference",
    "sigma_step_sequence",
    "verify_method",
]


def global_error(Y: np.ndarray, Yhat: np.ndarray) -> float:
    """Scaled maximum error max_i |Y_i - Yhat_i| / (1 + |Y_i|)."""
    Y = np.asarray(Y)
    return float(np.max(np.abs(Y - Yhat) / (1.0 + np.abs(Y))))


def sigma_step_sequence(dt: float, sigma: float, T: float) -> np.ndarray:
    """Alternating step sequence with mean step dt covering [0, T].

    dt_1 = 2 dt / (1 + sigma), then dt_i = dt_{i-1} * sigma^{(-1)^i}; the
    last entry absorbs the roundoff so the sum is exactly T.
    """
    n = int(round(T / dt))
    if n < 2:
        raise ValueError("step sequence needs at least two steps")
    dts = np.empty(n)
    dts[0] = 2.0 * dt / (1.0 + sigma)
    for i in range(1, n):
        dts[i] = dts[i - 1] * sigma ** ((-1) ** (i + 1))
    dts[-1] += T - dts.sum()
    return dts


def fit_order(dts, errs, floor: float = 0.0) -> float:
    """Least-squares slope of log(err) against log(dt) above the floor."""
    dts = np.asarray(dts, float)
    errs = np.asarray(errs, float)
    keep = np.isfinite(errs) & (errs > floor)
    if keep.sum() < 2:
        return float("nan")
    return float(np.polyfit(np.log(dts[keep]), np.log(errs[keep]), 1)[0])


@dataclass
class ConvergenceReport:
    """Errors of one sigma-pattern study over a list of mean step sizes."""

    method: str
    problem: str
    sigma: float
    entries: list            # (dt, error)
    pair_orders: list        # observed order between consecutive entries
    fitted_slope: float
    reference_accuracy: float

    def rows(self):
        for k, (dt, err) in enumerate(self.entries):
            yield {
                "method": self.method, "problem": self.problem,
                "sigma": self.sigma, "dt": dt, "error": err,
                "pair_order": self.pair_orders[k - 1] if k else float("nan"),
                "fitted_slope": self.fitted_slope,
            }


def run_sigma_study(tab: PeerTableau, problem: SplitProblem, sigma: float,
                    dt_list, reference: np.ndarray | None = None,
                    reference_accuracy: float = 1e-15,
                    newton_tol: float = 1e-12) -> ConvergenceReport:
    """Prescribed-step convergence study with the alternating sigma pattern.

    Errors are measured at the final time against the problem's exact
    solution (or the given reference vector).  Unstable runs record an
    infinite error instead of raising.
    """
    t0, T = problem.t_span
    if reference is None:
        if problem.exact is None:
            raise ValueError("sigma study needs an exact solution or reference")
        Y = problem.exact(T)
    else:
        Y = np.asarray(reference)
    entries = []
    for dt in dt_list:
        steps = sigma_step_sequence(dt, sigma, T - t0)
        ctrl = Controller(atol=newton_tol, rtol=newton_tol)
        try:
            res = integrate(problem, tab, ctrl, steps=steps)
            err = global_error(Y, res.y)
            if not math.isfinite(err):
                err = float("inf")
        except (StepFailure, IntegrationError, FloatingPointError):
            err = float("inf")
        entries.append((float(dt), err))
    orders = []
    for (d1, e1), (d2, e2) in zip(entries, entries[1:]):
        if e1 > 0 and e2 > 0 and math.isfinite(e1) and math.isfinite(e2):
            orders.append(math.log(e1 / e2) / math.log(d1 / d2))
        else:
            orders.append(float("nan"))
    slope = fit_order([d for d, _ in entries], [e for _, e in entries],
                      floor=100.0 * reference_accuracy)
    return ConvergenceReport(method=tab.name, problem=problem.name,
                             sigma=float(sigma), entries=entries,
                             pair_orders=orders, fitted_slope=slope,
                             reference_accuracy=reference_accuracy)


def run_work_precision(tab: PeerTableau, problem: SplitProblem, tols,
                       tau_rule="sqrt", reference: np.ndarray | None = None,
                       repeats: int = 1, delta: float = 0.0) -> list[dict]:
    """Adaptive tolerance sweep; one CSV row per tolerance.

    ``tau_rule`` maps the tolerance to the starting window: "atol", "sqrt"
    (tau = sqrt(atol)), a constant float, or a callable.  Timing is the
    median over ``repeats`` wall-clock runs of the integration only.
    """
    if reference is None and problem.exact is None:
        raise ValueError("work-precision needs a reference or exact solution")
    Y = np.asarray(reference) if reference is not None else problem.exact(problem.t_span[1])
    rows = []
    for tol in tols:
        if callable(tau_rule):
            tau = tau_rule(tol)
        elif tau_rule == "atol":
            tau = tol
        elif tau_rule == "sqrt":
            tau = math.sqrt(tol)
        else:
            tau = float(tau_rule)
        ctrl = Controller(atol=tol, rtol=tol, delta=delta)
        times = []
        res = None
        err = float("inf")
        status = "completed"
        for _ in range(max(1, repeats)):
            t_start = time.perf_counter()
            try:
                res = integrate(problem, tab, ctrl, tau=tau)
            except (StepFailure, IntegrationError) as exc:
                status = f"failed: {exc}"
                res = None
                break
            times.append(time.perf_counter() - t_start)
        if res is not None:
            err = global_error(Y, res.y)
        row = {"method": tab.name, "tol": tol, "error": err,
               "cpu_time": float(np.median(times)) if times else float("nan")}
        if res is not None:
            row.update(res.stats.row())
            dts = res.accepted_dts
            row["dt_min"] = float(dts.min())
            row["dt_max"] = float(dts.max())
        row["status"] = status
        rows.append(row)
    # trend check: flag (not enforce) non-monotone error vs tolerance
    errs = [r["error"] for r in rows if math.isfinite(r["error"])]
    for r in rows:
        r["monotone_flag"] = int(all(e2 <= e1 * 1.0 for e1, e2 in zip(errs, errs[1:])))
    return rows


# ---------------------------------------------------------------------------
# Reference solutions

@dataclass
class ReferenceSolution:
    problem: str
    method: str
    atol: float
    rtol: float
    tau: float
    t: float
    y: np.ndarray
    sha256: str = ""
    meta: dict = field(default_factory=dict)


def _payload_hash(y: np.ndarray) -> str:
    text = "\n".join(f"{v:.17g}" for v in y)
    return hashlib.sha256(text.encode()).hexdigest()


def make_reference(problem: SplitProblem, tol: float = 1e-12,
                   method: str = "IMEX-Peer4sv", tau: float | None = None,
                   fold: bool = True) -> ReferenceSolution:
    """Integrate (fully implicitly by default) at a tight tolerance."""
    tab = builtin_tableau(method)
    p = fold_implicit(problem) if fold else problem
    tau = tau if tau is not None else tol
    res = integrate(p, tab, Controller(atol=tol, rtol=tol), tau=tau)
    return ReferenceSolution(problem=problem.name, method=tab.name,
                             atol=tol, rtol=tol, tau=tau, t=res.t,
                             y=res.y, sha256=_payload_hash(res.y))


def save_reference(ref: ReferenceSolution) -> str:
    buf = io.StringIO()
    buf.write("# imexpeer-reference v1\n")
    buf.write(f"# problem: {ref.problem}\n")
    buf.write(f"# method: {ref.method}\n")
    buf.write(f"# atol: {ref.atol:g} rtol: {ref.rtol:g} tau: {ref.tau:g}\n")
    for k, v in ref.meta.items():
        buf.write(f"# {k}: {v}\n")
    buf.write(f"# t: {ref.t:.17g}\n")
    buf.write(f"# sha256: {ref.sha256 or _payload_hash(ref.y)}\n")
    buf.write("index,value\n")
    for i, v in enumerate(ref.y):
        buf.write(f"{i},{v:.17g}\n")
    return buf.getvalue()


def load_reference(text: str) -> ReferenceSolution:
    meta = {}
    ys = []
    for line in text.splitlines():
        line = line.strip()
        if not line or line == "index,value":
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if ":" in body:
                key, _, val = body.partition(":")
                meta[key.strip()] = val.strip()
            continue
        _, _, val = line.partition(",")
        ys.append(float(val))
    y = np.array(ys)
    got = _payload_hash(y)
    want = meta.get("sha256", got)
    if got != want:
        raise ValueError("reference file corrupted: content hash mismatch")
    tol_line = meta.get("atol", "nan nan nan").split()
    return ReferenceSolution(
        problem=meta.get("problem", "?"), method=meta.get("method", "?"),
        atol=float(tol_line[0]), rtol=float(tol_line[2]) if len(tol_line) > 2 else float("nan"),
        tau=float(tol_line[4]) if len(tol_line) > 4 else float("nan"),
        t=float(meta.get("t", "nan")), y=y, sha256=got, meta=meta)


def packaged_reference(name: str) -> ReferenceSolution:
    """Load one of the reference solutions shipped with the package."""
    from importlib.resources import files

    path = files("imexpeer.data").joinpath(f"references/{name}.csv")
    return load_reference(path.read_text())


def problem_by_name(name: str, **kwargs) -> SplitProblem:
    makers = {
        "prothero_robinson": prothero_robinson,
        "van_der_pol": van_der_pol,
        "burgers": burgers,
        "advection_reaction": advection_reaction,
        "dahlquist": dahlquist_split,
    }
    if name not in makers:
        raise ValueError(f"unknown problem {name!r}; available: {', '.join(makers)}")
    return makers[name](**kwargs)


# ---------------------------------------------------------------------------
# Method verification

@dataclass
class MethodReport:
    """Aggregated verification of one method against its reference data."""

    method: str
    checks: list            # (check id, value, threshold-or-target, passed)
    condition_rows: list    # (condition id, residual) for CSV emission

    @property
    def passed(self) -> bool:
        return all(ok for _, _, _, ok in self.checks)

    def __str__(self):
        lines = [f"== {self.method}: {'PASS' if self.passed else 'FAIL'}"]
        for name, value, target, ok in self.checks:
            lines.append(f"  {'ok ' if ok else 'XX '}{name:34s} {value!s:>14s}  [{target}]")
        return "\n".join(lines)


def verify_method(name_or_tableau, regions: bool = False) -> MethodReport:
    """Structural, stage-order, condition and stability verification.

    With ``regions=True`` the stability-region areas/extents are scanned and
    compared against the known characteristics (slow); the cheap damping and
    error-constant comparisons always run.
    """
    tab = name_or_tableau if isinstance(name_or_tableau, PeerTableau) \
        else builtin_tableau(name_or_tableau)
    checks = []
    cond_rows = []

    zs = check_zero_stability(tab)
    checks.append(("zero-stable", zs.ok, "one unit eigenvalue", zs.ok))
    so = check_stage_order(tab)
    checks.append(("stage order s (defects)", f"{so['max_defect']:.2e}",
                   "<= 1e-11", so["max_defect"] <= 1e-11))
    checks.append(("extrapolation order (defects)", f"{so['max_extrapolation_defect']:.2e}",
                   "<= 1e-11", so["max_extrapolation_defect"] <= 1e-11))

    known = stability.KNOWN_CHARACTERISTICS.get(tab.name)
    variable_set = {"IMEX-Peer3sv", "IMEX-Peer4sv"}
    for mode in ("imex-variable", "imex-relaxed"):
        rep = check_superconvergence(tab, mode)
        cond_rows += [(f"{mode}:{k}", v) for k, v in rep.residuals.items()]
        if tab.name in variable_set:
            # full set holds; the relaxed one is implied
            ok = rep.passed
            label = f"conditions [{mode}]"
        elif known:
            # *sve methods satisfy the relaxed set and must fail the full one
            if mode == "imex-relaxed":
                ok = rep.passed
                label = f"conditions [{mode}]"
            else:
                ok = not rep.passed
                label = f"conditions [{mode}] fail as expected"
        else:
            ok = True     # informational for user-supplied tableaus
            label = f"conditions [{mode}] (informational)"
        checks.append((label, f"{rep.max_residual:.2e}", "<= 1e-9", ok))

    ast = stability.check_a_stability(tab)
    checks.append(("A-stable implicit part", f"{ast.max_rho - 1.0:+.2e}",
                   "rho <= 1+1e-8", ast.ok))
    rho = stability.damping_radius(tab)
    if known:
        checks.append(("damping radius", f"{rho:.4f}",
                       f"{known['damping_radius']} +- 0.002",
                       abs(rho - known["damping_radius"]) <= 2e-3))
        cim, cex = error_constants(tab)
        checks.append(("error constant (implicit)", f"{cim:.4g}",
                       f"{known['err_const_implicit']} +- 2%",
                       abs(cim / known["err_const_implicit"] - 1) <= 0.02))
        checks.append(("error constant (explicit)", f"{cex:.4g}",
                       f"{known['err_const_explicit']} +- 2%",
                       abs(cex / known["err_const_explicit"] - 1) <= 0.02))
    else:
        checks.append(("damping radius", f"{rho:.4f}", "<= 1", rho <= 1.0))

    if regions and known:
        rep = stability.region_summary(tab)
        for key, tol in (("s90_area", 0.10), ("x_max", 0.05),
                         ("s0_area", 0.10), ("y_max", 0.05)):
            val = getattr(rep, key)
            dev = val / known[key] - 1.0
            checks.append((f"region {key}", f"{val:.4g}",
                           f"{known[key]} +- {tol:.0%}", abs(dev) <= tol))
    return MethodReport(method=tab.name, checks=checks, condition_rows=cond_rows)
