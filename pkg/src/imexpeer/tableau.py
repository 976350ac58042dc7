"""Peer-method tableaus: constant coefficient data, built-ins, file I/O.

A tableau holds the step-size-independent data of an s-stage implicit-explicit
Peer method: nodes ``c``, propagation matrix ``P``, implicit weight matrix
``R`` (lower triangular with constant diagonal ``gamma``) and the same-step
extrapolation matrix ``E2`` (strictly lower triangular).  Everything that
depends on the step-size ratio lives in :mod:`imexpeer.coeffs`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

__all__ = [
    "PeerTableau",
    "TableauError",
    "ZeroStabilityReport",
    "available_methods",
    "builtin_tableau",
    "check_zero_stability",
    "load_tableau",
    "save_tableau",
]


class TableauError(ValueError):
    """Raised when tableau data violates a structural requirement."""


@dataclass(frozen=True, eq=False)
class PeerTableau:
    """Constant data defining one s-stage Peer method.

    Invariants (checked on construction): distinct nodes with ``c[-1] == 1``,
    pre-consistent ``P`` (rows sum to one within 1e-12), lower-triangular ``R``
    with constant positive diagonal ``gamma``, strictly lower-triangular ``E2``.
    Instances are immutable (arrays are write-protected), safe to share
    between threads, and compare by identity so derived per-method data can
    be cached.
    """

    name: str
    s: int
    c: np.ndarray
    P: np.ndarray
    R: np.ndarray
    E2: np.ndarray
    gamma: float

    def __post_init__(self):
        c = np.ascontiguousarray(np.asarray(self.c, dtype=float))
        P = np.ascontiguousarray(np.asarray(self.P, dtype=float))
        R = np.ascontiguousarray(np.asarray(self.R, dtype=float))
        E2 = np.ascontiguousarray(np.asarray(self.E2, dtype=float))
        object.__setattr__(self, "c", c)
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "R", R)
        object.__setattr__(self, "E2", E2)
        object.__setattr__(self, "s", int(self.s))
        object.__setattr__(self, "gamma", float(self.gamma))
        _validate(self)
        for a in (c, P, R, E2):
            a.setflags(write=False)

    @property
    def e(self) -> np.ndarray:
        """Vector of ones of length s."""
        return np.ones(self.s)


def _validate(t: PeerTableau) -> None:
    s = t.s
    if s < 2:
        raise TableauError("stage count must be at least 2")
    for field in ("P", "R", "E2"):
        a = getattr(t, field)
        if a.shape != (s, s):
            raise TableauError(f"{field} must be {s}x{s}, got {a.shape}")
    if t.c.shape != (s,):
        raise TableauError(f"c must have length {s}")
    if abs(t.c[-1] - 1.0) > 1e-14:
        raise TableauError("c_s != 1")
    dmin = np.min(np.abs(np.subtract.outer(t.c, t.c) + np.eye(s)))
    if dmin < 1e-12:
        raise TableauError("nodes not distinct")
    if np.any(np.abs(np.triu(t.R, 1)) > 0):
        raise TableauError("R has entries above the diagonal")
    diag = np.diag(t.R)
    if np.max(np.abs(diag - diag[0])) > 0:
        raise TableauError("diagonal of R not constant")
    if not diag[0] > 0:
        raise TableauError("diagonal of R not positive")
    if abs(t.gamma - diag[0]) > 0:
        raise TableauError("gamma does not match the diagonal of R")
    if np.any(np.abs(np.triu(t.E2, 0)) > 0):
        raise TableauError("E2 not strictly lower triangular")
    rowsum = t.P @ np.ones(s)
    worst = np.max(np.abs(rowsum - 1.0))
    if worst > 1e-12:
        raise TableauError(f"P not pre-consistent: max |row sum - 1| = {worst:.3e}")


@dataclass(frozen=True)
class ZeroStabilityReport:
    """Eigenvalue moduli of P with the power-boundedness verdict."""

    moduli: np.ndarray          # sorted descending
    n_unit: int                 # eigenvalues with |lam - 1| <= unit_tol
    ok: bool
    optimal: bool               # all non-unit moduli at zero level

    def __str__(self):
        mods = ", ".join(f"{m:.3e}" for m in self.moduli)
        return (f"zero-stable={self.ok} optimal={self.optimal} "
                f"unit eigenvalues={self.n_unit} moduli=[{mods}]")


def check_zero_stability(t: PeerTableau, unit_tol: float = 1e-10,
                         margin: float = 1e-12) -> ZeroStabilityReport:
    """Power-boundedness of P: exactly one unit eigenvalue, rest inside the disc.

    ``optimal`` is set when every non-unit modulus is below 1e-8, i.e. the
    parasitic spectrum of P vanishes.
    """
    lam = np.linalg.eigvals(t.P)
    unit = np.abs(lam - 1.0) <= unit_tol
    rest = np.abs(lam[~unit])
    ok = unit.sum() == 1 and (rest.size == 0 or rest.max() <= 1.0 - margin)
    optimal = bool(ok and (rest.size == 0 or rest.max() <= 1e-8))
    moduli = np.sort(np.abs(lam))[::-1]
    return ZeroStabilityReport(moduli=moduli, n_unit=int(unit.sum()), ok=bool(ok),
                               optimal=optimal)


def _frac(num, den):
    return float(Fraction(num, den))


def _builtin_2sve() -> PeerTableau:
    # rational coefficients, stored exactly
    c = [_frac(2, 3), 1.0]
    P = [[_frac(-19, 20), _frac(39, 20)],
         [0.0, 1.0]]
    R = [[_frac(17, 20), 0.0],
         [_frac(-19, 20), _frac(17, 20)]]
    E2 = [[0.0, 0.0],
          [_frac(15, 17), 0.0]]
    return PeerTableau("IMEX-Peer2sve", 2, c, P, R, E2, _frac(17, 20))


def _builtin_3sv() -> PeerTableau:
    g = 0.690969692535085
    c = [0.0, 0.5, 1.0]
    P = [[1.000000000000000, 0.000000000000000, 0.000000000000000],
         [1.009534846612963, -0.000125189884283, -0.009409656728680],
         [0.927244072163109, -0.000247968521087, 0.073003896357977]]
    R = [[g, 0.0, 0.0],
         [0.351562922857064, g, 0.0],
         [0.346024253990984, 0.328884660689640, g]]
    E2 = [[0.0, 0.0, 0.0],
          [1.454929231059714, 0.0, 0.0],
          [-6.099201725139450, 3.157746208382228, 0.0]]
    return PeerTableau("IMEX-Peer3sv", 3, c, P, R, E2, g)


def _builtin_4sv() -> PeerTableau:
    g = 0.681884472048995
    c = [0.0, -1.598239239549169, 0.523829503832339, 1.0]
    P = [[1.000000000000000, 0.000000000000000, 0.000000000000000, 0.000000000000000],
         [1.000204745561481, -0.000195233457439, -0.000009518220959, 0.000000006116916],
         [1.169763235411655, -0.169740581681421, -0.000025123517333, 0.000002469787099],
         [1.915153835547942, -0.244331567248295, -0.671042624270695, 0.000220355971049]]
    R = [[g, 0.0, 0.0, 0.0],
         [1.292744499701930, g, 0.0, 0.0],
         [1.074957286644128, -0.054028162784565, g, 0.0],
         [4.064480810437903, 1.031994574173631, -0.534558192336057, g]]
    E2 = [[0.0, 0.0, 0.0, 0.0],
          [-0.153830152235951, 0.0, 0.0, 0.0],
          [0.065444441626366, -0.976514386415223, 0.0, 0.0],
          [-0.234155732816782, -2.535629358626096, 1.477107513945526, 0.0]]
    return PeerTableau("IMEX-Peer4sv", 4, c, P, R, E2, g)


def _builtin_4sve() -> PeerTableau:
    g = 0.473861788489939
    c = [-0.868838855210029, -0.253884413463736, 0.754504864110948, 1.0]
    P = [[0.000000000000000, 0.316402904545681, 1.127642509582261, -0.444045414127942],
         [0.000000000000000, 0.000000000000000, -0.017465269321373, 1.017465269321373],
         [0.0, 0.0, 0.0, 1.0],
         [0.0, 0.0, 0.0, 1.0]]
    R = [[g, 0.0, 0.0, 0.0],
         [0.732961380396538, g, 0.0, 0.0],
         [-2.472299983846101, 0.077358285702625, g, 0.0],
         [-1.603925020256191, -2.797576519478004, -0.278164642408456, g]]
    E2 = [[0.0, 0.0, 0.0, 0.0],
          [-0.183287385063759, 0.0, 0.0, 0.0],
          [5.974911797174020, -2.556627399170977, 0.0, 0.0],
          [2.456065798975378, -2.032396276261657, 1.255044479285407, 0.0]]
    return PeerTableau("IMEX-Peer4sve", 4, c, P, R, E2, g)


_BUILTINS = {
    "IMEX-Peer2sve": _builtin_2sve,
    "IMEX-Peer3sv": _builtin_3sv,
    "IMEX-Peer4sv": _builtin_4sv,
    "IMEX-Peer4sve": _builtin_4sve,
}


def available_methods() -> tuple[str, ...]:
    """Names of the shipped methods."""
    return tuple(_BUILTINS)


def builtin_tableau(name: str) -> PeerTableau:
    """Return a shipped tableau by name.

    Short forms are accepted: ``"3sv"`` resolves to ``"IMEX-Peer3sv"``.
    """
    key = name if name in _BUILTINS else f"IMEX-Peer{name}"
    if key not in _BUILTINS:
        lowered = {k.lower(): k for k in _BUILTINS}
        key = lowered.get(name.lower(), lowered.get(f"imex-peer{name.lower()}", None))
    if key is None or key not in _BUILTINS:
        raise TableauError(
            f"unknown method {name!r}; available: {', '.join(_BUILTINS)}")
    return _BUILTINS[key]()


# ---------------------------------------------------------------------------
# Text format:  header "peer-tableau v1", then "name", "s", "c" lines and
# P/R/E2 blocks of s whitespace-separated rows; '#' starts a comment.

_HEADER = "peer-tableau v1"


def save_tableau(t: PeerTableau) -> str:
    """Serialize a tableau; floats use 17 significant digits (lossless)."""
    def row(a):
        return " ".join(f"{x:.17g}" for x in a)

    lines = [_HEADER, f"name {t.name}", f"s {t.s}", f"c {row(t.c)}"]
    for label in ("P", "R", "E2"):
        lines.append(label)
        lines.extend(row(r) for r in getattr(t, label))
    return "\n".join(lines) + "\n"


def load_tableau(text: str) -> PeerTableau:
    """Parse the tableau text format.

    Raises :class:`TableauError` with a line number on malformed input and
    names the violated invariant when the parsed data is structurally bad or
    not zero-stable.
    """
    raw = [(i + 1, ln.split("#", 1)[0].strip()) for i, ln in enumerate(text.splitlines())]
    lines = [(n, ln) for n, ln in raw if ln]
    if not lines or lines[0][1] != _HEADER:
        raise TableauError(f"line {lines[0][0] if lines else 1}: expected header {_HEADER!r}")
    pos = 1

    def take(expect_key=None):
        nonlocal pos
        if pos >= len(lines):
            raise TableauError("unexpected end of file")
        n, ln = lines[pos]
        pos += 1
        if expect_key is not None:
            parts = ln.split(None, 1)
            if parts[0] != expect_key or len(parts) < 2:
                raise TableauError(f"line {n}: expected '{expect_key} ...'")
            return n, parts[1]
        return n, ln

    _, name = take("name")
    n, sval = take("s")
    try:
        s = int(sval)
    except ValueError:
        raise TableauError(f"line {n}: stage count must be an integer") from None
    n, cval = take("c")
    c = _parse_row(n, cval, s)
    mats = {}
    for label in ("P", "R", "E2"):
        n, ln = take()
        if ln != label:
            raise TableauError(f"line {n}: expected block '{label}'")
        rows = []
        for _ in range(s):
            n, ln = take()
            rows.append(_parse_row(n, ln, s))
        mats[label] = np.array(rows)
    gamma = mats["R"][0, 0]
    t = PeerTableau(name, s, c, mats["P"], mats["R"], mats["E2"], gamma)
    zs = check_zero_stability(t)
    if not zs.ok:
        raise TableauError(f"tableau not zero-stable: {zs}")
    return t


def _parse_row(lineno: int, text: str, s: int) -> np.ndarray:
    parts = text.split()
    if len(parts) != s:
        raise TableauError(f"line {lineno}: expected {s} values, got {len(parts)}")
    try:
        return np.array([float(p) for p in parts])
    except ValueError:
        raise TableauError(f"line {lineno}: malformed number") from None
