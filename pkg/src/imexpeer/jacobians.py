"""Structured Jacobians: storage layouts, shifted solves, finite differences.

The stage solver repeatedly factors I - h*gamma*J for a Jacobian J of the
implicit right-hand side.  Each structure knows how to build that operator
from its compact storage, how to approximate J by forward differences with
structure-aware column grouping, and how to convert itself to a banded or
dense layout so that split parts can be folded together.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import get_lapack_funcs

__all__ = [
    "Banded",
    "BlockDiagonal2x2",
    "Dense",
    "JacobianStructure",
    "Tridiagonal",
    "fd_jacobian",
    "union_structure",
]


class JacobianStructure:
    """Base class; subclasses define a compact storage layout for J."""

    m: int

    def factor(self, a: float, b: float, J):
        """Factorization object for a*I + b*J with a ``solve(rhs)`` method."""
        raise NotImplementedError

    def fd_groups(self):
        """Independent column groups for finite-difference evaluation."""
        raise NotImplementedError

    def scatter_fd(self, J, group, du, df_scaled):
        """Write one finite-difference column group into storage J."""
        raise NotImplementedError

    def empty(self):
        raise NotImplementedError

    def to_banded(self, J):
        """(l, u, ab) in solve_banded layout; ab[u + i - j, j] = J[i, j]."""
        raise NotImplementedError

    def to_dense(self, J):
        l, u, ab = self.to_banded(J)
        m = self.m
        out = np.zeros((m, m))
        for i in range(m):
            for j in range(max(0, i - l), min(m, i + u + 1)):
                out[i, j] = ab[u + i - j, j]
        return out


class Dense(JacobianStructure):
    def __init__(self, m: int):
        self.m = m

    def empty(self):
        return np.zeros((self.m, self.m))

    def factor(self, a, b, J):
        return _DenseLU(a * np.eye(self.m) + b * J)

    def fd_groups(self):
        return [np.array([j]) for j in range(self.m)]

    def scatter_fd(self, J, group, du, df_scaled):
        J[:, group[0]] = df_scaled[:, 0]

    def to_banded(self, J):
        raise NotImplementedError("dense Jacobians have no banded layout")

    def to_dense(self, J):
        return np.asarray(J)


class _DenseLU:
    def __init__(self, A):
        self._lu = lu_factor(A)

    def solve(self, rhs):
        return lu_solve(self._lu, rhs)


class Banded(JacobianStructure):
    """General banded storage with ``l`` sub- and ``u`` superdiagonals.

    Storage is the (l+u+1, m) matrix of scipy's solve_banded convention.
    """

    def __init__(self, m: int, l: int, u: int):
        self.m = m
        self.l = int(l)
        self.u = int(u)

    def empty(self):
        return np.zeros((self.l + self.u + 1, self.m))

    def factor(self, a, b, J):
        ab = b * J
        ab[self.u] += a
        return _BandedLU(self.l, self.u, ab)

    def fd_groups(self):
        w = self.l + self.u + 1
        return [np.arange(g, self.m, w) for g in range(min(w, self.m))]

    def scatter_fd(self, J, group, du, df_scaled):
        for k, j in enumerate(group):
            i0 = max(0, j - self.u)
            i1 = min(self.m, j + self.l + 1)
            J[self.u + i0 - j:self.u + i1 - j, j] = df_scaled[i0:i1, k]

    def to_banded(self, J):
        return self.l, self.u, np.asarray(J)


class _BandedLU:
    def __init__(self, l, u, ab):
        m = ab.shape[1]
        a2 = np.zeros((2 * l + u + 1, m))
        a2[l:] = ab
        gbtrf, gbtrs = get_lapack_funcs(("gbtrf", "gbtrs"), (ab,))
        lu, ipiv, info = gbtrf(a2, l, u)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded factorization failed (info={info})")
        self._args = (lu, l, u, ipiv)
        self._gbtrs = gbtrs

    def solve(self, rhs):
        lu, l, u, ipiv = self._args
        x, info = self._gbtrs(lu, l, u, rhs, ipiv)
        if info != 0:
            raise np.linalg.LinAlgError(f"banded solve failed (info={info})")
        return x.ravel() if rhs.ndim == 1 else x


class Tridiagonal(Banded):
    def __init__(self, m: int):
        super().__init__(m, 1, 1)


class BlockDiagonal2x2(JacobianStructure):
    """Independent 2x2 blocks on interleaved state pairs; storage (m/2, 2, 2)."""

    def __init__(self, m: int):
        if m % 2:
            raise ValueError("block-diagonal 2x2 structure needs even dimension")
        self.m = m

    def empty(self):
        return np.zeros((self.m // 2, 2, 2))

    def factor(self, a, b, J):
        A = b * J
        A[:, 0, 0] += a
        A[:, 1, 1] += a
        det = A[:, 0, 0] * A[:, 1, 1] - A[:, 0, 1] * A[:, 1, 0]
        if not np.all(np.abs(det) > 0):
            raise np.linalg.LinAlgError("singular 2x2 block")
        inv = np.empty_like(A)
        inv[:, 0, 0] = A[:, 1, 1] / det
        inv[:, 1, 1] = A[:, 0, 0] / det
        inv[:, 0, 1] = -A[:, 0, 1] / det
        inv[:, 1, 0] = -A[:, 1, 0] / det
        return _Block2x2Inv(inv)

    def fd_groups(self):
        return [np.arange(0, self.m, 2), np.arange(1, self.m, 2)]

    def scatter_fd(self, J, group, du, df_scaled):
        col = group[0] % 2
        blocks = np.arange(self.m // 2)
        J[:, 0, col] = df_scaled[2 * blocks, blocks]
        J[:, 1, col] = df_scaled[2 * blocks + 1, blocks]

    def to_banded(self, J):
        ab = np.zeros((3, self.m))
        ab[1, 0::2] = J[:, 0, 0]
        ab[1, 1::2] = J[:, 1, 1]
        ab[0, 1::2] = J[:, 0, 1]   # superdiagonal entries (i even, j = i+1)
        ab[2, 0::2] = J[:, 1, 0]   # subdiagonal entries
        return 1, 1, ab


class _Block2x2Inv:
    def __init__(self, inv):
        self._inv = inv

    def solve(self, rhs):
        r = rhs.reshape(-1, 2)
        return np.einsum("nij,nj->ni", self._inv, r).reshape(-1)


def fd_jacobian(structure: JacobianStructure, f, t: float, u: np.ndarray,
                f_of_u: np.ndarray | None = None):
    """Forward-difference Jacobian of ``f(t, u)`` in the given structure.

    Columns in the same group are perturbed simultaneously; the increment
    per column is sqrt(eps) * (1 + |u_j|).
    """
    if f_of_u is None:
        f_of_u = f(t, u)
    J = structure.empty()
    sq = np.sqrt(np.finfo(float).eps)
    for group in structure.fd_groups():
        du = sq * (1.0 + np.abs(u[group]))
        up = u.copy()
        up[group] += du
        df = f(t, up) - f_of_u
        # each response row is influenced by exactly one column of the group;
        # scatter_fd reads only rows inside column k's band, so scaling the
        # whole response by du[k] per column is exact
        cols = df[:, None] / du[None, :]
        structure.scatter_fd(J, group, du, cols)
    return J


def union_structure(a: JacobianStructure, b: JacobianStructure) -> JacobianStructure:
    """Smallest shipped structure that can hold J_a + J_b."""
    if a.m != b.m:
        raise ValueError("structures have different dimensions")
    if isinstance(a, Dense) or isinstance(b, Dense):
        return Dense(a.m)
    la, ua = _bandwidths(a)
    lb, ub = _bandwidths(b)
    return Banded(a.m, max(la, lb), max(ua, ub))


def _bandwidths(s: JacobianStructure):
    if isinstance(s, Banded):
        return s.l, s.u
    if isinstance(s, BlockDiagonal2x2):
        return 1, 1
    raise TypeError(f"no banded view for {type(s).__name__}")


def add_in_union(union: JacobianStructure, parts):
    """Sum (structure, storage) pairs into the union structure's storage."""
    if isinstance(union, Dense):
        out = np.zeros((union.m, union.m))
        for struct, J in parts:
            out += struct.to_dense(J)
        return out
    out = union.empty()
    for struct, J in parts:
        l, u, ab = struct.to_banded(J)
        for d in range(-l, u + 1):
            # diagonal d of the part sits at row (union.u - d)
            row = union.u - d
            src = ab[u - d]
            out[row] += src
    return out
