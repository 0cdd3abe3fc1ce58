"""N-anholonomic manifold data: splitting, d-metric, N-connection, frames.

Indices are zero-based throughout: h-indices ``i in range(n)`` and
v-indices ``a in range(m)``.  Coordinates are ``split.h_coords[i]`` and
``split.v_coords[a]``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .errors import SingularMatrixError
from .expr import ONE, ZERO, Expr, const, differentiate, evaluate_batch, parse

Matrix = tuple[tuple[Expr, ...], ...]


# -- small symbolic linear algebra -------------------------------------------
def _as_expr(x) -> Expr:
    return x if isinstance(x, Expr) else const(float(x))


def as_matrix(rows) -> Matrix:
    return tuple(tuple(_as_expr(x) for x in row) for row in rows)


def sym_det(M: Sequence[Sequence[Expr]]) -> Expr:
    """Determinant by cofactor expansion along the first row (small sizes only)."""
    n = len(M)
    if n == 1:
        return M[0][0]
    if n == 2:
        return M[0][0] * M[1][1] - M[0][1] * M[1][0]
    total = ZERO
    for j in range(n):
        if M[0][j] is ZERO:
            continue
        minor = [row[:j] + row[j + 1:] for row in M[1:]]
        term = M[0][j] * sym_det(minor)
        total = total + term if j % 2 == 0 else total - term
    return total


def sym_inverse(M: Sequence[Sequence[Expr]]) -> Matrix:
    """Adjugate over determinant.  Diagonal input stays diagonal."""
    n = len(M)
    if all(M[i][j] is ZERO for i in range(n) for j in range(n) if i != j):
        return tuple(tuple(ONE / M[i][i] if i == j else ZERO for j in range(n)) for i in range(n))
    det = sym_det(M)
    if n == 1:
        return ((ONE / det,),)
    inv = [[ZERO] * n for _ in range(n)]
    for i in range(n):
        for j in range(n):
            minor = [M[r][:j] + M[r][j + 1:] for r in range(n) if r != i]
            cof = sym_det(minor)
            if (i + j) % 2:
                cof = -cof
            inv[j][i] = cof / det
    return tuple(tuple(r) for r in inv)


def det_values(M: Sequence[Sequence[Expr]], points: Mapping[str, np.ndarray]) -> np.ndarray:
    """Pointwise numeric determinant (shape: number of points)."""
    n = len(M)
    flat = evaluate_batch([M[i][j] for i in range(n) for j in range(n)], points)
    stack = np.stack(flat, axis=-1).reshape(-1, n, n)
    return np.linalg.det(stack)


def check_invertible(M, points: Mapping[str, np.ndarray], what: str, tol: float = 1e-12) -> None:
    dets = det_values(M, points)
    bad = np.flatnonzero(np.abs(dets) < tol)
    if bad.size:
        k = int(bad[0])
        raise SingularMatrixError(what, {c: float(v[k]) for c, v in points.items()}, float(dets[k]))


# -- data types -----------------------------------------------------------------
@dataclass(frozen=True)
class Splitting:
    n: int
    m: int
    h_coords: tuple[str, ...]
    v_coords: tuple[str, ...]

    def __post_init__(self):
        if self.n < 2 or self.m < 1:
            raise ValueError(f"need n >= 2 and m >= 1, got n={self.n}, m={self.m}")
        if len(self.h_coords) != self.n or len(self.v_coords) != self.m:
            raise ValueError("coordinate name count does not match (n, m)")
        if len(set(self.coords)) != self.n + self.m:
            raise ValueError(f"coordinate names must be unique: {self.coords}")

    @classmethod
    def standard(cls, n: int, m: int) -> "Splitting":
        """x1..xn for the base, y(n+1)..y(n+m) for the fiber."""
        return cls(n, m, tuple(f"x{i + 1}" for i in range(n)), tuple(f"y{n + a + 1}" for a in range(m)))

    @property
    def coords(self) -> tuple[str, ...]:
        return self.h_coords + self.v_coords

    @property
    def dim(self) -> int:
        return self.n + self.m

    def parse(self, text: str) -> Expr:
        return parse(text, self.coords)


@dataclass(frozen=True)
class NConnection:
    split: Splitting
    N: Matrix  # N[i][a] = N_i^a

    def __post_init__(self):
        if len(self.N) != self.split.n or any(len(r) != self.split.m for r in self.N):
            raise ValueError("N must be an n x m table")
        allowed = set(self.split.coords)
        for row in self.N:
            for e in row:
                if not e.variables <= allowed:
                    raise ValueError(f"N entry {e} uses undeclared coordinates")

    @classmethod
    def zero(cls, split: Splitting) -> "NConnection":
        return cls(split, tuple((ZERO,) * split.m for _ in range(split.n)))

    @classmethod
    def from_strings(cls, split: Splitting, rows: Sequence[Sequence[str]]) -> "NConnection":
        return cls(split, tuple(tuple(split.parse(str(s)) for s in row) for row in rows))


def _mirror(rows, size: int, what: str) -> Matrix:
    """Keep the upper triangle and mirror it, so the block is symmetric by construction."""
    if len(rows) != size or any(len(r) != size for r in rows):
        raise ValueError(f"{what} must be {size} x {size}")
    M = as_matrix(rows)
    return tuple(tuple(M[min(i, j)][max(i, j)] for j in range(size)) for i in range(size))


@dataclass(frozen=True)
class DMetric:
    split: Splitting
    g: Matrix
    h: Matrix
    signature: tuple[int, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "g", _mirror(self.g, self.split.n, "g"))
        object.__setattr__(self, "h", _mirror(self.h, self.split.m, "h"))
        if self.signature is not None:
            if len(self.signature) != self.split.dim or any(s not in (1, -1) for s in self.signature):
                raise ValueError("signature must list one +1/-1 per coordinate")

    @classmethod
    def from_strings(cls, split: Splitting, g: Sequence[Sequence[str]], h: Sequence[Sequence[str]],
                     signature=None) -> "DMetric":
        return cls(split,
                   tuple(tuple(split.parse(str(s)) for s in row) for row in g),
                   tuple(tuple(split.parse(str(s)) for s in row) for row in h),
                   None if signature is None else tuple(int(s) for s in signature))

    def g_inv(self) -> Matrix:
        return _cached_inverse(self.g)

    def h_inv(self) -> Matrix:
        return _cached_inverse(self.h)

    def check_invertible(self, points: Mapping[str, np.ndarray], tol: float = 1e-12) -> None:
        check_invertible(self.g, points, "h-metric g", tol)
        check_invertible(self.h, points, "v-metric h", tol)


_INV_CACHE: dict[Matrix, Matrix] = {}


def _cached_inverse(M: Matrix) -> Matrix:
    hit = _INV_CACHE.get(M)
    if hit is None:
        hit = sym_inverse(M)
        _INV_CACHE[M] = hit
    return hit


@dataclass(frozen=True)
class OffDiagonalMetric:
    split: Splitting
    G: Matrix


# -- operations -------------------------------------------------------------------
def assemble_offdiagonal(dm: DMetric, nc: NConnection) -> OffDiagonalMetric:
    """Coordinate-basis metric: G_ij = g_ij + N_i^a N_j^b h_ab, G_ia = N_i^b h_ba, G_ab = h_ab."""
    n, m = dm.split.n, dm.split.m
    N, g, h = nc.N, dm.g, dm.h
    Nh = [[sum_terms(N[i][b] * h[b][a] for b in range(m)) for a in range(m)] for i in range(n)]
    G = [[ZERO] * (n + m) for _ in range(n + m)]
    for i in range(n):
        for j in range(i, n):
            G[i][j] = G[j][i] = g[i][j] + sum_terms(Nh[i][a] * N[j][a] for a in range(m))
        for a in range(m):
            G[i][n + a] = G[n + a][i] = Nh[i][a]
    for a in range(m):
        for b in range(m):
            G[n + a][n + b] = h[a][b]
    return OffDiagonalMetric(dm.split, tuple(tuple(r) for r in G))


def extract_blocks(G: OffDiagonalMetric) -> tuple[DMetric, NConnection]:
    """Inverse of assemble_offdiagonal (symbolic): h = G_ab, N_i^a = h^{ab} G_ib, g = G_ij - N N h."""
    split = G.split
    n, m = split.n, split.m
    h = tuple(tuple(G.G[n + a][n + b] for b in range(m)) for a in range(m))
    hinv = sym_inverse(h)
    N = tuple(tuple(sum_terms(hinv[a][b] * G.G[i][n + b] for b in range(m)) for a in range(m))
              for i in range(n))
    g = tuple(tuple(G.G[i][j] - sum_terms(N[i][a] * G.G[j][n + a] for a in range(m)) for j in range(n))
              for i in range(n))
    return DMetric(split, g, h), NConnection(split, N)


def sum_terms(terms) -> Expr:
    total = ZERO
    for t in terms:
        total = total + t
    return total


def frame_derivative(nc: NConnection, i: int, q: Expr) -> Expr:
    """e_i q = dq/dx^i - N_i^a dq/dy^a."""
    split = nc.split
    out = differentiate(q, split.h_coords[i])
    for a in range(split.m):
        Nia = nc.N[i][a]
        if Nia is ZERO:
            continue
        dq = differentiate(q, split.v_coords[a])
        if dq is not ZERO:
            out = out - Nia * dq
    return out


def vertical_derivative(split: Splitting, a: int, q: Expr) -> Expr:
    """e_a q = dq/dy^a."""
    return differentiate(q, split.v_coords[a])


def adapted_derivative(nc: NConnection, alpha: int, q: Expr) -> Expr:
    """e_alpha q with alpha < n horizontal and alpha >= n vertical."""
    n = nc.split.n
    if alpha < n:
        return frame_derivative(nc, alpha, q)
    return vertical_derivative(nc.split, alpha - n, q)


@dataclass(frozen=True)
class Nonholonomy:
    Omega: tuple  # Omega[a][i][j]
    W: tuple  # W[b][i][a] = dN_i^b / dy^a, so [e_i, e_a] = W^b_{ia} e_b


def nonholonomy(nc: NConnection) -> Nonholonomy:
    """N-connection curvature and anholonomy coefficients.

    Omega^a_ij = e_j(N_i^a) - e_i(N_j^a); with this sign [e_i, e_j] = Omega^a_ij e_a.
    """
    split = nc.split
    n, m = split.n, split.m
    Omega = [[[ZERO] * n for _ in range(n)] for _ in range(m)]
    for a in range(m):
        for i in range(n):
            for j in range(i + 1, n):
                w = frame_derivative(nc, j, nc.N[i][a]) - frame_derivative(nc, i, nc.N[j][a])
                Omega[a][i][j] = w
                Omega[a][j][i] = -w
    W = tuple(tuple(tuple(vertical_derivative(split, a, nc.N[i][b]) for a in range(m)) for i in range(n))
              for b in range(m))
    return Nonholonomy(tuple(tuple(tuple(r) for r in blk) for blk in Omega), W)


def transform_nconnection(A_h, A_v, nc: NConnection,
                          points: Mapping[str, np.ndarray] | None = None) -> NConnection:
    """Block frame transform of the N-coefficients.

    ``A_h[j][j2]`` holds A^j_{j'} and ``A_v[a2][a]`` holds A_a^{a'}; the result is
    N'^{a'}_{j'} = A_a^{a'} A^j_{j'} N^a_j.  When ``points`` is given both
    blocks are checked for |det| >= 1e-12 there.
    """
    split = nc.split
    n, m = split.n, split.m
    A_h = as_matrix(A_h)
    A_v = as_matrix(A_v)
    if len(A_h) != n or len(A_v) != m:
        raise ValueError("transform blocks must be n x n and m x m")
    if points is not None:
        check_invertible(A_h, points, "h-transform")
        check_invertible(A_v, points, "v-transform")
    out = tuple(
        tuple(sum_terms(A_v[a2][a] * A_h[j][j2] * nc.N[j][a] for j in range(n) for a in range(m))
              for a2 in range(m))
        for j2 in range(n))
    return NConnection(split, out)


def inverse_transform(A_h, A_v, nc: NConnection,
                      points: Mapping[str, np.ndarray] | None = None) -> NConnection:
    """Undo transform_nconnection(A_h, A_v, .)."""
    return transform_nconnection(sym_inverse(as_matrix(A_h)), sym_inverse(as_matrix(A_v)), nc, points)
