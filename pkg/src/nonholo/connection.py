"""Canonical d-connection, torsion, curvature, Ricci data and the Levi-Civita distortion.

Conventions (zero-based indices, ``n`` base and ``m`` fiber dimensions):

* ``L_h[i][j][k]`` is the h-component i of D_{e_k} e_j; ``L_v[a][b][k]`` the
  v-component a of D_{e_k} e_b; ``C_h[i][j][c]`` and ``C_v[a][b][c]`` are the
  same along e_c.
* A *full table* ``T[g][b][a]`` over adapted indices ``0..n+m-1`` holds
  component g of nabla_{e_a} e_b (h-indices first, then v-indices).
* ``[e_i, e_j] = Omega^a_ij e_a`` and ``[e_i, e_a] = (d_a N_i^b) e_b``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .expr import ZERO, Expr, differentiate, evaluate_batch
from .manifold import (DMetric, NConnection, Nonholonomy, adapted_derivative, assemble_offdiagonal,
                       frame_derivative, nonholonomy, sum_terms, vertical_derivative)

Points = Mapping[str, np.ndarray]


def _table(shape, fn):
    """Nested tuple of the given shape with entries fn(*index)."""
    if len(shape) == 1:
        return tuple(fn(i) for i in range(shape[0]))
    return tuple(_table(shape[1:], lambda *rest, i=i: fn(i, *rest)) for i in range(shape[0]))


def _flatten(tab):
    if isinstance(tab, Expr):
        return [tab]
    out = []
    for t in tab:
        out.extend(_flatten(t))
    return out


def _shape(tab):
    shape = []
    while not isinstance(tab, Expr):
        shape.append(len(tab))
        if not tab:
            break
        tab = tab[0]
    return tuple(shape)


def eval_table(tab, points: Points) -> np.ndarray:
    """Evaluate a nested table; result has shape (num_points, *table_shape)."""
    shape = _shape(tab)
    flat = _flatten(tab)
    npts = len(next(iter(points.values())))
    if not flat:
        return np.zeros((npts,) + shape)
    vals = evaluate_batch(flat, points)
    return np.stack(vals, axis=-1).reshape((npts,) + shape)


def eval_tables(tabs: Mapping[str, object], points: Points) -> dict[str, np.ndarray]:
    """Evaluate several tables in one batch pass so shared subexpressions are computed once."""
    names = list(tabs)
    flats = [_flatten(tabs[k]) for k in names]
    allflat = [e for f in flats for e in f]
    npts = len(next(iter(points.values())))
    vals = evaluate_batch(allflat, points) if allflat else []
    out = {}
    pos = 0
    for name, f in zip(names, flats):
        chunk = vals[pos:pos + len(f)]
        pos += len(f)
        shape = _shape(tabs[name])
        out[name] = (np.stack(chunk, axis=-1).reshape((npts,) + shape) if chunk
                     else np.zeros((npts,) + shape))
    return out


# -- canonical d-connection -----------------------------------------------------
@dataclass(frozen=True)
class DConnection:
    L_h: tuple
    L_v: tuple
    C_h: tuple
    C_v: tuple

    @property
    def n(self) -> int:
        return len(self.L_h)

    @property
    def m(self) -> int:
        return len(self.L_v)

    def full_table(self) -> tuple:
        """Full adapted-frame table T[g][b][a] (no h/v mixing for a d-connection)."""
        n, m = self.n, self.m

        def entry(g, b, a):
            gh, bh, ah = g < n, b < n, a < n
            if gh != bh:
                return ZERO
            if gh:
                return self.L_h[g][b][a] if ah else self.C_h[g][b][a - n]
            return self.L_v[g - n][b - n][a] if ah else self.C_v[g - n][b - n][a - n]

        return _table((n + m, n + m, n + m), entry)

    def perturbed(self, block: str, index: tuple, delta) -> "DConnection":
        """Copy with one coefficient shifted by ``delta`` (for negative controls)."""
        tab = getattr(self, block)

        def bump(t, idx):
            if not idx:
                return t + delta
            return tuple(bump(x, idx[1:]) if i == idx[0] else x for i, x in enumerate(t))

        fields = {k: getattr(self, k) for k in ("L_h", "L_v", "C_h", "C_v")}
        fields[block] = bump(tab, index)
        return DConnection(**fields)


def canonical_dconnection(dm: DMetric, nc: NConnection, printed_C: bool = False) -> DConnection:
    """Canonical d-connection coefficients of (dm, nc).

    The v-v coefficient is the Christoffel form of h along the fiber.  With
    ``printed_C=True`` the variant whose second term reads ``e_c h_cd`` is
    returned instead; it is not metric compatible in general.
    """
    split = dm.split
    n, m = split.n, split.m
    g, h = dm.g, dm.h
    gi, hi = dm.g_inv(), dm.h_inv()

    def eh(k, q):
        return frame_derivative(nc, k, q)

    def ev(a, q):
        return vertical_derivative(split, a, q)

    # lowered Christoffel-type symbols, built once
    low_h = _table((n, n, n), lambda j, k, r: (eh(k, g[j][r]) + eh(j, g[k][r]) - eh(r, g[j][k])) * 0.5)
    L_h = _table((n, n, n), lambda i, j, k: sum_terms(gi[i][r] * low_h[j][k][r] for r in range(n)))

    dN = _table((m, m, n), lambda d, b, k: ev(b, nc.N[k][d]))  # dN[d][b][k] = e_b N_k^d

    def lv(a, b, k):
        inner = [eh(k, h[b][c]) - sum_terms(h[d][c] * dN[d][b][k] + h[d][b] * dN[d][c][k] for d in range(m))
                 for c in range(m)]
        return dN[a][b][k] + sum_terms(hi[a][c] * inner[c] for c in range(m)) * 0.5

    L_v = _table((m, m, n), lv)
    C_h = _table((n, n, m), lambda i, j, c: sum_terms(gi[i][k] * ev(c, g[j][k]) for k in range(n)) * 0.5)

    def cv(a, b, c):
        terms = []
        for d in range(m):
            second = ev(c, h[c][d]) if printed_C else ev(b, h[c][d])
            terms.append(hi[a][d] * (ev(c, h[b][d]) + second - ev(d, h[b][c])))
        return sum_terms(terms) * 0.5

    C_v = _table((m, m, m), cv)
    return DConnection(L_h, L_v, C_h, C_v)


# -- torsion ----------------------------------------------------------------------
@dataclass(frozen=True)
class Torsion:
    hhh: tuple  # T^i_jk
    hhv: tuple  # T^i_ja
    vhh: tuple  # T^a_ji
    vvh: tuple  # T^a_bi
    vvv: tuple  # T^a_bc


def dtorsion(dc: DConnection, nc: NConnection, nh: Nonholonomy | None = None) -> Torsion:
    """d-torsion tables as customarily tabulated.

    Note the mixed v-table ``T^a_bi = dN_i^a/dy^b - L^a_bi`` is tabulated with
    the lower indices in (b, i) order; the curvature code uses the
    consistent (i, b) ordering internally.
    """
    split = nc.split
    n, m = split.n, split.m
    nh = nh or nonholonomy(nc)
    return Torsion(
        hhh=_table((n, n, n), lambda i, j, k: dc.L_h[i][j][k] - dc.L_h[i][k][j]),
        hhv=_table((n, n, m), lambda i, j, a: dc.C_h[i][j][a]),
        vhh=_table((m, n, n), lambda a, j, i: nh.Omega[a][j][i]),
        vvh=_table((m, m, n), lambda a, b, i: vertical_derivative(split, b, nc.N[i][a]) - dc.L_v[a][b][i]),
        vvv=_table((m, m, m), lambda a, b, c: dc.C_v[a][b][c] - dc.C_v[a][c][b]),
    )


# -- curvature ----------------------------------------------------------------------
@dataclass(frozen=True)
class CurvatureBlocks:
    R_hhhh: tuple  # R^i_hjk
    R_vvhh: tuple  # R^a_bjk
    P_hhha: tuple  # P^i_jka
    P_vvha: tuple  # P^c_bka
    S_hhvv: tuple  # S^i_jbc
    S_vvvv: tuple  # S^a_bcd

    def as_dict(self) -> dict[str, tuple]:
        return {k: getattr(self, k) for k in ("R_hhhh", "R_vvhh", "P_hhha", "P_vvha", "S_hhvv", "S_vvvv")}


def dcurvature(dc: DConnection, nc: NConnection, nh: Nonholonomy | None = None) -> CurvatureBlocks:
    """The six curvature blocks of a d-connection in the adapted frame.

    ``R^i_hjk`` is component i of R(e_k, e_j) e_h; the P-blocks are
    R(e_a, e_k) acting on e_j / e_b, with the full covariant h-derivative of C.
    """
    split = nc.split
    n, m = split.n, split.m
    nh = nh or nonholonomy(nc)
    L, Lv, C, Cv, Om = dc.L_h, dc.L_v, dc.C_h, dc.C_v, nh.Omega

    def eh(k, q):
        return frame_derivative(nc, k, q)

    def ev(a, q):
        return vertical_derivative(split, a, q)

    # torsion on the pair (e_a, e_k), v-component b: d_a N_k^b - L^b_ak
    Tka = _table((m, n, m), lambda b, k, a: ev(a, nc.N[k][b]) - Lv[b][a][k])

    def R_h(i, hh, j, k):
        return (eh(k, L[i][hh][j]) - eh(j, L[i][hh][k])
                + sum_terms(L[mm][hh][j] * L[i][mm][k] - L[mm][hh][k] * L[i][mm][j] for mm in range(n))
                - sum_terms(C[i][hh][a] * Om[a][k][j] for a in range(m)))

    def R_v(a, b, j, k):
        return (eh(k, Lv[a][b][j]) - eh(j, Lv[a][b][k])
                + sum_terms(Lv[c][b][j] * Lv[a][c][k] - Lv[c][b][k] * Lv[a][c][j] for c in range(m))
                - sum_terms(Cv[a][b][c] * Om[c][k][j] for c in range(m)))

    def DkC_h(i, j, k, a):
        return (eh(k, C[i][j][a])
                + sum_terms(L[i][hh][k] * C[hh][j][a] - L[hh][j][k] * C[i][hh][a] for hh in range(n))
                - sum_terms(Lv[b][a][k] * C[i][j][b] for b in range(m)))

    def DkC_v(c, b, k, a):
        return (eh(k, Cv[c][b][a])
                + sum_terms(Lv[c][d][k] * Cv[d][b][a] - Lv[d][b][k] * Cv[c][d][a] - Lv[d][a][k] * Cv[c][b][d]
                            for d in range(m)))

    def P_h(i, j, k, a):
        return (ev(a, L[i][j][k]) - DkC_h(i, j, k, a)
                + sum_terms(C[i][j][b] * Tka[b][k][a] for b in range(m)))

    def P_v(c, b, k, a):
        return (ev(a, Lv[c][b][k]) - DkC_v(c, b, k, a)
                + sum_terms(Cv[c][b][d] * Tka[d][k][a] for d in range(m)))

    def S_h(i, j, b, c):
        return (ev(c, C[i][j][b]) - ev(b, C[i][j][c])
                + sum_terms(C[hh][j][b] * C[i][hh][c] - C[hh][j][c] * C[i][hh][b] for hh in range(n)))

    def S_v(a, b, c, d):
        return (ev(d, Cv[a][b][c]) - ev(c, Cv[a][b][d])
                + sum_terms(Cv[e][b][c] * Cv[a][e][d] - Cv[e][b][d] * Cv[a][e][c] for e in range(m)))

    def antisym(fn, dims):
        """Build a table antisymmetric in its last two indices, computing each pair once."""
        cache = {}

        def entry(*idx):
            *head, p, q = idx
            if p == q:
                return ZERO
            if p < q:
                key = (*head, p, q)
                if key not in cache:
                    cache[key] = fn(*idx)
                return cache[key]
            key = (*head, q, p)
            if key not in cache:
                cache[key] = fn(*head, q, p)
            return -cache[key]

        return _table(dims, entry)

    return CurvatureBlocks(
        R_hhhh=antisym(R_h, (n, n, n, n)),
        R_vvhh=antisym(R_v, (m, m, n, n)),
        P_hhha=_table((n, n, n, m), P_h),
        P_vvha=_table((m, m, n, m), P_v),
        S_hhvv=antisym(S_h, (n, n, m, m)),
        S_vvvv=antisym(S_v, (m, m, m, m)),
    )


@dataclass(frozen=True)
class RicciData:
    R_ij: tuple
    R_ia: tuple
    R_ai: tuple
    S_ab: tuple
    R_h: Expr  # g^ij R_ij
    S_v: Expr  # h^ab S_ab
    R_total: Expr


def ricci_and_scalars(cb: CurvatureBlocks, dm: DMetric) -> RicciData:
    """Ricci d-tensor (R_ij = R^k_ijk, R_ia = -P^k_ika, R_ai = P^b_aib, S_ab = S^c_abc) and scalars."""
    n, m = dm.split.n, dm.split.m
    gi, hi = dm.g_inv(), dm.h_inv()
    R_ij = _table((n, n), lambda i, j: sum_terms(cb.R_hhhh[k][i][j][k] for k in range(n)))
    R_ia = _table((n, m), lambda i, a: -sum_terms(cb.P_hhha[k][i][k][a] for k in range(n)))
    R_ai = _table((m, n), lambda a, i: sum_terms(cb.P_vvha[b][a][i][b] for b in range(m)))
    S_ab = _table((m, m), lambda a, b: sum_terms(cb.S_vvvv[c][a][b][c] for c in range(m)))
    R_h = sum_terms(gi[i][j] * R_ij[i][j] for i in range(n) for j in range(n))
    S_v = sum_terms(hi[a][b] * S_ab[a][b] for a in range(m) for b in range(m))
    return RicciData(R_ij, R_ia, R_ai, S_ab, R_h, S_v, R_h + S_v)


# -- residuals ----------------------------------------------------------------------
def _adapted_metric(dm: DMetric) -> tuple:
    n, m = dm.split.n, dm.split.m

    def entry(p, q):
        if p < n and q < n:
            return dm.g[p][q]
        if p >= n and q >= n:
            return dm.h[p - n][q - n]
        return ZERO

    return _table((n + m, n + m), entry)


def covariant_metric_derivative(table, dm: DMetric, nc: NConnection) -> tuple:
    """(nabla_{e_a} G)(e_b, e_c) for a full connection table over the block-diagonal adapted metric."""
    n, m = dm.split.n, dm.split.m
    D = n + m
    G = _adapted_metric(dm)

    def entry(a, b, c):
        return (adapted_derivative(nc, a, G[b][c])
                - sum_terms(table[s][b][a] * G[s][c] + table[s][c][a] * G[b][s] for s in range(D)))

    return _table((D, D, D), entry)


def compatibility_residual(dc: DConnection, dm: DMetric, nc: NConnection, points: Points) -> float:
    """max |D g| over h/v projections (D_j g_kl, D_a g_kl, D_j h_ab, D_a h_bc) at the points."""
    n, m = dm.split.n, dm.split.m
    Dg = covariant_metric_derivative(dc.full_table(), dm, nc)
    # only the block-diagonal projections are meaningful for a d-connection
    keep = [Dg[a][b][c] for a in range(n + m) for b in range(n + m) for c in range(n + m)
            if (b < n) == (c < n)]
    if not keep:
        return 0.0
    vals = evaluate_batch(keep, points)
    return float(max(np.max(np.abs(v)) for v in vals))


def frame_brackets(nc: NConnection, nh: Nonholonomy | None = None) -> tuple:
    """B[g][a][b]: component g of [e_a, e_b]."""
    n, m = nc.split.n, nc.split.m
    nh = nh or nonholonomy(nc)

    def entry(g, a, b):
        if g < n:
            return ZERO
        c = g - n
        if a < n and b < n:
            return nh.Omega[c][a][b]
        if a < n <= b:
            return nh.W[c][a][b - n]
        if b < n <= a:
            return -nh.W[c][b][a - n]
        return ZERO

    D = n + m
    return _table((D, D, D), entry)


def torsion_of_table(table, nc: NConnection, nh: Nonholonomy | None = None) -> tuple:
    """T[g][a][b] = component g of nabla_a e_b - nabla_b e_a - [e_a, e_b]."""
    D = nc.split.n + nc.split.m
    B = frame_brackets(nc, nh)
    return _table((D, D, D), lambda g, a, b: table[g][b][a] - table[g][a][b] - B[g][a][b])


# -- Levi-Civita via distortion --------------------------------------------------------
@dataclass(frozen=True)
class LeviCivitaResult:
    Z: tuple  # full table
    Gamma: tuple  # full table of the Levi-Civita connection
    variant: str


def distortion(dm: DMetric, nc: NConnection, dc: DConnection, variant: str = "corrected",
               nh: Nonholonomy | None = None) -> tuple:
    """Distortion Z with nabla = D + Z as a full table.

    ``variant="corrected"`` gives the tensor that reproduces the Levi-Civita
    connection.  ``variant="printed"`` evaluates the customary tabulated
    expressions literally (projector forms included); three of its blocks
    differ from the corrected ones.
    """
    if variant not in ("corrected", "printed"):
        raise ValueError(f"unknown distortion variant {variant!r}")
    split = dm.split
    n, m = split.n, split.m
    g, h = dm.g, dm.h
    gi, hi = dm.g_inv(), dm.h_inv()
    nh = nh or nonholonomy(nc)
    Om = nh.Omega
    C = dc.C_h

    def ev(a, q):
        return vertical_derivative(split, a, q)

    # oL[c][a][j] = L^c_aj - e_a N_j^c
    oL = _table((m, m, n), lambda c, a, j: dc.L_v[c][a][j] - ev(a, nc.N[j][c]))
    # half Omega lowered and raised: Om_h[i][k][b] = 1/2 Omega^c_jk h_cb g^ji
    Om_h = _table((n, n, m), lambda i, k, b: sum_terms(
        Om[c][j][k] * h[c][b] * gi[j][i] for c in range(m) for j in range(n)) * 0.5)

    def xi(i, hh, j, k):  # Xi^{ih}_{jk}
        return (((1.0 if i == j and hh == k else 0.0) - g[j][k] * gi[i][hh])) * 0.5

    def pm_xi(sign, a, b, c, d):  # ^{+-}Xi^{ab}_{cd}
        return ((1.0 if a == c and b == d else 0.0) + sign * h[c][d] * hi[a][b]) * 0.5

    def z_vhh(a, j, k):  # Z^a_jk
        return (-sum_terms(C[i][j][b] * g[i][k] * hi[a][b] for i in range(n) for b in range(m))
                - Om[a][j][k] * 0.5)

    def z_hvh(i, b, k):  # Z^i_bk, h-comp of nabla_{e_k} e_b
        if variant == "corrected":
            return C[i][k][b] + Om_h[i][k][b]
        return Om_h[i][k][b] - sum_terms(xi(i, hh, j, k) * C[j][hh][b] for hh in range(n) for j in range(n))

    def z_vvh(a, b, k):  # Z^a_bk
        if variant == "corrected":
            return ZERO
        return sum_terms(pm_xi(+1, a, d, c, b) * oL[c][d][k] for c in range(m) for d in range(m))

    def z_hhv(i, k, b):  # Z^i_kb, h-comp of nabla_{e_b} e_k
        if variant == "corrected":
            return Om_h[i][k][b]
        return Om_h[i][k][b] + sum_terms(xi(i, hh, j, k) * C[j][hh][b] for hh in range(n) for j in range(n))

    def z_vhv(a, j, b):  # Z^a_jb, v-comp of nabla_{e_b} e_j
        if variant == "corrected":
            return oL[a][b][j]
        return -sum_terms(pm_xi(-1, a, d, c, b) * oL[c][d][j] for c in range(m) for d in range(m))

    def z_hvv(i, a, b):  # Z^i_ab, h-comp of nabla_{e_b} e_a
        return -sum_terms(gi[i][j] * (oL[c][a][j] * h[c][b] + oL[c][b][j] * h[c][a])
                          for j in range(n) for c in range(m)) * 0.5

    def entry(gg, bb, aa):
        gh, bh, ah = gg < n, bb < n, aa < n
        G, B, A = (gg if gh else gg - n), (bb if bh else bb - n), (aa if ah else aa - n)
        if ah:  # along e_k
            if bh:
                return ZERO if gh else z_vhh(G, B, A)
            return z_hvh(G, B, A) if gh else z_vvh(G, B, A)
        if bh:  # along e_b acting on e_j
            return z_hhv(G, B, A) if gh else z_vhv(G, B, A)
        return z_hvv(G, B, A) if gh else ZERO

    D = n + m
    return _table((D, D, D), entry)


def levicivita_via_distortion(dm: DMetric, nc: NConnection, dc: DConnection | None = None,
                              variant: str = "corrected") -> LeviCivitaResult:
    dc = dc or canonical_dconnection(dm, nc)
    nh = nonholonomy(nc)
    Z = distortion(dm, nc, dc, variant, nh)
    F = dc.full_table()
    D = dm.split.dim
    Gamma = _table((D, D, D), lambda g, b, a: F[g][b][a] + Z[g][b][a])
    return LeviCivitaResult(Z, Gamma, variant)


def bruteforce_levicivita(dm: DMetric, nc: NConnection, points: Points) -> np.ndarray:
    """Independent oracle: coordinate Christoffels of the off-diagonal metric, moved to the adapted frame.

    Returns an array ``[point, g, b, a]`` laid out like a full table.  Only
    first derivatives are symbolic; all linear algebra is numeric.
    """
    split = dm.split
    n, m = split.n, split.m
    D = n + m
    coords = split.coords
    G = assemble_offdiagonal(dm, nc).G
    dG = _table((D, D, D), lambda s, l, mu: differentiate(G[s][l], coords[mu]))
    dN = _table((n, m, D), lambda i, a, mu: differentiate(nc.N[i][a], coords[mu]))
    vals = eval_tables({"G": G, "dG": dG, "N": nc.N, "dN": dN}, points)
    Gv, dGv, Nv, dNv = vals["G"], vals["dG"], vals["N"], vals["dN"]
    P = Gv.shape[0]
    Ginv = np.linalg.inv(Gv)
    # lowered first kind [s, mu, l] = 1/2 (d_mu G_sl + d_l G_smu - d_s G_mul)
    first = 0.5 * (np.einsum("psla->psal", dGv) + dGv - np.einsum("pmls->pslm", dGv))
    # Christoffel Chr[p, nu, mu, l]
    Chr = np.einsum("pns,psml->pnml", Ginv, first)
    # frame A[p, alpha, mu]: e_alpha = A_alpha^mu d_mu
    A = np.zeros((P, D, D))
    for k in range(D):
        A[:, k, k] = 1.0
    A[:, :n, n:] = -Nv
    dA = np.zeros((P, D, D, D))  # dA[p, beta, nu, mu] = d_mu A_beta^nu
    dA[:, :n, n:, :] = -dNv
    # nabla_{e_alpha} e_beta in coordinates: X[p, alpha, beta, nu]
    X = (np.einsum("pam,pbnm->pabn", A, dA)
         + np.einsum("pam,pbl,pnml->pabn", A, A, Chr))
    # back to the adapted frame: dual basis B = A^{-1}, comps = X^nu (A^{-1})_nu^gamma
    Ainv = np.linalg.inv(A)
    comps = np.einsum("pabn,png->pabg", X, Ainv)
    return np.transpose(comps, (0, 3, 2, 1))  # [p, g, b, a]


# -- constant-coefficient connections --------------------------------------------------
@dataclass(frozen=True)
class ConstantConnectionSpec:
    h0: np.ndarray  # m x m
    L0: np.ndarray  # L0[a][b][k]

    def __post_init__(self):
        h0 = np.asarray(self.h0, dtype=float)
        L0 = np.asarray(self.L0, dtype=float)
        if h0.ndim != 2 or h0.shape[0] != h0.shape[1] or not np.allclose(h0, h0.T, atol=0, rtol=0):
            raise ValueError("h0 must be a symmetric square matrix")
        if abs(np.linalg.det(h0)) < 1e-12:
            raise ValueError("h0 must be invertible")
        if not np.all(np.isfinite(L0)):
            raise ValueError("L0 must be finite")
        object.__setattr__(self, "h0", h0)
        object.__setattr__(self, "L0", L0)


def constant_connection_residual_table(nc: NConnection, h0: np.ndarray) -> tuple:
    """Expressions (1/2)(d_b N_k^a - h0^{ac} h0_{db} d_c N_k^d) indexed [a][b][k]."""
    split = nc.split
    n, m = split.n, split.m
    h0 = np.asarray(h0, dtype=float)
    h0i = np.linalg.inv(h0)
    dN = _table((m, m, n), lambda d, b, k: vertical_derivative(split, b, nc.N[k][d]))

    def entry(a, b, k):
        return (dN[a][b][k] - sum_terms(float(h0i[a][c] * h0[d][b]) * dN[d][c][k]
                                        for c in range(m) for d in range(m)
                                        if h0i[a][c] * h0[d][b] != 0.0)) * 0.5

    return _table((m, m, n), entry)


def constant_connection_check(nc: NConnection, spec: ConstantConnectionSpec, points: Points) -> float:
    """max |2 L0 - (d_b N_k^a - h0^{ac} h0_{db} d_c N_k^d)| over points and indices."""
    vals = eval_table(constant_connection_residual_table(nc, spec.h0), points)
    return float(np.max(np.abs(2.0 * vals - 2.0 * spec.L0[None, ...]))) if vals.size else 0.0


def constant_curvature_closed_form(L0: np.ndarray) -> np.ndarray:
    """R^a_bjk = L0^c_bj L0^a_ck - L0^c_bk L0^a_cj."""
    L0 = np.asarray(L0, dtype=float)
    t = np.einsum("cbj,ack->abjk", L0, L0)
    return t - np.transpose(t, (0, 1, 3, 2))
