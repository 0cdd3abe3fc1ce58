"""4D off-diagonal Einstein ansatz: generation and numerical verification.

Coordinates are fixed to ``x1, x2`` (base) and ``v, y4`` (fiber).  The
generated d-metric is ``diag(eps1 e^psi, eps2 e^psi | h3, h4)`` with
N-coefficients ``N_i^3 = w_i`` and ``N_i^4 = n_i``.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .connection import canonical_dconnection, dcurvature, eval_tables, ricci_and_scalars
from .errors import DegeneracyError, QuadratureError
from .expr import ONE, ZERO, Expr, Special, absval, differentiate, evaluate_batch, exp, sqrt
from .manifold import DMetric, NConnection, Splitting, nonholonomy
from .sampling import sample_points

log = logging.getLogger(__name__)

SPLIT4 = Splitting(2, 2, ("x1", "x2"), ("v", "y4"))
COORDS4 = SPLIT4.coords


# -- adaptive quadrature --------------------------------------------------------------
def adaptive_simpson_cells(fn, edges: np.ndarray, tol: float = 1e-10, max_depth: int = 40) -> np.ndarray:
    """Integral of ``fn`` over each cell [edges[k], edges[k+1]] by adaptive Simpson.

    ``fn`` maps an array of abscissae to an array of values.  All open
    intervals are refined together, one level per pass.  The absolute
    tolerance is shared out over cells in proportion to their width.
    """
    edges = np.asarray(edges, dtype=float)
    a, b = edges[:-1], edges[1:]
    total = float(edges[-1] - edges[0]) or 1.0
    out = np.zeros(len(a))
    m = 0.5 * (a + b)
    vals = fn(np.concatenate([a, m, b]))
    k = len(a)
    fa, fm, fb = vals[:k], vals[k:2 * k], vals[2 * k:]
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    cell = np.arange(len(a))
    tol_i = tol * np.abs(b - a) / total
    depth = 0
    while len(a):
        m = 0.5 * (a + b)
        lm, rm = 0.5 * (a + m), 0.5 * (m + b)
        vals = fn(np.concatenate([lm, rm]))
        flm, frm = vals[:len(a)], vals[len(a):]
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        err = left + right - whole
        done = np.abs(err) <= 15.0 * tol_i
        np.add.at(out, cell[done], (left + right + err / 15.0)[done])
        depth += 1
        keep = ~done
        if not np.any(keep):
            break
        if depth >= max_depth:
            worst = int(np.argmax(np.where(keep, np.abs(err), -1.0)))
            raise QuadratureError("adaptive Simpson did not converge", (float(a[worst]), float(b[worst])))
        a, m, b = a[keep], m[keep], b[keep]
        fa, fm, fb = fa[keep], fm[keep], fb[keep]
        flm, frm = flm[keep], frm[keep]
        left, right = left[keep], right[keep]
        cell, tol_i = cell[keep], tol_i[keep] * 0.5
        a = np.concatenate([a, m])
        b = np.concatenate([m, b])
        fa, fm, fb = np.concatenate([fa, fm]), np.concatenate([flm, frm]), np.concatenate([fm, fb])
        whole = np.concatenate([left, right])
        cell = np.concatenate([cell, cell])
        tol_i = np.concatenate([tol_i, tol_i])
    return out


class VIntegral(Special):
    """The field (x, v) -> integral of ``integrand`` over [v0, v] in ``var``.

    Per binding of the remaining coordinates, cumulative values are cached
    on a uniform grid of ``nodes`` points over [v0, v1]; between nodes a
    cubic Hermite interpolant uses the exact integrand as slope.  Outside
    the cached range the integral is computed directly.
    """

    __slots__ = ("integrand", "var", "v0", "v1", "nodes", "tol", "_cache", "__dict__")
    _registry: dict = {}

    def __new__(cls, integrand: Expr, var: str, v0: float, v1: float, nodes: int = 257, tol: float = 1e-10):
        key = (id(integrand), var, float(v0), float(v1), nodes, tol)
        hit = cls._registry.get(key)
        if hit is not None:
            return hit
        self = super().__new__(cls)
        self.integrand = integrand
        self.var = var
        self.v0, self.v1 = float(v0), float(v1)
        self.nodes = nodes
        self.tol = tol
        self._cache = {}
        self.variables = integrand.variables | {var}
        self._hash = hash(key)
        cls._registry[key] = (self)
        # keep the integrand alive so id() in the key stays unique
        self.__dict__["_keep"] = integrand
        return self

    def __init__(self, *args, **kwargs):
        pass

    def __str__(self):
        return f"integral({self.integrand}, {self.var}={self.v0!r}..{self.var})"

    def partial(self, name: str) -> Expr:
        if name == self.var:
            return self.integrand
        d = differentiate(self.integrand, name)
        if d is ZERO:
            return ZERO
        return VIntegral(d, self.var, self.v0, self.v1, self.nodes, self.tol)

    def _integrand_fn(self, point: Mapping[str, float]):
        others = {k: float(v) for k, v in point.items() if k != self.var and k in self.integrand.variables}

        def fn(vs: np.ndarray) -> np.ndarray:
            binding = {k: np.full(len(vs), x) for k, x in others.items()}
            binding[self.var] = vs
            return evaluate_batch([self.integrand], binding)[0]

        return fn, tuple(sorted(others.items()))

    def eval_scalar(self, child_values: Sequence[float], point: Mapping[str, float]) -> float:
        v = float(point[self.var])
        fn, key = self._integrand_fn(point)
        lo, hi = self.v0, self.v1
        if not (lo <= v <= hi) or hi <= lo:
            if v == lo:
                return 0.0
            sign = 1.0 if v > lo else -1.0
            a, b = (lo, v) if v > lo else (v, lo)
            return sign * float(adaptive_simpson_cells(fn, np.array([a, b]), self.tol)[0])
        grid = self._cache.get(key)
        if grid is None:
            edges = np.linspace(lo, hi, self.nodes)
            cells = adaptive_simpson_cells(fn, edges, self.tol)
            cum = np.concatenate([[0.0], np.cumsum(cells)])
            grid = (edges, cum, fn(edges))
            self._cache[key] = grid
        edges, cum, slopes = grid
        h = edges[1] - edges[0]
        k = min(int((v - lo) / h), len(edges) - 2)
        t = (v - edges[k]) / h
        h00 = 2 * t ** 3 - 3 * t ** 2 + 1
        h10 = t ** 3 - 2 * t ** 2 + t
        h01 = -2 * t ** 3 + 3 * t ** 2
        h11 = t ** 3 - t ** 2
        return float(h00 * cum[k] + h10 * h * slopes[k] + h01 * cum[k + 1] + h11 * h * slopes[k + 1])


# -- data types -------------------------------------------------------------------------------
@dataclass(frozen=True)
class SourceSpec:
    Upsilon1: Expr = ZERO
    Upsilon3: Expr = ZERO
    kappa: float = 1.0

    def __post_init__(self):
        if not self.Upsilon1.variables <= {"x1", "x2", "v"}:
            raise ValueError("Upsilon1 may depend on x1, x2, v only")
        if not self.Upsilon3.variables <= {"x1", "x2"}:
            raise ValueError("Upsilon3 may depend on x1, x2 only")


@dataclass(frozen=True)
class AnsatzData:
    psi: Expr
    f: Expr
    f0: Expr = ZERO
    sigma0: Expr = ONE
    h0bar: Expr = ONE
    h0: float = 1.0
    eps: tuple[int, int, int, int] = (1, 1, -1, -1)
    n1: tuple[Expr, Expr] = (ZERO, ZERO)
    n2: tuple[Expr, Expr] = (ZERO, ZERO)
    box: Mapping[str, tuple[float, float]] = field(
        default_factory=lambda: {"x1": (0.0, 1.0), "x2": (0.0, 1.0), "v": (1.0, 2.0), "y4": (0.0, 1.0)})
    v0: float | None = None
    w: tuple[Expr, Expr] | None = None  # vacuum-mode override

    def __post_init__(self):
        if len(self.eps) != 4 or any(e not in (1, -1) for e in self.eps):
            raise ValueError("eps must be four signs +1/-1")
        xs = {"x1", "x2"}
        for name in ("psi", "f0", "sigma0", "h0bar"):
            if not getattr(self, name).variables <= xs:
                raise ValueError(f"{name} may depend on x1, x2 only")
        for e in tuple(self.n1) + tuple(self.n2):
            if not e.variables <= xs:
                raise ValueError("integration functions n1, n2 may depend on x1, x2 only")
        if not self.f.variables <= {"x1", "x2", "v"}:
            raise ValueError("f may depend on x1, x2, v only")
        for c in COORDS4:
            if c not in self.box:
                raise ValueError(f"chart box lacks coordinate {c}")

    @property
    def lower_v(self) -> float:
        return self.box["v"][0] if self.v0 is None else float(self.v0)

    @property
    def upper_v(self) -> float:
        return max(self.box["v"][1], self.lower_v)


@dataclass
class GeneratedSolution:
    dm: DMetric
    nc: NConnection
    sigma: Expr
    psi_residual: Expr
    provenance: dict
    warnings: list[str] = field(default_factory=list)

    @property
    def h3(self) -> Expr:
        return self.dm.h[0][0]

    @property
    def h4(self) -> Expr:
        return self.dm.h[1][1]

    @property
    def w(self) -> tuple[Expr, Expr]:
        return (self.nc.N[0][0], self.nc.N[1][0])

    @property
    def n(self) -> tuple[Expr, Expr]:
        return (self.nc.N[0][1], self.nc.N[1][1])


# -- generation -------------------------------------------------------------------------------------
def _fstar(ad: AnsatzData) -> Expr:
    return differentiate(ad.f, "v")


def _vint(integrand: Expr, ad: AnsatzData) -> Expr:
    if integrand is ZERO:
        return ZERO
    return VIntegral(integrand, "v", ad.lower_v, ad.upper_v)


def polarization(ad: AnsatzData, src: SourceSpec) -> Expr:
    """sigma = sigma0 - (eps3/8) h0bar^2 * integral(Upsilon1 f* (f - f0) dv) from v0."""
    integrand = src.Upsilon1 * _fstar(ad) * (ad.f - ad.f0)
    I = _vint(integrand, ad)
    if I is ZERO:
        return ad.sigma0
    return ad.sigma0 - (ad.eps[2] / 8.0) * ad.h0bar * ad.h0bar * I


def _check_fstar(ad: AnsatzData, points) -> None:
    fs = _fstar(ad)
    if fs is ZERO:
        raise DegeneracyError("f_star_zero", "f does not depend on v")
    vals = evaluate_batch([fs], points)[0]
    if np.any(np.abs(vals) < 1e-12) or (np.any(vals > 0) and np.any(vals < 0)):
        raise DegeneracyError("f_star_zero", "df/dv vanishes or changes sign on the chart box")


def _check_f_minus_f0(ad: AnsatzData, points) -> None:
    """f - f0 must keep one sign over [v0, v] for every sampled (x1, x2)."""
    vs = np.linspace(min(ad.lower_v, ad.box["v"][0]), ad.upper_v, 257)
    diff = ad.f - ad.f0
    for x1, x2 in zip(points["x1"], points["x2"]):
        d = evaluate_batch([diff], {"x1": np.full(len(vs), x1), "x2": np.full(len(vs), x2), "v": vs})[0]
        if np.any(np.abs(d) < 1e-12) or (np.any(d > 0) and np.any(d < 0)):
            raise DegeneracyError("f_degenerate", f"f - f0 vanishes inside the v-range at x=({x1!r}, {x2!r})")


VARIANTS = ("printed", "exact")


def generate_solution(ad: AnsatzData, src: SourceSpec | None = None, vacuum: bool = False,
                      seed: int = 0, check_points: int = 32, variant: str = "exact") -> GeneratedSolution:
    """Build the d-metric and N-coefficients from generating data.

    ``variant="printed"`` uses h3 = eps3 h0^2 f*^2 |sigma| and
    w_i = -d_i sigma / sigma*.  ``variant="exact"`` uses
    h3 = eps3 h0^2 f*^2 / |sigma| and w_i = +d_i sigma / sigma*, the pair for
    which the sourced fiber and off-diagonal equations close exactly with
    e_i = d_i - N_i^a d_a.  The n-integrand is sigma f*^2 (f - f0)^-3 for
    ``printed`` and sqrt|h3| (f - f0)^-3 for ``exact``; they agree only when
    f* sigma is constant in v.
    """
    if variant not in VARIANTS:
        raise ValueError(f"unknown ansatz variant {variant!r}")
    src = src or SourceSpec()
    eps1, eps2, eps3, eps4 = ad.eps
    pts = sample_points(ad.box, check_points, seed, COORDS4)
    _check_fstar(ad, pts)
    warnings: list[str] = []

    fs = _fstar(ad)
    if vacuum:
        sigma = ONE
        w = tuple(ad.w) if ad.w is not None else (ZERO, ZERO)
    else:
        sigma = polarization(ad, src)
        sstar = differentiate(sigma, "v")
        if sstar is ZERO:
            w = (ZERO, ZERO)
        else:
            sign = -1.0 if variant == "printed" else 1.0
            w = tuple(sign * differentiate(sigma, x) / sstar for x in ("x1", "x2"))
    if sigma is not ONE:
        svals = evaluate_batch([sigma], pts)[0]
        if np.any(svals > 0) and np.any(svals < 0):
            warnings.append("polarization changes sign on the chart box; h3 degenerates where it vanishes")

    if sigma is ONE:
        h3 = eps3 * ad.h0 ** 2 * fs * fs
    elif variant == "printed":
        h3 = eps3 * ad.h0 ** 2 * fs * fs * absval(sigma)
    else:
        h3 = eps3 * ad.h0 ** 2 * fs * fs / absval(sigma)
    h4 = eps4 * (ad.f - ad.f0) * (ad.f - ad.f0)

    if any(n2k is not ZERO for n2k in ad.n2):
        _check_f_minus_f0(ad, pts)
        if variant == "printed":
            I = _vint(sigma * fs * fs * (ad.f - ad.f0) ** -3.0, ad)
        else:
            # n* = sqrt|h3| / |h4|^(3/2) up to the (constant) sign of f - f0
            I = _vint(sqrt(absval(h3)) * (ad.f - ad.f0) ** -3.0, ad)
    else:
        I = ZERO
    n = tuple(ad.n1[k] + ad.n2[k] * I for k in range(2))

    g = ((eps1 * exp(ad.psi), ZERO), (ZERO, eps2 * exp(ad.psi)))
    h = ((h3, ZERO), (ZERO, h4))
    dm = DMetric(SPLIT4, g, h, tuple(ad.eps))
    nc = NConnection(SPLIT4, ((w[0], n[0]), (w[1], n[1])))
    psi_res = (eps1 * differentiate(differentiate(ad.psi, "x1"), "x1")
               + eps2 * differentiate(differentiate(ad.psi, "x2"), "x2") - src.Upsilon3)
    r = evaluate_batch([psi_res], pts)[0]
    if np.max(np.abs(r)) > 1e-10:
        warnings.append(f"psi equation residual {float(np.max(np.abs(r))):.3e} at sample points")
    for msg in warnings:
        log.warning(msg)
    prov = {
        "psi": str(ad.psi), "f": str(ad.f), "f0": str(ad.f0), "sigma0": str(ad.sigma0),
        "h0bar": str(ad.h0bar), "h0": ad.h0, "eps": list(ad.eps),
        "n1": [str(e) for e in ad.n1], "n2": [str(e) for e in ad.n2],
        "Upsilon1": str(src.Upsilon1), "Upsilon3": str(src.Upsilon3), "kappa": src.kappa,
        "vacuum": bool(vacuum), "v0": ad.lower_v, "variant": variant,
    }
    return GeneratedSolution(dm, nc, sigma, psi_res, prov, warnings)


# -- verification ----------------------------------------------------------------------------------
@dataclass
class EinsteinReport:
    components: np.ndarray  # 4x4 max |E^a_b| over points
    max_residual: float
    R_h: np.ndarray  # per-point h-scalar
    S_v: np.ndarray
    mixed: np.ndarray  # [point, a, b] values of R^a_b - 1/2 delta R (without source)

    def component_dict(self) -> dict[str, float]:
        return {f"{a + 1}_{b + 1}": float(self.components[a, b]) for a in range(4) for b in range(4)}


def einstein_tensor_values(sol: GeneratedSolution, points) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Mixed Einstein tensor of the canonical d-connection at the points: [p, a, b], plus R_h, S_v."""
    dm, nc = sol.dm, sol.nc
    dc = canonical_dconnection(dm, nc)
    nh = nonholonomy(nc)
    cb = dcurvature(dc, nc, nh)
    ric = ricci_and_scalars(cb, dm)
    gi, hi = dm.g_inv(), dm.h_inv()
    vals = eval_tables({
        "R_ij": ric.R_ij, "R_ia": ric.R_ia, "R_ai": ric.R_ai, "S_ab": ric.S_ab,
        "gi": gi, "hi": hi, "R_h": (ric.R_h,), "S_v": (ric.S_v,),
    }, points)
    P = vals["gi"].shape[0]
    Ric = np.zeros((P, 4, 4))
    Ric[:, :2, :2] = vals["R_ij"]
    Ric[:, :2, 2:] = vals["R_ia"]
    Ric[:, 2:, :2] = vals["R_ai"]
    Ric[:, 2:, 2:] = vals["S_ab"]
    Ginv = np.zeros((P, 4, 4))
    Ginv[:, :2, :2] = vals["gi"]
    Ginv[:, 2:, 2:] = vals["hi"]
    mixed = np.einsum("pac,pcb->pab", Ginv, Ric)
    Rt = vals["R_h"][:, 0] + vals["S_v"][:, 0]
    mixed = mixed - 0.5 * Rt[:, None, None] * np.eye(4)[None]
    return mixed, vals["R_h"][:, 0], vals["S_v"][:, 0]


def source_values(src: SourceSpec, points) -> np.ndarray:
    u1, u3 = evaluate_batch([src.Upsilon1, src.Upsilon3], points)
    P = len(u1)
    Y = np.zeros((P, 4, 4))
    Y[:, 0, 0] = Y[:, 1, 1] = u1
    Y[:, 2, 2] = Y[:, 3, 3] = u3
    return Y


def einstein_residual(sol: GeneratedSolution, src: SourceSpec | None, points) -> EinsteinReport:
    """Per-component max |R^a_b - 1/2 delta^a_b R - kappa Upsilon^a_b| over the points."""
    src = src or SourceSpec()
    sol.dm.check_invertible(points)
    mixed, Rh, Sv = einstein_tensor_values(sol, points)
    E = mixed - src.kappa * source_values(src, points)
    comps = np.max(np.abs(E), axis=0)
    return EinsteinReport(comps, float(np.max(comps)), Rh, Sv, mixed)


def convention_constant(sol: GeneratedSolution, src: SourceSpec, points) -> dict[str, float]:
    """Least-squares c with (R^a_b - 1/2 delta R) = c Upsilon^a_b on the diagonal, per block.

    Returns the fitted constants for the h-block (Upsilon1 rows) and the
    v-block (Upsilon3 rows), each with the rms misfit.
    """
    mixed, _, _ = einstein_tensor_values(sol, points)
    Y = source_values(src, points)
    out = {}
    for name, idx in (("h_block", (0, 1)), ("v_block", (2, 3))):
        lhs = np.concatenate([mixed[:, i, i] for i in idx])
        y = np.concatenate([Y[:, i, i] for i in idx])
        denom = float(np.dot(y, y))
        c = float(np.dot(lhs, y) / denom) if denom > 0 else float("nan")
        out[name] = c
        out[name + "_rms_misfit"] = float(np.sqrt(np.mean((lhs - c * y) ** 2))) if denom > 0 else float("nan")
    return out


@dataclass
class LCConstraintReport:
    ep2b: float  # h4* phi / (h3 h4) - Upsilon1
    ep2b1: float  # w1' - w2. - w2 w1* + w1 w2*  (= Omega^3_12 for N_i^3 = w_i)
    ep2b2: float  # n1' - n2.
    ep2b1_printed: float = 0.0  # w1' - w2. + w2 w1* - w1 w2*
    degenerate: bool = False
    skipped_points: int = 0

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.ep2b, self.ep2b1, self.ep2b2)


def lc_constraint_residual(sol: GeneratedSolution, src: SourceSpec | None, points) -> LCConstraintReport:
    """The three extra conditions singling out Levi-Civita configurations (reported, never enforced).

    ``.`` is d/dx1, ``'`` is d/dx2 and ``*`` is d/dv.  The w-condition is
    evaluated as the N-curvature Omega^3_12 of N_i^3 = w_i, which vanishes
    identically for w_i = d_i phi / phi*; the form with the quadratic terms'
    signs flipped is reported alongside as ``ep2b1_printed``.
    """
    src = src or SourceSpec()
    h3, h4 = sol.h3, sol.h4
    w1, w2 = sol.w
    n1, n2 = sol.n

    def d(e, x):
        return differentiate(e, x)

    r2 = d(w1, "x2") - d(w2, "x1") - w2 * d(w1, "v") + w1 * d(w2, "v")
    r2p = d(w1, "x2") - d(w2, "x1") + w2 * d(w1, "v") - w1 * d(w2, "v")
    r3 = d(n1, "x2") - d(n2, "x1")
    v2, v2p, v3 = evaluate_batch([r2, r2p, r3], points)
    h4s = d(h4, "v")
    degenerate = h4s is ZERO
    skipped = 0
    if degenerate:
        log.info("h4* vanishes identically: first constraint is the degenerate Upsilon1 -> 0 branch")
        r1max = float(np.max(np.abs(evaluate_batch([src.Upsilon1], points)[0])))
    else:
        h3v, h4v, h4sv, u1 = evaluate_batch([h3, h4, h4s, src.Upsilon1], points)
        prod = h3v * h4v
        ok = (prod != 0.0) & (h4sv != 0.0)
        skipped = int(np.count_nonzero(~ok))
        if skipped:
            log.info("skipping %d points where h3 h4 or h4* vanishes", skipped)
        with np.errstate(all="ignore"):
            phi = np.log(np.abs(h4sv / np.sqrt(np.abs(prod))))
            r1 = h4sv * phi / prod - u1
        r1max = float(np.max(np.abs(r1[ok]))) if np.any(ok) else 0.0
    return LCConstraintReport(r1max, float(np.max(np.abs(v2))), float(np.max(np.abs(v3))),
                              float(np.max(np.abs(v2p))), degenerate, skipped)


def interior_points(box: Mapping[str, tuple[float, float]], count: int = 32, seed: int = 0,
                    margin: float = 0.05) -> dict[str, np.ndarray]:
    """Sample points shrunk away from the box faces by ``margin`` of each side."""
    inner = {}
    for c in COORDS4:
        lo, hi = box[c]
        pad = (hi - lo) * margin
        inner[c] = (lo + pad, hi - pad)
    return sample_points(inner, count, seed, COORDS4)
