"""Three-dimensional solitonic seed for the fiber coefficient h4 and the metrics it generates."""
from __future__ import annotations

import dataclasses
from typing import Mapping

import numpy as np

from ..einstein import AnsatzData, GeneratedSolution, generate_solution
from ..errors import DegeneracyError
from ..expr import Expr, absval, const, differentiate, evaluate_batch, sech, sqrt, var
from ..sampling import sample_points

SEED_COORDS = ("x1", "x2", "v")


def solit1_expr(h4: Expr, eps: int) -> Expr:
    """h4.. + eps (h4' + 6 h4 h4* + h4***)*, with . = d/dx1, ' = d/dx2, * = d/dv."""
    if eps not in (1, -1):
        raise ValueError("eps must be +1 or -1")
    d = differentiate
    kdv = d(h4, "x2") + 6.0 * h4 * d(h4, "v") + d(d(d(h4, "v"), "v"), "v")
    return d(d(h4, "x1"), "x1") + eps * d(kdv, "v")


def solit1_residual(h4: Expr, eps: int, points: Mapping[str, np.ndarray]) -> float:
    r = solit1_expr(h4, eps)
    return float(np.max(np.abs(evaluate_batch([r], points)[0])))


def line_soliton_h4(kappa: float) -> Expr:
    """2 kappa^2 sech^2(kappa (v - 4 kappa^2 x2)): the KdV one-soliton with x2 as time."""
    k = float(kappa)
    s = sech(const(k) * (var("v") - const(4.0 * k * k) * var("x2")))
    return const(2.0 * k * k) * s * s


def solitonic_metric(h4: Expr, ad: AnsatzData, seed: int = 0, check_points: int = 64) -> GeneratedSolution:
    """Vacuum metric with fiber coefficient h4: f = f0 + sqrt(|h4|), eps4 = sign(h4), sigma = 1."""
    if not h4.variables <= set(SEED_COORDS):
        raise ValueError("h4 may depend on x1, x2, v only")
    pts = sample_points(ad.box, check_points, seed, ("x1", "x2", "v", "y4"))
    vals = evaluate_batch([h4], pts)[0]
    if np.any(np.abs(vals) < 1e-300) or (np.any(vals > 0) and np.any(vals < 0)):
        raise DegeneracyError("h4_sign_change", "h4 vanishes or changes sign on the chart box")
    eps4 = 1 if vals[0] > 0 else -1
    f = ad.f0 + sqrt(absval(h4))
    eps = (ad.eps[0], ad.eps[1], ad.eps[2], eps4)
    ad2 = dataclasses.replace(ad, f=f, eps=eps, n2=(const(0.0), const(0.0)), w=None)
    sol = generate_solution(ad2, vacuum=True, seed=seed)
    sol.provenance["h4_seed"] = str(h4)
    return sol
