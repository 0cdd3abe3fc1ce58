"""Differential polynomials in u^c_k (component c, k-th l-derivative) with rational coefficients.

Used to apply the recursion operator with *local* inverse derivatives:
every D^{-1} the hierarchy needs acts on an exact total derivative, and
its polynomial antiderivative is recovered with the homotopy operator.
"""
from __future__ import annotations

from collections import defaultdict
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

Factor = tuple[int, int]  # (component, derivative order)
Monomial = tuple[Factor, ...]  # sorted factors, repeats allowed


class NotExactError(ValueError):
    """The polynomial is not a total derivative of a differential polynomial."""


class Poly:
    __slots__ = ("terms",)

    def __init__(self, terms: dict[Monomial, Fraction] | None = None):
        self.terms = {m: c for m, c in (terms or {}).items() if c != 0}

    # construction
    @staticmethod
    def u(component: int, order: int = 0) -> "Poly":
        return Poly({((component, order),): Fraction(1)})

    @staticmethod
    def const(c) -> "Poly":
        return Poly({(): Fraction(c)})

    # algebra
    def __add__(self, other: "Poly") -> "Poly":
        out = dict(self.terms)
        for m, c in other.terms.items():
            out[m] = out.get(m, 0) + c
        return Poly(out)

    def __neg__(self) -> "Poly":
        return Poly({m: -c for m, c in self.terms.items()})

    def __sub__(self, other: "Poly") -> "Poly":
        return self + (-other)

    def __mul__(self, other) -> "Poly":
        if not isinstance(other, Poly):
            c = Fraction(other)
            return Poly({m: v * c for m, v in self.terms.items()})
        out: dict[Monomial, Fraction] = defaultdict(Fraction)
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                out[tuple(sorted(m1 + m2))] += c1 * c2
        return Poly(out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        return isinstance(other, Poly) and self.terms == other.terms

    def __hash__(self):
        return hash(frozenset(self.terms.items()))

    def is_zero(self) -> bool:
        return not self.terms

    def __repr__(self):
        if not self.terms:
            return "0"
        parts = []
        for m in sorted(self.terms):
            name = "*".join(f"u{c}_{k}" for c, k in m) or "1"
            parts.append(f"{self.terms[m]}*{name}")
        return " + ".join(parts)

    # calculus
    def D(self) -> "Poly":
        """Total l-derivative."""
        out: dict[Monomial, Fraction] = defaultdict(Fraction)
        for m, c in self.terms.items():
            for pos in range(len(m)):
                if pos and m[pos] == m[pos - 1]:
                    continue  # identical factors handled by multiplicity below
                mult = m.count(m[pos])
                comp, k = m[pos]
                rest = list(m)
                rest.pop(pos)
                new = tuple(sorted(rest + [(comp, k + 1)]))
                out[new] += c * mult
        return Poly(out)

    def partial(self, comp: int, order: int) -> "Poly":
        f = (comp, order)
        out: dict[Monomial, Fraction] = defaultdict(Fraction)
        for m, c in self.terms.items():
            r = m.count(f)
            if r:
                rest = list(m)
                rest.remove(f)
                out[tuple(rest)] += c * r
        return Poly(out)

    def factors(self) -> set[Factor]:
        return {f for m in self.terms for f in m}

    def max_order(self) -> int:
        return max((k for m in self.terms for _, k in m), default=0)

    def homogeneous_parts(self) -> dict[int, "Poly"]:
        parts: dict[int, dict] = defaultdict(dict)
        for m, c in self.terms.items():
            parts[len(m)][m] = c
        return {d: Poly(t) for d, t in parts.items()}

    def evaluate(self, jets: dict[Factor, np.ndarray]) -> np.ndarray:
        """Evaluate with ``jets[(c, k)]`` the sampled k-th derivative of component c."""
        out = None
        for m, c in sorted(self.terms.items()):
            term = float(c)
            for f in m:
                term = term * jets[f]
            out = term if out is None else out + term
        if out is None:
            any_arr = next(iter(jets.values()))
            return np.zeros_like(any_arr)
        return out


def euler(f: Poly, comp: int) -> Poly:
    """Variational derivative sum_k (-D)^k df/du^c_k."""
    out = Poly()
    for k in range(f.max_order() + 1):
        term = f.partial(comp, k)
        for _ in range(k):
            term = -term.D()
        out = out + term
    return out


def components(f: Poly) -> set[int]:
    return {c for c, _ in f.factors()}


def antiderivative(f: Poly) -> Poly:
    """F with D F = f, by the homotopy operator; raises NotExactError otherwise.

    For a homogeneous part of degree d the antiderivative is (1/d) I(f_d),
    I(f) = sum_c sum_{k>=1} sum_{i<k} u^c_i (-D)^{k-i-1} df/du^c_k.
    """
    if f.is_zero():
        return Poly()
    parts = f.homogeneous_parts()
    if 0 in parts:
        raise NotExactError("constant term has no polynomial antiderivative")
    F = Poly()
    for d, fd in parts.items():
        acc = Poly()
        for comp in components(fd):
            for k in range(1, fd.max_order() + 1):
                dfk = fd.partial(comp, k)
                if dfk.is_zero():
                    continue
                for i in range(k):
                    term = dfk
                    for _ in range(k - i - 1):
                        term = -term.D()
                    acc = acc + Poly.u(comp, i) * term
        F = F + acc * Fraction(1, d)
    if not (F.D() - f).is_zero():
        raise NotExactError("polynomial is not a total derivative")
    return F


# -- vector operators ---------------------------------------------------------------------------
Vec = list[Poly]


def dot(a: Sequence[Poly], b: Sequence[Poly]) -> Poly:
    out = Poly()
    for x, y in zip(a, b):
        out = out + x * y
    return out


def u_vec(p: int, order: int = 0) -> Vec:
    return [Poly.u(c, order) for c in range(p)]


def apply_J(e: Vec, p: int) -> Vec:
    """J(e) = D e + D^{-1}(u . e) u with the local antiderivative."""
    u = u_vec(p)
    s = antiderivative(dot(u, e))
    return [e[j].D() + s * u[j] for j in range(p)]


def apply_H(w: Vec, p: int) -> Vec:
    """H(w) = D w + u _| D^{-1}(u (x) w - w (x) u), (u _| M)_j = sum_i u_i M_ij."""
    u = u_vec(p)
    out = []
    for j in range(p):
        acc = w[j].D()
        for i in range(p):
            if i == j:
                continue
            acc = acc + u[i] * antiderivative(u[i] * w[j] - w[i] * u[j])
        out.append(acc)
    return out


@lru_cache(maxsize=None)
def recursion_power(p: int, k: int) -> tuple[Poly, ...]:
    """R^k(u_l) as differential polynomials, R = H o J."""
    e = u_vec(p, 1)
    for _ in range(k):
        e = apply_H(apply_J(e, p), p)
    return tuple(e)


def evaluate_vec(polys: Iterable[Poly], values: np.ndarray, Lbox: float) -> np.ndarray:
    """Evaluate a vector of differential polynomials on sampled data (N, p)."""
    from .spectral import derivs

    polys = list(polys)
    order = max((q.max_order() for q in polys), default=0)
    ders = derivs(values, order, Lbox)
    jets = {(c, k): ders[k][:, c] for c in range(values.shape[1]) for k in range(order + 1)}
    return np.stack([q.evaluate(jets) for q in polys], axis=1)
