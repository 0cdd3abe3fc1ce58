import dataclasses

import numpy as np
import pytest

from nonholo import einstein as E
from nonholo.errors import DegeneracyError
from nonholo.expr import ZERO, evaluate_batch, parse

C4 = list(E.COORDS4)
BOX = {"x1": (0.0, 1.0), "x2": (0.0, 1.0), "v": (1.0, 2.0), "y4": (0.0, 1.0)}


def P(s):
    return parse(s, C4)


def ansatz(f="v", psi="0", eps=(1, 1, -1, -1), n1=("0", "0"), n2=("0", "0"), **kw):
    return E.AnsatzData(psi=P(psi), f=P(f), eps=eps, n1=tuple(map(P, n1)), n2=tuple(map(P, n2)),
                        box=kw.pop("box", BOX), **kw)


def pts(count=32, seed=0, box=BOX):
    return E.interior_points(box, count, seed)


def test_adaptive_simpson_polynomial_and_error():
    cells = E.adaptive_simpson_cells(lambda x: x ** 3, np.array([0.0, 1.0, 2.0]))
    assert cells == pytest.approx([0.25, 3.75], abs=1e-12)
    with pytest.raises(E.QuadratureError):
        E.adaptive_simpson_cells(lambda x: 1.0 / np.sqrt(np.abs(x - 0.3)), np.array([0.0, 1.0]),
                                 tol=1e-14, max_depth=8)


def test_polarization_zero_source_is_sigma0():
    ad = ansatz()
    assert E.polarization(ad, E.SourceSpec()) is ad.sigma0


@pytest.mark.parametrize("eps3", [1, -1])
def test_polarization_closed_form(eps3):
    lam = 0.7
    box = dict(BOX, v=(0.0, 2.0))
    ad = ansatz(eps=(1, 1, eps3, -1), box=box, v0=0.0)
    sig = E.polarization(ad, E.SourceSpec(Upsilon1=P(repr(lam))))
    v = np.linspace(0.0, 2.0, 41)
    z = np.zeros_like(v)
    got = evaluate_batch([sig], {"x1": z + 0.3, "x2": z + 0.4, "v": v, "y4": z})[0]
    assert np.max(np.abs(got - (1.0 - eps3 / 16.0 * lam * v ** 2))) < 1e-9


def test_vacuum_generation_example():
    ad = ansatz(eps=(1, 1, -1, -1), n1=("x2", "x1"))
    sol = E.generate_solution(ad, vacuum=True)
    p = pts(8)
    h3, h4, w1, w2, n1, n2 = evaluate_batch([sol.h3, sol.h4, *sol.w, *sol.n], p)
    assert np.all(h3 == -1.0)
    assert np.array_equal(h4, -p["v"] ** 2)
    assert not np.any(w1) and not np.any(w2)
    assert np.array_equal(n1, p["x2"]) and np.array_equal(n2, p["x1"])
    assert sol.sigma is E.ONE
    assert sol.provenance["vacuum"] is True


def test_psi_residual_zero_and_warning():
    sol = E.generate_solution(ansatz(), vacuum=True)
    assert sol.psi_residual is ZERO or not np.any(evaluate_batch([sol.psi_residual], pts(4))[0])
    sol2 = E.generate_solution(ansatz(psi="x1^3"), vacuum=True)
    assert any("psi equation" in w for w in sol2.warnings)


def test_f_star_zero_rejected():
    with pytest.raises(DegeneracyError) as ei:
        E.generate_solution(ansatz(f="x1 + 2"), vacuum=True)
    assert ei.value.code == "f_star_zero"
    with pytest.raises(DegeneracyError):
        E.generate_solution(ansatz(f="(v - 1.5)^2"), vacuum=True)


def test_f_degeneracy_with_n2():
    ad = ansatz(f="v - 1.5", n2=("1", "0"))
    with pytest.raises(DegeneracyError) as ei:
        E.generate_solution(ad, vacuum=True)
    assert ei.value.code == "f_degenerate"


def test_invalid_inputs():
    with pytest.raises(ValueError):
        ansatz(eps=(1, 1, 0, -1))
    with pytest.raises(ValueError):
        ansatz(psi="v")
    with pytest.raises(ValueError):
        E.SourceSpec(Upsilon3=P("v"))
    with pytest.raises(ValueError):
        E.generate_solution(ansatz(), variant="other")


def test_generation_deterministic():
    ad = ansatz(f="v^2 + sin(x1)", n1=("x1*x2", "x2"), n2=("0.5", "x1"))
    p = pts(8)
    a = evaluate_batch([e for e in E.generate_solution(ad, vacuum=True).n], p)
    b = evaluate_batch([e for e in E.generate_solution(ad, vacuum=True).n], p)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))


def test_flat_metric_residual():
    ad = ansatz(f="v", eps=(1, 1, -1, -1))
    sol = E.generate_solution(ad, vacuum=True)
    flat = dataclasses.replace(sol, dm=dataclasses.replace(
        sol.dm, h=((P("-1"), ZERO), (ZERO, P("-1")))))
    assert E.einstein_residual(flat, None, pts(8)).max_residual < 1e-10


VACUUM_SCENES = [
    dict(f="v", n1=("x2", "x1")),
    dict(f="v^3 + x1", n1=("x1*x2", "0")),
    dict(f="sin(v) + 2*v", n1=("cos(x2)", "x1^2"), psi="x1^2 - x2^2", eps=(1, 1, -1, 1)),
    dict(f="exp(0.5*v)*(1 + x2^2)", n1=("0", "sin(x1)")),
    dict(f="v^2 + x1*x2", n1=("x2", "x1"), n2=("0.3", "x1")),
]


@pytest.mark.parametrize("i", range(len(VACUUM_SCENES)))
def test_vacuum_scenes_solve_einstein(i):
    sol = E.generate_solution(ansatz(**VACUUM_SCENES[i]), vacuum=True, seed=i)
    rep = E.einstein_residual(sol, None, pts(32, i))
    assert rep.max_residual < 1e-7


def test_perturbed_h4_is_detected():
    sol = E.generate_solution(ansatz(), vacuum=True)
    bad = dataclasses.replace(sol, dm=dataclasses.replace(
        sol.dm, h=((sol.h3, ZERO), (ZERO, sol.h4 + P("0.1*v^3")))))
    assert E.einstein_residual(bad, None, pts(32)).max_residual > 1e-3


def _sourced(variant, h0bar="4", u1="0.3", u3="0", psi="0"):
    ad = E.AnsatzData(psi=P(psi), f=P("v^2 + x1"), h0bar=P(h0bar), eps=(1, 1, -1, 1), box=BOX)
    src = E.SourceSpec(Upsilon1=P(u1), Upsilon3=P(u3), kappa=-1.0)
    return E.generate_solution(ad, src, variant=variant), src


def test_sourced_exact_variant_matches_source():
    sol, src = _sourced("exact")
    p = pts(32, 3)
    assert E.einstein_residual(sol, src, p).max_residual < 1e-6
    c = E.convention_constant(sol, src, p)
    assert c["h_block"] == pytest.approx(-1.0, abs=1e-6)


def test_sourced_psi_block_constant():
    # psi = (x1^2 + x2^2)/4 solves psi.. + psi'' = 1
    sol, src = _sourced("exact", u3="1", psi="0.25*x1^2 + 0.25*x2^2")
    mixed, _, _ = E.einstein_tensor_values(sol, pts(16, 5))
    # the fiber block carries 1/2 e^{-psi} (psi.. + psi'') from the base curvature
    half = 0.5 * np.exp(-(0.25 * pts(16, 5)["x1"] ** 2 + 0.25 * pts(16, 5)["x2"] ** 2))
    assert np.max(np.abs(mixed[:, 2, 2] - half)) < 1e-8
    assert np.max(np.abs(mixed[:, 3, 3] - half)) < 1e-8


def test_sourced_printed_variant_is_not_exact():
    sol, src = _sourced("printed")
    assert E.einstein_residual(sol, src, pts(16, 3)).max_residual > 1e-3


def test_sourced_polarization_sign_change_warns():
    sol, _ = _sourced("exact", h0bar="1", u1="-1")
    assert any("polarization" in w for w in sol.warnings)


def test_lc_constraints_trivial_cases():
    sol = E.generate_solution(ansatz(n1=("1", "2")), vacuum=True)
    rep = E.lc_constraint_residual(sol, None, pts(8))
    assert rep.ep2b1 == 0.0 and rep.ep2b2 == 0.0
    sol = E.generate_solution(ansatz(n1=("x2", "x1")), vacuum=True)
    assert E.lc_constraint_residual(sol, None, pts(8)).ep2b2 == 0.0
    sol = E.generate_solution(ansatz(n1=("x1*x2", "0")), vacuum=True)
    p = pts(8)
    assert E.lc_constraint_residual(sol, None, p).ep2b2 == pytest.approx(np.max(p["x1"]), rel=1e-14)


def test_vacuum_phi_is_constant():
    # h4 = eps4 f^2 and h3 = eps3 f*^2 give h4* / sqrt|h3 h4| = 2 identically
    sol = E.generate_solution(ansatz(f="v^2 + x1"), vacuum=True)
    from nonholo.expr import absval, differentiate, sqrt
    ratio = differentiate(sol.h4, "v") / sqrt(absval(sol.h3 * sol.h4))
    assert np.allclose(np.abs(evaluate_batch([ratio], pts(8))[0]), 2.0, rtol=1e-14)


def test_lc_constraint_gradient_w():
    from nonholo.expr import differentiate
    phi = P("v^2 + x1*v + x2*v^3")
    ps = differentiate(phi, "v")
    w = tuple(differentiate(phi, x) / ps for x in ("x1", "x2"))
    sol = E.generate_solution(dataclasses.replace(ansatz(), w=w), vacuum=True)
    rep = E.lc_constraint_residual(sol, None, pts(16))
    assert rep.ep2b1 < 1e-8
    assert rep.ep2b1_printed > 1e-3


def test_printed_n_integral_needs_constant_fstar():
    ad = ansatz(f="v^2", n2=("0.3", "0"))
    p = pts(16)
    assert E.einstein_residual(E.generate_solution(ad, vacuum=True), None, p).max_residual < 1e-7
    bad = E.generate_solution(ad, vacuum=True, variant="printed")
    assert E.einstein_residual(bad, None, p).max_residual > 1e-3
    lin = E.generate_solution(ansatz(f="v", n2=("0.3", "x1")), vacuum=True, variant="printed")
    assert E.einstein_residual(lin, None, p).max_residual < 1e-7


def test_lc_constraint_degenerate_branch():
    sol = E.generate_solution(ansatz(f="v + x1", eps=(1, 1, -1, -1)), vacuum=True)
    sol = dataclasses.replace(sol, dm=dataclasses.replace(sol.dm, h=((sol.h3, ZERO), (ZERO, P("-1")))))
    rep = E.lc_constraint_residual(sol, E.SourceSpec(), pts(8))
    assert rep.degenerate and rep.ep2b == 0.0
