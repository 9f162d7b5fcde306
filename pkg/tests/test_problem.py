import json

import numpy as np
import pytest

from absspec.linalg import Subspace, eig_sorted
from absspec.problem import (
    BoundaryData,
    CoefficientProfile,
    ContinuityError,
    DomainError,
    HypothesisError,
    MatrixFamily,
    ParameterDomain,
    ProblemFileError,
    crossing_index,
    dump_problem,
    evaluate,
    load_problem,
    problem_to_dict,
    validate_hypotheses,
)
from absspec.problems import builtin


def test_evaluate_adv_diff_tail(adv0):
    np.testing.assert_array_equal(evaluate(adv0.profile, 5.0, 1.0), [[0, 1], [1, 0]])


def test_evaluate_seam_is_exact_tail():
    p = builtin("adv-diff-front")
    prof = p.profile
    for lam in (0.3 + 0.1j, -2.0):
        assert np.array_equal(evaluate(prof, -prof.ell0, lam), prof.left(lam, -prof.ell0))
        assert np.array_equal(evaluate(prof, prof.ell0, lam), prof.right(lam, prof.ell0))
        for x in (3.0, 17.5):
            assert np.array_equal(evaluate(prof, x, lam), prof.right(lam, x))
            assert np.array_equal(evaluate(prof, -x, lam), prof.left(lam, -x))


def test_front_midpoint_is_average():
    prof = builtin("adv-diff-front").profile
    lam = -0.4 + 0.2j
    mid = (prof.left(lam, 0.0) + prof.right(lam, 0.0)) / 2
    np.testing.assert_allclose(evaluate(prof, 0.0, lam), mid, atol=1e-15)


def test_front_seams_continuous():
    builtin("adv-diff-front").profile.check_seams()


def test_seam_mismatch_raises():
    a = MatrixFamily([["0", "1"], ["lam", "0"]])
    m = MatrixFamily([["0", "1"], ["lam", "x"]])
    prof = CoefficientProfile(2, 1.0, a, a, m)
    with pytest.raises(ContinuityError):
        prof.check_seams()


def test_lambda_domain_enforced():
    a = MatrixFamily([["0", "1"], ["lam", "0"]])
    prof = CoefficientProfile(2, 1.0, a, a, a, lam_domain=ParameterDomain(-1, 1, -1, 1))
    prof.evaluate(0.0, 0.5)
    with pytest.raises(DomainError):
        prof.evaluate(0.0, 3.0)


def test_x_dependent_tail_rejected():
    a = MatrixFamily([["0", "1"], ["lam", "x"]])
    with pytest.raises(ValueError):
        CoefficientProfile(2, 1.0, a, a, a)


def test_boundary_dimension_rules():
    e = np.eye(3)
    with pytest.raises(HypothesisError):
        BoundaryData(Subspace(e[:, :2]), Subspace(e[:, 2:]))  # i_- > i_+
    with pytest.raises(HypothesisError):
        BoundaryData(Subspace(e[:, :1]), Subspace(e[:, 1:2]))  # sum != N
    b = BoundaryData(Subspace(e[:, :1]), Subspace(e[:, 1:]))
    assert (b.i_minus, b.i_plus) == (1, 2)


def test_parameter_domain_validation():
    with pytest.raises(ValueError):
        ParameterDomain(1, 0, 0, 1)
    with pytest.raises(ValueError):
        ParameterDomain(0, 1, 0, 1, res=4)
    with pytest.raises(ValueError):
        ParameterDomain(center=0j, radius=0.0)
    d = ParameterDomain.disk(1 + 1j, 0.5)
    pts = d.samples(50, seed=3)
    assert np.all(np.abs(pts - (1 + 1j)) <= 0.5)
    np.testing.assert_array_equal(pts[:10], d.samples(10, seed=3))


def test_hypotheses_adv_diff_pass(adv0):
    rep = validate_hypotheses(adv0.profile, adv0.boundary, ParameterDomain.disk(1.0, 0.1), 8)
    assert rep.passed
    chk = rep.samples[0]
    assert chk.intersection_dim["plus"] == 1
    assert chk.sum_margin["plus"] > 0.1


def test_hypotheses_engineered_violation(adv0):
    # U_+ spanned by the leading eigenvector of A_+(1)
    w, V = np.linalg.eig(adv0.profile.tail("plus", 1.0))
    lead = V[:, np.argmax(w.real)]
    bd = BoundaryData(adv0.boundary.left, Subspace.span(lead))
    rep = validate_hypotheses(adv0.profile, bd, ParameterDomain.disk(1.0, 1e-9), 4)
    assert not rep.passed
    assert any("eigenspace" in n for n in rep.failures()[0].notes)


def test_hypotheses_periodic_off_locus(periodic1):
    rep = validate_hypotheses(periodic1.profile, None, ParameterDomain.disk(1 + 1j, 0.2), 8)
    assert rep.passed


@pytest.mark.parametrize("name", ["adv-diff", "adv-diff-front", "two-component",
                                  "periodic-adv-diff"])
def test_builtins_pass_on_documented_domain(name):
    p = builtin(name)
    rep = validate_hypotheses(p.profile, p.boundary, p.domain, 32)
    assert rep.passed, rep.summary()


def test_validate_is_monotone_in_sample_count(adv0):
    w, V = np.linalg.eig(adv0.profile.tail("plus", 1.0))
    bd = BoundaryData(adv0.boundary.left, Subspace.span(V[:, np.argmax(w.real)]))
    dom = ParameterDomain.disk(1.0, 1e-9)
    few = validate_hypotheses(adv0.profile, bd, dom, 4, seed=1)
    many = validate_hypotheses(adv0.profile, bd, dom, 16, seed=1)
    bad_few = {s.lam for s in few.failures()}
    bad_many = {s.lam for s in many.failures()}
    assert bad_few <= bad_many


def test_crossing_index_tie_prefers_larger_imag():
    vals = np.array([0.5 + 1j, -0.5 + 2j, 3.0])
    assert crossing_index(vals, 1e-12) == 1
    spec = eig_sorted([[0, 1], [-1, 0]])
    assert spec.values[crossing_index(spec.values, spec.tie_tolerance)] == pytest.approx(1j)


@pytest.mark.parametrize("name", ["adv-diff", "adv-diff-front", "two-component",
                                  "periodic-adv-diff"])
def test_problem_file_round_trip(tmp_path, rng, name):
    p = builtin(name)
    path = tmp_path / "p.json"
    dump_problem(path, p.profile, p.boundary, p.domain)
    prof, bd, dom = load_problem(path)
    assert prof.digest() == p.profile.digest()
    assert dom.bounds == p.domain.bounds
    for _ in range(100):
        x = rng.uniform(-3, 3) * p.profile.ell0
        lam = complex(rng.uniform(-3, 1), rng.uniform(-2, 2))
        np.testing.assert_array_equal(prof.evaluate(x, lam), p.profile.evaluate(x, lam))
    if p.boundary is not None:
        assert bd.left.distance(p.boundary.left) < 1e-14
        assert bd.right.distance(p.boundary.right) < 1e-14


def _write(tmp_path, data, text=None):
    path = tmp_path / "p.json"
    path.write_text(text if text is not None else json.dumps(data, indent=2))
    return path


def test_problem_file_seam_mismatch(tmp_path, adv0):
    d = problem_to_dict(adv0.profile, adv0.boundary)
    d["middle"] = [["0", "1"], ["lam", "-x"]]
    with pytest.raises(ContinuityError):
        load_problem(_write(tmp_path, d))


def test_problem_file_boundary_order_violation(tmp_path):
    d = problem_to_dict(builtin("two-component").profile)
    d["U_minus"] = [[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, 0, 0]]
    d["U_plus"] = [[0], [0], [0], [1]]
    with pytest.raises(HypothesisError):
        load_problem(_write(tmp_path, d))


def test_problem_file_syntax_error_location(tmp_path):
    path = _write(tmp_path, None, '{\n  "name": "x",\n  "N": 2,,\n}')
    with pytest.raises(ProblemFileError) as info:
        load_problem(path)
    assert info.value.line == 3


def test_problem_file_bad_expression_location(tmp_path, adv0):
    d = problem_to_dict(adv0.profile, adv0.boundary)
    d["A_plus"] = [["0", "1"], ["lam", "import os"]]
    with pytest.raises(ProblemFileError) as info:
        load_problem(_write(tmp_path, d))
    text = (tmp_path / "p.json").read_text().splitlines()
    assert '"A_plus"' in text[info.value.line - 1]


def test_problem_file_missing_field(tmp_path, adv0):
    d = problem_to_dict(adv0.profile, adv0.boundary)
    del d["ell0"]
    with pytest.raises(ProblemFileError):
        load_problem(_write(tmp_path, d))


def test_periodic_tail_generator_is_log_monodromy():
    a = MatrixFamily([["0", "1"], ["lam", "0"]])
    prof = CoefficientProfile(2, 1.0, a, a, a, kind="periodic-tail", period=2.0)
    lam = 0.7 + 0.2j
    G = prof.tail_generator("plus", lam)
    np.testing.assert_allclose(G, prof.tail("plus", lam), atol=1e-8)
