"""Acceptance criteria, one test per criterion at its stated tolerance.

Each test records a one-line verdict that is printed in the terminal
summary; the assertions are the stated pass conditions.
"""

import itertools
import subprocess
import sys
import time

import numpy as np
import pytest
import scipy.linalg

from absspec.counting import accumulation_experiment, attractor_distances, covering_trace
from absspec.counting import winding_count
from absspec.exterior import compound_matrix
from absspec.flow import Propagator, propagate_frame, propagate_pluecker
from absspec.exterior import pluecker
from absspec.linalg import Subspace
from absspec.periodic import (
    center_space_ratio,
    double_system,
    doubled_determinant,
    extrapolated_set_probe,
    periodic_count,
)
from absspec.problem import ParameterDomain
from absspec.problems import builtin
from absspec.selftest import constant_profile, match_multisets
from absspec.spectra import certify_nondegenerate, partition_disk, trace_locus

from conftest import ACCEPTANCE


def record(n, ok, detail):
    ACCEPTANCE[n] = (bool(ok), detail)
    print(f"criterion {n}: {'PASS' if ok else 'FAIL'} {detail}")


def cplx(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def oracle_count(values, center, radius):
    return int(np.sum(np.abs(np.asarray(values) - center) < radius))


def test_criterion_01_locus(adv2):
    t0 = time.perf_counter()
    loc = trace_locus(adv2.profile, "plus", ParameterDomain(-4, 1, -1, 1, res=128),
                      adv2.boundary)
    elapsed = time.perf_counter() - t0
    pts = loc.points
    im_err = float(np.max(np.abs(pts.imag)))
    gap_err = float(max(abs(v.gap) for v in loc.vertices))
    beyond = float(np.max(pts.real) - adv2.oracle["branch_point"])
    ok = (len(pts) >= 60 and im_err <= 1e-6 and gap_err <= 1e-6 and beyond <= 1e-6
          and elapsed < 10)
    record(1, ok, f"{len(pts)} vertices, |Im| {im_err:.1e}, |gap| {gap_err:.1e}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_02_dirichlet_accumulation(adv0):
    ells = [10 * np.pi, 20 * np.pi, 40 * np.pi]
    t0 = time.perf_counter()
    table = accumulation_experiment(adv0.profile, adv0.boundary, -1.0, 0.5, ells)
    elapsed = time.perf_counter() - t0
    # closed-form spectrum lam_n = -(n pi / 2 ell)^2; at 40 pi it has 41 points in the disk
    ref = [oracle_count(adv0.oracle["eigenvalues"](ell), -1.0, 0.5) for ell in ells]
    ok = table.counts == ref and elapsed < 60
    record(2, ok, f"counts {table.counts}, oracle {ref}, {elapsed:.1f} s")
    assert ok


def test_criterion_03_periodic_accumulation(periodic1):
    lam_c, delta = -1 + 1j, 0.3
    t0 = time.perf_counter()
    d = double_system(periodic1.profile)
    counts, ref, off = [], [], []
    for ell in (20.0, 40.0, 80.0):
        counts.append(periodic_count(d, ell, lam_c, delta).winding)
        ref.append(oracle_count(periodic1.oracle["eigenvalues"](ell), lam_c, delta))
        off.append(periodic_count(d, ell, 1 + 1j, delta, cross_check=False).winding)
    probes = extrapolated_set_probe(periodic1.profile, [lam_c, 1 + 1j], delta,
                                    [10.0, 20.0, 40.0, 80.0], n_cap=2)
    classes = [p.classification for p in probes]
    elapsed = time.perf_counter() - t0
    ok = counts == ref and off == [0, 0, 0] and classes == ["IN", "OUT"] and elapsed < 120
    record(3, ok, f"counts {counts}, oracle {ref}, off-locus {off}, probe {classes}, "
                  f"{elapsed:.1f} s")
    assert ok


def test_criterion_04_compound_eigenvalues():
    rng = np.random.default_rng(4)
    err = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        k = int(rng.integers(1, min(3, n - 1) + 1))
        A = cplx(rng, n, n)
        ev = np.linalg.eigvals(A)
        sums = [sum(c) for c in itertools.combinations(ev, k)]
        err = max(err, match_multisets(np.linalg.eigvals(compound_matrix(A, k)), sums))
    ok = err <= 1e-8
    record(4, ok, f"max multiset mismatch {err:.1e} over 100 matrices")
    assert ok


def test_criterion_05_commuting_square():
    rng = np.random.default_rng(5)
    err = 0.0
    for _ in range(50):
        n = int(rng.integers(2, 6))
        k = int(rng.integers(1, n))
        prop = Propagator(constant_profile(cplx(rng, n, n)), 0.0)
        U = Subspace.span(cplx(rng, n, k))
        Q, _ = propagate_frame(prop, 0.0, 1.0, U.frame)
        P, _ = propagate_pluecker(prop, 0.0, 1.0, pluecker(U), k)
        err = max(err, pluecker(Subspace(Q)).distance(P))
    ok = err <= 1e-6
    record(5, ok, f"max projective distance {err:.1e} over 50 systems")
    assert ok


def test_criterion_06_doubled_identity():
    rng = np.random.default_rng(6)
    err = 0.0
    ell = 1.0
    for _ in range(100):
        n = int(rng.integers(1, 6))
        Phi = cplx(rng, n, n)
        gamma = np.exp(2j * np.pi * rng.random())
        # realise Phi as the propagator of a constant system over [-ell, ell]
        A = scipy.linalg.logm(Phi) / (2 * ell)
        d = double_system(constant_profile(A, ell0=ell), gamma)
        ev = doubled_determinant(d, ell, 0.0)
        val = 2.0**n * ev.phase * np.exp(ev.full_log_magnitude)
        ref = np.linalg.det(Phi - gamma * np.eye(n))
        err = max(err, min(abs(val - ref), abs(val + ref)) / abs(ref))
    ok = err <= 1e-8
    record(6, ok, f"max relative mismatch {err:.1e} over 100 (Phi, gamma)")
    assert ok


def test_criterion_07_covering_coherence(adv0):
    seg = (-2.25, -0.25)
    t10 = covering_trace(adv0.profile, adv0.boundary, 10.0, seg).turns
    t20 = covering_trace(adv0.profile, adv0.boundary, 20.0, seg).turns
    # smallest disk enclosing the segment
    disk = winding_count(adv0.profile, adv0.boundary, 10.0, -1.25, 1.0).winding
    ok = t10 >= 6 and abs(t10 - disk) <= 2 and abs(t20 - 2 * t10) <= 1
    record(7, ok, f"turns {t10:.2f} (ell 10), {t20:.2f} (ell 20), disk count {disk}")
    assert ok


ATTRACTOR_CASES = [
    ("adv-diff", {}, -1.0, 0.5, 0.3),
    ("adv-diff-front", {}, -1.2, 1.1, 0.55),
    ("two-component", {}, None, 0.3, 0.3),
    ("periodic-adv-diff", {}, -1 + 1j, 1.0, 0.3),
]


def test_criterion_08_attractor_repeller():
    ells = [10.0, 20.0, 30.0]
    worst, details, ok = 0.0, [], True
    for name, params, lam_c, radius, min_gap in ATTRACTOR_CASES:
        p = builtin(name, **params)
        if lam_c is None:
            lam_c = complex(p.oracle["dispersion"](1.0)[0, 0])
        side = "zero" if p.boundary is None else "plus"
        part = partition_disk(p.profile, side, lam_c, radius, p.boundary)
        for region, col in (("B1", 0), ("B2", 1)):
            for lam in part.samples(region, 10, min_gap, seed=0):
                if p.boundary is None:
                    d = np.array([center_space_ratio(double_system(p.profile), lam, ell)[:2]
                                  for ell in ells])[:, col]
                else:
                    d = attractor_distances(p.profile, p.boundary, lam, ells)[:, col]
                good = bool(np.all(np.diff(d) < 0) and d[-1] <= 1e-6)
                ok &= good
                worst = max(worst, d[-1])
        details.append(name)
    record(8, ok, f"20 samples each for {', '.join(details)}; worst distance at ell 30 "
                  f"{worst:.1e}")
    assert ok


def test_criterion_09_derivative(adv2):
    lams = np.linspace(-4.0, -1.2, 20)
    err = 0.0
    for lam in lams:
        rep = certify_nondegenerate(adv2.profile, "plus", float(lam), adv2.boundary)
        ref = 2 / np.sqrt(complex(4 + 4 * lam))
        err = max(err, abs(rep.derivative - ref) / abs(ref))
    ok = err <= 1e-6
    record(9, ok, f"max relative derivative error {err:.1e} at 20 locus points")
    assert ok


@pytest.mark.parametrize("quick,limit", [(False, 120.0), (True, 10.0)])
def test_criterion_10_selftest_runtime(tmp_path, quick, limit):
    cmd = [sys.executable, "-m", "absspec.cli", "selftest", "--out", str(tmp_path)]
    if quick:
        cmd.append("--quick")
    t0 = time.perf_counter()
    proc = subprocess.run(cmd, capture_output=True, text=True)
    elapsed = time.perf_counter() - t0
    ok = proc.returncode == 0 and elapsed < limit
    prev_ok, prev = ACCEPTANCE.get(10, (True, ""))
    label = "quick" if quick else "full"
    detail = (prev + "; " if prev else "") + f"{label} {elapsed:.1f} s (limit {limit:g})"
    record(10, ok and prev_ok, detail)
    assert ok, proc.stdout + proc.stderr
