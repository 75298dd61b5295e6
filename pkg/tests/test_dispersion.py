"""Tests for the dispersion-function stability machinery."""

import numpy as np
import pytest

from kuramoto_damping.dispersion import (
    DispersionRelation,
    analyze_stability,
    boundary_values,
    critical_coupling,
    find_unstable_root,
    l1_sufficient_check,
    laplace_transform,
    winding_number,
)
from kuramoto_damping.distributions import Cauchy, Gaussian, Mixture, bi_cauchy
from kuramoto_damping.exceptions import DomainError, MarginalError

from conftest import dense_winding_oracle

TEST_DISTS = [Cauchy(1.0), Gaussian(1.0), bi_cauchy(1.0, 2.0)]


# ---------------------------------------------------------------------------
# evaluate


def test_two_bump_closed_form():
    # 1 - (K/2) (d + i w) / ((d + i w)^2 + c^2) for the symmetric two-bump family
    d, c, K = 1.0, 2.0, 3.0
    rel = DispersionRelation(bi_cauchy(d, c), K)
    for w in np.linspace(-6, 6, 25):
        z = d + 1j * w
        expected = 1.0 - 0.5 * K * z / (z * z + c * c)
        assert abs(rel.evaluate(w) - expected) <= 1e-8


def test_zero_coupling_is_identically_one():
    rel = DispersionRelation(Cauchy(1.0), 0.0)
    for w in [0.0, 1.0, -3.7, 2.0 - 1.5j]:
        assert rel.evaluate(w) == pytest.approx(1.0, abs=1e-15)


def test_cauchy_critical_value_at_origin():
    # K = 2 Delta is exactly critical: D(0) = 1 - K/2 = 0
    rel = DispersionRelation(Cauchy(1.0), 2.0)
    assert abs(rel.evaluate(0.0)) <= 1e-14
    quad = rel.evaluate_quadrature(0.0)
    assert abs(quad) <= 1e-10


def test_evaluate_rejects_upper_half_plane():
    rel = DispersionRelation(Cauchy(1.0), 1.0)
    with pytest.raises(DomainError):
        rel.evaluate(1.0 + 0.5j)


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_closed_form_matches_quadrature(dist):
    rel = DispersionRelation(dist, 1.0)
    grid = np.linspace(-25.0, 25.0, 200)
    worst = max(abs(rel.evaluate(w) - rel.evaluate_quadrature(w)) for w in grid)
    assert worst <= 1e-7


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_tends_to_one_along_real_axis(dist):
    rel = DispersionRelation(dist, 1.5)
    for big in (5e3, 5e4):
        assert abs(rel.evaluate(big) - 1.0) <= 2e-3
        assert abs(rel.evaluate(-big) - 1.0) <= 2e-3


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_conjugate_reflection_symmetry(dist):
    # All three test densities are symmetric, so D(-conj(w)) = conj(D(w)).
    rel = DispersionRelation(dist, 1.2)
    for w in [0.7, 2.3 - 0.4j, -1.1 - 2.0j]:
        assert rel.evaluate(-np.conj(w)) == pytest.approx(np.conj(rel.evaluate(w)), abs=1e-12)


def test_reflection_identity_for_asymmetric_density():
    # For an asymmetric density the reflection maps onto the mirrored density.
    mix = Mixture((0.3, 0.7), (Cauchy(1.0, -2.0), Cauchy(1.0, 2.0)))
    mirrored = Mixture((0.3, 0.7), (Cauchy(1.0, 2.0), Cauchy(1.0, -2.0)))
    rel = DispersionRelation(mix, 1.5)
    rel_m = DispersionRelation(mirrored, 1.5)
    for w in [0.4, -1.3 - 0.7j]:
        assert rel_m.evaluate(-np.conj(w)) == pytest.approx(np.conj(rel.evaluate(w)), abs=1e-12)


# ---------------------------------------------------------------------------
# boundary values


def test_boundary_values_cross_check_and_symmetry():
    rel = DispersionRelation(Gaussian(1.0), 1.0)
    grid = np.linspace(-4.0, 4.0, 33)
    bv = boundary_values(rel, grid)
    assert np.max(np.abs(bv.laplace - bv.hilbert)) <= 1e-6
    # symmetric unimodal density: D real at omega = 0
    mid = np.argmin(np.abs(bv.omegas))
    assert abs(bv.values[mid].imag) <= 1e-10


def test_boundary_real_part_at_origin_cauchy():
    # Re D(0) = 1 - K/2 for the unit Cauchy
    rel = DispersionRelation(Cauchy(1.0), 1.0)
    val = rel.evaluate_boundary(0.0)
    assert val.real == pytest.approx(0.5, abs=1e-10)
    assert val.imag == pytest.approx(0.0, abs=1e-10)


def test_two_bump_boundary_zero_locations():
    # Im D vanishes exactly at 0 and +-sqrt(offset^2 - width^2)
    kc, crit = critical_coupling(bi_cauchy(1.0, 2.0))
    rel = DispersionRelation(bi_cauchy(1.0, 2.0), 3.0)
    zero_omegas = [w for (w, _, _) in analyze_stability(bi_cauchy(1.0, 2.0), 3.0).boundary_zeros]
    expected = sorted([-np.sqrt(3.0), 0.0, np.sqrt(3.0)])
    assert len(zero_omegas) == 3
    np.testing.assert_allclose(sorted(zero_omegas), expected, atol=1e-6)


def test_boundary_values_requires_sorted_grid():
    rel = DispersionRelation(Cauchy(1.0), 1.0)
    with pytest.raises(ValueError):
        boundary_values(rel, [1.0, 0.5, 2.0])


# ---------------------------------------------------------------------------
# winding number


def test_winding_zero_coupling():
    assert winding_number(DispersionRelation(Gaussian(1.0), 0.0)) == 0


def test_winding_around_cauchy_threshold():
    assert winding_number(DispersionRelation(Cauchy(1.0), 1.9)) == 0
    assert winding_number(DispersionRelation(Cauchy(1.0), 2.1)) == 1


def test_winding_two_bump_above_threshold():
    assert winding_number(DispersionRelation(bi_cauchy(1.0, 2.0), 4.2)) >= 1


@pytest.mark.parametrize("dist", TEST_DISTS)
@pytest.mark.parametrize("factor", [0.5, 0.9, 1.2, 1.8])
def test_winding_matches_dense_oracle(dist, factor):
    kc, _ = critical_coupling(dist)
    rel = DispersionRelation(dist, factor * kc)
    omega_max = 2000.0
    xs = np.linspace(-omega_max, omega_max, 400_001)
    curve = rel.evaluate(xs)
    closed = np.concatenate(([1.0], curve, [1.0]))
    oracle = -dense_winding_oracle(closed)
    assert winding_number(rel) == oracle


def test_winding_marginal_at_threshold():
    with pytest.raises(MarginalError):
        winding_number(DispersionRelation(Cauchy(1.0), 2.0))


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_winding_criterion_equivalence_scan(dist):
    # winding = 0 exactly when K < K_c, within one grid step of K_c
    kc, _ = critical_coupling(dist)
    couplings = np.linspace(0.0, 2.0 * kc, 20)
    step = couplings[1] - couplings[0]
    for k in couplings:
        try:
            wind = winding_number(DispersionRelation(dist, k))
        except MarginalError:
            assert abs(k - kc) <= step
            continue
        if abs(k - kc) > step:
            assert (wind == 0) == (k < kc)


# ---------------------------------------------------------------------------
# critical coupling


@pytest.mark.parametrize("delta", [0.5, 1.0, 2.0])
def test_cauchy_critical_coupling(delta):
    kc, crit = critical_coupling(Cauchy(delta))
    assert kc == pytest.approx(2.0 * delta, rel=1e-6)
    assert crit == pytest.approx([0.0], abs=1e-9)


def test_gaussian_critical_coupling():
    kc, crit = critical_coupling(Gaussian(1.0))
    assert kc == pytest.approx(np.sqrt(8.0 / np.pi), rel=1e-5)
    assert crit == pytest.approx([0.0], abs=1e-9)


def test_two_bump_critical_coupling_small_offset():
    kc, _ = critical_coupling(bi_cauchy(1.0, 0.5))
    assert kc == pytest.approx(2.5, rel=1e-6)


def test_two_bump_critical_coupling_large_offset():
    kc, crit = critical_coupling(bi_cauchy(1.0, 2.0))
    assert kc == pytest.approx(4.0, rel=1e-6)
    np.testing.assert_allclose(crit, [-np.sqrt(3.0), np.sqrt(3.0)], atol=1e-6)


def test_asymmetric_two_bump_criterion_consistency():
    # Winding-based classification agrees with the boundary-criterion K_c for
    # asymmetric two-bump mixtures as well (checked empirically).
    for alpha in (0.3, 0.7):
        mix = Mixture((alpha, 1.0 - alpha), (Cauchy(1.0, 2.0), Cauchy(1.0, -2.0)))
        kc, _ = critical_coupling(mix)
        assert winding_number(DispersionRelation(mix, 0.97 * kc)) == 0
        assert winding_number(DispersionRelation(mix, 1.03 * kc)) >= 1


# ---------------------------------------------------------------------------
# unstable roots


def test_cauchy_root_closed_form():
    root = find_unstable_root(DispersionRelation(Cauchy(1.0), 4.0))
    assert root == pytest.approx(-1j, abs=1e-8)
    assert abs(DispersionRelation(Cauchy(1.0), 4.0).evaluate(root)) <= 1e-10


def test_root_approaches_axis_near_threshold():
    root = find_unstable_root(DispersionRelation(Cauchy(1.0), 2.0 * 1.001))
    assert root is not None
    assert -0.1 <= root.imag < 0.0


def test_no_root_at_zero_coupling():
    assert find_unstable_root(DispersionRelation(Cauchy(1.0), 0.0)) is None


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_roots_exist_above_threshold(dist):
    kc, _ = critical_coupling(dist)
    rel = DispersionRelation(dist, 1.5 * kc)
    root = find_unstable_root(rel)
    assert root is not None and root.imag < 0
    assert abs(rel.evaluate(root)) <= 1e-10


# ---------------------------------------------------------------------------
# sufficient condition


def test_l1_check_cauchy_matches_threshold():
    assert l1_sufficient_check(DispersionRelation(Cauchy(1.0), 1.99))
    assert not l1_sufficient_check(DispersionRelation(Cauchy(1.0), 2.01))


def test_l1_check_gaussian_matches_threshold():
    # int |ghat| = sqrt(pi/2), so the check is K < 2 / sqrt(pi/2) = K_c
    kc, _ = critical_coupling(Gaussian(1.0))
    assert l1_sufficient_check(DispersionRelation(Gaussian(1.0), 0.99 * kc))
    assert not l1_sufficient_check(DispersionRelation(Gaussian(1.0), 1.01 * kc))


def test_l1_check_zero_coupling():
    assert l1_sufficient_check(DispersionRelation(Gaussian(1.0), 0.0))


@pytest.mark.parametrize("dist", TEST_DISTS)
def test_l1_check_implies_stable_verdict(dist):
    kc, _ = critical_coupling(dist)
    for k in (0.0, 0.4 * kc, 0.9 * kc):
        rel = DispersionRelation(dist, k)
        if l1_sufficient_check(rel):
            assert analyze_stability(dist, k).verdict == "Stable"


# ---------------------------------------------------------------------------
# reports


def test_report_two_bump_below_threshold():
    rep = analyze_stability(bi_cauchy(1.0, 2.0), 3.9)
    assert rep.verdict == "Stable"
    assert rep.winding_number == 0
    assert rep.unstable_roots == []


def test_report_two_bump_above_threshold():
    rep = analyze_stability(bi_cauchy(1.0, 2.0), 4.1)
    assert rep.verdict == "Unstable"
    assert rep.winding_number >= 1
    assert len(rep.unstable_roots) >= 1
    assert rep.unstable_roots[0].imag < 0


def test_report_verdict_consistency():
    rep = analyze_stability(Cauchy(1.0), 1.0)
    assert rep.verdict == "Stable"
    assert rep.winding_number == 0
    assert rep.diagnostics["minBoundaryAbsD"] > 0

    rep_json = rep.to_json_dict()
    assert set(rep_json) == {
        "verdict",
        "windingNumber",
        "boundaryZeros",
        "unstableRoots",
        "criticalCoupling",
        "criticalFrequencies",
        "diagnostics",
    }


def test_report_marginal_at_threshold():
    rep = analyze_stability(Cauchy(1.0), 2.0)
    assert rep.verdict == "MarginallyUnstable"
