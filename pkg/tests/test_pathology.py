import math

import numpy as np
import pytest

from bbmlab import fields, pathology as PT
from bbmlab.errors import DimensionError, DomainError, ProbeError

PROBE2 = [0.375, 0.0]
PROBE3 = [0.375, 0.0, 0.0]


def test_field_value_closed_form():
    u = PT.pathological_field(2)
    assert fields.eval_field(u, [0.5, 0.0]) == pytest.approx(
        2.0 / math.log(2.0) ** 2, rel=1e-12)


def test_field_cutoff_region():
    u = PT.pathological_field(2)
    v_mid = fields.eval_field(u, [2.5, 0.0])
    assert 0.0 < v_mid < fields.eval_field(u, [2.05, 0.0])
    assert fields.eval_field(u, [3.1, 0.0]) == 0.0


def test_field_origin_sentinel_is_finite():
    u = PT.pathological_field(2)
    v = fields.eval_field(u, [1e-15, 0.0])
    assert math.isfinite(v) and v > 1e6


def test_field_needs_dimension_at_least_two():
    with pytest.raises(DimensionError):
        PT.pathological_field(1)


def test_field_gradient_matches_finite_differences():
    u = PT.pathological_field(2)
    for x in ([0.3, 0.1], [0.5, -0.2], [2.4, 0.3]):
        x = np.asarray(x)
        num = np.empty(2)
        for ax in range(2):
            e = np.zeros(2)
            e[ax] = 1e-6
            num[ax] = (fields.eval_field(u, x + e) - fields.eval_field(u, x - e)) / 2e-6
        assert np.allclose(fields.gradient(u, x), num, rtol=1e-5)


def test_w11_gradient_mass_stable_under_cutoff_refinement():
    ladder = PT.gradient_mass_ladder(2, [1e-3, 5e-4, 2.5e-4])
    values = [v for _, v in ladder]
    assert all(math.isfinite(v) for v in values)
    increments = [abs(b - a) for a, b in zip(values[:-1], values[1:])]
    assert increments[-1] <= increments[0]
    assert increments[-1] <= 0.02 * values[-1]


# ---------------------------------------------------------------------------
# divergence probes
# ---------------------------------------------------------------------------

def test_case_validation():
    with pytest.raises(DomainError):
        PT.PathologyCase(2, 3.0, 0.7)
    with pytest.raises(DimensionError):
        PT.PathologyCase(1, 3.0, 0.1)
    with pytest.raises(DomainError):
        PT.PathologyCase(2, 3.0, 0.1, cutoffs=(0.01, 0.02))
    case = PT.PathologyCase(2, 3.0, 0.1)
    assert case.critical_exponent == 2.0
    assert case.expects_divergence
    assert not PT.PathologyCase(2, 1.5, 0.1).expects_divergence


def test_probe_must_lie_in_annulus():
    case = PT.PathologyCase(2, 3.0, 0.1)
    with pytest.raises(ProbeError):
        PT.divergence_probe(case, [0.1, 0.0])
    with pytest.raises(ProbeError):
        PT.divergence_probe(case, [0.6, 0.0])


def test_supercritical_ladder_diverges():
    rep = PT.divergence_probe(PT.PathologyCase(2, 3.0, 0.1), PROBE2)
    assert rep.classification == "diverging"
    # lower bounds over nested domains: exactly nondecreasing
    assert all(b >= a for a, b in zip(rep.values[:-1], rep.values[1:]))
    # growth factor 1.5 reached over some window of 4 consecutive levels
    w = rep.growth_window
    assert any(rep.values[i + w] / rep.values[i] >= rep.growth_factor
               for i in range(len(rep.values) - w))


def test_subcritical_ladder_converges():
    rep = PT.divergence_probe(PT.PathologyCase(2, 1.5, 0.1), PROBE2)
    assert rep.classification == "converging"
    increments = np.diff(rep.values)
    # refinement stabilizes: late increments shrink at ratio < 0.5
    assert increments[-1] < 0.5 * increments[2]


def test_smooth_control_is_bounded_and_converging():
    case = PT.PathologyCase(2, 3.0, 0.1)
    rep = PT.divergence_probe(case, PROBE2, field=fields.gaussian_bump(2))
    assert rep.classification == "converging"
    assert rep.values[-1] < 1.0


def test_kernel_lower_bound_matches_extremal_evaluation():
    case = PT.PathologyCase(2, 3.0, 0.1)
    bound = case.kernel_lower_bound()
    assert bound == pytest.approx(0.1 * (5.0 / 8.0) ** (0.1 - 1.0), rel=1e-12)
    # direct kernel evaluation on sampled probe/shell pairs never undercuts
    rho = case.mollifier()
    rng = np.random.default_rng(5)
    for _ in range(200):
        r_probe = rng.uniform(0.25, 0.5)
        theta = rng.uniform(0, 2 * np.pi)
        y = rng.uniform(0, 0.125) * np.array([np.cos(theta), np.sin(theta)])
        dist = np.linalg.norm(np.array([r_probe, 0.0]) - y)
        assert rho.evaluate(dist) >= bound - 1e-12


# ---------------------------------------------------------------------------
# threshold scan
# ---------------------------------------------------------------------------

def test_threshold_scan_d2():
    got = PT.threshold_scan(2, 0.1, PROBE2, [1.5, 1.9, 2.1, 3.0])
    assert got == [(1.5, "converging"), (1.9, "converging"),
                   (2.1, "diverging"), (3.0, "diverging")]


def test_threshold_scan_d3():
    got = PT.threshold_scan(3, 0.1, PROBE3, [1.2, 1.4, 1.6, 2.0])
    assert got == [(1.2, "converging"), (1.4, "converging"),
                   (1.6, "diverging"), (2.0, "diverging")]


def test_threshold_scan_flips_exactly_once():
    got = PT.threshold_scan(2, 0.1, PROBE2, [1.5, 1.9, 2.1, 3.0])
    flips = sum(1 for a, b in zip(got[:-1], got[1:]) if a[1] != b[1])
    assert flips == 1


def test_threshold_scan_rejects_borderline_and_onesided():
    with pytest.raises(DomainError):
        PT.threshold_scan(2, 0.1, PROBE2, [1.5, 2.0, 3.0])
    with pytest.raises(DomainError):
        PT.threshold_scan(2, 0.1, PROBE2, [2.1, 2.5, 3.0])


def test_shell_exponent_signs():
    # shell-mass exponent beta ~ d - p(d-1): sign decides divergence
    beta_sub = PT.shell_exponent(PT.PathologyCase(2, 1.5, 0.1), PROBE2)
    beta_sup = PT.shell_exponent(PT.PathologyCase(2, 3.0, 0.1), PROBE2)
    assert beta_sub > 0.3
    assert beta_sup < -0.5


def test_smooth_field_shell_exponent_infinite():
    # no singularity at the origin: shells vanish, scan reports convergence
    case = PT.PathologyCase(2, 3.0, 0.1)
    beta = PT.shell_exponent(case, PROBE2, field=fields.linear_field([0.0, 0.0]))
    assert beta == math.inf
