import math

import numpy as np
import pytest

from bbmlab import constants
from bbmlab.errors import DimensionError, DomainError
from bbmlab.quadrature import segment_rule


def trapezoid_gamma2(p, m=200001):
    """Independent oracle for gamma(2, p): dense trapezoid over the circle."""
    theta = np.linspace(0.0, 2 * np.pi, m)
    return float(np.trapezoid(np.abs(np.cos(theta)) ** p, theta))


def gaussian_norm_oracle(d):
    """Solve C * int_0^inf r^d exp(-r^2) dr = 1 on a dense independent rule."""
    nodes, w = segment_rule(1e-12, 9.0, q=14, levels=40)
    return 1.0 / float(np.dot(w, nodes**d * np.exp(-nodes**2)))


def test_gamma_closed_forms():
    assert constants.gamma(1, 1) == 2.0
    assert constants.gamma(2, 1) == 4.0
    assert constants.gamma(3, 1) == pytest.approx(2 * math.pi, abs=0)


@pytest.mark.parametrize("d,e", [(2, (0.0, 1.0)), (2, (1.0, 0.0)),
                                 (3, (0.0, 0.0, 1.0))])
def test_gamma_quadrature_matches_closed_form(d, e):
    assert constants.gamma(d, 1, e=np.array(e)) == pytest.approx(
        constants.gamma(d, 1), abs=1e-8)


def test_gamma_any_p_in_1d():
    for p in (1.0, 1.7, 2.0, 3.0):
        assert constants.gamma(1, p) == 2.0


def test_gamma22_matches_trapezoid_oracle():
    assert constants.gamma(2, 2) == pytest.approx(trapezoid_gamma2(2), rel=1e-9)
    assert constants.gamma(2, 2) == pytest.approx(math.pi, abs=1e-12)


def test_gamma_reference_directions_agree():
    # rotation invariance of the sphere measure: the aligned rules for two
    # different reference directions agree far below 1e-8
    a = constants.gamma(2, 1, e=np.array([0.6, 0.8]))
    b = constants.gamma(2, 1, e=np.array([1.0, 0.0]))
    assert a == pytest.approx(b, abs=1e-12)
    a3 = constants.gamma(3, 1.5, e=np.array([0.6, 0.0, 0.8]))
    b3 = constants.gamma(3, 1.5, e=np.array([0.0, 0.0, 1.0]))
    assert a3 == pytest.approx(b3, abs=1e-10)


@pytest.mark.parametrize("d", [2, 3])
def test_gamma_strictly_decreasing_in_p(d):
    ps = [1.0, 1.5, 2.0, 3.0]
    vals = [constants.gamma(d, p) for p in ps]
    assert all(b < a for a, b in zip(vals[:-1], vals[1:]))


def test_gamma_rejects_bad_arguments():
    with pytest.raises(DimensionError):
        constants.gamma(4, 1)
    with pytest.raises(DomainError):
        constants.gamma(2, 0.5)


@pytest.mark.parametrize("d,expected", [(1, 2.0), (2, 4 / math.sqrt(math.pi)),
                                        (3, 2.0)])
def test_gaussian_norm_const(d, expected):
    assert constants.gaussian_norm_const(d) == pytest.approx(expected, rel=1e-10)
    assert constants.gaussian_norm_const(d) == pytest.approx(
        gaussian_norm_oracle(d), rel=1e-9)


def test_bbm_perimeter_const_identity():
    assert constants.bbm_perimeter_const(1) == pytest.approx(0.5, rel=1e-12)
    assert constants.bbm_perimeter_const(2) == pytest.approx(
        math.sqrt(math.pi) / 2, rel=1e-10)
    assert constants.bbm_perimeter_const(3) == pytest.approx(
        math.pi / 2, rel=1e-10)


@pytest.mark.parametrize("d", [1, 2, 3])
def test_degiorgi_const_matches_half_space_value(d):
    # the 1D transition profile has total variation pi^(d/2); calibration
    # must land there before the constant is trusted anywhere else
    assert constants.degiorgi_const(d) == pytest.approx(
        math.pi ** (d / 2.0), rel=1e-6)


def test_degiorgi_const_deterministic():
    a = constants.degiorgi_const(2)
    constants.clear_cache()
    b = constants.degiorgi_const(2)
    assert a == b


def test_constant_table_and_cache_round_trip(tmp_path):
    table = constants.ConstantTable(2)
    payload = table.to_json()
    assert payload["entries"]["gamma_1"]["value"] == 4.0
    assert payload["entries"]["degiorgi"]["provenance"] == "quadrature"
    path = tmp_path / "constants.json"
    constants.save_cache(path)
    before = constants.degiorgi_const(2)
    constants.clear_cache()
    constants.load_cache(path)
    assert constants.degiorgi_const(2) == before
