import math

import pytest
from pydantic import ValidationError

from diffusion_core import (
    DensityCurve,
    DiffusionSpec,
    escape_probability,
    first_passage_cdf,
    first_passage_density,
    log_scale_diff,
    scale,
    scale_diff,
    speed_density,
    transition_density,
    transition_density_lebesgue,
)
from errors import ModelInputError
from numerics import adaptive_simpson


def test_spec_validation():
    with pytest.raises(ValidationError):
        DiffusionSpec(mu=-1.0, c=0.5, y=0.0)
    with pytest.raises(ValidationError):
        DiffusionSpec(mu=0.0, c=-1.0)
    with pytest.raises(ValidationError):
        DiffusionSpec(mu=math.nan, c=-1.0)


def test_scale_at_infinity(jun12_spec, dec13_spec):
    assert scale(math.inf, jun12_spec) == pytest.approx(0.37684, abs=1e-5)
    assert scale(math.inf, dec13_spec) == math.inf
    assert scale(0.0, dec13_spec) == 0.0
    with pytest.raises(ModelInputError):
        scale(-math.inf, dec13_spec)


def test_scale_diff_matches_direct_difference(dec13_spec, jun12_spec):
    for spec in (dec13_spec, jun12_spec):
        a, b = spec.c, -0.3616
        assert scale_diff(a, b, spec) == pytest.approx(scale(b, spec) - scale(a, spec), rel=1e-12)
        assert scale_diff(b, a, spec) == pytest.approx(-scale_diff(a, b, spec))


def test_log_scale_diff_survives_overflow():
    spec = DiffusionSpec(mu=-50.0, c=-30.0)
    value = log_scale_diff(-30.0, 20.0, spec)
    assert math.isfinite(value)
    # dominated by exp(-2 mu b) / (2 |mu|) with b = 20
    assert value == pytest.approx(2000.0 - math.log(100.0), rel=1e-12)
    with pytest.raises(ModelInputError):
        log_scale_diff(1.0, 1.0, spec)


def test_speed_density(dec13_spec):
    assert speed_density(0.0, dec13_spec) == pytest.approx(2.0)
    assert speed_density(-1.0, dec13_spec) == pytest.approx(2.0 * math.exp(2 * 1.7128))


def test_transition_density_symmetric(dec13_spec, jun12_spec):
    for spec in (dec13_spec, jun12_spec):
        assert transition_density(0.7, -0.4, 0.3, spec) == pytest.approx(
            transition_density(0.7, 0.3, -0.4, spec), rel=1e-12)


def test_transition_density_speed_relation(dec13_spec):
    t, u, v = 0.5, 0.0, -1.1
    assert transition_density_lebesgue(t, u, v, dec13_spec) == pytest.approx(
        transition_density(t, u, v, dec13_spec) * speed_density(v, dec13_spec), rel=1e-12)


def test_transition_density_rejects_points_below_c(dec13_spec):
    with pytest.raises(ModelInputError):
        transition_density(1.0, 0.0, dec13_spec.c, dec13_spec)
    with pytest.raises(ModelInputError):
        transition_density(0.0, 0.0, -1.0, dec13_spec)


def test_survival_mass_matches_first_passage(dec13_spec):
    def integrand(z):
        return 0.0 if z <= dec13_spec.c else transition_density_lebesgue(1.0, 0.0, z, dec13_spec)

    mass = adaptive_simpson(integrand, dec13_spec.c, 12.0, tol=1e-10, panels=32)
    assert mass == pytest.approx(1.0 - first_passage_cdf(1.0, dec13_spec), abs=1e-7)


@pytest.mark.parametrize("s, t, u, v", [(0.3, 0.4, 0.0, -0.8), (0.5, 0.25, -0.6, 0.4)])
def test_chapman_kolmogorov(dec13_spec, jun12_spec, s, t, u, v):
    for spec in (dec13_spec, jun12_spec):
        def integrand(z):
            if z <= spec.c:
                return 0.0
            return transition_density_lebesgue(s, u, z, spec) * transition_density_lebesgue(t, z, v, spec)

        through = adaptive_simpson(integrand, spec.c, 12.0, tol=1e-11, panels=64)
        assert through == pytest.approx(transition_density_lebesgue(s + t, u, v, spec), rel=1e-7)


def test_first_passage_density_integrates_to_cdf(dec13_spec):
    integral = adaptive_simpson(lambda u: first_passage_density(u, dec13_spec), 0.0, 1.0, tol=1e-11,
                                panels=16)
    assert integral == pytest.approx(first_passage_cdf(1.0, dec13_spec), abs=1e-7)


@pytest.mark.parametrize("mu, c, t, expected", [
    (-1.7128, -2.0862, 1.0, 0.4467),
    (-1.7128, -2.0862, 0.5, 0.0611),
    (-2.0604, -2.0966, 1.0, 0.5767),
    (-2.0604, -2.0966, 0.5, 0.0934),
    (-1.1270, -0.5100, 0.25, 0.5029),
    (1.3268, -1.3471, 1.0, 0.0175),
    (0.3033, -1.7397, 1.0, 0.0468),
])
def test_first_passage_cdf_reference_quarters(mu, c, t, expected):
    assert first_passage_cdf(t, DiffusionSpec(mu=mu, c=c)) == pytest.approx(expected, abs=5e-4)


def test_first_passage_limits(dec13_spec, jun12_spec):
    assert first_passage_cdf(0.0, dec13_spec) == 0.0
    assert first_passage_cdf(math.inf, dec13_spec) == 1.0
    assert first_passage_cdf(math.inf, jun12_spec) == pytest.approx(1.0 - escape_probability(jun12_spec))
    assert first_passage_density(0.0, dec13_spec) == 0.0
    with pytest.raises(ModelInputError):
        first_passage_cdf(-1.0, dec13_spec)


def test_escape_probability(jun12_spec, dec13_spec):
    assert escape_probability(jun12_spec) == pytest.approx(0.9720, abs=5e-4)
    assert escape_probability(dec13_spec) == 0.0


def test_density_curve_validation():
    curve = DensityCurve(grid=[0.1, 0.2], values=[1.0, 0.5], kind="density")
    assert curve.grid == [0.1, 0.2]
    with pytest.raises(ValidationError):
        DensityCurve(grid=[0.2, 0.1], values=[1.0, 0.5], kind="density")
    with pytest.raises(ValidationError):
        DensityCurve(grid=[0.1, 0.2], values=[1.0, -0.5], kind="density")
    with pytest.raises(ValidationError):
        DensityCurve(grid=[0.1, 0.2], values=[1.0], kind="cdf")
