import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from diffusion_core import DiffusionSpec
from errors import ModelInputError
from numerics import adaptive_simpson, geometric_grid
from time_reversal import (
    ReversedSpec,
    laplace_evaluator,
    reversed_drift,
    reversed_entrance_density,
    reversed_entrance_density_lebesgue,
    reversed_speed_density,
    talbot_invert,
    time_to_default_cdf,
    time_to_default_density,
    time_to_default_laplace,
    time_to_default_mean,
    zakian_invert,
)


def _residue_series(t, alpha, r, cumulative=False, terms=200):
    """Density (or CDF) of T_c - lambda_alpha summed over the poles of L.

    L has simple poles at q_n = -(mu^2 + (n pi / d)^2) / 2 with residues
    (-1)^(n+1) sinh(mu d) (n pi)^2 / (mu d^3).
    """
    m = abs(r.mu)
    d = alpha - r.c
    scale = math.sinh(m * d) * math.pi ** 2 / (m * d ** 3)
    total = 0.0
    for n in range(1, terms + 1):
        q_n = -(m * m + (n * math.pi / d) ** 2) / 2.0
        term = (-1) ** (n + 1) * scale * n * n * math.exp(q_n * t)
        total += term / -q_n if cumulative else term
    return 1.0 - total if cumulative else total


def test_zakian_inverts_known_transforms():
    assert zakian_invert(lambda s: 1.0 / (s + 2.0), 1.0) == pytest.approx(math.exp(-2.0), abs=1e-4)
    assert zakian_invert(lambda s: 1.0 / (s * s), 3.0) == pytest.approx(3.0, abs=1e-3)
    with pytest.raises(ModelInputError):
        zakian_invert(lambda s: 1.0 / s, 0.0)


def test_talbot_inverts_known_transforms():
    assert talbot_invert(lambda s: 1 / (s + 2), 1.0) == pytest.approx(math.exp(-2.0), rel=1e-10)
    assert talbot_invert(lambda s: 1 / s ** 2, 3.0) == pytest.approx(3.0, rel=1e-10)
    with pytest.raises(ModelInputError):
        talbot_invert(lambda s: 1 / s, -1.0)


def test_reversed_drift_near_c_and_far(dec13_reversed):
    c = dec13_reversed.c
    assert reversed_drift(c + 1e-6, dec13_reversed) * 1e-6 == pytest.approx(1.0, abs=1e-9)
    assert reversed_drift(c + 10.0, dec13_reversed) == pytest.approx(1.7128, abs=1e-9)
    positive = ReversedSpec(base=DiffusionSpec(mu=1.3268, c=-1.3471))
    assert reversed_drift(positive.c + 10.0, positive) == pytest.approx(1.3268, abs=1e-9)
    with pytest.raises(ModelInputError):
        reversed_drift(c, dec13_reversed)


def test_reversed_speed_density_closed_forms(dec13_reversed):
    mu, c, v = -1.7128, -2.0862, -0.9
    expected = ((math.exp(-2 * mu * c) - math.exp(-2 * mu * v)) / (2 * mu)) ** 2 * 2 * math.exp(2 * mu * v)
    assert reversed_speed_density(v, dec13_reversed) == pytest.approx(expected, rel=1e-10)

    mu, c = 1.3268, -1.3471
    positive = ReversedSpec(base=DiffusionSpec(mu=mu, c=c))
    expected = (1 - math.exp(-2 * mu * (v - c))) ** 2 * 2 * math.exp(2 * mu * v)
    assert reversed_speed_density(v, positive) == pytest.approx(expected, rel=1e-10)


@pytest.mark.parametrize("mu", [-1.7128, 1.3268])
def test_entrance_law_is_a_probability(mu):
    r = ReversedSpec(base=DiffusionSpec(mu=mu, c=-2.0))
    mass = adaptive_simpson(lambda d: reversed_entrance_density_lebesgue(0.5, r.c + d, r), 1e-12, 20.0,
                            tol=1e-11, panels=32)
    assert mass == pytest.approx(1.0, abs=1e-7)
    v = r.c + 0.8
    assert reversed_entrance_density(0.5, v, r) * reversed_speed_density(v, r) == pytest.approx(
        reversed_entrance_density_lebesgue(0.5, v, r), rel=1e-12)


def test_laplace_transform_basics(dec13_reversed):
    assert time_to_default_laplace(1e-10, -1.3358, dec13_reversed) == pytest.approx(1.0, abs=1e-6)
    real = time_to_default_laplace(0.7, -1.3358, dec13_reversed)
    assert 0.0 < real < 1.0
    assert time_to_default_laplace(0.7 + 0j, -1.3358, dec13_reversed).real == pytest.approx(real, rel=1e-12)
    assert laplace_evaluator(-1.3358, dec13_reversed)(0.7).real == pytest.approx(real, rel=1e-12)
    with pytest.raises(ModelInputError):
        time_to_default_laplace(0.0, -1.3358, dec13_reversed)
    with pytest.raises(ModelInputError):
        time_to_default_laplace(-1.0 + 2.0j, -1.3358, dec13_reversed)
    with pytest.raises(ModelInputError):
        laplace_evaluator(-3.0, dec13_reversed)


def test_laplace_transform_at_zero_over_random_specs():
    rng = np.random.default_rng(2024)
    for _ in range(20):
        mu = rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 3.0)
        c = rng.uniform(-3.0, -0.2)
        r = ReversedSpec(base=DiffusionSpec(mu=mu, c=c))
        alpha = rng.uniform(c + 0.05, 0.0)
        assert time_to_default_laplace(1e-12, alpha, r) == pytest.approx(1.0, abs=1e-6)


def test_laplace_transform_decreasing(dec13_reversed):
    values = [time_to_default_laplace(q, -0.2367, dec13_reversed) for q in (0.1, 1.0, 10.0, 100.0)]
    assert values == sorted(values, reverse=True)
    assert math.isfinite(time_to_default_laplace(1e6, -0.2367, dec13_reversed))


def test_mean_matches_closed_form(dec13_reversed):
    d = -1.3358 + 2.0862
    m = 1.7128
    expected = d / (m * math.tanh(m * d)) - 1.0 / (m * m)
    assert time_to_default_mean(-1.3358, dec13_reversed) == pytest.approx(expected, rel=1e-12)
    assert time_to_default_mean(-1.3358, dec13_reversed) == pytest.approx(0.1698, abs=1e-3)


@pytest.mark.parametrize("alpha", [-1.3358, -0.2367])
def test_time_to_default_density_is_a_density(dec13_reversed, alpha):
    curve = time_to_default_density(alpha, dec13_reversed)
    grid = np.asarray(curve.grid)
    values = np.asarray(curve.values)
    assert curve.kind == "density"
    assert trapezoid(values, grid) == pytest.approx(1.0, abs=5e-3)
    assert trapezoid(grid * values, grid) == pytest.approx(time_to_default_mean(alpha, dec13_reversed),
                                                           abs=1e-2)


def test_time_to_default_density_shape(dec13_reversed):
    near = time_to_default_density(-1.3358, dec13_reversed)
    mode = near.grid[int(np.argmax(near.values))]
    # the exact mode is t = 0.0986
    assert 0.08 <= mode <= 0.13

    far = time_to_default_density(-0.2367, dec13_reversed)
    grid = np.asarray(far.grid)
    values = np.asarray(far.values)
    inside = (grid >= 0.25) & (grid <= 1.0)
    assert trapezoid(values[inside], grid[inside]) > 0.5


@pytest.mark.parametrize("t", [0.05, 0.1, 0.2, 0.5, 1.0])
def test_density_and_cdf_match_residue_series(dec13_reversed, t):
    density = time_to_default_density(-1.3358, dec13_reversed, [t])
    cdf = time_to_default_cdf(-1.3358, dec13_reversed, [t])
    assert density.values[0] == pytest.approx(_residue_series(t, -1.3358, dec13_reversed), rel=1e-6, abs=1e-9)
    assert cdf.values[0] == pytest.approx(_residue_series(t, -1.3358, dec13_reversed, cumulative=True),
                                          abs=1e-8)


def test_zakian_curve_agrees_up_to_the_mode(dec13_reversed):
    curve = time_to_default_density(-1.3358, dec13_reversed, [0.05, 0.1], method="zakian")
    expected = [_residue_series(t, -1.3358, dec13_reversed) for t in (0.05, 0.1)]
    assert curve.values == pytest.approx(expected, rel=1e-3)
    with pytest.raises(ModelInputError):
        time_to_default_density(-1.3358, dec13_reversed, [0.1], method="stehfest")


def test_time_to_default_cdf(dec13_reversed):
    grid = geometric_grid(1e-3, 10.0, 80)
    curve = time_to_default_cdf(-1.3358, dec13_reversed, grid)
    assert curve.kind == "cdf"
    assert curve.values[-1] == pytest.approx(1.0, abs=1e-2)
    assert max(curve.values) <= 1.0
    assert curve.values[0] == pytest.approx(0.0, abs=1e-3)
