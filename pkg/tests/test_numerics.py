import math

import pytest

from errors import ModelInputError
from numerics import adaptive_simpson, geometric_grid, golden_section_max, log_normal_cdf, normal_cdf


def test_adaptive_simpson_sine():
    assert adaptive_simpson(math.sin, 0.0, math.pi, tol=1e-10) == pytest.approx(2.0, abs=1e-9)


def test_adaptive_simpson_panels_catch_narrow_peak():
    def peak(x):
        return math.exp(-((x - 7.3) ** 2) / (2 * 0.01 ** 2))

    exact = 0.01 * math.sqrt(2 * math.pi)
    assert adaptive_simpson(peak, 0.0, 10.0, tol=1e-10, panels=64) == pytest.approx(exact, rel=1e-6)


def test_adaptive_simpson_orientation_and_empty_interval():
    assert adaptive_simpson(math.exp, 1.0, 0.0) == pytest.approx(-(math.e - 1.0), abs=1e-9)
    assert adaptive_simpson(math.exp, 0.5, 0.5) == 0.0


def test_adaptive_simpson_rejects_infinite_bounds():
    with pytest.raises(ModelInputError):
        adaptive_simpson(math.exp, 0.0, math.inf)
    with pytest.raises(ModelInputError):
        adaptive_simpson(math.exp, 0.0, 1.0, panels=0)


def test_golden_section_max_finds_vertex():
    x, fx = golden_section_max(lambda x: -(x - 0.3) ** 2 + 2.0, 0.0, 1.0, tol=1e-8)
    assert x == pytest.approx(0.3, abs=1e-6)
    assert fx == pytest.approx(2.0, abs=1e-10)


def test_golden_section_max_is_deterministic():
    first = golden_section_max(math.sin, 0.0, 3.0)
    second = golden_section_max(math.sin, 3.0, 0.0)
    assert first == second
    assert first[0] == pytest.approx(math.pi / 2, abs=1e-5)


def test_normal_cdf_tails():
    assert normal_cdf(0.0) == pytest.approx(0.5)
    assert normal_cdf(-30.0) > 0.0
    assert math.isfinite(log_normal_cdf(-40.0))
    assert normal_cdf(-0.3734) == pytest.approx(0.35443, abs=5e-5)


def test_geometric_grid():
    grid = geometric_grid()
    assert len(grid) == 400
    assert grid[0] == pytest.approx(1e-4)
    assert grid[-1] == pytest.approx(10.0)
    assert grid[1] / grid[0] == pytest.approx(grid[-1] / grid[-2])
    with pytest.raises(ModelInputError):
        geometric_grid(1.0, 0.5, 10)
    with pytest.raises(ModelInputError):
        geometric_grid(0.0, 1.0, 10)
