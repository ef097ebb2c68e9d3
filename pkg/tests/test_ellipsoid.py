import numpy as np
import pytest

from comptrade.ellipsoid import SubgradientOracleResult, maximize


def smooth(f, grad):
    return lambda z: SubgradientOracleResult(f(z), grad(z))


def test_quadratic_interior_maximizer():
    res = maximize(smooth(lambda z: -(z[0] - 0.5) ** 2, lambda z: np.array([-2 * (z[0] - 0.5)])),
                   [0.0], [1.0], tol=1e-9)
    assert res.converged
    assert res.point[0] == pytest.approx(0.5, abs=1e-6)


def test_linear_boundary_maximizer():
    res = maximize(smooth(lambda z: z[0], lambda z: np.array([1.0])), [0.0], [1.0], tol=1e-9)
    assert res.point[0] == pytest.approx(1.0, abs=1e-6)


def _piecewise(z):
    parts = [z[0], z[1], 1.0 - z[0] - z[1] + 0.7]
    grads = [np.array([1.0, 0.0]), np.array([0.0, 1.0]), np.array([-1.0, -1.0])]
    j = int(np.argmin(parts))
    return SubgradientOracleResult(parts[j], grads[j])


def test_piecewise_linear_matches_grid():
    g = np.linspace(0, 1, 1001)
    z1, z2 = np.meshgrid(g, g, indexing="ij")
    vals = np.minimum(np.minimum(z1, z2), 1.7 - z1 - z2)
    k = np.unravel_index(np.argmax(vals), vals.shape)
    res = maximize(_piecewise, [0.0, 0.0], [1.0, 1.0], tol=1e-9)
    assert res.point == pytest.approx([g[k[0]], g[k[1]]], abs=1e-3)
    assert res.point[0] == pytest.approx(res.point[1], abs=1e-6)
    assert res.value == pytest.approx(vals.max(), abs=1e-3)


@pytest.mark.parametrize("deep", [False, True])
def test_box_is_respected(deep):
    seen = []

    def oracle(z):
        seen.append(z.copy())
        return SubgradientOracleResult(z.sum(), np.ones(3))

    lo, hi = np.array([0.0, -1.0, 2.0]), np.array([1.0, 1.0, 5.0])
    res = maximize(oracle, lo, hi, tol=1e-8, deep_cuts=deep)
    assert np.all(np.array(seen) >= lo) and np.all(np.array(seen) <= hi)
    assert np.all(res.point >= lo) and np.all(res.point <= hi)
    assert res.point == pytest.approx(hi, abs=1e-6)


def test_best_value_is_monotone_and_bound_is_valid():
    values = []

    def oracle(z):
        f = -np.sum((z - [0.3, 0.8]) ** 2)
        values.append(f)
        return SubgradientOracleResult(f, -2 * (z - [0.3, 0.8]))

    res = maximize(oracle, [0.0, 0.0], [1.0, 1.0], tol=1e-10)
    assert res.value == max(values)
    assert res.upper_bound >= -1e-12 and res.value <= 0.0


def test_geometric_convergence_on_strongly_concave():
    errors = []

    def oracle(z):
        errors.append(abs(z[0] - 0.3) + abs(z[1] - 0.6))
        return SubgradientOracleResult(-np.sum((z - [0.3, 0.6]) ** 2), -2 * (z - [0.3, 0.6]))

    maximize(oracle, [0.0, 0.0], [1.0, 1.0], tol=1e-12)
    best = np.minimum.accumulate(errors)
    # every 30 iterations cut the error by at least a factor 10
    for a in range(0, len(best) - 30, 30):
        assert best[a + 30] < 0.1 * best[a]


def test_pinned_coordinates_are_not_searched():
    calls = []

    def oracle(z):
        calls.append(z.copy())
        return SubgradientOracleResult(-(z[1] - 0.25) ** 2, np.array([5.0, -2 * (z[1] - 0.25)]))

    res = maximize(oracle, [0.7, 0.0], [0.7, 1.0], tol=1e-10)
    assert all(c[0] == 0.7 for c in calls)
    assert res.point[1] == pytest.approx(0.25, abs=1e-5)


def test_fully_pinned_box():
    res = maximize(lambda z: SubgradientOracleResult(3.0, np.ones(2)), [1.0, 2.0], [1.0, 2.0])
    assert res.converged and res.value == 3.0 and list(res.point) == [1.0, 2.0]


def test_unbounded_upper_coordinate():
    res = maximize(smooth(lambda z: -(z[0] - 4.0) ** 2, lambda z: np.array([-2 * (z[0] - 4.0)])),
                   [0.0], [np.inf], tol=1e-10)
    assert res.point[0] == pytest.approx(4.0, abs=1e-5)


def test_budget_exhaustion_is_not_convergence():
    res = maximize(smooth(lambda z: -(z[0] - 0.3) ** 2, lambda z: np.array([-2 * (z[0] - 0.3)])),
                   [0.0], [1.0], tol=1e-14, max_iter=5)
    assert not res.converged and res.iterations == 5


def test_degenerate_shape_is_reported_not_raised():
    # a NaN supergradient wrecks the shape matrix
    res = maximize(lambda z: SubgradientOracleResult(0.0, np.array([np.nan, 1.0])),
                   [0.0, 0.0], [1.0, 1.0])
    assert not res.converged


def test_primal_bound_stops_early():
    def oracle(z):
        f = -(z[0] - 0.3) ** 2
        return SubgradientOracleResult(f, np.array([-2 * (z[0] - 0.3)]), primal=0.0)

    full = maximize(oracle, [0.0], [1.0], tol=1e-14)
    res = maximize(oracle, [0.0], [1.0], tol=1e-14, gap_rtol=1e-6)
    assert res.converged and res.primal == 0.0 and -res.value <= 1e-6
    assert res.iterations < full.iterations


def test_invalid_box():
    with pytest.raises(ValueError):
        maximize(lambda z: None, [1.0], [0.0])
