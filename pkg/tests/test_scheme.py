import numpy as np
import pytest

from paradecomp import mms
from paradecomp.errors import ConfigurationError, SolveError
from paradecomp.laplacian import laplacian_splitting
from paradecomp.scheme import (
    SchemeConfig,
    baseline_step,
    combine,
    initialize,
    run,
    step,
    step_source,
    sub_solve,
)
from paradecomp.splitting import DenseOperator, Grid, ProblemSpec, Splitting, zero_nonlinearity


def scalar_problem(f=1.0, phi0=0.0, phi1=0.0):
    return ProblemSpec(np.array([phi0]), np.array([phi1]), lambda t: np.array([f]), zero_nonlinearity)


def scalar_split(values, etas):
    return Splitting([DenseOperator([[v]]) for v in values], etas)


def random_dense_splitting(dim, m, seed):
    rng = np.random.default_rng(seed)
    parts = []
    for _ in range(m):
        q, _ = np.linalg.qr(rng.standard_normal((dim, dim)))
        parts.append(DenseOperator(q @ np.diag(rng.uniform(0.5, 20, dim)) @ q.T))
    w = rng.uniform(0.2, 1.0, m)
    return Splitting(parts, list(w / w.sum()))


def test_config_validation():
    with pytest.raises(ConfigurationError):
        SchemeConfig(0.0, 10)
    with pytest.raises(ConfigurationError):
        SchemeConfig(0.1, 1)
    assert SchemeConfig.from_final_time(1.0, 20).tau == pytest.approx(0.05)


def test_initialize_zero_data():
    st = initialize(scalar_problem(phi0=0.0), SchemeConfig(0.1, 5))
    assert st.v_prev[0] == 0.0 and st.v_curr[0] == 0.0 and st.k == 1


def test_initialize_stationary_start():
    g = np.array([1.0, -2.0, 3.0])
    p = ProblemSpec(g, np.zeros(3), lambda t: np.zeros(3), zero_nonlinearity)
    st = initialize(p, SchemeConfig(0.1, 5))
    assert np.array_equal(st.v_prev, g) and np.array_equal(st.v_curr, g)


def test_initialize_test1_data_is_zero():
    g = Grid.unit_square(19)
    st = initialize(mms.make_test1().problem(g), SchemeConfig(0.05, 20))
    assert not st.v_prev.any() and not st.v_curr.any()


def test_corrected_start_adds_taylor_term():
    s = scalar_split([2.0], [1.0])
    p = scalar_problem(f=3.0, phi0=1.0, phi1=0.5)
    st = initialize(p, SchemeConfig(0.1, 5, corrected_start=True), s)
    assert st.v_curr[0] == pytest.approx(1.0 + 0.05 + 0.005 * (3.0 - 2.0))


def test_scalar_two_step_hand_trace():
    tau = 0.1
    s = scalar_split([1.0, 1.0], [0.5, 0.5])
    p = scalar_problem(f=1.0)
    st = step(s, p, initialize(p, SchemeConfig(tau, 2)))
    y1 = 2 * tau**2 / (1 + 2 * tau**2)
    y2 = 0.0
    assert st.v_curr[0] == pytest.approx(0.5 * y1 + 0.5 * y2, rel=1e-15)
    assert st.v_curr[0] == pytest.approx(tau**2 / (1 + 2 * tau**2), rel=1e-15)


def test_source_routed_to_first_part_only():
    s = scalar_split([1.0, 1.0], [0.5, 0.5])
    p = scalar_problem(f=5.0)
    st = initialize(p, SchemeConfig(0.1, 2))
    src = step_source(p, st)
    assert sub_solve(1, s, st, src)[0] == 0.0
    assert sub_solve(0, s, st, src)[0] != 0.0


def test_single_part_is_classic_implicit_layer():
    tau, a = 0.2, 3.0
    s = scalar_split([a], [1.0])
    p = scalar_problem(f=2.0, phi0=0.5, phi1=-1.0)
    st = initialize(p, SchemeConfig(tau, 2))
    y = sub_solve(0, s, st, step_source(p, st))
    expected = (2 * st.v_curr - st.v_prev + tau**2 * 2.0) / (1 + tau**2 * a)
    assert y[0] == pytest.approx(expected[0], rel=1e-15)


def test_zero_dynamics_stay_zero():
    g = Grid.unit_square(6)
    p = ProblemSpec(g.zeros(), g.zeros(), lambda t: g.zeros(), zero_nonlinearity)
    traj = run(laplacian_splitting(g), p, SchemeConfig(0.1, 30))
    assert all(not v.any() for v in traj.layers)


def test_baseline_zero_data():
    g = Grid.unit_square(4)
    s = laplacian_splitting(g)
    p = ProblemSpec(g.zeros(), g.zeros(), lambda t: g.zeros(), zero_nonlinearity)
    st = baseline_step(s.total(), p, initialize(p, SchemeConfig(0.1, 3)))
    assert not st.v_curr.any()


def test_single_part_matches_baseline_over_100_steps():
    g = Grid.unit_square(9)
    s = laplacian_splitting(g)
    whole = s.whole
    single = Splitting([whole], [1.0], whole=whole)
    p = mms.make_smooth().problem(g)
    c = SchemeConfig(0.01, 100)
    a = run(single, p, c)
    b = run(single, p, c, baseline=True)
    for va, vb in zip(a.layers, b.layers):
        assert np.abs(va - vb).max() <= 1e-14


def test_dense_single_part_matches_baseline():
    s = random_dense_splitting(5, 1, seed=3)
    rng = np.random.default_rng(3)
    p = ProblemSpec(rng.standard_normal(5), rng.standard_normal(5), lambda t: np.cos(t) * np.ones(5), np.sin)
    c = SchemeConfig(0.05, 100)
    a, b = run(s, p, c), run(s, p, c, baseline=True)
    assert max(np.abs(x - y).max() for x, y in zip(a.layers, b.layers)) <= 1e-14


def test_split_and_baseline_differ_at_second_order():
    case = mms.make_test1()
    diffs = []
    for n in (20, 40):
        g = Grid.unit_square(n - 1)
        s, p, c = laplacian_splitting(g), case.problem(g), SchemeConfig(1 / n, n)
        a, b = run(s, p, c), run(s, p, c, baseline=True)
        diffs.append(max(np.abs(x - y).max() for x, y in zip(a.layers, b.layers)))
    assert diffs[0] <= 0.05**2
    assert diffs[1] <= diffs[0] / 3.5


def test_run_equals_manual_steps():
    s = random_dense_splitting(4, 3, seed=1)
    rng = np.random.default_rng(1)
    p = ProblemSpec(rng.standard_normal(4), rng.standard_normal(4), lambda t: np.full(4, t), np.sin)
    c = SchemeConfig(0.1, 3)
    traj = run(s, p, c)
    st = initialize(p, c)
    st = step(s, p, step(s, p, st))
    assert np.array_equal(traj.final, st.v_curr)
    assert len(traj) == 4


def test_rolling_mode_keeps_final_layers():
    s = random_dense_splitting(3, 2, seed=2)
    p = ProblemSpec(np.ones(3), np.zeros(3), lambda t: np.zeros(3), np.sin)
    c = SchemeConfig(0.1, 10)
    full, rolling = run(s, p, c), run(s, p, c, store=False)
    assert len(rolling) == 0
    assert np.array_equal(full.final, rolling.final)
    assert np.array_equal(full[-2], rolling.previous)


def test_callback_sees_every_layer():
    s = random_dense_splitting(3, 2, seed=2)
    p = ProblemSpec(np.ones(3), np.zeros(3), lambda t: np.zeros(3), np.sin)
    seen = []
    run(s, p, SchemeConfig(0.1, 6), store=False, callback=lambda k, v: seen.append(k))
    assert seen == list(range(7))


@pytest.mark.parametrize("m", [2, 4])
def test_thread_count_does_not_change_result(m):
    s = random_dense_splitting(6, m, seed=10 + m)
    rng = np.random.default_rng(m)
    p = ProblemSpec(rng.standard_normal(6), rng.standard_normal(6), lambda t: np.sin(t) * np.ones(6), np.sin)
    c = SchemeConfig(0.05, 50)
    a, b = run(s, p, c, threads=1), run(s, p, c, threads=8)
    assert all(np.array_equal(x, y) for x, y in zip(a.layers, b.layers))


def test_long_run_stability_of_eigenmode():
    g = Grid.unit_square(15)
    x, y = g.nodes()
    phi0 = np.sin(np.pi * x) * np.sin(np.pi * y)
    p = ProblemSpec(phi0, g.zeros(), lambda t: g.zeros(), zero_nonlinearity)
    s = laplacian_splitting(g, [0.4, 0.6])
    start = np.abs(phi0).max()
    worst = []
    run(s, p, SchemeConfig(0.5, 10_000), store=False, callback=lambda k, v: worst.append(np.abs(v).max()))
    assert max(worst) <= start * (1 + 1e-12)
    assert np.all(np.isfinite(worst))


def test_combine_order_is_ascending():
    ys = [np.array([1e16]), np.array([1.0]), np.array([-1e16])]
    assert combine([1.0, 1.0, 1.0], ys)[0] == (1e16 + 1.0) - 1e16


def test_non_finite_solve_raises_with_step():
    class Broken(DenseOperator):
        def solve_shifted(self, sigma, rhs):
            return np.full_like(rhs, np.nan)

    s = Splitting([DenseOperator(np.eye(2)), Broken(np.eye(2))], [0.5, 0.5])
    p = ProblemSpec(np.ones(2), np.zeros(2), lambda t: np.zeros(2), zero_nonlinearity)
    with pytest.raises(SolveError) as exc:
        run(s, p, SchemeConfig(0.1, 5))
    assert exc.value.step == 1 and exc.value.part == 1


def test_run_rejects_bad_weights():
    s = scalar_split([1.0, 1.0], [0.7, 0.4])
    with pytest.raises(ConfigurationError):
        run(s, scalar_problem(), SchemeConfig(0.1, 3))
