import math

import numpy as np
import pytest

from paradecomp import mms
from paradecomp.laplacian import five_point_laplacian
from paradecomp.splitting import Grid


@pytest.mark.parametrize("label", sorted(mms.CASES))
def test_exact_vanishes_on_boundary(label):
    case = mms.get_case(label)
    rng = np.random.default_rng(0)
    s = rng.uniform(0, 1, 1000)
    t = rng.uniform(0, 1, 1000)
    for x, y in ((0 * s, s), (0 * s + 1, s), (s, 0 * s), (s, 0 * s + 1)):
        assert np.abs(case.exact(x, y, t)).max() <= 1e-13


@pytest.mark.parametrize("make", [mms.make_test1, mms.make_test2])
def test_power_cases_start_at_rest(make):
    case = make()
    x, y = Grid.unit_square(9).nodes()
    assert not case.exact(x, y, 0.0).any()
    assert not case.exact_dt(x, y, 0.0).any()


def test_time_derivatives_by_finite_differences():
    case = mms.make_test1()
    x, y, t, d = 0.3, 0.7, 0.6, 1e-5
    dt = (case.exact(x, y, t + d) - case.exact(x, y, t - d)) / (2 * d)
    assert dt == pytest.approx(case.exact_dt(x, y, t), rel=1e-8)
    d = 1e-4
    dtt = (case.exact(x, y, t + d) - 2 * case.exact(x, y, t) + case.exact(x, y, t - d)) / d**2
    assert dtt == pytest.approx(case.exact_tt(x, y, t), rel=1e-6)


def fd_forcing(case, n, t):
    """``u_tt - Delta u - sin u`` with centred differences in t and a 5-point stencil."""
    g = Grid.unit_square(n - 1)
    x, y = g.nodes()
    h = 1.0 / n
    u = case.exact(x, y, t)
    utt = (case.exact(x, y, t + h) - 2 * u + case.exact(x, y, t - h)) / h**2
    return utt + five_point_laplacian(u, g) - np.sin(u), case.forcing(x, y, t)


@pytest.mark.parametrize("label", ["test1", "smooth"])
def test_forcing_matches_finite_difference_oracle(label):
    case = mms.get_case(label)
    errs = []
    ns = (20, 40, 80)
    for n in ns:
        fd, exact = fd_forcing(case, n, 0.5)
        errs.append(np.abs(fd - exact).max())
    assert mms.fit_order(ns, errs) >= 1.8


def test_test2_profile_has_ten_lobes():
    x = np.linspace(0, 1, 20001)[1:-1]
    prof = mms.make_test2().spatial(x, 0.05)
    signs = np.sign(prof[np.abs(prof) > 1e-9])
    changes = int(np.count_nonzero(np.diff(signs)))
    assert changes + 1 == 10


def test_measure_error_exact_and_shifted():
    case = mms.make_smooth()
    n = 8
    g = Grid.unit_square(n - 1)
    x, y = g.nodes()
    tau = 0.125
    exact = [case.exact(x, y, k * tau) for k in range(n + 1)]
    zero = mms.measure_error(exact, case, g, tau)
    assert zero.max_error == 0.0 and zero.l2_error == 0.0
    eps = 1e-3
    shifted = mms.measure_error([u + eps for u in exact], case, g, tau)
    assert shifted.max_error == pytest.approx(eps, rel=1e-9)
    assert shifted.l2_error == pytest.approx(eps * math.sqrt(g.cell_volume * g.shape[0] * g.shape[1]), rel=1e-9)


def test_solve_case_reports_tau_equals_h():
    res = mms.solve_case(mms.make_smooth(), 10)
    assert res.tau == pytest.approx(0.1) and res.h == pytest.approx(0.1)
    assert 0 < res.errors.max_error < 0.2
    assert res.errors.rel_error == pytest.approx(res.errors.max_error / res.errors.max_exact)


def test_fit_order_on_exact_power_law():
    ns = [10, 20, 40, 80]
    assert mms.fit_order(ns, [3.0 * n**-2.0 for n in ns]) == pytest.approx(2.0, rel=1e-12)
    assert math.isnan(mms.fit_order([10, 20], [0.1, 0.025]))


def test_single_resolution_is_insufficient(tmp_path):
    report = mms.convergence_study(mms.make_smooth(), [10])
    assert report.insufficient and math.isnan(report.order)
    mms.write_report(report, tmp_path)
    assert "status = insufficient" in (tmp_path / "slope.txt").read_text()


def test_report_files(tmp_path):
    report = mms.convergence_study(mms.make_smooth(), [8, 16, 32], threads=3)
    assert report.ns == [8, 16, 32] and report.monotone
    paths = mms.write_report(report, tmp_path)
    lines = open(paths["csv"]).read().splitlines()
    assert lines[0] == mms.CSV_HEADER and len(lines) == 4
    dat = np.loadtxt(paths["dat"])
    assert dat.shape == (3, 2)
    assert dat[0, 0] == pytest.approx(math.log(8))
    slope = open(paths["slope"]).read()
    assert f"order = {mms.fmt(report.order)}" in slope


def test_sweep_threads_do_not_change_rows():
    a = mms.convergence_study(mms.make_smooth(), [8, 16, 24], threads=1)
    b = mms.convergence_study(mms.make_smooth(), [8, 16, 24], threads=3)
    assert [r.errors.max_error for r in a.rows] == [r.errors.max_error for r in b.rows]


def test_unknown_case():
    with pytest.raises(KeyError):
        mms.get_case("nope")
