import math
from collections import defaultdict

import numpy as np
import pytest

from gtransfer.errors import ConfigError
from gtransfer.gfunction import LongRangeAdditive
from gtransfer.martingale import (
    doob_check,
    exact_compensator,
    increment_ratios,
    likelihood_trace,
    likelihood_traces,
    tightness_stat,
    write_tightness_csv,
)

from .conftest import BIN

LOG_0 = math.log(0.2 / 0.9)
LOG_1 = math.log(0.8 / 0.1)
# 0.2 log(0.2/0.9) + 0.8 log(0.8/0.1), summed by hand from the two table rows
KL_FIXTURE = 1.3627377539886139


@pytest.fixture(scope="module")
def lr175():
    return LongRangeAdditive(BIN, 1.75, 0.05)


@pytest.fixture(scope="module")
def lr_traces(lr175):
    return likelihood_traces(lr175, (0,), (1,), 300, 200, master_seed=17)


def test_bernoulli_is_identically_zero(bernoulli):
    ens = likelihood_traces(bernoulli, (0,), (1,), 50, 100, master_seed=0)
    assert not ens.log_m.any() and not ens.A.any() and not ens.eta.any()
    rep = doob_check(ens, bernoulli.envelope())
    assert rep.identically_zero and rep.C1 == 0.0
    assert exact_compensator(bernoulli, (0,), (1,), [1, 0]) == 0.0
    assert all(r.sup_frac == 0.0 for r in tightness_stat(ens, [0.5, 1, 2]))


def test_fixture_trace_examples(fixture_g):
    t0 = likelihood_trace(fixture_g, (0,), (1,), 5, np.array([0.1, 0.5, 0.5, 0.5, 0.5]))
    assert t0.path[0] == 0
    assert t0.log_m[0] == pytest.approx(LOG_0, abs=1e-15)
    assert np.all(t0.log_m == t0.log_m[0])
    t1 = likelihood_trace(fixture_g, (0,), (1,), 5, np.array([0.9, 0.1, 0.9, 0.1, 0.9]))
    assert t1.path[0] == 1 and t1.log_m[0] == pytest.approx(LOG_1, abs=1e-15)
    assert np.all(t1.A == t1.A[0])
    assert t1.A[0] == pytest.approx(KL_FIXTURE, abs=1e-15)
    assert exact_compensator(fixture_g, (0,), (1,), []) == pytest.approx(KL_FIXTURE, abs=1e-15)
    assert exact_compensator(fixture_g, (0,), (1,), [1]) == 0.0


def test_fixture_ensemble_structure(fixture_g):
    ens = likelihood_traces(fixture_g, (0,), (1,), 40, 300, master_seed=3)
    assert np.all(ens.log_m == ens.log_m[:, :1])
    first = set(np.round(ens.log_m[:, 0], 12).tolist())
    assert first == {round(LOG_0, 12), round(LOG_1, 12)}
    assert np.array_equal(ens.log_m, ens.A + ens.eta)
    # sampling is under the omega_tilde chain: P(x_{-1} = 1) = 0.8
    assert abs((ens.paths[:, 0] == 1).mean() - 0.8) < 4 * math.sqrt(0.16 / 300)


def test_decomposition_is_exact(lr_traces):
    assert np.array_equal(lr_traces.log_m, lr_traces.A + lr_traces.eta)


def test_compensator_is_previsible(lr175, lr_traces):
    for i in (0, 7):
        path = lr_traces.paths[i]
        A = np.cumsum([exact_compensator(lr175, (0,), (1,), path[: t - 1]) for t in range(1, 61)])
        assert np.abs(A - lr_traces.A[i, :60]).max() <= 1e-15 * 60


def test_kl_increments_nonnegative_and_bounded(lr175, lr_traces):
    inc = np.diff(lr_traces.A, axis=1, prepend=0.0)
    assert inc.min() >= 0
    v = lr175.envelope().values(np.arange(1, lr_traces.length + 1))
    assert np.all(inc <= (v / lr175.delta) ** 2)


def test_increment_bound(lr175, lr_traces, fixture_g):
    r = increment_ratios(lr_traces, lr175.envelope(), lr175.delta)
    assert r.max() <= 1
    ens = likelihood_traces(fixture_g, (0,), (1,), 10, 100, master_seed=1)
    assert increment_ratios(ens, fixture_g.envelope(), 0.05).max() <= 1


def test_eta_martingale_property(lr175):
    ens = likelihood_traces(lr175, (0,), (1,), 6, 4000, master_seed=21)
    d_eta = np.diff(ens.eta, axis=1, prepend=0.0)
    n = 4
    groups = defaultdict(list)
    for i in range(ens.replicas):
        groups[tuple(ens.paths[i, : n - 1])].append(d_eta[i, n - 1])
    checked = 0
    for vals in groups.values():
        if len(vals) >= 30:
            vals = np.asarray(vals)
            se = vals.std(ddof=1) / math.sqrt(len(vals))
            assert abs(vals.mean()) <= 4 * se
            checked += 1
    assert checked >= 4


def test_doob_report(lr175, lr_traces, fixture_g):
    rep = doob_check(lr_traces, lr175.envelope())
    assert not rep.identically_zero
    assert np.isfinite(rep.C1) and np.isfinite(rep.C2)
    c1_150, c2_150 = rep.at(150)
    c1_300, c2_300 = rep.at(300)
    assert abs(c1_300 / c1_150 - 1) < 0.25 and abs(c2_300 / c2_150 - 1) < 0.25
    frep = doob_check(likelihood_traces(fixture_g, (0,), (1,), 20, 100, 0), fixture_g.envelope())
    assert frep.at(5) == frep.at(20)
    with pytest.raises(ConfigError):
        doob_check(likelihood_traces(fixture_g, (0,), (1,), 5, 10, 0), fixture_g.envelope())


def test_alpha_125_contrast_run():
    """Not square-summable: the normalised ratios are only reported."""
    lr = LongRangeAdditive(BIN, 1.25, 0.05)
    ens = likelihood_traces(lr, (0,), (1,), 200, 100, master_seed=4)
    rep = doob_check(ens, lr.envelope())
    assert np.isfinite(rep.at(200)[0])


def test_fixture_tightness(fixture_g):
    ens = likelihood_traces(fixture_g, (0,), (1,), 20, 500, master_seed=5)
    rows = tightness_stat(ens, [1, 2, 2.1, 3])
    assert [r.sup_frac for r in rows][2:] == [0.0, 0.0]
    assert rows[0].sup_frac == pytest.approx(0.8, abs=0.08)


def test_tightness_strictly_decreasing_at_larger_coupling():
    # c = 0.2 keeps the tail fractions away from zero over this grid
    lr = LongRangeAdditive(BIN, 1.75, 0.2)
    ens = likelihood_traces(lr, (0,), (1,), 300, 300, master_seed=6)
    fr = [r.sup_frac for r in tightness_stat(ens, [1, 3, 6, 9])]
    assert all(a > b for a, b in zip(fr, fr[1:]))


def test_tightness_grid_validation(lr_traces):
    with pytest.raises(ConfigError):
        tightness_stat(lr_traces, [2, 1])


def test_worker_count_does_not_change_traces(lr175):
    a = likelihood_traces(lr175, (0,), (1,), 30, 1100, master_seed=2, workers=1)
    b = likelihood_traces(lr175, (0,), (1,), 30, 1100, master_seed=2, workers=3)
    assert np.array_equal(a.log_m, b.log_m)


def test_csv_headers(tmp_path, fixture_g):
    ens = likelihood_traces(fixture_g, (0,), (1,), 3, 2, master_seed=0)
    ens.to_csv(tmp_path / "t.csv")
    lines = (tmp_path / "t.csv").read_text().splitlines()
    assert lines[0] == "replica,t,logM,A,eta" and len(lines) == 7
    assert float(lines[1].split(",")[2]) == ens.log_m[0, 0]
    write_tightness_csv(tightness_stat(ens, [1, 2]), tmp_path / "k.csv")
    assert (tmp_path / "k.csv").read_text().splitlines()[0] == "K,sup_frac,argmax_n"
