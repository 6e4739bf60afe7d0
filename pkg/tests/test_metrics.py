import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from meddeconf.metrics import coverage, coverage_counts, rmse
from meddeconf.outcome import EffectReport


def test_rmse_examples():
    assert rmse([0.1, 0.3, -0.2], [0.1, 0.3, -0.2]) == 0.0
    assert rmse([0.1, 0.3, -0.2], [0, 0.3, 0]) == pytest.approx(np.sqrt(0.05 / 3))
    assert rmse([0.1, 0.3, -0.2], [0, 0.3, 0]) == pytest.approx(0.1291, abs=5e-5)


vals = st.lists(st.floats(-10, 10), min_size=1, max_size=12)


@given(vals, st.floats(-5, 5), st.randoms())
def test_rmse_offset_and_permutation(truth, c, rnd):
    truth = np.array(truth)
    assert rmse(truth + c, truth) == pytest.approx(abs(c), abs=1e-9)
    est = truth + np.linspace(-1, 1, truth.size)
    perm = list(range(truth.size))
    rnd.shuffle(perm)
    assert rmse(est[perm], truth[perm]) == pytest.approx(rmse(est, truth), rel=1e-12)


def test_rmse_errors():
    with pytest.raises(ValueError):
        rmse([1.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        rmse([], [])


def test_coverage_examples():
    all_, causal, noncausal = coverage_counts([[-0.1, 0.1], [0.2, 0.4]], [0.0, 0.5])
    assert all_ == 50.0 and causal == 0.0 and noncausal == 100.0
    wide = np.tile([-1e9, 1e9], (4, 1))
    assert coverage_counts(wide, [0.0, 1.0, -2.0, 3.0])[0] == 100.0


def test_empty_causal_stratum_is_absent():
    all_, causal, noncausal = coverage_counts([[-1, 1], [-1, 1]], [0.0, 0.0])
    assert causal is None
    assert all_ == noncausal == 100.0


@given(
    st.lists(st.tuples(st.floats(-3, 3), st.floats(0, 2), st.floats(-3, 3)), min_size=1, max_size=10),
    st.floats(0, 1),
)
def test_widening_never_lowers_coverage(rows, extra):
    centre = np.array([r[0] for r in rows])
    half = np.array([r[1] for r in rows])
    truth = np.array([r[2] for r in rows])
    narrow = np.column_stack([centre - half, centre + half])
    wide = np.column_stack([centre - half - extra, centre + half + extra])
    for a, b in zip(coverage_counts(narrow, truth), coverage_counts(wide, truth)):
        assert (a is None and b is None) or b >= a


def test_coverage_from_report():
    rep = EffectReport(
        labels=("a", "b"),
        mean=np.array([0.0, 0.3]),
        std_err=np.array([0.1, 0.1]),
        levels=(0.8, 0.95),
        lower=np.array([[-0.05, 0.25], [-0.1, 0.2]]),
        upper=np.array([[0.05, 0.35], [0.1, 0.4]]),
        tail_prob=np.array([1.0, 0.01]),
    )
    summary = coverage(rep, [0.0, 0.5])
    assert summary.rmse == pytest.approx(np.sqrt(0.02))
    assert (summary.coverage_all, summary.coverage_causal, summary.coverage_noncausal) == (50.0, 0.0, 100.0)
