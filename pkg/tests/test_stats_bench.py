import csv
import math

import numpy as np
import pytest
from scipy import stats

from conftest import random_outputs
from qsimnet.circuit import GridSpec, generate_random_circuit
from qsimnet.engine import NetworkTemplate, batch_amplitudes
from qsimnet.oracle import simulate
from qsimnet.stats_bench import (
    BenchRecord,
    StatsError,
    emit_report,
    extrapolate_runtime,
    ks_exponential,
    porter_thomas_report,
)

N = 2**16


def test_exponential_samples_pass():
    u = np.random.default_rng(0).exponential(size=10_000)
    rep = porter_thomas_report(u / N, N)
    assert rep.ks_p_value > 0.01 and rep.passed
    assert rep.sample_count == 10_000 and rep.to_dict()["pass"] is True


def test_point_mass_fails():
    rep = porter_thomas_report(np.full(1000, 1 / N), N)
    assert rep.ks_p_value < 1e-100 and not rep.passed


def test_ks_single_point_closed_form():
    d, _ = ks_exponential([0.5])
    assert d == pytest.approx(math.exp(-0.5), abs=1e-15)


@pytest.mark.parametrize("seed", range(5))
def test_ks_matches_scipy(seed):
    u = np.random.default_rng(seed).gamma(1.3, size=500)
    d, p = ks_exponential(u)
    ref = stats.kstest(u, "expon", method="asymp")
    assert d == pytest.approx(ref.statistic, rel=1e-12)
    assert p == pytest.approx(ref.pvalue, rel=1e-9)


def test_null_pass_rate():
    rng = np.random.default_rng(123)
    passes = sum(porter_thomas_report(rng.exponential(size=1000) / N, N).passed for _ in range(100))
    assert passes >= 95


def test_input_errors():
    with pytest.raises(StatsError):
        porter_thomas_report([], N)
    with pytest.raises(StatsError):
        porter_thomas_report([1 / N] * 99, N)
    with pytest.raises(StatsError):
        porter_thomas_report([1.5] * 200, N)
    with pytest.raises(StatsError):
        ks_exponential([])


def test_histogram_normalized():
    u = np.random.default_rng(1).exponential(size=5000)
    rep = porter_thomas_report(u / N, N)
    assert len(rep.histogram) == 50
    width = rep.histogram[1][0] - rep.histogram[0][0]
    assert width == pytest.approx(0.2)
    assert sum(d for _, d in rep.histogram) * width == pytest.approx(1, abs=1e-6)


def test_shallow_circuits_are_not_all_converged():
    # about a third of 4x4 seeds at t=16 are still visibly non-Porter-Thomas;
    # every seed tried has converged by t=24
    p = simulate(generate_random_circuit(GridSpec(4, 4), 16, 3)).probabilities()
    assert not porter_thomas_report(p, p.size).passed
    p = simulate(generate_random_circuit(GridSpec(4, 4), 24, 3)).probabilities()
    assert porter_thomas_report(p, p.size).passed


def test_random_circuit_follows_porter_thomas():
    c = generate_random_circuit(GridSpec(4, 4), 16, 0)
    probs = simulate(c).probabilities()
    pick = np.random.default_rng(5).choice(probs.size, size=2000, replace=False)
    assert porter_thomas_report(probs[pick], probs.size).passed


@pytest.mark.slow
def test_engine_amplitudes_follow_porter_thomas():
    c = generate_random_circuit(GridSpec(4, 4), 16, 0)
    tpl = NetworkTemplate(c)
    res = batch_amplitudes(tpl, tpl.plan(10), random_outputs(16, 2000, 9))
    assert porter_thomas_report([abs(r.amplitude) ** 2 for r in res], 2**16).passed


# --- extrapolation -----------------------------------------------------------

def test_extrapolate_identity():
    assert extrapolate_runtime([(4, 12.0, 40)], 40, 4) == pytest.approx(12.0)


def test_extrapolate_max_rule():
    fast, slow = (1, 10.0, 100), (1, 20.0, 100)
    assert extrapolate_runtime([fast, slow], 100, 1) == pytest.approx(20.0)
    assert extrapolate_runtime([fast, slow], 100, 5) == pytest.approx(4.0)


def test_extrapolate_monotone():
    preds = [extrapolate_runtime([(1, 3.0, 17), (2, 2.0, 17)], 1000, w) for w in range(1, 40)]
    assert all(a >= b for a, b in zip(preds, preds[1:]))


def test_extrapolate_needs_samples():
    with pytest.raises(StatsError):
        extrapolate_runtime([], 10, 2)


# --- reports -------------------------------------------------------------------

def test_emit_header_only(tmp_path):
    (bench,) = emit_report([], None, tmp_path / "r")
    rows = list(csv.reader(open(bench)))
    assert rows == [["circuit", "amplitudes", "subtasks_per_amplitude", "resources",
                     "measured_seconds_per_amplitude", "predicted_seconds_per_amplitude"]]


def test_emit_records_and_histogram(tmp_path):
    rec = BenchRecord("4x4_t12", 8, 16, "1 worker", 0.5, 0.6)
    u = np.random.default_rng(2).exponential(size=500)
    bench, hist = emit_report([rec], porter_thomas_report(u / N, N), tmp_path / "r")
    rows = list(csv.DictReader(open(bench)))
    assert rows[0]["circuit"] == "4x4_t12" and float(rows[0]["predicted_seconds_per_amplitude"]) == 0.6
    h = list(csv.DictReader(open(hist)))
    assert len(h) == 50
    assert float(h[0]["porter_thomas"]) == 1.0
    assert sum(float(r["density"]) for r in h) * 0.2 == pytest.approx(1, abs=1e-6)


def test_emit_unwritable_path(tmp_path):
    with pytest.raises(OSError):
        emit_report([], None, tmp_path / "no" / "such" / "dir" / "r")
