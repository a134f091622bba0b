import numpy as np
import pytest

from conftest import conventional, ml_trace, problem
from mlpqe.analysis import (
    MissingSnapshotsError,
    distance_matrix,
    energy_error,
    series_csv,
    top_fraction_labels,
    wavefunction_error,
)
from mlpqe.pqe import IterationRecord, IterationTrace


def make_trace(thetas, labels=("a", "b", "c")):
    records = [IterationRecord(k, "conventional", np.array(t, dtype=float), 0.0, -1.0 + 0.1 * k, {})
               for k, t in enumerate(thetas)]
    return IterationTrace(tuple(labels), records, final_theta=np.array(thetas[-1], dtype=float))


def test_constant_trace_gives_zero_matrix():
    m = distance_matrix(make_trace([[0.1, 0.2, 0.3]] * 4))
    assert np.all(m.values == 0)


def test_single_parameter_difference():
    m = distance_matrix(make_trace([[0.1, 0.2, 0.3], [0.1, 0.25, 0.3]]))
    assert m.values[0, 1] == pytest.approx(0.05, abs=1e-15)


def test_matrix_invariants_and_subset_monotonicity():
    trace = conventional("h2o")
    full = distance_matrix(trace)
    sub = distance_matrix(trace, trace.labels[::3])
    for m in (full, sub):
        assert np.all(np.diag(m.values) == 0)
        assert np.allclose(m.values, m.values.T, atol=1e-14)
        assert np.all(m.values >= 0)
    assert np.all(sub.values <= full.values + 1e-15)


def test_missing_snapshots_raise():
    trace = IterationTrace.from_json(conventional("h2").to_json(include_theta=False))
    with pytest.raises(MissingSnapshotsError):
        distance_matrix(trace)
    with pytest.raises(MissingSnapshotsError):
        wavefunction_error(trace, np.zeros(3))


def test_unknown_subset_label():
    with pytest.raises(KeyError):
        distance_matrix(make_trace([[0, 0, 0]]), ["z"])


def test_energy_error_against_own_final_energy():
    trace = conventional("h4_0.75")
    assert energy_error(trace, trace.final_energy)[-1] == 0.0


def test_noiseless_h4_reaches_fci():
    assert energy_error(conventional("h4_0.75"), problem("h4_0.75").fci_energy)[-1] < 1e-6


def test_shared_prefix_is_bit_identical():
    conv, ml = conventional("h4_0.75"), ml_trace("h4_0.75")
    n = ml.count("training")
    e_ref = problem("h4_0.75").fci_energy
    assert np.array_equal(energy_error(conv, e_ref)[:n], energy_error(ml, e_ref)[:n])


def test_wavefunction_error():
    trace = conventional("h4_1.50")
    wf = wavefunction_error(trace, trace.final_theta)
    assert wf[-1] == 0.0
    assert np.all(np.diff(wf[-5:]) <= 1e-10)
    with pytest.raises(ValueError):
        wavefunction_error(trace, np.zeros(3))


def test_top_fraction_labels():
    trace = make_trace([[0.0, 0.0, 0.0], [0.1, -0.5, 0.2]])
    assert top_fraction_labels(trace, 0.34) == ["b"]


def test_series_csv_log_column():
    text = series_csv([1.0, 0.01, 0.0])
    assert text.splitlines() == ["iteration,value,log10_value", "0,1.0,0.0", "1,0.01,-2.0", "2,0.0,-inf"]
