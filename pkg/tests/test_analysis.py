import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tripartite.analysis import (EitSpectrum, NoCollapseOverlap, TimeSeries,
                                 collapse_revival_cycles, detect_collapses, edge_contrast,
                                 eit_asymmetry, eit_spectrum, is_local_max, kappa_sweep,
                                 mean_n1_series, revival_spacing, select_t_star, svne_series,
                                 trajectory)
from tripartite.blocks import ModelParams
from tripartite.fock import FieldSpec, coherent_amplitudes, fock_amplitudes, prepare
from tripartite.observables import RECORD_COLUMNS
from tripartite.oracle import NumericPropagator, partial_trace, product_state

# oracle run: CS(sqrt 10) probe, empty coupling mode, brute-force propagation,
# 801 samples on [0, 40]; plateau mean over the first detected collapse
JC_PLATEAU = 9.500883902923656
JC_COLLAPSE = (1.9, 13.55)

T40 = np.linspace(0, 40, 801)


def test_timeseries_validation():
    with pytest.raises(ValueError):
        TimeSeries([0, 1, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        TimeSeries([0, 1], [0])


def test_constant_series_single_interval():
    s = TimeSeries(np.linspace(0, 10, 201), np.full(201, 3.0))
    (iv,) = detect_collapses(s, 1.0, 0.1)
    assert (iv.t_start, iv.t_end, iv.level) == (0.0, 10.0, 3.0)


def test_sinusoid_has_no_interval():
    t = np.linspace(0, 100, 2001)
    assert detect_collapses(TimeSeries(t, np.sin(t)), 5.0, 0.1) == []


def test_detector_preconditions():
    t = np.linspace(0, 10, 101)
    s = TimeSeries(t, np.sin(t))
    with pytest.raises(ValueError):
        detect_collapses(s, 20.0, 0.1)
    with pytest.raises(ValueError):
        detect_collapses(s, 0.5, 0.1)  # six samples
    with pytest.raises(ValueError):
        detect_collapses(s, 2.0, 1.5)


def test_detector_finds_embedded_plateau():
    t = np.linspace(0, 100, 2001)
    y = np.where((t > 30) & (t < 70), 0.5, np.sin(3 * t))
    (iv,) = detect_collapses(TimeSeries(t, y), 5.0, 0.15)
    assert 28 < iv.t_start < 32 and 68 < iv.t_end < 72
    assert iv.score <= 0.15
    assert collapse_revival_cycles(TimeSeries(t, y), [iv]) == 1


@settings(max_examples=30, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(1e-3, 1e3), st.integers(0, 2 ** 31))
def test_detector_affine_invariant(shift, scale, seed):
    rng = np.random.default_rng(seed)
    t = np.linspace(0, 50, 1001)
    y = np.where(t > 25, 0.01 * rng.normal(size=t.size), np.cos(2 * t))
    a = detect_collapses(TimeSeries(t, y), 5.0, 0.15)
    b = detect_collapses(TimeSeries(t, shift + scale * y), 5.0, 0.15)
    assert [(i.t_start, i.t_end) for i in a] == [(i.t_start, i.t_end) for i in b]


def jc_oracle_series():
    q = prepare(FieldSpec.coherent(math.sqrt(10)), 1e-14)
    prop = NumericPropagator(ModelParams(), q.cutoff, 1)
    s0 = product_state(q, fock_amplitudes(0, 0), q.cutoff, 1)
    n = np.diag(np.arange(q.cutoff + 1))
    return np.array([np.real(np.trace(partial_trace(prop.evolve(s0, t), "field1").matrix @ n))
                     for t in T40])


def test_jc_first_collapse_plateau():
    q = prepare(FieldSpec.coherent(math.sqrt(10)), 1e-14)
    s = mean_n1_series(q, fock_amplitudes(0, 0), ModelParams(), T40)
    assert np.abs(s.values - jc_oracle_series()).max() < 1e-9
    iv = detect_collapses(s)[0]
    assert iv.t_start > 1.0  # after the initial Rabi decay
    assert (iv.t_start, iv.t_end) == pytest.approx(JC_COLLAPSE, abs=1e-9)
    assert iv.level == pytest.approx(JC_PLATEAU, abs=1e-9)
    assert iv.level == pytest.approx(10 - 0.5, abs=0.05)


def test_trajectory_columns_and_svne_series():
    q, r = coherent_amplitudes(2.0, 25), coherent_amplitudes(1.0, 15)
    times = np.linspace(0, 5, 11)
    cols = trajectory(q, r, ModelParams(chi1=1.0), times)
    assert tuple(cols) == RECORD_COLUMNS
    assert np.allclose(cols["pop1"] + cols["pop2"] + cols["pop3"], 1.0, atol=1e-10)
    s = svne_series(q, r, ModelParams(chi1=1.0), times)
    assert s.values[0] == pytest.approx(0.0, abs=1e-12)
    assert np.allclose(s.values, cols["svne"])


def test_t_star_and_symmetric_spectrum():
    q = prepare(FieldSpec.coherent(math.sqrt(10)))
    grid = np.linspace(-10, 10, 41)
    ts, lo, hi = select_t_star(q, fock_amplitudes(0, 0), ModelParams(), grid, T40)
    assert lo < ts < hi
    r = prepare(FieldSpec.coherent(math.sqrt(18)))
    spec = eit_spectrum(q, r, ModelParams(), grid, ts, threads=2)
    assert eit_asymmetry(spec) < 1e-6
    assert is_local_max(spec, 0.0)
    assert spec.value_at(0.0) == pytest.approx(spec.values[20])


def test_t_star_without_overlap():
    q = prepare(FieldSpec.coherent(math.sqrt(10)))
    with pytest.raises(NoCollapseOverlap):
        # a fock probe never collapses
        select_t_star(fock_amplitudes(10, 10), fock_amplitudes(0, 0), ModelParams(),
                      [-1.0, 1.0], T40)
    del q


def test_zero_coupling_spectrum_is_flat():
    q, r = coherent_amplitudes(2.0, 30), coherent_amplitudes(3.0, 40)
    spec = eit_spectrum(q, r, ModelParams(lambda1=0, lambda2=0), np.linspace(-5, 5, 11), 4.0)
    # flat to rounding: |exp(i x)|^2 is not exactly one in floating point
    assert np.ptp(spec.values) <= 1e-13 * spec.values.max()


def test_asymmetry_measure():
    g = np.linspace(-2, 2, 5)
    assert eit_asymmetry(EitSpectrum(g, [1, 2, 3, 2, 1], 0.0)) == 0.0
    assert eit_asymmetry(EitSpectrum(g, [0, 0, 0, 0, 1], 0.0)) == pytest.approx(math.sqrt(0.5))
    with pytest.raises(ValueError):
        eit_asymmetry(EitSpectrum(np.array([-1.0, 0.0, 2.0]), [1, 1, 1], 0.0))
    with pytest.raises(ValueError):
        EitSpectrum([1.0, 0.0], [1, 1], 0.0)
    assert edge_contrast(EitSpectrum(g, [2, 1, 3, 1, 2], 0.0)) == 1.5


def test_revival_spacing_of_periodic_signal():
    t = np.linspace(0, 100, 4001)
    s = TimeSeries(t, np.cos(2 * math.pi * t / 12.5))
    assert revival_spacing(s) == pytest.approx(12.5, rel=0.01)
    assert revival_spacing(TimeSeries(t, np.ones_like(t))) is None


def test_kappa_sweep_shapes():
    q = prepare(FieldSpec.photon_added(1.0, 1), 1e-8)
    times = np.linspace(0, 20, 201)
    res = kappa_sweep(q, q, ModelParams(chi1=1.0, chi2=1.0), [0.0, 0.5], times, 2.0, 0.15, threads=2)
    assert [x.kappa for x in res] == [0.0, 0.5]
    assert all(len(x.series) == len(times) for x in res)
    assert res[0].series.label == "kappa=0"
