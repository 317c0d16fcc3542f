"""Experimental protocols on top of the closed-form propagator.

Collapse detection on time series, EIT probe spectra over a detuning grid and
the entanglement time series used by the kappa sweep.  Everything returns
plain value objects; file output lives in :mod:`tripartite.io`.
"""
from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .blocks import BlockPropagator, CouplingForm, ModelParams
from .fock import FockAmplitudes
from .observables import RECORD_COLUMNS, atom_matrix, entropy_of, photon_moments

DEFAULT_WINDOW = 5.0
DEFAULT_THRESHOLD = 0.15
MIN_WINDOW_SAMPLES = 10


class NoCollapseOverlap(RuntimeError):
    """The first-collapse intervals of a detuning grid do not intersect."""


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        t = np.asarray(self.times, dtype=float)
        v = np.asarray(self.values, dtype=float)
        if t.shape != v.shape or t.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if t.size > 1 and np.any(np.diff(t) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)

    def __len__(self):
        return self.times.size


@dataclass(frozen=True)
class CollapseInterval:
    t_start: float
    t_end: float
    level: float
    score: float

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True)
class EitSpectrum:
    delta1_grid: np.ndarray
    values: np.ndarray
    t_star: float
    context: dict = field(default_factory=dict)

    def __post_init__(self):
        g = np.asarray(self.delta1_grid, dtype=float)
        if g.size > 1 and np.any(np.diff(g) <= 0):
            raise ValueError("detuning grid must be strictly increasing")
        object.__setattr__(self, "delta1_grid", g)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))

    def value_at(self, delta1: float) -> float:
        idx = np.flatnonzero(np.isclose(self.delta1_grid, delta1, atol=1e-12))
        if idx.size == 0:
            raise KeyError(f"delta1 = {delta1} is not on the grid")
        return float(self.values[idx[0]])


def detect_collapses(series: TimeSeries, window: float = DEFAULT_WINDOW,
                     rel_threshold: float = DEFAULT_THRESHOLD) -> list[CollapseInterval]:
    """Maximal runs of sliding windows whose spread is small against the whole series.

    A window of duration ``window`` counts as collapsed when its standard
    deviation is below ``rel_threshold`` times the global standard deviation.
    Overlapping collapsed windows are merged; the score of an interval is the
    largest normalized window spread inside it.
    """
    if not 0.0 < rel_threshold < 1.0:
        raise ValueError("rel_threshold must lie in (0, 1)")
    t, y = series.times, series.values
    if len(t) < 2 or t[-1] - t[0] < window:
        raise ValueError("series is shorter than the detection window")
    dt = (t[-1] - t[0]) / (len(t) - 1)
    w = int(round(window / dt)) + 1
    if w < MIN_WINDOW_SAMPLES:
        raise ValueError(f"window spans {w} samples, need at least {MIN_WINDOW_SAMPLES}")
    w = min(w, len(t))
    g = float(np.std(y))
    if g == 0.0:
        return [CollapseInterval(float(t[0]), float(t[-1]), float(y[0]), 0.0)]
    spread = np.std(sliding_window_view(y, w), axis=-1) / g
    flags = spread < rel_threshold

    out = []
    edges = np.diff(np.concatenate([[0], flags.astype(np.int8), [0]]))
    for s, e in zip(np.flatnonzero(edges == 1), np.flatnonzero(edges == -1)):
        first, last = s, e - 1 + w - 1
        seg = y[first:last + 1]
        out.append(CollapseInterval(float(t[first]), float(t[last]), float(seg.mean()),
                                    float(spread[s:e].max())))
    return out


def longest_plateau(intervals: list[CollapseInterval]) -> float:
    return max((iv.length for iv in intervals), default=0.0)


# --- time series ---------------------------------------------------------

def trajectory(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, times) -> dict:
    """All record columns evaluated on ``times`` (dict of arrays)."""
    times = np.asarray(times, dtype=float)
    prop = BlockPropagator(q, r, params)
    cols = {k: [] for k in RECORD_COLUMNS}
    for chunk, G1, G2, G3 in prop.iter_components(times):
        m1, s1 = photon_moments(G1, G2, G3, 1)
        m2, _ = photon_moments(G1, G2, G3, 2)
        rho = atom_matrix(G1, G2, G3)
        pops = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
        var = s1 - m1 ** 2
        with np.errstate(divide="ignore", invalid="ignore"):
            mq = np.where(m1 > 0, var / np.where(m1 > 0, m1, 1.0) - 1.0, np.nan)
        for key, val in (("t", chunk), ("mean_n1", m1), ("var_n1", var), ("mandel_q1", mq),
                         ("mean_n2", m2), ("pop1", pops[:, 0]), ("pop2", pops[:, 1]),
                         ("pop3", pops[:, 2]), ("svne", entropy_of(rho))):
            cols[key].append(np.asarray(val, dtype=float))
    return {k: np.concatenate(v) if v else np.zeros(0) for k, v in cols.items()}


def svne_series(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, times,
                label: str = "svne") -> TimeSeries:
    times = np.asarray(times, dtype=float)
    prop = BlockPropagator(q, r, params)
    vals = [entropy_of(atom_matrix(G1, G2, G3)) for _, G1, G2, G3 in prop.iter_components(times)]
    return TimeSeries(times, np.concatenate(vals), label)


def mean_n1_series(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, times,
                   label: str = "mean_n1") -> TimeSeries:
    times = np.asarray(times, dtype=float)
    prop = BlockPropagator(q, r, params)
    vals = [photon_moments(G1, G2, G3, 1)[0] for _, G1, G2, G3 in prop.iter_components(times)]
    return TimeSeries(times, np.concatenate(vals), label)


# --- EIT -----------------------------------------------------------------

def _pmap(fn, items, threads: int):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def first_collapse(series: TimeSeries, window: float = DEFAULT_WINDOW,
                   rel_threshold: float = DEFAULT_THRESHOLD) -> CollapseInterval | None:
    found = detect_collapses(series, window, rel_threshold)
    return found[0] if found else None


def select_t_star(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, delta1_grid,
                  times, window: float = DEFAULT_WINDOW, rel_threshold: float = DEFAULT_THRESHOLD,
                  use_full_grid: bool = True, threads: int = 1):
    """Midpoint of the common first-collapse interval of <N1(t)> across the grid.

    With ``use_full_grid`` every grid point takes part in the intersection;
    otherwise only the two end points.  Returns ``(t_star, lo, hi)``.
    """
    grid = np.asarray(delta1_grid, dtype=float)
    probe = grid if use_full_grid else grid[[0, -1]]

    def one(d1):
        return first_collapse(mean_n1_series(q, r, params.replace(delta1=float(d1)), times),
                              window, rel_threshold)

    found = _pmap(one, probe, threads)
    missing = [float(d) for d, iv in zip(probe, found) if iv is None]
    if missing:
        raise NoCollapseOverlap(f"no collapse detected at delta1 = {missing}")
    lo = max(iv.t_start for iv in found)
    hi = min(iv.t_end for iv in found)
    if lo >= hi:
        raise NoCollapseOverlap(f"first-collapse intervals do not overlap ({lo:.4g} >= {hi:.4g})")
    return 0.5 * (lo + hi), lo, hi


def eit_spectrum(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, delta1_grid,
                 t_star: float, threads: int = 1, context: dict | None = None) -> EitSpectrum:
    grid = np.asarray(delta1_grid, dtype=float)

    def one(d1):
        prop = BlockPropagator(q, r, params.replace(delta1=float(d1)))
        G = prop.components([t_star])
        return float(photon_moments(*G, 1)[0][0])

    vals = np.array(_pmap(one, grid, threads))
    ctx = {"params": params.as_dict()}
    ctx.update(context or {})
    return EitSpectrum(grid, vals, float(t_star), ctx)


def eit_asymmetry(spectrum: EitSpectrum) -> float:
    """Norm of the odd part of the spectrum over the norm of the spectrum."""
    g = spectrum.delta1_grid
    if not np.allclose(g, -g[::-1], atol=1e-12 * max(1.0, np.abs(g).max(initial=0.0))):
        raise ValueError("asymmetry needs a grid symmetric about delta1 = 0")
    v = spectrum.values
    total = np.linalg.norm(v)
    if total == 0.0:
        return 0.0
    return float(np.linalg.norm(0.5 * (v - v[::-1])) / total)


def is_local_max(spectrum: EitSpectrum, delta1: float = 0.0) -> bool:
    idx = int(np.argmin(np.abs(spectrum.delta1_grid - delta1)))
    v = spectrum.values
    if idx == 0 or idx == len(v) - 1:
        return False
    return bool(v[idx] > v[idx - 1] and v[idx] > v[idx + 1])


def edge_contrast(spectrum: EitSpectrum) -> float:
    """Value at delta1 = 0 relative to the mean of the two grid edges."""
    edge = 0.5 * (spectrum.values[0] + spectrum.values[-1])
    return spectrum.value_at(0.0) / edge


# --- revivals ------------------------------------------------------------

def revival_spacing(series: TimeSeries) -> float | None:
    """Lag of the first autocorrelation maximum after the first zero crossing."""
    v = series.values - series.values.mean()
    if not np.any(v):
        return None
    n = len(v)
    spec = np.fft.rfft(v, 2 * n)
    ac = np.fft.irfft(spec * np.conj(spec))[:n]
    ac = ac / ac[0]
    neg = np.flatnonzero(ac < 0)
    if neg.size == 0:
        return None
    tail = ac[neg[0]:]
    peaks = np.flatnonzero((tail[1:-1] > tail[:-2]) & (tail[1:-1] >= tail[2:])) + 1
    if peaks.size == 0:
        return None
    lag = neg[0] + peaks[np.argmax(tail[peaks])]
    return float(lag * (series.times[-1] - series.times[0]) / (n - 1))


def collapse_revival_cycles(series: TimeSeries, intervals: list[CollapseInterval],
                            min_length: float = 0.0) -> int:
    """Plateaus of at least ``min_length`` that end before the series does."""
    end = series.times[-1]
    return sum(1 for iv in intervals if iv.length >= min_length and iv.t_end < end)


@dataclass(frozen=True)
class KappaResult:
    kappa: float
    series: TimeSeries
    plateaus: list
    cycles: int
    revival_spacing: float | None


def kappa_sweep(q: FockAmplitudes, r: FockAmplitudes, params: ModelParams, kappa_list, times,
                window: float = DEFAULT_WINDOW, rel_threshold: float = DEFAULT_THRESHOLD,
                min_length: float = 0.0, threads: int = 1) -> list[KappaResult]:
    base = params.replace(coupling=CouplingForm.DEFORMED_SU11)

    def one(k):
        p = base.replace(kappa1=float(k), kappa2=float(k))
        s = svne_series(q, r, p, times, label=f"kappa={k:g}")
        found = [iv for iv in detect_collapses(s, window, rel_threshold) if iv.length >= min_length]
        return KappaResult(float(k), s, found, collapse_revival_cycles(s, found), revival_spacing(s))

    return _pmap(one, list(kappa_list), threads)
