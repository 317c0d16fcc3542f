"""Fock-basis amplitudes for the initial states of the two field modes.

Every constructor returns a :class:`FockAmplitudes` holding ``q_0 .. q_cutoff``
renormalized over the truncated window, together with the probability mass
that the truncation discarded.  Weights are evaluated in the log domain so
that cutoffs of several hundred photons stay finite.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln, logsumexp
from scipy.stats import poisson

DEFAULT_EPSILON = 1e-12
DEFAULT_CEILING = 512


class CutoffError(ValueError):
    """Raised when no admissible cutoff exists below the ceiling."""


class FieldKind(str, enum.Enum):
    COHERENT = "coherent"
    PHOTON_ADDED = "photon_added"
    EVEN_CAT = "even_cat"
    ODD_CAT = "odd_cat"
    YURKE_STOLER = "yurke_stoler"
    SQUEEZED_VACUUM = "squeezed_vacuum"
    FOCK = "fock"


@dataclass(frozen=True)
class FieldSpec:
    """Declarative description of one mode's initial state.

    Only the fields relevant to ``kind`` are read; the others are ignored.
    """

    kind: FieldKind
    alpha: complex = 0.0
    added_photons: int = 0
    xi: complex = 0.0
    fock_n: int = 0

    @classmethod
    def coherent(cls, alpha: complex) -> FieldSpec:
        return cls(FieldKind.COHERENT, alpha=alpha)

    @classmethod
    def photon_added(cls, alpha: complex, m: int) -> FieldSpec:
        return cls(FieldKind.PHOTON_ADDED, alpha=alpha, added_photons=m)

    @classmethod
    def squeezed_vacuum(cls, xi: complex) -> FieldSpec:
        return cls(FieldKind.SQUEEZED_VACUUM, xi=xi)

    @classmethod
    def fock(cls, n: int) -> FieldSpec:
        return cls(FieldKind.FOCK, fock_n=n)

    def describe(self) -> dict:
        """JSON-friendly dict with only the fields that ``kind`` uses."""
        out: dict = {"kind": self.kind.value}
        if self.kind is FieldKind.SQUEEZED_VACUUM:
            out["xi"] = [complex(self.xi).real, complex(self.xi).imag]
        elif self.kind is FieldKind.FOCK:
            out["fock_n"] = self.fock_n
        else:
            out["alpha"] = [complex(self.alpha).real, complex(self.alpha).imag]
            if self.kind is FieldKind.PHOTON_ADDED:
                out["added_photons"] = self.added_photons
        return out


@dataclass(frozen=True)
class FockAmplitudes:
    """Truncated, renormalized Fock amplitudes ``q_0 .. q_cutoff``."""

    coeffs: np.ndarray
    tail_mass: float = 0.0
    raw_norm: float = field(default=1.0, compare=False)

    def __post_init__(self):
        c = np.array(self.coeffs, dtype=complex)
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return len(self.coeffs) - 1

    @property
    def probabilities(self) -> np.ndarray:
        return np.abs(self.coeffs) ** 2

    def mean(self) -> float:
        return float(np.dot(np.arange(len(self.coeffs)), self.probabilities))


def _finish(coeffs: np.ndarray, tail_mass: float | None = None) -> FockAmplitudes:
    raw = float(np.sum(np.abs(coeffs) ** 2))
    if tail_mass is None:
        tail_mass = max(0.0, 1.0 - raw)
    if raw == 0.0:
        raise CutoffError("truncation window carries no probability mass")
    return FockAmplitudes(coeffs / math.sqrt(raw), tail_mass=tail_mass, raw_norm=raw)


def _coherent_log_weights(alpha: complex, n: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """log|<n|alpha>| and arg <n|alpha> (without normalization of the window)."""
    a = abs(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mod = -0.5 * a * a + n * np.log(a) - 0.5 * gammaln(n + 1)
    if a == 0.0:
        log_mod = np.where(n == 0, 0.0, -np.inf)
    return log_mod, n * np.angle(alpha)


def coherent_amplitudes(alpha: complex, cutoff: int) -> FockAmplitudes:
    """Coherent state ``|alpha>`` truncated to ``n <= cutoff``."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    n = np.arange(cutoff + 1)
    log_mod, phase = _coherent_log_weights(alpha, n)
    q = np.exp(log_mod + 1j * phase)
    tail = float(poisson.sf(cutoff, abs(alpha) ** 2)) if alpha != 0 else 0.0
    return _finish(q, tail)


def _log_laguerre_neg(m: int, x: float) -> float:
    """log L_m(-x) for x >= 0; every term of the series is positive."""
    if x == 0.0:
        return 0.0
    k = np.arange(m + 1)
    terms = gammaln(m + 1) - gammaln(k + 1) - gammaln(m - k + 1) + k * math.log(x) - gammaln(k + 1)
    return float(logsumexp(terms))


def pacs_amplitudes(alpha: complex, m: int, cutoff: int) -> FockAmplitudes:
    """Normalized photon-added coherent state ``(a^dag)^m |alpha>``.

    The squared norm of ``(a^dag)^m |alpha>`` is ``m! L_m(-|alpha|^2)``.
    """
    if m < 0:
        raise ValueError("number of added photons must be >= 0")
    if cutoff < m:
        raise CutoffError(f"cutoff {cutoff} < added photons {m}: window has no support")
    if m == 0:
        return coherent_amplitudes(alpha, cutoff)
    a2 = abs(alpha) ** 2
    log_norm = 0.5 * (gammaln(m + 1) + _log_laguerre_neg(m, a2))
    n = np.arange(cutoff + 1)
    q = np.zeros(cutoff + 1, dtype=complex)
    k = n[m:]
    j = k - m
    with np.errstate(divide="ignore", invalid="ignore"):
        log_mod = -0.5 * a2 + j * np.log(abs(alpha)) + 0.5 * gammaln(k + 1) - gammaln(j + 1) - log_norm
    if alpha == 0:
        log_mod = np.where(j == 0, 0.5 * gammaln(m + 1) - log_norm, -np.inf)
    q[m:] = np.exp(log_mod + 1j * j * np.angle(alpha))
    return _finish(q)


_CAT_PHASE = {"even": 0.0, "odd": math.pi, "yurke_stoler": math.pi / 2}


def cat_amplitudes(alpha: complex, kind: str, cutoff: int) -> FockAmplitudes:
    """Normalized ``|alpha> + e^{i phi}|-alpha>`` with phi = 0, pi or pi/2.

    ``kind`` is one of ``"even"``, ``"odd"``, ``"yurke_stoler"``.
    """
    if kind not in _CAT_PHASE:
        raise ValueError(f"unknown cat kind {kind!r}")
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    a2 = abs(alpha) ** 2
    if kind == "odd" and a2 == 0.0:
        raise ValueError("odd cat state is undefined at alpha = 0")
    n = np.arange(cutoff + 1)
    log_mod, phase = _coherent_log_weights(alpha, n)
    parity = np.where(n % 2 == 0, 1.0, -1.0)
    # |<alpha|-alpha>| = exp(-2|alpha|^2); expm1 keeps the odd norm accurate at small alpha
    if kind == "even":
        norm2 = 2.0 * (1.0 + math.exp(-2.0 * a2))
        weight = np.where(n % 2 == 0, 2.0, 0.0)
    elif kind == "odd":
        norm2 = -2.0 * math.expm1(-2.0 * a2)
        weight = np.where(n % 2 == 1, 2.0, 0.0)
    else:
        norm2 = 2.0
        weight = 1.0 + 1j * parity
    q = weight * np.exp(log_mod + 1j * phase) / math.sqrt(norm2)
    return _finish(q)


def squeezed_vacuum_amplitudes(xi: complex, cutoff: int) -> FockAmplitudes:
    """Squeezed vacuum ``S(xi)|0>`` with ``xi = r e^{i phi}``; odd amplitudes vanish."""
    if cutoff < 0:
        raise ValueError("cutoff must be >= 0")
    r = abs(xi)
    q = np.zeros(cutoff + 1, dtype=complex)
    if r == 0.0:
        q[0] = 1.0
        return _finish(q, 0.0)
    k = np.arange(cutoff // 2 + 1)
    log_cosh = r + math.log1p(math.exp(-2.0 * r)) - math.log(2.0)
    log_mod = (-0.5 * log_cosh + k * math.log(math.tanh(r))
               + 0.5 * gammaln(2 * k + 1) - k * math.log(2.0) - gammaln(k + 1))
    ph = np.exp(1j * k * (np.angle(xi) + math.pi))
    q[2 * k] = np.exp(log_mod) * ph
    return _finish(q)


def fock_amplitudes(n: int, cutoff: int) -> FockAmplitudes:
    if n < 0:
        raise ValueError("photon number must be >= 0")
    if cutoff < n:
        raise CutoffError(f"cutoff {cutoff} < Fock index {n}")
    q = np.zeros(cutoff + 1, dtype=complex)
    q[n] = 1.0
    return _finish(q, 0.0)


def amplitudes(spec: FieldSpec, cutoff: int) -> FockAmplitudes:
    """Dispatch ``spec`` to its constructor at the given cutoff."""
    kind = FieldKind(spec.kind)
    if kind is FieldKind.COHERENT:
        return coherent_amplitudes(spec.alpha, cutoff)
    if kind is FieldKind.PHOTON_ADDED:
        return pacs_amplitudes(spec.alpha, spec.added_photons, cutoff)
    if kind is FieldKind.EVEN_CAT:
        return cat_amplitudes(spec.alpha, "even", cutoff)
    if kind is FieldKind.ODD_CAT:
        return cat_amplitudes(spec.alpha, "odd", cutoff)
    if kind is FieldKind.YURKE_STOLER:
        return cat_amplitudes(spec.alpha, "yurke_stoler", cutoff)
    if kind is FieldKind.SQUEEZED_VACUUM:
        return squeezed_vacuum_amplitudes(spec.xi, cutoff)
    return fock_amplitudes(spec.fock_n, cutoff)


def _min_support(spec: FieldSpec) -> int:
    if spec.kind is FieldKind.PHOTON_ADDED:
        return spec.added_photons
    if spec.kind is FieldKind.FOCK:
        return spec.fock_n
    return 0


def choose_cutoff(spec: FieldSpec, epsilon: float = DEFAULT_EPSILON,
                  ceiling: int = DEFAULT_CEILING) -> int:
    """Smallest cutoff whose discarded probability mass is at most ``epsilon``."""
    if not 0.0 < epsilon < 1.0:
        raise ValueError("epsilon must lie in (0, 1)")
    spec = FieldSpec(FieldKind(spec.kind), spec.alpha, spec.added_photons, spec.xi, spec.fock_n)
    if _min_support(spec) > ceiling:
        raise CutoffError(f"support starts above the ceiling {ceiling}")
    full = amplitudes(spec, ceiling)
    # weights with the exact (untruncated) normalization
    p = full.probabilities * full.raw_norm
    beyond = full.tail_mass
    tails = beyond + np.concatenate([np.cumsum(p[::-1])[::-1][1:], [0.0]])
    ok = np.nonzero(tails <= epsilon)[0]
    ok = ok[ok >= _min_support(spec)]
    if len(ok) == 0:
        raise CutoffError(
            f"tail mass {tails[-1]:.3e} at ceiling {ceiling} exceeds epsilon {epsilon:.1e}")
    return int(ok[0])


def prepare(spec: FieldSpec, epsilon: float = DEFAULT_EPSILON,
            ceiling: int = DEFAULT_CEILING) -> FockAmplitudes:
    """Amplitudes of ``spec`` at the cutoff chosen for ``epsilon``."""
    return amplitudes(spec, choose_cutoff(spec, epsilon, ceiling))
