"""Reduced density matrices and derived observables of the evolved state.

All routines act on the three amplitude arrays returned by
:meth:`AmplitudeTensor.components`: ``G1[n, m]`` on ``|1; n; m>``,
``G2[n, m]`` on ``|2; n-1; m+1>`` and ``G3[n, m]`` on ``|3; n-1; m>``.
Leading axes (e.g. a time axis) are carried through unchanged.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .blocks import AmplitudeTensor

ENTROPY_FLOOR = 1e-14
TRACE_TOL = 1e-8


class Subsystem(str, enum.Enum):
    ATOM = "atom"
    FIELD1 = "field1"
    FIELD2 = "field2"


@dataclass(frozen=True)
class ReducedDensity:
    matrix: np.ndarray
    subsystem: Subsystem

    @property
    def dim(self) -> int:
        return self.matrix.shape[-1]

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def purity(self) -> float:
        return float(np.real(np.trace(self.matrix @ self.matrix)))

    def eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.matrix)


@dataclass(frozen=True)
class ObservableRecord:
    t: float
    mean_n1: float
    var_n1: float
    mandel_q1: float
    mean_n2: float
    pop1: float
    pop2: float
    pop3: float
    svne: float


RECORD_COLUMNS = ("t", "mean_n1", "var_n1", "mandel_q1", "mean_n2", "pop1", "pop2", "pop3", "svne")


def _sum2(x):
    return x.sum(axis=(-2, -1))


def atom_matrix(G1, G2, G3) -> np.ndarray:
    """3x3 atomic density matrix (batched over leading axes)."""
    shape = G1.shape[:-2]
    rho = np.zeros(shape + (3, 3), dtype=complex)
    rho[..., 0, 0] = _sum2(np.abs(G1) ** 2)
    rho[..., 1, 1] = _sum2(np.abs(G2) ** 2)
    rho[..., 2, 2] = _sum2(np.abs(G3) ** 2)
    rho[..., 0, 1] = _sum2(G1[..., :-1, 1:] * np.conj(G2[..., 1:, :-1]))
    rho[..., 0, 2] = _sum2(G1[..., :-1, :] * np.conj(G3[..., 1:, :]))
    rho[..., 1, 2] = _sum2(G2[..., 1:, :-1] * np.conj(G3[..., 1:, 1:]))
    for i, j in ((0, 1), (0, 2), (1, 2)):
        rho[..., j, i] = np.conj(rho[..., i, j])
    return rho


def rho_atom(tensor: AmplitudeTensor) -> ReducedDensity:
    return ReducedDensity(atom_matrix(*tensor.components()), Subsystem.ATOM)


def rho_field1(tensor: AmplitudeTensor) -> ReducedDensity:
    """Probe-mode density matrix, dimension cutoff1 + 1."""
    G1, G2, G3 = tensor.components()
    pad = np.zeros((1, G1.shape[1]), dtype=complex)
    P3 = np.vstack([G3[1:], pad])
    P2 = np.vstack([G2[1:], pad])
    rho = G1 @ G1.conj().T + P3 @ P3.conj().T + P2 @ P2.conj().T
    return ReducedDensity(rho, Subsystem.FIELD1)


def rho_field2(tensor: AmplitudeTensor) -> ReducedDensity:
    """Coupling-mode density matrix, dimension cutoff2 + 2.

    The extra level holds ``|m + 1>`` reached from the top row of the lattice.
    """
    G1, G2, G3 = tensor.components()
    col = np.zeros((G1.shape[0], 1), dtype=complex)
    Q1 = np.hstack([G1, col])
    Q3 = np.hstack([G3, col])[1:]
    Q2 = np.hstack([col, G2])[1:]
    rho = sum(Q.T @ Q.conj() for Q in (Q1, Q2, Q3))
    return ReducedDensity(rho, Subsystem.FIELD2)


def _level_weights(G1, G2, G3):
    return np.abs(G1) ** 2, np.abs(G2) ** 2, np.abs(G3) ** 2


def photon_moments(G1, G2, G3, mode: int):
    """(<N>, <N^2>) of one mode from the diagonal weights, without forming rho."""
    p1, p2, p3 = _level_weights(G1, G2, G3)
    n = np.arange(G1.shape[-2])[:, None].astype(float)
    m = np.arange(G1.shape[-1])[None, :].astype(float)
    if mode == 1:
        k1, k2, k3 = n, n - 1, n - 1
    elif mode == 2:
        k1, k2, k3 = m, m + 1, m
    else:
        raise ValueError("mode must be 1 or 2")
    mean = _sum2(k1 * p1 + k2 * p2 + k3 * p3)
    second = _sum2(k1 ** 2 * p1 + k2 ** 2 * p2 + k3 ** 2 * p3)
    return mean, second


def mean_photon(tensor: AmplitudeTensor, mode: int) -> float:
    return float(photon_moments(*tensor.components(), mode)[0])


def photon_variance(tensor: AmplitudeTensor, mode: int) -> float:
    mean, second = photon_moments(*tensor.components(), mode)
    return float(second - mean ** 2)


def mandel_from_moments(mean, second):
    mean = np.asarray(mean, dtype=float)
    if np.any(mean <= 0):
        raise ValueError("Mandel Q is undefined for a mode with <N> = 0")
    return (second - mean ** 2) / mean - 1.0


def mandel_q(tensor: AmplitudeTensor, mode: int) -> float:
    return float(mandel_from_moments(*photon_moments(*tensor.components(), mode)))


def populations(tensor: AmplitudeTensor) -> np.ndarray:
    return np.array([float(_sum2(p)) for p in _level_weights(*tensor.components())])


def entropy_of(matrices) -> np.ndarray:
    """-Tr rho ln rho for a stack of Hermitian matrices; tiny eigenvalues count as 0."""
    ev = np.clip(np.linalg.eigvalsh(matrices), 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(ev > ENTROPY_FLOOR, -ev * np.log(ev), 0.0)
    return terms.sum(axis=-1)


def svne(rho: ReducedDensity | np.ndarray) -> float:
    """Von Neumann entropy (natural log) of a unit-trace density matrix."""
    mat = rho.matrix if isinstance(rho, ReducedDensity) else np.asarray(rho)
    tr = np.real(np.trace(mat))
    if abs(tr - 1.0) > TRACE_TOL:
        raise ValueError(f"density matrix trace {tr!r} deviates from 1: corrupted state")
    return float(entropy_of(mat))


def records(G1, G2, G3, times) -> list[ObservableRecord]:
    """One :class:`ObservableRecord` per leading index of the component stacks."""
    mean1, second1 = photon_moments(G1, G2, G3, 1)
    mean2, _ = photon_moments(G1, G2, G3, 2)
    var1 = second1 - mean1 ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        q1 = np.where(mean1 > 0, var1 / np.where(mean1 > 0, mean1, 1.0) - 1.0, np.nan)
    rho = atom_matrix(G1, G2, G3)
    pops = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    ent = entropy_of(rho)
    return [
        ObservableRecord(float(t), float(mean1[i]), float(var1[i]), float(q1[i]), float(mean2[i]),
                         float(pops[i, 0]), float(pops[i, 1]), float(pops[i, 2]), float(ent[i]))
        for i, t in enumerate(times)
    ]


def observe(tensor: AmplitudeTensor) -> ObservableRecord:
    G = [g[None] for g in tensor.components()]
    return records(*G, [tensor.t])[0]
