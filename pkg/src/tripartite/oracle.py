"""Brute-force propagator over the truncated product basis.

The interaction Hamiltonian is assembled from ladder operators by Kronecker
products (atom x field1 x field2), its invariant subspaces are found as
connected components of the sparsity graph, and every component is
diagonalized densely.  Nothing here depends on the closed-form solution in
:mod:`tripartite.blocks` beyond the parameter container.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.csgraph import connected_components

from .blocks import AmplitudeTensor, CouplingForm, ModelParams
from .fock import DEFAULT_CEILING, FockAmplitudes
from .observables import ReducedDensity, Subsystem, entropy_of


@dataclass(frozen=True)
class BasisIndex:
    atom: int
    n1: int
    n2: int
    flat: int


def flat_index(atom: int, n1: int, n2: int, cutoff1: int, cutoff2: int) -> int:
    if atom not in (1, 2, 3) or not 0 <= n1 <= cutoff1 or not 0 <= n2 <= cutoff2:
        raise IndexError("basis label out of range")
    return ((atom - 1) * (cutoff1 + 1) + n1) * (cutoff2 + 1) + n2


def basis_index(flat: int, cutoff1: int, cutoff2: int) -> BasisIndex:
    d1, d2 = cutoff1 + 1, cutoff2 + 1
    if not 0 <= flat < 3 * d1 * d2:
        raise IndexError("flat index out of range")
    a, rest = divmod(flat, d1 * d2)
    n1, n2 = divmod(rest, d2)
    return BasisIndex(a + 1, n1, n2, flat)


@dataclass(frozen=True)
class GlobalState:
    amplitudes: np.ndarray
    cutoff1: int
    cutoff2: int
    t: float = 0.0

    def __post_init__(self):
        amp = np.array(self.amplitudes, dtype=complex).ravel()
        if amp.size != 3 * (self.cutoff1 + 1) * (self.cutoff2 + 1):
            raise ValueError("amplitude vector does not match the cutoffs")
        amp.setflags(write=False)
        object.__setattr__(self, "amplitudes", amp)

    @property
    def dim(self) -> int:
        return self.amplitudes.size

    def as_array(self) -> np.ndarray:
        """Amplitudes reshaped to [atom - 1, n1, n2]."""
        return self.amplitudes.reshape(3, self.cutoff1 + 1, self.cutoff2 + 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def product_state(q: FockAmplitudes, r: FockAmplitudes, cutoff1: int | None = None,
                  cutoff2: int | None = None) -> GlobalState:
    """|1> (x) sum q_n |n> (x) sum r_m |m>, zero-padded to the requested cutoffs."""
    c1 = q.cutoff if cutoff1 is None else cutoff1
    c2 = r.cutoff if cutoff2 is None else cutoff2
    if c1 < q.cutoff or c2 < r.cutoff:
        raise ValueError("oracle cutoffs must cover the field amplitudes")
    psi = np.zeros((3, c1 + 1, c2 + 1), dtype=complex)
    psi[0, : q.cutoff + 1, : r.cutoff + 1] = np.outer(q.coeffs, r.coeffs)
    return GlobalState(psi.ravel(), c1, c2)


def from_tensor(tensor: AmplitudeTensor) -> GlobalState:
    """Flatten a closed-form state; the coupling mode needs one extra level."""
    G1, G2, G3 = tensor.components()
    c1, c2 = tensor.q.cutoff, tensor.r.cutoff + 1
    psi = np.zeros((3, c1 + 1, c2 + 1), dtype=complex)
    psi[0, :, :-1] = G1
    psi[1, :-1, 1:] = G2[1:]
    psi[2, :-1, :-1] = G3[1:]
    return GlobalState(psi.ravel(), c1, c2, tensor.t)


def _annihilation(dim: int) -> sparse.csr_matrix:
    return sparse.diags(np.sqrt(np.arange(1, dim)), 1, shape=(dim, dim), format="csr")


def _deformation(dim: int, params: ModelParams, kappa: float) -> np.ndarray:
    n = np.arange(dim, dtype=float)
    if params.coupling is CouplingForm.CONSTANT:
        return np.ones(dim)
    if params.coupling is CouplingForm.SQRT_N:
        return np.sqrt(n)
    return np.sqrt(1.0 + kappa * n)


def _sigma(i: int, j: int) -> sparse.csr_matrix:
    s = sparse.lil_matrix((3, 3))
    s[i - 1, j - 1] = 1.0
    return s.tocsr()


def build_interaction_hamiltonian(params: ModelParams, cutoff1: int, cutoff2: int) -> sparse.csr_matrix:
    """Interaction Hamiltonian on atom (x) field1 (x) field2, truncated at the cutoffs.

    Unless ``params.vacuum_emission`` is set, the matrix element of R_2
    between the one-photon and vacuum states of the coupling mode is removed,
    matching the closed-form model.
    """
    if min(cutoff1, cutoff2) < 0:
        raise ValueError("cutoffs must be >= 0")
    d1, d2 = cutoff1 + 1, cutoff2 + 1
    I1, I2, Ia = sparse.identity(d1), sparse.identity(d2), sparse.identity(3)

    a1 = _annihilation(d1)
    a2 = _annihilation(d2)
    R1 = a1 @ sparse.diags(_deformation(d1, params, params.kappa1))
    R2 = (a2 @ sparse.diags(_deformation(d2, params, params.kappa2))).tolil()
    if not params.vacuum_emission and d2 > 1:
        R2[0, 1] = 0.0
    R2 = R2.tocsr()

    kerr1 = (a1.T @ a1.T @ a1 @ a1)
    kerr2 = (a2.T @ a2.T @ a2 @ a2)

    def full(atom_op, f1_op, f2_op):
        return sparse.kron(sparse.kron(atom_op, f1_op), f2_op, format="csr")

    H = (params.chi1 * full(Ia, kerr1, I2) + params.chi2 * full(Ia, I1, kerr2)
         - params.delta1 * full(_sigma(1, 1), I1, I2)
         - params.delta2 * full(_sigma(2, 2), I1, I2))
    H = H + params.lambda1 * (full(_sigma(3, 1), R1, I2) + full(_sigma(1, 3), R1.T, I2))
    H = H + params.lambda2 * (full(_sigma(3, 2), I1, R2) + full(_sigma(2, 3), I1, R2.T))
    H = sparse.csr_matrix(H)
    H.eliminate_zeros()
    return H


class NumericPropagator:
    """Exact propagator built from the invariant subspaces of the Hamiltonian."""

    def __init__(self, params: ModelParams, cutoff1: int, cutoff2: int):
        if max(cutoff1, cutoff2) > DEFAULT_CEILING:
            raise ValueError(f"oracle cutoffs above {DEFAULT_CEILING} are not supported")
        self.params, self.cutoff1, self.cutoff2 = params, cutoff1, cutoff2
        self.hamiltonian = build_interaction_hamiltonian(params, cutoff1, cutoff2)
        pattern = abs(self.hamiltonian) > 0
        n_comp, labels = connected_components(pattern, directed=False)
        dense = self.hamiltonian.toarray()
        order = np.argsort(labels, kind="stable")
        sizes = np.bincount(labels, minlength=n_comp)
        starts = np.concatenate([[0], np.cumsum(sizes)])
        self.groups = []
        for size in np.unique(sizes):
            comps = np.flatnonzero(sizes == size)
            idx = np.stack([order[starts[c]:starts[c] + size] for c in comps])
            sub = dense[idx[:, :, None], idx[:, None, :]]
            energies, vecs = np.linalg.eigh(sub)
            self.groups.append((idx, energies, vecs))
        self.component_sizes = sizes

    def evolve(self, state: GlobalState, t: float) -> GlobalState:
        if (state.cutoff1, state.cutoff2) != (self.cutoff1, self.cutoff2):
            raise ValueError("state and propagator cutoffs differ")
        psi0 = state.amplitudes
        out = np.zeros_like(psi0)
        for idx, energies, vecs in self.groups:
            c = np.einsum("kij,ki->kj", vecs.conj(), psi0[idx])
            out[idx] = np.einsum("kij,kj->ki", vecs, np.exp(-1j * energies * t) * c)
        return GlobalState(out, self.cutoff1, self.cutoff2, state.t + t)


def evolve_numeric(state0: GlobalState, params: ModelParams, t: float) -> GlobalState:
    return NumericPropagator(params, state0.cutoff1, state0.cutoff2).evolve(state0, t)


def partial_trace(state: GlobalState, keep: Subsystem | str) -> ReducedDensity:
    keep = Subsystem(keep)
    psi = state.as_array()
    if keep is Subsystem.ATOM:
        rho = np.einsum("anm,bnm->ab", psi, psi.conj())
    elif keep is Subsystem.FIELD1:
        rho = np.einsum("anm,akm->nk", psi, psi.conj())
    else:
        rho = np.einsum("anm,anl->ml", psi, psi.conj())
    return ReducedDensity(rho, keep)


def schmidt_entropy(state: GlobalState) -> float:
    """Entanglement entropy of atom versus both fields from the Schmidt spectrum."""
    s = np.linalg.svd(state.amplitudes.reshape(3, -1), compute_uv=False)
    return float(entropy_of(np.diag(s ** 2)))


def fidelity(a: GlobalState, b: GlobalState) -> float:
    if a.dim != b.dim or (a.cutoff1, a.cutoff2) != (b.cutoff1, b.cutoff2):
        raise ValueError("states live in different truncated spaces")
    return float(min(1.0, abs(np.vdot(a.amplitudes, b.amplitudes)) ** 2))


def closed_form_fidelity(tensor: AmplitudeTensor) -> float:
    """|<closed form | oracle>|^2 for a closed-form state at time tensor.t."""
    closed = from_tensor(tensor)
    start = product_state(tensor.q, tensor.r, closed.cutoff1, closed.cutoff2)
    numeric = evolve_numeric(start, tensor.params, tensor.t)
    return fidelity(closed, numeric)


@dataclass(frozen=True)
class ValidationCase:
    params: ModelParams
    cutoff1: int
    cutoff2: int
    t: float
    fidelity: float


def random_case_inputs(rng: np.random.Generator, max_cutoff: int = 20, max_time: float = 20.0):
    """One random (q, r, params, t) draw over the validation domain."""
    forms = list(CouplingForm)
    kappa = rng.uniform(0.0, 1.0, 2)
    params = ModelParams(
        delta1=rng.uniform(-5, 5), delta2=rng.uniform(-5, 5),
        chi1=rng.uniform(0, 10), chi2=rng.uniform(0, 10),
        coupling=forms[rng.integers(len(forms))], kappa1=kappa[0], kappa2=kappa[1],
    )
    c1, c2 = (int(c) for c in rng.integers(1, max_cutoff + 1, 2))
    # generic normalized superpositions exercise every block and relative phase
    amps = []
    for c in (c1, c2):
        v = rng.normal(size=c + 1) + 1j * rng.normal(size=c + 1)
        amps.append(FockAmplitudes(v / np.linalg.norm(v)))
    return amps[0], amps[1], params, float(rng.uniform(0, max_time))


def randomized_validation(seed: int = 42, cases: int = 100, max_cutoff: int = 20,
                          max_time: float = 20.0) -> list[ValidationCase]:
    from .blocks import evolve

    rng = np.random.default_rng(seed)
    out = []
    for _ in range(cases):
        q, r, params, t = random_case_inputs(rng, max_cutoff, max_time)
        f = closed_form_fidelity(evolve(q, r, params, t))
        out.append(ValidationCase(params, q.cutoff, r.cutoff, t, f))
    return out
