import math

import numpy as np
import pytest
from scipy.sparse.csgraph import connected_components

from tripartite.blocks import ModelParams, evolve
from tripartite.fock import coherent_amplitudes
from tripartite.oracle import (GlobalState, NumericPropagator, basis_index,
                               build_interaction_hamiltonian, closed_form_fidelity, evolve_numeric,
                               fidelity, flat_index, partial_trace, product_state,
                               randomized_validation, schmidt_entropy)
from tripartite.observables import rho_atom, svne

from .helpers import random_params


def test_flat_index_bijection():
    c1, c2 = 4, 3
    seen = set()
    for a in (1, 2, 3):
        for n1 in range(c1 + 1):
            for n2 in range(c2 + 1):
                k = flat_index(a, n1, n2, c1, c2)
                b = basis_index(k, c1, c2)
                assert (b.atom, b.n1, b.n2) == (a, n1, n2)
                seen.add(k)
    assert seen == set(range(3 * (c1 + 1) * (c2 + 1)))
    with pytest.raises(IndexError):
        flat_index(4, 0, 0, c1, c2)


def test_zero_hamiltonian():
    H = build_interaction_hamiltonian(ModelParams(lambda1=0, lambda2=0), 5, 5)
    assert H.nnz == 0


def test_single_block_matrix():
    H = build_interaction_hamiltonian(ModelParams(lambda1=0.8), 1, 0).toarray()
    i1 = flat_index(1, 1, 0, 1, 0)
    i3 = flat_index(3, 0, 0, 1, 0)
    expected = np.zeros_like(H)
    expected[i1, i3] = expected[i3, i1] = 0.8
    assert np.array_equal(H, expected)


def test_hermitian_and_block_structure():
    rng = np.random.default_rng(0)
    for _ in range(5):
        p = random_params(rng, vacuum_emission=bool(rng.integers(2)))
        c1, c2 = 7, 6
        H = build_interaction_hamiltonian(p, c1, c2)
        assert abs(H - H.T.conj()).max() == 0
        # every nonzero connects states with equal N1 + sigma22 + sigma33 and N2 + sigma11 + sigma33
        rows, cols = H.nonzero()
        for i, j in zip(rows, cols):
            a, b = basis_index(i, c1, c2), basis_index(j, c1, c2)
            def labels(x):
                return (x.n1 + (x.atom != 1), x.n2 - (x.atom == 2))
            assert labels(a) == labels(b)
        sizes = np.bincount(connected_components(abs(H) > 0, directed=False)[1])
        assert sizes.max() <= 3


def test_evolution_identity_and_norm():
    q, r = coherent_amplitudes(2.0, 12), coherent_amplitudes(1.5j, 10)
    s0 = product_state(q, r)
    p = ModelParams(chi1=3.0, chi2=1.0, delta1=0.5, coupling="sqrt_n")
    prop = NumericPropagator(p, s0.cutoff1, s0.cutoff2)
    assert fidelity(prop.evolve(s0, 0.0), s0) == pytest.approx(1.0, abs=1e-14)
    for t in (1.0, 50.0, 200.0):
        assert prop.evolve(s0, t).norm() == pytest.approx(1.0, abs=1e-12)


def test_headline_cross_validation():
    q, r = coherent_amplitudes(math.sqrt(10), 20), coherent_amplitudes(math.sqrt(10), 20)
    assert closed_form_fidelity(evolve(q, r, ModelParams(), 10.0)) >= 1 - 1e-8
    q, r = coherent_amplitudes(math.sqrt(10), 60), coherent_amplitudes(math.sqrt(18), 60)
    assert closed_form_fidelity(evolve(q, r, ModelParams(), 5.0)) >= 1 - 1e-8


def test_vacuum_emission_variant_agrees():
    q, r = coherent_amplitudes(1.5, 10), coherent_amplitudes(0.8, 10)
    p = ModelParams(chi1=1.0, chi2=0.5, delta2=0.3, vacuum_emission=True)
    assert closed_form_fidelity(evolve(q, r, p, 6.0)) >= 1 - 1e-8


def test_partial_trace_product_and_bell():
    q, r = coherent_amplitudes(1.0, 6), coherent_amplitudes(0.5, 6)
    s = product_state(q, r)
    for keep in ("atom", "field1", "field2"):
        assert partial_trace(s, keep).purity() == pytest.approx(1.0, abs=1e-12)
    psi = np.zeros((3, 2, 1), complex)
    psi[0, 1, 0] = psi[2, 0, 0] = 1 / math.sqrt(2)
    bell = GlobalState(psi.ravel(), 1, 0)
    assert svne(partial_trace(bell, "atom")) == pytest.approx(math.log(2), abs=1e-14)
    assert schmidt_entropy(bell) == pytest.approx(math.log(2), abs=1e-14)


def test_partial_trace_matches_closed_form_atom():
    q, r = coherent_amplitudes(2.0, 15), coherent_amplitudes(1.0 + 1j, 12)
    ten = evolve(q, r, ModelParams(chi1=0.5, chi2=1.5, delta1=-1.0), 3.0)
    g = evolve_numeric(product_state(q, r, q.cutoff, r.cutoff + 1), ten.params, 3.0)
    assert np.abs(partial_trace(g, "atom").matrix - rho_atom(ten).matrix).max() < 1e-8


def test_fidelity_edges():
    a = GlobalState(np.eye(3 * 2 * 2)[0], 1, 1)
    b = GlobalState(np.eye(3 * 2 * 2)[1], 1, 1)
    assert fidelity(a, a) == 1.0 and fidelity(a, b) == 0.0
    with pytest.raises(ValueError):
        fidelity(a, GlobalState(np.eye(3 * 3 * 2)[0], 2, 1))
    with pytest.raises(ValueError):
        GlobalState(np.ones(5), 1, 1)


def test_randomized_validation_small():
    cases = randomized_validation(seed=7, cases=10, max_cutoff=8, max_time=20.0)
    assert min(c.fidelity for c in cases) >= 1 - 1e-8
