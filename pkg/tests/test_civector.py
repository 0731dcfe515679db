import numpy as np
import pytest
from scipy.linalg import expm

from vqchem import (
    CIVector,
    InvalidExcitation,
    InvalidParamMap,
    SizeLimit,
    UnsupportedOpenShell,
    ZeroState,
    apply_excitation,
    apply_hamiltonian,
    apply_ucc_factor,
    ci_space_dim,
    civector_to_statevector,
    energy,
    energy_and_gradient,
    fci_ground_state,
    hamiltonian_diagonal,
    hartree_fock_bitstring,
    hf_energy,
    hf_vector,
    load_civector,
    make_ci_space,
    make_rdm1,
    make_rdm2,
    save_civector,
    statevector_to_civector,
    ucc_state,
)
from vqchem.integrals import IntegralSet
from oracles import dense_ladder
from test_integrals import random_integral_set

PINNED_DIMS = {
    (2, 2): 4,
    (4, 2): 16,
    (4, 4): 36,
    (8, 4): 784,
    (8, 8): 4900,
    (16, 8): 3312400,
    (48, 4): 1272384,
}


def dense_generator(n_so, ex):
    """Fock-space matrix of G = g - g^dagger for an excitation tuple."""
    half = len(ex) // 2
    g = np.eye(1 << n_so)
    for p in ex[:half]:
        g = g @ dense_ladder(n_so, p, dagger=True)
    for q in ex[half:]:
        g = g @ dense_ladder(n_so, q, dagger=False)
    return g - g.conj().T


def embedding_matrix(space):
    cols = [
        civector_to_statevector(space, np.eye(space.dim)[j])
        for j in range(space.dim)
    ]
    return np.array(cols).T


def random_excitation(rng, n_orb):
    """Random spin-sector-conserving single or double excitation tuple."""
    n_so = 2 * n_orb
    while True:
        if rng.random() < 0.5:
            p, q = rng.choice(n_so, size=2, replace=True)
            ex = (int(p), int(q))
        else:
            p = rng.choice(n_so, size=2, replace=False)
            q = rng.choice(n_so, size=2, replace=False)
            ex = (int(p[0]), int(p[1]), int(q[0]), int(q[1]))
        half = len(ex) // 2
        ok = all(
            sum(1 for i in ex[:half] if (i >= n_orb) == sector)
            == sum(1 for i in ex[half:] if (i >= n_orb) == sector)
            for sector in (0, 1)
        )
        if ok:
            return ex


# ---------------------------------------------------------------------------
# Space construction
# ---------------------------------------------------------------------------

def test_space_dimensions_pinned():
    for (n_orb, n_elec), dim in PINNED_DIMS.items():
        assert ci_space_dim(n_orb, n_elec) == dim
        assert make_ci_space(n_orb, n_elec).dim == dim


def test_space_validation():
    with pytest.raises(UnsupportedOpenShell):
        make_ci_space(4, 3)
    with pytest.raises(UnsupportedOpenShell):
        make_ci_space(2, 6)


def test_hf_vector_is_first_determinant():
    space = make_ci_space(4, 4)
    v = hf_vector(space)
    assert v.amplitudes[0] == 1.0 and np.count_nonzero(v.amplitudes) == 1
    sv = civector_to_statevector(space, v)
    hf_index = int(hartree_fock_bitstring(4, 4), 2)
    assert sv[hf_index] == 1.0 and np.count_nonzero(sv) == 1


# ---------------------------------------------------------------------------
# Hamiltonian action
# ---------------------------------------------------------------------------

def test_hf_energy_two_routes(h2, h4):
    for s in (h2, h4):
        space = make_ci_space(s.n_orb, s.n_elec)
        assert abs(energy(space, hf_vector(space), s) - hf_energy(s)) < 1e-10
        assert abs(hamiltonian_diagonal(space, s)[0] - hf_energy(s)) < 1e-10


def test_hamiltonian_diagonal_matches_apply(h4):
    space = make_ci_space(4, 4)
    diag = hamiltonian_diagonal(space, h4)
    for j in range(space.dim):
        e_j = np.eye(space.dim)[j]
        hj = apply_hamiltonian(space, e_j, h4).amplitudes
        assert abs(diag[j] - hj[j]) < 1e-10


@pytest.mark.parametrize("case", ["h2", "random"])
def test_apply_hamiltonian_matches_fock_space_oracle(case, h2):
    from oracles import number_conserving_hamiltonian_matrix

    rng = np.random.default_rng(5)
    s = h2 if case == "h2" else random_integral_set(rng, 3, 2)
    space = make_ci_space(s.n_orb, s.n_elec)
    emb = embedding_matrix(space)
    h_projected = emb.conj().T @ number_conserving_hamiltonian_matrix(s) @ emb
    h_applied = np.array([
        apply_hamiltonian(space, np.eye(space.dim)[j], s).amplitudes
        for j in range(space.dim)
    ]).T
    np.testing.assert_allclose(h_applied, np.real(h_projected), atol=1e-10)


# ---------------------------------------------------------------------------
# Excitation generators and exponential factors
# ---------------------------------------------------------------------------

def test_apply_excitation_matches_dense_generator():
    rng = np.random.default_rng(23)
    space = make_ci_space(4, 4)
    emb = embedding_matrix(space)
    for _ in range(12):
        ex = random_excitation(rng, 4)
        v = rng.normal(size=space.dim)
        got = apply_excitation(space, v, ex).amplitudes
        want = emb.conj().T @ dense_generator(8, ex) @ (emb @ v)
        np.testing.assert_allclose(got, np.real(want), atol=1e-10)


def test_ucc_factor_matches_dense_expm():
    rng = np.random.default_rng(29)
    space = make_ci_space(4, 4)
    emb = embedding_matrix(space)
    for _ in range(8):
        ex = random_excitation(rng, 4)
        theta = float(rng.uniform(-2.0, 2.0))
        v = rng.normal(size=space.dim)
        v /= np.linalg.norm(v)
        got = apply_ucc_factor(space, v, ex, theta).amplitudes
        want = emb.conj().T @ expm(theta * dense_generator(8, ex)) @ (emb @ v)
        np.testing.assert_allclose(got, np.real(want), atol=1e-10)


def test_generator_cubed_is_minus_generator():
    rng = np.random.default_rng(31)
    space = make_ci_space(4, 4)
    for _ in range(12):
        ex = random_excitation(rng, 4)
        v = rng.normal(size=space.dim)
        g1 = apply_excitation(space, v, ex).amplitudes
        g3 = apply_excitation(
            space, apply_excitation(space, g1, ex), ex).amplitudes
        np.testing.assert_allclose(g3, -g1, atol=1e-10)


def test_ucc_factor_is_invertible():
    rng = np.random.default_rng(37)
    space = make_ci_space(4, 4)
    v = rng.normal(size=space.dim)
    ex = (2, 6, 0, 4)
    w = apply_ucc_factor(space, v, ex, 0.7)
    back = apply_ucc_factor(space, w, ex, -0.7).amplitudes
    np.testing.assert_allclose(back, v, atol=1e-12)


def test_excitation_validation():
    space = make_ci_space(2, 2)
    with pytest.raises(InvalidExcitation):
        apply_excitation(space, hf_vector(space), (0,))
    with pytest.raises(InvalidExcitation):
        apply_excitation(space, hf_vector(space), (0, 4))
    with pytest.raises(InvalidExcitation):
        apply_excitation(space, hf_vector(space), (0, 2))  # beta -> alpha
    with pytest.raises(InvalidExcitation):
        apply_excitation(space, hf_vector(space), (1, 1, 0, 2))


# ---------------------------------------------------------------------------
# Product states, energies, gradients
# ---------------------------------------------------------------------------

def test_param_map_validation():
    space = make_ci_space(2, 2)
    with pytest.raises(InvalidParamMap):
        ucc_state(space, [(1, 0)], [0.1], [0, 1])
    with pytest.raises(InvalidParamMap):
        ucc_state(space, [(1, 0)], [0.1], [3])


def test_ucc_state_applies_first_entry_first():
    space = make_ci_space(4, 4)
    ex1, ex2 = (2, 0), (3, 7, 0, 4)
    v = ucc_state(space, [ex1, ex2], [0.3, -0.5], [0, 1])
    step = apply_ucc_factor(space, hf_vector(space), ex1, 0.3)
    step = apply_ucc_factor(space, step, ex2, -0.5)
    np.testing.assert_allclose(v.amplitudes, step.amplitudes, atol=1e-12)
    assert abs(v.norm() - 1.0) < 1e-12


def finite_difference_gradient(space, ex_ops, params, param_ids, s, h=1e-5):
    grad = np.zeros(len(params))
    for k in range(len(params)):
        shift = np.zeros(len(params))
        shift[k] = h
        e_plus = energy(space, ucc_state(space, ex_ops, params + shift,
                                         param_ids), s)
        e_minus = energy(space, ucc_state(space, ex_ops, params - shift,
                                          param_ids), s)
        grad[k] = (e_plus - e_minus) / (2 * h)
    return grad


def test_energy_and_gradient_matches_finite_difference(h4):
    space = make_ci_space(4, 4)
    ex_ops = [(2, 0), (6, 4), (3, 1), (2, 6, 0, 4), (3, 6, 1, 4),
              (2, 7, 0, 5), (3, 7, 0, 4)]
    param_ids = [0, 0, 1, 2, 3, 4, 5]  # first two share one parameter
    rng = np.random.default_rng(41)
    for _ in range(4):
        params = rng.uniform(-0.4, 0.4, size=6)
        e, grad = energy_and_gradient(space, ex_ops, params, param_ids, h4)
        e_direct = energy(space, ucc_state(space, ex_ops, params, param_ids),
                          h4)
        assert abs(e - e_direct) < 1e-12
        fd = finite_difference_gradient(space, ex_ops, params, param_ids, h4)
        np.testing.assert_allclose(grad, fd, rtol=1e-6, atol=1e-8)


def test_shared_parameter_gradient_is_sum_of_parts(h4):
    space = make_ci_space(4, 4)
    ex_ops = [(2, 6, 0, 4), (3, 7, 1, 5)]
    theta = 0.17
    _, shared = energy_and_gradient(space, ex_ops, [theta], [0, 0], h4)
    _, split = energy_and_gradient(space, ex_ops, [theta, theta], [0, 1], h4)
    assert abs(shared[0] - split.sum()) < 1e-12


# ---------------------------------------------------------------------------
# Reduced density matrices
# ---------------------------------------------------------------------------

def energy_from_rdms(s, rdm1, rdm2):
    return (np.einsum("pq,pq->", s.int1e, rdm1)
            + 0.5 * np.einsum("pqrs,pqrs->", s.int2e, rdm2)
            + s.e_core)


@pytest.mark.parametrize("which", ["fci_h2", "fci_h4", "ucc_h4"])
def test_rdm_energy_reconstruction(which, h2, h4):
    if which == "fci_h2":
        s = h2
        space = make_ci_space(2, 2)
        _, v = fci_ground_state(space, s)
    elif which == "fci_h4":
        s = h4
        space = make_ci_space(4, 4)
        _, v = fci_ground_state(space, s)
    else:
        s = h4
        space = make_ci_space(4, 4)
        v = ucc_state(space, [(2, 6, 0, 4), (3, 7, 1, 5), (2, 0)],
                      [0.1, -0.2, 0.05], [0, 1, 2])
    rdm1 = make_rdm1(space, v)
    rdm2 = make_rdm2(space, v)
    assert abs(energy_from_rdms(s, rdm1, rdm2) - energy(space, v, s)) < 1e-10
    assert abs(np.trace(rdm1) - s.n_elec) < 1e-10
    np.testing.assert_allclose(rdm1, rdm1.T, atol=1e-12)
    # chemist-order pair-exchange symmetry and partial trace
    np.testing.assert_allclose(rdm2, rdm2.transpose(2, 3, 0, 1), atol=1e-12)
    np.testing.assert_allclose(
        np.einsum("pqrr->pq", rdm2), (s.n_elec - 1) * rdm1, atol=1e-10)


# ---------------------------------------------------------------------------
# Ground-state solver
# ---------------------------------------------------------------------------

def test_fci_h2_pinned(h2):
    space = make_ci_space(2, 2)
    e, v = fci_ground_state(space, h2)
    assert abs(e - (-1.1372744055294606)) < 1e-9
    amps = v.amplitudes * np.sign(v.amplitudes[0])
    np.testing.assert_allclose(
        amps, [0.99362381, 0.0, 0.0, -0.11274632], atol=1e-6)


def test_fci_iterative_matches_dense_diagonalization():
    rng = np.random.default_rng(43)
    s = random_integral_set(rng, 7, 4)
    space = make_ci_space(7, 4)
    assert space.dim == 441  # above the dense-direct cutoff
    e, v = fci_ground_state(space, s)
    h_dense = np.array([
        apply_hamiltonian(space, np.eye(space.dim)[j], s).amplitudes
        for j in range(space.dim)
    ]).T
    vals, vecs = np.linalg.eigh(h_dense)
    assert abs(e - vals[0]) < 1e-8
    assert abs(abs(np.dot(v.amplitudes, vecs[:, 0])) - 1.0) < 1e-8


def test_fci_size_limit():
    space = make_ci_space(16, 8)
    s = IntegralSet(16, 8, np.zeros((16, 16)), np.zeros((16,) * 4), 0.0)
    with pytest.raises(SizeLimit):
        fci_ground_state(space, s)


def test_energy_rejects_zero_vector(h2):
    space = make_ci_space(2, 2)
    with pytest.raises(ZeroState):
        energy(space, np.zeros(space.dim), h2)


# ---------------------------------------------------------------------------
# Statevector embedding and serialization
# ---------------------------------------------------------------------------

def test_statevector_round_trip():
    rng = np.random.default_rng(47)
    space = make_ci_space(3, 2)
    v = CIVector(space, rng.normal(size=space.dim))
    back = statevector_to_civector(space, civector_to_statevector(space, v))
    np.testing.assert_allclose(back.amplitudes, v.amplitudes, atol=1e-14)


def test_statevector_size_limit():
    space = make_ci_space(13, 2)
    with pytest.raises(SizeLimit):
        civector_to_statevector(space, hf_vector(space))


def test_save_load_round_trip(tmp_path):
    rng = np.random.default_rng(53)
    space = make_ci_space(4, 4)
    v = CIVector(space, rng.normal(size=space.dim))
    path = tmp_path / "state.civec"
    save_civector(path, v)
    w = load_civector(path)
    assert (w.space.n_orb, w.space.n_elec) == (4, 4)
    np.testing.assert_allclose(w.amplitudes, v.amplitudes, atol=0)
    with pytest.raises(ValueError):
        load_civector(path, make_ci_space(4, 2))
