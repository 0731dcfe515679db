import numpy as np
import pytest

from vqchem import (
    InvalidExcitation,
    InvalidParamMap,
    ParseError,
    UCCProblem,
    adapt_vqe,
    build_operator_pool,
    build_puccd_hamiltonian,
    energy,
    fci_ground_state,
    hf_energy,
    load_ansatz,
    make_ci_space,
    make_kupccgsd_problem,
    make_paired_space,
    make_puccd_problem,
    make_uccsd_problem,
    paired_energy_and_gradient,
    paired_hamiltonian_matrix,
    problem_civector,
    problem_energy_and_gradient,
    problem_statevector,
    save_ansatz,
    ucc_state,
)

H4_DOCI_GROUND = -2.1487401214614756


# ---------------------------------------------------------------------------
# Excitation enumeration and MP2 start
# ---------------------------------------------------------------------------

def test_uccsd_h2_enumeration(h2):
    p = make_uccsd_problem(h2)
    assert p.ex_ops == [(3, 2), (1, 0), (1, 3, 2, 0)]
    assert p.param_ids == [0, 0, 1]
    assert p.init_guess[0] == 0.0
    assert abs(p.init_guess[1] - (-0.072608)) < 1e-4


def test_uccsd_counts(h4, h6):
    raw = make_uccsd_problem(h4, screen_eps=0.0, sort=False)
    assert (len(raw.ex_ops), raw.n_params) == (26, 15)
    screened = make_uccsd_problem(h4)
    assert (len(screened.ex_ops), screened.n_params) == (18, 11)
    screened6 = make_uccsd_problem(h6)
    assert (len(screened6.ex_ops), screened6.n_params) == (69, 39)


def test_uccsd_structure(h4):
    p = make_uccsd_problem(h4)
    sizes = [len(ex) for ex in p.ex_ops]
    first_double = sizes.index(4)
    assert all(k == 2 for k in sizes[:first_double])
    assert all(k == 4 for k in sizes[first_double:])
    # singles are unamplified, doubles sorted by descending magnitude
    singles_pids = {pid for ex, pid in zip(p.ex_ops, p.param_ids)
                    if len(ex) == 2}
    assert all(p.init_guess[pid] == 0.0 for pid in singles_pids)
    doubles_pids = [pid for ex, pid in zip(p.ex_ops, p.param_ids)
                    if len(ex) == 4]
    mags = [abs(p.init_guess[pid]) for pid in dict.fromkeys(doubles_pids)]
    assert mags == sorted(mags, reverse=True)
    assert all(m >= 1e-8 for m in mags)


def test_screening_preserves_optimum(h4):
    space = make_ci_space(4, 4)
    full = make_uccsd_problem(h4, screen_eps=0.0)
    cut = make_uccsd_problem(h4)
    from vqchem.vqe import kernel
    e_full = kernel(full).e
    e_cut = kernel(cut).e
    assert abs(e_full - e_cut) < 1e-6


def test_kupccgsd_problem(h4):
    p = make_kupccgsd_problem(h4, k=2, seed=3)
    assert (len(p.ex_ops), p.n_params) == (36, 24)
    assert np.max(np.abs(p.init_guess)) <= 1e-2
    q = make_kupccgsd_problem(h4, k=2, seed=3)
    np.testing.assert_array_equal(p.init_guess, q.init_guess)
    r = make_kupccgsd_problem(h4, k=2, seed=4)
    assert not np.array_equal(p.init_guess, r.init_guess)
    with pytest.raises(ValueError):
        make_kupccgsd_problem(h4, k=0)


def test_puccd_problem(h4):
    p = make_puccd_problem(h4)
    assert p.hard_core_boson and p.n_qubits == 4
    assert (len(p.ex_ops), p.n_params) == (4, 4)
    for ex in p.ex_ops:
        a, a2, i, i2 = ex
        assert a == a2 + 4 and i2 == i + 4  # both spins move together


def test_problem_validation(h2):
    with pytest.raises(InvalidParamMap):
        UCCProblem(h2, [(1, 0), (3, 2)], [0, 2], np.zeros(2))
    with pytest.raises(InvalidParamMap):
        UCCProblem(h2, [(1, 0)], [0, 1], np.zeros(2))
    with pytest.raises(InvalidExcitation):
        UCCProblem(h2, [(1, 0)], [0], np.zeros(1), hard_core_boson=True)


# ---------------------------------------------------------------------------
# Pair-restricted engine
# ---------------------------------------------------------------------------

def test_paired_hamiltonian_three_routes(h4):
    """Pair-space matrix, qubit operator, and fermionic expansion agree."""
    space = make_paired_space(4, 4)
    mat = paired_hamiltonian_matrix(space, h4).toarray()
    np.testing.assert_allclose(mat, mat.T, atol=1e-12)

    # route 2: dense matrix of the qubit operator, restricted to the
    # pair-occupation basis states (configuration mask == vector index)
    dense = build_puccd_hamiltonian(h4).to_dense_matrix()
    idx = space.strings.astype(np.int64)
    np.testing.assert_allclose(mat, np.real(dense[np.ix_(idx, idx)]),
                               atol=1e-10)

    # route 3: expectation through the full determinant space
    p = make_puccd_problem(h4)
    rng = np.random.default_rng(7)
    ci_space = make_ci_space(4, 4)
    for _ in range(3):
        params = rng.uniform(-0.3, 0.3, size=p.n_params)
        e_paired, _ = paired_energy_and_gradient(
            space, p.ex_ops, params, p.param_ids, h4)
        v = ucc_state(ci_space, p.ex_ops, params, p.param_ids)
        assert abs(e_paired - energy(ci_space, v, h4)) < 1e-10


def test_paired_gradient_matches_finite_difference(h4):
    space = make_paired_space(4, 4)
    p = make_puccd_problem(h4)
    rng = np.random.default_rng(11)
    params = rng.uniform(-0.3, 0.3, size=p.n_params)
    _, grad = paired_energy_and_gradient(space, p.ex_ops, params,
                                         p.param_ids, h4)
    h = 1e-5
    for k in range(p.n_params):
        shift = np.zeros(p.n_params)
        shift[k] = h
        e_p, _ = paired_energy_and_gradient(space, p.ex_ops, params + shift,
                                            p.param_ids, h4)
        e_m, _ = paired_energy_and_gradient(space, p.ex_ops, params - shift,
                                            p.param_ids, h4)
        assert abs(grad[k] - (e_p - e_m) / (2 * h)) < 1e-8


def test_puccd_reaches_pair_restricted_ground_state(h4):
    space = make_paired_space(4, 4)
    mat = paired_hamiltonian_matrix(space, h4).toarray()
    doci = float(np.linalg.eigvalsh(mat)[0])
    assert abs(doci - H4_DOCI_GROUND) < 1e-10
    from vqchem.vqe import kernel
    res = kernel(make_puccd_problem(h4))
    assert res.e >= doci - 1e-10
    assert abs(res.e - doci) < 1e-4
    # pair restriction loses correlation against the full treatment
    e_fci, _ = fci_ground_state(make_ci_space(4, 4), h4)
    assert doci > e_fci


def test_problem_statevector_matches_civector(h4):
    p = make_uccsd_problem(h4)
    sv = problem_statevector(p, p.init_guess)
    assert abs(np.linalg.norm(sv) - 1.0) < 1e-12
    v = problem_civector(p, p.init_guess)
    nz = np.nonzero(sv)[0]
    assert len(nz) == np.count_nonzero(v.amplitudes)


def test_problem_dispatch_matches_engines(h4):
    for p in (make_uccsd_problem(h4), make_puccd_problem(h4)):
        e, grad = problem_energy_and_gradient(p, p.init_guess)
        assert np.isfinite(e) and grad.shape == (p.n_params,)
        assert e < hf_energy(h4) + 1e-10


# ---------------------------------------------------------------------------
# Adaptive ansatz growth
# ---------------------------------------------------------------------------

def test_operator_pool_structure():
    pool = build_operator_pool(4, 4)
    assert len(pool.groups) == 15
    for group in pool.groups:
        assert len(group) in (1, 2)
        assert len({len(ex) for ex in group}) == 1  # no mixed-rank groups


def test_adapt_vqe_h2(h2):
    pool = build_operator_pool(2, 2)
    problem, trajectory = adapt_vqe(h2, pool, epsilon=1e-4)
    e_fci, _ = fci_ground_state(make_ci_space(2, 2), h2)
    assert abs(trajectory[0] - hf_energy(h2)) < 1e-10
    assert abs(trajectory[-1] - e_fci) < 1e-8
    assert all(b <= a + 1e-10 for a, b in zip(trajectory, trajectory[1:]))
    # one double excitation is enough; mean-field singles never get picked
    assert problem.ex_ops == [(1, 3, 2, 0)]


def test_adapt_vqe_validation(h2):
    pool = build_operator_pool(2, 2)
    with pytest.raises(ValueError):
        adapt_vqe(h2, pool, epsilon=0.0)


# ---------------------------------------------------------------------------
# Ansatz file round trip
# ---------------------------------------------------------------------------

def test_ansatz_round_trip(tmp_path, h4):
    p = make_uccsd_problem(h4)
    path = tmp_path / "ansatz.txt"
    save_ansatz(path, p)
    q = load_ansatz(path, h4)
    assert q.ex_ops == p.ex_ops
    assert q.param_ids == p.param_ids
    np.testing.assert_allclose(q.init_guess, p.init_guess, atol=0)


def test_ansatz_parse_errors(tmp_path, h2):
    bad = tmp_path / "bad.txt"
    bad.write_text("0 (1,0)\n")
    with pytest.raises(ParseError, match="line 1"):
        load_ansatz(bad, h2)
    bad.write_text("0 (1,0) 0.1\n0 (3,2) 0.2\n")
    with pytest.raises(ParseError, match="line 2"):
        load_ansatz(bad, h2)
    bad.write_text("x (1,0) 0.1\n")
    with pytest.raises(ParseError):
        load_ansatz(bad, h2)
