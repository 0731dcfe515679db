import numpy as np
import pytest

from vqchem import (
    InvalidParams,
    civector_at,
    energy_at,
    fci_ground_state,
    hf_energy,
    kernel,
    make_ci_space,
    make_kupccgsd_problem,
    make_uccsd_problem,
    mp2_energy,
    print_summary,
    result_to_json,
    statevector_at,
)

H2_FCI = -1.1372744055294606
H4_FCI = -2.1675605441340577


def test_h2_uccsd_pinned_results(h2):
    problem = make_uccsd_problem(h2)
    result = kernel(problem)
    assert abs(result.e - H2_FCI) < 1e-9
    assert abs(result.x[1] - (-0.112986561)) < 1e-6
    assert abs(problem.init_guess[1] - (-0.072608)) < 1e-4
    assert result.converged
    assert result.nit <= 10 and result.nfev >= result.nit
    assert np.max(np.abs(result.grad_at_opt)) < 1e-6
    v = civector_at(problem, result.x)
    amps = v.amplitudes * np.sign(v.amplitudes[0])
    np.testing.assert_allclose(amps, [0.99362, 0.0, 0.0, -0.11275],
                               atol=1e-4)


def test_h4_uccsd_close_to_fci(h4):
    result = kernel(make_uccsd_problem(h4))
    assert result.converged
    error_mh = (result.e - H4_FCI) * 1000.0
    assert abs(error_mh - 0.01) < 0.02
    assert result.e >= H4_FCI - 1e-10  # variational


def test_kupccgsd_h2_reaches_fci(h2):
    result = kernel(make_kupccgsd_problem(h2, k=1, seed=0))
    assert abs(result.e - H2_FCI) < 1e-7


def test_kernel_on_empty_parameter_vector(h2):
    from vqchem import UCCProblem
    problem = UCCProblem(h2, [], [], np.zeros(0))
    assert problem.n_params == 0
    result = kernel(problem)
    assert abs(result.e - hf_energy(h2)) < 1e-10
    assert result.nit == 0 and result.converged


def test_energy_and_state_accessors(h2):
    problem = make_uccsd_problem(h2)
    result = kernel(problem)
    assert abs(energy_at(problem, result.x) - result.e) < 1e-12
    sv = statevector_at(problem, result.x)
    assert abs(np.linalg.norm(sv) - 1.0) < 1e-12
    with pytest.raises(InvalidParams):
        energy_at(problem, [0.1])


def test_deterministic_reruns(h4):
    problem = make_uccsd_problem(h4)
    a = kernel(problem)
    b = kernel(problem)
    assert a.e == b.e
    np.testing.assert_array_equal(a.x, b.x)
    assert (a.nit, a.nfev, a.njev) == (b.nit, b.nfev, b.njev)


def test_summary_report(h2, capsys):
    problem = make_uccsd_problem(h2)
    result = kernel(problem)
    report = print_summary(problem, result)
    out = capsys.readouterr().out
    assert "Ansatz" in out and "Energy" in out and "Excitations" in out
    assert report.ansatz["n_qubits"] == 4
    assert report.ansatz["n_params"] == 2
    assert report.ansatz["initial_condition"] == "MP2"
    assert abs(report.energies["HF"]["energy"] - hf_energy(h2)) < 1e-12
    assert abs(report.energies["MP2"]["energy"] - mp2_energy(h2)) < 1e-12
    assert abs(report.energies["FCI"]["error_mH"]) < 1e-9
    assert abs(report.energies["UCCSD"]["corr_pct"] - 100.0) < 1e-4
    assert report.energies["CCSD"] is None
    # the double excitation reaches the doubly-excited closed-shell state:
    # both spins of orbital 1 occupied = spin-orbitals 1 and 3 = index 1010
    rows = {tuple(r["excitation"]): r for r in report.excitations}
    assert rows[(1, 3, 2, 0)]["configuration"] == "1010"
    assert abs(rows[(1, 3, 2, 0)]["parameter"] - (-0.112986561)) < 1e-6


def test_result_json_payload(h2):
    problem = make_uccsd_problem(h2)
    result = kernel(problem)
    e_fci, _ = fci_ground_state(make_ci_space(2, 2), h2)
    payload = result_to_json(problem, result, fci=e_fci)
    assert set(payload) == {"energies", "params", "ex_ops", "param_ids",
                            "nit", "converged", "wall_time_s"}
    assert abs(payload["energies"]["ucc"] - H2_FCI) < 1e-9
    assert abs(payload["energies"]["fci"] - H2_FCI) < 1e-9
    assert payload["converged"] is True
    assert payload["ex_ops"] == [[3, 2], [1, 0], [1, 3, 2, 0]]


def test_maxiter_is_respected(h4):
    problem = make_uccsd_problem(h4)
    result = kernel(problem, maxiter=1)
    assert result.nit <= 1
    assert not result.converged
