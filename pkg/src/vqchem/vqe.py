"""Variational optimization driver and result reporting.

The optimizer is a limited-memory quasi-Newton method (history 10) driven by
the analytic reverse-sweep gradient, with a projected-gradient tolerance of
1e-9 and at most 200 iterations.  Runs are deterministic: no randomness
enters the optimization, so identical problems produce identical results.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from typing import TextIO

import numpy as np
from scipy.optimize import minimize

from .ansatz import (
    UCCProblem,
    make_paired_space,
    paired_hamiltonian_matrix,
    paired_state,
    problem_civector,
    problem_energy_and_gradient,
    problem_statevector,
)
from .civector import CIVector, fci_ground_state, make_ci_space
from .errors import InvalidParams
from .integrals import hf_energy, mp2

_PGTOL = 1e-9      # what the optimizer aims for
_GRAD_CONVERGED = 1e-6  # what counts as a converged stationary point
_MAXITER = 200
_HISTORY = 10


@dataclass
class OptResult:
    """Outcome of one variational minimization."""

    e: float
    x: np.ndarray
    init_guess: np.ndarray
    nit: int
    nfev: int
    njev: int
    grad_at_opt: np.ndarray
    converged: bool
    message: str
    opt_time: float


def kernel(problem: UCCProblem, maxiter: int = _MAXITER) -> OptResult:
    """Minimize the ansatz energy starting from ``problem.init_guess``.

    Optimizer failures are not raised: the best point found is returned,
    and ``converged`` reports whether it is stationary within tolerance.
    """
    t0 = time.perf_counter()
    x0 = problem.init_guess.copy()
    if problem.n_params == 0:
        e, _ = problem_energy_and_gradient(problem, x0)
        return OptResult(
            e=float(e), x=x0, init_guess=x0.copy(), nit=0, nfev=1, njev=1,
            grad_at_opt=np.zeros(0), converged=True,
            message="nothing to optimize: zero parameters",
            opt_time=time.perf_counter() - t0,
        )

    def objective(x):
        e, g = problem_energy_and_gradient(problem, x)
        return e, g

    res = minimize(
        objective, x0, jac=True, method="L-BFGS-B",
        options={
            "maxcor": _HISTORY,
            "maxiter": maxiter,
            "gtol": _PGTOL,
            "ftol": 1e-18,
        },
    )
    grad = np.asarray(res.jac, dtype=float)
    # a stationary point is converged even when the optimizer stopped on a
    # line-search failure after reaching it
    converged = float(np.max(np.abs(grad))) <= _GRAD_CONVERGED
    return OptResult(
        e=float(res.fun),
        x=np.asarray(res.x, dtype=float),
        init_guess=x0,
        nit=int(res.nit),
        nfev=int(res.nfev),
        njev=int(res.njev),
        grad_at_opt=grad,
        converged=converged,
        message=str(res.message),
        opt_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# State and energy evaluation at explicit parameters
# ---------------------------------------------------------------------------

def _check_params(problem: UCCProblem, params) -> np.ndarray:
    params = np.asarray(params, dtype=float).ravel()
    if params.size != problem.n_params:
        raise InvalidParams(
            f"expected {problem.n_params} parameters, got {params.size}"
        )
    return params


def energy_at(problem: UCCProblem, params) -> float:
    params = _check_params(problem, params)
    if problem.hard_core_boson:
        s = problem.integrals
        space = make_paired_space(s.n_orb, s.n_elec)
        v = paired_state(space, problem.ex_ops, params, problem.param_ids)
        return float(v @ paired_hamiltonian_matrix(space, s).dot(v))
    e, _ = problem_energy_and_gradient(problem, params)
    return float(e)


def civector_at(problem: UCCProblem, params) -> CIVector:
    """The prepared state in the full determinant space (exact also for
    pair-restricted problems, whose excitations are valid there)."""
    return problem_civector(problem, _check_params(problem, params))


def statevector_at(problem: UCCProblem, params) -> np.ndarray:
    return problem_statevector(problem, _check_params(problem, params))


# ---------------------------------------------------------------------------
# Summary reporting
# ---------------------------------------------------------------------------

@dataclass
class SummaryReport:
    ansatz: dict
    energies: dict
    excitations: list
    optimization: dict
    text: str = field(repr=False, default="")


def _configuration_bitstring(problem: UCCProblem, ex) -> str:
    """Bitstring of the determinant reached by exciting the reference, in
    qubit order (qubit 0 leftmost)."""
    s = problem.integrals
    if problem.hard_core_boson:
        from .ansatz import _paired_orbitals, paired_hf_vector, _paired_generator

        space = make_paired_space(s.n_orb, s.n_elec)
        p, q = _paired_orbitals(ex, s.n_orb)
        w = _paired_generator(space, p, q).dot(paired_hf_vector(space))
        width = s.n_orb
        if not np.any(w):
            return "-" * width
        mask = int(space.strings[int(np.argmax(np.abs(w)))])
        return format(mask, f"0{width}b")
    from .civector import apply_excitation, hf_vector

    space = make_ci_space(s.n_orb, s.n_elec)
    w = apply_excitation(space, hf_vector(space), ex).amplitudes
    width = 2 * s.n_orb
    if not np.any(w):
        return "-" * width
    flat = int(np.argmax(np.abs(w)))
    ia, ib = divmod(flat, space.n_strings_beta)
    index = (int(space.alpha_strings[ia]) << s.n_orb) | int(space.beta_strings[ib])
    return format(index, f"0{width}b")


def print_summary(problem: UCCProblem, result: OptResult,
                  fci_reference: float | None = None,
                  method_label: str = "UCCSD",
                  stream: TextIO | None = None) -> SummaryReport:
    """Render the standard result summary and return it structured.

    ``error (mH)`` is (E_method - E_FCI)*1000 and the correlation-energy
    percentage is (E_method - E_HF)/(E_FCI - E_HF)*100.  The text goes to
    ``stream`` (stdout by default).
    """
    s = problem.integrals
    e_hf = hf_energy(s)
    e_mp2 = e_hf + mp2(s).e_corr
    if fci_reference is None:
        space = make_ci_space(s.n_orb, s.n_elec)
        fci_reference = fci_ground_state(space, s)[0]
    e_fci = float(fci_reference)
    denom = e_fci - e_hf

    def row(e):
        corr = (e - e_hf) / denom * 100.0 if denom != 0.0 else float("nan")
        return {"energy": e, "error_mH": (e - e_fci) * 1000.0,
                "corr_pct": corr}

    energies = {
        "HF": row(e_hf),
        "MP2": row(e_mp2),
        "CCSD": None,  # out of scope; rendered as a dash
        method_label: row(result.e),
        "FCI": row(e_fci),
    }
    excitations = []
    seen_pid = set()
    for ex, pid in zip(problem.ex_ops, problem.param_ids):
        excitations.append({
            "excitation": ex,
            "configuration": _configuration_bitstring(problem, ex),
            "parameter": float(result.x[pid]) if result.x.size else 0.0,
            "init_guess": float(problem.init_guess[pid]),
        })
        seen_pid.add(pid)
    ansatz = {
        "n_qubits": problem.n_qubits,
        "n_params": problem.n_params,
        "n_excitations": len(problem.ex_ops),
        "initial_condition": "MP2" if np.any(problem.init_guess) else "zeros",
    }
    optimization = {
        "e": result.e, "x": result.x.tolist(), "nit": result.nit,
        "nfev": result.nfev, "njev": result.njev,
        "grad_at_opt": result.grad_at_opt.tolist(),
        "converged": result.converged, "message": result.message,
        "opt_time": result.opt_time,
    }

    lines = []
    bar = "#" * 20
    lines.append(f"{bar} Ansatz {bar}")
    lines.append(f" {'n_qubits':>18}: {ansatz['n_qubits']}")
    lines.append(f" {'n_params':>18}: {ansatz['n_params']}")
    lines.append(f" {'n_excitations':>18}: {ansatz['n_excitations']}")
    lines.append(f" {'initial condition':>18}: {ansatz['initial_condition']}")
    lines.append(f"{bar} Circuit {bar}")
    lines.append(" gate counting is out of scope for this package")
    lines.append(f"{bar} Energy {bar}")
    lines.append(f" {'':>6} {'energy (Hartree)':>18} {'error (mH)':>12} "
                 f"{'correlation energy (%)':>24}")
    for name, data in energies.items():
        if data is None:
            lines.append(f" {name:>6} {'-':>18} {'-':>12} {'-':>24}")
            continue
        lines.append(
            f" {name:>6} {data['energy']:>18.10f} {data['error_mH']:>12.3f} "
            f"{data['corr_pct']:>24.3f}"
        )
    lines.append(f"{bar} Excitations {bar}")
    lines.append(f" {'excitation':>22} {'configuration':>16} "
                 f"{'parameter':>14} {'initial guess':>14}")
    for exrow in excitations:
        tup = "(" + ", ".join(str(i) for i in exrow["excitation"]) + ")"
        lines.append(
            f" {tup:>22} {exrow['configuration']:>16} "
            f"{exrow['parameter']:>14.8f} {exrow['init_guess']:>14.8f}"
        )
    lines.append(f"{bar} Optimization Result {bar}")
    lines.append(f" {'converged':>12}: {result.converged}")
    lines.append(f" {'message':>12}: {result.message}")
    lines.append(f" {'e':>12}: {result.e:.12f}")
    lines.append(f" {'x':>12}: {np.array2string(result.x, precision=8)}")
    lines.append(f" {'grad':>12}: "
                 f"{np.array2string(result.grad_at_opt, precision=2)}")
    lines.append(f" {'nit':>12}: {result.nit}")
    lines.append(f" {'nfev':>12}: {result.nfev}")
    lines.append(f" {'njev':>12}: {result.njev}")
    lines.append(f" {'opt_time':>12}: {result.opt_time:.4f} s")
    text = "\n".join(lines)
    print(text, file=stream)
    return SummaryReport(ansatz=ansatz, energies=energies,
                         excitations=excitations, optimization=optimization,
                         text=text)


def result_to_json(problem: UCCProblem, result: OptResult,
                   fci: float | None = None) -> dict:
    """The JSON payload written by the command-line tools."""
    s = problem.integrals
    e_hf = hf_energy(s)
    e_mp2 = e_hf + mp2(s).e_corr
    return {
        "energies": {
            "hf": e_hf,
            "mp2": e_mp2,
            "ucc": result.e,
            "fci": fci,
        },
        "params": result.x.tolist(),
        "ex_ops": [list(ex) for ex in problem.ex_ops],
        "param_ids": list(problem.param_ids),
        "nit": result.nit,
        "converged": result.converged,
        "wall_time_s": result.opt_time,
    }
