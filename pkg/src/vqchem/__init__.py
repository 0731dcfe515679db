"""Variational quantum algorithms for chemistry on configuration-space
vectors: integrals in, UCC/adaptive/hardware-efficient ground states and
variational real-time dynamics out.

The heavy lifting happens in plain numpy on compact representations
(determinant-space vectors, Pauli-term dictionaries, level-space operators);
``CIVEC_NUM_THREADS`` caps the linear-algebra thread pool and must be set
before the first import.
"""

import os as _os

_thread_cap = _os.environ.get("CIVEC_NUM_THREADS")
if _thread_cap:
    for _var in (
        "OMP_NUM_THREADS",
        "OPENBLAS_NUM_THREADS",
        "MKL_NUM_THREADS",
        "NUMEXPR_NUM_THREADS",
        "VECLIB_MAXIMUM_THREADS",
    ):
        _os.environ.setdefault(_var, _thread_cap)
del _os

from importlib import metadata as _metadata

try:
    __version__ = _metadata.version("vqchem")
except _metadata.PackageNotFoundError:  # running from a source checkout
    __version__ = "0.0.0"

from .errors import (
    DegenerateOrbitals,
    FitError,
    InvalidActiveSpace,
    InvalidChannel,
    InvalidExcitation,
    InvalidModel,
    InvalidOperator,
    InvalidParamMap,
    InvalidParams,
    InvalidProbability,
    InvalidSymbol,
    NumericalBlowup,
    ParseError,
    SharedParameterUnsupported,
    SizeLimit,
    SolverFailed,
    UnsupportedOpenShell,
    UnsupportedReduction,
    VqchemError,
    ZeroState,
)
from .operators import (
    FermionOperator,
    QubitOperator,
    hartree_fock_bitstring,
    jordan_wigner,
    parity_transform,
)
from .integrals import (
    ActiveSpaceResult,
    IntegralSet,
    MP2Result,
    active_space_reduce,
    build_fermion_hamiltonian,
    build_hubbard,
    canonicalize_integrals,
    fixture_path,
    hf_energy,
    load_fcidump,
    load_fixture,
    mp2,
    mp2_energy,
    orbital_energies,
    parse_fcidump,
    save_fcidump,
    write_fcidump,
)
from .civector import (
    CISpace,
    CIVector,
    apply_excitation,
    apply_hamiltonian,
    apply_ucc_factor,
    ci_space_dim,
    civector_to_statevector,
    energy,
    energy_and_gradient,
    fci_ground_state,
    hamiltonian_diagonal,
    hf_vector,
    load_civector,
    make_ci_space,
    make_rdm1,
    make_rdm2,
    save_civector,
    statevector_to_civector,
    ucc_state,
)
from .ansatz import (
    OperatorPool,
    PairedSpace,
    UCCProblem,
    adapt_vqe,
    build_operator_pool,
    build_puccd_hamiltonian,
    generate_kupccgsd,
    generate_puccd,
    generate_uccsd,
    load_ansatz,
    make_kupccgsd_problem,
    make_paired_space,
    make_puccd_problem,
    make_uccsd_problem,
    mp2_initialize,
    paired_energy_and_gradient,
    paired_hamiltonian_matrix,
    paired_hf_vector,
    paired_state,
    problem_civector,
    problem_energy_and_gradient,
    problem_statevector,
    save_ansatz,
)
from .vqe import (
    OptResult,
    SummaryReport,
    civector_at,
    energy_at,
    kernel,
    print_summary,
    result_to_json,
    statevector_at,
)
from .gates import (
    Circuit,
    DensityMatrix,
    Gate,
    NoiseModel,
    build_ry_ansatz,
    circuit_from_text,
    circuit_to_text,
    compile_ucc_trotter,
    depolarizing_channel,
    expectation,
    hea_kernel,
    parameter_shift_gradient,
    sampled_expectation,
    simulate_density,
    simulate_state,
)
from .dynamics import (
    BasisHalfSpin,
    BasisSHO,
    EncodedHamiltonian,
    EOMSystem,
    SymbolicTerm,
    Trajectory,
    VHAnsatz,
    ansatz_jacobian,
    ansatz_state,
    assemble_eom,
    boson_matrix,
    build_vha,
    coherent_state,
    decode_dense,
    encode_state,
    exact_propagate,
    format_symbolic_term,
    marcus_model,
    marcus_rate_theory,
    model_dense_matrix,
    parse_symbolic_term,
    qubit_encode,
    rate_fit,
    solve_thetadot,
    spin_boson_model,
    time_evolve,
    trajectory_to_csv,
)

__all__ = [name for name in dir() if not name.startswith("_")]
