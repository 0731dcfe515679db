"""Variational quantum dynamics for vibronic models.

Pipeline: symbolic spin/boson Hamiltonians -> boson-level matrices ->
qubit encoding (unary, binary, or Gray code) -> layered Pauli-rotation
ansatz -> McLachlan equation of motion (M theta_dot = V with
M = Re(J^dagger J), V = Im(J^dagger H psi)) integrated with fixed-step
Euler or RK4, plus an eigendecomposition-based exact propagator for
reference trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    FitError,
    InvalidOperator,
    InvalidParams,
    InvalidSymbol,
    NumericalBlowup,
    SizeLimit,
)
from .gates import _pauli_action
from .operators import QubitOperator

_EXACT_DIM_LIMIT = 1 << 12
_UNARY_NBAS_LIMIT = 16
_COEFF_CUTOFF = 1e-12
_DEFAULT_EPSILON_REG = 1e-5

_SPIN_SYMBOLS = ("sigma_x", "sigma_z")
_BOSON_SYMBOLS = ("b", "b^dagger", "b^dagger b", "b^dagger+b", "x", "p")

# text aliases: the canonical text form is whitespace-delimited, so the
# two-word symbol gets an underscore alias ("n" also accepted for b^dagger b)
_SYMBOL_ALIASES = {
    "b^dagger_b": "b^dagger b",
    "n": "b^dagger b",
}


# ---------------------------------------------------------------------------
# Model description
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SymbolicTerm:
    """Product of single-degree-of-freedom operators times a real
    coefficient; an empty factor list is an identity (constant) term."""

    factors: tuple
    coefficient: float

    def __post_init__(self):
        object.__setattr__(
            self, "factors",
            tuple((str(sym), str(dof)) for sym, dof in self.factors),
        )
        dofs = [dof for _, dof in self.factors]
        if len(set(dofs)) != len(dofs):
            raise InvalidParams(
                f"more than one factor on one degree of freedom: {dofs}"
            )
        for sym, _ in self.factors:
            if sym not in _SPIN_SYMBOLS and sym not in _BOSON_SYMBOLS:
                raise InvalidSymbol(f"unknown operator symbol {sym!r}")


@dataclass(frozen=True)
class BasisHalfSpin:
    dof: str


@dataclass(frozen=True)
class BasisSHO:
    dof: str
    omega: float
    nbas: int
    mass: float = 1.0

    def __post_init__(self):
        if self.nbas < 2:
            raise InvalidParams("harmonic-oscillator basis needs nbas >= 2")


def format_symbolic_term(term: SymbolicTerm) -> str:
    """Text form ``coeff symbol@dof [symbol@dof ...]``."""
    parts = [repr(float(term.coefficient))]
    for sym, dof in term.factors:
        parts.append(f"{sym.replace(' ', '_')}@{dof}")
    return " ".join(parts)


def parse_symbolic_term(text: str) -> SymbolicTerm:
    toks = text.split()
    if not toks:
        raise InvalidParams("empty term text")
    try:
        coeff = float(toks[0])
    except ValueError as exc:
        raise InvalidParams(f"bad coefficient {toks[0]!r}") from exc
    factors = []
    for tok in toks[1:]:
        if "@" not in tok:
            raise InvalidParams(f"expected symbol@dof, got {tok!r}")
        sym, dof = tok.split("@", 1)
        sym = _SYMBOL_ALIASES.get(sym, sym)
        factors.append((sym, dof))
    return SymbolicTerm(tuple(factors), coeff)


# ---------------------------------------------------------------------------
# Level-space matrices
# ---------------------------------------------------------------------------

def boson_matrix(symbol: str, basis: BasisSHO) -> np.ndarray:
    """Harmonic-oscillator operator truncated to the lowest nbas levels;
    x = sqrt(1/(2 m omega)) (b^dagger + b), p = i sqrt(m omega / 2)
    (b^dagger - b)."""
    if not isinstance(basis, BasisSHO):
        raise InvalidSymbol("boson_matrix needs a harmonic-oscillator basis")
    n = basis.nbas
    lower = np.zeros((n, n), dtype=complex)
    for k in range(n - 1):
        lower[k, k + 1] = math.sqrt(k + 1)
    raise_ = lower.conj().T
    if symbol == "b":
        return lower
    if symbol == "b^dagger":
        return raise_
    if symbol == "b^dagger b":
        return raise_ @ lower
    if symbol == "b^dagger+b":
        return raise_ + lower
    if symbol == "x":
        return math.sqrt(1.0 / (2.0 * basis.mass * basis.omega)) * (raise_ + lower)
    if symbol == "p":
        return 1.0j * math.sqrt(basis.mass * basis.omega / 2.0) * (raise_ - lower)
    raise InvalidSymbol(f"unknown boson symbol {symbol!r}")


def _spin_matrix(symbol: str) -> np.ndarray:
    if symbol == "sigma_x":
        return np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
    if symbol == "sigma_z":
        return np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex)
    raise InvalidSymbol(f"{symbol!r} is not a spin-1/2 operator")


def _level_matrix(symbol: str, basis_entry) -> np.ndarray:
    if isinstance(basis_entry, BasisHalfSpin):
        return _spin_matrix(symbol)
    return boson_matrix(symbol, basis_entry)


def _level_dims(basis) -> list:
    return [2 if isinstance(b, BasisHalfSpin) else b.nbas for b in basis]


def model_dense_matrix(terms, basis) -> np.ndarray:
    """Direct tensor-product matrix in the unencoded level basis (reference
    oracle for the qubit encodings)."""
    dims = _level_dims(basis)
    dim = int(np.prod(dims))
    total = np.zeros((dim, dim), dtype=complex)
    dof_index = {b.dof: i for i, b in enumerate(basis)}
    for term in terms:
        mats = [np.eye(d, dtype=complex) for d in dims]
        for sym, dof in term.factors:
            mats[dof_index[dof]] = _level_matrix(sym, basis[dof_index[dof]])
        acc = np.array([[term.coefficient]], dtype=complex)
        for m in mats:
            acc = np.kron(acc, m)
        total += acc
    return total


# ---------------------------------------------------------------------------
# Qubit encodings
# ---------------------------------------------------------------------------

@dataclass
class EncodedHamiltonian:
    qubit_terms: QubitOperator
    constant: float
    qubit_layout: list          # ordered (dof, sub-qubit index) pairs
    basis: tuple
    encoding: str

    @property
    def n_qubits(self) -> int:
        return len(self.qubit_layout)


def _gray_code(i: int) -> int:
    return i ^ (i >> 1)


def _register_width(basis_entry, encoding: str) -> int:
    if isinstance(basis_entry, BasisHalfSpin):
        return 1
    if encoding == "unary":
        if basis_entry.nbas > _UNARY_NBAS_LIMIT:
            raise SizeLimit(
                f"unary encoding capped at nbas={_UNARY_NBAS_LIMIT}"
            )
        return basis_entry.nbas
    return max(1, math.ceil(math.log2(basis_entry.nbas)))


def _level_codeword(basis_entry, encoding: str, level: int, width: int) -> int:
    """Qubit-register bit pattern (MSB first) representing a level."""
    if isinstance(basis_entry, BasisHalfSpin):
        return level
    if encoding == "unary":
        return 1 << (width - 1 - level)
    if encoding == "gray":
        return _gray_code(level)
    return level


_PAULI_DENSE = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}


def _expand_dense_to_paulis(mat: np.ndarray, width: int) -> dict:
    """Pauli coefficients of a 2^width matrix via trace inner products."""
    import itertools

    out = {}
    for letters in itertools.product("IXYZ", repeat=width):
        p = np.array([[1.0]], dtype=complex)
        for ch in letters:
            p = np.kron(p, _PAULI_DENSE[ch])
        coeff = np.trace(p @ mat) / (1 << width)
        if abs(coeff) < _COEFF_CUTOFF:
            continue
        key = tuple((q, ch) for q, ch in enumerate(letters) if ch != "I")
        out[key] = coeff
    return out


def _unary_local_paulis(mat: np.ndarray, width: int) -> dict:
    """One-hot register image valid on the single-excitation subspace:
    |i><i| -> (I - Z_i)/2 and |i><j| -> sigma^+_i sigma^-_j."""
    out: dict = {}

    def add(key, coeff):
        if abs(coeff) < _COEFF_CUTOFF:
            return
        out[key] = out.get(key, 0.0) + coeff

    n = mat.shape[0]
    for i in range(n):
        if abs(mat[i, i]) >= _COEFF_CUTOFF:
            add((), 0.5 * mat[i, i])
            add(((i, "Z"),), -0.5 * mat[i, i])
        for j in range(n):
            if i == j or abs(mat[i, j]) < _COEFF_CUTOFF:
                continue
            a, b = sorted((i, j))
            # sigma^+_i sigma^-_j = (X_i - iY_i)(X_j + iY_j)/4
            c = mat[i, j] / 4.0
            sgn_i = -1.0j  # Y coefficient on the raising qubit
            sgn_j = +1.0j  # Y coefficient on the lowering qubit
            for li, fi in (("X", 1.0), ("Y", sgn_i)):
                for lj, fj in (("X", 1.0), ("Y", sgn_j)):
                    pair = {i: li, j: lj}
                    key = tuple((q, pair[q]) for q in (a, b))
                    add(key, c * fi * fj)
    return {k: v for k, v in out.items() if abs(v) >= _COEFF_CUTOFF}


def _encode_factor(symbol: str, basis_entry, encoding: str, width: int) -> dict:
    """Local Pauli decomposition (term key -> coeff) over the register."""
    if isinstance(basis_entry, BasisHalfSpin):
        letter = "X" if symbol == "sigma_x" else "Z"
        _spin_matrix(symbol)  # validates the symbol
        return {((0, letter),): 1.0}
    mat = boson_matrix(symbol, basis_entry)
    if encoding == "unary":
        return _unary_local_paulis(mat, width)
    dim = 1 << width
    padded = np.zeros((dim, dim), dtype=complex)
    padded[:mat.shape[0], :mat.shape[1]] = mat
    if encoding == "gray":
        perm = np.array([_gray_code(i) for i in range(dim)])
        shuffled = np.zeros_like(padded)
        shuffled[np.ix_(perm, perm)] = padded
        padded = shuffled
    return _expand_dense_to_paulis(padded, width)


def qubit_encode(terms, basis, encoding: str = "gray") -> EncodedHamiltonian:
    """Map symbolic spin/boson terms onto Pauli strings.  Spin-1/2 degrees
    of freedom take one qubit; an nbas-level oscillator takes ceil(log2 nbas)
    qubits (binary/gray, levels padded to the next power of two) or nbas
    qubits (unary, valid on the one-hot subspace).  Identity components are
    split off into the returned constant."""
    if encoding not in ("unary", "binary", "gray"):
        raise InvalidParams(f"unknown encoding {encoding!r}")
    dof_index = {b.dof: i for i, b in enumerate(basis)}
    if len(dof_index) != len(basis):
        raise InvalidParams("duplicate degree-of-freedom names")
    widths = [_register_width(b, encoding) for b in basis]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    n_qubits = int(offsets[-1])
    layout = [(b.dof, j) for b, w in zip(basis, widths) for j in range(w)]

    accum: dict = {}
    for term in terms:
        for _, dof in term.factors:
            if dof not in dof_index:
                raise InvalidParams(f"unknown degree of freedom {dof!r}")
        # product over disjoint registers: merge keys, multiply coefficients
        partial = {(): complex(term.coefficient)}
        for sym, dof in term.factors:
            i = dof_index[dof]
            local = _encode_factor(sym, basis[i], encoding, widths[i])
            nxt: dict = {}
            for key0, c0 in partial.items():
                for key1, c1 in local.items():
                    shifted = tuple((int(offsets[i]) + q, ch) for q, ch in key1)
                    merged = tuple(sorted(key0 + shifted))
                    nxt[merged] = nxt.get(merged, 0.0) + c0 * c1
            partial = nxt
        for key, coeff in partial.items():
            accum[key] = accum.get(key, 0.0) + coeff

    constant = 0.0
    clean: dict = {}
    for key, coeff in accum.items():
        if abs(coeff.imag) > 1e-10:
            raise InvalidOperator(
                f"non-Hermitian encoded coefficient {coeff} for {key}"
            )
        c = float(coeff.real)
        if abs(c) < _COEFF_CUTOFF:
            continue
        if not key:
            constant += c
        else:
            clean[key] = c
    return EncodedHamiltonian(
        qubit_terms=QubitOperator(n_qubits, clean),
        constant=constant,
        qubit_layout=layout,
        basis=tuple(basis),
        encoding=encoding,
    )


def _codeword_index(enc: EncodedHamiltonian, levels) -> int:
    """Global qubit basis index for a tuple of per-dof levels."""
    widths = [_register_width(b, enc.encoding) for b in enc.basis]
    idx = 0
    for b, w, lv in zip(enc.basis, widths, levels):
        idx = (idx << w) | _level_codeword(b, enc.encoding, int(lv), w)
    return idx


def encode_state(enc: EncodedHamiltonian, level_vector) -> np.ndarray:
    """Embed a level-basis vector (tensor product over the basis list, row
    major) into the qubit register space."""
    dims = _level_dims(enc.basis)
    level_vector = np.asarray(level_vector, dtype=complex).ravel()
    if level_vector.size != int(np.prod(dims)):
        raise InvalidParams(
            f"level vector size {level_vector.size} != product of dims {dims}"
        )
    out = np.zeros(1 << enc.n_qubits, dtype=complex)
    for flat, levels in enumerate(np.ndindex(*dims)):
        out[_codeword_index(enc, levels)] = level_vector[flat]
    return out


def decode_dense(enc: EncodedHamiltonian, include_constant: bool = True) -> np.ndarray:
    """Encoded Hamiltonian written back in the level basis (restriction of
    the qubit-space matrix to the encoded subspace)."""
    dims = _level_dims(enc.basis)
    idx = np.array([_codeword_index(enc, levels)
                    for levels in np.ndindex(*dims)])
    dense = enc.qubit_terms.to_dense_matrix()
    if include_constant:
        dense = dense + enc.constant * np.eye(dense.shape[0])
    return dense[np.ix_(idx, idx)]


# ---------------------------------------------------------------------------
# Variational Hamiltonian ansatz
# ---------------------------------------------------------------------------

@dataclass
class VHAnsatz:
    """Layered product of Pauli rotations exp(-i theta P) acting on a fixed
    initial state; parameter (l, j) -> index l * n_terms + j, applied in
    ascending index order (layer 0 first, terms in canonical key order)."""

    n_qubits: int
    paulis: list                # Pauli term keys, one rotation each per layer
    n_layers: int
    phi: np.ndarray             # initial state

    @property
    def n_params(self) -> int:
        return self.n_layers * len(self.paulis)

    @property
    def dim(self) -> int:
        return 1 << self.n_qubits


def build_vha(enc: EncodedHamiltonian, n_layers: int,
              initial_state) -> VHAnsatz:
    """One rotation per Hamiltonian Pauli string per layer; theta = 0 gives
    the initial state.  ``initial_state`` may be a basis index, a bit string,
    or a qubit-space vector (use :func:`encode_state` first for level-space
    vectors)."""
    if n_layers < 1:
        raise InvalidParams("n_layers must be >= 1")
    dim = 1 << enc.n_qubits
    if isinstance(initial_state, str):
        if len(initial_state) != enc.n_qubits or set(initial_state) - {"0", "1"}:
            raise InvalidParams(f"bad basis label {initial_state!r}")
        initial_state = int(initial_state, 2)
    if isinstance(initial_state, (int, np.integer)):
        phi = np.zeros(dim, dtype=complex)
        phi[int(initial_state)] = 1.0
    else:
        phi = np.asarray(initial_state, dtype=complex).ravel()
        if phi.size != dim:
            raise InvalidParams(
                f"initial state has dimension {phi.size}, expected {dim}"
            )
        phi = phi / np.linalg.norm(phi)
    paulis = sorted(enc.qubit_terms.terms.keys())
    return VHAnsatz(n_qubits=enc.n_qubits, paulis=list(paulis),
                    n_layers=n_layers, phi=phi)


def _factor_actions(ansatz: VHAnsatz):
    return [_pauli_action(ansatz.n_qubits, term) for term in ansatz.paulis]


def _apply_rotation(vec_or_mat, target, phase, theta):
    """exp(-i theta P) applied to a vector or to each column of a matrix,
    using P^2 = I."""
    p_applied = np.empty_like(vec_or_mat)
    if vec_or_mat.ndim == 1:
        p_applied[target] = phase * vec_or_mat
    else:
        p_applied[target, :] = phase[:, None] * vec_or_mat
    return math.cos(theta) * vec_or_mat - 1.0j * math.sin(theta) * p_applied


def _state_and_jacobian(ansatz: VHAnsatz, theta, want_jacobian: bool):
    theta = np.asarray(theta, dtype=float).ravel()
    if theta.size != ansatz.n_params:
        raise InvalidParams(
            f"ansatz has {ansatz.n_params} parameters, got {theta.size}"
        )
    actions = _factor_actions(ansatz)
    n_terms = len(ansatz.paulis)
    psi = ansatz.phi.copy()
    jac = (np.zeros((ansatz.dim, ansatz.n_params), dtype=complex)
           if want_jacobian else None)
    for k in range(ansatz.n_params):
        target, phase = actions[k % n_terms]
        t = theta[k]
        if want_jacobian and k > 0:
            jac[:, :k] = _apply_rotation(jac[:, :k], target, phase, t)
        psi = _apply_rotation(psi, target, phase, t)
        if want_jacobian:
            col = np.empty_like(psi)
            col[target] = phase * psi
            jac[:, k] = -1.0j * col  # d/dtheta e^{-i theta P} = -iP e^{...}
    return psi, jac


def ansatz_state(ansatz: VHAnsatz, theta) -> np.ndarray:
    return _state_and_jacobian(ansatz, theta, want_jacobian=False)[0]


def ansatz_jacobian(ansatz: VHAnsatz, theta) -> np.ndarray:
    """d psi / d theta_k as columns of a dim x n_params matrix."""
    return _state_and_jacobian(ansatz, theta, want_jacobian=True)[1]


# ---------------------------------------------------------------------------
# McLachlan equation of motion
# ---------------------------------------------------------------------------

@dataclass
class EOMSystem:
    M: np.ndarray
    V: np.ndarray
    epsilon_reg: float = _DEFAULT_EPSILON_REG


def assemble_eom(jac: np.ndarray, state: np.ndarray,
                 h_dense: np.ndarray) -> EOMSystem:
    """M = Re(J^dagger J), V = Im(J^dagger H psi)."""
    m = (jac.conj().T @ jac).real
    v = (jac.conj().T @ (h_dense @ state)).imag
    return EOMSystem(M=m, V=v)


def solve_thetadot(sys: EOMSystem) -> np.ndarray:
    """Invert M after softening each eigenvalue lam -> lam + eps*exp(-lam/eps),
    which leaves large eigenvalues untouched and floors small ones at eps."""
    eps = sys.epsilon_reg
    lam, vecs = np.linalg.eigh((sys.M + sys.M.T) / 2.0)
    expo = np.clip(-lam / eps, None, 700.0)
    lam_reg = lam + eps * np.exp(expo)
    return vecs @ ((vecs.T @ sys.V) / lam_reg)


@dataclass
class Trajectory:
    times: np.ndarray
    thetas: np.ndarray           # (n_steps + 1, n_params)
    observables: dict            # name -> array over times
    energies: np.ndarray

    def observable(self, name: str) -> np.ndarray:
        return self.observables[name]


def trajectory_to_csv(traj: Trajectory) -> str:
    names = list(traj.observables)
    header = (["t"] + [f"theta_{k}" for k in range(traj.thetas.shape[1])]
              + [f"obs_{name}" for name in names] + ["energy"])
    lines = [",".join(header)]
    for i, t in enumerate(traj.times):
        row = [f"{t:.10g}"]
        row += [f"{x:.12g}" for x in traj.thetas[i]]
        row += [f"{traj.observables[name][i]:.12g}" for name in names]
        row.append(f"{traj.energies[i]:.12g}")
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _observable_value(psi: np.ndarray, obs) -> float:
    if isinstance(obs, QubitOperator):
        obs = obs.to_dense_matrix()
    return float((psi.conj() @ (obs @ psi)).real)


def time_evolve(enc: EncodedHamiltonian, ansatz: VHAnsatz, theta0,
                t_final: float, tau: float, integrator: str = "rk4",
                observables: dict | None = None,
                epsilon_reg: float = _DEFAULT_EPSILON_REG) -> Trajectory:
    """Integrate theta_dot = M^{-1} V with fixed steps; the Hamiltonian the
    state evolves under is the encoded Pauli part (the scalar constant only
    shifts the global phase)."""
    if tau <= 0:
        raise InvalidParams("step size tau must be positive")
    if integrator not in ("euler", "rk4"):
        raise InvalidParams(f"unknown integrator {integrator!r}")
    observables = observables or {}
    h_dense = enc.qubit_terms.to_dense_matrix()
    obs_dense = {name: (o.to_dense_matrix() if isinstance(o, QubitOperator)
                        else np.asarray(o, dtype=complex))
                 for name, o in observables.items()}

    def derivative(theta):
        psi, jac = _state_and_jacobian(ansatz, theta, want_jacobian=True)
        sys = assemble_eom(jac, psi, h_dense)
        sys.epsilon_reg = epsilon_reg
        return solve_thetadot(sys)

    n_steps = int(round(t_final / tau))
    theta = np.asarray(theta0, dtype=float).ravel().copy()
    if theta.size != ansatz.n_params:
        raise InvalidParams(
            f"theta0 has {theta.size} entries, ansatz takes {ansatz.n_params}"
        )
    times = np.arange(n_steps + 1) * tau
    thetas = np.zeros((n_steps + 1, theta.size))
    obs_out = {name: np.zeros(n_steps + 1) for name in obs_dense}
    energies = np.zeros(n_steps + 1)

    def record(i, th):
        psi = ansatz_state(ansatz, th)
        thetas[i] = th
        for name, mat in obs_dense.items():
            obs_out[name][i] = _observable_value(psi, mat)
        energies[i] = _observable_value(psi, h_dense) + enc.constant

    record(0, theta)
    for step in range(1, n_steps + 1):
        if integrator == "euler":
            theta = theta + tau * derivative(theta)
        else:
            k1 = derivative(theta)
            k2 = derivative(theta + 0.5 * tau * k1)
            k3 = derivative(theta + 0.5 * tau * k2)
            k4 = derivative(theta + tau * k3)
            theta = theta + (tau / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        if not np.all(np.isfinite(theta)):
            raise NumericalBlowup(f"non-finite parameters at step {step}")
        record(step, theta)
    return Trajectory(times=times, thetas=thetas, observables=obs_out,
                      energies=energies)


def exact_propagate(h_dense: np.ndarray, psi0, t_grid) -> np.ndarray:
    """States e^{-iHt} psi0 on a time grid via eigendecomposition."""
    h_dense = np.asarray(h_dense, dtype=complex)
    if h_dense.shape[0] > _EXACT_DIM_LIMIT:
        raise SizeLimit(
            f"exact propagation capped at dimension {_EXACT_DIM_LIMIT}"
        )
    psi0 = np.asarray(psi0, dtype=complex).ravel()
    lam, vecs = np.linalg.eigh(h_dense)
    coeffs = vecs.conj().T @ psi0
    t_grid = np.asarray(t_grid, dtype=float)
    phases = np.exp(-1.0j * np.outer(t_grid, lam))
    return (vecs @ (phases * coeffs).T).T


# ---------------------------------------------------------------------------
# Physical models
# ---------------------------------------------------------------------------

def spin_boson_model(epsilon: float, delta: float, omega: float, g: float,
                     nbas: int):
    """H = (epsilon/2) sigma_z + delta sigma_x + omega b^dagger b
    + g sigma_z (b^dagger + b); returns (terms, basis)."""
    terms = [
        SymbolicTerm((("sigma_z", "spin"),), epsilon / 2.0),
        SymbolicTerm((("sigma_x", "spin"),), delta),
        SymbolicTerm((("b^dagger b", "boson"),), omega),
        SymbolicTerm((("sigma_z", "spin"), ("b^dagger+b", "boson")), g),
    ]
    basis = [BasisHalfSpin("spin"), BasisSHO("boson", omega=omega, nbas=nbas)]
    return terms, basis


def coherent_state(alpha: float, nbas: int) -> np.ndarray:
    """Coherent state truncated to nbas levels and renormalized."""
    amps = np.empty(nbas)
    amps[0] = 1.0
    for n in range(1, nbas):
        amps[n] = amps[n - 1] * alpha / math.sqrt(n)
    return amps / np.linalg.norm(amps)


def marcus_model(v: float, dg: float, omega: float, g: float, nbas: int):
    """Two-site charge transfer in the one-charge sector: the charge becomes
    one qubit (|0> = charge on site 0, hopping = -v sigma_x), each site gets
    its own oscillator with occupation-coupled displacement g*omega(b^dagger
    + b), so the reorganization energy is 2 g^2 omega.  Returns (terms,
    basis, initial level-space vector); the initial state localizes the
    charge on site 0 with its oscillator relaxed (coherent state, displacement
    -g) and the other oscillator in its ground state."""
    c = g * omega
    terms = [
        SymbolicTerm((("sigma_x", "charge"),), -v),
        SymbolicTerm((), dg / 2.0),
        SymbolicTerm((("sigma_z", "charge"),), -dg / 2.0),
        SymbolicTerm((("b^dagger b", "boson0"),), omega),
        SymbolicTerm((("b^dagger b", "boson1"),), omega),
        SymbolicTerm((("b^dagger+b", "boson0"),), c / 2.0),
        SymbolicTerm((("sigma_z", "charge"), ("b^dagger+b", "boson0")), c / 2.0),
        SymbolicTerm((("b^dagger+b", "boson1"),), c / 2.0),
        SymbolicTerm((("sigma_z", "charge"), ("b^dagger+b", "boson1")), -c / 2.0),
    ]
    basis = [
        BasisHalfSpin("charge"),
        BasisSHO("boson0", omega=omega, nbas=nbas),
        BasisSHO("boson1", omega=omega, nbas=nbas),
    ]
    charge0 = np.array([1.0, 0.0])
    boson0 = coherent_state(-g, nbas)
    boson1 = coherent_state(0.0, nbas)
    initial = np.kron(np.kron(charge0, boson0), boson1).astype(complex)
    return terms, basis, initial


def marcus_rate_theory(v: float, lambda_: float, dg: float,
                       beta: float) -> float:
    """k = v^2 sqrt(pi beta / lambda) exp(-beta (lambda + dg)^2 / (4 lambda))
    (hbar = 1); maximal over dg at dg = -lambda."""
    if lambda_ <= 0 or beta <= 0:
        raise InvalidParams("lambda and beta must be positive")
    return (v * v * math.sqrt(math.pi * beta / lambda_)
            * math.exp(-beta * (lambda_ + dg) ** 2 / (4.0 * lambda_)))


def rate_fit(times, values, t_window=(2.0, 8.0)) -> float:
    """Negated least-squares slope of a population trace inside the window."""
    times = np.asarray(times, dtype=float).ravel()
    values = np.asarray(values, dtype=float).ravel()
    lo, hi = t_window
    mask = (times >= lo) & (times <= hi)
    if int(mask.sum()) < 3:
        raise FitError(
            f"need at least 3 samples in the window [{lo}, {hi}]"
        )
    t_sel = times[mask]
    if np.ptp(t_sel) < 1e-12:
        raise FitError("degenerate time window")
    slope = np.polyfit(t_sel, values[mask], 1)[0]
    return float(-slope)
