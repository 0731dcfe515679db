"""Gate-level quantum circuit simulation: ideal statevectors, noisy density
matrices with Kraus channels, shot sampling, parameter-shift gradients, and a
hardware-efficient-ansatz optimizer.

Qubit 0 is the most significant bit of a basis-state index, matching
:func:`vqchem.operators.to_dense_matrix`.  The rotation convention is
RY(theta) = exp(-i*theta*Y/2) and PAULI_ROT(P, theta) = exp(-i*theta*P/2);
with it the parameter-shift rule reads
dE/dtheta = [E(theta + pi/2) - E(theta - pi/2)] / 2.
(Stated for a generator R with R^2 = -I and U = e^{theta R}, the same rule
uses shifts of pi/4 in theta; R = -iY/2 rescales the angle by 2, which is
where the pi/2 comes from.)
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize

from .errors import (
    InvalidChannel,
    InvalidOperator,
    InvalidParams,
    InvalidProbability,
    ParseError,
    SharedParameterUnsupported,
    SizeLimit,
)
from .operators import QubitOperator

_DENSITY_QUBIT_LIMIT = 10
_GATE_KINDS = ("X", "RY", "CNOT", "PAULI_ROT")

_X = np.array([[0.0, 1.0], [1.0, 0.0]], dtype=complex)
_CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)

_PAULI_1Q = {
    "I": np.eye(2, dtype=complex),
    "X": _X,
    "Y": np.array([[0.0, -1.0j], [1.0j, 0.0]]),
    "Z": np.array([[1.0, 0.0], [0.0, -1.0]], dtype=complex),
}


def _ry_matrix(theta: float) -> np.ndarray:
    c, s = math.cos(theta / 2.0), math.sin(theta / 2.0)
    return np.array([[c, -s], [s, c]], dtype=complex)


# ---------------------------------------------------------------------------
# Circuit structure
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Gate:
    """One gate: fixed (X, CNOT), or a rotation whose angle either lives in
    ``angle`` or is looked up from the parameter vector via ``param_slot``."""

    kind: str
    qubits: tuple
    param_slot: int | None = None
    angle: float | None = None
    pauli: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "qubits", tuple(int(q) for q in self.qubits))
        if self.kind not in _GATE_KINDS:
            raise InvalidParams(f"unknown gate kind {self.kind!r}")
        if len(set(self.qubits)) != len(self.qubits):
            raise InvalidParams(f"repeated qubit in {self}")
        arity = {"X": 1, "RY": 1, "CNOT": 2}.get(self.kind)
        if arity is not None and len(self.qubits) != arity:
            raise InvalidParams(f"{self.kind} acts on {arity} qubit(s)")
        if self.kind in ("RY", "PAULI_ROT"):
            if (self.param_slot is None) == (self.angle is None):
                raise InvalidParams(
                    f"{self.kind} needs exactly one of param_slot or angle"
                )
        elif self.param_slot is not None or self.angle is not None:
            raise InvalidParams(f"{self.kind} takes no angle")
        if self.kind == "PAULI_ROT":
            if (self.pauli is None or len(self.pauli) != len(self.qubits)
                    or any(ch not in "XYZ" for ch in self.pauli)):
                raise InvalidParams(
                    "PAULI_ROT needs a Pauli letter per qubit"
                )
        elif self.pauli is not None:
            raise InvalidParams(f"{self.kind} takes no Pauli string")


@dataclass
class Circuit:
    n_qubits: int
    gates: list
    n_params: int = 0

    def __post_init__(self):
        for g in self.gates:
            if any(not 0 <= q < self.n_qubits for q in g.qubits):
                raise InvalidParams(f"gate {g} outside {self.n_qubits} qubits")
            if g.param_slot is not None and not 0 <= g.param_slot < self.n_params:
                raise InvalidParams(
                    f"param slot {g.param_slot} outside 0..{self.n_params - 1}"
                )


def circuit_to_text(c: Circuit) -> str:
    """One gate per line: ``X q1``, ``CNOT q0 q1``, ``RY q0 slot3`` (or a
    numeric angle), ``PAULI_ROT XY q0 q2 slot1``."""
    lines = []
    for g in c.gates:
        qubits = " ".join(f"q{q}" for q in g.qubits)
        if g.kind in ("X", "CNOT"):
            lines.append(f"{g.kind} {qubits}")
            continue
        tail = (f"slot{g.param_slot}" if g.param_slot is not None
                else repr(float(g.angle)))
        if g.kind == "PAULI_ROT":
            lines.append(f"PAULI_ROT {g.pauli} {qubits} {tail}")
        else:
            lines.append(f"{g.kind} {qubits} {tail}")
    return "\n".join(lines) + "\n"


def circuit_from_text(text: str, n_qubits: int | None = None,
                      n_params: int | None = None) -> Circuit:
    gates = []
    max_q = -1
    max_slot = -1

    def parse_qubit(tok, lineno):
        if not tok.startswith("q"):
            raise ParseError(f"line {lineno}: expected qubit token, got {tok!r}")
        try:
            return int(tok[1:])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad qubit {tok!r}") from exc

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        toks = line.split()
        kind = toks[0].upper()
        slot = None
        angle = None
        pauli = None
        if kind in ("X", "CNOT"):
            qubits = [parse_qubit(t, lineno) for t in toks[1:]]
        elif kind in ("RY", "PAULI_ROT"):
            body = toks[1:]
            if kind == "PAULI_ROT":
                if not body:
                    raise ParseError(f"line {lineno}: missing Pauli string")
                pauli = body[0].upper()
                body = body[1:]
            if not body:
                raise ParseError(f"line {lineno}: incomplete gate")
            tail = body[-1]
            qubits = [parse_qubit(t, lineno) for t in body[:-1]]
            if tail.startswith("slot"):
                slot = int(tail[4:])
            else:
                try:
                    angle = float(tail)
                except ValueError as exc:
                    raise ParseError(
                        f"line {lineno}: expected slotN or angle, got {tail!r}"
                    ) from exc
        else:
            raise ParseError(f"line {lineno}: unknown gate {kind!r}")
        gates.append(Gate(kind, tuple(qubits), param_slot=slot, angle=angle,
                          pauli=pauli))
        max_q = max(max_q, *qubits)
        if slot is not None:
            max_slot = max(max_slot, slot)
    return Circuit(
        n_qubits=n_qubits if n_qubits is not None else max_q + 1,
        gates=gates,
        n_params=n_params if n_params is not None else max_slot + 1,
    )


def build_ry_ansatz(n_qubits: int, n_layers: int) -> Circuit:
    """An initial Y-rotation layer, then ``n_layers`` repetitions of a CNOT
    ladder (control j, target j+1, ascending) followed by another rotation
    layer; (n_layers+1)*n_qubits parameters."""
    if n_layers < 0:
        raise InvalidParams("n_layers must be >= 0")
    gates = []
    slot = 0
    for q in range(n_qubits):
        gates.append(Gate("RY", (q,), param_slot=slot))
        slot += 1
    for _ in range(n_layers):
        for q in range(n_qubits - 1):
            gates.append(Gate("CNOT", (q, q + 1)))
        for q in range(n_qubits):
            gates.append(Gate("RY", (q,), param_slot=slot))
            slot += 1
    return Circuit(n_qubits=n_qubits, gates=gates, n_params=slot)


# ---------------------------------------------------------------------------
# Noise
# ---------------------------------------------------------------------------

@dataclass
class NoiseModel:
    """Kraus channels attached to gate kinds; applied right after every gate
    of that kind."""

    channels: dict = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for kind, kraus in self.channels.items():
            clean[kind] = _validate_kraus([np.asarray(k, dtype=complex)
                                           for k in kraus])
        self.channels = clean


def _validate_kraus(kraus) -> list:
    if not kraus:
        raise InvalidChannel("empty Kraus list")
    dim = kraus[0].shape[0]
    total = np.zeros((dim, dim), dtype=complex)
    for k in kraus:
        if k.shape != (dim, dim):
            raise InvalidChannel("Kraus operators differ in shape")
        total += k.conj().T @ k
    if np.max(np.abs(total - np.eye(dim))) > 1e-10:
        raise InvalidChannel("channel is not trace preserving")
    return list(kraus)


def depolarizing_channel(p: float, n_qubits: int) -> list:
    """Isotropic depolarizing channel: sqrt(1-p) I plus sqrt(p/15) times each
    of the 15 non-identity two-qubit Paulis (p/3 and 3 Paulis for one qubit).
    Average gate fidelity 1 - 4p/5 for the two-qubit form."""
    if not 0.0 <= p <= 1.0:
        raise InvalidProbability(f"p={p} outside [0, 1]")
    if n_qubits == 1:
        paulis = [_PAULI_1Q[ch] for ch in "XYZ"]
        weight = p / 3.0
        identity = np.eye(2, dtype=complex)
    elif n_qubits == 2:
        paulis = [
            np.kron(_PAULI_1Q[a], _PAULI_1Q[b])
            for a in "IXYZ" for b in "IXYZ"
            if not (a == "I" and b == "I")
        ]
        weight = p / 15.0
        identity = np.eye(4, dtype=complex)
    else:
        raise InvalidChannel("depolarizing channel defined for 1 or 2 qubits")
    return [math.sqrt(1.0 - p) * identity] + [
        math.sqrt(weight) * pauli for pauli in paulis
    ]


# ---------------------------------------------------------------------------
# Simulation
# ---------------------------------------------------------------------------

def _gate_matrix(g: Gate, params) -> np.ndarray:
    if g.kind == "X":
        return _X
    if g.kind == "CNOT":
        return _CNOT
    theta = float(params[g.param_slot]) if g.param_slot is not None else g.angle
    if g.kind == "RY":
        return _ry_matrix(theta)
    # PAULI_ROT: exp(-i theta P / 2) = cos(t/2) I - i sin(t/2) P
    pauli = _PAULI_1Q[g.pauli[0]]
    for ch in g.pauli[1:]:
        pauli = np.kron(pauli, _PAULI_1Q[ch])
    dim = pauli.shape[0]
    return (math.cos(theta / 2.0) * np.eye(dim)
            - 1.0j * math.sin(theta / 2.0) * pauli)


def _apply_unitary_state(psi: np.ndarray, u: np.ndarray, qubits,
                         n: int) -> np.ndarray:
    k = len(qubits)
    psi = psi.reshape([2] * n)
    psi = np.moveaxis(psi, qubits, range(k))
    shape = psi.shape
    psi = u @ psi.reshape(2 ** k, -1)
    psi = np.moveaxis(psi.reshape(shape), range(k), qubits)
    return psi.reshape(-1)


def simulate_state(c: Circuit, params) -> np.ndarray:
    """Apply the circuit to |0...0>; returns the final statevector."""
    params = _check_circuit_params(c, params)
    psi = np.zeros(2 ** c.n_qubits, dtype=complex)
    psi[0] = 1.0
    for g in c.gates:
        psi = _apply_unitary_state(psi, _gate_matrix(g, params), g.qubits,
                                   c.n_qubits)
    return psi


@dataclass
class DensityMatrix:
    n_qubits: int
    matrix: np.ndarray

    def validate(self, psd_tol: float = 1e-9) -> "DensityMatrix":
        m = self.matrix
        if np.max(np.abs(m - m.conj().T)) > 1e-10:
            raise InvalidChannel("density matrix lost Hermiticity")
        if abs(np.trace(m).real - 1.0) > 1e-10 or abs(np.trace(m).imag) > 1e-10:
            raise InvalidChannel("density matrix trace drifted from 1")
        if np.min(np.linalg.eigvalsh((m + m.conj().T) / 2.0)) < -psd_tol:
            raise InvalidChannel("density matrix lost positivity")
        return self


def _check_circuit_params(c: Circuit, params) -> np.ndarray:
    params = np.asarray([] if params is None else params, dtype=float).ravel()
    if params.size != c.n_params:
        raise InvalidParams(
            f"circuit has {c.n_params} parameters, got {params.size}"
        )
    return params


def _apply_channel_density(rho: np.ndarray, mats, qubits, n: int) -> np.ndarray:
    out = None
    for kmat in mats:
        term = _apply_rows(rho, kmat, qubits, n)
        term = _apply_rows(term.conj().T, kmat, qubits, n).conj().T
        out = term if out is None else out + term
    return out


def _apply_rows(mat: np.ndarray, u: np.ndarray, qubits, n: int) -> np.ndarray:
    """Apply u to the row (ket) index of a 2^n x m matrix."""
    k = len(qubits)
    cols = mat.shape[1]
    t = mat.reshape([2] * n + [cols])
    t = np.moveaxis(t, qubits, range(k))
    shape = t.shape
    t = u @ t.reshape(2 ** k, -1)
    t = np.moveaxis(t.reshape(shape), range(k), qubits)
    return t.reshape(2 ** n, cols)


def simulate_density(c: Circuit, params, noise: NoiseModel | None) -> DensityMatrix:
    """Apply the circuit to |0><0| with each gate followed by its noise
    channel (if the model binds one to that gate kind)."""
    if c.n_qubits > _DENSITY_QUBIT_LIMIT:
        raise SizeLimit(
            f"density simulation capped at {_DENSITY_QUBIT_LIMIT} qubits"
        )
    params = _check_circuit_params(c, params)
    channels = {} if noise is None else noise.channels
    dim = 2 ** c.n_qubits
    rho = np.zeros((dim, dim), dtype=complex)
    rho[0, 0] = 1.0
    for g in c.gates:
        u = _gate_matrix(g, params)
        rho = _apply_channel_density(rho, [u], g.qubits, c.n_qubits)
        kraus = channels.get(g.kind)
        if kraus is not None:
            if kraus[0].shape[0] != 2 ** len(g.qubits):
                raise InvalidChannel(
                    f"channel dimension {kraus[0].shape[0]} does not match "
                    f"{g.kind} arity"
                )
            rho = _apply_channel_density(rho, kraus, g.qubits, c.n_qubits)
    return DensityMatrix(c.n_qubits, rho)


# ---------------------------------------------------------------------------
# Expectation values
# ---------------------------------------------------------------------------

_PAULI_ACTION_CACHE: dict = {}


def _pauli_action(n: int, term: tuple):
    """For P|i> = phase_i |target_i| over all basis states i."""
    key = (n, term)
    hit = _PAULI_ACTION_CACHE.get(key)
    if hit is not None:
        return hit
    idx = np.arange(1 << n)
    target = idx.copy()
    phase = np.ones(1 << n, dtype=complex)
    for q, letter in term:
        pos = n - 1 - q
        bit = (idx >> pos) & 1
        if letter == "X":
            target ^= 1 << pos
        elif letter == "Y":
            target ^= 1 << pos
            phase = phase * (1.0j * (1.0 - 2.0 * bit))
        else:  # Z
            phase = phase * (1.0 - 2.0 * bit)
    _PAULI_ACTION_CACHE[key] = (target, phase)
    return target, phase


def _as_matrix(state_or_rho):
    if isinstance(state_or_rho, DensityMatrix):
        return state_or_rho.matrix, True
    arr = np.asarray(state_or_rho)
    if arr.ndim == 1:
        return arr, False
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1]:
        return arr, True
    raise InvalidOperator("expected a statevector or a square density matrix")


def _term_expectation(arr, is_rho: bool, n: int, term: tuple) -> complex:
    if not term:
        return np.trace(arr) if is_rho else np.vdot(arr, arr)
    target, phase = _pauli_action(n, term)
    if is_rho:
        # Tr(rho P) = sum_i rho[i, target_i] * phase_i
        return complex(np.sum(arr[np.arange(arr.shape[0]), target] * phase))
    return complex(np.sum(np.conj(arr[target]) * phase * arr))


def expectation(state_or_rho, h: QubitOperator) -> float:
    """<psi|H|psi> or Tr(rho H); the imaginary residue must vanish."""
    arr, is_rho = _as_matrix(state_or_rho)
    n = h.n_qubits
    if arr.shape[0] != 1 << n:
        raise InvalidOperator(
            f"operator on {n} qubits against state of dimension {arr.shape[0]}"
        )
    total = 0.0 + 0.0j
    for term, coeff in h.terms.items():
        total += coeff * _term_expectation(arr, is_rho, n, term)
    if abs(total.imag) > 1e-9:
        raise InvalidOperator(
            f"expectation value has imaginary part {total.imag:.2e}; "
            "is the operator Hermitian?"
        )
    return float(total.real)


def sampled_expectation(state_or_rho, h: QubitOperator, shots_per_term: int,
                        seed: int = 0) -> float:
    """Estimate each Pauli term from a finite number of measurement shots:
    the exact expectation e gives outcome probabilities (1 +/- e)/2, and the
    estimate is 2k/shots - 1 with k binomial.  The identity term is exact."""
    if shots_per_term < 1:
        raise InvalidParams("shots_per_term must be >= 1")
    arr, is_rho = _as_matrix(state_or_rho)
    n = h.n_qubits
    if arr.shape[0] != 1 << n:
        raise InvalidOperator("state size does not match operator")
    rng = np.random.default_rng(seed)
    total = 0.0
    for term, coeff in sorted(h.terms.items()):
        e = _term_expectation(arr, is_rho, n, term).real
        if not term:
            total += coeff.real * e
            continue
        e = min(1.0, max(-1.0, e))
        k = rng.binomial(shots_per_term, (1.0 + e) / 2.0)
        total += coeff.real * (2.0 * k / shots_per_term - 1.0)
    return float(total)


# ---------------------------------------------------------------------------
# Gradients and optimization
# ---------------------------------------------------------------------------

def _single_slot_gates(c: Circuit):
    slots: dict[int, int] = {}
    for g in c.gates:
        if g.param_slot is not None:
            slots[g.param_slot] = slots.get(g.param_slot, 0) + 1
    for slot, count in slots.items():
        if count > 1:
            raise SharedParameterUnsupported(
                f"parameter slot {slot} drives {count} gates; the shift rule "
                "needs one gate per parameter"
            )


def _energy_of(c: Circuit, params, h: QubitOperator,
               noise: NoiseModel | None) -> float:
    if noise is None:
        return expectation(simulate_state(c, params), h)
    return expectation(simulate_density(c, params, noise).matrix, h)


def parameter_shift_gradient(c: Circuit, params, h: QubitOperator,
                             noise: NoiseModel | None = None) -> np.ndarray:
    """dE/dtheta_j = [E(theta_j + pi/2) - E(theta_j - pi/2)] / 2, two circuit
    evaluations per parameter; exact for RY/PAULI_ROT generators."""
    params = _check_circuit_params(c, params)
    _single_slot_gates(c)
    grad = np.zeros(c.n_params)
    for j in range(c.n_params):
        shifted = params.copy()
        shifted[j] = params[j] + math.pi / 2.0
        e_plus = _energy_of(c, shifted, h, noise)
        shifted[j] = params[j] - math.pi / 2.0
        e_minus = _energy_of(c, shifted, h, noise)
        grad[j] = 0.5 * (e_plus - e_minus)
    return grad


def hea_kernel(c: Circuit, init_params, h: QubitOperator,
               noise: NoiseModel | None = None, use_gradient: bool = True,
               shots: int | None = None, seed: int = 0):
    """Optimize the circuit energy.  With ``use_gradient`` a quasi-Newton
    method driven by parameter-shift gradients is used; circuits with shared
    parameter slots (or ``use_gradient=False``) fall back to a derivative-free
    simplex method.  With ``shots`` the objective is sampled."""
    from .vqe import OptResult

    t0 = time.perf_counter()
    init_params = _check_circuit_params(c, init_params)
    eval_count = [0]

    def objective(x):
        eval_count[0] += 1
        if shots is None:
            return _energy_of(c, x, h, noise)
        state = (simulate_state(c, x) if noise is None
                 else simulate_density(c, x, noise).matrix)
        return sampled_expectation(state, h, shots,
                                   seed=seed + eval_count[0])

    gradient_ok = use_gradient and shots is None
    if gradient_ok:
        try:
            _single_slot_gates(c)
        except SharedParameterUnsupported:
            gradient_ok = False

    if gradient_ok:
        res = minimize(
            lambda x: (objective(x), parameter_shift_gradient(c, x, h, noise)),
            init_params, jac=True, method="L-BFGS-B",
            options={"maxcor": 10, "gtol": 1e-9, "ftol": 1e-18,
                     "maxiter": 200},
        )
        grad = np.asarray(res.jac, dtype=float)
        converged = bool(res.success) and float(np.max(np.abs(grad))) <= 1e-6
        njev = int(res.njev)
    else:
        res = minimize(
            objective, init_params, method="Nelder-Mead",
            options={"adaptive": True, "xatol": 1e-7, "fatol": 1e-7,
                     "maxiter": 4000, "maxfev": 8000},
        )
        grad = np.full(c.n_params, np.nan)
        converged = bool(res.success)
        njev = 0
    return OptResult(
        e=float(res.fun),
        x=np.asarray(res.x, dtype=float),
        init_guess=init_params,
        nit=int(res.nit),
        nfev=int(res.nfev),
        njev=njev,
        grad_at_opt=grad,
        converged=converged,
        message=str(res.message),
        opt_time=time.perf_counter() - t0,
    )


# ---------------------------------------------------------------------------
# UCC factor compilation
# ---------------------------------------------------------------------------

def compile_ucc_trotter(problem, params) -> Circuit:
    """Compile a UCC problem at fixed parameters into X gates (reference
    preparation) followed by Pauli rotations.

    Each factor e^{theta G} JW-maps to a product of commuting Pauli
    rotations (the strings of one excitation's image commute), so the
    compiled circuit reproduces the determinant-space state exactly.
    """
    from .operators import FermionOperator, jordan_wigner

    s = problem.integrals
    n_orb = s.n_orb
    n_qubits = 2 * n_orb
    if n_qubits > 12:
        raise SizeLimit("UCC compilation capped at 12 qubits")
    params = np.asarray(params, dtype=float).ravel()
    if params.size != problem.n_params:
        raise InvalidParams(
            f"expected {problem.n_params} parameters, got {params.size}"
        )
    gates = []
    n_occ = s.n_elec // 2
    occupied = list(range(n_occ)) + [n_orb + i for i in range(n_occ)]
    for so in occupied:
        gates.append(Gate("X", (n_qubits - 1 - so,)))
    for ex, pid in zip(problem.ex_ops, problem.param_ids):
        theta = float(params[pid])
        half = len(ex) // 2
        terms = {
            tuple((i, True) for i in ex[:half])
            + tuple((i, False) for i in ex[half:]): 1.0
        }
        g_op = FermionOperator(n_qubits, terms)
        generator = jordan_wigner(g_op - g_op.hermitian_conjugate())
        for term, coeff in sorted(generator.terms.items()):
            if abs(coeff) < 1e-14:
                continue
            # coeff is purely imaginary: G = sum_k i*beta_k P_k, and
            # e^{theta*i*beta*P} = PAULI_ROT(P, -2*theta*beta)
            beta = coeff.imag
            qubits = tuple(q for q, _ in term)
            pauli = "".join(letter for _, letter in term)
            gates.append(Gate("PAULI_ROT", qubits,
                              angle=-2.0 * theta * beta, pauli=pauli))
    return Circuit(n_qubits=n_qubits, gates=gates, n_params=0)
