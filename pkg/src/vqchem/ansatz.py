"""Ansatz construction: spin-adapted singles/doubles, generalized paired
layers, pair-restricted doubles, MP2-based initialization and screening, and
adaptive ansatz growth.

Excitation tuples use the package-wide spin-orbital convention (beta
0..N-1, alpha N..2N-1), creation indices first.  Parameter sharing follows
exact alpha/beta mirror symmetry: operators that map onto each other under a
global spin flip carry the same parameter, which keeps the optimized state an
eigenstate of total spin at closed shell.

The pair-restricted ("hard-core boson") ansatz gets a dedicated reduced space
here: one occupation bit per spatial orbital, dimension C(n_orb, n_elec/2).
Pair hops carry no fermionic signs, so the reduced treatment is exact for
seniority-zero states and matches the same excitations applied in the full
determinant space.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from weakref import WeakKeyDictionary

import numpy as np
from scipy.sparse import csr_matrix

from .civector import (
    CISpace,
    CIVector,
    _occupation_strings,
    apply_hamiltonian,
    civector_to_statevector,
    energy_and_gradient,
    make_ci_space,
    ucc_state,
)
from .errors import InvalidExcitation, InvalidParamMap, ParseError
from .integrals import IntegralSet, MP2Result, hf_energy, mp2
from .operators import QubitOperator


# ---------------------------------------------------------------------------
# Problem container
# ---------------------------------------------------------------------------

@dataclass
class UCCProblem:
    """A concrete variational problem: integrals plus an excitation list with
    its parameter mapping and starting point."""

    integrals: IntegralSet
    ex_ops: list
    param_ids: list
    init_guess: np.ndarray
    hard_core_boson: bool = False

    def __post_init__(self):
        self.ex_ops = [tuple(int(i) for i in ex) for ex in self.ex_ops]
        self.param_ids = [int(i) for i in self.param_ids]
        self.init_guess = np.asarray(self.init_guess, dtype=np.float64).ravel()
        if len(self.ex_ops) != len(self.param_ids):
            raise InvalidParamMap(
                f"{len(self.ex_ops)} excitations, {len(self.param_ids)} ids"
            )
        if self.param_ids and set(self.param_ids) != set(range(self.n_params)):
            raise InvalidParamMap(
                "param_ids must cover 0..n_params-1 with no gaps"
            )
        if self.hard_core_boson:
            n = self.integrals.n_orb
            for ex in self.ex_ops:
                _paired_orbitals(ex, n)

    @property
    def n_params(self) -> int:
        return len(self.init_guess)

    @property
    def n_qubits(self) -> int:
        n = self.integrals.n_orb
        return n if self.hard_core_boson else 2 * n


def _paired_orbitals(ex, n_orb: int) -> tuple[int, int]:
    """Decompose a pair excitation (p+N, p, q, q+N) into spatial (p, q)."""
    if len(ex) == 4:
        c0, c1, a0, a1 = ex
        if (c0 == c1 + n_orb and a1 == a0 + n_orb
                and 0 <= c1 < n_orb and 0 <= a0 < n_orb and c1 != a0):
            return c1, a0
    raise InvalidExcitation(
        f"{ex} is not a paired double (p+N, p, q, q+N)"
    )


# ---------------------------------------------------------------------------
# Excitation generators
# ---------------------------------------------------------------------------

def generate_uccsd(n_orb: int, n_elec: int):
    """All spin-adapted singles and doubles from occupied to virtual
    orbitals.  Alpha/beta mirror images share a parameter; doubles follow the
    singles so they act last on the reference."""
    no = n_elec // 2
    occ = range(no)
    virt = range(no, n_orb)
    ex_ops: list = []
    param_ids: list = []
    pid = -1

    for i in occ:
        for a in virt:
            pid += 1
            ex_ops.append((a + n_orb, i + n_orb))
            param_ids.append(pid)
            ex_ops.append((a, i))
            param_ids.append(pid)

    # Mixed-spin doubles: beta (i -> a) together with alpha (j -> b).  The
    # operator obtained by exchanging the two spin labels shares the
    # parameter, so enumerate unordered pairs of (occupied, virtual) moves.
    moves = [(i, a) for i in occ for a in virt]
    for m1 in range(len(moves)):
        i, a = moves[m1]
        for m2 in range(m1, len(moves)):
            j, b = moves[m2]
            pid += 1
            ex_ops.append((a, b + n_orb, j + n_orb, i))
            param_ids.append(pid)
            if m2 != m1:
                ex_ops.append((b, a + n_orb, i + n_orb, j))
                param_ids.append(pid)

    # Same-spin doubles: i<j to a<b within one sector; the two sectors share.
    for i in occ:
        for j in range(i + 1, no):
            for a in virt:
                for b in range(a + 1, n_orb):
                    pid += 1
                    ex_ops.append((a + n_orb, b + n_orb, j + n_orb, i + n_orb))
                    param_ids.append(pid)
                    ex_ops.append((a, b, j, i))
                    param_ids.append(pid)
    return ex_ops, param_ids


def generate_kupccgsd(n_orb: int, n_elec: int, k: int):
    """k layers of generalized singles (all orbital pairs, spin mirrors
    shared) followed by generalized paired doubles (all spatial pairs);
    parameters are independent across layers."""
    if k < 1:
        raise ValueError(f"layer count k must be >= 1, got {k}")
    ex_ops: list = []
    param_ids: list = []
    pid = -1
    for _ in range(k):
        for q in range(n_orb):
            for p in range(q + 1, n_orb):
                pid += 1
                ex_ops.append((p + n_orb, q + n_orb))
                param_ids.append(pid)
                ex_ops.append((p, q))
                param_ids.append(pid)
        for q in range(n_orb):
            for p in range(q + 1, n_orb):
                pid += 1
                ex_ops.append((p + n_orb, p, q, q + n_orb))
                param_ids.append(pid)
    return ex_ops, param_ids


def generate_puccd(n_orb: int, n_elec: int):
    """Pair-restricted doubles: both spins of an occupied orbital move
    together to a virtual orbital; every pair gets its own parameter."""
    no = n_elec // 2
    ex_ops = [
        (a + n_orb, a, i, i + n_orb)
        for i in range(no)
        for a in range(no, n_orb)
    ]
    return ex_ops, list(range(len(ex_ops)))


# ---------------------------------------------------------------------------
# MP2 initialization, screening, sorting
# ---------------------------------------------------------------------------

def _double_t2_amplitude(ex, n_orb: int, no: int, t2: np.ndarray) -> float:
    """The MP2 amplitude matching a double-excitation tuple."""
    creations, annihilations = ex[:2], ex[2:]

    def split(idx):
        return (idx - n_orb, 1) if idx >= n_orb else (idx, 0)

    cre = [split(i) for i in creations]
    ann = [split(i) for i in annihilations]
    cre_by_spin = {s: p for p, s in cre}
    ann_by_spin = {s: p for p, s in ann}
    if set(s for _, s in cre) == {0, 1}:
        # one move per spin sector: beta i->a with alpha j->b
        i, a = ann_by_spin[0], cre_by_spin[0]
        j, b = ann_by_spin[1], cre_by_spin[1]
        return float(t2[i, j, a - no, b - no])
    # both moves in one sector: antisymmetrized amplitude
    (a, _), (b, _) = cre
    (j, _), (i, _) = ann
    return float(t2[i, j, a - no, b - no] - t2[i, j, b - no, a - no])


def mp2_initialize(problem: UCCProblem, t2: MP2Result,
                   screen_eps: float = 1e-8, sort: bool = True) -> UCCProblem:
    """Initialize doubles from their MP2 amplitudes (singles start at zero),
    drop doubles whose amplitude is below ``screen_eps``, optionally order
    the surviving doubles by descending amplitude magnitude, and recompact
    the parameter ids."""
    s = problem.integrals
    n_orb, no = s.n_orb, s.n_occ
    amps = t2.t2

    old_groups: dict[int, list] = {}
    for ex, pid in zip(problem.ex_ops, problem.param_ids):
        old_groups.setdefault(pid, []).append(ex)

    singles: list[tuple[list, float]] = []
    doubles: list[tuple[list, float]] = []
    for pid in sorted(old_groups):
        ops = old_groups[pid]
        if len(ops[0]) == 2:
            singles.append((ops, 0.0))
            continue
        guess = _double_t2_amplitude(ops[0], n_orb, no, amps)
        if abs(guess) < screen_eps:
            continue
        doubles.append((ops, guess))
    if sort:
        doubles.sort(key=lambda item: -abs(item[1]))

    ex_ops: list = []
    param_ids: list = []
    init: list = []
    for ops, guess in singles + doubles:
        pid = len(init)
        init.append(guess)
        for ex in ops:
            ex_ops.append(ex)
            param_ids.append(pid)
    return UCCProblem(
        integrals=s,
        ex_ops=ex_ops,
        param_ids=param_ids,
        init_guess=np.array(init),
        hard_core_boson=problem.hard_core_boson,
    )


def make_uccsd_problem(s: IntegralSet, screen_eps: float = 1e-8,
                       sort: bool = True) -> UCCProblem:
    ex_ops, param_ids = generate_uccsd(s.n_orb, s.n_elec)
    raw = UCCProblem(s, ex_ops, param_ids,
                     np.zeros(max(param_ids) + 1 if param_ids else 0))
    return mp2_initialize(raw, mp2(s), screen_eps=screen_eps, sort=sort)


def make_kupccgsd_problem(s: IntegralSet, k: int = 1,
                          seed: int = 0) -> UCCProblem:
    """Zeros plus small uniform noise (1e-2) as the starting point, to move
    the generalized singles off the mean-field stationary point."""
    ex_ops, param_ids = generate_kupccgsd(s.n_orb, s.n_elec, k)
    n_params = max(param_ids) + 1
    rng = np.random.default_rng(seed)
    init = rng.uniform(-1e-2, 1e-2, size=n_params)
    return UCCProblem(s, ex_ops, param_ids, init)


def make_puccd_problem(s: IntegralSet) -> UCCProblem:
    ex_ops, param_ids = generate_puccd(s.n_orb, s.n_elec)
    raw = UCCProblem(s, ex_ops, param_ids, np.zeros(len(ex_ops)),
                     hard_core_boson=True)
    return mp2_initialize(raw, mp2(s), screen_eps=0.0, sort=False)


# ---------------------------------------------------------------------------
# Hard-core-boson (pair-restricted) space and engine
# ---------------------------------------------------------------------------

class PairedSpace:
    """Occupation space of electron pairs: one bit per spatial orbital,
    C(n_orb, n_elec/2) configurations, no fermionic signs."""

    def __init__(self, n_orb: int, n_pairs: int):
        self.n_orb = int(n_orb)
        self.n_pairs = int(n_pairs)
        self.strings = _occupation_strings(self.n_orb, self.n_pairs)
        self._hop_cache: dict = {}
        self._matrix_cache: WeakKeyDictionary = WeakKeyDictionary()

    @property
    def dim(self) -> int:
        return len(self.strings)

    def __repr__(self):
        return (f"PairedSpace(n_orb={self.n_orb}, n_pairs={self.n_pairs}, "
                f"dim={self.dim})")


def make_paired_space(n_orb: int, n_elec: int) -> PairedSpace:
    return PairedSpace(n_orb, n_elec // 2)


def paired_hf_vector(space: PairedSpace) -> np.ndarray:
    v = np.zeros(space.dim)
    v[0] = 1.0
    return v


def _paired_hop(space: PairedSpace, p: int, q: int):
    """(rows, cols) of the pair hop q -> p; amplitude +1, no signs."""
    key = (p, q)
    if key not in space._hop_cache:
        S = space.strings
        bit_p, bit_q = np.uint64(1 << p), np.uint64(1 << q)
        alive = ((S & bit_q) != 0) & ((S & bit_p) == 0)
        src = np.nonzero(alive)[0]
        tgt = np.searchsorted(S, S[src] ^ bit_p ^ bit_q)
        space._hop_cache[key] = (tgt.astype(np.int64), src.astype(np.int64))
    return space._hop_cache[key]


def _paired_generator(space: PairedSpace, p: int, q: int):
    """Sparse matrix of b+_p b_q - b+_q b_p."""
    key = ("G", p, q)
    mat = space._hop_cache.get(key)
    if mat is None:
        r1, c1 = _paired_hop(space, p, q)
        r2, c2 = _paired_hop(space, q, p)
        data = np.concatenate([np.ones(len(r1)), -np.ones(len(r2))])
        mat = csr_matrix(
            (data, (np.concatenate([r1, r2]), np.concatenate([c1, c2]))),
            shape=(space.dim, space.dim),
        )
        space._hop_cache[key] = mat
    return mat


def _paired_factor(space: PairedSpace, v: np.ndarray, p: int, q: int,
                   theta: float) -> np.ndarray:
    g = _paired_generator(space, p, q)
    gv = g.dot(v)
    return v + np.sin(theta) * gv + (1.0 - np.cos(theta)) * g.dot(gv)


def paired_hamiltonian_matrix(space: PairedSpace, s: IntegralSet) -> csr_matrix:
    """Pair-space Hamiltonian: diagonal = closed-shell determinant energy,
    off-diagonal pair hop q -> p with amplitude (pq|pq)."""
    mat = space._matrix_cache.get(s)
    if mat is not None:
        return mat
    n = space.n_orb
    occ = np.zeros((space.dim, n))
    for p in range(n):
        occ[:, p] = (space.strings >> np.uint64(p)) & np.uint64(1)
    j_mat = np.einsum("ppqq->pq", s.int2e)
    k_mat = np.einsum("pqqp->pq", s.int2e)
    diag = (occ @ (2.0 * np.diag(s.int1e))
            + np.einsum("ip,pq,iq->i", occ, 2.0 * j_mat - k_mat, occ)
            + s.e_core)
    rows = [np.arange(space.dim)]
    cols = [np.arange(space.dim)]
    data = [diag]
    for p in range(n):
        for q in range(n):
            if p == q or abs(k_mat[p, q]) < 1e-14:
                continue
            r, c = _paired_hop(space, p, q)
            rows.append(r)
            cols.append(c)
            data.append(np.full(len(r), k_mat[p, q]))
    mat = csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(space.dim, space.dim),
    )
    space._matrix_cache[s] = mat
    return mat


def build_puccd_hamiltonian(s: IntegralSet) -> QubitOperator:
    """Pair-space Hamiltonian as an operator over n_orb qubits (qubit q
    hosts spatial orbital n_orb-1-q, |1> = orbital doubly occupied):

        e_core + sum_p (2 h_pp + (pp|pp)) n_p
               + sum_{p<q} (pq|pq) (X_p X_q + Y_p Y_q)/2
               + sum_{p<q} (2(pp|qq) - (pq|pq)) 2 n_p n_q
    """
    n = s.n_orb
    qb = lambda p: n - 1 - p
    terms: dict = {(): float(s.e_core)}

    def add(key, val):
        terms[key] = terms.get(key, 0.0) + val

    for p in range(n):
        c_p = 2.0 * s.int1e[p, p] + s.int2e[p, p, p, p]
        add((), 0.5 * c_p)
        add(((qb(p), "Z"),), -0.5 * c_p)
    for p in range(n):
        for q in range(p + 1, n):
            v = s.int2e[p, q, p, q]
            w = 2.0 * s.int2e[p, p, q, q] - v
            i, j = sorted((qb(p), qb(q)))
            add((), 0.5 * w)
            add(((i, "Z"),), -0.5 * w)
            add(((j, "Z"),), -0.5 * w)
            add(((i, "Z"), (j, "Z")), 0.5 * w)
            add(((i, "X"), (j, "X")), 0.5 * v)
            add(((i, "Y"), (j, "Y")), 0.5 * v)
    return QubitOperator(n, terms).simplify()


def paired_state(space: PairedSpace, ex_ops, params, param_ids) -> np.ndarray:
    v = paired_hf_vector(space)
    params = np.asarray(params, dtype=float)
    for ex, pid in zip(ex_ops, param_ids):
        p, q = _paired_orbitals(ex, space.n_orb)
        v = _paired_factor(space, v, p, q, params[pid])
    return v


def paired_energy_and_gradient(space: PairedSpace, ex_ops, params, param_ids,
                               s: IntegralSet):
    params = np.asarray(params, dtype=float)
    h = paired_hamiltonian_matrix(space, s)
    ket = paired_state(space, ex_ops, params, param_ids)
    bra = h.dot(ket)
    e = float(np.dot(ket, bra))
    grad = np.zeros(len(params))
    pairs = [_paired_orbitals(ex, space.n_orb) for ex in ex_ops]
    for (p, q), pid in zip(reversed(pairs), reversed(list(param_ids))):
        theta = params[pid]
        g = _paired_generator(space, p, q)
        grad[pid] += 2.0 * float(np.dot(bra, g.dot(ket)))
        ket = _paired_factor(space, ket, p, q, -theta)
        bra = _paired_factor(space, bra, p, q, -theta)
    return e, grad


# ---------------------------------------------------------------------------
# Problem-level dispatch (full determinant space vs paired space)
# ---------------------------------------------------------------------------

def problem_space(problem: UCCProblem):
    s = problem.integrals
    if problem.hard_core_boson:
        return make_paired_space(s.n_orb, s.n_elec)
    return make_ci_space(s.n_orb, s.n_elec)


_SPACE_CACHE: dict = {}


def _cached_space(problem: UCCProblem):
    key = (problem.integrals.n_orb, problem.integrals.n_elec,
           problem.hard_core_boson)
    space = _SPACE_CACHE.get(key)
    if space is None:
        space = problem_space(problem)
        _SPACE_CACHE[key] = space
    return space


def problem_energy_and_gradient(problem: UCCProblem, params):
    space = _cached_space(problem)
    if problem.hard_core_boson:
        return paired_energy_and_gradient(
            space, problem.ex_ops, params, problem.param_ids,
            problem.integrals)
    return energy_and_gradient(space, problem.ex_ops, params,
                               problem.param_ids, problem.integrals)


def problem_civector(problem: UCCProblem, params):
    """The prepared state in the full determinant space (paired problems are
    expanded through their fermionic excitations, which is exact)."""
    space = make_ci_space(problem.integrals.n_orb, problem.integrals.n_elec)
    return ucc_state(space, problem.ex_ops, params, problem.param_ids)


def problem_statevector(problem: UCCProblem, params) -> np.ndarray:
    v = problem_civector(problem, params)
    return civector_to_statevector(v.space, v)


# ---------------------------------------------------------------------------
# Operator pool and adaptive ansatz growth
# ---------------------------------------------------------------------------

@dataclass
class OperatorPool:
    """Candidate excitations for adaptive growth, grouped so that every
    group shares one parameter (spin mirrors stay together, which keeps the
    grown state spin-pure)."""

    groups: list

    def __post_init__(self):
        if any(len(g) == 0 for g in self.groups):
            raise InvalidExcitation("operator pool contains an empty group")


def build_operator_pool(n_orb: int, n_elec: int) -> OperatorPool:
    ex_ops, param_ids = generate_uccsd(n_orb, n_elec)
    groups: dict[int, list] = {}
    for ex, pid in zip(ex_ops, param_ids):
        groups.setdefault(pid, []).append(ex)
    return OperatorPool([groups[pid] for pid in sorted(groups)])


def adapt_vqe(s: IntegralSet, pool: OperatorPool, epsilon: float,
              max_iter: int = 50):
    """Grow the ansatz one pool group at a time, always taking the group
    with the largest energy-gradient magnitude, re-optimizing after each
    addition with a warm start. Stops when the 2-norm of the group-gradient
    vector drops below ``epsilon``.

    Returns the grown problem (init_guess = final optimum) and the energy
    after each optimization, starting with the bare reference energy.
    """
    from .vqe import kernel  # deferred to avoid a module cycle

    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    space = make_ci_space(s.n_orb, s.n_elec)
    ex_ops: list = []
    param_ids: list = []
    params = np.zeros(0)
    trajectory = [hf_energy(s)]

    for _ in range(max_iter):
        psi = ucc_state(space, ex_ops, params, param_ids)
        h_psi = apply_hamiltonian(space, psi, s).amplitudes
        grads = np.array([
            sum(
                2.0 * float(np.dot(h_psi, _generator_action(space, psi, ex)))
                for ex in group
            )
            for group in pool.groups
        ])
        if np.linalg.norm(grads) < epsilon:
            break
        best = int(np.argmax(np.abs(grads)))
        new_pid = len(params)
        for ex in pool.groups[best]:
            ex_ops.append(ex)
            param_ids.append(new_pid)
        problem = UCCProblem(s, ex_ops, param_ids,
                             np.concatenate([params, [0.0]]))
        result = kernel(problem)
        params = result.x
        trajectory.append(result.e)

    problem = UCCProblem(s, ex_ops, param_ids, params)
    return problem, trajectory


def _generator_action(space: CISpace, psi: CIVector, ex) -> np.ndarray:
    from .civector import apply_excitation

    return apply_excitation(space, psi, ex).amplitudes


# ---------------------------------------------------------------------------
# Ansatz file round trip
# ---------------------------------------------------------------------------

def save_ansatz(path, problem: UCCProblem) -> None:
    """One line per excitation: ``param_id (p,q[,r,s]) init_guess``."""
    lines = []
    for ex, pid in zip(problem.ex_ops, problem.param_ids):
        tup = ",".join(str(i) for i in ex)
        lines.append(f"{pid} ({tup}) {float(problem.init_guess[pid])!r}")
    Path(path).write_text("\n".join(lines) + "\n")


def load_ansatz(path, s: IntegralSet,
                hard_core_boson: bool = False) -> UCCProblem:
    ex_ops: list = []
    param_ids: list = []
    guesses: dict[int, float] = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3 or not (parts[1].startswith("(")
                                   and parts[1].endswith(")")):
            raise ParseError(f"line {lineno}: expected 'id (tuple) guess'")
        try:
            pid = int(parts[0])
            ex = tuple(int(t) for t in parts[1][1:-1].split(",") if t)
            guess = float(parts[2])
        except ValueError as exc:
            raise ParseError(f"line {lineno}: bad field") from exc
        ex_ops.append(ex)
        param_ids.append(pid)
        if pid in guesses and guesses[pid] != guess:
            raise ParseError(
                f"line {lineno}: conflicting init guesses for parameter {pid}"
            )
        guesses[pid] = guess
    n_params = max(guesses) + 1 if guesses else 0
    init = np.zeros(n_params)
    for pid, guess in guesses.items():
        init[pid] = guess
    return UCCProblem(s, ex_ops, param_ids, init,
                      hard_core_boson=hard_core_boson)
