"""Exact unitary coupled-cluster simulation in the particle-number-conserving
configuration-interaction space.

Determinants are pairs of occupation bitmasks (alpha string, beta string),
bit ``p`` meaning spatial orbital ``p`` is occupied in that spin sector.
Strings are sorted ascending as integers and a CI vector stores the real
amplitude of determinant ``(ia, ib)`` at position ``ia * n_strings_beta + ib``.

Spin-orbital indices follow the package-wide convention: beta spin-orbitals
are ``0..n_orb-1``, alpha spin-orbitals are ``n_orb..2*n_orb-1``.  A
determinant is the product of creation operators in ascending spin-orbital
order applied to the vacuum; fermionic signs are the parity of occupied
spin-orbitals below the index an operator acts on.  This matches the
Jordan-Wigner convention of :mod:`vqchem.operators`, which tests verify by
embedding CI vectors into statevectors.

All public functions are pure: they never mutate their inputs, so vectors and
spaces can be shared freely across threads.  Internal caches (compiled
excitation actions, sparse Hamiltonians) are keyed by object identity and
only ever append.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from itertools import combinations
from math import comb
from pathlib import Path
from weakref import WeakKeyDictionary

import numpy as np
from scipy.sparse import csr_matrix

from .errors import (
    InvalidExcitation,
    InvalidParamMap,
    SizeLimit,
    SolverFailed,
    UnsupportedOpenShell,
    ZeroState,
)
from .integrals import IntegralSet, build_fermion_hamiltonian

_COEFF_CUTOFF = 1e-12
# Below this dimension the Hamiltonian is materialized once as a sparse
# matrix in CI space and reused; above it every application streams through
# the integral terms.
_SPARSE_HAMILTONIAN_LIMIT = 65536
_SPARSE_EXCITATION_LIMIT = 1_000_000
_DENSE_DIRECT_LIMIT = 400
_DENSE_FALLBACK_LIMIT = 4000
_ITERATIVE_LIMIT = 1_000_000


class CISpace:
    """Closed-shell determinant space for ``n_elec`` electrons in ``n_orb``
    spatial orbitals; ``C(n_orb, n_elec/2)**2`` determinants."""

    def __init__(self, n_orb: int, n_elec: int):
        if n_elec % 2 != 0:
            raise UnsupportedOpenShell("n_elec must be even for this space")
        if not 0 <= n_elec <= 2 * n_orb:
            raise UnsupportedOpenShell(
                f"n_elec={n_elec} impossible for n_orb={n_orb}"
            )
        self.n_orb = int(n_orb)
        self.n_alpha = n_elec // 2
        self.n_beta = n_elec // 2
        strings = _occupation_strings(self.n_orb, self.n_alpha)
        self.alpha_strings = strings
        self.beta_strings = strings
        self.string_index = {int(m): i for i, m in enumerate(strings)}
        self._action_cache: dict = {}
        self._matrix_cache: WeakKeyDictionary = WeakKeyDictionary()

    @property
    def n_elec(self) -> int:
        return self.n_alpha + self.n_beta

    @property
    def n_strings_alpha(self) -> int:
        return len(self.alpha_strings)

    @property
    def n_strings_beta(self) -> int:
        return len(self.beta_strings)

    @property
    def dim(self) -> int:
        return self.n_strings_alpha * self.n_strings_beta

    def __repr__(self):
        return (f"CISpace(n_orb={self.n_orb}, n_elec={self.n_elec}, "
                f"dim={self.dim})")


def _occupation_strings(n_orb: int, n_occ: int) -> np.ndarray:
    masks = [
        sum(1 << p for p in occ)
        for occ in combinations(range(n_orb), n_occ)
    ]
    masks.sort()
    return np.array(masks, dtype=np.uint64)


def ci_space_dim(n_orb: int, n_elec: int) -> int:
    return comb(n_orb, n_elec // 2) ** 2


def make_ci_space(n_orb: int, n_elec: int) -> CISpace:
    return CISpace(n_orb, n_elec)


@dataclass
class CIVector:
    """Real amplitudes over the determinants of a :class:`CISpace`."""

    space: CISpace
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.asarray(self.amplitudes, dtype=np.float64).ravel()
        if amps.size != self.space.dim:
            raise ValueError(
                f"amplitude length {amps.size} != space dimension "
                f"{self.space.dim}"
            )
        self.amplitudes = amps

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def copy(self) -> "CIVector":
        return CIVector(self.space, self.amplitudes.copy())


def _amps(v) -> np.ndarray:
    if isinstance(v, CIVector):
        return v.amplitudes
    return np.asarray(v, dtype=np.float64).ravel()


def hf_vector(space: CISpace) -> CIVector:
    amps = np.zeros(space.dim)
    amps[0] = 1.0  # lowest-bitmask string = lowest orbitals occupied
    return CIVector(space, amps)


# ---------------------------------------------------------------------------
# Signed second-quantized actions on determinant strings
# ---------------------------------------------------------------------------

def _validate_excitation(space: CISpace, ex) -> tuple:
    ex = tuple(int(i) for i in ex)
    if len(ex) < 2 or len(ex) % 2 != 0:
        raise InvalidExcitation(f"tuple length must be even >= 2, got {ex}")
    n_so = 2 * space.n_orb
    half = len(ex) // 2
    creation, annihilation = ex[:half], ex[half:]
    for idx in ex:
        if not 0 <= idx < n_so:
            raise InvalidExcitation(f"index {idx} outside 0..{n_so - 1}")
    if len(set(creation)) != half or len(set(annihilation)) != half:
        raise InvalidExcitation(f"repeated index within a half of {ex}")
    n = space.n_orb
    for sector in (0, 1):
        nc = sum(1 for i in creation if (i >= n) == sector)
        na = sum(1 for i in annihilation if (i >= n) == sector)
        if nc != na:
            raise InvalidExcitation(
                f"{ex} changes the particle count of a spin sector"
            )
    return ex


def _sector_action(strings: np.ndarray, ops: tuple):
    """Apply a product of ladder operators (left-to-right order, applied
    right-to-left) to every string; return (alive, target_pos, sign)."""
    S = strings.copy()
    alive = np.ones(len(S), dtype=bool)
    parity = np.zeros(len(S), dtype=np.uint64)
    for p, creation in reversed(ops):
        bit = np.uint64(1 << p)
        below = np.uint64((1 << p) - 1)
        occupied = (S & bit) != 0
        alive &= ~occupied if creation else occupied
        parity += np.bitwise_count(S & below)
        S ^= bit
    sign = 1.0 - 2.0 * (parity & np.uint64(1)).astype(np.float64)
    target = np.searchsorted(strings, S).astype(np.int64)
    np.clip(target, 0, len(strings) - 1, out=target)
    return alive, target, sign


def _term_table(space: CISpace, term: tuple):
    """Compile one spin-orbital ladder string into (rows, cols, signs) of its
    CI-space matrix.  ``term`` is ``((index, is_creation), ...)`` left-to-right.
    Returns None when the term kills the whole space."""
    cached = space._action_cache.get(term)
    if cached is not None or term in space._action_cache:
        return cached

    n = space.n_orb
    alpha_ops, beta_ops = [], []
    for idx, creation in term:
        if idx >= n:
            alpha_ops.append((idx - n, creation))
        else:
            beta_ops.append((idx, creation))
    # Count (beta-op before alpha-op) pairs for the sector reordering sign.
    seen_beta = 0
    pairs = 0
    for idx, _ in term:
        if idx < n:
            seen_beta += 1
        else:
            pairs += seen_beta
    base_sign = -1.0 if pairs % 2 else 1.0
    if (space.n_beta * len(alpha_ops)) % 2:
        base_sign = -base_sign

    alive_a, tgt_a, sign_a = _sector_action(space.alpha_strings, tuple(alpha_ops))
    alive_b, tgt_b, sign_b = _sector_action(space.beta_strings, tuple(beta_ops))
    src_a = np.nonzero(alive_a)[0]
    src_b = np.nonzero(alive_b)[0]
    if len(src_a) == 0 or len(src_b) == 0:
        space._action_cache[term] = None
        return None
    nb = space.n_strings_beta
    rows = (tgt_a[src_a, None] * nb + tgt_b[None, src_b]).ravel()
    cols = (src_a[:, None] * nb + src_b[None, :]).ravel()
    signs = (base_sign * sign_a[src_a, None] * sign_b[None, src_b]).ravel()
    table = (rows, cols, signs)
    space._action_cache[term] = table
    return table


def _apply_term(space: CISpace, amps: np.ndarray, term: tuple,
                coeff: float, out: np.ndarray) -> None:
    table = _term_table(space, term)
    if table is None:
        return
    rows, cols, signs = table
    # rows are unique within one term (the action is a partial permutation)
    out[rows] += coeff * signs * amps[cols]


def _excitation_terms(ex: tuple):
    """The ladder strings of g and g-dagger for an excitation tuple."""
    half = len(ex) // 2
    g = tuple((i, True) for i in ex[:half]) + tuple(
        (i, False) for i in ex[half:])
    g_dag = tuple((i, True) for i in reversed(ex[half:])) + tuple(
        (i, False) for i in reversed(ex[:half]))
    return g, g_dag


def _generator_matrix(space: CISpace, ex: tuple):
    """Sparse CI-space matrix of G = g - g-dagger, cached per space."""
    key = ("G", ex)
    mat = space._action_cache.get(key)
    if mat is not None or key in space._action_cache:
        return mat
    g, g_dag = _excitation_terms(ex)
    rows, cols, data = [], [], []
    for term, fac in ((g, 1.0), (g_dag, -1.0)):
        table = _term_table(space, term)
        if table is None:
            continue
        r, c, s = table
        rows.append(r)
        cols.append(c)
        data.append(fac * s)
    if not rows:
        mat = None
    else:
        mat = csr_matrix(
            (np.concatenate(data),
             (np.concatenate(rows), np.concatenate(cols))),
            shape=(space.dim, space.dim),
        )
    space._action_cache[key] = mat
    return mat


def _apply_generator(space: CISpace, amps: np.ndarray, ex: tuple) -> np.ndarray:
    if space.dim <= _SPARSE_EXCITATION_LIMIT:
        mat = _generator_matrix(space, ex)
        if mat is None:
            return np.zeros_like(amps)
        return mat.dot(amps)
    out = np.zeros_like(amps)
    g, g_dag = _excitation_terms(ex)
    _apply_term(space, amps, g, 1.0, out)
    _apply_term(space, amps, g_dag, -1.0, out)
    return out


def apply_excitation(space: CISpace, v, ex) -> CIVector:
    """Apply the anti-Hermitian generator G = g - g-dagger of the excitation
    tuple ``ex`` (creation indices first, annihilation indices last)."""
    ex = _validate_excitation(space, ex)
    return CIVector(space, _apply_generator(space, _amps(v), ex))


def apply_ucc_factor(space: CISpace, v, ex, theta: float) -> CIVector:
    """Apply e^{theta*G} via the closed-form three-term polynomial
    v + sin(theta)*Gv + (1-cos(theta))*G(Gv), exact because G^3 = -G."""
    ex = _validate_excitation(space, ex)
    amps = _amps(v)
    gv = _apply_generator(space, amps, ex)
    ggv = _apply_generator(space, gv, ex)
    out = amps + np.sin(theta) * gv + (1.0 - np.cos(theta)) * ggv
    return CIVector(space, out)


def _ucc_factor_inplace(space: CISpace, amps: np.ndarray, ex: tuple,
                        theta: float, gv: np.ndarray | None = None) -> np.ndarray:
    if gv is None:
        gv = _apply_generator(space, amps, ex)
    ggv = _apply_generator(space, gv, ex)
    return amps + np.sin(theta) * gv + (1.0 - np.cos(theta)) * ggv


# ---------------------------------------------------------------------------
# Hamiltonian application
# ---------------------------------------------------------------------------

_HAMILTONIAN_TERMS: WeakKeyDictionary = WeakKeyDictionary()


def _hamiltonian_terms(s: IntegralSet):
    cached = _HAMILTONIAN_TERMS.get(s)
    if cached is None:
        op = build_fermion_hamiltonian(s)
        cached = [
            (term, float(coeff))
            for term, coeff in op.terms.items()
            if term and abs(coeff) > _COEFF_CUTOFF
        ]
        _HAMILTONIAN_TERMS[s] = cached
    return cached


def _hamiltonian_matrix(space: CISpace, s: IntegralSet):
    """Sparse (H - e_core) in CI space, cached; None above the size limit."""
    if space.dim > _SPARSE_HAMILTONIAN_LIMIT:
        return None
    cache = space._matrix_cache
    mat = cache.get(s)
    if mat is None:
        rows, cols, data = [], [], []
        for term, coeff in _hamiltonian_terms(s):
            table = _term_table(space, term)
            if table is None:
                continue
            r, c, sg = table
            rows.append(r)
            cols.append(c)
            data.append(coeff * sg)
        if rows:
            mat = csr_matrix(
                (np.concatenate(data),
                 (np.concatenate(rows), np.concatenate(cols))),
                shape=(space.dim, space.dim),
            )
        else:
            mat = csr_matrix((space.dim, space.dim))
        cache[s] = mat
    return mat


def apply_hamiltonian(space: CISpace, v, s: IntegralSet) -> CIVector:
    """H v, including the constant core energy."""
    amps = _amps(v)
    mat = _hamiltonian_matrix(space, s)
    if mat is not None:
        out = mat.dot(amps)
    else:
        out = np.zeros_like(amps)
        for term, coeff in _hamiltonian_terms(s):
            _apply_term(space, amps, term, coeff, out)
    if s.e_core != 0.0:
        out = out + s.e_core * amps
    return CIVector(space, out)


def hamiltonian_diagonal(space: CISpace, s: IntegralSet) -> np.ndarray:
    """<D|H|D> for every determinant, via the factorized diagonal rule."""
    n = space.n_orb
    occ = np.zeros((space.n_strings_alpha, n))
    for p in range(n):
        occ[:, p] = (space.alpha_strings >> np.uint64(p)) & np.uint64(1)
    h_diag = np.diag(s.int1e)
    j_mat = np.einsum("ppqq->pq", s.int2e)
    k_mat = np.einsum("pqqp->pq", s.int2e)
    # same-spin energy of one string: sum h_pp + 1/2 sum_{p!=q} [(pp|qq)-(pq|qp)]
    jk = j_mat - k_mat
    np.fill_diagonal(jk, 0.0)
    e_same = occ @ h_diag + 0.5 * np.einsum("ip,pq,iq->i", occ, jk, occ)
    cross = occ @ j_mat @ occ.T  # alpha-beta Coulomb between string pairs
    diag = e_same[:, None] + e_same[None, :] + cross + s.e_core
    return diag.ravel()


def energy(space: CISpace, v, s: IntegralSet) -> float:
    amps = _amps(v)
    nrm2 = float(np.dot(amps, amps))
    if nrm2 == 0.0:
        raise ZeroState("cannot take the energy of the zero vector")
    hv = apply_hamiltonian(space, amps, s).amplitudes
    return float(np.dot(amps, hv) / nrm2)


# ---------------------------------------------------------------------------
# UCC states and gradients
# ---------------------------------------------------------------------------

def _check_param_map(ex_ops, params, param_ids):
    params = np.asarray(params, dtype=np.float64).ravel()
    ids = [int(i) for i in param_ids]
    if len(ex_ops) != len(ids):
        raise InvalidParamMap(
            f"{len(ex_ops)} excitations but {len(ids)} parameter ids"
        )
    for i in ids:
        if not 0 <= i < len(params):
            raise InvalidParamMap(
                f"parameter id {i} out of range for {len(params)} parameters"
            )
    return params, ids


def ucc_state(space: CISpace, ex_ops, params, param_ids,
              initial: CIVector | None = None) -> CIVector:
    """Apply the product of exponential factors e^{theta_k G_k} to the
    initial vector, first list entry acting first."""
    params, ids = _check_param_map(ex_ops, params, param_ids)
    ex_ops = [_validate_excitation(space, ex) for ex in ex_ops]
    amps = hf_vector(space).amplitudes if initial is None else _amps(initial).copy()
    for ex, pid in zip(ex_ops, ids):
        amps = _ucc_factor_inplace(space, amps, ex, params[pid])
    return CIVector(space, amps)


def energy_and_gradient(space: CISpace, ex_ops, params, param_ids,
                        s: IntegralSet, initial: CIVector | None = None):
    """Energy and analytic gradient of the UCC expectation value.

    Reverse sweep: keep a bra vector (starting at H|psi>) and a ket vector
    (starting at |psi>); peel one factor off both per step and read the
    gradient of factor j as 2 <bra| G_j |ket>.  Shared parameter ids sum
    their factor gradients.  Three working vectors regardless of depth.
    """
    params, ids = _check_param_map(ex_ops, params, param_ids)
    ex_ops = [_validate_excitation(space, ex) for ex in ex_ops]
    ket = ucc_state(space, ex_ops, params, ids, initial).amplitudes
    bra = apply_hamiltonian(space, ket, s).amplitudes
    e = float(np.dot(ket, bra))
    grad = np.zeros(len(params))
    for ex, pid in zip(reversed(ex_ops), reversed(ids)):
        theta = params[pid]
        g_ket = _apply_generator(space, ket, ex)
        grad[pid] += 2.0 * float(np.dot(bra, g_ket))
        ket = _ucc_factor_inplace(space, ket, ex, -theta, gv=g_ket)
        bra = _ucc_factor_inplace(space, bra, ex, -theta)
    return e, grad


# ---------------------------------------------------------------------------
# Reduced density matrices
# ---------------------------------------------------------------------------

def _single_replacement_vectors(space: CISpace, amps: np.ndarray) -> np.ndarray:
    """w[p*n+q] = (sum over spins of a+_p a_q) applied to amps."""
    n = space.n_orb
    w = np.zeros((n * n, space.dim))
    for p in range(n):
        for q in range(n):
            out = w[p * n + q]
            _apply_term(space, amps, ((p, True), (q, False)), 1.0, out)
            _apply_term(space, amps, ((p + n, True), (q + n, False)), 1.0, out)
    return w


def make_rdm1(space: CISpace, v) -> np.ndarray:
    """Spin-traced one-body density matrix gamma[p,q] = <a+_p a_q> summed
    over spin; trace equals n_elec for a normalized state."""
    amps = _amps(v)
    n = space.n_orb
    w = _single_replacement_vectors(space, amps)
    return (w @ amps).reshape(n, n)


def make_rdm2(space: CISpace, v) -> np.ndarray:
    """Spin-traced two-body density matrix in chemists' index order, defined
    so that  sum_pq h_pq rdm1_pq + 1/2 sum_pqrs (pq|rs) rdm2_pqrs + e_core
    reproduces the energy."""
    amps = _amps(v)
    n = space.n_orb
    w = _single_replacement_vectors(space, amps)
    rdm1 = (w @ amps).reshape(n, n)
    gram = w @ w.T  # gram[(q,p),(r,s)] = <E_qp E_rs> with E = sum_spin a+a
    rdm2 = gram.reshape(n, n, n, n).transpose(1, 0, 2, 3).copy()
    for q in range(n):
        rdm2[:, q, q, :] -= rdm1
    return rdm2


# ---------------------------------------------------------------------------
# FCI ground state
# ---------------------------------------------------------------------------

def _dense_ground_state(space: CISpace, s: IntegralSet):
    mat = _hamiltonian_matrix(space, s).toarray()
    if s.e_core != 0.0:
        mat = mat + s.e_core * np.eye(space.dim)
    vals, vecs = np.linalg.eigh(mat)
    return float(vals[0]), vecs[:, 0].copy()


def _davidson_ground_state(space: CISpace, s: IntegralSet,
                           tol: float = 1e-8, max_iter: int = 200,
                           max_subspace: int = 30):
    dim = space.dim
    diag = hamiltonian_diagonal(space, s)
    start = np.zeros(dim)
    start[int(np.argmin(diag))] = 1.0
    basis = [start]
    sigmas = []
    theta, ritz = None, start
    for _ in range(max_iter):
        while len(sigmas) < len(basis):
            sigmas.append(
                apply_hamiltonian(space, basis[len(sigmas)], s).amplitudes
            )
        k = len(basis)
        small = np.empty((k, k))
        for i in range(k):
            for j in range(i + 1):
                small[i, j] = small[j, i] = float(np.dot(basis[i], sigmas[j]))
        vals, vecs = np.linalg.eigh(small)
        theta = float(vals[0])
        coeff = vecs[:, 0]
        ritz = sum(c * b for c, b in zip(coeff, basis))
        h_ritz = sum(c * sg for c, sg in zip(coeff, sigmas))
        residual = h_ritz - theta * ritz
        if np.linalg.norm(residual) < tol:
            return theta, ritz / np.linalg.norm(ritz)
        if k >= max_subspace:
            basis, sigmas = [ritz / np.linalg.norm(ritz)], []
            continue
        denom = diag - theta
        denom[np.abs(denom) < 1e-8] = 1e-8
        correction = residual / denom
        for b in basis:  # modified Gram-Schmidt
            correction -= np.dot(b, correction) * b
        nrm = np.linalg.norm(correction)
        if nrm < 1e-12:
            correction = np.random.default_rng(k).standard_normal(dim)
            for b in basis:
                correction -= np.dot(b, correction) * b
            nrm = np.linalg.norm(correction)
        basis.append(correction / nrm)
    raise SolverFailed(
        f"Davidson iteration did not reach residual {tol} in {max_iter} steps"
    )


def fci_ground_state(space: CISpace, s: IntegralSet):
    """Lowest eigenpair of the Hamiltonian in the CI space."""
    dim = space.dim
    if dim > _ITERATIVE_LIMIT:
        raise SizeLimit(
            f"CI dimension {dim} exceeds the iterative solver limit "
            f"{_ITERATIVE_LIMIT}"
        )
    if dim <= _DENSE_DIRECT_LIMIT:
        e, vec = _dense_ground_state(space, s)
        return e, CIVector(space, vec)
    try:
        e, vec = _davidson_ground_state(space, s)
    except SolverFailed:
        if dim <= _DENSE_FALLBACK_LIMIT:
            e, vec = _dense_ground_state(space, s)
        else:
            raise
    return e, CIVector(space, vec)


# ---------------------------------------------------------------------------
# Statevector embedding and serialization
# ---------------------------------------------------------------------------

def civector_to_statevector(space: CISpace, v) -> np.ndarray:
    """Embed into the full 2^(2*n_orb) qubit statevector.

    Qubit q hosts spin-orbital (2*n_orb - 1 - q); qubit 0 is the most
    significant index bit.  A determinant lands at index
    (alpha_mask << n_orb) | beta_mask with sign +1, which is the
    Jordan-Wigner image of creation operators applied in ascending
    spin-orbital order.
    """
    n = space.n_orb
    if 2 * n > 24:
        raise SizeLimit(f"statevector for {2 * n} qubits exceeds the 24-qubit cap")
    amps = _amps(v)
    alpha_part = (space.alpha_strings.astype(np.int64) << n)
    beta_part = space.beta_strings.astype(np.int64)
    idx = (alpha_part[:, None] | beta_part[None, :]).ravel()
    out = np.zeros(1 << (2 * n), dtype=complex)
    out[idx] = amps
    return out


def statevector_to_civector(space: CISpace, statevector) -> CIVector:
    """Project a statevector onto the determinant space (inverse of
    :func:`civector_to_statevector` on its image)."""
    n = space.n_orb
    sv = np.asarray(statevector)
    if sv.size != 1 << (2 * n):
        raise ValueError("statevector length does not match the space")
    alpha_part = (space.alpha_strings.astype(np.int64) << n)
    beta_part = space.beta_strings.astype(np.int64)
    idx = (alpha_part[:, None] | beta_part[None, :]).ravel()
    return CIVector(space, np.real(sv[idx]))


def save_civector(path, v: CIVector) -> None:
    """Binary layout: little-endian int32 triple (n_orb, n_alpha, n_beta)
    then the amplitudes as little-endian float64."""
    space = v.space
    header = struct.pack("<3i", space.n_orb, space.n_alpha, space.n_beta)
    Path(path).write_bytes(
        header + v.amplitudes.astype("<f8").tobytes()
    )


def load_civector(path, space: CISpace | None = None) -> CIVector:
    raw = Path(path).read_bytes()
    n_orb, n_alpha, n_beta = struct.unpack("<3i", raw[:12])
    if space is None:
        space = make_ci_space(n_orb, n_alpha + n_beta)
    elif (space.n_orb, space.n_alpha, space.n_beta) != (n_orb, n_alpha, n_beta):
        raise ValueError("stored vector belongs to a different space")
    amps = np.frombuffer(raw[12:], dtype="<f8")
    return CIVector(space, amps.copy())
