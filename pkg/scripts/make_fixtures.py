#!/usr/bin/env python3
"""Generate the frozen FCIDUMP fixtures shipped under src/vqchem/data.

Self-contained electronic-structure mini-stack for hydrogen chains in a minimal
s-type Gaussian basis: closed-form one/two-electron integrals over contracted
s functions, a tightly converged RHF, and an MO-basis FCIDUMP writer.

This is a development tool; the package itself never imports it.  Run from the
repository root:

    python3 scripts/make_fixtures.py

The script hard-fails if the regenerated H2 integrals drift from the frozen
reference values baked into the test suite.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np
from scipy.special import erf

ANGSTROM_TO_BOHR = 1 / 0.52917721092

# STO-3G hydrogen: (exponent, contraction coefficient) for normalized primitives.
STO3G_H = [
    (3.42525091, 0.15432897),
    (0.62391373, 0.53532814),
    (0.16885540, 0.44463454),
]

DATA_DIR = Path(__file__).resolve().parent.parent / "src" / "vqchem" / "data"
TEST_DATA_DIR = Path(__file__).resolve().parent.parent / "tests" / "data"


def boys_f0(x: np.ndarray | float) -> np.ndarray | float:
    """Zeroth-order Boys function F0(x) = (1/2) sqrt(pi/x) erf(sqrt(x))."""
    x = np.asarray(x, dtype=float)
    small = x < 1e-14
    safe = np.where(small, 1.0, x)
    val = 0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe))
    return np.where(small, 1.0 - x / 3.0, val)


class SBasis:
    """Contracted s-type Gaussian basis over point centers."""

    def __init__(self, centers: np.ndarray, shells: list[list[tuple[float, float]]]):
        self.centers = np.asarray(centers, dtype=float)
        self.exps = []
        self.coefs = []
        for shell in shells:
            a = np.array([p[0] for p in shell])
            c = np.array([p[1] for p in shell]) * (2 * a / np.pi) ** 0.75
            # Renormalize the contracted function exactly.
            p = a[:, None] + a[None, :]
            s = (np.pi / p) ** 1.5
            norm2 = c @ s @ c
            self.coefs.append(c / np.sqrt(norm2))
            self.exps.append(a)
        self.n = len(shells)

    def overlap_kinetic(self) -> tuple[np.ndarray, np.ndarray]:
        n = self.n
        S = np.zeros((n, n))
        T = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ai, aj = self.exps[i][:, None], self.exps[j][None, :]
                cij = self.coefs[i][:, None] * self.coefs[j][None, :]
                p = ai + aj
                mu = ai * aj / p
                r2 = float(np.sum((self.centers[i] - self.centers[j]) ** 2))
                s = (np.pi / p) ** 1.5 * np.exp(-mu * r2)
                S[i, j] = np.sum(cij * s)
                T[i, j] = np.sum(cij * mu * (3 - 2 * mu * r2) * s)
        return S, T

    def nuclear(self, charges: np.ndarray, nuclei: np.ndarray) -> np.ndarray:
        n = self.n
        V = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                ai, aj = self.exps[i][:, None], self.exps[j][None, :]
                cij = self.coefs[i][:, None] * self.coefs[j][None, :]
                p = ai + aj
                mu = ai * aj / p
                Ri, Rj = self.centers[i], self.centers[j]
                r2 = float(np.sum((Ri - Rj) ** 2))
                K = np.exp(-mu * r2)
                P = (ai[..., None] * Ri + aj[..., None] * Rj) / p[..., None]
                acc = np.zeros_like(p)
                for Z, C in zip(charges, nuclei):
                    pc2 = np.sum((P - C) ** 2, axis=-1)
                    acc += -Z * (2 * np.pi / p) * K * boys_f0(p * pc2)
                V[i, j] = np.sum(cij * acc)
        return V

    def eri(self) -> np.ndarray:
        n = self.n
        out = np.zeros((n, n, n, n))
        # Contract primitives pairwise: for each basis pair, a list of
        # (exponent-sum p, weighted center P, prefactor c*K).
        pair_p, pair_P, pair_w = {}, {}, {}
        for i in range(n):
            for j in range(n):
                ai, aj = self.exps[i][:, None], self.exps[j][None, :]
                cij = self.coefs[i][:, None] * self.coefs[j][None, :]
                p = ai + aj
                mu = ai * aj / p
                Ri, Rj = self.centers[i], self.centers[j]
                r2 = float(np.sum((Ri - Rj) ** 2))
                P = (ai[..., None] * Ri + aj[..., None] * Rj) / p[..., None]
                pair_p[i, j] = p.ravel()
                pair_P[i, j] = P.reshape(-1, 3)
                pair_w[i, j] = (cij * np.exp(-mu * r2)).ravel()
        for i in range(n):
            for j in range(n):
                for k in range(n):
                    for l in range(n):
                        p = pair_p[i, j][:, None]
                        q = pair_p[k, l][None, :]
                        w = pair_w[i, j][:, None] * pair_w[k, l][None, :]
                        pq2 = np.sum(
                            (pair_P[i, j][:, None, :] - pair_P[k, l][None, :, :]) ** 2,
                            axis=-1,
                        )
                        pref = 2 * np.pi**2.5 / (p * q * np.sqrt(p + q))
                        out[i, j, k, l] = np.sum(
                            w * pref * boys_f0(p * q / (p + q) * pq2)
                        )
        return out


def nuclear_repulsion(charges: np.ndarray, nuclei: np.ndarray) -> float:
    e = 0.0
    for i in range(len(charges)):
        for j in range(i + 1, len(charges)):
            e += charges[i] * charges[j] / np.linalg.norm(nuclei[i] - nuclei[j])
    return float(e)


def rhf(S, hcore, eri, n_elec, e_nuc, max_cycle=200):
    """Closed-shell SCF with DIIS; returns (e_tot, mo_energies, mo_coeff)."""
    n_occ = n_elec // 2
    w, U = np.linalg.eigh(S)
    X = U @ np.diag(w**-0.5) @ U.T
    F = hcore.copy()
    e_old = 0.0
    diis_F, diis_err = [], []
    D = None
    for cycle in range(max_cycle):
        eps, C_ortho = np.linalg.eigh(X @ F @ X)
        C = X @ C_ortho
        Cocc = C[:, :n_occ]
        D = Cocc @ Cocc.T
        J = np.einsum("pqrs,rs->pq", eri, D)
        K = np.einsum("prsq,rs->pq", eri, D)
        F = hcore + 2 * J - K
        e_elec = float(np.sum(D * (hcore + F)))
        err = F @ D @ S - S @ D @ F
        diis_F.append(F.copy())
        diis_err.append(err.ravel())
        if len(diis_F) > 8:
            diis_F.pop(0)
            diis_err.pop(0)
        if len(diis_F) >= 2:
            m = len(diis_F)
            B = -np.ones((m + 1, m + 1))
            B[m, m] = 0.0
            for a in range(m):
                for b in range(m):
                    B[a, b] = diis_err[a] @ diis_err[b]
            rhs = np.zeros(m + 1)
            rhs[m] = -1.0
            try:
                coeff = np.linalg.solve(B, rhs)[:m]
                F = sum(c * f for c, f in zip(coeff, diis_F))
            except np.linalg.LinAlgError:
                pass
        if abs(e_elec - e_old) < 1e-13 and np.max(np.abs(err)) < 1e-11:
            break
        e_old = e_elec
    eps, C_ortho = np.linalg.eigh(X @ F @ X)
    C = X @ C_ortho
    Cocc = C[:, :n_occ]
    D = Cocc @ Cocc.T
    J = np.einsum("pqrs,rs->pq", eri, D)
    K = np.einsum("prsq,rs->pq", eri, D)
    Ffin = hcore + 2 * J - K
    e_elec = float(np.sum(D * (hcore + Ffin)))
    return e_elec + e_nuc, eps, C


def mo_integrals(hcore, eri, C):
    h_mo = C.T @ hcore @ C
    tmp = np.einsum("pqrs,pi->iqrs", eri, C, optimize=True)
    tmp = np.einsum("iqrs,qj->ijrs", tmp, C, optimize=True)
    tmp = np.einsum("ijrs,rk->ijks", tmp, C, optimize=True)
    eri_mo = np.einsum("ijks,sl->ijkl", tmp, C, optimize=True)
    return h_mo, eri_mo


def mp2_energy(h_mo, eri_mo, eps, n_occ):
    n = h_mo.shape[0]
    occ, virt = range(n_occ), range(n_occ, n)
    e = 0.0
    for i in occ:
        for j in occ:
            for a in virt:
                for b in virt:
                    iajb = eri_mo[i, a, j, b]
                    ibja = eri_mo[i, b, j, a]
                    denom = eps[i] + eps[j] - eps[a] - eps[b]
                    e += iajb * (2 * iajb - ibja) / denom
    return e


def write_fcidump(path: Path, h_mo, eri_mo, e_nuc, n_elec):
    n = h_mo.shape[0]
    lines = [f"&FCI NORB={n},NELEC={n_elec},MS2=0,"]
    lines.append(" ORBSYM=" + ",".join(["1"] * n) + ",")
    lines.append(" ISYM=1,")
    lines.append("&END")

    def idx(i, j):
        return i * (i + 1) // 2 + j

    for i in range(n):
        for j in range(i + 1):
            for k in range(n):
                for l in range(k + 1):
                    if idx(i, j) < idx(k, l):
                        continue
                    v = eri_mo[i, j, k, l]
                    if abs(v) > 1e-14:
                        lines.append(
                            f"{v:23.16e} {i + 1:4d} {j + 1:4d} {k + 1:4d} {l + 1:4d}"
                        )
    for i in range(n):
        for j in range(i + 1):
            v = h_mo[i, j]
            if abs(v) > 1e-14:
                lines.append(f"{v:23.16e} {i + 1:4d} {j + 1:4d} {0:4d} {0:4d}")
    lines.append(f"{e_nuc:23.16e} {0:4d} {0:4d} {0:4d} {0:4d}")
    path.write_text("\n".join(lines) + "\n")


def hydrogen_chain(n_atoms: int, spacing_angstrom: float):
    z = np.arange(n_atoms) * spacing_angstrom * ANGSTROM_TO_BOHR
    nuclei = np.zeros((n_atoms, 3))
    nuclei[:, 2] = z
    charges = np.ones(n_atoms)
    basis = SBasis(nuclei, [STO3G_H] * n_atoms)
    S, T = basis.overlap_kinetic()
    V = basis.nuclear(charges, nuclei)
    eri = basis.eri()
    e_nuc = nuclear_repulsion(charges, nuclei)
    e_hf, eps, C = rhf(S, T + V, eri, n_atoms, e_nuc)
    # Fix MO gauge so regeneration is bit-stable: largest-|c| component positive.
    for col in range(C.shape[1]):
        k = int(np.argmax(np.abs(C[:, col])))
        if C[k, col] < 0:
            C[:, col] *= -1
    h_mo, eri_mo = mo_integrals(T + V, eri, C)
    e_mp2 = e_hf + mp2_energy(h_mo, eri_mo, eps, n_atoms // 2)
    return h_mo, eri_mo, e_nuc, e_hf, e_mp2, eps


def main() -> int:
    DATA_DIR.mkdir(parents=True, exist_ok=True)
    TEST_DATA_DIR.mkdir(parents=True, exist_ok=True)
    reference = {}

    systems = [
        ("h2_sto3g", 2, 0.741),
        ("h2_sto3g_stretched", 2, 1.5),
        ("h4_sto3g", 4, 0.8),
        ("h6_sto3g", 6, 0.8),
        ("h8_sto3g", 8, 0.8),
    ]
    for name, n_atoms, spacing in systems:
        h_mo, eri_mo, e_nuc, e_hf, e_mp2, eps = hydrogen_chain(n_atoms, spacing)
        write_fcidump(DATA_DIR / f"{name}.fcidump", h_mo, eri_mo, e_nuc, n_atoms)
        reference[name] = {
            "n_atoms": n_atoms,
            "spacing_angstrom": spacing,
            "e_nuc": e_nuc,
            "e_hf_scf": e_hf,
            "e_mp2_scf": e_mp2,
            "orbital_energies": list(map(float, eps)),
        }
        print(f"{name}: e_nuc={e_nuc:.12f} e_hf={e_hf:.12f} e_mp2={e_mp2:.12f}")

    # Frozen-anchor guard for the equilibrium H2 system.
    h2 = reference["h2_sto3g"]
    h_mo, eri_mo, e_nuc, e_hf, e_mp2, _ = hydrogen_chain(2, 0.741)
    checks = [
        ("e_nuc", e_nuc, 0.7141392859919029, 1e-12),
        ("h00", h_mo[0, 0], -1.2527052599711868, 5e-10),
        ("(00|00)", eri_mo[0, 0, 0, 0], 0.6745650967143663, 5e-10),
        ("(00|11)-(01|01)", eri_mo[0, 0, 1, 1] - eri_mo[0, 1, 0, 1],
         0.48227117798977825, 5e-10),
        ("e_hf", e_hf, -1.116706137236105, 5e-10),
        ("e_mp2", e_mp2, -1.1298675557838804, 5e-10),
    ]
    failed = False
    for label, got, want, tol in checks:
        ok = abs(got - want) <= tol
        print(f"  check {label}: got={got:.16f} want={want:.16f} "
              f"|diff|={abs(got - want):.2e} {'OK' if ok else 'FAIL'}")
        failed |= not ok
    (TEST_DATA_DIR / "reference_scf.json").write_text(
        json.dumps(reference, indent=2) + "\n"
    )
    if failed:
        print("anchor checks FAILED; fixtures not trustworthy", file=sys.stderr)
        return 1
    print("all anchors OK; fixtures written to", DATA_DIR)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
