#!/usr/bin/env python3
"""Offline generator for the bundled H2 dataset.

Computes the symmetric two-determinant CI matrix elements of H2 in a
minimal 1s basis (STO-6G, standard molecular scaling) from closed-form
s-Gaussian integrals, and writes src/pqelab/data/h2_sto6g.csv.

Run once before packaging; the library only ever reads the CSV.
"""

import csv
import pathlib

import numpy as np
from scipy.special import erf

BOHR_PER_ANGSTROM = 1.0 / 0.529177210903

# STO-6G hydrogen 1s primitives (exponents carry the standard 1.24 scaling)
ALPHA = np.array([35.52322122, 6.513143725, 1.822142904,
                  0.625955266, 0.243076747, 0.100112428])
COEF = np.array([0.00916359628, 0.04936149294, 0.16853830490,
                 0.37056279970, 0.41649152980, 0.13033408410])


def boys0(t):
    t = np.asarray(t, dtype=float)
    small = t < 1e-12
    safe = np.where(small, 1.0, t)
    return np.where(small, 1.0 - t / 3.0,
                    0.5 * np.sqrt(np.pi / safe) * erf(np.sqrt(safe)))


def h2_elements(r_bohr):
    """(h00, h11, h01, enuc) for the singlet two-determinant CI at R."""
    centers = np.array([0.0, r_bohr])
    norm = (2.0 * ALPHA / np.pi) ** 0.75
    c = COEF * norm
    cc = c[:, None] * c[None, :]

    S = np.zeros((2, 2))
    hcore = np.zeros((2, 2))
    for i, A in enumerate(centers):
        for j, B in enumerate(centers):
            a = ALPHA[:, None]
            b = ALPHA[None, :]
            p = a + b
            mu = a * b / p
            rab2 = (A - B) ** 2
            K = np.exp(-mu * rab2) * (np.pi / p) ** 1.5
            P = (a * A + b * B) / p
            S[i, j] = np.sum(cc * K)
            T = np.sum(cc * mu * (3.0 - 2.0 * mu * rab2) * K)
            v = np.zeros_like(K)
            for Cn in centers:
                t = p * (P - Cn) ** 2
                v += -2.0 * np.pi / p * np.exp(-mu * rab2) * boys0(t)
            hcore[i, j] = T + np.sum(cc * v)

    def eri(A, B, C, D):
        a = ALPHA[:, None, None, None]
        b = ALPHA[None, :, None, None]
        g = ALPHA[None, None, :, None]
        d = ALPHA[None, None, None, :]
        p = a + b
        q = g + d
        P = (a * A + b * B) / p
        Q = (g * C + d * D) / q
        k1 = np.exp(-(a * b / p) * (A - B) ** 2)
        k2 = np.exp(-(g * d / q) * (C - D) ** 2)
        t = p * q / (p + q) * (P - Q) ** 2
        val = 2.0 * np.pi ** 2.5 / (p * q * np.sqrt(p + q)) * k1 * k2 * boys0(t)
        cc4 = (c[:, None, None, None] * c[None, :, None, None]
               * c[None, None, :, None] * c[None, None, None, :])
        return float(np.sum(cc4 * val))

    A, B = centers
    prim = {}
    prim[(0, 0, 0, 0)] = prim[(1, 1, 1, 1)] = eri(A, A, A, A)
    e1112 = eri(A, A, A, B)
    for key in ((0, 0, 0, 1), (0, 0, 1, 0), (0, 1, 0, 0), (1, 0, 0, 0),
                (1, 1, 1, 0), (1, 1, 0, 1), (1, 0, 1, 1), (0, 1, 1, 1)):
        prim[key] = e1112
    prim[(0, 0, 1, 1)] = prim[(1, 1, 0, 0)] = eri(A, A, B, B)
    e1212 = eri(A, B, A, B)
    for key in ((0, 1, 0, 1), (1, 0, 1, 0), (0, 1, 1, 0), (1, 0, 0, 1)):
        prim[key] = e1212

    s12 = S[0, 1]
    ng = 1.0 / np.sqrt(2.0 * (1.0 + s12))
    nu = 1.0 / np.sqrt(2.0 * (1.0 - s12))
    h_gg = ng * ng * (hcore[0, 0] + hcore[1, 1] + 2 * hcore[0, 1])
    h_uu = nu * nu * (hcore[0, 0] + hcore[1, 1] - 2 * hcore[0, 1])

    def mo_eri(signs, norms):
        tot = 0.0
        for i in (0, 1):
            for j in (0, 1):
                for k in (0, 1):
                    for l in (0, 1):
                        sgn = (signs[0] ** i) * (signs[1] ** j) \
                            * (signs[2] ** k) * (signs[3] ** l)
                        tot += sgn * prim[(i, j, k, l)]
        return norms[0] * norms[1] * norms[2] * norms[3] * tot

    J_gg = mo_eri((1, 1, 1, 1), (ng, ng, ng, ng))
    J_uu = mo_eri((-1, -1, -1, -1), (nu, nu, nu, nu))
    K_gu = mo_eri((1, -1, 1, -1), (ng, nu, ng, nu))

    h00 = 2 * h_gg + J_gg
    h11 = 2 * h_uu + J_uu
    return h00, h11, K_gu, 1.0 / r_bohr


def geometry_grid():
    """0.05 A steps near equilibrium, coarser past 1.2 and 3.0 A."""
    grid = [round(0.4 + 0.05 * i, 2) for i in range(17)]          # 0.40..1.20
    grid += [round(1.3 + 0.1 * i, 2) for i in range(18)]          # 1.30..3.00
    grid.insert(grid.index(3.0), 2.95)
    grid += [round(3.25 + 0.25 * i, 2) for i in range(12)]        # 3.25..6.00
    return grid


def main():
    out = pathlib.Path(__file__).resolve().parents[1] / "src" / "pqelab" / "data"
    out.mkdir(parents=True, exist_ok=True)
    path = out / "h2_sto6g.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["R", "h00", "h11", "h01", "enuc"])
        for r in geometry_grid():
            h00, h11, h01, enuc = h2_elements(r * BOHR_PER_ANGSTROM)
            writer.writerow([f"{r:.2f}", f"{h00:.12f}", f"{h11:.12f}",
                             f"{h01:.12f}", f"{enuc:.12f}"])
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
