"""Reference numbers for the test suite, computed without importing floqmap.

Hamiltonians are assembled here from explicit Kronecker products, Bessel values
come from mpmath, and printed closed forms are evaluated by hand. The output
is frozen into tests/ as literals.
"""
import json

import mpmath as mp
import numpy as np

TWO_PI = 2 * np.pi
MHZ = TWO_PI * 1e6


def ladder(n):
    return np.diag(np.sqrt(np.arange(1, n)), 1)


def hamiltonian(freqs, anh, levels, links):
    """Duffing modes with (b + b^dag)(b + b^dag) exchange; frequencies in MHz, returns MHz."""
    ops = []
    for k, n in enumerate(levels):
        mats = [np.eye(m) for m in levels]
        mats[k] = ladder(n)
        op = mats[0]
        for m in mats[1:]:
            op = np.kron(op, m)
        ops.append(op)
    H = np.zeros((int(np.prod(levels)),) * 2)
    for b, w, a in zip(ops, freqs, anh):
        nb = b.T @ b
        H += w * nb + 0.5 * a * (b.T @ b.T @ b @ b)
    for (i, j), J in links.items():
        H += J * (ops[i] + ops[i].T) @ (ops[j] + ops[j].T)
    return H


def index(label, levels):
    k = 0
    for d, n in zip(label, levels):
        k = k * n + d
    return k


def dressed(H, labels, levels):
    """Eigenvalue with maximum bare-state overlap per label (weak-coupling systems only)."""
    w, v = np.linalg.eigh(H)
    out = {}
    for lab in labels:
        col = int(np.argmax(np.abs(v[index(lab, levels)]) ** 2))
        out[lab] = w[col]
    return out


def zz(H, levels, l11, l00, l01, l10):
    e = dressed(H, [l11, l00, l01, l10], levels)
    return e[l11] - e[l01] - e[l10] + e[l00]


def main():
    out = {}
    mp.mp.dps = 30
    out["J1(1.84)"] = float(mp.besselj(1, 1.84))
    out["J0(1.84)"] = float(mp.besselj(0, 1.84))
    out["J2(1.84)"] = float(mp.besselj(2, 1.84))
    out["J15(3.5)"] = float(mp.besselj(15, 3.5))
    out["2g_qq_n1_MHz"] = 2 * 5 * out["J1(1.84)"]

    # two transmons, reference parameters
    lv = (4, 4)
    Hqq = hamiltonian((4850, 5000), (-220, -260), lv, {(0, 1): 5})
    out["zz_qq_exact_MHz"] = zz(Hqq, lv, (1, 1), (0, 0), (0, 1), (1, 0))
    out["zz_qq_printed_MHz"] = 25 / (-110) - 25 / 370
    e = dressed(Hqq, [(0, 1), (1, 0)], lv)
    out["qq_dressed_01_minus_10_MHz"] = e[(0, 1)] - e[(1, 0)]

    # qubit-coupler-qubit reference parameters, order Q1, C, Q2
    lv3 = (4, 3, 4)
    f3, a3 = (5801, 6990, 5921), (-205, -105, -300)
    links = {(0, 1): 100, (2, 1): 100, (0, 2): 5}
    H3 = hamiltonian(f3, a3, lv3, links)
    out["zz_qcq_exact_kHz"] = 1e3 * zz(H3, lv3, (1, 0, 1), (0, 0, 0), (0, 0, 1), (1, 0, 0))
    e3 = dressed(H3, [(1, 0, 0), (0, 0, 1), (0, 0, 0)], lv3)
    out["qcq_E100_minus_w1_MHz"] = (e3[(1, 0, 0)] - e3[(0, 0, 0)]) - 5801
    out["qcq_E100_leading_MHz"] = 100**2 / (5801 - 6990) + 5**2 / (5801 - 5921)
    out["qcq_E2_001_MHz"] = 100**2 / (5921 - 6990) - 5**2 / (5801 - 5921)
    out["Jtilde12_formula_MHz"] = 5 + 5000 * (-1 / 1189 - 1 / 1069 - 1 / 12791 - 1 / 12911)

    # half the minimum |100>/|001> splitting while sweeping Q2
    best = np.inf
    for w2 in np.linspace(5780, 5830, 2001):
        Hs = hamiltonian((5801, 6990, w2), a3, lv3, links)
        w, v = np.linalg.eigh(Hs)
        # two eigenvectors with most weight in span{100, 001}
        wt = np.abs(v[index((1, 0, 0), lv3)]) ** 2 + np.abs(v[index((0, 0, 1), lv3)]) ** 2
        cols = np.argsort(wt)[-2:]
        best = min(best, abs(w[cols[0]] - w[cols[1]]))
    out["Jtilde12_half_min_splitting_MHz"] = best / 2
    # the sweep sits at w2 ~ w1, so compare with the formula evaluated there
    out["Jtilde12_formula_at_degeneracy_MHz"] = 5 + 5000 * (-2 / 1189 - 2 / 12791)

    # adiabatic first sideband, eps = 50 MHz
    D1, D2, S1, S2 = 5801 - 6990, 5921 - 6990, 5801 + 6990, 5921 + 6990
    out["g_adiabatic_50MHz"] = 50 * 100 * 100 / 4 * (1 / D1**2 + 1 / D2**2 + 1 / S1**2 + 1 / S2**2)
    print(json.dumps(out, indent=2))


if __name__ == "__main__":
    main()
