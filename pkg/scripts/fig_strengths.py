"""Sideband strengths from Floquet gaps against the analytic models.

Qubit modulation: gap/2 of 01-10 for n = 0, 1, 2 versus J |J_n(eps/wp)|.
Coupler modulation: gap/2 of 001-100 for m = 1, 2 versus the Taylor
truncations built on the printed Schrieffer-Wolff coupling and on the
block-diagonalized one.
"""
import numpy as np
from scipy.special import jv

from _plot import parser, plt, save
from floqmap.floquet import coupler_strength_sweep, qubit_strength_sweep
from floqmap.model import MHZ, qubit_coupler_qubit_system, qubit_qubit_system
from floqmap.sidebands import coupler_mod_strength


def main():
    a = parser(__doc__).parse_args()
    qq, qcq = qubit_qubit_system(), qubit_coupler_qubit_system()
    J = qq.couplings[0].strength

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    xs = np.linspace(0, 4, 9 if a.quick else 25)
    fine = np.linspace(0, 4, 400)
    for n, c in zip((0, 1, 2), ("C0", "C1", "C2")):
        g = qubit_strength_sweep(qq, "Q1", ("01", "10"), n, xs)
        ax1.plot(xs, g / MHZ, "o", color=c, mfc="none", label=f"Floquet n={n}")
        ax1.plot(fine, J * np.abs(jv(n, fine)) / MHZ, "-", color=c)
    ax1.set(xlabel="eps/wp", ylabel="g/2pi (MHz)", title="qubit modulation")
    ax1.legend()

    eps = np.linspace(25, 300, 4 if a.quick else 12) * MHZ
    dense = np.linspace(5, 300, 60) * MHZ
    for m, N, c in ((1, 3, "C0"), (2, 4, "C1")):
        g = coupler_strength_sweep(qcq, ("001", "100"), m, eps)
        ax2.plot(eps / MHZ, g / MHZ, "o", color=c, mfc="none", label=f"Floquet m={m}")
        for coupling, ls in (("sw", "--"), ("exact", "-")):
            an = [abs(coupler_mod_strength(qcq, None, m, e, N, coupling=coupling)) / MHZ for e in dense]
            ax2.plot(dense / MHZ, an, ls, color=c, label=f"N={N}, {coupling}")
        if m == 1:
            ad = [abs(coupler_mod_strength(qcq, None, 1, e, 1, coupling="exact")) / MHZ for e in dense]
            ax2.plot(dense / MHZ, ad, ":", color="gray", label="N=1 (adiabatic)")
    ax2.set(xlabel="eps/2pi (MHz)", ylabel="g/2pi (MHz)", title="coupler modulation")
    ax2.legend(fontsize=7)
    save(fig, a.out, "strengths.png")


if __name__ == "__main__":
    main()
