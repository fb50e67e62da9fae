"""Floquet quasienergy splitting against fitted Rabi frequencies near the 01-10 sideband.

Two-transmon system, eps/wp = 1.84, drive frequency swept over 140-160 MHz.
Produces the splitting curve, the fitted generalized Rabi frequency and the
chevron used for the fits.
"""
import numpy as np

from _plot import parser, plt, save
from floqmap.dynamics import chevron, fit_generalized_rabi
from floqmap.floquet import DriveTemplate, FloquetSolver, splitting_scan
from floqmap.model import MHZ, qubit_qubit_system


def main():
    a = parser(__doc__).parse_args()
    n = 11 if a.quick else 41
    system = qubit_qubit_system()
    tpl = DriveTemplate("Q1", eps_over_fp=1.84)
    grid = np.linspace(140, 160, n) * MHZ
    solver = FloquetSolver(system, "Q1")
    split = splitting_scan(solver, tpl, ("01", "10"), grid)
    t, P = chevron(system, tpl, grid, 0.5e-6, 1001, spectrum=solver.spectrum)
    omega = np.array([np.hypot(*fit_generalized_rabi(t, row)) for row in P])
    print(f"max relative difference {np.max(np.abs(omega / split - 1)):.2e}")

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(grid / MHZ, split / MHZ, "k-", label="Floquet splitting")
    ax1.plot(grid / MHZ, omega / MHZ, "o", mfc="none", label="Rabi fit")
    ax1.set(xlabel="drive frequency (MHz)", ylabel="frequency (MHz)")
    ax1.legend()
    im = ax2.pcolormesh(t * 1e6, grid / MHZ, P, shading="auto", cmap="viridis")
    ax2.set(xlabel="time (us)", ylabel="drive frequency (MHz)", title="P(10) from |01>")
    fig.colorbar(im, ax=ax2)
    save(fig, a.out, "floquet_vs_dynamics.png")


if __name__ == "__main__":
    main()
