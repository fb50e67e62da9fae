"""Maximum Floquet collision angle versus drive frequency.

Two-transmon system at eps/wp = 1.84 over 100-400 MHz, with the three target
resonances marked. Each pixel is the largest mixing angle over all catalogued
pairs.
"""
import numpy as np

from _plot import parser, plt, save
from floqmap.floquet import DriveTemplate, max_collision_angle_landscape
from floqmap.model import MHZ, qubit_qubit_system
from floqmap.sidebands import catalog_qq, find_entry


def main():
    a = parser(__doc__).parse_args()
    system = qubit_qubit_system()
    cat = catalog_qq(system, dressed=True)
    pairs = [(e.bra, e.ket) for e in cat]
    grid = np.linspace(100, 400, 301 if a.quick else 1201) * MHZ
    land = max_collision_angle_landscape(system, DriveTemplate("Q1", eps_over_fp=1.84), grid, pairs)

    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(grid / MHZ, land.max_theta, "r-", lw=0.8)
    for tgt in (("01", "10"), ("11", "02"), ("11", "20")):
        f = abs(find_entry(cat, *tgt).detuning) / MHZ
        ax.axvline(f, color="k", ls=":", lw=0.8)
        ax.text(f, 1.62, f"{tgt[0]}-{tgt[1]}", ha="center", fontsize=8)
    ax.set(xlabel="drive frequency (MHz)", ylabel="max theta (rad)", ylim=(0, 1.7))
    save(fig, a.out, "landscape_qq.png")


if __name__ == "__main__":
    main()
