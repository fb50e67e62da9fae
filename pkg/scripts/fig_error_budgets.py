"""Population-error budgets per parasitic channel at the two-transmon operating points.

Also prints the co- and counter-rotating totals and the transmon-coupler-transmon coupler-scheme
budget for comparison.
"""
import numpy as np

from _plot import parser, plt, save
from floqmap.errors import population_error
from floqmap.model import MHZ, DriveSpec, qubit_coupler_qubit_system, qubit_qubit_system
from floqmap.sidebands import catalog_qcq, catalog_qq, find_entry


def main():
    a = parser(__doc__).parse_args()
    qq = qubit_qubit_system()
    cat = catalog_qq(qq, dressed=True)
    fig, axes = plt.subplots(1, 3, figsize=(12, 4), sharey=True)
    for ax, tgt in zip(axes, (("01", "10"), ("11", "02"), ("11", "20"))):
        fp = abs(find_entry(cat, *tgt).detuning)
        b = population_error(qq, "qubit", tgt, DriveSpec("Q1", 1.84 * fp, fp), catalog=cat)
        groups = b.by_group()
        names = sorted(groups, key=lambda k: -groups[k][0])
        ax.bar(range(len(names)), [max(groups[k][0], 1e-12) for k in names], color="C0", label="P_e")
        ax.plot(range(len(names)), [max(groups[k][1], 1e-12) for k in names], "k_", ms=14, label="bound")
        ax.set_xticks(range(len(names)), names, rotation=60, fontsize=7)
        ax.set_yscale("log")
        ax.set_title(f"{tgt[0]}-{tgt[1]}: total {b.total:.2e}")
        rot = b.rotating_totals()
        print(f"{tgt[0]}-{tgt[1]}: P_e {b.total:.3e}, co {rot['co']:.3e}, counter {rot['counter']:.3e}")
    axes[0].set_ylabel("population error")
    axes[0].legend()
    save(fig, a.out, "error_budgets_qq.png")

    qcq = qubit_coupler_qubit_system()
    cat = catalog_qcq(qcq, dressed=True)
    fp = abs(find_entry(cat, "001", "100").detuning)
    for eps in np.array([100, 200, 300]) * MHZ:
        b = population_error(qcq, "coupler", ("001", "100"), DriveSpec("C", eps, fp), catalog=cat)
        print(f"coupler scheme eps/2pi = {eps / MHZ:.0f} MHz: P_e {b.total:.3e}, g {b.g_target / MHZ:.3f} MHz")


if __name__ == "__main__":
    main()
