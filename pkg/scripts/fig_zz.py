"""Static and dynamic ZZ in the qubit-coupler-qubit system.

Left: exact versus 4th-order perturbative ZZ against the coupler frequency.
Middle/right: dynamic ZZ maps over (coupler frequency, amplitude) for qubit and
coupler modulation, with wp kept on the 001-100 resonance and the zero contour
drawn. The maps are the slow part (a few minutes per coupler frequency);
--quick uses five coupler frequencies.
"""
import warnings

import numpy as np

from _plot import parser, plt, save
from floqmap.floquet import FloquetSolver, UnfoldingError, dynamic_zz
from floqmap.model import GHZ, KHZ, MHZ, DriveSpec, qubit_coupler_qubit_system
from floqmap.sidebands import catalog_qcq, find_entry
from floqmap.statics import static_zz


def zz_ray(system, target, amax, n_ramp):
    fp = abs(find_entry(catalog_qcq(system, dressed=True), "001", "100").detuning)
    amax = amax if target == "C" else amax * fp
    try:
        _, _, path = dynamic_zz(FloquetSolver(system, target), DriveSpec(target, amax, fp), n_ramp=n_ramp, return_path=True)
    except UnfoldingError:
        path = np.full(n_ramp + 1, np.nan)
    return path


def main():
    p = parser(__doc__)
    p.add_argument("--ramp", type=int, default=24)
    a = p.parse_args()
    warnings.simplefilter("ignore")
    base = qubit_coupler_qubit_system().with_mode("Q1", tunable=True)

    wc_static = np.linspace(6.2, 7.4, 121)
    exact = [static_zz(base.with_mode("C", frequency=w * GHZ)) / KHZ for w in wc_static]
    pert = [static_zz(base.with_mode("C", frequency=w * GHZ), method="sum") / KHZ for w in wc_static]

    wcs = np.linspace(6.4, 7.4, 5 if a.quick else 11)
    fig, axes = plt.subplots(1, 3, figsize=(14, 4))
    axes[0].plot(wc_static, exact, "k-", label="exact")
    axes[0].plot(wc_static, pert, "b--", label="4th order")
    axes[0].set(xlabel="wc/2pi (GHz)", ylabel="zeta/2pi (kHz)", yscale="symlog")
    axes[0].legend()
    for ax, target, amax, unit in ((axes[1], "Q1", 3.0, "eps/wp"), (axes[2], "C", 600 * MHZ, "eps/2pi (MHz)")):
        Z = np.array([zz_ray(base.with_mode("C", frequency=w * GHZ), target, amax, a.ramp) for w in wcs]) / KHZ
        amps = np.linspace(0, amax if target == "Q1" else amax / MHZ, a.ramp + 1)
        lim = np.nanmax(np.abs(Z))
        im = ax.pcolormesh(wcs, amps, Z.T, shading="auto", cmap="RdBu_r", vmin=-lim, vmax=lim)
        ax.contour(wcs, amps, Z.T, levels=[0.0], colors="k")
        ax.set(xlabel="wc/2pi (GHz)", ylabel=unit, title=f"zeta_d, {target} modulated (kHz)")
        fig.colorbar(im, ax=ax)
    save(fig, a.out, "zz_qcq.png")


if __name__ == "__main__":
    main()
