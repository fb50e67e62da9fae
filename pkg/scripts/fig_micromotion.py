"""Spectator-population micromotion at the three two-transmon operating points.

Starts from the dressed (|01> + |11>)/sqrt(2), drives at eps/wp = 1.84 on each
target resonance for 0.5 us (100,000 samples) and plots the FFT of the
non-target population with the catalogued sideband lines overlaid. The raw
(rectangular) and Hann-windowed spectra are shown side by side.
"""
import numpy as np

from _plot import parser, plt, save
from floqmap.dynamics import compare_peaks, evolve, sideband_lines, superposition, trajectory_spectrum
from floqmap.model import MHZ, DriveSpec, parse_label, qubit_qubit_system
from floqmap.sidebands import catalog_qq, find_entry
from floqmap.statics import exact_dressed_spectrum

POINTS = ((("01", "10"), "11"), (("11", "02"), "01"), (("11", "20"), "01"))


def main():
    a = parser(__doc__).parse_args()
    system = qubit_qubit_system()
    sp = exact_dressed_spectrum(system)
    cat = catalog_qq(system, dressed=True, spectrum=sp)
    psi0 = superposition(system, ("01", "11"), spectrum=sp)
    samples = 20_000 if a.quick else 100_000

    fig, axes = plt.subplots(3, 1, figsize=(9, 8), sharex=True)
    for ax, (tgt, spectator) in zip(axes, POINTS):
        fp = abs(find_entry(cat, *tgt).detuning)
        traj = evolve(system, DriveSpec("Q1", 1.84 * fp, fp), psi0, 0.5e-6, samples, track=(spectator,), spectrum=sp)
        lines = sideband_lines(cat, fp, fmax=500e6)
        for window, style in (("rect", "C0-"), ("hann", "C3-")):
            spec = trajectory_spectrum(traj, floor=1e-3, window=window, refine=window == "hann")
            amp = spec.amplitudes[parse_label(spectator)]
            keep = spec.freqs <= 500e6
            ax.semilogy(spec.freqs[keep] / 1e6, amp[keep], style, lw=0.7, label=window)
            matched, unmatched = compare_peaks(spec.peaks, lines)
            print(f"{tgt[0]}-{tgt[1]} {window}: {len(matched)} matched, unmatched at "
                  f"{[round(p.frequency / 1e6, 1) for p, _ in unmatched]} MHz")
        for f, _, _ in lines:
            ax.axvline(f / 1e6, color="gray", lw=0.4, alpha=0.5)
        ax.set(ylim=(1e-8, None), ylabel=f"|FFT P({spectator})|", title=f"target {tgt[0]}-{tgt[1]}, wp/2pi = {fp / MHZ:.2f} MHz")
        ax.legend(fontsize=7)
    axes[-1].set_xlabel("frequency (MHz)")
    save(fig, a.out, "micromotion_qq.png")


if __name__ == "__main__":
    main()
