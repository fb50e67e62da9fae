"""Shared bits for the figure scripts."""
import argparse
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def parser(doc: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=doc)
    p.add_argument("--out", default="figures", help="output directory")
    p.add_argument("--quick", action="store_true", help="coarser grids for a fast look")
    return p


def save(fig, out: str, name: str) -> Path:
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    path = d / name
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    print(f"wrote {path}")
    return path
