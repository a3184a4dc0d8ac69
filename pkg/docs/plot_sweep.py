"""
Plot a sweep table written by ``dislocore sweep``.

Usage: python3 plot_sweep.py table.csv [figure.png]

Needs matplotlib, which is not a dependency of the library.
"""

import csv
import sys

import matplotlib.pyplot as plt


def main(path, out=None):
    with open(path) as fh:
        rows = [r for r in csv.DictReader(fh) if r["eps"] != "slope"]
    eps = [float(r["eps"]) for r in rows]
    fig, ax = plt.subplots()
    for col, label in (("x_err", "displacement error"), ("e_gap", "energy gap"), ("consist", "consistency")):
        ax.loglog(eps, [float(r[col]) for r in rows], "o-", label=label)
    ax.loglog(eps, [e * e for e in eps], "k--", label="slope 2")
    ax.set_xlabel("eps")
    ax.legend()
    fig.savefig(out or "sweep.png", dpi=150)


if __name__ == "__main__":
    main(*sys.argv[1:3])
