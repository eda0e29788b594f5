#!/usr/bin/env python3
"""Plot a stability sweep written by `stokes stability`.

Left: the spectral plane (Re lambda, Im lambda). Right: max Re lambda per mu.

    python3 scripts/plot_sweep.py sweep.csv [--out sweep.png]
"""
import argparse
import csv
from collections import defaultdict

import matplotlib.pyplot as plt


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("sweep")
    ap.add_argument("--out")
    args = ap.parse_args()

    with open(args.sweep) as fh:
        header = fh.readline().lstrip("# ").strip()
        rows = list(csv.DictReader(fh))
    re = [float(r["re_lambda"]) for r in rows]
    im = [float(r["im_lambda"]) for r in rows]
    growth = defaultdict(float)
    for r in rows:
        mu = float(r["mu"])
        growth[mu] = max(growth[mu], float(r["re_lambda"]))

    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(re, im, ".", ms=2)
    ax1.set_xlabel("Re lambda")
    ax1.set_ylabel("Im lambda")
    mus = sorted(growth)
    ax2.plot(mus, [growth[m] for m in mus], "-")
    ax2.set_xlabel("mu")
    ax2.set_ylabel("max Re lambda")
    fig.suptitle(header)
    fig.tight_layout()
    if args.out:
        fig.savefig(args.out, dpi=150)
    else:
        plt.show()


if __name__ == "__main__":
    main()
