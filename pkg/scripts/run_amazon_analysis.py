#!/usr/bin/env python3
"""End-to-end Amazon-scale analysis on the synthetic fixture.

Reproduces the headline numbers: Fisher / ML point estimates, coarsened
posterior summaries of the fundamental biodiversity number alpha and of the
total species count K_N over a grid of coarsening levels, the diversity-index
transforms, the calibration (elbow) curve, and the three model-validation
files emitted by the CLI.
"""

import argparse
import os
import subprocess
import sys

import numpy as np

import sigmadiv as sd
from sigmadiv import dpinfer, estimators

RHO_GRID = (1.0, 0.25, 0.1, 0.01, 0.001)
N_HAT = 3.949e11


def summarize(values):
    qs = np.quantile(values, [0.01, 0.25, 0.5, 0.75, 0.99])
    return [qs[0], qs[1], qs[2], float(np.mean(values)), qs[3], qs[4]]


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output-dir", default="amazon_out")
    parser.add_argument("--draws", type=int, default=100_000)
    parser.add_argument("--seed", type=int, default=20_260_810)
    args = parser.parse_args()
    os.makedirs(args.output_dir, exist_ok=True)

    fixture = os.path.join(args.output_dir, "amazon_abundance.csv")
    if not os.path.exists(fixture):
        subprocess.run([sys.executable,
                        os.path.join(os.path.dirname(__file__), "make_amazon_fixture.py"),
                        "--output", fixture], check=True)

    data = sd.ingest_abundance_csv(fixture)
    n, k = data.n, data.k
    print(f"data: n={n}, k={k}")
    print(f"fisher alpha: {estimators.fisher_alpha(n, k).value:.2f}")
    print(f"ml alpha:     {estimators.mle_alpha(n, k).value:.2f}\n")

    prior = dpinfer.StirlingGammaSpec(a=1.0, b=0.0002, n_ref=n)
    header = f"{'rho':>6} {'n*rho':>10} {'1%':>8} {'25%':>8} {'50%':>8} " \
             f"{'mean':>8} {'75%':>8} {'99%':>8}"
    print("fundamental biodiversity number alpha")
    print(header)
    keep_alpha = {}
    for i, rho in enumerate(RHO_GRID):
        post = dpinfer.CoarsenedPosterior(prior=prior, n=n, k=k, rho=rho)
        draws = dpinfer.sg_posterior_sample(post, args.draws, args.seed + i)
        keep_alpha[rho] = draws.values
        row = summarize(draws.values)
        print(f"{rho:>6} {int(n * rho):>10,} " + " ".join(f"{v:8,.0f}" for v in row))

    print("\ntotal species count K_N  (N-hat = 3.949e11)")
    print(header)
    for i, rho in enumerate(RHO_GRID):
        post = dpinfer.CoarsenedPosterior(prior=prior, n=n, k=k, rho=rho)
        pred = dpinfer.richness_posterior(post, N_HAT, args.draws, args.seed + 50 + i)
        row = summarize(pred.draws)
        print(f"{rho:>6} {int(n * rho):>10,} " + " ".join(f"{v:8,.0f}" for v in row))

    tr = dpinfer.diversity_transforms(keep_alpha[0.01])
    print(f"\nposterior means at rho=0.01: simpson={tr['simpson_mean']:.5f}, "
          f"shannon={tr['shannon_mean']:.4f}")

    print("\ncalibration (elbow) curve: expected log-likelihood by rho")
    for rho, value in dpinfer.calibration_curve(prior, n, k, RHO_GRID,
                                                n_draws=5_000, rng_seed=args.seed):
        print(f"  rho={rho:<6} E[loglik]={value:,.1f}")

    print("\nwriting validation files via the CLI ...")
    from sigmadiv.cli import main as cli_main

    code = cli_main(["validate", "--input", fixture, "--seed", str(args.seed),
                     "--alpha", f"{estimators.mle_alpha(n, k).value}",
                     "--replicates", "40", "--r-max", "60",
                     "--output-dir", os.path.join(args.output_dir, "validate")])
    print(f"validate exit code: {code}")


if __name__ == "__main__":
    main()
