#!/usr/bin/env python3
"""Write a synthetic Amazon-scale abundance table.

The file carries the published sufficient statistics exactly
(n = 553,949 individuals, k = 4,962 species) with a log-series-shaped
rank-abundance profile, so every fit/validate/richness command can be
exercised at production scale without the original data.
"""

import argparse
import math

N_TARGET = 553_949
K_TARGET = 4_962
ALPHA = 751.23


def log_series_abundances():
    """K_TARGET species at evenly spaced quantiles of the log-series size law
    P(size = r) proportional to x^r / r, then a small adjustment on the most
    abundant species pins the total at N_TARGET exactly."""
    import numpy as np

    x = N_TARGET / (N_TARGET + ALPHA)
    r = np.arange(1, 700_000, dtype=float)
    log_p = r * math.log(x) - np.log(r)
    p = np.exp(log_p - log_p.max())
    cdf = np.cumsum(p)
    cdf /= cdf[-1]
    u = (np.arange(K_TARGET) + 0.5) / K_TARGET
    sizes = np.searchsorted(cdf, u) + 1
    sizes = np.sort(sizes)[::-1].astype(int)
    sizes[0] += N_TARGET - int(sizes.sum())
    if sizes[0] < sizes[1]:
        raise RuntimeError("adjustment broke the ranking")
    return sizes.tolist()


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--output", default="amazon_abundance.csv")
    args = parser.parse_args()

    from sigmadiv.datamodel import PartitionData, write_abundance_csv

    data = PartitionData.from_abundances(log_series_abundances())
    assert (data.n, data.k) == (N_TARGET, K_TARGET), (data.n, data.k)
    write_abundance_csv(data, args.output)
    print(f"wrote {args.output}: n={data.n}, k={data.k}, "
          f"singletons={data.freq_counts.get(1, 0)}, "
          f"top abundance={data.abundances[0]}")


if __name__ == "__main__":
    main()
