"""Shared test utilities: random-instance generators and brute-force oracles.

The oracles are deliberately naive (full enumerations, direct subset sums) and
never share code paths with the implementations they check.
"""

import itertools
import math

import numpy as np

from ustatkit import DiscreteMeasure, SymmetricKernel, decompose, lp_norm, symmetrize


def random_measure(rng, m, floor=0.15):
    w = rng.random(m) + floor
    return DiscreteMeasure(w / w.sum())


def random_kernel(rng, p, m, scale=1.0):
    return symmetrize(rng.standard_normal((m,) * p) * scale)


def random_degenerate(rng, p, m, mu, min_norm=1e-3):
    """Top decomposition level of a random kernel, rescaled to unit L2 norm."""
    for _ in range(50):
        hs = decompose(random_kernel(rng, p, m), mu)
        kernel = SymmetricKernel(hs.psi[p])
        norm = lp_norm(kernel, mu, 2.0)
        if norm > min_norm:
            return kernel.scaled(1.0 / norm)
    raise RuntimeError("could not draw a non-trivial degenerate kernel")


def all_samples(m, n):
    return itertools.product(range(m), repeat=n)


def sample_prob(x, mu):
    p = 1.0
    for sym in x:
        p *= float(mu.weights[sym])
    return p


def ustat_direct(kernel, x):
    """Direct enumeration of the U-statistic over index subsets."""
    values = kernel.values
    p = values.ndim
    total = 0.0
    for idx in itertools.combinations(range(len(x)), p):
        total += float(values[tuple(x[i] for i in idx)])
    return total


def exhaustive_mean(fn, m, n, mu):
    """E[fn(X)] by full enumeration of the sample space."""
    return sum(sample_prob(x, mu) * fn(x) for x in all_samples(m, n))


def exhaustive_variance(fn, m, n, mu):
    mean = exhaustive_mean(fn, m, n, mu)
    second = exhaustive_mean(lambda x: fn(x) ** 2, m, n, mu)
    return second - mean * mean


def brute_subgraph_count(points, pat, t):
    """O(n^p) reference count used against the pruned implementation."""
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    total = 0
    for idx in itertools.combinations(range(n), pat.p):
        sub = pts[list(idx)]
        d2 = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(-1)
        adj = (d2 > 0.0) & (d2 < t * t)
        ok = False
        for perm in itertools.permutations(range(pat.p)):
            if all(
                adj[perm[i], perm[j]] == pat.adjacency[i, j]
                for i in range(pat.p)
                for j in range(i + 1, pat.p)
            ):
                ok = True
                break
        total += 1 if ok else 0
    return total


def comb(n, k):
    return math.comb(n, k)
