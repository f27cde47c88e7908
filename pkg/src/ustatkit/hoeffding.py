"""Exact Hoeffding decomposition of symmetric U-statistics on finite alphabets.

The decomposition writes the order-p statistic as a binomially weighted sum
of degenerate statistics of orders 0..p.  Both classical constructions of
the degenerate kernels (the alternating-sum formula over the projection
functions and the order recursion) are computed and cross-checked entrywise.
"""

from __future__ import annotations

import itertools
import math
from collections import Counter
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import (
    DEGENERACY_TOL,
    DiscreteMeasure,
    SymmetricKernel,
    _check_same_alphabet,
    tensor_lp_norm,
)
from .errors import CapacityError, ContractViolationError, ParameterError

#: variance threshold deciding whether a decomposition level is "active"
RANK_TOL = 1e-10

#: the two kernel constructions must agree to this tolerance
CONSTRUCTION_TOL = 1e-10

#: exhaustive sample enumeration refuses beyond this many states
ENUMERATION_CAP = 10**6


@dataclass(frozen=True)
class HoeffdingSet:
    """Projection functions g_0..g_p and degenerate kernels psi_0..psi_p.

    ``g[k]`` and ``psi[s]`` are raw tensors of order k and s; the order-0
    entries are 0-d arrays.  ``g[p]`` equals the source kernel and ``psi[0]``
    equals ``g[0]`` (the expectation of the source kernel).
    """

    source: SymmetricKernel
    g: tuple
    psi: tuple

    @property
    def order(self) -> int:
        return self.source.order

    def g_kernel(self, k: int) -> SymmetricKernel:
        return SymmetricKernel(self.g[k])

    def psi_kernel(self, s: int) -> SymmetricKernel:
        return SymmetricKernel(self.psi[s])


def compute_g(kernel: SymmetricKernel, mu: DiscreteMeasure, k: int) -> np.ndarray:
    """Integrate out p - k coordinates: ``g_k(y) = E[psi(y, X_1, ..., X_{p-k})]``."""
    _check_same_alphabet(kernel, mu)
    p = kernel.order
    if not 0 <= k <= p:
        raise ParameterError(f"k must lie in [0, {p}], got {k}")
    g = kernel.values
    for _ in range(p - k):
        g = np.tensordot(g, mu.weights, axes=([-1], [0]))
    return np.asarray(g, dtype=float)


def _embed(tensor: np.ndarray, axes: Sequence[int], s: int, m: int) -> np.ndarray:
    # place an order-k symmetric tensor on the given axes of an order-s cube;
    # symmetry makes the within-axes order irrelevant, so sorted placement is exact
    shape = [1] * s
    for ax in sorted(axes):
        shape[ax] = m
    return tensor.reshape(shape)


def decompose(kernel: SymmetricKernel, mu: DiscreteMeasure) -> HoeffdingSet:
    """All projection functions g_k and degenerate kernels psi_s of a kernel.

    psi_s is built by the order recursion (g_s minus the expectation minus all
    embedded lower-order kernels) and verified against the alternating-sum
    construction over g-subsets; both must agree entrywise to 1e-10.  Every
    psi_s with s >= 1 must pass the degeneracy test.
    """
    _check_same_alphabet(kernel, mu)
    p = kernel.order
    m = kernel.alphabet_size
    g = [compute_g(kernel, mu, k) for k in range(p + 1)]
    g0 = float(g[0])

    psi = [np.array(g0)]
    for s in range(1, p + 1):
        acc = np.array(g[s], copy=True) - g0
        for k in range(1, s):
            for subset in itertools.combinations(range(s), k):
                acc -= _embed(psi[k], subset, s, m)
        psi.append(acc)

    for s in range(1, p + 1):
        alt = np.full((m,) * s, ((-1.0) ** s) * g0)
        for k in range(1, s + 1):
            sign = (-1.0) ** (s - k)
            for subset in itertools.combinations(range(s), k):
                alt += sign * _embed(g[k], subset, s, m)
        gap = float(np.max(np.abs(psi[s] - alt)))
        if gap > CONSTRUCTION_TOL * (1.0 + float(np.max(np.abs(psi[s])))):
            raise ContractViolationError(
                f"degenerate-kernel constructions disagree at order {s}: gap {gap:g}"
            )
        defect = float(np.max(np.abs(np.tensordot(mu.weights, psi[s], axes=([0], [0])))))
        if defect > DEGENERACY_TOL:
            raise ContractViolationError(
                f"psi_{s} fails the degeneracy test: defect {defect:g}"
            )

    return HoeffdingSet(source=kernel, g=tuple(g), psi=tuple(psi))


def _multiset_terms(values: np.ndarray):
    """Precompute (index tuple, multiplicity list) pairs for count-based sums."""
    p = values.ndim
    m = values.shape[0]
    terms = []
    for combo in itertools.combinations_with_replacement(range(m), p):
        mults = sorted(Counter(combo).items())
        terms.append((combo, mults))
    return terms


def ustat_from_counts(values: np.ndarray, counts: np.ndarray) -> float:
    """U-statistic value from symbol counts.

    The sum over strictly increasing index tuples depends on the sample only
    through its symbol counts: each value multiset contributes the kernel value
    times the product of per-symbol binomial coefficients.  Exact for any n.
    """
    total = 0.0
    for combo, mults in _multiset_terms(values):
        v = float(values[combo])
        if v == 0.0:
            continue
        w = 1.0
        for sym, mult in mults:
            w *= math.comb(int(counts[sym]), mult)
            if w == 0.0:
                break
        total += v * w
    return total


def ustat_value(kernel, x: Sequence[int]) -> float:
    """Sum of the kernel over all strictly increasing index p-tuples of x.

    An order-0 constant (passed as a plain number) yields 0.0.
    """
    if isinstance(kernel, (int, float)):
        return 0.0
    xs = np.asarray(x, dtype=int)
    p = kernel.order
    n = xs.size
    if n < p:
        raise ParameterError(f"sample size {n} is below the kernel order {p}")
    m = kernel.alphabet_size
    if xs.size and (xs.min() < 0 or xs.max() >= m):
        raise ParameterError("sample symbols must lie in the kernel alphabet")
    counts = np.bincount(xs, minlength=m)
    return ustat_from_counts(kernel.values, counts)


def hoeffding_sum(hs: HoeffdingSet, n: int, x: Sequence[int]) -> float:
    """Evaluate ``sum_s C(n-s, p-s) J_s(psi_s)`` on a sample.

    The order-0 level contributes its constant ``C(n, p) psi_0`` (the
    expectation term of the decomposition identity).
    """
    p = hs.order
    total = math.comb(n, p) * float(hs.psi[0])
    for s in range(1, p + 1):
        total += math.comb(n - s, p - s) * ustat_value(hs.psi_kernel(s), x)
    return total


def reconstruct_check(kernel: SymmetricKernel, mu: DiscreteMeasure,
                      x: Sequence[int]) -> float:
    """Absolute gap between J_p(psi) and its decomposition sum on one sample."""
    xs = np.asarray(x, dtype=int)
    if xs.size < kernel.order:
        raise ParameterError("sample shorter than the kernel order")
    hs = decompose(kernel, mu)
    lhs = ustat_value(kernel, xs)
    rhs = hoeffding_sum(hs, xs.size, xs)
    return abs(lhs - rhs)


def variance(kernel: SymmetricKernel, mu: DiscreteMeasure, n: int):
    """Variance of J_p(psi) by the two classical formulas.

    Returns ``(v_hoeffding, v_g)``: the degenerate-kernel form and the
    projection-function form.  Both are computed exactly and must agree to
    relative 1e-9; both must dominate the ``C(n, p) Var(psi)`` lower bound.
    """
    _check_same_alphabet(kernel, mu)
    p = kernel.order
    if n < p:
        raise ParameterError(f"sample size {n} is below the kernel order {p}")
    hs = decompose(kernel, mu)
    g0 = float(hs.g[0])

    v_h = 0.0
    for s in range(1, p + 1):
        # psi_s is degenerate, hence centered: Var = ||psi_s||^2
        var_s = tensor_lp_norm(hs.psi[s], mu, 2.0) ** 2
        v_h += math.comb(n - s, p - s) ** 2 * math.comb(n, s) * var_s

    v_g = 0.0
    for k in range(1, p + 1):
        var_gk = tensor_lp_norm(hs.g[k], mu, 2.0) ** 2 - g0 * g0
        v_g += math.comb(p, k) * math.comb(n - p, p - k) * var_gk
    v_g *= math.comb(n, p)

    if abs(v_h - v_g) > 1e-9 * (1.0 + abs(v_g)):
        raise ContractViolationError(
            f"variance formulas disagree: {v_h!r} vs {v_g!r}"
        )
    lower = math.comb(n, p) * (tensor_lp_norm(kernel.values, mu, 2.0) ** 2 - g0 * g0)
    if v_h < lower - 1e-9 * (1.0 + abs(lower)):
        raise ContractViolationError(
            f"variance {v_h!r} fell below its lower bound {lower!r}"
        )
    return v_h, v_g


def hoeffding_rank(kernel: SymmetricKernel, mu: DiscreteMeasure,
                   tol: float = RANK_TOL) -> Optional[int]:
    """Smallest order with an active decomposition level, or None if all vanish.

    The kernel is centered first (the rank is defined for mean-zero
    statistics).  The rank computed from the degenerate kernels must match
    the one computed from the projection-function variances.
    """
    _check_same_alphabet(kernel, mu)
    g0 = float(compute_g(kernel, mu, 0))
    centered = kernel if abs(g0) <= tol else kernel.shifted(g0)
    hs = decompose(centered, mu)
    p = kernel.order

    rank_psi = None
    for s in range(1, p + 1):
        if tensor_lp_norm(hs.psi[s], mu, 2.0) ** 2 > tol:
            rank_psi = s
            break
    rank_g = None
    for k in range(1, p + 1):
        var_gk = tensor_lp_norm(hs.g[k], mu, 2.0) ** 2 - float(hs.g[0]) ** 2
        if var_gk > tol:
            rank_g = k
            break
    if rank_psi != rank_g:
        raise ContractViolationError(
            f"rank mismatch between constructions: {rank_psi} vs {rank_g}"
        )
    return rank_psi


def enumerate_samples(m: int, n: int):
    """All m^n samples, guarded by the exact-enumeration cap."""
    if m**n > ENUMERATION_CAP:
        raise CapacityError(f"{m}^{n} states exceed the enumeration cap {ENUMERATION_CAP}")
    return itertools.product(range(m), repeat=n)
