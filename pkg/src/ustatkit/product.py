"""Product formula for degenerate symmetric U-statistics and its companions.

The product of two degenerate statistics of orders p and q decomposes into
degenerate statistics of orders p + q - t for t = 0..2 min(p, q), with kernels
built from binomially weighted top-level projections of symmetrized
contractions.  This module materializes those kernels exactly, verifies the
identity sample-by-sample, and evaluates the combinatorial ratio that turns
the binomial prefactors into explicit n-powers.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .core import DiscreteMeasure, SymmetricKernel, is_degenerate, symmetrize, tensor_lp_norm
from .errors import CapacityError, ParameterError, PreconditionError
from .contractions import contract
from .hoeffding import ENUMERATION_CAP, decompose, enumerate_samples, ustat_from_counts

#: exact integer combinatorics below this, log-gamma above
_EXACT_COMB_LIMIT = 20


def _log_comb(n: int, k: int) -> float:
    if k < 0 or k > n:
        raise ParameterError(f"binomial C({n}, {k}) is out of range")
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def binom(n: int, k: int) -> float:
    """Binomial coefficient; exact integers when small, log-gamma otherwise."""
    if k < 0 or k > n:
        raise ParameterError(f"binomial C({n}, {k}) is out of range")
    if n <= _EXACT_COMB_LIMIT:
        return float(math.comb(n, k))
    return math.exp(_log_comb(n, k))


def multinomial(n: int, parts) -> float:
    """Multinomial coefficient ``n! / prod(parts!)``; the parts must sum to n."""
    parts = tuple(int(x) for x in parts)
    if any(x < 0 for x in parts) or sum(parts) != n:
        raise ParameterError(f"invalid multinomial ({n}; {parts})")
    if n <= _EXACT_COMB_LIMIT:
        out = math.factorial(n)
        for x in parts:
            out //= math.factorial(x)
        return float(out)
    log_val = math.lgamma(n + 1) - sum(math.lgamma(x + 1) for x in parts)
    return math.exp(log_val)


@dataclass(frozen=True)
class ProductKernelSet:
    """Decomposition level kernels for t = 0..2 min(p, q), plus their n.

    ``levels[t]`` is a SymmetricKernel of order p + q - t, except the order-0
    entry (reached only when p = q and t = 2p), which is a plain float.
    """

    levels: tuple
    n: int
    p: int
    q: int

    def order_of(self, t: int) -> int:
        return self.p + self.q - t


def product_kernels(psi: SymmetricKernel, phi: SymmetricKernel, n: int,
                    mu: DiscreteMeasure) -> ProductKernelSet:
    """Exact decomposition kernels for the product J_p(psi) * J_q(phi).

    For each t, the order p + q - t level sums, over the admissible overlap sizes r, the
    binomial coefficient counting index placements times the multinomial block
    count times the top-level projection of the symmetrized contraction
    ``psi *_r^{t-r} phi``.  Requires n >= p + q and degenerate inputs.
    """
    p, q = psi.order, phi.order
    if n < p + q:
        raise ParameterError(f"need n >= p + q = {p + q}, got {n}")
    if not is_degenerate(psi, mu) or not is_degenerate(phi, mu):
        raise PreconditionError("product kernels require degenerate inputs")

    levels = []
    for t in range(0, 2 * min(p, q) + 1):
        order = p + q - t
        acc = np.zeros((mu.alphabet_size,) * order) if order >= 1 else 0.0
        for r in range(math.ceil(t / 2), min(t, p, q) + 1):
            coeff = binom(n - p - q + t, t - r) * multinomial(
                order, (p - r, q - r, 2 * r - t)
            )
            contr = contract(psi, phi, r, t - r, mu)
            if order >= 1:
                sym = symmetrize(contr.tensor)
                top = decompose(sym, mu).psi[order]
                acc = acc + coeff * top
            else:
                acc = acc + coeff * float(contr.tensor)
        levels.append(SymmetricKernel(acc) if order >= 1 else float(acc))
    return ProductKernelSet(levels=tuple(levels), n=n, p=p, q=q)


def _product_residual(psi, phi, pk, counts) -> float:
    lhs = ustat_from_counts(psi.values, counts) * ustat_from_counts(phi.values, counts)
    rhs = 0.0
    for level in pk.levels:
        if isinstance(level, float):
            # the order-0 kernel contributes its constant (the product's mean)
            rhs += level
        else:
            rhs += ustat_from_counts(level.values, counts)
    return abs(lhs - rhs)


def verify_product_formula(psi: SymmetricKernel, phi: SymmetricKernel, n: int,
                           mu: DiscreteMeasure, mc: Optional[int] = None,
                           seed: int = 0) -> float:
    """Max residual of the product identity over samples of length n.

    Exhaustive over all m^n samples when that fits the enumeration cap;
    otherwise over ``mc`` sampled replicates (requested explicitly).
    """
    m = mu.alphabet_size
    pk = product_kernels(psi, phi, n, mu)
    worst = 0.0
    if m**n <= ENUMERATION_CAP:
        for x in enumerate_samples(m, n):
            counts = np.bincount(np.asarray(x, dtype=int), minlength=m)
            worst = max(worst, _product_residual(psi, phi, pk, counts))
        return worst
    if mc is None:
        raise CapacityError(
            f"{m}^{n} states exceed the enumeration cap; pass mc=R for sampling"
        )
    rng = np.random.default_rng(seed)
    for _ in range(int(mc)):
        counts = rng.multinomial(n, mu.weights)
        worst = max(worst, _product_residual(psi, phi, pk, counts))
    return worst


def prefactor_ratio(n: int, p: int, q: int, t: int, r: int) -> float:
    """Exact value of the normalized binomial-multinomial prefactor.

    This is ``sqrt(C(n, p+q-t)) / (sqrt(C(n, p)) sqrt(C(n, q))) *
    C(n+t-p-q, t-r) * multinomial(p+q-t; p-r, q-r, 2r-t)``, evaluated in
    log-gamma space (exact integers when every argument is small).  It decays
    like ``n^(t/2 - r)`` with an (p, q, t, r)-dependent constant; using the
    exact value everywhere keeps every bound a concrete number.
    """
    if n < p + q:
        raise ParameterError(f"need n >= p + q = {p + q}, got {n}")
    if not (1 <= r <= t <= p + q - 1):
        raise ParameterError(f"need 1 <= r <= t <= p + q - 1, got t={t}, r={r}")
    if r > min(p, q) or 2 * r < t:
        raise ParameterError(f"need ceil(t/2) <= r <= min(p, q), got t={t}, r={r}")
    small = max(n + t - p - q, n) <= _EXACT_COMB_LIMIT
    if small:
        val = math.sqrt(math.comb(n, p + q - t)) / (
            math.sqrt(math.comb(n, p)) * math.sqrt(math.comb(n, q))
        )
        return val * math.comb(n + t - p - q, t - r) * multinomial(
            p + q - t, (p - r, q - r, 2 * r - t)
        )
    log_val = (
        0.5 * _log_comb(n, p + q - t)
        - 0.5 * _log_comb(n, p)
        - 0.5 * _log_comb(n, q)
        + _log_comb(n + t - p - q, t - r)
        + math.lgamma(p + q - t + 1)
        - math.lgamma(p - r + 1)
        - math.lgamma(q - r + 1)
        - math.lgamma(2 * r - t + 1)
    )
    return math.exp(log_val)


def prefactor_ratio_normalized(n: int, p: int, q: int, t: int, r: int) -> float:
    """``prefactor_ratio * n^(r - t/2)``; stays bounded in n (constant tracking)."""
    return prefactor_ratio(n, p, q, t, r) * float(n) ** (r - t / 2.0)


def level_norm_bound(psi: SymmetricKernel, phi: SymmetricKernel, n: int,
                     mu: DiscreteMeasure, t: int):
    """(lhs, rhs): the order p + q - t level norm and its contraction-norm bound."""
    p, q = psi.order, phi.order
    if not (1 <= t <= 2 * min(p, q) - 1):
        raise ParameterError(f"need 1 <= t <= 2 min(p, q) - 1, got {t}")
    pk = product_kernels(psi, phi, n, mu)
    level = pk.levels[t]
    lhs = tensor_lp_norm(level.values, mu, 2.0)
    rhs = 0.0
    for r in range(math.ceil(t / 2), min(t, p, q) + 1):
        coeff = binom(n - p - q + t, t - r) * multinomial(
            p + q - t, (p - r, q - r, 2 * r - t)
        )
        rhs += coeff * contract(psi, phi, r, t - r, mu).l2_norm
    return lhs, rhs
