"""Random geometric graphs: pattern-count statistics and radius-regime experiments.

A graph is built on n sampled points with edges between distinct points at
Euclidean distance strictly between 0 and the radius; the statistic counts
p-subsets whose induced graph is isomorphic to a fixed connected pattern.
Counting is exact: a spatial index only prunes the enumeration (every vertex
of a connected pattern lies within (p - 1) * radius of the anchor vertex),
and each surviving tuple is checked by exhaustive isomorphism.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np
from scipy.spatial import cKDTree

from .errors import CapacityError, ParameterError, PreconditionError
from .montecarlo import (
    NormalizationRecord,
    ReplicateSet,
    coupling_bias,
    debiased_distance,
    fit_distance_powerlaw,
    ols_loglog,
    stream,
    wasserstein_to_normal,
)

MAX_PATTERN_VERTICES = 7

_FEASIBILITY_STREAM = (1 << 62) + 90
_QPROB_STREAM = (1 << 62) + 91
_VARBOOT_STREAM = (1 << 62) + 100
_GK_OUTER_STREAM = (1 << 62) + 200
_GK_INNER_A_STREAM = (1 << 62) + 201
_GK_INNER_B_STREAM = (1 << 62) + 202


def _pair_bits(p: int) -> dict:
    bits = {}
    for b, (i, j) in enumerate(itertools.combinations(range(p), 2)):
        bits[(i, j)] = b
    return bits


@dataclass(frozen=True)
class GraphPattern:
    """A fixed connected graph on p vertices (2 <= p <= 7), given by adjacency."""

    adjacency: np.ndarray
    name: str = "custom"
    _iso_codes: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise ParameterError("adjacency must be a square matrix")
        p = a.shape[0]
        if p < 2:
            raise ParameterError("patterns need at least two vertices")
        if p > MAX_PATTERN_VERTICES:
            raise CapacityError(f"patterns are capped at {MAX_PATTERN_VERTICES} vertices")
        if np.any(np.diag(a)):
            raise ParameterError("adjacency must have a zero diagonal")
        if not np.array_equal(a, a.T):
            raise ParameterError("adjacency must be symmetric")
        if not _connected(a):
            raise ParameterError("pattern must be connected")
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)

        bits = _pair_bits(p)
        codes = set()
        for perm in itertools.permutations(range(p)):
            code = 0
            for (i, j), b in bits.items():
                if a[perm[i], perm[j]]:
                    code |= 1 << b
            codes.add(code)
        arr = np.array(sorted(codes), dtype=np.int64)
        arr.setflags(write=False)
        object.__setattr__(self, "_iso_codes", arr)

    @property
    def p(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.sum()) // 2


def _connected(a: np.ndarray) -> bool:
    p = a.shape[0]
    seen = {0}
    frontier = [0]
    while frontier:
        v = frontier.pop()
        for w in np.flatnonzero(a[v]):
            if w not in seen:
                seen.add(int(w))
                frontier.append(int(w))
    return len(seen) == p


def named_pattern(name: str) -> GraphPattern:
    if name == "edge":
        return GraphPattern(np.array([[0, 1], [1, 0]]), name="edge")
    if name == "triangle":
        return complete_pattern(3)
    if name == "path3":
        return GraphPattern(np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]), name="path3")
    raise ParameterError(f"unknown pattern name {name!r}")


def complete_pattern(p: int) -> GraphPattern:
    a = np.ones((p, p), dtype=bool)
    np.fill_diagonal(a, False)
    return GraphPattern(a, name=f"complete{p}")


def geometric_codes(points: np.ndarray, t: float) -> np.ndarray:
    """Bit-encoded adjacency of point tuples; edges need 0 < distance < t."""
    pts = np.asarray(points, dtype=float)
    p = pts.shape[-2]
    diff = pts[..., :, None, :] - pts[..., None, :, :]
    d2 = np.sum(diff * diff, axis=-1)
    codes = np.zeros(pts.shape[:-2], dtype=np.int64)
    for b, (i, j) in enumerate(itertools.combinations(range(p), 2)):
        edge = (d2[..., i, j] > 0.0) & (d2[..., i, j] < t * t)
        codes |= edge.astype(np.int64) << b
    return codes


def pattern_indicator(points: np.ndarray, pat: GraphPattern, t: float) -> np.ndarray:
    """Vectorized induced-isomorphism indicator over batches of p-point tuples."""
    codes = geometric_codes(points, t)
    return np.isin(codes, pat._iso_codes).astype(float)


def pattern_kernel(points: np.ndarray, pat: GraphPattern, t: float) -> int:
    """1 iff the graph induced on the p given points is isomorphic to the pattern."""
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] != pat.p:
        raise ParameterError(f"need exactly {pat.p} points")
    if t <= 0:
        raise ParameterError("radius must be positive")
    return int(pattern_indicator(pts[None, ...], pat, t)[0])


def count_subgraphs(points: np.ndarray, pat: GraphPattern, t: float) -> int:
    """Number of p-subsets inducing a copy of the pattern; exact.

    A KD-tree restricts enumeration to tuples whose vertices all lie within
    (p - 1) * t of the minimum-index vertex, which is a superset of every
    connected tuple; the strict distance predicate then decides each tuple,
    so the result equals direct enumeration over all p-subsets.
    """
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    p = pat.p
    if n < p:
        raise ParameterError(f"need at least {p} points, got {n}")
    if t <= 0:
        return 0
    tree = cKDTree(pts)
    if p == 2:
        pairs = tree.query_pairs(r=t, output_type="ndarray")
        if pairs.size == 0:
            return 0
        d2 = np.sum((pts[pairs[:, 0]] - pts[pairs[:, 1]]) ** 2, axis=1)
        return int(np.count_nonzero((d2 > 0.0) & (d2 < t * t)))

    radius = (p - 1) * t
    neighborhoods = tree.query_ball_point(pts, r=radius)
    total = 0
    for i in range(n - p + 1):
        cand = [j for j in neighborhoods[i] if j > i]
        if len(cand) < p - 1:
            continue
        tuples = np.array(list(itertools.combinations(cand, p - 1)), dtype=int)
        batch = np.concatenate(
            [np.broadcast_to(pts[i], (tuples.shape[0], 1, pts.shape[1])),
             pts[tuples]],
            axis=1,
        )
        total += int(pattern_indicator(batch, pat, t).sum())
    return total


@dataclass(frozen=True)
class DensityModel:
    """Sampling model for the point distribution (bounded, a.e.-continuous density)."""

    kind: str  # "uniform-box" | "uniform-ball" | "gaussian" | "custom"
    dimension: int
    sampler_fn: Optional[Callable[[np.random.Generator, int], np.ndarray]] = None
    bounded: bool = True
    ae_continuous: bool = True

    def __post_init__(self):
        if self.kind not in ("uniform-box", "uniform-ball", "gaussian", "custom"):
            raise ParameterError(f"unknown density kind {self.kind!r}")
        if self.dimension < 1:
            raise ParameterError("dimension must be >= 1")
        if self.kind == "custom" and self.sampler_fn is None:
            raise ParameterError("custom densities need a sampler")
        if not self.bounded:
            raise ParameterError("the density must be bounded")

    @property
    def is_uniform(self) -> bool:
        return self.kind in ("uniform-box", "uniform-ball")

    def in_support(self, points: np.ndarray) -> np.ndarray:
        """Support membership per point tuple (conservative True for custom)."""
        pts = np.asarray(points, dtype=float)
        if self.kind == "uniform-box":
            ok = (pts >= 0.0) & (pts <= 1.0)
            return ok.all(axis=(-2, -1))
        if self.kind == "uniform-ball":
            return (np.sum(pts * pts, axis=-1) <= 1.0).all(axis=-1)
        return np.ones(pts.shape[:-2], dtype=bool)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        d = self.dimension
        if self.kind == "uniform-box":
            return rng.random((n, d))
        if self.kind == "gaussian":
            return rng.standard_normal((n, d))
        if self.kind == "uniform-ball":
            dirs = rng.standard_normal((n, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            radii = rng.random(n) ** (1.0 / d)
            return dirs * radii[:, None]
        return np.asarray(self.sampler_fn(rng, n), dtype=float)


@dataclass(frozen=True)
class RadiusSchedule:
    """Radius sequence t_n per regime.

    C1 (sparse), C2 (dense, uniform points) and C3 (dense, non-uniform points)
    use t_n = n^(-beta/d); C4 (thermodynamic) uses t_n = (rho / n)^(1/d).
    The sparse regime additionally requires 1 < beta < p / (p - 1), which
    depends on the pattern and is checked when an experiment is assembled.
    """

    regime: str
    beta: Optional[float] = None
    rho: Optional[float] = None

    def __post_init__(self):
        if self.regime not in ("C1", "C2", "C3", "C4"):
            raise ParameterError(f"unknown regime {self.regime!r}")
        if self.regime == "C4":
            if self.rho is None or self.rho <= 0:
                raise ParameterError("regime C4 needs rho > 0")
        else:
            if self.beta is None or self.beta <= 0:
                raise ParameterError(f"regime {self.regime} needs beta > 0")
            if self.regime in ("C2", "C3") and not self.beta < 1:
                raise ParameterError("dense regimes need 0 < beta < 1")
            if self.regime == "C1" and not self.beta > 1:
                raise ParameterError("the sparse regime needs beta > 1")

    def radius(self, n: int, d: int) -> float:
        if self.regime == "C4":
            return (self.rho / n) ** (1.0 / d)
        return float(n) ** (-self.beta / d)


def regime_targets(p: int, schedule: RadiusSchedule) -> dict:
    """Fitted-exponent targets per regime, with bound-only flags where applicable."""
    beta = schedule.beta
    if schedule.regime == "C4":
        mean_t, var_t, var_flag = 1.0, 1.0, "asymptotic"
        dw_t, dw_flag = -0.5, "asymptotic-rate"
    elif schedule.regime == "C1":
        mean_t = p - beta * (p - 1)
        var_t, var_flag = mean_t, "asymptotic"
        dw_t, dw_flag = -mean_t / 2.0, "asymptotic-rate"
    elif schedule.regime == "C3":
        mean_t = p - beta * (p - 1)
        var_t, var_flag = (2 * p - 1) - beta * (2 * p - 2), "asymptotic"
        dw_t, dw_flag = -0.5, "asymptotic-rate"
    else:  # C2: only a variance lower bound is known; rates are bounds, not asymptotics
        mean_t = p - beta * (p - 1)
        var_t, var_flag = mean_t, "lower-bound-only"
        dw_t, dw_flag = (2 * p - 3 - beta * (2 * p - 2)) / 2.0, "upper-bound-only"
    return {
        "mean": {"target": mean_t, "flag": "asymptotic"},
        "variance": {"target": var_t, "flag": var_flag},
        "distance": {"target": dw_t, "flag": dw_flag},
    }


@dataclass(frozen=True)
class RegimeReport:
    config: dict
    records: tuple
    exponents: dict

    def to_dict(self) -> dict:
        return {
            "config": self.config,
            "records": list(self.records),
            "exponents": self.exponents,
        }


def _bootstrap_stats(counts: np.ndarray, rng: np.random.Generator, b: int = 200):
    r = counts.size
    idx = rng.integers(0, r, size=(b, r))
    res = counts[idx]
    return (
        float(res.mean(axis=1).std(ddof=1)),
        float(res.var(axis=1, ddof=1).std(ddof=1)),
    )


def _feasibility_probe(pat, density, t, seed, trials=20_000) -> float:
    """Positivity witness for the pattern probability at radius t.

    Plain sampling would almost never land a p-tuple inside one connectivity
    ball at small radii, so the probe anchors each tuple at a density draw and
    scatters the other points within the (p - 1) t connectivity range.  A hit
    whose points all lie in the support witnesses a positive-measure pattern
    event (the built-in densities are bounded below on their support), so the
    returned hit fraction is positive if and only if the probe found a
    realizable configuration.
    """
    p = pat.p
    d = density.dimension
    rng = stream(seed, _FEASIBILITY_STREAM)
    anchors = density.sample(rng, trials)
    offsets = rng.uniform(-1.0, 1.0, size=(trials, p - 1, d)) * (p - 1) * t
    pts = np.concatenate([anchors[:, None, :], anchors[:, None, :] + offsets], axis=1)
    hits = pattern_indicator(pts, pat, t) * density.in_support(pts)
    return float(hits.mean())


def regime_experiment(pat: GraphPattern, density: DensityModel,
                      schedule: RadiusSchedule, ns: Sequence[int], reps: int,
                      seed: int, bootstrap: int = 200) -> RegimeReport:
    """Sweep sample sizes along a radius schedule and fit scaling exponents.

    Per n: ``reps`` replicate counts (replicate j of the i-th sample size reads
    the stream keyed by (seed, (i + 1) << 32 | j)), mean and variance with
    bootstrap standard errors, the coupling distance of the empirically
    normalized counts to the normal, the estimator's calibrated noise floor at
    this replicate budget, and the floor-debiased distance.  Exponents for the
    mean, variance and distance are least-squares log-log fits; targets carry
    regime flags (the dense-uniform regime only ever yields bounds).
    """
    p = pat.p
    d = density.dimension
    if reps < 100:
        raise ParameterError("regime experiments need at least 100 replicates")
    ns = [int(n) for n in ns]
    if len(ns) < 4:
        raise ParameterError("regime sweeps need at least 4 sample sizes")
    if any(n < p for n in ns):
        raise ParameterError("every sample size must be at least the pattern size")
    if schedule.regime == "C1" and not schedule.beta < p / (p - 1):
        raise ParameterError("the sparse regime needs beta < p / (p - 1)")
    if schedule.regime == "C2" and not density.is_uniform:
        raise ParameterError("regime C2 is the uniform-density regime")
    if schedule.regime == "C3" and density.is_uniform:
        raise ParameterError("regime C3 needs a non-uniform density")

    t_large = max(schedule.radius(n, d) for n in ns)
    q_probe = _feasibility_probe(pat, density, t_large, seed)
    if q_probe <= 0.0:
        raise PreconditionError(
            "pattern is infeasible at the largest radius of the sweep"
        )

    floor = coupling_bias(reps, standardized=True)
    records = []
    for ni, n in enumerate(ns):
        t = schedule.radius(n, d)
        counts = np.empty(reps, dtype=float)
        for j in range(reps):
            rng = stream(seed, ((ni + 1) << 32) | j)
            counts[j] = count_subgraphs(density.sample(rng, n), pat, t)
        mean = float(counts.mean())
        var = float(counts.var(ddof=1))
        boot_rng = stream(seed, _VARBOOT_STREAM + ni)
        mean_se, var_se = _bootstrap_stats(counts, boot_rng, bootstrap)
        sd = math.sqrt(var) if var > 0 else 0.0
        if sd > 0:
            rep = ReplicateSet(
                values=(counts - mean) / sd,
                n=n,
                seed=seed + 1_000_003 * (ni + 1),
                normalization=NormalizationRecord(mean=mean, sd=sd, source="empirical"),
            )
            dw = wasserstein_to_normal(rep, bootstrap=bootstrap)
            dw_val, dw_se = dw.value, dw.stderr
        else:
            dw_val, dw_se = float("nan"), float("nan")
        records.append({
            "n": n,
            "t": t,
            "mean": mean,
            "mean_se": mean_se,
            "var": var,
            "var_se": var_se,
            "dw": dw_val,
            "dw_se": dw_se,
            "dw_floor": floor,
            "dw_debiased": debiased_distance(dw_val, floor) if sd > 0 else float("nan"),
        })

    targets = regime_targets(p, schedule)
    ns_arr = [r["n"] for r in records]
    exps = {}
    mean_fit = ols_loglog(ns_arr, [max(r["mean"], 1e-300) for r in records])
    exps["mean"] = {"fitted": mean_fit.slope, "stderr": mean_fit.stderr, **targets["mean"]}
    var_fit = ols_loglog(ns_arr, [max(r["var"], 1e-300) for r in records])
    exps["variance"] = {"fitted": var_fit.slope, "stderr": var_fit.stderr,
                        **targets["variance"]}
    # the raw coupling distances sit on the estimator's noise floor; the
    # headline exponent comes from the floor-aware quadrature model
    dws = [r["dw"] for r in records]
    if all(math.isfinite(v) and v > 0 for v in dws):
        dw_fit = fit_distance_powerlaw(ns_arr, dws, [r["dw_se"] for r in records], floor)
        dw_fit_raw = ols_loglog(ns_arr, dws)
        exps["distance"] = {
            "fitted": dw_fit.slope,
            "stderr": dw_fit.stderr,
            "amplitude": dw_fit.amplitude,
            "fitted_raw": dw_fit_raw.slope,
            **targets["distance"],
        }
    else:
        exps["distance"] = {
            "fitted": float("nan"),
            "stderr": float("nan"),
            "amplitude": float("nan"),
            "fitted_raw": float("nan"),
            **targets["distance"],
        }

    config = {
        "pattern": pat.name,
        "pattern_vertices": p,
        "density": density.kind,
        "dimension": d,
        "regime": schedule.regime,
        "beta": schedule.beta,
        "rho": schedule.rho,
        "ns": ns,
        "reps": reps,
        "seed": seed,
        "feasibility_probe": q_probe,
    }
    return RegimeReport(config=config, records=tuple(records), exponents=exps)


def variance_lower_bound_check(pat: GraphPattern, density: DensityModel,
                               t: float, n: int, reps: int, seed: int,
                               q_samples: int = 200_000) -> dict:
    """Monte Carlo check that Var(count) dominates C(n, p) * q * (1 - q).

    The pattern indicator is its own square, so the single-tuple variance is
    q - q^2 with q the pattern probability; the count variance can never fall
    below the binomially weighted single-tuple variance.  Returns both sides
    with standard errors and an ``ok`` flag at three combined SEs.
    """
    if not density.is_uniform:
        raise ParameterError("the variance lower bound check targets uniform densities")
    p = pat.p
    counts = np.empty(reps, dtype=float)
    for j in range(reps):
        rng = stream(seed, (n << 32) | j)
        counts[j] = count_subgraphs(density.sample(rng, n), pat, t)
    lhs = float(counts.var(ddof=1))
    _, lhs_se = _bootstrap_stats(counts, stream(seed, _VARBOOT_STREAM), 200)

    qrng = stream(seed, _QPROB_STREAM)
    hits = 0.0
    done = 0
    chunk = 50_000
    while done < q_samples:
        b = min(chunk, q_samples - done)
        pts = density.sample(qrng, b * p).reshape(b, p, density.dimension)
        hits += float(pattern_indicator(pts, pat, t).sum())
        done += b
    q_hat = hits / q_samples
    q_se = math.sqrt(max(q_hat * (1.0 - q_hat), 0.0) / q_samples)
    cnp = math.comb(n, p)
    rhs = cnp * (q_hat - q_hat * q_hat)
    rhs_se = cnp * abs(1.0 - 2.0 * q_hat) * q_se

    rel = 0.0
    if lhs > 0:
        rel += (lhs_se / lhs) ** 2
    if rhs > 0:
        rel += (rhs_se / rhs) ** 2
    rel = math.sqrt(rel)
    ok = lhs >= rhs * (1.0 - 3.0 * rel)
    return {
        "n": n,
        "t": t,
        "lhs_variance": lhs,
        "lhs_se": lhs_se,
        "rhs_bound": rhs,
        "rhs_se": rhs_se,
        "q_hat": q_hat,
        "q_se": q_se,
        "ok": bool(ok),
    }


@dataclass(frozen=True)
class GkContractionEstimate:
    value: float
    stderr: float
    square: float
    square_se: float
    reliable: bool


def gk_contraction_mc(pat: GraphPattern, density: DensityModel, t: float,
                      i: int, k: int, r: int, tau: int, mc_samples: int,
                      seed: int, inner: int = 128) -> GkContractionEstimate:
    """Nested Monte Carlo estimate of a projection-contraction norm.

    Estimates ``||g_i *_r^tau g_k||`` for the pattern indicator kernel at
    radius t, where g_j integrates the kernel over p - j coordinates.  Two
    independent inner estimates of the contraction integrand are multiplied,
    which makes the squared-norm estimator unbiased (inner streams A/B and the
    outer stream are disjoint); the square root is then slightly conservative
    at the reported standard error.  Estimates whose SE exceeds 30% of the
    value are flagged unreliable rather than rejected.
    """
    p = pat.p
    if not (1 <= i <= p and 1 <= k <= p):
        raise ParameterError(f"projection levels must lie in [1, {p}]")
    if not (0 <= tau <= r <= min(i, k)):
        raise ParameterError(f"need 0 <= tau <= r <= min(i, k), got r={r}, tau={tau}")
    if mc_samples < 10_000:
        raise ParameterError("need at least 10^4 outer samples")
    if t <= 0:
        raise ParameterError("radius must be positive")

    d = density.dimension
    n_share = r - tau       # shared kept coordinates
    n_own_i = i - r
    n_own_k = k - r
    n_outer = n_share + n_own_i + n_own_k
    n_comp_i = p - i
    n_comp_k = p - k

    outer_rng = stream(seed, _GK_OUTER_STREAM)
    rng_a = stream(seed, _GK_INNER_A_STREAM)
    rng_b = stream(seed, _GK_INNER_B_STREAM)

    def inner_mean(rng, y_share, y_own_i, y_own_k, c):
        # one inner copy: average over `inner` draws of the product of the two
        # kernel evaluations sharing the integrated block
        u = density.sample(rng, c * inner * tau).reshape(c, inner, tau, d) \
            if tau else np.zeros((c, inner, 0, d))
        vi = density.sample(rng, c * inner * n_comp_i).reshape(c, inner, n_comp_i, d) \
            if n_comp_i else np.zeros((c, inner, 0, d))
        vk = density.sample(rng, c * inner * n_comp_k).reshape(c, inner, n_comp_k, d) \
            if n_comp_k else np.zeros((c, inner, 0, d))
        share = np.broadcast_to(y_share[:, None, :, :], (c, inner, n_share, d))
        own_i = np.broadcast_to(y_own_i[:, None, :, :], (c, inner, n_own_i, d))
        own_k = np.broadcast_to(y_own_k[:, None, :, :], (c, inner, n_own_k, d))
        pts_i = np.concatenate([u, share, own_i, vi], axis=2)
        pts_k = np.concatenate([u, share, own_k, vk], axis=2)
        vals = pattern_indicator(pts_i, pat, t) * pattern_indicator(pts_k, pat, t)
        return vals.mean(axis=1)

    chunk = max(1, min(mc_samples, 8_000_000 // max(inner * p * d, 1)))
    total = 0.0
    total_sq = 0.0
    done = 0
    while done < mc_samples:
        c = min(chunk, mc_samples - done)
        y = density.sample(outer_rng, c * n_outer).reshape(c, n_outer, d) \
            if n_outer else np.zeros((c, 0, d))
        y_share = y[:, :n_share]
        y_own_i = y[:, n_share:n_share + n_own_i]
        y_own_k = y[:, n_share + n_own_i:]
        est = inner_mean(rng_a, y_share, y_own_i, y_own_k, c) * \
            inner_mean(rng_b, y_share, y_own_i, y_own_k, c)
        total += float(est.sum())
        total_sq += float(np.dot(est, est))
        done += c

    sq_mean = total / mc_samples
    sq_var = max(total_sq / mc_samples - sq_mean**2, 0.0)
    sq_se = math.sqrt(sq_var / mc_samples)
    value = math.sqrt(max(sq_mean, 0.0))
    stderr = sq_se / (2.0 * value) if value > 0 else math.sqrt(sq_se)
    reliable = value > 0 and stderr <= 0.3 * value
    return GkContractionEstimate(value=value, stderr=stderr, square=sq_mean,
                                 square_se=sq_se, reliable=bool(reliable))
