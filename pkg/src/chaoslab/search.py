"""Searches for coefficient tensors with a large ratio l_r(a) / moment_p(a).

Large ratios are lower-bound witnesses for the optimal constant C(n) in
l_r(a) <= C(n) moment_p(a).  Candidates are scored through a design matrix W
whose rows are the sign products e1_{i1}...em_{im}: moment_p(a)^p is the mean of
|W a|^p.  In exact mode W lists every sign pattern (first sign of each variable
pinned); past the enumeration budget it is a fixed Monte Carlo sample, shared by
every candidate in a run so comparisons are not noise-driven.
"""

from __future__ import annotations

import csv
import io
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .chaos import (
    chaos_matrix,
    default_threads,
    mean_abs_rademacher_sum,
    moment_budget,
    moment_p_exact,
)
from .inequalities import FitResult, fit_exponent
from .tensor import CoefficientTensor, ell_r_norm

STRATEGIES = (
    "exhaustive-signs",
    "sign-coordinate-ascent",
    "annealing",
    "continuous-perturbation",
    "product-ones",
)
EXHAUSTIVE_BITS = 24
_EXHAUSTIVE_WORK = 1 << 34
_DESIGN_LIMIT = 1 << 24
_IMPROVE = 1e-12


class SearchError(ValueError):
    pass


class SearchInfeasible(SearchError):
    """The requested search space is too large to run."""


@dataclass(frozen=True)
class SearchConfig:
    m: int
    n: int
    r: float
    p: float = 1.0
    strategy: str = "sign-coordinate-ascent"
    budget: int = 1000
    seed: int = 0
    restarts: int = 1
    mc_samples: int = 20000
    max_bits: Optional[int] = None

    def __post_init__(self):
        if self.strategy not in STRATEGIES:
            raise SearchError(f"unknown strategy {self.strategy!r}; pick one of {STRATEGIES}")
        if self.m < 1 or self.n < 1:
            raise SearchError("m and n must be positive")
        if not (self.r > 0 and self.p > 0):
            raise SearchError("r and p must be positive")
        if self.budget < 0 or self.restarts < 1:
            raise SearchError("budget must be >= 0 and restarts >= 1")
        if self.strategy == "exhaustive-signs" and self.n**self.m > EXHAUSTIVE_BITS:
            raise SearchInfeasible(f"exhaustive search over 2^{self.n ** self.m} sign tensors is too large")

    @property
    def dims(self) -> tuple[int, ...]:
        return (self.n,) * self.m


@dataclass(frozen=True)
class SearchResult:
    best_tensor: CoefficientTensor
    best_ratio: float
    trace: tuple[tuple[int, float], ...]
    config: SearchConfig
    evaluations: int
    objective_mode: str
    exact_moment: Optional[str] = None

    def to_dict(self) -> dict:
        out = {
            "best_ratio": self.best_ratio,
            "best_tensor": {"dims": list(self.best_tensor.dims),
                            "entries": self.best_tensor.entries.ravel().tolist()},
            "trace": [list(t) for t in self.trace],
            "config": asdict(self.config),
            "evaluations": self.evaluations,
            "objective_mode": self.objective_mode,
        }
        if self.exact_moment is not None:
            out["exact_moment"] = self.exact_moment
        return out

    def trace_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "ratio"])
        w.writerows(self.trace)
        return buf.getvalue()


class Objective:
    """Batch evaluator of l_r(a) / moment_p(a) over flattened tensors."""

    def __init__(self, dims: Sequence[int], r: float, p: float, *,
                 max_bits: Optional[int] = None, mc_samples: int = 20000, seed: int = 0):
        self.dims = tuple(dims)
        self.r, self.p = float(r), float(p)
        size = math.prod(self.dims)
        rows = 1 << sum(n - 1 for n in self.dims)
        if sum(self.dims) <= moment_budget(max_bits) and rows * size <= _DESIGN_LIMIT:
            self.mode = "exact"
            self.W = chaos_matrix(self.dims)
        else:
            self.mode = "monte-carlo"
            rng = np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), 2**32]))
            k = min(int(mc_samples), max(100, _DESIGN_LIMIT // size))
            w = np.ones((k, 1))
            for n in self.dims:
                eps = 1.0 - 2.0 * rng.integers(0, 2, size=(k, n))
                w = (w[:, :, None] * eps[:, None, :]).reshape(k, -1)
            self.W = w

    def moments(self, flat: np.ndarray) -> np.ndarray:
        s = np.abs(np.atleast_2d(flat) @ self.W.T)
        return np.mean(s**self.p, axis=1) ** (1.0 / self.p)

    def norms(self, flat: np.ndarray) -> np.ndarray:
        a = np.abs(np.atleast_2d(flat))
        scale = a.max(axis=1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        return scale[:, 0] * np.sum((a / safe) ** self.r, axis=1) ** (1.0 / self.r)

    def ratios(self, flat: np.ndarray) -> np.ndarray:
        return self.norms(flat) / self.moments(flat)

    def ratio_from_sums(self, norm: float, s: np.ndarray) -> float:
        return norm / float(np.mean(np.abs(s) ** self.p) ** (1.0 / self.p))


def objective(a: CoefficientTensor, r: float, p: float, **kw) -> float:
    """l_r(a) / moment_p(a) through the exact enumeration engine."""
    return ell_r_norm(a, r) / moment_p_exact(a, p, **kw).value


def product_ones_ratio(m: int, n: int, r: float) -> tuple[float, Fraction]:
    """Closed form for the all-ones tensor at p = 1.

    The chaos factorises as prod_j (sum_i e^(j)_i), so moment_1 = (E|S_n|)^m.
    Returns (ratio, exact moment).
    """
    mom = mean_abs_rademacher_sum(n) ** m
    return n ** (m / r) / float(mom), mom


def _rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=[int(seed) & (2**64 - 1), stream]))


def _sign_batch(start: int, stop: int, size: int) -> np.ndarray:
    """+-1 tensors for indices [start, stop), first entry pinned to +1, lexicographic."""
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(size - 2, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts) & 1
    return np.hstack([np.ones((len(idx), 1)), 1.0 - 2.0 * bits])


def _exhaustive(cfg: SearchConfig, obj: Objective):
    size = cfg.n**cfg.m
    total = 1 << (size - 1)
    if total * obj.W.shape[0] > _EXHAUSTIVE_WORK:
        raise SearchInfeasible("exhaustive search work exceeds the limit")
    chunk = max(1, (1 << 22) // obj.W.shape[0])
    best, best_flat, trace = -math.inf, None, []
    for start in range(0, total, chunk):
        batch = _sign_batch(start, min(start + chunk, total), size)
        vals = obj.ratios(batch)
        k = int(np.argmax(vals))
        if vals[k] > best:
            best, best_flat = float(vals[k]), batch[k]
            trace.append((start + k + 1, best))
    return best_flat, trace, total


def _ascent(cfg: SearchConfig, obj: Objective, restart: int, budget: int, start=None):
    """Best-improvement single sign flips from a random (or given) +-1 start."""
    size = cfg.n**cfg.m
    a = start if start is not None else 1.0 - 2.0 * _rng(cfg.seed, restart).integers(0, 2, size)
    a = a.astype(np.float64)
    s = obj.W @ a
    norm = float(obj.norms(a)[0])  # flips keep |a| and so the l_r norm
    cur = obj.ratio_from_sums(norm, s)
    evals = 1
    trace = [(evals, cur)]
    while evals + size <= budget:
        cand = s[:, None] - 2.0 * obj.W * a[None, :]
        mom = np.mean(np.abs(cand) ** obj.p, axis=0) ** (1.0 / obj.p)
        vals = norm / mom
        evals += size
        k = int(np.argmax(vals))
        if not vals[k] > cur * (1 + _IMPROVE):
            break
        s = cand[:, k].copy()
        a[k] = -a[k]
        cur = float(vals[k])
        trace.append((evals, cur))
    return a, cur, trace, evals


def _anneal(cfg: SearchConfig, obj: Objective, restart: int, budget: int, start=None):
    """Single-flip Metropolis on log(ratio) with geometric cooling t0 -> t0 / 1000."""
    size = cfg.n**cfg.m
    rng = _rng(cfg.seed, restart)
    a = start if start is not None else 1.0 - 2.0 * rng.integers(0, 2, size)
    a = a.astype(np.float64)
    s = obj.W @ a
    norm = float(obj.norms(a)[0])
    cur = obj.ratio_from_sums(norm, s)
    best, best_a = cur, a.copy()
    trace = [(1, best)]
    steps = max(0, budget - 1)
    t0 = 0.1
    alpha = (1e-3) ** (1.0 / max(1, steps))
    flips = rng.integers(0, size, steps)
    coins = rng.random(steps)
    temp = t0
    for step in range(steps):
        k = int(flips[step])
        s_new = s - 2.0 * a[k] * obj.W[:, k]
        val = obj.ratio_from_sums(norm, s_new)
        delta = math.log(val) - math.log(cur)
        if delta >= 0 or coins[step] < math.exp(delta / temp):
            a[k] = -a[k]
            s, cur = s_new, val
            if cur > best * (1 + _IMPROVE):
                best, best_a = cur, a.copy()
                trace.append((step + 2, best))
        temp *= alpha
    return best_a, best, trace, steps + 1


def _perturb(obj: Objective, a0: np.ndarray, rng: np.random.Generator, budget: int, sign: float):
    """Random-direction hill climbing on the unit l2 sphere; maximises sign * ratio."""
    a = a0 / np.linalg.norm(a0)
    cur = sign * float(obj.ratios(a)[0])
    trace = [(1, sign * cur)]
    step = 0.5
    for it in range(1, budget):
        g = rng.standard_normal(a.shape)
        cand = a + step * g / np.linalg.norm(g)
        cand /= np.linalg.norm(cand)
        val = sign * float(obj.ratios(cand)[0])
        if val > cur + abs(cur) * _IMPROVE:
            a, cur = cand, val
            step = min(step * 1.5, 2.0)
            trace.append((it + 1, sign * cur))
        else:
            step = max(step * 0.95, 1e-6)
    return a, sign * cur, trace


def maximize_ratio(cfg: SearchConfig, start: Optional[CoefficientTensor] = None,
                   threads: Optional[int] = None) -> SearchResult:
    """Maximise l_r(a) / moment_p(a) over tensors of shape (n,)*m.

    Restarts run independently; the best ratio wins, ties to the lower restart
    index.  ``start`` seeds restart 0 of the local strategies.
    """
    obj = Objective(cfg.dims, cfg.r, cfg.p, max_bits=cfg.max_bits,
                    mc_samples=cfg.mc_samples, seed=cfg.seed)
    start_flat = None if start is None else start.as_float().ravel()
    size = cfg.n**cfg.m

    if cfg.strategy == "product-ones":
        best = np.ones(size)
        trace, evals = [(0, float(obj.ratios(best)[0]))], 0
    elif cfg.strategy == "exhaustive-signs":
        best, trace, evals = _exhaustive(cfg, obj)
    else:
        if cfg.budget == 0 and start_flat is None:
            raise SearchError("budget 0 needs an initial candidate")
        per = max(1, cfg.budget // cfg.restarts)

        def run(k: int):
            init = start_flat if (k == 0 and start_flat is not None) else None
            if cfg.strategy == "sign-coordinate-ascent":
                return _ascent(cfg, obj, k, per, init)
            if cfg.strategy == "annealing":
                return _anneal(cfg, obj, k, per, init)
            rng = _rng(cfg.seed, k)
            a0 = init if init is not None else rng.standard_normal(size)
            a, val, tr = _perturb(obj, a0, rng, per, +1.0)
            return a, val, tr, per

        threads = threads or default_threads()
        if threads <= 1 or cfg.restarts == 1:
            runs = [run(k) for k in range(cfg.restarts)]
        else:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                runs = list(pool.map(run, range(cfg.restarts)))
        winner = max(range(cfg.restarts), key=lambda k: (runs[k][1], -k))
        best = runs[winner][0]
        trace, evals, offset = [], 0, 0
        for a, val, tr, used in runs:
            trace.extend((offset + st, v) for st, v in tr)
            offset += used
            evals += used
        trace = _running_max(trace)

    tensor = CoefficientTensor(best.reshape(cfg.dims))
    return _finish(cfg, tensor, trace, evals, obj)


def _running_max(trace):
    out, top = [], -math.inf
    for st, v in trace:
        if v > top:
            top = v
            out.append((st, v))
    return out


def _finish(cfg: SearchConfig, tensor: CoefficientTensor, trace, evals, obj: Objective) -> SearchResult:
    exact = None
    if cfg.strategy == "product-ones" and cfg.p == 1:
        ratio, mom = product_ones_ratio(cfg.m, cfg.n, cfg.r)
        exact = f"{mom.numerator}/{mom.denominator}"
        mode = "closed-form"
    elif obj.mode == "exact":
        mres = moment_p_exact(tensor, cfg.p, max_bits=cfg.max_bits)
        ratio = ell_r_norm(tensor, cfg.r) / mres.value
        exact = mres.exact_string()
        mode = "exact"
    else:
        ratio = float(obj.ratios(tensor.as_float().ravel())[0])
        mode = "monte-carlo"
    return SearchResult(tensor, ratio, tuple((int(s), float(v)) for s, v in trace),
                        cfg, int(evals), mode, exact)


def estimate_A1(n: int, budget: int = 10_000, seed: int = 0, restarts: int = 4) -> SearchResult:
    """Smallest moment_1(a) / l2(a) found over real a in R^n.

    Starts are the flat vectors (1,...,1,0,...,0)/sqrt(k), k = 1..n, and
    ``restarts`` Gaussian vectors; each start is refined by random-direction
    hill climbing.  The result is an upper bound on the finite-n constant.
    """
    if n < 1:
        raise SearchError("n must be at least 1")
    cfg = SearchConfig(m=1, n=n, r=2.0, p=1.0, strategy="continuous-perturbation",
                       budget=budget, seed=seed, restarts=restarts)
    obj = Objective((n,), 2.0, 1.0)
    flats = np.array([[1.0] * k + [0.0] * (n - k) for k in range(1, n + 1)])
    flats /= np.linalg.norm(flats, axis=1, keepdims=True)
    inv = 1.0 / obj.ratios(flats)
    starts = [flats[int(np.argmin(inv))]]
    starts += [_rng(seed, k).standard_normal(n) for k in range(restarts)]
    per = max(1, budget // len(starts))
    best, best_val, trace, offset = None, math.inf, [], 0
    for k, a0 in enumerate(starts):
        # maximising l2 / moment_1 is minimising moment_1 / l2
        a, val, tr = _perturb(obj, a0, _rng(seed, 1000 + k), per, +1.0)
        val = 1.0 / val
        trace.extend((offset + st, 1.0 / v) for st, v in tr)
        offset += per
        if val < best_val * (1 - _IMPROVE):
            best, best_val = a, val
    tensor = CoefficientTensor(best)
    value = moment_p_exact(tensor, 1).value / ell_r_norm(tensor, 2)
    running, low = [], math.inf
    for st, v in trace:
        if v < low:
            low = v
            running.append((int(st), float(v)))
    return SearchResult(tensor, value, tuple(running), cfg, offset, "exact")


def exponent_sweep(m: int, r: float, p: float, n_list: Sequence[int],
                   strategy: str = "product-ones", budget: int = 1000, seed: int = 0,
                   restarts: int = 1, threads: Optional[int] = None,
                   results: Optional[list] = None) -> FitResult:
    """maximize_ratio at each n, then a log-log fit of best ratio against n.

    Sizes whose objective cannot be evaluated are skipped; fewer than three
    usable sizes is an error.  Pass a list as ``results`` to receive the
    per-n SearchResults.
    """
    def one(n: int):
        cfg = SearchConfig(m=m, n=n, r=r, p=p, strategy=strategy, budget=budget,
                           seed=seed, restarts=restarts)
        if strategy == "product-ones" and p == 1:
            ratio, mom = product_ones_ratio(m, n, r)
            tensor = CoefficientTensor(np.ones(cfg.dims, dtype=np.int64))
            return SearchResult(tensor, ratio, ((0, ratio),), cfg, 0, "closed-form",
                                f"{mom.numerator}/{mom.denominator}")
        try:
            return maximize_ratio(cfg, threads=1)
        except SearchError:
            return None

    threads = threads or default_threads()
    if threads <= 1:
        found = [one(n) for n in n_list]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            found = list(pool.map(one, n_list))
    usable = [res for res in found if res is not None]
    if len(usable) < 3:
        raise SearchError(f"only {len(usable)} feasible sizes; need at least 3")
    if results is not None:
        results.extend(usable)
    return fit_exponent([(res.config.n, res.best_ratio) for res in usable])
