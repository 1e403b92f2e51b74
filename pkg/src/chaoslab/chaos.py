"""L_p moments of multiple Rademacher sums.

The moment of S = sum a_{i_1..i_m} e1_{i_1} ... em_{i_m} over independent uniform
sign vectors e1..em is computed by exhaustive enumeration (exact for integer
data) or by Monte Carlo.

Enumeration layout: zero slices are dropped (they do not change S), the axis with
the most coordinates is moved last, and every variable's first sign is pinned to
+1 (flipping a whole variable only flips the sign of S).  The leading variables
are contracted against their sign matrices once, giving a small matrix C of
shape (P, n_last); each block of S is then a single product C_blk @ H_blk.T.
Blocks are fixed by the problem size alone and reduced in block order, so the
result does not depend on the number of worker threads.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, Iterator, Optional

import numpy as np

from .tensor import CoefficientTensor, VectorTensor

DEFAULT_MOMENT_BITS = 26
BLOCK = 1 << 20
MC_CHUNK = 4096
_EXACT_FLOAT_BOUND = 2**53

EXACT = "exact-enumeration"
MONTE_CARLO = "monte-carlo"
PARSEVAL = "parseval-identity"


class BudgetExceeded(RuntimeError):
    """Exhaustive enumeration would exceed the configured bit budget."""


def default_threads() -> int:
    return os.cpu_count() or 1


def moment_budget(max_bits: Optional[int] = None) -> int:
    if max_bits is not None:
        return int(max_bits)
    env = os.environ.get("CHAOSLAB_MAX_BITS")
    return int(env) if env else DEFAULT_MOMENT_BITS


@dataclass(frozen=True)
class MomentResult:
    """L_p norm of a chaos; ``value`` is the p-th root.

    In exact mode ``exact_sum / pattern_count`` is the p-th power of the moment,
    i.e. sum over all 2^(sum n_j) sign patterns of |S|^p divided by their number.
    """

    p: float
    value: float
    mode: str
    pattern_count: Optional[int] = None
    sample_count: Optional[int] = None
    exact_sum: Optional[int] = None
    stderr: Optional[float] = None
    enumerated: Optional[int] = None

    @property
    def exact_power(self) -> Optional[Fraction]:
        if self.exact_sum is None:
            return None
        return Fraction(self.exact_sum, self.pattern_count)

    @property
    def power(self) -> float:
        """value ** p, taken from the exact sum when there is one."""
        if self.exact_sum is not None:
            return float(self.exact_power)
        return self.value**self.p

    def exact_string(self) -> Optional[str]:
        if self.exact_sum is None:
            return None
        return f"{self.exact_sum}/{self.pattern_count}"

    def to_dict(self) -> dict:
        out = {
            "p": self.p,
            "value": self.value,
            "mode": self.mode,
            "pattern_count": self.pattern_count,
            "sample_count": self.sample_count,
            "stderr": self.stderr,
            "exact_power": self.exact_string(),
        }
        return {k: v for k, v in out.items() if v is not None}


def rademacher_eval(n: int, t: float) -> int:
    """r_n(t) = sign(sin 2^n pi t), with parity of floor(2^n t) at dyadic zeros."""
    if n < 1:
        raise ValueError(f"Rademacher index must be >= 1, got {n}")
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must lie in [0, 1], got {t}")
    frac = Fraction(t)
    return -1 if (math.floor(frac * 2**n) % 2) else 1


def mean_abs_rademacher_sum(n: int) -> Fraction:
    """E|e_1 + ... + e_n| = n 2^(1-n) C(n-1, floor((n-1)/2)), exactly."""
    if n < 1:
        raise ValueError("n must be positive")
    return Fraction(n * math.comb(n - 1, (n - 1) // 2), 2 ** (n - 1))


# -- sign matrices -------------------------------------------------------------


def sign_rows(n: int, start: int, stop: int, pin_first: bool = True) -> np.ndarray:
    """Sign vectors for pattern indices [start, stop), lexicographic with +1 < -1.

    With ``pin_first`` the first coordinate is +1 and the index spans the
    remaining n-1 coordinates (most significant bit = coordinate 2).
    """
    free = n - 1 if pin_first else n
    idx = np.arange(start, stop, dtype=np.int64)
    shifts = np.arange(free - 1, -1, -1, dtype=np.int64)
    bits = (idx[:, None] >> shifts) & 1
    signs = (1 - 2 * bits).astype(np.float64)
    if pin_first:
        signs = np.hstack([np.ones((len(idx), 1)), signs])
    return signs


def chaos_matrix(dims: tuple[int, ...]) -> np.ndarray:
    """Rows are the products e1_{i1}...em_{im} (flattened row-major) over all
    pinned sign patterns; moment_p(a)^p = mean(|W @ a.ravel()|^p)."""
    w = np.ones((1, 1))
    for n in dims:
        h = sign_rows(n, 0, 1 << (n - 1))
        w = np.einsum("pi,qj->pqij", w, h).reshape(w.shape[0] * h.shape[0], -1)
    return w


# -- enumeration plan ----------------------------------------------------------


@dataclass
class _Plan:
    lead: np.ndarray  # (P, n_last) or (P, n_last, d), float64
    n_last: int
    total_bits: int  # sum of original dims
    multiplicity: int  # full patterns represented by one enumerated pattern
    zero: bool

    @property
    def rows(self) -> int:
        return self.lead.shape[0]

    @property
    def cols(self) -> int:
        return 1 << (self.n_last - 1)

    def blocks(self) -> Iterator[tuple[int, int, int, int]]:
        qb = min(self.cols, BLOCK)
        pb = max(1, min(self.rows, BLOCK // qb))
        for p0 in range(0, self.rows, pb):
            for q0 in range(0, self.cols, qb):
                yield p0, min(p0 + pb, self.rows), q0, min(q0 + qb, self.cols)

    def block_values(self, blk) -> np.ndarray:
        p0, p1, q0, q1 = blk
        h = sign_rows(self.n_last, q0, q1)
        c = self.lead[p0:p1]
        if c.ndim == 2:
            return c @ h.T
        return np.einsum("pnd,qn->pqd", c, h)


def _strip_zero_slices(arr: np.ndarray, vector: bool) -> tuple[np.ndarray, int]:
    naxes = arr.ndim - 1 if vector else arr.ndim
    dropped = 0
    nz = arr != 0
    if vector:
        nz = nz.any(axis=-1)
    for ax in range(naxes):
        other = tuple(i for i in range(naxes) if i != ax)
        keep = nz.any(axis=other) if other else nz
        dropped += int((~keep).sum())
        arr = np.compress(keep, arr, axis=ax)
        nz = np.compress(keep, nz, axis=ax)
    return arr, dropped


def _plan(entries: np.ndarray, vector: bool, max_bits: int) -> _Plan:
    naxes = entries.ndim - 1 if vector else entries.ndim
    dims = entries.shape[:naxes]
    total_bits = sum(dims)
    arr, dropped = _strip_zero_slices(entries, vector)
    if arr.size == 0:
        return _Plan(np.zeros((1, 1)), 1, total_bits, 1 << total_bits, zero=True)
    eff = arr.shape[:naxes]
    if sum(eff) > max_bits:
        raise BudgetExceeded(
            f"enumeration needs {sum(eff)} sign bits (dims {eff}), budget is {max_bits}"
        )
    # largest axis last (the last of several equal ones); moments are symmetric
    last = max(range(naxes), key=lambda j: (eff[j], j))
    order = [j for j in range(naxes) if j != last] + [last]
    if vector:
        order.append(naxes)
    arr = np.transpose(arr.astype(np.float64), order)
    lead = arr.reshape((1,) + arr.shape)
    for j in range(naxes - 1):
        n = lead.shape[1]
        h = sign_rows(n, 0, 1 << (n - 1))
        rest = lead.shape[2:]
        lead = np.einsum("qi,pi...->pq...", h, lead).reshape((-1,) + rest)
    return _Plan(lead, arr.shape[naxes - 1], total_bits, 1 << (naxes + dropped), zero=False)


def _run(plan: _Plan, reducer: Callable[[np.ndarray], object], threads: Optional[int]):
    blocks = list(plan.blocks())
    work = lambda blk: reducer(plan.block_values(blk))
    threads = threads or default_threads()
    if threads <= 1 or len(blocks) == 1:
        return [work(b) for b in blocks]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(work, blocks))


def _int_power_sum(values: np.ndarray, p: int) -> int:
    """sum values**p exactly for nonnegative integer-valued int64 data."""
    if values.size == 0:
        return 0
    top = int(values.max())
    if top == 0:
        return 0
    if top**p * values.size < 2**63:
        return int(np.sum(values**p))
    uniq, counts = np.unique(values, return_counts=True)
    return sum(int(v) ** p * int(c) for v, c in zip(uniq.tolist(), counts.tolist()))


def _exact_ok(entries: np.ndarray) -> bool:
    return entries.dtype == np.int64 and int(np.abs(entries).sum()) < _EXACT_FLOAT_BOUND


def _check_p(p: float) -> float:
    p = float(p)
    if not (p > 0 and math.isfinite(p)):
        raise ValueError(f"p must be positive and finite, got {p}")
    return p


def _is_int(p: float) -> bool:
    return float(p).is_integer()


def moment_p_exact(
    a: CoefficientTensor,
    p: float,
    max_bits: Optional[int] = None,
    threads: Optional[int] = None,
) -> MomentResult:
    """Exhaustive L_p moment of the scalar chaos with coefficients ``a``.

    Integer tensors with integer p are accumulated in arbitrary precision and
    carry an exact rational ``exact_power``.
    """
    p = _check_p(p)
    plan = _plan(a.entries, vector=False, max_bits=moment_budget(max_bits))
    full = 1 << plan.total_bits
    if plan.zero:
        exact = 0 if (a.integer_flag and _is_int(p)) else None
        return MomentResult(p, 0.0, EXACT, pattern_count=full, exact_sum=exact, enumerated=1)
    enumerated = plan.rows * plan.cols
    if _exact_ok(a.entries) and _is_int(p):
        ip = int(p)
        parts = _run(plan, lambda s: _int_power_sum(np.abs(s).astype(np.int64), ip), threads)
        total = sum(parts) * plan.multiplicity
        value = float(Fraction(total, full)) ** (1.0 / p)
        return MomentResult(p, value, EXACT, pattern_count=full, exact_sum=total, enumerated=enumerated)
    parts = _run(plan, lambda s: float(np.sum(np.abs(s) ** p)), threads)
    mean = math.fsum(parts) / enumerated
    return MomentResult(p, mean ** (1.0 / p), EXACT, pattern_count=full, enumerated=enumerated)


def moment_p_exact_vec(
    y: VectorTensor,
    p: float,
    max_bits: Optional[int] = None,
    threads: Optional[int] = None,
) -> MomentResult:
    """Exhaustive L_p moment of a Euclidean-vector-valued chaos.

    Exact rationals are produced for integer data with even integer p.  At p = 2
    an over-budget input falls back to the orthonormality identity
    E||S||^2 = sum ||y||^2 (mode ``parseval-identity``).
    """
    p = _check_p(p)
    if y.ambient_dim == 1:
        return moment_p_exact(CoefficientTensor(y.entries[..., 0]), p, max_bits, threads)
    budget = moment_budget(max_bits)
    try:
        plan = _plan(y.entries, vector=True, max_bits=budget)
    except BudgetExceeded:
        if p == 2.0:
            return moment_l2_parseval(y)
        raise
    full = 1 << plan.total_bits
    exact_capable = _exact_ok(y.entries) and _is_int(p) and int(p) % 2 == 0
    if plan.zero:
        return MomentResult(
            p, 0.0, EXACT, pattern_count=full, exact_sum=0 if exact_capable else None, enumerated=1
        )
    enumerated = plan.rows * plan.cols
    if exact_capable:
        half = int(p) // 2

        def reducer(s):
            sq = np.sum(s * s, axis=-1)
            return _int_power_sum(np.rint(sq).astype(np.int64), half) if sq.max() < 2**53 else _big_sq(s, half)

        parts = _run(plan, reducer, threads)
        total = sum(parts) * plan.multiplicity
        value = float(Fraction(total, full)) ** (1.0 / p)
        return MomentResult(p, value, EXACT, pattern_count=full, exact_sum=total, enumerated=enumerated)
    parts = _run(plan, lambda s: float(np.sum(np.sqrt(np.sum(s * s, axis=-1)) ** p)), threads)
    mean = math.fsum(parts) / enumerated
    return MomentResult(p, mean ** (1.0 / p), EXACT, pattern_count=full, enumerated=enumerated)


def _big_sq(s: np.ndarray, half: int) -> int:
    ints = np.rint(s).astype(np.int64).reshape(-1, s.shape[-1]).tolist()
    return sum(sum(c * c for c in row) ** half for row in ints)


def moment_l2_parseval(y: VectorTensor | CoefficientTensor) -> MomentResult:
    """L_2 moment from orthonormality of the Walsh products: sqrt(sum ||y||^2)."""
    e = y.entries
    full = 1 << sum(y.dims)
    if e.dtype == np.int64:
        total = int(np.sum(e.astype(object) ** 2))
        return MomentResult(2.0, math.sqrt(total), PARSEVAL, pattern_count=full, exact_sum=total * full)
    return MomentResult(2.0, math.sqrt(math.fsum((e.astype(np.float64) ** 2).ravel())), PARSEVAL)


# -- Monte Carlo -----------------------------------------------------------------


def _chunk_rng(seed: int, chunk: int) -> np.random.Generator:
    key = [int(seed) & 0xFFFFFFFFFFFFFFFF, int(chunk)]
    return np.random.Generator(np.random.Philox(key=key))


def _sample_sums(entries: np.ndarray, naxes: int, rng: np.random.Generator, k: int) -> np.ndarray:
    dims = entries.shape[:naxes]
    signs = [1.0 - 2.0 * rng.integers(0, 2, size=(k, n), dtype=np.int8) for n in dims]
    x = signs[0] @ entries.astype(np.float64).reshape(dims[0], -1)
    x = x.reshape((k,) + entries.shape[1:])
    for eps in signs[1:]:
        x = np.einsum("kn,kn...->k...", eps, x)
    return x


def _mc_chunk(entries: np.ndarray) -> int:
    return max(16, min(MC_CHUNK, (1 << 24) // max(1, entries.size)))


def moment_p_mc(
    a: CoefficientTensor | VectorTensor,
    p: float,
    samples: int,
    seed: int,
    threads: Optional[int] = None,
) -> MomentResult:
    """Monte Carlo L_p moment from ``samples`` i.i.d. sign patterns.

    Samples are drawn in fixed chunks (size set by the tensor size); chunk c uses a Philox stream
    keyed by (seed, c), and chunk statistics are merged in chunk order, so the
    result depends only on (seed, samples).
    """
    p = _check_p(p)
    samples = int(samples)
    if samples < 100:
        raise ValueError(f"need at least 100 samples, got {samples}")
    vector = isinstance(a, VectorTensor)
    naxes = a.order
    entries = a.entries

    chunk = _mc_chunk(entries)

    def chunk_stats(c: int):
        k = min(chunk, samples - c * chunk)
        s = _sample_sums(entries, naxes, _chunk_rng(seed, c), k)
        mag = np.sqrt(np.sum(s * s, axis=-1)) if vector else np.abs(s)
        x = mag**p
        mean = float(np.mean(x))
        return k, mean, float(np.sum((x - mean) ** 2))

    nchunks = -(-samples // chunk)
    threads = threads or default_threads()
    if threads <= 1 or nchunks == 1:
        stats = [chunk_stats(c) for c in range(nchunks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            stats = list(pool.map(chunk_stats, range(nchunks)))
    # Chan et al. pairwise merge, in chunk order
    n, mean, m2 = stats[0]
    for k, mk, m2k in stats[1:]:
        tot = n + k
        delta = mk - mean
        mean += delta * k / tot
        m2 += m2k + delta * delta * n * k / tot
        n = tot
    stderr = math.sqrt(m2 / (n - 1)) / math.sqrt(n)
    return MomentResult(p, max(mean, 0.0) ** (1.0 / p), MONTE_CARLO, sample_count=n, stderr=stderr)


def moment_p(
    a: CoefficientTensor | VectorTensor,
    p: float,
    *,
    max_bits: Optional[int] = None,
    samples: int = 200_000,
    seed: int = 0,
    threads: Optional[int] = None,
) -> MomentResult:
    """Exact moment when enumeration fits the budget, Monte Carlo otherwise."""
    exact = moment_p_exact_vec if isinstance(a, VectorTensor) else moment_p_exact
    try:
        return exact(a, p, max_bits=max_bits, threads=threads)
    except BudgetExceeded:
        return moment_p_mc(a, p, samples, seed, threads=threads)
