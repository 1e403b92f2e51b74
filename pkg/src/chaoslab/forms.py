"""Sparse m-linear forms on sequence spaces and their exact sup-norm.

Monomial indices are 1-based: the monomial ``((2, 1), -1)`` is -x^(1)_2 x^(2)_1.
"""

from __future__ import annotations

import itertools
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Optional, Sequence

import numpy as np

from .chaos import default_threads, sign_rows
from .tensor import CoefficientTensor, TensorError

DEFAULT_SUPNORM_BITS = 24
_LEAD_LIMIT = 1 << 22


class FormError(ValueError):
    pass


class SupNormInfeasible(FormError):
    """The vertex enumeration is larger than the configured budget."""


def supnorm_budget(max_bits: Optional[int] = None) -> int:
    if max_bits is not None:
        return int(max_bits)
    env = os.environ.get("CHAOSLAB_MAX_BITS")
    return int(env) if env else DEFAULT_SUPNORM_BITS


def _coerce_coeff(c):
    if isinstance(c, (int, np.integer)):
        return int(c)
    c = float(c)
    if not math.isfinite(c):
        raise FormError("coefficients must be finite")
    return int(c) if c.is_integer() and abs(c) < 2**62 else c


@dataclass(frozen=True)
class SparseMultilinearForm:
    """Signed monomials sum_k c_k x^(1)_{i_1} ... x^(m)_{i_m}, sorted by index tuple."""

    monomials: tuple[tuple[tuple[int, ...], int | float], ...]
    order: int = field(init=False)

    def __post_init__(self):
        items = list(self.monomials.items()) if isinstance(self.monomials, Mapping) else list(self.monomials)
        if not items:
            raise FormError("a form needs at least one monomial")
        order = len(items[0][0])
        if order < 1:
            raise FormError("order must be at least 1")
        clean = {}
        for idx, c in items:
            idx = tuple(int(i) for i in idx)
            if len(idx) != order:
                raise FormError(f"monomial {idx} does not have {order} indices")
            if min(idx) < 1:
                raise FormError(f"indices are 1-based, got {idx}")
            if idx in clean:
                raise FormError(f"duplicate monomial {idx}")
            c = _coerce_coeff(c)
            if c == 0:
                raise FormError(f"zero coefficient at {idx}")
            clean[idx] = c
        object.__setattr__(self, "monomials", tuple(sorted(clean.items())))
        object.__setattr__(self, "order", order)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(max(idx[j] for idx, _ in self.monomials) for j in range(self.order))

    @property
    def integer_flag(self) -> bool:
        return all(isinstance(c, int) for _, c in self.monomials)

    def __len__(self):
        return len(self.monomials)

    def coefficient(self, idx: Sequence[int]):
        return dict(self.monomials).get(tuple(idx), 0)

    def index_array(self) -> np.ndarray:
        return np.array([idx for idx, _ in self.monomials], dtype=np.int64) - 1

    def coeff_array(self) -> np.ndarray:
        dtype = np.int64 if self.integer_flag else np.float64
        return np.array([c for _, c in self.monomials], dtype=dtype)


@dataclass(frozen=True)
class NormCertificate:
    """Exact sup-norm with a sign vertex attaining it (one vector per variable)."""

    value: int | float
    witness: tuple[tuple[int, ...], ...]
    method: str = "vertex-enumeration"
    vertices: int = 0

    def to_dict(self) -> dict:
        return {
            "value": self.value,
            "witness": [list(w) for w in self.witness],
            "method": self.method,
            "vertices": self.vertices,
        }


def evaluate(f: SparseMultilinearForm, x: Sequence[Sequence[float]]):
    """sum_k c_k prod_j x^(j)_{i_j}; exact for integer coefficients and inputs."""
    if len(x) != f.order:
        raise FormError(f"need {f.order} vectors, got {len(x)}")
    vecs = [np.asarray(v) for v in x]
    for j, (v, n) in enumerate(zip(vecs, f.dims)):
        if v.ndim != 1 or v.shape[0] < n:
            raise FormError(f"vector {j + 1} has length {v.shape[0] if v.ndim else 0}, needs {n}")
    integral = f.integer_flag and all(v.dtype.kind in "iub" for v in vecs)
    dtype = np.int64 if integral else np.float64
    idx = f.index_array()
    terms = f.coeff_array().astype(dtype)
    for j, v in enumerate(vecs):
        terms = terms * v.astype(dtype)[idx[:, j]]
    if integral:
        return int(sum(terms.tolist()))
    return math.fsum(terms.tolist())


def form_to_tensor(f: SparseMultilinearForm) -> CoefficientTensor:
    arr = np.zeros(f.dims, dtype=np.int64 if f.integer_flag else np.float64)
    idx = f.index_array()
    arr[tuple(idx.T)] = f.coeff_array()
    return CoefficientTensor(arr)


def tensor_to_form(a: CoefficientTensor) -> SparseMultilinearForm:
    nz = np.argwhere(a.entries != 0)
    if len(nz) == 0:
        raise FormError("the zero tensor has no monomials")
    return SparseMultilinearForm(
        tuple((tuple(int(i) + 1 for i in idx), a.entries[tuple(idx)].item()) for idx in nz)
    )


def last_variable_coordinates(f: SparseMultilinearForm) -> set[int]:
    return {idx[-1] for idx, _ in f.monomials}


# -- sup-norm by vertex enumeration -------------------------------------------


def _contract_rows(x: np.ndarray, n_lead: int) -> np.ndarray:
    """x has a leading row axis; contract the next n_lead axes against all pinned
    sign patterns, keeping rows outermost (lexicographic pattern order)."""
    for _ in range(n_lead):
        n = x.shape[1]
        h = sign_rows(n, 0, 1 << (n - 1))
        rest = x.shape[2:]
        x = np.einsum("qi,ri...->rq...", h, x).reshape((-1,) + rest)
    return x


def _pattern_rows(shape: Sequence[int]) -> int:
    return 1 << sum(n - 1 for n in shape)


def _blocks(x: np.ndarray, n_lead: int, base: int) -> Iterator[tuple[int, np.ndarray]]:
    """(first flat pattern index, block of contracted rows) for tensor x whose
    first n_lead axes are still to be enumerated."""
    n_lin = x.shape[-1]
    rows = _pattern_rows(x.shape[:n_lead])
    if n_lead == 0 or rows * n_lin <= _LEAD_LIMIT:
        yield base, _contract_rows(x[None], n_lead)
        return
    n1 = x.shape[0]
    q_total = 1 << (n1 - 1)
    rest_rows = rows // q_total
    if rest_rows * n_lin <= _LEAD_LIMIT:
        step = max(1, _LEAD_LIMIT // (rest_rows * n_lin))
        for q0 in range(0, q_total, step):
            h = sign_rows(n1, q0, min(q0 + step, q_total))
            yield base + q0 * rest_rows, _contract_rows(np.tensordot(h, x, axes=(1, 0)), n_lead - 1)
    else:
        for q in range(q_total):
            h = sign_rows(n1, q, q + 1)[0]
            yield from _blocks(np.tensordot(h, x, axes=(0, 0)), n_lead - 1, base + q * rest_rows)


def _task_ranges(t: np.ndarray, n_lead: int) -> list[tuple[int, int]]:
    """Split the first leading variable's patterns into independent tasks."""
    if n_lead == 0:
        return [(0, 1)]
    q_total = 1 << (t.shape[0] - 1)
    width = _pattern_rows(t.shape[1:n_lead]) * t.shape[-1]
    per_task = max(1, _LEAD_LIMIT // width)
    return [(q0, min(q0 + per_task, q_total)) for q0 in range(0, q_total, per_task)]


def _best_in_range(t: np.ndarray, n_lead: int, q0: int, q1: int, integral: bool):
    """(best l1 value, flat pattern index) over first-variable patterns [q0, q1)."""
    if n_lead == 0:
        blocks = _blocks(t, 0, 0)
    else:
        rest_rows = _pattern_rows(t.shape[1:n_lead])
        part = np.tensordot(sign_rows(t.shape[0], q0, q1), t, axes=(1, 0))
        if part.shape[0] * rest_rows * t.shape[-1] <= _LEAD_LIMIT:
            blocks = iter([(q0 * rest_rows, _contract_rows(part, n_lead - 1))])
        else:
            blocks = (
                blk
                for b in range(part.shape[0])
                for blk in _blocks(part[b], n_lead - 1, (q0 + b) * rest_rows)
            )
    best, best_at = None, 0
    for start, blk in blocks:
        vals = np.abs(blk).sum(axis=1)
        if integral:
            vals = np.rint(vals)
        k = int(np.argmax(vals))
        if best is None or vals[k] > best:
            best, best_at = vals[k], start + k
    return float(best), best_at


def sup_norm(
    f: SparseMultilinearForm,
    max_bits: Optional[int] = None,
    threads: Optional[int] = None,
) -> NormCertificate:
    """Exact sup of |f| over the product of unit sup-norm balls.

    f is affine in each variable, so the sup sits on a sign vertex.  The variable
    with most coordinates (the last of several) is kept linear: for fixed signs on
    the others it contributes the l1 norm of its coefficient vector.  The other
    variables' patterns are enumerated with their first sign pinned to +1; ties go
    to the lexicographically smallest pattern (+1 before -1).
    """
    dims = f.dims
    m = f.order
    lin = max(range(m), key=lambda j: (dims[j], j))
    lead_vars = [j for j in range(m) if j != lin]
    bits = sum(dims[j] for j in lead_vars)
    budget = supnorm_budget(max_bits)
    if bits > budget:
        raise SupNormInfeasible(f"sup-norm enumeration needs {bits} sign bits, budget is {budget}")
    integral = f.integer_flag
    if integral and sum(abs(c) for _, c in f.monomials) >= 2**53:
        raise SupNormInfeasible("integer coefficients too large for exact enumeration")
    try:
        t = form_to_tensor(f).entries.astype(np.float64)
    except TensorError as exc:
        raise FormError(str(exc)) from None
    t = np.transpose(t, lead_vars + [lin])
    n_lead = len(lead_vars)

    tasks = _task_ranges(t, n_lead)
    run = lambda r: _best_in_range(t, n_lead, r[0], r[1], integral)
    threads = threads or default_threads()
    if threads <= 1 or len(tasks) == 1:
        results = [run(r) for r in tasks]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, tasks))
    best, flat = None, 0
    for val, at in results:
        if best is None or val > best:
            best, flat = val, at

    # decode the winning pattern, then fix the linear variable by sign
    signs: dict[int, np.ndarray] = {}
    radices = [1 << (t.shape[j] - 1) for j in range(n_lead)]
    rem = flat
    for j in reversed(range(n_lead)):
        rem, q = divmod(rem, radices[j])
        signs[lead_vars[j]] = sign_rows(t.shape[j], q, q + 1)[0]
    coeffs = t
    for j in range(n_lead):
        coeffs = np.tensordot(signs[lead_vars[j]], coeffs, axes=(0, 0))
    signs[lin] = np.where(coeffs < 0, -1.0, 1.0)
    witness = tuple(tuple(int(s) for s in signs[j]) for j in range(m))
    value = evaluate(f, [np.array(w) for w in witness])
    if integral:
        assert value == int(best), (value, best)
    else:
        assert math.isclose(value, best, rel_tol=1e-9, abs_tol=1e-12), (value, best)
    vertices = 1 << sum(n - 1 for n in t.shape[:n_lead])
    return NormCertificate(value=value, witness=witness, vertices=vertices)


def sup_norm_bruteforce(f: SparseMultilinearForm):
    """Max of |f| over every sign vertex with itertools; small forms only."""
    best = 0
    for pattern in itertools.product(*[itertools.product((1, -1), repeat=n) for n in f.dims]):
        best = max(best, abs(evaluate(f, [np.array(v) for v in pattern])))
    return best


# -- text format ----------------------------------------------------------------


def parse_form_text(text: str) -> SparseMultilinearForm:
    items = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        toks = line.split()
        if len(toks) < 2:
            raise FormError(f"line {lineno}: need indices and a coefficient")
        try:
            idx = tuple(int(x) for x in toks[:-1])
            coeff = int(toks[-1]) if _looks_int(toks[-1]) else float(toks[-1])
        except ValueError as exc:
            raise FormError(f"line {lineno}: {exc}") from None
        items.append((idx, coeff))
    if not items:
        raise FormError("no monomials found")
    return SparseMultilinearForm(tuple(items))


def _looks_int(tok: str) -> bool:
    try:
        int(tok)
        return True
    except ValueError:
        return False


def format_form_text(f: SparseMultilinearForm, header: Iterable[str] = ()) -> str:
    lines = [f"# {h}" for h in header]
    for idx, c in f.monomials:
        lines.append(" ".join(map(str, idx)) + " " + (str(c) if isinstance(c, int) else repr(c)))
    return "\n".join(lines) + "\n"
