"""Dense coefficient containers, l_r / mixed norms, slicing and the text format.

Coordinate indices exposed to callers (``slice_last``) are 1-based, matching the
mathematical notation used by the form files; storage is ordinary 0-based numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

MAX_ORDER = 8
MAX_ENTRIES = 1 << 24


class TensorError(ValueError):
    """Malformed tensor, bad exponent or out-of-range index."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.setflags(write=False)
    return arr


def _check_dims(dims: Sequence[int]) -> tuple[int, ...]:
    dims = tuple(int(n) for n in dims)
    if not 1 <= len(dims) <= MAX_ORDER:
        raise TensorError(f"order must be in [1, {MAX_ORDER}], got {len(dims)}")
    if any(n < 1 for n in dims):
        raise TensorError(f"dims must be positive, got {dims}")
    if math.prod(dims) > MAX_ENTRIES:
        raise TensorError(f"{math.prod(dims)} entries exceeds limit {MAX_ENTRIES}")
    return dims


@dataclass(frozen=True, eq=False)
class CoefficientTensor:
    """Order-m array of real coefficients with per-axis dimensions.

    ``entries`` is an ndarray of shape ``dims``; it is int64 when every entry is
    an integer (``integer_flag``), float64 otherwise, and read-only either way.
    """

    entries: np.ndarray
    integer_flag: bool = field(init=False)

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.ndim == 0:
            raise TensorError("a tensor needs at least one axis")
        _check_dims(arr.shape)
        if arr.dtype.kind in "iub":
            data = arr.astype(np.int64)
            integral = True
        else:
            data = arr.astype(np.float64)
            if not np.all(np.isfinite(data)):
                raise TensorError("entries must be finite")
            integral = bool(np.all(data == np.round(data))) and bool(
                np.all(np.abs(data) < 2.0**62)
            )
            if integral:
                data = data.astype(np.int64)
        object.__setattr__(self, "entries", _freeze(data))
        object.__setattr__(self, "integer_flag", integral)

    @classmethod
    def from_flat(cls, dims: Sequence[int], values: Iterable[float]) -> "CoefficientTensor":
        dims = _check_dims(dims)
        vals = np.asarray(list(values))
        if vals.size != math.prod(dims):
            raise TensorError(f"expected {math.prod(dims)} entries, got {vals.size}")
        return cls(vals.reshape(dims))

    @property
    def order(self) -> int:
        return self.entries.ndim

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.entries.shape)

    def as_float(self) -> np.ndarray:
        return self.entries.astype(np.float64)

    def scaled(self, c: float) -> "CoefficientTensor":
        return CoefficientTensor(self.entries * c)

    def __eq__(self, other):
        if not isinstance(other, CoefficientTensor):
            return NotImplemented
        return self.dims == other.dims and bool(np.array_equal(self.entries, other.entries))

    def __hash__(self):
        return hash((self.dims, self.entries.tobytes()))

    def __repr__(self):
        return f"CoefficientTensor(dims={self.dims}, integer={self.integer_flag})"


@dataclass(frozen=True, eq=False)
class VectorTensor:
    """Order-m array of d-dimensional Euclidean vectors; ``entries`` has shape dims + (d,)."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.entries)
        if arr.ndim < 2:
            raise TensorError("vector tensor needs at least one index axis and a vector axis")
        _check_dims(arr.shape[:-1])
        if arr.shape[-1] < 1:
            raise TensorError("ambient dimension must be positive")
        if arr.dtype.kind in "iub":
            data = arr.astype(np.int64)
        else:
            data = arr.astype(np.float64)
            if not np.all(np.isfinite(data)):
                raise TensorError("entries must be finite")
            if np.all(data == np.round(data)) and np.all(np.abs(data) < 2.0**62):
                data = data.astype(np.int64)
        object.__setattr__(self, "entries", _freeze(data))

    @classmethod
    def from_scalar(cls, a: CoefficientTensor, direction: Sequence[float] = (1.0,)) -> "VectorTensor":
        """Embed a scalar tensor along a fixed vector: y_i = a_i * direction."""
        u = np.asarray(direction)
        return cls(a.entries[..., None] * u)

    @property
    def integer_flag(self) -> bool:
        return self.entries.dtype == np.int64

    @property
    def order(self) -> int:
        return self.entries.ndim - 1

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.entries.shape[:-1])

    @property
    def ambient_dim(self) -> int:
        return int(self.entries.shape[-1])

    def entry_norms(self) -> np.ndarray:
        return np.sqrt(np.sum(self.entries.astype(np.float64) ** 2, axis=-1))

    def __repr__(self):
        return f"VectorTensor(dims={self.dims}, d={self.ambient_dim})"


@dataclass(frozen=True)
class MixedNormSpec:
    """Exponents (r_1, ..., r_m) of a nested mixed norm, outermost first."""

    exponents: tuple[float, ...]

    def __post_init__(self):
        exps = tuple(float(r) for r in self.exponents)
        if not exps:
            raise TensorError("mixed norm needs at least one exponent")
        if any(not (r > 0 and math.isfinite(r)) for r in exps):
            raise TensorError(f"exponents must be positive and finite, got {exps}")
        object.__setattr__(self, "exponents", exps)

    def __len__(self):
        return len(self.exponents)


def _check_r(r: float) -> float:
    r = float(r)
    if not r > 0:
        raise TensorError(f"exponent must be positive, got {r}")
    if math.isinf(r):
        raise TensorError("r = inf is not supported; use max_abs")
    return r


def ell_r_norm(a: CoefficientTensor, r: float) -> float:
    """(sum |a|^r)^(1/r), power sum accumulated with math.fsum."""
    r = _check_r(r)
    x = np.abs(a.as_float()).ravel()
    if r == 1.0:
        return math.fsum(x)
    if r == 2.0 and float(x.max(initial=0.0)) < 1e150:
        return math.sqrt(math.fsum(x * x))
    scale = float(x.max())
    if scale == 0.0:
        return 0.0
    # scaling by the max keeps x**r in range for large r
    return scale * math.fsum((x / scale) ** r) ** (1.0 / r)


def ell_r_power_exact(a: CoefficientTensor, r: int) -> int:
    """sum |a|^r as an exact integer; requires an integer tensor and integer r."""
    if not a.integer_flag:
        raise TensorError("exact power sums need an integer tensor")
    if int(r) != r or r < 1:
        raise TensorError(f"exact power sums need a positive integer exponent, got {r}")
    r = int(r)
    values, counts = np.unique(np.abs(a.entries), return_counts=True)
    return sum(int(v) ** r * int(c) for v, c in zip(values, counts))


def max_abs(a: CoefficientTensor | VectorTensor) -> float:
    if isinstance(a, VectorTensor):
        return float(a.entry_norms().max())
    return float(np.abs(a.as_float()).max())


def mixed_norm(a: CoefficientTensor, spec: MixedNormSpec | Sequence[float]) -> float:
    """Nested norm: reduce the last axis with r_m first, finish with r_1 on axis 1."""
    if not isinstance(spec, MixedNormSpec):
        spec = MixedNormSpec(tuple(spec))
    if len(spec) != a.order:
        raise TensorError(f"spec has {len(spec)} exponents for an order-{a.order} tensor")
    if all(r == spec.exponents[0] for r in spec.exponents):
        return ell_r_norm(a, spec.exponents[0])
    cur = np.abs(a.as_float())
    for r in reversed(spec.exponents):
        scale = cur.max(axis=-1, keepdims=True)
        safe = np.where(scale > 0, scale, 1.0)
        cur = scale[..., 0] * np.sum((cur / safe) ** r, axis=-1) ** (1.0 / r)
    return float(cur)


def slice_last(a: CoefficientTensor, k: int) -> CoefficientTensor:
    """The order-(m-1) tensor a[..., k] for 1-based k."""
    if a.order < 2:
        raise TensorError("slice_last needs an order >= 2 tensor")
    n = a.dims[-1]
    if not 1 <= k <= n:
        raise TensorError(f"slice index {k} outside 1..{n}")
    return CoefficientTensor(a.entries[..., k - 1])


def stack_last(slices: Sequence[CoefficientTensor]) -> CoefficientTensor:
    """Inverse of slicing every coordinate of the last axis."""
    return CoefficientTensor(np.stack([s.entries for s in slices], axis=-1))


# -- text format -------------------------------------------------------------
#
#   scalar:  "order n_1 ... n_m" then prod(n) entries, row-major
#   vector:  "vector order n_1 ... n_m d" then prod(n)*d components, row-major

def _parse_number(tok: str) -> int | float:
    try:
        return int(tok)
    except ValueError:
        return float(tok)


def _format_number(x) -> str:
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def parse_tensor_text(text: str) -> CoefficientTensor | VectorTensor:
    lines = [ln.split("#", 1)[0] for ln in text.splitlines()]
    tokens = " ".join(lines).split()
    if not tokens:
        raise TensorError("empty tensor file")
    is_vector = tokens[0] == "vector"
    if is_vector:
        tokens = tokens[1:]
    try:
        order = int(tokens[0])
        header_len = 1 + order + (1 if is_vector else 0)
        shape = [int(t) for t in tokens[1:header_len]]
        values = [_parse_number(t) for t in tokens[header_len:]]
    except (ValueError, IndexError) as exc:
        raise TensorError(f"bad tensor header or entry: {exc}") from None
    if len(shape) != header_len - 1 or order < 1:
        raise TensorError("truncated tensor header")
    if is_vector:
        dims, d = shape[:-1], shape[-1]
        _check_dims(dims)
        if d < 1 or len(values) != math.prod(dims) * d:
            raise TensorError(f"expected {math.prod(dims) * d} components, got {len(values)}")
        return VectorTensor(np.asarray(values).reshape(tuple(dims) + (d,)))
    return CoefficientTensor.from_flat(shape, values)


def format_tensor_text(a: CoefficientTensor | VectorTensor) -> str:
    if isinstance(a, VectorTensor):
        header = " ".join(map(str, ["vector", a.order, *a.dims, a.ambient_dim]))
        rows = a.entries.reshape(-1, a.ambient_dim)
    else:
        header = " ".join(map(str, [a.order, *a.dims]))
        rows = a.entries.reshape(-1, a.dims[-1])
    body = "\n".join(" ".join(_format_number(x) for x in row.tolist()) for row in rows)
    return header + "\n" + body + "\n"
