"""Shared brute-force oracles and hypothesis strategies.

The oracles here walk every sign pattern with itertools and plain Python
arithmetic; they share no code with the enumeration engine they check.
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np
from hypothesis import strategies as st

from chaoslab import CoefficientTensor, SparseMultilinearForm

R2 = ((1, 1), (1, -1))


def signs(n):
    return itertools.product((1, -1), repeat=n)


def chaos_values(entries):
    """Every value of the chaos, one per full sign pattern (nothing pinned)."""
    a = np.asarray(entries)
    out = []
    for pattern in itertools.product(*(list(signs(n)) for n in a.shape)):
        s = 0
        for idx in itertools.product(*(range(n) for n in a.shape)):
            term = a[idx].item()
            for j, i in enumerate(idx):
                term *= pattern[j][i]
            s += term
        out.append(s)
    return out


def oracle_power(entries, p: int) -> Fraction:
    """E|S|^p as an exact fraction, integer data and integer p."""
    vals = chaos_values(entries)
    return Fraction(sum(abs(int(v)) ** p for v in vals), len(vals))


def oracle_moment(entries, p: float) -> float:
    vals = chaos_values(entries)
    return (sum(abs(float(v)) ** p for v in vals) / len(vals)) ** (1 / p)


def oracle_vec_moment(y, p: float) -> float:
    """y has shape dims + (d,)."""
    y = np.asarray(y, dtype=float)
    dims = y.shape[:-1]
    total, count = 0.0, 0
    for pattern in itertools.product(*(list(signs(n)) for n in dims)):
        v = np.zeros(y.shape[-1])
        for idx in itertools.product(*(range(n) for n in dims)):
            c = 1
            for j, i in enumerate(idx):
                c *= pattern[j][i]
            v = v + c * y[idx]
        total += float(np.sqrt(v @ v)) ** p
        count += 1
    return (total / count) ** (1 / p)


@st.composite
def int_tensors(draw, max_order=3, max_dim=3, max_abs=5, max_cells=27):
    m = draw(st.integers(1, max_order))
    dims = []
    for _ in range(m):
        dims.append(draw(st.integers(1, max_dim)))
    while int(np.prod(dims)) > max_cells:
        dims[-1] -= 1
    vals = draw(st.lists(st.integers(-max_abs, max_abs), min_size=int(np.prod(dims)), max_size=int(np.prod(dims))))
    return CoefficientTensor(np.array(vals, dtype=np.int64).reshape(dims))


@st.composite
def float_tensors(draw, max_order=3, max_dim=3):
    m = draw(st.integers(1, max_order))
    dims = [draw(st.integers(1, max_dim)) for _ in range(m)]
    size = int(np.prod(dims))
    vals = draw(st.lists(st.floats(-10, 10, allow_nan=False, width=64), min_size=size, max_size=size))
    return CoefficientTensor(np.array(vals).reshape(dims))


@st.composite
def small_forms(draw, max_order=3, max_dim=3):
    m = draw(st.integers(1, max_order))
    dims = [draw(st.integers(1, max_dim)) for _ in range(m)]
    cells = list(itertools.product(*(range(1, n + 1) for n in dims)))
    chosen = draw(st.lists(st.sampled_from(cells), min_size=1, max_size=len(cells), unique=True))
    coeffs = draw(st.lists(st.integers(-4, 4).filter(bool), min_size=len(chosen), max_size=len(chosen)))
    return SparseMultilinearForm(tuple(zip(chosen, coeffs)))


@st.composite
def cube_tensors(draw, max_order=3, max_dim=4, integer=False):
    m = draw(st.integers(1, max_order))
    n = draw(st.integers(1, max_dim))
    while n**m > 27:
        n -= 1
    elem = st.integers(-5, 5) if integer else st.floats(-10, 10, allow_nan=False, width=64)
    vals = draw(st.lists(elem, min_size=n**m, max_size=n**m))
    return CoefficientTensor(np.array(vals).reshape((n,) * m))


# -- acceptance reporting: one line per criterion in the terminal summary ----------

ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
