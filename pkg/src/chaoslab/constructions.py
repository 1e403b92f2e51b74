"""The recursive +-1 forms R_m and random +-1 (Kahane-Salem-Zygmund type) forms.

R_1(x) = x_1 and, for m >= 2,

    R_m(x1, ..., xm) = (x1_1 + x1_2) R_{m-1}(x2, ..., xm)
                     + (x1_1 - x1_2) R~_{m-1}(x2, ..., xm)

where R~_{m-1} is R_{m-1} with every coordinate index of variable j shifted up by
the number of coordinates R_{m-1} uses in variable j.  Variable j < m then
uses 2^j coordinates and the last variable 2^{m-1}.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .chaos import default_threads, moment_p_exact
from .forms import (
    SupNormInfeasible,
    SparseMultilinearForm,
    evaluate,
    form_to_tensor,
    last_variable_coordinates,
    sup_norm,
    supnorm_budget,
)
from .tensor import slice_last

RM_MAX = 6


class ConstructionError(RuntimeError):
    """A built form failed one of its defining properties."""


def _rm_monomials(m: int) -> dict[tuple[int, ...], int]:
    if m == 1:
        return {(1,): 1}
    inner = _rm_monomials(m - 1)
    width = [max(idx[j] for idx in inner) for j in range(m - 1)]
    out = {}
    for idx, c in inner.items():
        shifted = tuple(i + w for i, w in zip(idx, width))
        out[(1,) + idx] = c
        out[(2,) + idx] = c
        out[(1,) + shifted] = c
        out[(2,) + shifted] = -c
    return out


def rm_witness(m: int) -> list[np.ndarray]:
    """A sign vertex where R_m equals 2^{m-1}: all-ones in every variable.

    With x1 = (1, 1) the R~ branch vanishes and R_m = 2 R_{m-1}; induction down
    to R_1 = x_1 = 1.
    """
    dims = [2**j for j in range(1, m)] + [2 ** (m - 1)] if m > 1 else [1]
    return [np.ones(n, dtype=np.int64) for n in dims]


def check_rm(f: SparseMultilinearForm, m: int, max_bits: Optional[int] = None) -> None:
    """Raise ConstructionError unless f has every stated R_m property."""
    problems = []
    if f.order != m:
        problems.append(f"order {f.order} != {m}")
    if len(f) != 2 ** (2 * m - 2):
        problems.append(f"{len(f)} monomials, expected {2 ** (2 * m - 2)}")
    if any(c not in (1, -1) for _, c in f.monomials):
        problems.append("coefficient outside {+1, -1}")
    last = last_variable_coordinates(f)
    if last != set(range(1, 2 ** (m - 1) + 1)):
        problems.append(f"last variable uses {sorted(last)}, expected 1..{2 ** (m - 1)}")
    per = {}
    for idx, _ in f.monomials:
        per[idx[-1]] = per.get(idx[-1], 0) + 1
    if set(per.values()) != {2 ** (m - 1)}:
        problems.append(f"monomials per last coordinate {sorted(set(per.values()))}")
    target = 2 ** (m - 1)
    if evaluate(f, rm_witness(m)) != target:
        problems.append("all-ones vertex does not attain 2^{m-1}")
    dims = f.dims
    lead_bits = sum(dims) - max(dims)
    if lead_bits <= supnorm_budget(max_bits):
        norm = sup_norm(f, max_bits=max_bits).value
        if norm != target:
            problems.append(f"sup-norm {norm}, expected {target}")
    if problems:
        raise ConstructionError(f"R_{m}: " + "; ".join(problems))


def build_rm(m: int, max_bits: Optional[int] = None) -> SparseMultilinearForm:
    """R_m for 2 <= m <= 6, checked against its defining properties.

    The sup-norm is certified by vertex enumeration while the enumeration fits
    the budget (m <= 4 by default); above that only the attaining vertex is
    checked.
    """
    if not 2 <= m <= RM_MAX:
        raise ValueError(f"m must be in [2, {RM_MAX}], got {m}")
    f = SparseMultilinearForm(tuple(_rm_monomials(m).items()))
    check_rm(f, m, max_bits=max_bits)
    return f


def slice_moments(f: SparseMultilinearForm, p: float = 1.0):
    """Exact p-moments of every last-coordinate slice of f, in coordinate order."""
    t = form_to_tensor(f)
    return [moment_p_exact(slice_last(t, k), p) for k in range(1, t.dims[-1] + 1)]


# -- random +-1 forms -------------------------------------------------------------


def _trial_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=int(seed) & 0xFFFFFFFFFFFFFFFF))


def ksz_random(m: int, n: int, seed: int) -> SparseMultilinearForm:
    """Full grid {1..n}^m with i.i.d. uniform +-1 coefficients (Philox keyed by seed)."""
    if m < 1 or n < 1:
        raise ValueError("m and n must be positive")
    if n**m > 1 << 24:
        raise ValueError(f"{n}^{m} monomials exceeds the size limit")
    signs = 1 - 2 * _trial_rng(seed).integers(0, 2, size=(n,) * m, dtype=np.int64)
    idx = np.indices((n,) * m).reshape(m, -1).T + 1
    return SparseMultilinearForm(
        tuple((tuple(row), int(c)) for row, c in zip(idx.tolist(), signs.ravel().tolist()))
    )


@dataclass(frozen=True)
class KszCertificate:
    form: SparseMultilinearForm
    certified_norm: int
    witness: tuple[tuple[int, ...], ...]
    k_hat: float
    budget: int
    seed: int
    trials_run: int
    best_trial: int

    @property
    def m(self) -> int:
        return self.form.order

    @property
    def n(self) -> int:
        return self.form.dims[0]

    def to_dict(self, include_form: bool = False) -> dict:
        out = {
            "m": self.m,
            "n": self.n,
            "certified_norm": self.certified_norm,
            "k_hat": self.k_hat,
            "witness": [list(w) for w in self.witness],
            "budget": self.budget,
            "seed": self.seed,
            "trials_run": self.trials_run,
            "best_trial": self.best_trial,
        }
        if include_form:
            out["coefficients"] = [c for _, c in self.form.monomials]
        return out


def ksz_search(
    m: int,
    n: int,
    budget: int,
    seed: int,
    max_bits: Optional[int] = None,
    threads: Optional[int] = None,
) -> KszCertificate:
    """Smallest certified sup-norm among ``budget`` random +-1 forms.

    Trial t uses ksz_random(m, n, seed + t), so a larger budget with the same seed
    only adds trials.  Ties go to the lowest trial index.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    lead_bits = (m - 1) * n
    if lead_bits > supnorm_budget(max_bits):
        raise SupNormInfeasible(f"certifying m={m}, n={n} needs {lead_bits} sign bits")

    def trial(t: int):
        f = ksz_random(m, n, seed + t)
        return f, sup_norm(f, max_bits=max_bits, threads=1)

    threads = threads or default_threads()
    if threads <= 1:
        results = [trial(t) for t in range(budget)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(trial, range(budget)))
    best = min(range(budget), key=lambda t: (results[t][1].value, t))
    form, cert = results[best]
    return KszCertificate(
        form=form,
        certified_norm=cert.value,
        witness=cert.witness,
        k_hat=cert.value / n ** ((m + 1) / 2),
        budget=budget,
        seed=seed,
        trials_run=budget,
        best_trial=best,
    )
