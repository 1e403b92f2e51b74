"""Desk-scale checks of the Khinchin-type inequalities, exact lower bounds for
their optimal constants, and log-log exponent fits.

Every check compares an l_r-type left side with (constant) x (L_1 moment).  The
verdict ``holds`` allows a relative slack of 1e-12 for float round-off; when the
data are integers and the exponents integral, ``exact_holds`` repeats the
comparison in rational arithmetic on suitable powers of both sides.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

import numpy as np

from .chaos import MomentResult, moment_p, moment_p_exact
from .constructions import KszCertificate
from .forms import SparseMultilinearForm, form_to_tensor
from .tensor import (
    CoefficientTensor,
    MixedNormSpec,
    VectorTensor,
    ell_r_norm,
    ell_r_power_exact,
    max_abs,
    mixed_norm,
    slice_last,
)

SLACK = 1e-12


@dataclass(frozen=True)
class ConstantsTable:
    """Constants pinned exactly in the literature, with their sources."""

    A1: float = 1 / math.sqrt(2)
    B_p_le_2: float = 1.0
    K_1_2: float = math.sqrt(2)
    c2_hilbert: float = 1.0
    citations: tuple[tuple[str, str], ...] = (
        ("A1", "Szarek, Studia Math. 58 (1976): optimal L1 Khinchin constant 1/sqrt(2)"),
        ("B_p_le_2", "L_p norms are increasing in p and the L2 moment equals the l2 norm"),
        ("K_1_2", "Latala-Oleszkiewicz, Studia Math. 109 (1994): optimal Kahane constant sqrt(2)"),
        ("c2_hilbert", "Hilbert spaces have cotype 2 with constant 1 (parallelogram law)"),
    )


CONSTANTS = ConstantsTable()


@dataclass(frozen=True)
class BoundReport:
    """lhs <= rhs, with ratio = lhs / rhs.

    For kind "check", rhs = constant_used * n^exponent_used * moment.  For kind
    "lower-bound", lhs is a certified lower bound on an optimal constant and rhs
    the proven upper bound for that constant, so ``holds`` is a consistency check.
    """

    kind: str
    lhs: float
    rhs: float
    constant_used: float
    exponent_used: float
    ratio: float
    holds: bool
    moment: Optional[MomentResult] = None
    exact_holds: Optional[bool] = None
    context: dict = field(default_factory=dict)

    @property
    def bound(self) -> float:
        return self.lhs

    def to_dict(self) -> dict:
        out = {
            "kind": self.kind,
            "lhs": self.lhs,
            "rhs": self.rhs,
            "constant_used": self.constant_used,
            "exponent_used": self.exponent_used,
            "ratio": self.ratio,
            "holds": self.holds,
            "exact_holds": self.exact_holds,
            "moment": self.moment.to_dict() if self.moment else None,
            "context": self.context,
        }
        return {k: v for k, v in out.items() if v is not None}


def _report(kind, lhs, rhs, constant, exponent, moment=None, exact_holds=None, **context):
    lhs, rhs = float(lhs), float(rhs)
    ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else math.inf)
    return BoundReport(
        kind=kind,
        lhs=lhs,
        rhs=rhs,
        constant_used=float(constant),
        exponent_used=float(exponent),
        ratio=ratio,
        holds=lhs <= rhs * (1 + SLACK),
        moment=moment,
        exact_holds=exact_holds,
        context=context,
    )


def _uniform_n(a: CoefficientTensor | VectorTensor) -> int:
    if len(set(a.dims)) != 1:
        raise ValueError(f"this bound needs equal dims, got {a.dims}")
    return a.dims[0]


def _moment1(a, **kw) -> MomentResult:
    return moment_p(a, 1, **kw)


def _exact_m1(mom: MomentResult) -> Optional[Fraction]:
    return mom.exact_power if mom.p == 1 else None


def _int_r(r: float) -> Optional[int]:
    return int(r) if float(r).is_integer() else None


# -- scalar Khinchin ----------------------------------------------------------


def khinchin_ratio(a: CoefficientTensor, p: float = 1.0, **kw) -> float:
    """moment_p(a) / l2(a) for an order-1 tensor."""
    if a.order != 1:
        raise ValueError("khinchin_ratio takes a vector of coefficients")
    l2 = ell_r_norm(a, 2)
    if l2 == 0:
        raise ValueError("zero coefficient vector")
    return moment_p(a, p, **kw).value / l2


def verify_multik(a: CoefficientTensor, p: float = 1.0, **kw) -> BoundReport:
    """l2(a) <= 2^{m/2} moment_1(a)."""
    if p != 1:
        raise ValueError("only p = 1 has a pinned constant")
    m = a.order
    mom = _moment1(a, **kw)
    lhs = ell_r_norm(a, 2)
    const = 2 ** (m / 2)
    exact = None
    m1 = _exact_m1(mom)
    if a.integer_flag and m1 is not None:
        exact = ell_r_power_exact(a, 2) <= 2**m * m1**2
    return _report("check", lhs, const * mom.value, const, 0.0, mom, exact,
                   theorem="multiple-khinchin", m=m, dims=list(a.dims), p=1)


def verify_theorem1(a: CoefficientTensor, r: float, p: float = 1.0, **kw) -> BoundReport:
    """l_r(a) <= 2^{m/2} n^{m(1/r - 1/2)} moment_1(a), 0 < r < 2."""
    if not 0 < r < 2:
        raise ValueError("verify_theorem1 needs 0 < r < 2; use verify_prop for r >= 2")
    if p != 1:
        raise ValueError("only p = 1 has a pinned constant")
    m, n = a.order, _uniform_n(a)
    mom = _moment1(a, **kw)
    const = 2 ** (m / 2)
    expo = m * (1 / r - 0.5)
    lhs = ell_r_norm(a, r)
    exact = None
    m1 = _exact_m1(mom)
    if r == 1 and a.integer_flag and m1 is not None:
        # square both sides: (sum|a|)^2 <= 2^m n^m M^2
        exact = ell_r_power_exact(a, 1) ** 2 <= 2**m * n**m * m1**2
    return _report("check", lhs, const * n**expo * mom.value, const, expo, mom, exact,
                   theorem="l_r-blow-up", m=m, n=n, r=r, p=1)


def verify_mixed(a: CoefficientTensor, spec: MixedNormSpec | Sequence[float], p: float = 1.0, **kw) -> BoundReport:
    """mixed_norm(a) <= 2^{m/2} n^{sum 1/r_j - m/2} moment_1(a), all r_j < 2."""
    if not isinstance(spec, MixedNormSpec):
        spec = MixedNormSpec(tuple(spec))
    if any(r >= 2 for r in spec.exponents):
        raise ValueError("mixed bound needs every r_j < 2")
    if p != 1:
        raise ValueError("only p = 1 has a pinned constant")
    m, n = a.order, _uniform_n(a)
    mom = _moment1(a, **kw)
    const = 2 ** (m / 2)
    expo = sum(1 / r for r in spec.exponents) - m / 2
    lhs = mixed_norm(a, spec)
    exact = None
    m1 = _exact_m1(mom)
    if all(r == 1 for r in spec.exponents) and a.integer_flag and m1 is not None:
        exact = ell_r_power_exact(a, 1) ** 2 <= 2**m * n**m * m1**2
    return _report("check", lhs, const * n**expo * mom.value, const, expo, mom, exact,
                   theorem="mixed-l_r-blow-up", m=m, n=n, exponents=list(spec.exponents), p=1)


def verify_prop(a: CoefficientTensor, r: float, **kw) -> BoundReport:
    """l_r(a) <= 2^{m/r} moment_1(a), r >= 2."""
    if r < 2:
        raise ValueError("verify_prop needs r >= 2")
    m = a.order
    mom = _moment1(a, **kw)
    const = 2 ** (m / r)
    lhs = ell_r_norm(a, r)
    exact = None
    m1, ir = _exact_m1(mom), _int_r(r)
    if ir is not None and a.integer_flag and m1 is not None:
        exact = ell_r_power_exact(a, ir) <= 2**m * m1**ir
    return _report("check", lhs, const * mom.value, const, 0.0, mom, exact,
                   theorem="2^(m/r)", m=m, dims=list(a.dims), r=r)


def verify_contraction(a: CoefficientTensor | VectorTensor, **kw) -> BoundReport:
    """max entry norm <= moment_1."""
    mom = _moment1(a, **kw)
    lhs = max_abs(a)
    exact = None
    m1 = _exact_m1(mom)
    if isinstance(a, CoefficientTensor) and a.integer_flag and m1 is not None:
        exact = int(np.abs(a.entries).max()) <= m1
    return _report("check", lhs, mom.value, 1.0, 0.0, mom, exact,
                   theorem="contraction", m=a.order, dims=list(a.dims))


def _as_vector(y) -> VectorTensor:
    return VectorTensor.from_scalar(y) if isinstance(y, CoefficientTensor) else y


def verify_multiple_kahane(y: VectorTensor | CoefficientTensor, p: float = 1, q: float = 2, **kw) -> BoundReport:
    """moment_2(y) <= sqrt(2)^m moment_1(y)."""
    if (p, q) != (1, 2):
        raise ValueError("only (p, q) = (1, 2) has a pinned constant")
    y = _as_vector(y)
    m = y.order
    m1 = _moment1(y, **kw)
    m2 = moment_p(y, 2, **kw)
    const = CONSTANTS.K_1_2**m
    exact = None
    if m2.exact_power is not None and m1.exact_power is not None and m1.p == 1:
        exact = m2.exact_power <= 2**m * m1.exact_power**2
    return _report("check", m2.value, const * m1.value, const, 0.0, m1, exact,
                   theorem="multiple-kahane", m=m, dims=list(y.dims), d=y.ambient_dim,
                   moment_q=m2.to_dict())


def verify_hilbert_prop(y: VectorTensor | CoefficientTensor, r: float, **kw) -> BoundReport:
    """(sum ||y||^r)^{1/r} <= 2^{m/r} moment_1(y), r >= 2."""
    if r < 2:
        raise ValueError("verify_hilbert_prop needs r >= 2")
    y = _as_vector(y)
    m = y.order
    mom = _moment1(y, **kw)
    norms = CoefficientTensor(y.entry_norms())
    lhs = ell_r_norm(norms, r)
    const = 2 ** (m / r)
    return _report("check", lhs, const * mom.value, const, 0.0, mom, None,
                   theorem="hilbert-2^(m/r)", m=m, dims=list(y.dims), d=y.ambient_dim, r=r)


# -- lower bounds for optimal constants ---------------------------------------------


def _ceiling(m: int, r: float, n: int) -> tuple[float, float, float]:
    """(value, constant, exponent) of the proven upper bound for the optimal constant."""
    if r >= 2:
        return 2 ** (m / r), 2 ** (m / r), 0.0
    expo = m * (1 / r - 0.5)
    return 2 ** (m / 2) * n**expo, 2 ** (m / 2), expo


def _fraction_str(x: Fraction) -> str:
    return f"{x.numerator}/{x.denominator}" if x.denominator != 1 else str(x.numerator)


def lower_bound_from_slices(f: SparseMultilinearForm, r: float, p: float = 1.0, **kw) -> BoundReport:
    """L / M for L = sum_k l_r(slice_k), M = sum_k moment_1(slice_k).

    Every slice a^(k) = f(., ..., ., e_k) satisfies l_r(a^(k)) <= C moment_1(a^(k)),
    so summing over k gives C >= L / M.  For integer coefficients and integer r
    the slice power sums and moments are exact; when all slices share one power
    sum P the bound is (K/M) P^{1/r} with K slices, and ``bound_power`` is its
    exact r-th power.
    """
    if p != 1:
        raise ValueError("only p = 1 is supported")
    if f.order < 2:
        raise ValueError("need a form of order m+1 >= 2")
    m = f.order - 1
    t = form_to_tensor(f)
    slices = [slice_last(t, k) for k in range(1, t.dims[-1] + 1)]
    moments = [moment_p_exact(s, 1, **kw) for s in slices]
    lengths = [ell_r_norm(s, r) for s in slices]
    L = math.fsum(lengths)
    ir = _int_r(r)
    exact_ctx = {}
    exact_holds = None
    if f.integer_flag and ir is not None:
        powers = [ell_r_power_exact(s, ir) for s in slices]
        M_exact = sum((mm.exact_power for mm in moments), Fraction(0))
        M = float(M_exact)
        exact_ctx = {
            "slice_power_sums": powers,
            "slice_moments": [_fraction_str(mm.exact_power) for mm in moments],
            "M_exact": _fraction_str(M_exact),
        }
        nonzero = [P for P in powers if P]
        if len(set(nonzero)) == 1 and M_exact > 0:
            K = len(nonzero)
            bound_power = (Fraction(K) / M_exact) ** ir * nonzero[0]
            exact_ctx["bound_power"] = _fraction_str(bound_power)
            exact_ctx["L_exact"] = f"{K}*{nonzero[0]}^(1/{ir})"
            if r >= 2:
                exact_holds = bound_power <= 2**m
    else:
        M = math.fsum(mm.value for mm in moments)
    bound = L / M
    n = max(t.dims[:-1])
    ceiling, const, expo = _ceiling(m, r, n)
    return _report("lower-bound", bound, ceiling, const, expo, None, exact_holds,
                   theorem="slice-lower-bound", m=m, r=r, L=L, M=M, slices=len(slices), **exact_ctx)


def ksz_exponent_bound(cert: KszCertificate, r: float) -> BoundReport:
    """C(n) >= n^{1+m/r} / ||T|| for a certified +-1 form T of order m+1 on n coords.

    Each of the n slices has l_r norm n^{m/r}, and the slice moments sum to at
    most ||T||.  With ||T|| = k_hat n^{(m+2)/2} this is n^{m(1/r-1/2)} / k_hat.
    """
    m = cert.m - 1
    if m < 1:
        raise ValueError("need a certificate for a form of order m+1 >= 2")
    n = cert.n
    bound = n ** (1 + m / r) / cert.certified_norm
    ceiling, const, expo = _ceiling(m, r, n)
    return _report("lower-bound", bound, ceiling, const, expo, None, None,
                   theorem="ksz-lower-bound", m=m, n=n, r=r, k_hat=cert.k_hat,
                   certified_norm=cert.certified_norm, target_exponent=m * (1 / r - 0.5))


# -- exponent fitting -----------------------------------------------------------------


@dataclass(frozen=True)
class FitResult:
    points: tuple[tuple[float, float], ...]
    slope: float
    intercept: float
    max_residual: float

    def to_dict(self) -> dict:
        return {
            "points": [list(pt) for pt in self.points],
            "slope": self.slope,
            "intercept": self.intercept,
            "max_residual": self.max_residual,
        }


def fit_exponent(points: Sequence[tuple[float, float]]) -> FitResult:
    """Least squares line through (log n, log value)."""
    pts = tuple((float(n), float(v)) for n, v in points)
    if len(pts) < 3:
        raise ValueError("need at least 3 points")
    if any(n <= 0 or v <= 0 for n, v in pts):
        raise ValueError("points must be positive")
    x = np.log([n for n, _ in pts])
    y = np.log([v for _, v in pts])
    if np.ptp(x) == 0:
        raise ValueError("all n are equal")
    design = np.column_stack([x, np.ones_like(x)])
    (slope, intercept), *_ = np.linalg.lstsq(design, y, rcond=None)
    resid = y - (slope * x + intercept)
    return FitResult(pts, float(slope), float(intercept), float(np.abs(resid).max()))
