"""Vector and group norms, dual witnesses, the norm-ratio supremum and Khintchine constants."""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import NamedTuple, Union

import numpy as np

from .errors import DomainError, ZeroVector


class Exponent:
    """Norm order in [1, inf], stored through its exact reciprocal so conjugation is exact."""

    __slots__ = ("inv",)

    def __init__(self, value: "ExponentLike"):
        if isinstance(value, Exponent):
            inv = value.inv
        elif isinstance(value, str):
            text = value.strip().lower()
            if text in ("inf", "infinity", "∞", "+inf"):
                inv = Fraction(0)
            else:
                try:
                    inv = 1 / Fraction(text)
                except (ValueError, ZeroDivisionError):
                    raise DomainError(f"not a norm order: {value!r}") from None
        else:
            v = float(value)
            if math.isnan(v):
                raise DomainError("norm order is NaN")
            inv = Fraction(0) if math.isinf(v) else (1 / Fraction(v) if v > 0 else Fraction(2))
        if not (0 <= inv <= 1):
            raise DomainError(f"norm order must lie in [1, inf], got {value!r}")
        self.inv = inv

    @classmethod
    def _from_inv(cls, inv: Fraction) -> "Exponent":
        e = cls.__new__(cls)
        e.inv = inv
        return e

    @property
    def is_inf(self) -> bool:
        return self.inv == 0

    @property
    def value(self) -> float:
        return math.inf if self.inv == 0 else float(1 / self.inv)

    def dual(self) -> "Exponent":
        return Exponent._from_inv(1 - self.inv)

    def __float__(self) -> float:
        return self.value

    def __eq__(self, other) -> bool:
        try:
            return self.inv == Exponent(other).inv
        except (DomainError, TypeError, ValueError):
            return NotImplemented

    def __hash__(self) -> int:
        return hash(("Exponent", self.inv))

    # larger exponent <=> smaller reciprocal
    def __lt__(self, other) -> bool:
        return self.inv > Exponent(other).inv

    def __le__(self, other) -> bool:
        return self.inv >= Exponent(other).inv

    def __gt__(self, other) -> bool:
        return self.inv < Exponent(other).inv

    def __ge__(self, other) -> bool:
        return self.inv <= Exponent(other).inv

    def __repr__(self) -> str:
        return f"Exponent({self})"

    def __str__(self) -> str:
        if self.is_inf:
            return "inf"
        v = 1 / self.inv
        return str(v.numerator) if v.denominator == 1 else repr(float(v))

    def to_json(self) -> Union[str, float]:
        return "inf" if self.is_inf else float(self.value)


ExponentLike = Union[Exponent, float, int, str]


def as_exponent(p: ExponentLike) -> Exponent:
    return p if isinstance(p, Exponent) else Exponent(p)


def _pval(p: ExponentLike) -> float:
    if isinstance(p, (float, int)) and not isinstance(p, bool):
        if p < 1:
            raise DomainError(f"norm order must be >= 1, got {p}")
        return float(p)
    return as_exponent(p).value


def dual_exponent(p: ExponentLike) -> Exponent:
    return as_exponent(p).dual()


def lp_norm(v, p: ExponentLike, axis=None):
    """l_p norm of `v` (along `axis` when given). Zero and empty vectors have norm 0."""
    a = np.abs(np.asarray(v, dtype=float))
    if not np.all(np.isfinite(a)):
        raise ValueError("lp_norm: non-finite entries")
    pv = _pval(p)
    if a.size == 0:
        return 0.0 if axis is None else np.zeros(np.delete(a.shape, axis))
    if pv == math.inf:
        return a.max(axis=axis)
    if pv == 1.0:
        return a.sum(axis=axis)
    scale = a.max(axis=axis, keepdims=True)
    if pv == 2.0 and np.all((scale == 0) | ((scale > 1e-150) & (scale < 1e150))):
        out = np.sqrt((a * a).sum(axis=axis))
        return float(out) if np.ndim(out) == 0 else out
    # rescale by the largest entry so large exponents neither overflow nor underflow
    safe = np.where(scale > 0, scale, 1.0)
    out = np.squeeze(safe, axis=axis) * ((a / safe) ** pv).sum(axis=axis) ** (1.0 / pv)
    return float(out) if np.ndim(out) == 0 else out


def _witness_rows(U: np.ndarray, q: float) -> np.ndarray:
    """Row-wise dual witnesses; zero rows map to zero rows."""
    U = np.asarray(U, dtype=float)
    if q == math.inf:
        return np.sign(U)
    A = np.abs(U)
    top = A.max(axis=-1, keepdims=True)
    if q == 1.0:
        V = np.zeros_like(U)
        idx = np.argmax(A, axis=-1)[..., None]
        np.put_along_axis(V, idx, np.take_along_axis(np.sign(U), idx, axis=-1), axis=-1)
        return V
    qs = q / (q - 1.0)
    B = A / np.where(top > 0, top, 1.0)
    V = np.sign(U) * B ** (qs - 1.0)
    nrm = lp_norm(V, q, axis=-1)
    nrm = np.where(np.asarray(nrm) > 0, nrm, 1.0)
    return V / np.expand_dims(nrm, -1)


def dual_witness(u, q: ExponentLike) -> np.ndarray:
    """Vector v with ||v||_q = 1 and u.v = ||u||_{q*}.

    q = inf gives the sign vector, q = 1 a signed basis vector at the first largest |u_i|.
    """
    u = np.asarray(u, dtype=float)
    if not np.any(u):
        raise ZeroVector("dual witness of the zero vector is undefined")
    return _witness_rows(u, _pval(q))


def group_norm(M, p1: ExponentLike, p2: ExponentLike) -> float:
    """p2-norm of the vector of column p1-norms."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("group_norm expects a matrix")
    return float(lp_norm(lp_norm(M, p1, axis=0), p2))


class NormRatio(NamedTuple):
    value: float
    witness: np.ndarray


def norm_ratio_exponent(p: ExponentLike, r: ExponentLike) -> Fraction:
    """Exact exponent 1 - 1/r - 1/p."""
    return 1 - as_exponent(r).inv - as_exponent(p).inv


def norm_ratio_sup(p: ExponentLike, r: ExponentLike, d: int) -> NormRatio:
    """sup of ||w||_{r*} over the unit p-ball in R^d, with a vector attaining it."""
    value = norm_ratio_factor(p, r, d)
    if norm_ratio_exponent(p, r) >= 0:
        pinv = float(as_exponent(p).inv)
        witness = np.full(d, math.exp(-pinv * math.log(d)))
    else:
        witness = np.zeros(d)
        witness[0] = 1.0
    return NormRatio(value, witness)


def norm_ratio_factor(p: ExponentLike, r: ExponentLike, d: int) -> float:
    """max(1, d^(1 - 1/r - 1/p)), evaluated in log space."""
    if d < 1:
        raise ValueError("d must be >= 1")
    e = norm_ratio_exponent(p, r)
    return math.exp(float(e) * math.log(d)) if e > 0 else 1.0


# constants in terms of the conjugate exponent q = p*

def c1_const(q: float) -> float:
    return math.sqrt(q - 1.0)


def c2_const(q: float) -> float:
    if math.isinf(q):
        raise DomainError("c2 is unbounded for p = 1")
    return math.sqrt(2.0) * math.exp((math.lgamma((q + 1.0) / 2.0) - 0.5 * math.log(math.pi)) / q)


def khintchine_const(q: float) -> float:
    if q <= 2:
        return 1.0
    return math.exp(0.5 * q * math.log(2.0) + math.lgamma((q + 1.0) / 2.0) - 0.5 * math.log(math.pi))


@dataclass(frozen=True)
class ConstantsReport:
    p: Exponent
    c1: float
    c2: float
    c2_lower: float
    c2_upper: float
    b_qstar: float

    @property
    def pstar(self) -> Exponent:
        return self.p.dual()

    @property
    def envelope_holds(self) -> bool:
        return self.c2_lower <= self.c2 <= self.c2_upper

    def to_dict(self) -> dict:
        return {"p": self.p.to_json(), "pstar": self.pstar.to_json(), "c1": self.c1, "c2": self.c2,
                "c2_lower": self.c2_lower, "c2_upper": self.c2_upper, "b_qstar": self.b_qstar}


def constants(p: ExponentLike) -> ConstantsReport:
    p = as_exponent(p)
    if p.inv == 1:
        raise DomainError("c1 and c2 need p > 1 (p* finite)")
    q = p.dual().value
    return ConstantsReport(
        p=p,
        c1=c1_const(q),
        c2=c2_const(q),
        c2_lower=math.exp(-0.5) * math.sqrt(q),
        c2_upper=math.exp(-0.5) * math.sqrt(q + 1.0),
        b_qstar=khintchine_const(q),
    )


@dataclass(frozen=True)
class GroupNormReport:
    """Both sides of the transposed group-norm comparison.

    ratio_lower and ratio_upper bracket norm_m_qp / norm_mt_pq.
    """

    norm_mt_pq: float
    norm_m_qp: float
    ratio_lower: float
    ratio_upper: float
    rtol: float = 1e-12

    @property
    def holds(self) -> tuple:
        a, b = self.norm_mt_pq, self.norm_m_qp
        slack = self.rtol * max(a, b)
        return (self.ratio_lower * a <= b + slack, b <= self.ratio_upper * a + slack)

    @property
    def ratio(self) -> float:
        return self.norm_m_qp / self.norm_mt_pq if self.norm_mt_pq > 0 else 1.0


def check_group_norm_inequalities(M, p: ExponentLike, q: ExponentLike, rtol: float = 1e-12) -> GroupNormReport:
    """Compare ||M||_{q,p} with ||M^T||_{p,q} for a d x m matrix M."""
    M = np.asarray(M, dtype=float)
    p, q = as_exponent(p), as_exponent(q)
    d, m = M.shape
    k = math.exp(float(p.inv - q.inv) * math.log(min(m, d)))
    a = group_norm(M.T, p, q)
    b = group_norm(M, q, p)
    if q <= p:
        lo, hi = k, 1.0
    else:
        lo, hi = 1.0, k
    return GroupNormReport(a, b, lo, hi, rtol)
