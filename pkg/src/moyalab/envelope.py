"""Growth envelopes: machine-checkable bounds on coefficient arrays.

An envelope certifies

    |a_m| <= C * prod_i (1 + m_i)**p_i * exp(-alpha_i * m_i)

at every index ``m``. Membership in the three spaces of the triple
(rapid decay, square summable, tempered) is then decided by arithmetic on
the exponents alone.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import mpmath
import numpy as np

__all__ = ["GrowthClass", "EnvelopeClass", "power_exp_series"]

# slack for floating-point evaluation of the bound
_RTOL = 1e-12
_TINY = 1e-300


class GrowthClass(str, Enum):
    """Finest growth class of a coefficient array.

    The classes are nested: rapid decay implies square summable, which
    implies tempered growth. ``WILD`` lies outside the dual space.
    """

    RAPID_DECAY = "RapidDecay"
    SQUARE_SUMMABLE = "SquareSummable"
    TEMPERED = "Tempered"
    WILD = "Wild"
    INCONCLUSIVE = "Inconclusive"

    @property
    def is_rapid(self) -> bool:
        return self is GrowthClass.RAPID_DECAY

    @property
    def is_square_summable(self) -> bool:
        return self in (GrowthClass.RAPID_DECAY, GrowthClass.SQUARE_SUMMABLE)

    @property
    def is_tempered(self) -> bool:
        return self in (
            GrowthClass.RAPID_DECAY,
            GrowthClass.SQUARE_SUMMABLE,
            GrowthClass.TEMPERED,
        )


def _is_zero(x: float) -> bool:
    return abs(x) <= 1e-15


def power_exp_series(power: float, rate: float) -> float:
    """Return ``sum_{k>=0} (1+k)**power * exp(-rate*k)``; ``inf`` if divergent."""
    if _is_zero(rate):
        if power < -1:
            return float(mpmath.zeta(-power))
        return math.inf
    if rate < 0:
        return math.inf
    return float(mpmath.lerchphi(mpmath.exp(-rate), -power, 1))


def _as_tuple(value, axes: int | None = None) -> tuple[float, ...]:
    if np.ndim(value) == 0:
        n = 1 if axes is None else axes
        return (float(value),) * n
    out = tuple(float(v) for v in value)
    if axes is not None and len(out) != axes:
        raise ValueError(f"expected {axes} entries, got {len(out)}")
    return out


@dataclass(frozen=True)
class EnvelopeClass:
    """Certified bound ``C * prod (1+m_i)^p_i * exp(-alpha_i m_i)``.

    Parameters
    ----------
    poly : sequence of float
        Polynomial exponent per index axis.
    exp_rate : float or sequence of float
        Exponential rate per axis; a scalar is broadcast over all axes.
        Positive rates decay, negative rates grow.
    constant : float
        Positive prefactor.
    support : {"full", "diagonal"}
        ``"diagonal"`` asserts that off-diagonal entries of a two-axis array
        vanish, so the bound is only read along ``m_1 == m_2``.
    """

    poly: tuple[float, ...]
    exp_rate: tuple[float, ...] | float = 0.0
    constant: float = 1.0
    support: str = "full"

    def __post_init__(self):
        poly = _as_tuple(self.poly)
        object.__setattr__(self, "poly", poly)
        object.__setattr__(self, "exp_rate", _as_tuple(self.exp_rate, len(poly)))
        if not self.constant > 0 or not math.isfinite(self.constant):
            raise ValueError(f"envelope constant must be positive, got {self.constant}")
        object.__setattr__(self, "constant", float(self.constant))
        if self.support not in ("full", "diagonal"):
            raise ValueError(f"unknown envelope support {self.support!r}")
        if self.support == "diagonal" and len(poly) != 2:
            raise ValueError("diagonal support needs exactly two axes")

    @property
    def axes(self) -> int:
        return len(self.poly)

    def _effective(self) -> list[tuple[float, float]]:
        """(power, rate) pairs of the independent one-dimensional factors."""
        if self.support == "diagonal":
            return [(sum(self.poly), sum(self.exp_rate))]
        return list(zip(self.poly, self.exp_rate))

    def bound(self, trunc) -> np.ndarray:
        """Evaluate the bound on the index box ``trunc``."""
        trunc = tuple(int(t) for t in trunc)
        if len(trunc) != self.axes:
            raise ValueError("truncation does not match envelope axes")
        factors = []
        for d, p, a in zip(trunc, self.poly, self.exp_rate):
            m = np.arange(d, dtype=float)
            factors.append((1.0 + m) ** p * np.exp(-a * m))
        out = factors[0]
        for f in factors[1:]:
            out = np.multiply.outer(out, f)
        out = self.constant * out
        if self.support == "diagonal":
            out = np.where(np.eye(trunc[0], trunc[1], dtype=bool), out, 0.0)
        return out

    def certifies(self, coeffs) -> bool:
        """True if every entry of ``coeffs`` obeys the bound."""
        coeffs = np.asarray(coeffs)
        bound = self.bound(coeffs.shape)
        return bool(np.all(np.abs(coeffs) <= bound * (1 + _RTOL) + _TINY))

    def growth_class(self) -> GrowthClass:
        factors = self._effective()
        if any(a < 0 and not _is_zero(a) for _, a in factors):
            return GrowthClass.WILD
        if all(a > 0 and not _is_zero(a) for _, a in factors):
            return GrowthClass.RAPID_DECAY
        if all((a > 0 and not _is_zero(a)) or p < -0.5 for p, a in factors):
            return GrowthClass.SQUARE_SUMMABLE
        return GrowthClass.TEMPERED

    def sup(self) -> float:
        """Supremum of the bound over all indices (``inf`` if unbounded)."""
        total = self.constant
        for p, a in self._effective():
            total *= _sup_power_exp(p, a)
        return total

    def l2_norm(self) -> float:
        """Square-summed bound, i.e. an upper bound on the l2 norm."""
        total = self.constant**2
        for p, a in self._effective():
            total *= power_exp_series(2 * p, 2 * a)
        return math.sqrt(total)

    # -- arithmetic ---------------------------------------------------------
    def scaled(self, factor: complex) -> "EnvelopeClass":
        c = abs(factor)
        if c == 0:
            return zero_envelope(self.axes)
        return EnvelopeClass(self.poly, self.exp_rate, self.constant * c, self.support)

    def times(self, other: "EnvelopeClass") -> "EnvelopeClass":
        """Envelope of the entrywise product: exponents and rates add."""
        if other.axes != self.axes:
            raise ValueError("envelopes have different axes")
        support = "diagonal" if "diagonal" in (self.support, other.support) else "full"
        return EnvelopeClass(
            tuple(p + q for p, q in zip(self.poly, other.poly)),
            tuple(a + b for a, b in zip(self.exp_rate, other.exp_rate)),
            self.constant * other.constant,
            support,
        )

    def adjoint(self) -> "EnvelopeClass":
        if self.axes != 2:
            return self
        return EnvelopeClass(
            self.poly[::-1], self.exp_rate[::-1], self.constant, self.support
        )

    def matmul(self, other: "EnvelopeClass") -> "EnvelopeClass | None":
        """Envelope of the matrix product ``self @ other``.

        Returns ``None`` when the contracted index sum diverges, in which
        case no bound exists.
        """
        if self.axes != 2 or other.axes != 2:
            raise ValueError("matrix envelope product needs two-axis envelopes")
        (p1, p2), (a1, a2) = self.poly, self.exp_rate
        (q1, q2), (b1, b2) = other.poly, other.exp_rate
        c = self.constant * other.constant
        if self.support == "diagonal" and other.support == "diagonal":
            return EnvelopeClass((p1 + p2, q1 + q2), (a1 + a2, b1 + b2), c, "diagonal")
        if self.support == "diagonal":
            return EnvelopeClass((p1 + p2 + q1, q2), (a1 + a2 + b1, b2), c)
        if other.support == "diagonal":
            return EnvelopeClass((p1, p2 + q1 + q2), (a1, a2 + b1 + b2), c)
        s = power_exp_series(p2 + q1, a2 + b1)
        if not math.isfinite(s):
            return None
        return EnvelopeClass((p1, q2), (a1, b2), c * s)

    # -- serialization ------------------------------------------------------
    def to_json(self) -> dict:
        rates = list(self.exp_rate)
        out = {
            "poly": list(self.poly),
            "exp_rate": rates[0] if len(set(rates)) == 1 else rates,
            "constant": self.constant,
        }
        if self.support != "full":
            out["support"] = self.support
        return out

    @classmethod
    def from_json(cls, data: dict) -> "EnvelopeClass":
        try:
            return cls(
                data["poly"],
                data.get("exp_rate", 0.0),
                data.get("constant", 1.0),
                data.get("support", "full"),
            )
        except KeyError as exc:
            raise ValueError(f"envelope: missing field {exc.args[0]!r}") from None


def zero_envelope(axes: int) -> EnvelopeClass:
    """Envelope certifying the zero array (any decaying bound does)."""
    return EnvelopeClass((0.0,) * axes, 1.0, 1.0)


def _sup_power_exp(p: float, a: float) -> float:
    # sup over m >= 0 of (1+m)^p e^{-a m}
    if _is_zero(a):
        return 1.0 if p <= 0 else math.inf
    if a < 0:
        return math.inf
    if p <= 0:
        return 1.0
    x = p / a  # stationary point of the continuous extension, in 1+m
    best = 1.0
    for m in {0, max(0, math.floor(x - 1)), max(0, math.ceil(x - 1))}:
        best = max(best, (1.0 + m) ** p * math.exp(-a * m))
    return best
