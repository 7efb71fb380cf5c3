"""Closed catalog of entry rules for sequences and matrices.

One-axis rules are :class:`PowerExp` (covers power laws, exponentials and
constants) and :class:`Kronecker`. Two-axis rules are :class:`Diagonal` and
:class:`RankOne`; a separable two-axis power law or a two-axis Kronecker
delta is normalized to a rank-one outer product on construction.

The catalog is closed under the pointwise product, the matrix product and
both involutions, and every rule carries an envelope whose growth class
is exact for that rule. That is what lets membership questions be decided
symbolically rather than by numerical fits.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Union

import numpy as np

from .envelope import EnvelopeClass, power_exp_series, zero_envelope

__all__ = [
    "PowerExp",
    "Kronecker",
    "Diagonal",
    "RankOne",
    "Generator",
    "power_law",
    "exponential",
    "constant",
    "kronecker",
    "diagonal",
    "rank_one",
    "pointwise_product",
    "matrix_product",
    "adjoint",
    "conjugate",
    "inner",
    "generator_from_json",
    "DivergentSeries",
]


class DivergentSeries(ArithmeticError):
    """A contraction over an infinite index set does not converge."""


def _complex_json(z: complex) -> list[float]:
    z = complex(z)
    return [z.real, z.imag]


def _complex_from_json(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValueError("complex value must be [re, im]")
        return complex(float(v[0]), float(v[1]))
    return complex(v)


@dataclass(frozen=True)
class PowerExp:
    """Sequence ``scale * (1+m)**power * exp(-rate*m)``."""

    power: float = 0.0
    rate: float = 0.0
    scale: complex = 1.0

    axes = 1

    def __post_init__(self):
        object.__setattr__(self, "power", float(self.power))
        object.__setattr__(self, "rate", float(self.rate))
        object.__setattr__(self, "scale", complex(self.scale))

    @property
    def is_zero(self) -> bool:
        return self.scale == 0

    def evaluate(self, trunc) -> np.ndarray:
        (d,) = _trunc(trunc, 1)
        m = np.arange(d, dtype=float)
        return self.scale * ((1.0 + m) ** self.power * np.exp(-self.rate * m))

    def at(self, index: int) -> complex:
        return self.scale * (1.0 + index) ** self.power * math.exp(-self.rate * index)

    def envelope(self) -> EnvelopeClass:
        if self.is_zero:
            return zero_envelope(1)
        return EnvelopeClass((self.power,), self.rate, abs(self.scale))

    def conj(self) -> "PowerExp":
        return PowerExp(self.power, self.rate, self.scale.conjugate())

    def to_json(self) -> dict:
        if self.rate == 0:
            out = {"kind": "power-law", "exponent": self.power}
        elif self.power == 0:
            out = {"kind": "exponential", "rate": self.rate}
        else:
            out = {"kind": "power-exponential", "exponent": self.power, "rate": self.rate}
        out["scale"] = _complex_json(self.scale)
        return out


@dataclass(frozen=True)
class Kronecker:
    """Sequence equal to ``value`` at ``index`` and zero elsewhere."""

    index: int = 0
    value: complex = 1.0

    axes = 1

    def __post_init__(self):
        if int(self.index) < 0:
            raise ValueError("Kronecker index must be nonnegative")
        object.__setattr__(self, "index", int(self.index))
        object.__setattr__(self, "value", complex(self.value))

    @property
    def is_zero(self) -> bool:
        return self.value == 0

    def evaluate(self, trunc) -> np.ndarray:
        (d,) = _trunc(trunc, 1)
        out = np.zeros(d, dtype=complex)
        if self.index < d:
            out[self.index] = self.value
        return out

    def at(self, index: int) -> complex:
        return self.value if index == self.index else 0j

    def envelope(self) -> EnvelopeClass:
        if self.is_zero:
            return zero_envelope(1)
        # |v| e^{i} e^{-m} dominates the single nonzero entry
        return EnvelopeClass((0.0,), 1.0, abs(self.value) * math.exp(self.index))

    def conj(self) -> "Kronecker":
        return Kronecker(self.index, self.value.conjugate())

    def to_json(self) -> dict:
        return {"kind": "kronecker", "index": self.index, "value": _complex_json(self.value)}


Sequence1D = Union[PowerExp, Kronecker]


@dataclass(frozen=True)
class Diagonal:
    """Matrix with the sequence ``entry`` on its diagonal."""

    entry: Sequence1D

    axes = 2

    @property
    def is_zero(self) -> bool:
        return self.entry.is_zero

    def evaluate(self, trunc) -> np.ndarray:
        d1, d2 = _trunc(trunc, 2)
        out = np.zeros((d1, d2), dtype=complex)
        k = min(d1, d2)
        out[np.arange(k), np.arange(k)] = self.entry.evaluate((k,))
        return out

    def envelope(self) -> EnvelopeClass:
        if self.is_zero:
            return zero_envelope(2)
        env = self.entry.envelope()
        p, a = env.poly[0], env.exp_rate[0]
        return EnvelopeClass((p / 2, p / 2), (a / 2, a / 2), env.constant, "diagonal")

    def to_json(self) -> dict:
        return {"kind": "diagonal", "entry": self.entry.to_json()}


@dataclass(frozen=True)
class RankOne:
    """Outer product ``left ⊗ conj(right)``, i.e. the operator ``u v*``."""

    left: Sequence1D
    right: Sequence1D

    axes = 2

    @property
    def is_zero(self) -> bool:
        return self.left.is_zero or self.right.is_zero

    def evaluate(self, trunc) -> np.ndarray:
        d1, d2 = _trunc(trunc, 2)
        return np.multiply.outer(
            self.left.evaluate((d1,)), self.right.evaluate((d2,)).conj()
        )

    def envelope(self) -> EnvelopeClass:
        if self.is_zero:
            return zero_envelope(2)
        u, v = self.left.envelope(), self.right.envelope()
        return EnvelopeClass(
            u.poly + v.poly, u.exp_rate + v.exp_rate, u.constant * v.constant
        )

    def to_json(self) -> dict:
        return {"kind": "rank-one", "left": self.left.to_json(), "right": self.right.to_json()}


Generator = Union[PowerExp, Kronecker, Diagonal, RankOne]


def _trunc(trunc, axes: int) -> tuple[int, ...]:
    trunc = (trunc,) if np.ndim(trunc) == 0 else tuple(trunc)
    if len(trunc) != axes:
        raise ValueError(f"expected {axes} truncation bounds, got {len(trunc)}")
    return tuple(int(t) for t in trunc)


# -- constructors -------------------------------------------------------------


def power_law(exponent, scale: complex = 1.0) -> Generator:
    """``scale * prod (1+m_i)**exponent_i``; two exponents give a rank-one matrix."""
    if np.ndim(exponent) == 0:
        return PowerExp(exponent, 0.0, scale)
    p1, p2 = exponent
    return RankOne(PowerExp(p1, 0.0, scale), PowerExp(p2, 0.0))


def exponential(rate, scale: complex = 1.0) -> Generator:
    """``scale * exp(-sum rate_i m_i)``; use a negative rate for growth."""
    if np.ndim(rate) == 0:
        return PowerExp(0.0, rate, scale)
    a1, a2 = rate
    return RankOne(PowerExp(0.0, a1, scale), PowerExp(0.0, a2))


def constant(value: complex = 1.0) -> PowerExp:
    return PowerExp(0.0, 0.0, value)


def kronecker(index, value: complex = 1.0) -> Generator:
    if np.ndim(index) == 0:
        return Kronecker(index, value)
    i, j = index
    return RankOne(Kronecker(i, value), Kronecker(j, 1.0))


def diagonal(entry: Sequence1D) -> Diagonal:
    return Diagonal(entry)


def rank_one(left: Sequence1D, right: Sequence1D) -> RankOne:
    return RankOne(left, right)


# -- algebra ------------------------------------------------------------------


def conjugate(g: Sequence1D) -> Sequence1D:
    return g.conj()


def pointwise_product(f: Sequence1D, g: Sequence1D) -> Sequence1D:
    """Entrywise product of two one-axis rules."""
    if isinstance(f, Kronecker):
        return Kronecker(f.index, f.value * g.at(f.index))
    if isinstance(g, Kronecker):
        return Kronecker(g.index, g.value * f.at(g.index))
    return PowerExp(f.power + g.power, f.rate + g.rate, f.scale * g.scale)


def inner(u: Sequence1D, v: Sequence1D) -> complex:
    """``sum_k u_k * conj(v_k)`` over all ``k >= 0``.

    Raises
    ------
    DivergentSeries
        If the series does not converge.
    """
    if isinstance(u, Kronecker):
        return u.value * complex(v.at(u.index)).conjugate()
    if isinstance(v, Kronecker):
        return complex(u.at(v.index)) * v.value.conjugate()
    if u.is_zero or v.is_zero:
        return 0j
    s = power_exp_series(u.power + v.power, u.rate + v.rate)
    if not math.isfinite(s):
        raise DivergentSeries(
            f"sum of (1+k)^{u.power + v.power} exp(-{u.rate + v.rate} k) diverges"
        )
    return u.scale * v.scale.conjugate() * s


def adjoint(g: Generator) -> Generator:
    """Conjugate transpose of a two-axis rule."""
    if isinstance(g, Diagonal):
        return Diagonal(g.entry.conj())
    if isinstance(g, RankOne):
        return RankOne(g.right, g.left)
    raise TypeError(f"adjoint needs a two-axis rule, got {type(g).__name__}")


def matrix_product(a: Generator, b: Generator) -> tuple[Generator, bool]:
    """Matrix product of two two-axis rules.

    Returns
    -------
    product : Generator
    contracted : bool
        True if the product involved a sum over the infinite inner index,
        in which case truncated numerical products only approximate it.
    """
    if isinstance(a, Diagonal) and isinstance(b, Diagonal):
        return Diagonal(pointwise_product(a.entry, b.entry)), False
    if isinstance(a, Diagonal) and isinstance(b, RankOne):
        return RankOne(pointwise_product(a.entry, b.left), b.right), False
    if isinstance(a, RankOne) and isinstance(b, Diagonal):
        # u v* D = u (D* v)*
        return RankOne(a.left, pointwise_product(b.entry.conj(), a.right)), False
    if isinstance(a, RankOne) and isinstance(b, RankOne):
        s = inner(b.left, a.right)
        return RankOne(_scale(a.left, s), b.right), True
    raise TypeError("matrix product needs two-axis rules")


def _scale(g: Sequence1D, s: complex) -> Sequence1D:
    if isinstance(g, Kronecker):
        return Kronecker(g.index, g.value * s)
    return PowerExp(g.power, g.rate, g.scale * s)


# -- serialization ------------------------------------------------------------


def generator_from_json(data: dict, axes: int | None = None) -> Generator:
    """Parse a rule from its JSON dictionary.

    Raises ``ValueError`` naming the offending field on malformed input.
    """
    if not isinstance(data, dict):
        raise ValueError("generator: expected an object")
    kind = data.get("kind")
    try:
        if kind in ("power-law", "exponential", "power-exponential"):
            exponent = data.get("exponent", 0.0)
            rate = data.get("rate", 0.0)
            scale = _complex_from_json(data.get("scale", 1.0))
            two = np.ndim(exponent) == 1 or np.ndim(rate) == 1
            if two or axes == 2:
                p1, p2 = (exponent, exponent) if np.ndim(exponent) == 0 else exponent
                a1, a2 = (rate, rate) if np.ndim(rate) == 0 else rate
                g = RankOne(PowerExp(p1, a1, scale), PowerExp(p2, a2))
            else:
                g = PowerExp(exponent, rate, scale)
        elif kind == "kronecker":
            g = kronecker(data["index"], _complex_from_json(data.get("value", 1.0)))
        elif kind == "diagonal":
            g = Diagonal(generator_from_json(data["entry"], axes=1))
        elif kind == "rank-one":
            g = RankOne(
                generator_from_json(data["left"], axes=1),
                generator_from_json(data["right"], axes=1),
            )
        else:
            raise ValueError(f"generator.kind: unknown kind {kind!r}")
    except KeyError as exc:
        raise ValueError(f"generator.{exc.args[0]}: missing field") from None
    except (TypeError, ValueError) as exc:
        if str(exc).startswith("generator"):
            raise
        raise ValueError(f"generator: {exc}") from None
    if axes is not None and g.axes != axes:
        raise ValueError(f"generator.kind: {kind!r} has {g.axes} axes, expected {axes}")
    return g
