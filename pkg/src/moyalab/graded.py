"""Weighted index sets, seminorms and truncated elements of the triple.

Elements of the rapid-decay algebra, of its Hilbert completion and of the
dual space are all stored the same way: a dense complex coefficient array
over a box of indices, optionally annotated with a closed-form entry rule
(:mod:`moyalab.catalog`) and a growth envelope (:mod:`moyalab.envelope`).
Which space an element belongs to is decided by :func:`classify`.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, NamedTuple, Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_is_fitted

from . import catalog
from ._validation import check_complex_array, check_ladder
from .catalog import Generator
from .envelope import EnvelopeClass, GrowthClass

__all__ = [
    "WeightSystem",
    "GradedElement",
    "ClassifierThresholds",
    "Classification",
    "GelfandTriple",
    "GrowthClassifier",
    "FormatError",
    "seminorm",
    "pairing",
    "classify",
    "classify_numeric",
    "bounded_family_uniformity",
    "element_to_json",
    "element_from_json",
    "load_element",
    "save_element",
]

DEFAULT_LADDER = (16, 32, 64, 128, 256)


class FormatError(ValueError):
    """Malformed element or family file; the message names the field."""


@dataclass(frozen=True)
class WeightSystem:
    """Weight ``w(m) = prod_i (1 + m_i)`` on ``axes``-dimensional indices."""

    axes: int = 1

    def __post_init__(self):
        if self.axes not in (1, 2):
            raise ValueError(f"axes must be 1 or 2, got {self.axes}")

    def __call__(self, index) -> float:
        index = (index,) if np.ndim(index) == 0 else tuple(index)
        return float(np.prod([1 + int(m) for m in index]))

    def grid(self, trunc) -> np.ndarray:
        """Weights on the whole index box, as floats."""
        trunc = tuple(int(t) for t in trunc)
        out = np.arange(1, trunc[0] + 1, dtype=float)
        for d in trunc[1:]:
            out = np.multiply.outer(out, np.arange(1, d + 1, dtype=float))
        return out


@dataclass(frozen=True, eq=False)
class GradedElement:
    """Truncated coefficient array with optional rule and envelope.

    Parameters
    ----------
    coeffs : array-like of complex
        Coefficients on the index box; the shape is the truncation.
    envelope : EnvelopeClass, optional
        Certified bound; checked against every stored coefficient.
    generator : catalog rule, optional
        Closed-form entry rule; the stored coefficients must equal it.
    """

    coeffs: np.ndarray
    envelope: EnvelopeClass | None = None
    generator: Generator | None = None

    def __post_init__(self):
        coeffs = check_complex_array(self.coeffs, ndim=(1, 2), name="coeffs").copy()
        if min(coeffs.shape) < 1:
            raise ValueError("truncation must be >= 1 on every axis")
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)
        if self.generator is not None:
            if self.generator.axes != coeffs.ndim:
                raise ValueError("generator axes do not match coefficients")
            if not np.array_equal(self.generator.evaluate(coeffs.shape), coeffs):
                raise ValueError("stored coefficients differ from the generator")
        if self.envelope is not None:
            if self.envelope.axes != coeffs.ndim:
                raise ValueError("envelope axes do not match coefficients")
            if not self.envelope.certifies(coeffs):
                raise ValueError("a stored coefficient violates the envelope bound")

    @classmethod
    def from_generator(cls, generator: Generator, trunc) -> "GradedElement":
        """Evaluate ``generator`` on the box ``trunc`` and attach its envelope."""
        trunc = (trunc,) * generator.axes if np.ndim(trunc) == 0 else tuple(trunc)
        return cls(generator.evaluate(trunc), generator.envelope(), generator)

    @property
    def axes(self) -> int:
        return self.coeffs.ndim

    @property
    def trunc(self) -> tuple[int, ...]:
        return self.coeffs.shape

    @property
    def weights(self) -> WeightSystem:
        return WeightSystem(self.axes)

    def truncate(self, trunc) -> "GradedElement":
        """Restrict (or, with a rule, extend) to another index box."""
        trunc = (int(trunc),) * self.axes if np.ndim(trunc) == 0 else tuple(trunc)
        if self.generator is not None:
            return GradedElement(self.generator.evaluate(trunc), self.envelope, self.generator)
        if any(t > s for t, s in zip(trunc, self.trunc)):
            raise ValueError(f"cannot extend a stored array from {self.trunc} to {trunc}")
        sl = tuple(slice(0, t) for t in trunc)
        return GradedElement(self.coeffs[sl], self.envelope)

    def growth_envelope(self) -> EnvelopeClass | None:
        """Envelope derived from the rule if present, else the attached one."""
        if self.generator is not None:
            return self.generator.envelope()
        return self.envelope

    def __repr__(self):
        extra = ""
        if self.generator is not None:
            extra += f", generator={self.generator!r}"
        if self.envelope is not None:
            extra += f", envelope={self.envelope!r}"
        return f"GradedElement(trunc={self.trunc}{extra})"


# -- seminorms and pairing -----------------------------------------------------


def seminorm(a: GradedElement, k: int) -> float:
    """``p_k(a) = max_m |a_m| w(m)**k`` over the stored indices."""
    if int(k) != k or k < 0:
        raise ValueError(f"seminorm order must be a nonnegative integer, got {k}")
    w = a.weights.grid(a.trunc)
    return float(np.max(np.abs(a.coeffs) * w ** int(k)))


def pairing(f: GradedElement, h: GradedElement) -> complex:
    """Sesquilinear pairing ``sum_m f_m conj(h_m)``, conjugate-linear in ``h``."""
    if f.trunc != h.trunc:
        raise ValueError(f"pairing: shape mismatch {f.trunc} vs {h.trunc}")
    return complex(np.vdot(h.coeffs.ravel(), f.coeffs.ravel()))


# -- classification ------------------------------------------------------------


@dataclass(frozen=True)
class ClassifierThresholds:
    """Decision thresholds of the numerical growth classifier.

    ``slope`` bounds the log-log tail slope separating tempered from
    rapid/wild behaviour. The exponential fit counts as clearly better
    when its residual is below ``exp_advantage`` times the power-law
    residual. Fits use the last ``window`` complete dyadic shells.
    """

    slope: float = 8.0
    exp_advantage: float = 0.5
    window: int = 3
    noise_floor: float = 1e-9


@dataclass(frozen=True)
class Classification:
    growth: GrowthClass
    method: str
    slope: float | None = None
    rate: float | None = None
    levels: tuple = ()
    envelope: EnvelopeClass | None = None

    def to_json(self) -> dict:
        out = {"class": self.growth.value, "method": self.method}
        if self.slope is not None:
            out["slope"] = self.slope
            out["rate"] = self.rate
            out["levels"] = [list(lv) for lv in self.levels]
        if self.envelope is not None:
            out["envelope"] = self.envelope.to_json()
        return out


def classify(
    a: GradedElement,
    ladder: Sequence[int] = DEFAULT_LADDER,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
) -> Classification:
    """Decide whether ``a`` decays rapidly, is square summable, tempered or wild.

    With a rule or an envelope the answer is exact envelope arithmetic.
    Otherwise the dyadic-shell fit of :func:`classify_numeric` is used and
    may return ``Inconclusive``.
    """
    ladder = check_ladder(ladder)
    env = a.growth_envelope()
    if env is not None:
        return Classification(env.growth_class(), "envelope", envelope=env)
    if not np.any(a.coeffs) and a.generator is None:
        # zero lies in every space of the triple
        return Classification(GrowthClass.RAPID_DECAY, "zero")
    return classify_numeric(a, ladder, thresholds)


def _shell_maxima(coeffs: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Maxima of |a| on complete dyadic shells of ``1 + max_i m_i``."""
    d = min(coeffs.shape)
    radius = np.ones(coeffs.shape, dtype=float)
    for axis, n in enumerate(coeffs.shape):
        shape = [1] * coeffs.ndim
        shape[axis] = n
        radius = np.maximum(radius, np.arange(1, n + 1, dtype=float).reshape(shape))
    shell = np.frexp(radius)[1] - 1
    n_shells = (d + 1).bit_length() - 1
    mags = np.abs(coeffs)
    maxima = np.zeros(n_shells)
    where = np.zeros(n_shells)
    for j in range(n_shells):
        sel = shell == j
        vals = mags[sel]
        i = int(np.argmax(vals))
        maxima[j] = vals[i]
        where[j] = radius[sel][i]
    return maxima, where


def _fit(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    coef = np.polyfit(x, y, 1)
    resid = y - np.polyval(coef, x)
    return float(coef[0]), float(np.sqrt(np.mean(resid**2)))


def _level_verdict(coeffs, th: ClassifierThresholds) -> tuple[GrowthClass, float, float]:
    maxima, where = _shell_maxima(coeffs)
    positive = maxima > 0
    if not positive.any():
        return GrowthClass.RAPID_DECAY, -math.inf, math.inf
    last = int(np.nonzero(positive)[0][-1])
    if last < len(maxima) - 1:
        # trailing empty shells: finite support or underflow
        return GrowthClass.RAPID_DECAY, -math.inf, math.inf
    idx = np.nonzero(positive)[0][-th.window:]
    if len(idx) < th.window:
        return GrowthClass.INCONCLUSIVE, math.nan, math.nan
    y = np.log(maxima[idx])
    slope, r_pow = _fit(np.log(where[idx]), y)
    neg_rate, r_exp = _fit(where[idx], y)
    exp_better = r_exp < th.exp_advantage * r_pow and r_pow > th.noise_floor
    if slope >= th.slope:
        verdict = GrowthClass.WILD if exp_better else GrowthClass.INCONCLUSIVE
    elif slope <= -th.slope:
        verdict = GrowthClass.RAPID_DECAY if exp_better else GrowthClass.INCONCLUSIVE
    else:
        verdict = GrowthClass.INCONCLUSIVE if exp_better else GrowthClass.TEMPERED
    return verdict, slope, -neg_rate


def classify_numeric(
    a: GradedElement,
    ladder: Sequence[int] = DEFAULT_LADDER,
    thresholds: ClassifierThresholds = ClassifierThresholds(),
) -> Classification:
    """Numerical growth verdict from dyadic index shells across ``ladder``.

    At each level the log of the shell maxima is fitted against the log of
    the shell index (power law) and against the index itself
    (exponential). The largest level decides; any other level reaching a
    different definite verdict makes the result ``Inconclusive``. Levels
    beyond the stored truncation are skipped unless ``a`` has a rule.
    """
    ladder = check_ladder(ladder)
    levels = []
    for d in ladder:
        if a.generator is not None:
            coeffs = a.generator.evaluate((d,) * a.axes)
        elif d <= min(a.trunc):
            coeffs = a.coeffs[tuple(slice(0, d) for _ in range(a.axes))]
        else:
            continue
        verdict, slope, rate = _level_verdict(coeffs, thresholds)
        levels.append((d, verdict.value, slope, rate))
    if not levels:
        return Classification(GrowthClass.INCONCLUSIVE, "numeric", math.nan, math.nan)
    _, top, slope, rate = levels[-1]
    top = GrowthClass(top)
    definite = {GrowthClass(v) for _, v, _, _ in levels} - {GrowthClass.INCONCLUSIVE}
    if len(definite) > 1:
        top = GrowthClass.INCONCLUSIVE
    return Classification(top, "numeric", slope, rate, tuple(levels))


class UniformityResult(NamedTuple):
    value: float
    k_prime: int


def bounded_family_uniformity(S, k: int, model, probes=None) -> UniformityResult:
    """Equicontinuity surrogate for the left multipliers ``g -> f # g``, ``f in S``.

    Returns ``sup_{f in S, g in probes} p_k(f#g) / p_{k'}(g)`` together with
    ``k'``. In both graded models ``k' = k`` suffices once ``S`` is bounded
    in the rapid-decay topology. The probes default to the model's basis
    probes, which attain the supremum over all of A.
    """
    S = list(S)
    if not S:
        raise ValueError("the family S must be nonempty")
    trunc = S[0].trunc
    for f in S:
        if f.trunc != trunc:
            raise ValueError("elements of S have different truncations")
        if not model.classify(f).growth.is_rapid:
            raise ValueError("every element of S must be classified RapidDecay")
    k_prime = int(k)
    if probes is None:
        probes = model.probe_basis(trunc)
    best = 0.0
    for f in S:
        for g in probes:
            denom = model.seminorm(g, k_prime)
            if denom == 0:
                continue
            best = max(best, model.seminorm(model.product(f, g), k) / denom)
    return UniformityResult(best, k_prime)


# -- Gelfand triple ------------------------------------------------------------


@dataclass(frozen=True)
class GelfandTriple:
    """The chain A -> B -> A-dagger at finite truncation.

    ``chart`` maps model elements to coefficient arrays in the graded
    picture (identity for the sequence and matrix models, the synthesis
    map for transported symbol models); seminorms are read through it.
    """

    weights: WeightSystem
    orders: tuple[int, ...] = (0, 1, 2, 3, 4, 5)
    thresholds: ClassifierThresholds = field(default_factory=ClassifierThresholds)
    chart: Callable[[GradedElement], GradedElement] | None = None

    def _pull(self, a: GradedElement) -> GradedElement:
        return a if self.chart is None else self.chart(a)

    def seminorms(self, a: GradedElement) -> list[float]:
        b = self._pull(a)
        return [seminorm(b, k) for k in self.orders]

    def classify(self, a: GradedElement, ladder=DEFAULT_LADDER) -> Classification:
        return classify(self._pull(a), ladder, self.thresholds)

    def embed(self, a: GradedElement) -> GradedElement:
        """Inclusion of A into B; at truncation it keeps the coefficients."""
        return GradedElement(a.coeffs)

    def dual_embed(self, b: GradedElement) -> GradedElement:
        """Riesz inclusion of B into A-dagger; the pairing is the scalar product."""
        return GradedElement(b.coeffs, b.envelope)

    def pairing(self, f: GradedElement, h: GradedElement) -> complex:
        return pairing(f, h)


# -- JSON ----------------------------------------------------------------------


def element_to_json(a: GradedElement) -> dict:
    flat = a.coeffs.ravel()
    return {
        "axes": a.axes,
        "trunc": list(a.trunc),
        "coeffs": [[float(z.real), float(z.imag)] for z in flat],
        "generator": None if a.generator is None else a.generator.to_json(),
        "envelope": None if a.envelope is None else a.envelope.to_json(),
    }


def element_from_json(data: dict) -> GradedElement:
    """Build an element from its JSON dictionary, naming bad fields on error."""
    if not isinstance(data, dict):
        raise FormatError("element: expected a JSON object")
    for key in ("axes", "trunc", "coeffs"):
        if key not in data:
            raise FormatError(f"{key}: missing field")
    axes = data["axes"]
    if axes not in (1, 2):
        raise FormatError(f"axes: must be 1 or 2, got {axes!r}")
    trunc = data["trunc"]
    if not isinstance(trunc, list) or len(trunc) != axes or not all(
        isinstance(t, int) and t >= 1 for t in trunc
    ):
        raise FormatError(f"trunc: expected {axes} positive integers")
    raw = data["coeffs"]
    try:
        arr = np.asarray(raw, dtype=float)
    except (TypeError, ValueError):
        raise FormatError("coeffs: expected a list of [re, im] pairs") from None
    if arr.ndim != 2 or arr.shape[1] != 2 or arr.shape[0] != math.prod(trunc):
        raise FormatError(f"coeffs: expected {math.prod(trunc)} [re, im] pairs")
    coeffs = (arr[:, 0] + 1j * arr[:, 1]).reshape(trunc)
    generator = envelope = None
    if data.get("generator") is not None:
        try:
            generator = catalog.generator_from_json(data["generator"], axes=axes)
        except ValueError as exc:
            raise FormatError(str(exc)) from None
    if data.get("envelope") is not None:
        try:
            envelope = EnvelopeClass.from_json(data["envelope"])
        except (TypeError, ValueError) as exc:
            raise FormatError(f"envelope: {exc}") from None
    try:
        return GradedElement(coeffs, envelope, generator)
    except ValueError as exc:
        field_name = "generator" if "generator" in str(exc) else "envelope"
        raise FormatError(f"{field_name}: {exc}") from None


def load_element(path) -> GradedElement:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"element file is not valid JSON: {exc}") from None
    return element_from_json(data)


def save_element(a: GradedElement, path) -> None:
    Path(path).write_text(json.dumps(element_to_json(a), indent=2, sort_keys=True) + "\n")


# -- estimator -----------------------------------------------------------------


class GrowthClassifier(ClassifierMixin, BaseEstimator):
    """Numerical growth classifier for one-axis coefficient sequences.

    A stateless estimator: ``fit`` only records the input width, and
    ``predict`` applies :func:`classify_numeric` row by row, so it drops
    into pipelines and model-selection utilities.

    Parameters
    ----------
    ladder : tuple of int
        Truncation levels; levels wider than the input are skipped.
    slope_threshold : float
        Log-log tail slope separating tempered from rapid or wild growth.
    exp_advantage : float
        Residual ratio below which the exponential fit counts as better.
    window : int
        Number of trailing dyadic shells entering each fit.
    """

    def __init__(self, ladder=(16, 32, 64, 128, 256), slope_threshold=8.0,
                 exp_advantage=0.5, window=3):
        self.ladder = ladder
        self.slope_threshold = slope_threshold
        self.exp_advantage = exp_advantage
        self.window = window

    def fit(self, X, y=None):
        X = check_complex_array(X, ndim=2, name="X")
        self.n_features_in_ = X.shape[1]
        self.classes_ = np.array([c.value for c in GrowthClass])
        return self

    def predict(self, X):
        check_is_fitted(self)
        X = check_complex_array(X, ndim=2, name="X")
        th = ClassifierThresholds(self.slope_threshold, self.exp_advantage, self.window)
        return np.array(
            [classify_numeric(GradedElement(row), self.ladder, th).growth.value for row in X]
        )
