"""Multiplier membership, bounded elements and the trace on bounded pairs.

An element ``f`` of the dual space is a left multiplier when ``f # a`` decays
rapidly for every rapidly decaying ``a``, and a right multiplier when
``a # f`` does. Verdicts are decided in three stages:

1. envelope arithmetic (a certified derivation, ``Member``),
2. a symbolic search over a fixed probe basket using closed-form rules
   (a certified ``NonMember`` with its witness probe),
3. numerical growth classification of the probe products across the
   truncation ladder, which may end ``Inconclusive``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

from . import catalog
from .algebra import AlgebraModel, MatrixModel, NotInDualError, PointwiseModel
from .envelope import GrowthClass, _sup_power_exp
from .graded import DEFAULT_LADDER, GradedElement, classify_numeric

__all__ = [
    "MembershipVerdict",
    "BoundedVerdict",
    "probe_basket",
    "is_left_moyal",
    "is_right_moyal",
    "is_moyal",
    "is_bounded_element",
    "trace_tauL",
]

MEMBER, NON_MEMBER, INCONCLUSIVE = "Member", "NonMember", "Inconclusive"


@dataclass
class MembershipVerdict:
    side: str
    verdict: str
    certificate: dict = field(default_factory=dict)
    witness: GradedElement | None = None
    ladder: tuple[int, ...] = ()
    residuals: list = field(default_factory=list)

    @property
    def is_member(self) -> bool:
        return self.verdict == MEMBER

    def to_json(self) -> dict:
        out = {
            "side": self.side,
            "verdict": self.verdict,
            "certificate": self.certificate,
            "ladder": list(self.ladder),
            "residuals": self.residuals,
        }
        if self.witness is not None:
            w = self.witness
            out["witness"] = (
                w.generator.to_json() if w.generator is not None else {"trunc": list(w.trunc)}
            )
        return out


@dataclass
class BoundedVerdict:
    verdict: str
    constant: float | None
    certificate: dict = field(default_factory=dict)

    @property
    def is_member(self) -> bool:
        return self.verdict == MEMBER

    def to_json(self) -> dict:
        return {"verdict": self.verdict, "constant": self.constant, "certificate": self.certificate}


# -- probes ---------------------------------------------------------------------


def probe_basket(model: AlgebraModel) -> list:
    """Closed-form rapidly decaying probes, ordered as they are tried.

    Matrix probes: ``diag(e^-m)``, ``e^-(m+n)``, the asymmetric rank-one
    ``e^-m (x) e^-2n`` and the four corner deltas ``E_00, E_01, E_10, E_11``.
    Sequence probes: ``e^-m`` and the deltas at 0 and 1.
    """
    if model.axes == 2:
        decay = catalog.exponential(1.0)
        return [
            catalog.diagonal(decay),
            catalog.rank_one(decay, decay),
            catalog.rank_one(decay, catalog.exponential(2.0)),
            catalog.kronecker((0, 0)),
            catalog.kronecker((0, 1)),
            catalog.kronecker((1, 0)),
            catalog.kronecker((1, 1)),
        ]
    return [catalog.exponential(1.0), catalog.kronecker(0), catalog.kronecker(1)]


def _picture(f: GradedElement, model: AlgebraModel):
    """Element and graded model in which membership is decided."""
    inner = getattr(model, "graded_model", None)
    if inner is not None:
        return model.chart(f), inner, "pullback"
    return f, model, "direct"


def _check_dual(f, model) -> None:
    c = model.classify(f)
    if c.growth is GrowthClass.WILD:
        raise NotInDualError("f is classified Wild; multiplier membership is undefined")


def _envelope_member(env, model, side) -> str | None:
    """Closed derivation that f is a multiplier on ``side``, or None."""
    if env.growth_class() is GrowthClass.WILD:
        return None
    if isinstance(model, PointwiseModel):
        return "tempered sequences multiply rapidly decaying sequences into themselves"
    if isinstance(model, MatrixModel):
        if env.support == "diagonal":
            return "diagonal tempered envelope: (f g)_mn = f_mm g_mn, (g f)_mn = g_mn f_nn"
        alpha = env.exp_rate[0] if side == "Left" else env.exp_rate[1]
        if alpha > 0:
            axis = "row" if side == "Left" else "column"
            return (
                f"full envelope with {axis} rate {alpha:g} > 0: the contraction"
                " over the other index converges against any tempered factor"
            )
    return None


def _membership(f, model, side, ladder, probes) -> MembershipVerdict:
    _check_dual(f, model)
    g_elem, gm, picture = _picture(f, model)
    ladder = tuple(sorted(set(int(d) for d in ladder)))
    env = g_elem.growth_envelope()
    if env is not None:
        why = _envelope_member(env, gm, side)
        if why is not None:
            return MembershipVerdict(
                side, MEMBER, {"method": "envelope", "envelope": env.to_json(),
                               "derivation": why, "picture": picture}, ladder=ladder)
    basket = probe_basket(gm) if probes is None else list(probes)
    gen = g_elem.generator
    if gen is not None:
        for p in basket:
            if not hasattr(p, "evaluate"):
                continue
            sym = _symbolic(gm, gen, p, side)
            if sym is None:
                continue
            cls = sym.envelope().growth_class()
            if not cls.is_rapid:
                witness = GradedElement.from_generator(p, g_elem.trunc)
                return MembershipVerdict(
                    side, NON_MEMBER,
                    {"method": "symbolic", "product": sym.to_json(), "product_class": cls.value,
                     "picture": picture},
                    witness=witness, ladder=ladder)
    # every symbolic product decayed, but the basket is not all of A
    return _numeric_membership(g_elem, gm, side, ladder, basket, picture)


def _symbolic(model, gen, probe, side):
    try:
        if isinstance(model, MatrixModel):
            a, b = (gen, probe) if side == "Left" else (probe, gen)
            return catalog.matrix_product(a, b)[0]
        return catalog.pointwise_product(gen, probe)
    except (catalog.DivergentSeries, TypeError):
        return None


def _numeric_membership(f, model, side, ladder, basket, picture) -> MembershipVerdict:
    levels = [d for d in ladder if f.generator is not None or d <= min(f.trunc)]
    if not levels:
        return MembershipVerdict(
            side, INCONCLUSIVE,
            {"method": "numeric", "picture": picture,
             "reason": "no ladder level fits inside the stored truncation"},
            ladder=ladder)
    top = levels[-1]
    fe = f.truncate(top)
    residuals, worst = [], None
    for p in basket:
        pe = p if isinstance(p, GradedElement) else GradedElement.from_generator(p, top)
        pe = GradedElement(pe.coeffs[tuple(slice(0, top) for _ in range(model.axes))])
        fe_plain = GradedElement(fe.coeffs)
        prod = model.product(fe_plain, pe) if side == "Left" else model.product(pe, fe_plain)
        c = classify_numeric(prod, levels)
        residuals.append({"probe": _probe_name(p), "class": c.growth.value, "slope": c.slope})
        if c.growth in (GrowthClass.TEMPERED, GrowthClass.WILD):
            return MembershipVerdict(
                side, NON_MEMBER, {"method": "numeric", "picture": picture,
                                   "product_class": c.growth.value},
                witness=pe, ladder=tuple(levels), residuals=residuals)
        if not c.growth.is_rapid:
            worst = c.growth
    if worst is None:
        return MembershipVerdict(
            side, MEMBER, {"method": "numeric", "picture": picture,
                           "note": "all probe products classified RapidDecay on the ladder"},
            ladder=tuple(levels), residuals=residuals)
    return MembershipVerdict(
        side, INCONCLUSIVE, {"method": "numeric", "picture": picture,
                             "reason": "a probe product could not be classified"},
        ladder=tuple(levels), residuals=residuals)


def _probe_name(p) -> str:
    gen = p.generator if isinstance(p, GradedElement) else p
    return "array" if gen is None else repr(gen)


def is_left_moyal(f: GradedElement, model: AlgebraModel, ladder=DEFAULT_LADDER,
                  probes=None) -> MembershipVerdict:
    """Decide whether ``f # a`` decays rapidly for every rapidly decaying ``a``.

    Raises
    ------
    NotInDualError
        If ``f`` is classified Wild.
    """
    return _membership(f, model, "Left", ladder, probes)


def is_right_moyal(f: GradedElement, model: AlgebraModel, ladder=DEFAULT_LADDER,
                   probes=None) -> MembershipVerdict:
    """Decide whether ``a # f`` decays rapidly for every rapidly decaying ``a``."""
    return _membership(f, model, "Right", ladder, probes)


def is_moyal(f: GradedElement, model: AlgebraModel, ladder=DEFAULT_LADDER,
             probes=None) -> MembershipVerdict:
    """Two-sided verdict combining the left and right checks."""
    left = is_left_moyal(f, model, ladder, probes)
    right = is_right_moyal(f, model, ladder, probes)
    verdicts = {left.verdict, right.verdict}
    if verdicts == {MEMBER}:
        verdict = MEMBER
    elif NON_MEMBER in verdicts:
        verdict = NON_MEMBER
    else:
        verdict = INCONCLUSIVE
    witness = left.witness if left.verdict == NON_MEMBER else right.witness
    return MembershipVerdict(
        "Both", verdict, {"Left": left.certificate, "Right": right.certificate},
        witness=witness, ladder=left.ladder, residuals=left.residuals + right.residuals)


# -- bounded elements and trace ------------------------------------------------------


def _closed_form_norm(gen) -> float | None:
    """Operator norm of multiplication by a closed-form rule."""
    def sup1(s):
        if isinstance(s, catalog.Kronecker):
            return abs(s.value)
        return abs(s.scale) * _sup_power_exp(s.power, s.rate)

    if isinstance(gen, (catalog.PowerExp, catalog.Kronecker)):
        return sup1(gen)
    if isinstance(gen, catalog.Diagonal):
        return sup1(gen.entry)
    if isinstance(gen, catalog.RankOne):
        try:
            return math.sqrt(abs(catalog.inner(gen.left, gen.left))) * math.sqrt(
                abs(catalog.inner(gen.right, gen.right)))
        except catalog.DivergentSeries:
            return None
    return None


def is_bounded_element(f: GradedElement, model: AlgebraModel,
                       ladder=DEFAULT_LADDER) -> BoundedVerdict:
    """Decide whether left multiplication by ``f`` is bounded on the completion.

    In the sequence and matrix models every square-summable element is
    bounded (``||L_f|| <= ||f||``); the reported constant is the exact
    operator norm when ``f`` has a closed-form rule, and the norm at the
    stored truncation otherwise. Other models use the ladder: the norm
    estimates must settle to a relative change of 1e-3.

    Raises
    ------
    ValueError
        If ``f`` is not classified square summable.
    """
    c = model.classify(f, ladder)
    if not c.growth.is_square_summable:
        raise ValueError(f"f must be square summable, got {c.growth.value}")
    if isinstance(model, (PointwiseModel, MatrixModel)):
        if f.generator is not None:
            norm = _closed_form_norm(f.generator)
            if norm is not None:
                return BoundedVerdict(MEMBER, norm, {"method": "closed-form",
                                                     "generator": f.generator.to_json()})
        return BoundedVerdict(
            MEMBER, model.left_operator_norm(f),
            {"method": "inclusion", "note": "square-summable elements are bounded;"
             " constant is the norm at the stored truncation"})
    levels = [d for d in sorted(set(ladder)) if f.generator is not None or d <= min(f.trunc)]
    norms = [model.left_operator_norm(f.truncate(d)) for d in levels] or [
        model.left_operator_norm(f)]
    if len(norms) >= 2 and abs(norms[-1] - norms[-2]) <= 1e-3 * max(norms[-1], 1e-300):
        return BoundedVerdict(MEMBER, max(norms), {"method": "ladder", "norms": norms})
    if len(norms) == 1:
        # finite-dimensional model: every multiplication operator is bounded
        return BoundedVerdict(MEMBER, norms[0], {"method": "finite-dimensional"})
    return BoundedVerdict(INCONCLUSIVE, None, {"method": "ladder", "norms": norms})


def trace_tauL(f: GradedElement, g: GradedElement, model: AlgebraModel) -> complex:
    """Trace of ``L_f L_g``, computed as ``<f, g^#>``.

    Both arguments must be certified bounded elements; in the matrix
    model the value is the matrix trace ``Tr(f g)`` at truncation.
    """
    for name, x in (("f", f), ("g", g)):
        try:
            v = is_bounded_element(x, model)
        except ValueError as exc:
            raise ValueError(f"{name} is not a certified bounded element: {exc}") from None
        if not v.is_member:
            raise ValueError(f"{name} is not a certified bounded element ({v.verdict})")
    return model.inner(f, model.involution(g))
