"""Algebra models, the Hilbert-algebra axiom verifier and duality extensions.

A model bundles a product, an involution and a scalar product on
:class:`~moyalab.graded.GradedElement` objects of a fixed truncation.
Two graded models live here (entrywise product of sequences, matrix
product of matrices); the model transported from an operator family is in
:mod:`moyalab.opfamily`.

The extension operations materialize functionals on A as coefficient
arrays: a functional ``F`` is stored as the unique array with
``inner(F, h) = F(h)`` for every ``h`` at the current truncation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from . import catalog
from ._validation import check_tolerance
from .envelope import EnvelopeClass, GrowthClass
from .graded import (
    DEFAULT_LADDER,
    Classification,
    GradedElement,
    classify,
    seminorm,
)

__all__ = [
    "AlgebraModel",
    "PointwiseModel",
    "MatrixModel",
    "MutatedModel",
    "mutate",
    "CorpusSpec",
    "AxiomResult",
    "AxiomReport",
    "check_hilbert_axioms",
    "recheck_witness",
    "extend_product_right",
    "extend_product_left",
    "extend_involution",
    "moyal_extend",
    "moyal_extend_right",
    "NotInDualError",
    "MembershipError",
]


class NotInDualError(ValueError):
    """The element grows too fast to define a functional on A."""


class MembershipError(ValueError):
    """A Moyal-membership certificate is missing or negative."""


def _disk(rng: np.random.Generator, shape) -> np.ndarray:
    # uniform on the closed unit disk, so an envelope constant of 1 is exact
    r = np.sqrt(rng.uniform(size=shape))
    theta = rng.uniform(0.0, 2 * np.pi, size=shape)
    return r * np.exp(1j * theta)


class AlgebraModel:
    """Product, involution and scalar product on truncated elements.

    Subclasses implement ``_multiply`` and ``_involve`` on raw arrays; this
    base class keeps rules and envelopes attached where they stay valid,
    and provides generic (basis-probing) matrices of the multiplication
    maps used by the extension operations.
    """

    name = "abstract"
    axes = 1

    # -- primitives to override ------------------------------------------------
    def _multiply(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _involve(self, a: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def symbolic_product(self, a, b):
        """Rule of the product, as ``(rule, contracted)``, or ``None``."""
        return None

    def symbolic_involution(self, a):
        return None

    def envelope_product(self, ea: EnvelopeClass, eb: EnvelopeClass):
        return None

    def envelope_involution(self, ea: EnvelopeClass):
        return None

    def metric(self, shape) -> np.ndarray:
        """Diagonal of the scalar-product metric on flattened coefficients."""
        return np.ones(math.prod(shape))

    def dimension(self, shape) -> int:
        return math.prod(shape)

    def left_operator_norm(self, f: GradedElement) -> float:
        raise NotImplementedError

    def random_element(self, rng, trunc, decay=0.05, growth=0.0) -> GradedElement:
        raise NotImplementedError

    def probe_basis(self, shape) -> list[GradedElement]:
        raise NotImplementedError

    def element_shape(self, trunc) -> tuple[int, ...]:
        return (trunc,) * self.axes if np.ndim(trunc) == 0 else tuple(trunc)

    # -- public operations ------------------------------------------------------
    def _check(self, *elements: GradedElement) -> None:
        shape = elements[0].trunc
        for e in elements:
            if e.axes != self.axes:
                raise ValueError(f"{self.name} model expects {self.axes}-axis elements")
            if e.trunc != shape:
                raise ValueError(f"shape mismatch: {e.trunc} vs {shape}")

    def product(self, f: GradedElement, g: GradedElement) -> GradedElement:
        self._check(f, g)
        return self._annotate(self._multiply(f.coeffs, g.coeffs), f, g)

    def involution(self, f: GradedElement) -> GradedElement:
        self._check(f)
        coeffs = self._involve(f.coeffs)
        gen = env = None
        if f.generator is not None:
            gen = self.symbolic_involution(f.generator)
        if f.growth_envelope() is not None:
            env = self.envelope_involution(f.growth_envelope())
        return _assemble(coeffs, env, gen)

    def inner(self, f: GradedElement, g: GradedElement) -> complex:
        """Scalar product, linear in ``f`` and conjugate-linear in ``g``."""
        self._check(f, g)
        w = self.metric(f.trunc)
        return complex(np.sum(w * f.coeffs.ravel() * g.coeffs.ravel().conj()))

    def norm(self, f: GradedElement) -> float:
        return math.sqrt(max(self.inner(f, f).real, 0.0))

    def chart(self, f: GradedElement) -> GradedElement:
        """Graded picture of ``f`` in which seminorms are evaluated."""
        return f

    def seminorm(self, f: GradedElement, k: int) -> float:
        return seminorm(self.chart(f), k)

    def classify(self, f: GradedElement, ladder=DEFAULT_LADDER) -> Classification:
        return classify(self.chart(f), ladder)

    def basis(self, shape) -> Iterator[GradedElement]:
        n = math.prod(shape)
        for i in range(n):
            e = np.zeros(n, dtype=complex)
            e[i] = 1.0
            yield GradedElement(e.reshape(shape))

    def multiplication_matrix(self, g: GradedElement, side: str) -> np.ndarray:
        """Matrix of ``h -> g # h`` (``side="left"``) or ``h -> h # g`` on flat arrays."""
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        cols = []
        for e in self.basis(g.trunc):
            out = self._multiply(g.coeffs, e.coeffs) if side == "left" else self._multiply(
                e.coeffs, g.coeffs
            )
            cols.append(out.ravel())
        return np.stack(cols, axis=1)

    def involution_matrix(self, shape) -> np.ndarray:
        """Matrix ``K`` with ``h^# = K conj(h)`` on flat arrays."""
        cols = [self._involve(e.coeffs).ravel() for e in self.basis(shape)]
        return np.stack(cols, axis=1)

    def to_json(self) -> dict:
        return {"model": self.name}

    # -- helpers ---------------------------------------------------------------
    def _annotate(self, coeffs: np.ndarray, f: GradedElement, g: GradedElement) -> GradedElement:
        """Attach the product rule (if exact at truncation) and envelope."""
        gen = env = None
        if f.generator is not None and g.generator is not None:
            sym = self.symbolic_product(f.generator, g.generator)
            if sym is not None and not sym[1]:
                gen = sym[0]
        ef, eg = f.growth_envelope(), g.growth_envelope()
        if ef is not None and eg is not None:
            env = self.envelope_product(ef, eg)
        return _assemble(coeffs, env, gen)


def _assemble(coeffs, env, gen) -> GradedElement:
    if gen is not None:
        exact = gen.evaluate(coeffs.shape)
        scale = max(1.0, float(np.max(np.abs(exact))))
        if np.allclose(exact, coeffs, rtol=1e-9, atol=1e-12 * scale):
            coeffs = exact
        else:
            gen = None
    if env is not None and not env.certifies(coeffs):
        env = None
    return GradedElement(coeffs, env, gen)


class PointwiseModel(AlgebraModel):
    """Sequences with entrywise product and complex conjugation."""

    name = "pointwise"
    axes = 1

    def _multiply(self, a, b):
        return a * b

    def _involve(self, a):
        return a.conj()

    def symbolic_product(self, a, b):
        return catalog.pointwise_product(a, b), False

    def symbolic_involution(self, a):
        return a.conj()

    def envelope_product(self, ea, eb):
        return ea.times(eb)

    def envelope_involution(self, ea):
        return ea

    def left_operator_norm(self, f):
        return float(np.max(np.abs(f.coeffs)))

    def multiplication_matrix(self, g, side):
        if side not in ("left", "right"):
            raise ValueError("side must be 'left' or 'right'")
        return np.diag(g.coeffs)

    def involution_matrix(self, shape):
        return np.eye(math.prod(shape))

    def random_element(self, rng, trunc, decay=0.05, growth=0.0):
        (d,) = self.element_shape(trunc)
        m = np.arange(d)
        coeffs = _disk(rng, d) * (1.0 + m) ** growth * np.exp(-decay * m)
        return GradedElement(coeffs, EnvelopeClass((growth,), decay, 1.0))

    def probe_basis(self, shape):
        return list(self.basis(shape))


class MatrixModel(AlgebraModel):
    """Square matrices with matrix product and conjugate transpose."""

    name = "matrix"
    axes = 2

    def _check(self, *elements):
        super()._check(*elements)
        if elements[0].trunc[0] != elements[0].trunc[1]:
            raise ValueError("matrix model needs square truncations")

    def _multiply(self, a, b):
        return a @ b

    def _involve(self, a):
        return a.conj().T

    def symbolic_product(self, a, b):
        try:
            return catalog.matrix_product(a, b)
        except catalog.DivergentSeries:
            return None

    def symbolic_involution(self, a):
        return catalog.adjoint(a)

    def envelope_product(self, ea, eb):
        return ea.matmul(eb)

    def envelope_involution(self, ea):
        return ea.adjoint()

    def left_operator_norm(self, f):
        return float(np.linalg.norm(f.coeffs, 2))

    def multiplication_matrix(self, g, side):
        # row-major vec: vec(g h) = (g kron I) vec(h), vec(h g) = (I kron g^T) vec(h)
        d = g.trunc[0]
        eye = np.eye(d)
        if side == "left":
            return np.kron(g.coeffs, eye)
        if side == "right":
            return np.kron(eye, g.coeffs.T)
        raise ValueError("side must be 'left' or 'right'")

    def involution_matrix(self, shape):
        d = shape[0]
        idx = np.arange(d * d).reshape(d, d)
        perm = np.zeros((d * d, d * d))
        perm[idx.ravel(), idx.T.ravel()] = 1.0
        return perm

    def random_element(self, rng, trunc, decay=0.05, growth=0.0):
        d1, d2 = self.element_shape(trunc)
        w = np.multiply.outer(np.arange(1.0, d1 + 1), np.arange(1.0, d2 + 1))
        e = np.exp(-decay * np.add.outer(np.arange(d1), np.arange(d2)))
        coeffs = _disk(rng, (d1, d2)) * w**growth * e
        return GradedElement(coeffs, EnvelopeClass((growth, growth), decay, 1.0))

    def probe_basis(self, shape):
        # p_k(f E_ij) / p_k(E_ij) does not depend on j, so column 0 suffices
        d = shape[0]
        probes = []
        for i in range(d):
            e = np.zeros(shape, dtype=complex)
            e[i, 0] = 1.0
            probes.append(GradedElement(e))
        return probes


class MutatedModel(AlgebraModel):
    """A model with a deliberately broken operation, for verifier tests.

    ``involution="transpose"`` drops the complex conjugation from the
    involution. ``product="drop-conjugation"`` replaces ``f # g`` with
    ``f # conj(g)`` in the graded models; the transported model
    overrides this to drop the adjoint in its synthesis step.
    """

    def __init__(self, base: AlgebraModel, involution=None, product=None):
        if involution not in (None, "transpose"):
            raise ValueError(f"unknown involution mutation {involution!r}")
        if product not in (None, "drop-conjugation"):
            raise ValueError(f"unknown product mutation {product!r}")
        self.base = base
        self.mutation = {k: v for k, v in (("involution", involution), ("product", product)) if v}
        self.name = base.name + "".join(f"[{k}={v}]" for k, v in sorted(self.mutation.items()))
        self.axes = base.axes

    def _multiply(self, a, b):
        if "product" in self.mutation:
            broken = getattr(self.base, "_multiply_dropped_conjugation", None)
            if broken is not None:
                return broken(a, b)
            return self.base._multiply(a, b.conj())
        return self.base._multiply(a, b)

    def _involve(self, a):
        if "involution" in self.mutation:
            broken = getattr(self.base, "_involve_transpose", None)
            if broken is not None:
                return broken(a)
            return a.T if a.ndim == 2 else a.copy()
        return self.base._involve(a)

    def metric(self, shape):
        return self.base.metric(shape)

    def dimension(self, shape):
        return self.base.dimension(shape)

    def chart(self, f):
        return self.base.chart(f)

    def left_operator_norm(self, f):
        return self.base.left_operator_norm(f)

    def random_element(self, rng, trunc, decay=0.05, growth=0.0):
        return self.base.random_element(rng, trunc, decay, growth)

    def probe_basis(self, shape):
        return self.base.probe_basis(shape)

    def element_shape(self, trunc):
        return self.base.element_shape(trunc)

    def to_json(self):
        return {"model": self.base.name, "mutate": dict(sorted(self.mutation.items()))}


def mutate(model: AlgebraModel, involution=None, product=None) -> MutatedModel:
    return MutatedModel(model, involution=involution, product=product)


# -- axiom verifier -------------------------------------------------------------


@dataclass(frozen=True)
class CorpusSpec:
    """Reproducible sampler of rapid-decay test elements."""

    seed: int = 0
    n_samples: int = 200
    trunc: int = 32
    decay: float = 0.05

    def draw(self, model: AlgebraModel) -> list[GradedElement]:
        if self.n_samples < 1:
            raise ValueError("corpus must contain at least one sample")
        rng = np.random.default_rng(self.seed)
        return [model.random_element(rng, self.trunc, self.decay) for _ in range(self.n_samples)]

    def to_json(self) -> dict:
        return {"seed": self.seed, "n_samples": self.n_samples, "trunc": self.trunc,
                "decay": self.decay, "distribution": "unit-disk * exp(-decay*|m|)"}


AXIOMS = ("involution-adjoint", "product-adjoint", "continuity", "totality")


@dataclass
class AxiomResult:
    axiom: str
    status: str
    residual: float
    witness_refs: tuple[int, ...] = ()
    constant: float | None = None

    @property
    def passed(self) -> bool:
        return self.status == "pass"


@dataclass
class AxiomReport:
    model: dict
    results: list[AxiomResult]
    corpus: CorpusSpec
    tol: float
    witnesses: dict = field(default_factory=dict, repr=False)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    def __getitem__(self, axiom: str) -> AxiomResult:
        for r in self.results:
            if r.axiom == axiom:
                return r
        raise KeyError(axiom)

    def to_json(self) -> dict:
        return {
            "model": self.model,
            "corpus": self.corpus.to_json(),
            "tol": self.tol,
            "axioms": [
                {
                    "axiom": r.axiom,
                    "status": r.status,
                    "residual": r.residual,
                    "witness_refs": list(r.witness_refs),
                    "seed": self.corpus.seed,
                    **({"constant": r.constant} if r.constant is not None else {}),
                }
                for r in self.results
            ],
        }


def _axiom1(model, f, g) -> float:
    lhs = model.inner(model.involution(g), model.involution(f))
    rhs = model.inner(f, g)
    return abs(lhs - rhs) / (1 + model.norm(f) * model.norm(g))


def _axiom2(model, f, g, h) -> float:
    lhs = model.inner(model.product(f, g), h)
    rhs = model.inner(g, model.product(model.involution(f), h))
    rhs2 = model.inner(f, model.product(h, model.involution(g)))
    scale = 1 + model.norm(f) * model.norm(g) * model.norm(h)
    return max(abs(lhs - rhs), abs(lhs - rhs2)) / scale


def _axiom3(model, f, g) -> tuple[float, float]:
    """(ratio ||f#g|| / ||g||, excess over the operator norm of L_f)."""
    ng = model.norm(g)
    ratio = model.norm(model.product(f, g)) / ng if ng > 0 else 0.0
    bound = model.left_operator_norm(f)
    return ratio, max(ratio - bound, 0.0) / (1 + bound)


def _totality_residual(model, products, h) -> float:
    nh = model.norm(h)
    worst = 0.0
    for p in products:
        npn = model.norm(p)
        if npn > 0:
            worst = max(worst, abs(model.inner(p, h)) / (npn * nh))
    return 1.0 - worst


def check_hilbert_axioms(model: AlgebraModel, corpus: CorpusSpec, tol: float) -> AxiomReport:
    """Check the four Hilbert-algebra axioms on a sampled corpus.

    1. ``<g#, f#> = <f, g>``
    2. ``<f#g, h> = <g, f# # h>`` and ``<f#g, h> = <f, h # g#>``
    3. ``||f#g|| <= C_f ||g||`` with ``C_f`` the operator norm of ``L_f``
    4. the products ``f#g`` span the whole truncated space (numerical rank
       with threshold ``1e-8 * sigma_max``)

    Residuals are normalized by ``1 +`` the product of operand norms. A
    failing axiom records the lowest failing sample index as its witness.
    """
    tol = check_tolerance(tol)
    samples = corpus.draw(model)
    n = len(samples)
    results, witnesses = [], {}

    def record(axiom, residuals, refs_of, constant=None):
        worst = max(residuals) if residuals else 0.0
        failing = [i for i, r in enumerate(residuals) if r > tol]
        if failing:
            i = failing[0]
            refs = refs_of(i)
            witnesses[axiom] = tuple(samples[j] for j in refs)
            results.append(AxiomResult(axiom, "fail", worst, refs, constant))
        else:
            results.append(AxiomResult(axiom, "pass", worst, (), constant))

    r1 = [_axiom1(model, samples[i], samples[(i + 1) % n]) for i in range(n)]
    record(AXIOMS[0], r1, lambda i: (i, (i + 1) % n))

    r2 = [_axiom2(model, samples[i], samples[(i + 1) % n], samples[(i + 2) % n]) for i in range(n)]
    record(AXIOMS[1], r2, lambda i: (i, (i + 1) % n, (i + 2) % n))

    r3, ratios = [], []
    for i in range(n):
        ratio, excess = _axiom3(model, samples[i], samples[(i + 1) % n])
        ratios.append(ratio)
        r3.append(excess)
    record(AXIOMS[2], r3, lambda i: (i, (i + 1) % n), constant=max(ratios))

    # totality: enough products to span the space, drawn over index shifts
    shape = samples[0].trunc
    dim = model.dimension(shape)
    products = []
    shift = 1
    while len(products) < 2 * dim and shift <= n:
        products.extend(model.product(samples[i], samples[(i + shift) % n]) for i in range(n))
        shift += 1
    sqrt_w = np.sqrt(model.metric(shape))
    stack = np.stack([p.coeffs.ravel() * sqrt_w for p in products])
    _, sigma, vh = np.linalg.svd(stack, full_matrices=True)
    rank = int(np.sum(sigma > 1e-8 * sigma[0])) if sigma.size and sigma[0] > 0 else 0
    if rank >= dim:
        results.append(AxiomResult(AXIOMS[3], "pass", 0.0, (), float(rank)))
    else:
        # a direction orthogonal to every sampled product
        null = vh[rank].conj() / sqrt_w
        h = GradedElement(null.reshape(shape))
        witnesses[AXIOMS[3]] = (h,)
        residual = _totality_residual(model, products, h)
        results.append(AxiomResult(AXIOMS[3], "fail", residual, (), float(rank)))
        witnesses["totality-products"] = tuple(products)
    return AxiomReport(model.to_json(), results, corpus, tol, witnesses)


def recheck_witness(model: AlgebraModel, report: AxiomReport, axiom: str) -> float:
    """Re-evaluate the residual of a failing axiom on its stored witness."""
    w = report.witnesses[axiom]
    if axiom == AXIOMS[0]:
        return _axiom1(model, *w)
    if axiom == AXIOMS[1]:
        return _axiom2(model, *w)
    if axiom == AXIOMS[2]:
        return _axiom3(model, *w)[1]
    if axiom == AXIOMS[3]:
        return _totality_residual(model, report.witnesses["totality-products"], w[0])
    raise KeyError(axiom)


# -- duality extensions --------------------------------------------------------


def _require_dual(model, f, what="f"):
    c = model.classify(f)
    if c.growth is GrowthClass.WILD:
        raise NotInDualError(f"{what} is classified Wild and does not define a functional on A")
    return c


def _require_rapid(model, g, what="g"):
    c = model.classify(g)
    if not c.growth.is_rapid:
        raise ValueError(f"{what} must be RapidDecay, got {c.growth.value}")
    return c


def _riesz(model, M: np.ndarray, f: GradedElement) -> np.ndarray:
    """Array F with inner(F, h) = inner(f, M h) for all h: F = W^-1 M^H W f."""
    w = model.metric(f.trunc)
    return ((M.conj().T @ (w * f.coeffs.ravel())) / w).reshape(f.trunc)


def extend_product_right(f: GradedElement, g: GradedElement, model: AlgebraModel) -> GradedElement:
    """Dual-times-algebra product, ``<f#g, h> := <f, h # g^#>``.

    ``f`` may be any non-wild element; ``g`` must decay rapidly.
    """
    model._check(f, g)
    _require_dual(model, f)
    _require_rapid(model, g)
    M = model.multiplication_matrix(model.involution(g), "right")
    return model._annotate(_riesz(model, M, f), f, g)


def extend_product_left(g: GradedElement, f: GradedElement, model: AlgebraModel) -> GradedElement:
    """Algebra-times-dual product, ``<g#f, h> := <f, g^# # h>``."""
    model._check(g, f)
    _require_rapid(model, g)
    _require_dual(model, f)
    M = model.multiplication_matrix(model.involution(g), "left")
    return model._annotate(_riesz(model, M, f), g, f)


def extend_involution(f: GradedElement, model: AlgebraModel) -> GradedElement:
    """Involution on the dual, ``<f^#, h> := conj(<f, h^#>)``."""
    model._check(f)
    _require_dual(model, f)
    K = model.involution_matrix(f.trunc)
    w = model.metric(f.trunc)
    coeffs = ((K.T @ (w * f.coeffs.ravel().conj())) / w).reshape(f.trunc)
    gen = env = None
    if f.generator is not None:
        gen = model.symbolic_involution(f.generator)
    if f.growth_envelope() is not None:
        env = model.envelope_involution(f.growth_envelope())
    return _assemble(coeffs, env, gen)


def _certify(f, model, side):
    from . import moyal

    check = moyal.is_right_moyal if side == "right" else moyal.is_left_moyal
    verdict = check(f, model)
    if verdict.verdict != "Member":
        raise MembershipError(
            f"no {side} Moyal certificate for f: verdict {verdict.verdict}"
            f" ({verdict.certificate.get('reason', 'no reason recorded')})"
        )
    return verdict


def moyal_extend(f: GradedElement, g: GradedElement, model: AlgebraModel) -> GradedElement:
    """Right-Moyal-times-dual product, ``<f#g, h> := <g, f^# # h>``.

    ``f`` needs a right Moyal certificate (``A # f`` inside A) and ``g``
    any non-wild element.
    """
    model._check(f, g)
    _certify(f, model, "right")
    _require_dual(model, g, "g")
    M = model.multiplication_matrix(model.involution(f), "left")
    return model._annotate(_riesz(model, M, g), f, g)


def moyal_extend_right(g: GradedElement, f: GradedElement, model: AlgebraModel) -> GradedElement:
    """Dual-times-left-Moyal product, ``<g#f, h> := <g, h # f^#>``."""
    model._check(g, f)
    _certify(f, model, "left")
    _require_dual(model, g, "g")
    M = model.multiplication_matrix(model.involution(f), "right")
    return model._annotate(_riesz(model, M, g), g, f)
