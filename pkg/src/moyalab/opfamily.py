"""Finite operator families, analysis/synthesis maps and transported algebras.

A family is a finite set of points ``s`` with weights ``mu_s > 0`` and
``d x d`` matrices ``pi_s``. The analysis map sends an operator to its symbol
``Phi(T)(s) = Tr[pi_s T]``; the synthesis map is
``Pi(f) = sum_s mu_s f(s) pi_s^*``. When the family is tight (a Parseval
operator frame), ``Pi o Phi`` is the identity and the matrix algebra can
be transported to symbols: ``f # g = Phi(Pi(f) Pi(g))``.

All symbol spaces carry the ``mu``-weighted scalar product.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from . import catalog
from ._validation import check_complex_array, check_operator_stack, check_tolerance, check_weights
from .algebra import AlgebraModel, MatrixModel, NotInDualError
from .graded import FormatError, GelfandTriple, GradedElement, WeightSystem
from .moyal import is_left_moyal, is_right_moyal, probe_basket

__all__ = [
    "OperatorFamily",
    "SymbolSpace",
    "TightnessReport",
    "OperatorFrame",
    "TransportedModel",
    "RepresentationReport",
    "build_weyl_heisenberg",
    "build_random_tight",
    "canonical_tightening",
    "verify_tightness",
    "phi",
    "pi",
    "star",
    "invol",
    "project",
    "parseval_check",
    "transported_model",
    "representation_check",
    "family_to_json",
    "family_from_json",
    "load_family",
    "save_family",
]

EIG_THRESHOLD = 1e-12


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Weighted finite family of square matrices.

    Parameters
    ----------
    matrices : array of shape (N, d, d)
    weights : array of shape (N,)
        Strictly positive point weights.
    label : str
        Provenance, e.g. ``"weyl-heisenberg:4"``.
    """

    matrices: np.ndarray
    weights: np.ndarray
    label: str = ""

    def __post_init__(self):
        mats = check_operator_stack(self.matrices, name="matrices").copy()
        w = check_weights(self.weights, mats.shape[0]).copy()
        mats.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "weights", w)

    @property
    def d(self) -> int:
        return self.matrices.shape[1]

    @property
    def n_points(self) -> int:
        return self.matrices.shape[0]

    @cached_property
    def space(self) -> "SymbolSpace":
        return SymbolSpace.from_family(self)

    def __repr__(self):
        return f"OperatorFamily(N={self.n_points}, d={self.d}, label={self.label!r})"


@dataclass(frozen=True, eq=False)
class SymbolSpace:
    """Analysis matrix, frame operator and the projector onto admissible symbols.

    ``analysis`` has rows ``vec(pi_s^T)`` (row-major), so that
    ``Phi(T) = analysis @ vec(T)`` and ``vec(Pi(f)) = analysis^H (mu * f)``.
    """

    analysis: np.ndarray
    weights: np.ndarray
    d: int

    @classmethod
    def from_family(cls, fam: OperatorFamily) -> "SymbolSpace":
        A = np.transpose(fam.matrices, (0, 2, 1)).reshape(fam.n_points, -1)
        return cls(A, fam.weights, fam.d)

    @cached_property
    def frame_operator(self) -> np.ndarray:
        A = self.analysis
        return A.conj().T @ (self.weights[:, None] * A)

    @cached_property
    def projector(self) -> np.ndarray:
        """``Phi o Pi`` on symbols; idempotent and mu-self-adjoint when tight."""
        A = self.analysis
        return A @ (A.conj().T * self.weights[None, :])

    @cached_property
    def rank(self) -> int:
        s = np.linalg.svd(self.analysis * np.sqrt(self.weights)[:, None], compute_uv=False)
        return int(np.sum(s > 1e-10 * s[0])) if s.size and s[0] > 0 else 0

    def frame_residual(self) -> float:
        """``||S - I||_F`` for the frame operator ``S``."""
        S = self.frame_operator
        return float(np.linalg.norm(S - np.eye(S.shape[0])))

    def phi(self, T: np.ndarray) -> np.ndarray:
        return self.analysis @ T.reshape(-1)

    def pi(self, f: np.ndarray) -> np.ndarray:
        return (self.analysis.conj().T @ (self.weights * f)).reshape(self.d, self.d)

    def inner(self, f: np.ndarray, g: np.ndarray) -> complex:
        return complex(np.sum(self.weights * f * g.conj()))

    def norm(self, f: np.ndarray) -> float:
        return math.sqrt(max(self.inner(f, f).real, 0.0))


def _fam(fam):
    if not isinstance(fam, OperatorFamily):
        raise TypeError(f"expected an OperatorFamily, got {type(fam).__name__}")
    return fam.space


def phi(T, fam: OperatorFamily) -> np.ndarray:
    """Symbol ``s -> Tr[pi_s T]`` of a ``d x d`` matrix."""
    sp = _fam(fam)
    T = check_complex_array(T, ndim=2, name="T")
    if T.shape != (sp.d, sp.d):
        raise ValueError(f"T: expected shape {(sp.d, sp.d)}, got {T.shape}")
    return sp.phi(T)


def _symbol(f, sp: SymbolSpace, name="f") -> np.ndarray:
    f = check_complex_array(f, ndim=1, name=name)
    if f.shape[0] != sp.weights.shape[0]:
        raise ValueError(f"{name}: expected length {sp.weights.shape[0]}, got {f.shape[0]}")
    return f


def pi(f, fam: OperatorFamily) -> np.ndarray:
    """Synthesis ``sum_s mu_s f(s) pi_s^*``."""
    sp = _fam(fam)
    return sp.pi(_symbol(f, sp))


def star(f, g, fam: OperatorFamily) -> np.ndarray:
    """Transported product ``Phi(Pi(f) Pi(g))``."""
    sp = _fam(fam)
    return sp.phi(sp.pi(_symbol(f, sp)) @ sp.pi(_symbol(g, sp, "g")))


def invol(f, fam: OperatorFamily) -> np.ndarray:
    """Transported involution ``Phi(Pi(f)^*)``."""
    sp = _fam(fam)
    return sp.phi(sp.pi(_symbol(f, sp)).conj().T)


def project(f, fam: OperatorFamily) -> tuple[np.ndarray, float]:
    """Projection onto the admissible symbols and the norm of what was discarded."""
    sp = _fam(fam)
    f = _symbol(f, sp)
    p = sp.projector @ f
    return p, sp.norm(f - p)


@dataclass(frozen=True)
class ParsevalResult:
    residual: float
    projection_loss: float


def parseval_check(f, g, fam: OperatorFamily) -> ParsevalResult:
    """Compare ``Tr[Pi(f) Pi(g)^*]`` with the weighted symbol product.

    Both symbols are projected first; the discarded norms are reported as
    ``projection_loss``. The residual is normalized by ``1 + |f| |g|``.
    """
    sp = _fam(fam)
    pf, lf = project(f, fam)
    pg, lg = project(g, fam)
    lhs = complex(np.trace(sp.pi(pf) @ sp.pi(pg).conj().T))
    rhs = sp.inner(pf, pg)
    return ParsevalResult(abs(lhs - rhs) / (1 + sp.norm(pf) * sp.norm(pg)), max(lf, lg))


# -- construction -----------------------------------------------------------------


def build_weyl_heisenberg(n: int) -> OperatorFamily:
    """Clock-and-shift family ``X^a Z^b`` on ``C^n`` with weights ``1/n``.

    ``(X u)_k = u_{k-1 mod n}`` and ``(Z u)_k = exp(2 pi i k / n) u_k``.
    Points are ordered with ``b`` outer and ``a`` inner, so for ``n = 2`` the
    family reads ``I, X, Z, XZ``.
    """
    if int(n) != n or n < 2:
        raise ValueError(f"n must be an integer >= 2, got {n}")
    n = int(n)
    X = np.roll(np.eye(n), 1, axis=0).astype(complex)
    Z = np.diag(np.exp(2j * np.pi * np.arange(n) / n))
    Xp = [np.linalg.matrix_power(X, a) for a in range(n)]
    Zp = [np.linalg.matrix_power(Z, b) for b in range(n)]
    mats = np.stack([Xp[a] @ Zp[b] for b in range(n) for a in range(n)])
    return OperatorFamily(mats, np.full(n * n, 1.0 / n), f"weyl-heisenberg:{n}")


def canonical_tightening(fam: OperatorFamily) -> OperatorFamily:
    """Replace each analysis row ``a_s`` by ``a_s S^{-1/2}``.

    Raises
    ------
    np.linalg.LinAlgError
        If the frame operator has an eigenvalue below ``1e-12``.
    """
    sp = fam.space
    evals, evecs = np.linalg.eigh(sp.frame_operator)
    if evals[0] <= EIG_THRESHOLD * max(1.0, evals[-1]):
        raise np.linalg.LinAlgError("frame operator is singular; the family spans too little")
    inv_sqrt = (evecs / np.sqrt(evals)) @ evecs.conj().T
    rows = sp.analysis @ inv_sqrt
    mats = np.transpose(rows.reshape(fam.n_points, fam.d, fam.d), (0, 2, 1))
    label = f"{fam.label}+tight" if fam.label else "tight"
    return OperatorFamily(mats, fam.weights, label)


def build_random_tight(N: int, d: int, seed: int) -> OperatorFamily:
    """Canonically tightened family of ``N`` complex Gaussian matrices, weights ``1/N``.

    A singular draw is retried with seeds derived from ``seed``, at most
    three times.
    """
    if d < 1:
        raise ValueError("d must be >= 1")
    if N < d * d:
        raise ValueError(f"need N >= d^2 = {d * d} points for a tight family, got {N}")
    attempts = [np.random.SeedSequence(seed)] + np.random.SeedSequence(seed).spawn(3)
    for ss in attempts:
        rng = np.random.default_rng(ss)
        mats = rng.standard_normal((N, d, d)) + 1j * rng.standard_normal((N, d, d))
        raw = OperatorFamily(mats, np.full(N, 1.0 / N), f"random:{N},{d},{seed}")
        try:
            return canonical_tightening(raw)
        except np.linalg.LinAlgError:
            continue
    raise np.linalg.LinAlgError("frame operator singular after 3 retries")


# -- tightness ----------------------------------------------------------------------


@dataclass(frozen=True)
class TightnessReport:
    passed: bool
    frobenius_residual: float
    sampled_residual: float
    n_points: int
    d: int
    rank: int
    notes: tuple[str, ...] = ()

    def to_json(self) -> dict:
        return {
            "passed": self.passed,
            "frobenius_residual": self.frobenius_residual,
            "sampled_residual": self.sampled_residual,
            "n_points": self.n_points,
            "d": self.d,
            "rank": self.rank,
            "notes": list(self.notes),
        }


def _unit(rng, d):
    v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    return v / np.linalg.norm(v)


def verify_tightness(fam: OperatorFamily, tol: float = 1e-10, n_pairs: int = 32,
                     seed: int = 0) -> TightnessReport:
    """Check the Parseval condition two ways.

    (a) ``sum_s mu_s |<pi_s u, v>|^2 = 1`` on ``n_pairs`` random unit pairs;
    (b) ``||S - I||_F <= tol`` for the frame operator ``S``.
    Both residuals must be within ``tol`` for the report to pass.
    """
    tol = check_tolerance(tol)
    sp = fam.space
    rng = np.random.default_rng(seed)
    sampled = 0.0
    for _ in range(n_pairs):
        u, v = _unit(rng, fam.d), _unit(rng, fam.d)
        vals = np.einsum("sij,j,i->s", fam.matrices, u, v.conj())
        sampled = max(sampled, abs(float(np.sum(fam.weights * np.abs(vals) ** 2)) - 1.0))
    frob = sp.frame_residual()
    notes = []
    if fam.n_points < fam.d**2:
        notes.append(f"N = {fam.n_points} < d^2 = {fam.d**2}: the family cannot be tight")
    passed = frob <= tol and sampled <= tol
    return TightnessReport(passed, frob, sampled, fam.n_points, fam.d, sp.rank, tuple(notes))


# -- estimator ----------------------------------------------------------------------


class OperatorFrame(TransformerMixin, BaseEstimator):
    """Analysis/synthesis maps of an operator family as a transformer.

    ``fit`` takes the family matrices ``X`` of shape ``(N, d, d)``;
    ``transform`` maps operators of shape ``(n, d, d)`` to symbols of shape
    ``(n, N)`` and ``inverse_transform`` synthesizes them back.

    Parameters
    ----------
    weights : array of shape (N,), optional
        Point weights; uniform ``1/N`` by default.
    tighten : bool
        Replace the family by its canonical tightening before use.
    tol : float
        Tightness tolerance recorded in ``tightness_``.
    """

    def __init__(self, weights=None, tighten=False, tol=1e-10):
        self.weights = weights
        self.tighten = tighten
        self.tol = tol

    def fit(self, X, y=None):
        X = check_operator_stack(X)
        n = X.shape[0]
        w = np.full(n, 1.0 / n) if self.weights is None else self.weights
        fam = OperatorFamily(X, w)
        if self.tighten:
            fam = canonical_tightening(fam)
        self.family_ = fam
        self.space_ = fam.space
        self.tightness_ = verify_tightness(fam, self.tol)
        self.n_features_in_ = fam.d * fam.d
        return self

    def transform(self, X):
        check_is_fitted(self)
        X = check_operator_stack(X)
        if X.shape[1] != self.space_.d:
            raise ValueError(f"X: expected {self.space_.d}x{self.space_.d} operators")
        return X.reshape(X.shape[0], -1) @ self.space_.analysis.T

    def inverse_transform(self, F):
        check_is_fitted(self)
        F = check_complex_array(F, ndim=2, name="F")
        sp = self.space_
        if F.shape[1] != sp.weights.shape[0]:
            raise ValueError(f"F: expected {sp.weights.shape[0]} symbol entries")
        vecs = (F * sp.weights[None, :]) @ sp.analysis.conj()
        return vecs.reshape(F.shape[0], sp.d, sp.d)


# -- transported algebra -------------------------------------------------------------


class TransportedModel(AlgebraModel):
    """Matrix algebra carried over to symbols of a tight family.

    Seminorms and growth classes are read through the synthesis map in the
    matrix grading, and multiplier questions are answered there.
    """

    name = "transported"
    axes = 1
    graded_model = MatrixModel()

    def __init__(self, fam: OperatorFamily):
        self.family = fam
        self.space = fam.space

    def _multiply(self, a, b):
        sp = self.space
        return sp.phi(sp.pi(a) @ sp.pi(b))

    def _involve(self, a):
        sp = self.space
        return sp.phi(sp.pi(a).conj().T)

    def _multiply_dropped_conjugation(self, a, b):
        # synthesis with pi_s in place of pi_s^*
        sp = self.space
        A = sp.analysis

        def synth(f):
            return (A.T @ (sp.weights * f)).reshape(sp.d, sp.d)

        return sp.phi(synth(a) @ synth(b))

    def _involve_transpose(self, a):
        sp = self.space
        return sp.phi(sp.pi(a).T)

    def metric(self, shape):
        return np.asarray(self.space.weights)

    def dimension(self, shape):
        return self.space.rank

    def element_shape(self, trunc):
        return (self.family.n_points,)

    def chart(self, f):
        return GradedElement(self.space.pi(f.coeffs))

    def left_operator_norm(self, f):
        return float(np.linalg.norm(self.space.pi(f.coeffs), 2))

    def lift(self, T: GradedElement) -> GradedElement:
        """Symbol of a matrix element."""
        return GradedElement(self.space.phi(T.coeffs))

    def random_element(self, rng, trunc, decay=0.05, growth=0.0):
        T = self.graded_model.random_element(rng, self.family.d, decay, growth)
        return self.lift(T)

    def probe_basis(self, shape):
        return [self.lift(p) for p in self.graded_model.probe_basis((self.family.d,) * 2)]

    def to_json(self):
        return {"model": self.name, "family": self.family.label}


def transported_model(fam: OperatorFamily, weights: WeightSystem | None = None,
                      tol: float = 1e-10) -> tuple[TransportedModel, GelfandTriple]:
    """Transported algebra of a tight family and its triple in the matrix grading.

    Raises
    ------
    ValueError
        If the family fails :func:`verify_tightness` at ``tol``.
    """
    weights = WeightSystem(2) if weights is None else weights
    if weights.axes != 2:
        raise ValueError("symbol seminorms are read in the two-axis matrix grading")
    report = verify_tightness(fam, tol)
    if not report.passed:
        raise ValueError(
            f"family is not tight: frame residual {report.frobenius_residual:.3g} > {tol:g}"
        )
    model = TransportedModel(fam)
    return model, GelfandTriple(weights, chart=model.chart)


# -- representation in the triple ----------------------------------------------------


def default_operators() -> list:
    """Tempered test operators: identity, ``diag((1+m)^3)`` and ``e_0 (x) 1``."""
    return [
        catalog.diagonal(catalog.constant(1.0)),
        catalog.diagonal(catalog.power_law(3.0)),
        catalog.rank_one(catalog.kronecker(0), catalog.constant(1.0)),
    ]


@dataclass
class RepresentationReport:
    levels: tuple[int, ...]
    counts: dict
    failures: list
    residuals: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {
            "levels": list(self.levels),
            "counts": self.counts,
            "failures": self.failures,
            "residuals": self.residuals,
            "passed": self.passed,
        }


def representation_check(levels=(4, 8, 16), operators=None, probes=None,
                         ) -> RepresentationReport:
    """Check that ``a # F # a'`` decays and ``a # F``, ``F # a'`` are multipliers.

    ``a`` and ``a'`` run over the matrix probe basket (closed-form rapidly
    decaying matrices) and ``F`` over tempered closed-form operators. At
    every level ``n`` the product is also computed in the algebra
    transported by the clock-and-shift family of size ``n``, and its
    pullback is compared with the truncated matrix product
    (``transport_residual``) and with the exact infinite product
    (``truncation_gap``, which should shrink along the ladder).

    Raises
    ------
    ValueError
        If fewer than three levels are given.
    NotInDualError
        If some ``F`` is classified Wild.
    """
    levels = tuple(int(n) for n in levels)
    if len(levels) < 3:
        raise ValueError("representation_check needs at least 3 ladder levels")
    if sorted(set(levels)) != list(levels):
        raise ValueError("levels must be strictly increasing")
    mm = MatrixModel()
    operators = default_operators() if operators is None else list(operators)
    basket = probe_basket(mm) if probes is None else list(probes)
    for F in operators:
        if F.envelope().growth_class().value == "Wild":
            raise NotInDualError(f"operator {F!r} is classified Wild")

    counts = {"pairs": 0, "rapid": 0, "left_member": 0, "right_member": 0}
    failures, residuals = [], []
    # symbolic verdicts do not depend on the level; compute once
    triples = []
    for fi, F in enumerate(operators):
        for ai, a in enumerate(basket):
            aF = catalog.matrix_product(a, F)[0]
            for bi, b in enumerate(basket):
                Fb = catalog.matrix_product(F, b)[0]
                aFb = catalog.matrix_product(aF, b)[0]
                triples.append((fi, ai, bi, F, a, b, aF, Fb, aFb))

    top = levels[-1]
    for fi, ai, bi, F, a, b, aF, Fb, aFb in triples:
        counts["pairs"] += 1
        tag = {"F": fi, "a": ai, "a_prime": bi}
        cls = aFb.envelope().growth_class()
        if cls.is_rapid:
            counts["rapid"] += 1
        else:
            failures.append({**tag, "check": "a#F#a'", "class": cls.value})
        left = is_left_moyal(GradedElement.from_generator(aF, top), mm)
        right = is_right_moyal(GradedElement.from_generator(Fb, top), mm)
        if left.is_member:
            counts["left_member"] += 1
        else:
            failures.append({**tag, "check": "a#F", "verdict": left.verdict})
        if right.is_member:
            counts["right_member"] += 1
        else:
            failures.append({**tag, "check": "F#a'", "verdict": right.verdict})

    for n in levels:
        fam = build_weyl_heisenberg(n)
        model = TransportedModel(fam)
        worst_transport = worst_gap = 0.0
        for fi, ai, bi, F, a, b, aF, Fb, aFb in triples:
            A, Fm, B = (GradedElement.from_generator(x, n) for x in (a, F, b))
            sym = model.product(model.product(model.lift(A), model.lift(Fm)), model.lift(B))
            pulled = model.chart(sym).coeffs
            direct = A.coeffs @ Fm.coeffs @ B.coeffs
            exact = aFb.evaluate((n, n))
            scale = 1.0 + np.linalg.norm(direct)
            worst_transport = max(worst_transport, float(np.linalg.norm(pulled - direct)) / scale)
            worst_gap = max(worst_gap, float(np.linalg.norm(direct - exact)) / scale)
        residuals.append(
            {"n": n, "transport_residual": worst_transport, "truncation_gap": worst_gap}
        )
        if worst_transport > 1e-9:
            failures.append({"n": n, "check": "transport", "residual": worst_transport})
    return RepresentationReport(levels, counts, failures, residuals)


# -- JSON ---------------------------------------------------------------------------


def family_to_json(fam: OperatorFamily) -> dict:
    return {
        "d": fam.d,
        "label": fam.label,
        "points": [
            {
                "weight": float(w),
                "matrix": [[[float(z.real), float(z.imag)] for z in row] for row in M],
            }
            for w, M in zip(fam.weights, fam.matrices)
        ],
    }


def family_from_json(data: dict) -> OperatorFamily:
    """Parse a family, raising :class:`FormatError` that names the bad field."""
    if not isinstance(data, dict):
        raise FormatError("family: expected a JSON object")
    if "d" not in data:
        raise FormatError("d: missing field")
    d = data["d"]
    if not isinstance(d, int) or d < 1:
        raise FormatError(f"d: expected a positive integer, got {d!r}")
    points = data.get("points")
    if not isinstance(points, list) or not points:
        raise FormatError("points: expected a nonempty list")
    mats, weights = [], []
    for i, p in enumerate(points):
        if not isinstance(p, dict):
            raise FormatError(f"points[{i}]: expected an object")
        w = p.get("weight")
        if not isinstance(w, (int, float)) or isinstance(w, bool) or not w > 0:
            raise FormatError(f"points[{i}].weight: expected a positive number, got {w!r}")
        try:
            arr = np.asarray(p["matrix"], dtype=float)
        except KeyError:
            raise FormatError(f"points[{i}].matrix: missing field") from None
        except (TypeError, ValueError):
            raise FormatError(f"points[{i}].matrix: expected [[ [re, im], ... ]]") from None
        if arr.shape != (d, d, 2):
            raise FormatError(
                f"points[{i}].matrix: expected shape ({d}, {d}) of [re, im] pairs"
            )
        mats.append(arr[..., 0] + 1j * arr[..., 1])
        weights.append(float(w))
    label = data.get("label", "")
    if not isinstance(label, str):
        raise FormatError("label: expected a string")
    return OperatorFamily(np.stack(mats), np.array(weights), label)


def load_family(path) -> OperatorFamily:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"family file is not valid JSON: {exc}") from None
    return family_from_json(data)


def save_family(fam: OperatorFamily, path) -> None:
    Path(path).write_text(json.dumps(family_to_json(fam), indent=2, sort_keys=True) + "\n")
