import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from sklearn.base import clone

from moyalab import catalog
from moyalab.algebra import CorpusSpec, NotInDualError, check_hilbert_axioms, mutate
from moyalab.graded import FormatError, GradedElement, WeightSystem
from moyalab.opfamily import (
    OperatorFamily,
    OperatorFrame,
    build_random_tight,
    build_weyl_heisenberg,
    canonical_tightening,
    family_from_json,
    family_to_json,
    invol,
    load_family,
    parseval_check,
    phi,
    pi,
    project,
    representation_check,
    save_family,
    star,
    transported_model,
    verify_tightness,
)

I2 = np.eye(2, dtype=complex)
X2 = np.array([[0, 1], [1, 0]], dtype=complex)
Z2 = np.diag([1, -1]).astype(complex)
PAULI = [I2, X2, Z2, X2 @ Z2]


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def analysis_by_loops(fam):
    """Rows T -> Tr[pi_s T] evaluated on the matrix units E_ij, by explicit traces."""
    d = fam.d
    rows = []
    for M in fam.matrices:
        row = []
        for i in range(d):
            for j in range(d):
                E = np.zeros((d, d))
                E[i, j] = 1
                row.append(np.trace(M @ E))
        rows.append(row)
    return np.array(rows)


# -- Weyl-Heisenberg family ------------------------------------------------------


def test_wh2_is_pauli_family():
    fam = build_weyl_heisenberg(2)
    for got, want in zip(fam.matrices, PAULI):
        np.testing.assert_allclose(got, want, atol=1e-15)
    np.testing.assert_array_equal(fam.weights, [0.5] * 4)


def test_wh_shift_and_clock_conventions():
    n = 5
    fam = build_weyl_heisenberg(n)
    X, Z = fam.matrices[1], fam.matrices[n]  # (a, b) = (1, 0) and (0, 1)
    u = np.arange(1, n + 1, dtype=complex)
    np.testing.assert_allclose(X @ u, np.roll(u, 1))
    np.testing.assert_allclose(Z @ u, np.exp(2j * np.pi * np.arange(n) / n) * u)


def test_wh_rejects_small_n():
    with pytest.raises(ValueError):
        build_weyl_heisenberg(1)


@pytest.mark.parametrize("n", [2, 3, 5])
def test_wh_gram_by_brute_force(n):
    fam = build_weyl_heisenberg(n)
    G = np.array([[np.trace(A.conj().T @ B) for B in fam.matrices] for A in fam.matrices])
    np.testing.assert_allclose(G, n * np.eye(n * n), atol=1e-12)
    assert verify_tightness(fam, 1e-10).frobenius_residual <= 1e-10


def test_wh2_single_pair_sum():
    fam = build_weyl_heisenberg(2)
    u = v = np.array([1, 0], dtype=complex)
    total = sum(w * abs(v.conj() @ (M @ u)) ** 2 for w, M in zip(fam.weights, fam.matrices))
    assert total == pytest.approx(1.0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_matrix_unit_symbols_orthonormal(n):
    fam = build_weyl_heisenberg(n)
    syms = []
    for i in range(n):
        for j in range(n):
            E = np.zeros((n, n))
            E[i, j] = 1
            syms.append(phi(E, fam))
    S = np.array(syms)
    gram = (S * fam.weights) @ S.conj().T
    np.testing.assert_allclose(gram, np.eye(n * n), atol=1e-12)


# -- tightness -----------------------------------------------------------------------


def test_pauli_tightness_report():
    rep = verify_tightness(build_weyl_heisenberg(2), 1e-12)
    assert rep.passed and rep.frobenius_residual <= 1e-12 and rep.sampled_residual <= 1e-12


def test_single_identity_not_tight():
    fam = OperatorFamily(I2[None], [1.0])
    rep = verify_tightness(fam, 1e-10)
    assert not rep.passed
    assert any("N = 1 < d^2 = 4" in n for n in rep.notes)


def test_random_family_tight_after_tightening():
    rng = np.random.default_rng(0)
    raw = OperatorFamily(crandn(rng, 20, 3, 3), np.full(20, 1 / 20))
    assert not verify_tightness(raw, 1e-10).passed
    assert verify_tightness(canonical_tightening(raw), 1e-10).passed


def test_frame_operator_against_loop_analysis():
    fam = build_random_tight(12, 3, seed=5)
    A = analysis_by_loops(fam)
    S = A.conj().T @ (fam.weights[:, None] * A)
    np.testing.assert_allclose(S, np.eye(9), atol=1e-12)
    np.testing.assert_allclose(fam.space.analysis, A, atol=1e-15)


def test_random_tight_rejects_too_few_points():
    with pytest.raises(ValueError):
        build_random_tight(8, 3, seed=0)


def test_random_tight_deterministic():
    a = build_random_tight(18, 3, seed=42)
    b = build_random_tight(18, 3, seed=42)
    assert np.array_equal(a.matrices, b.matrices)
    assert not np.array_equal(a.matrices, build_random_tight(18, 3, seed=43).matrices)


def test_square_family_projector_is_identity():
    fam = build_random_tight(9, 3, seed=1)
    np.testing.assert_allclose(fam.space.projector, np.eye(9), atol=1e-10)


def test_oversampled_family_projector_rank():
    fam = build_random_tight(18, 3, seed=1)
    P = fam.space.projector
    assert fam.space.rank == 9
    assert np.linalg.matrix_rank(np.eye(18) - P, tol=1e-8) == 9


def test_projector_idempotent_and_weighted_self_adjoint():
    fam = build_random_tight(18, 3, seed=2)
    P, W = fam.space.projector, np.diag(fam.weights)
    np.testing.assert_allclose(P @ P, P, atol=1e-10)
    np.testing.assert_allclose(W @ P, (W @ P).conj().T, atol=1e-10)


# -- analysis and synthesis ---------------------------------------------------------


def test_phi_of_corner_projection_pauli():
    fam = build_weyl_heisenberg(2)
    E00 = np.outer([1, 0], [1, 0]).astype(complex)
    np.testing.assert_allclose(phi(E00, fam), [1, 0, 1, 0], atol=1e-15)
    hand = [np.vdot([1, 0], M @ np.array([1, 0])) for M in PAULI]
    np.testing.assert_allclose(phi(E00, fam), hand, atol=1e-15)


def test_phi_pi_of_zero():
    fam = build_weyl_heisenberg(3)
    assert not np.any(phi(np.zeros((3, 3)), fam))
    assert not np.any(pi(np.zeros(9), fam))


def test_pi_reconstructs_corner_projection():
    fam = build_weyl_heisenberg(2)
    E00 = np.outer([1, 0], [1, 0]).astype(complex)
    f = phi(E00, fam)
    hand = sum(w * fs * M.conj().T for w, fs, M in zip(fam.weights, f, PAULI))
    np.testing.assert_allclose(pi(f, fam), E00, atol=1e-15)
    np.testing.assert_allclose(hand, E00, atol=1e-15)


def test_phi_isometry_wh3(rng):
    fam = build_weyl_heisenberg(3)
    for _ in range(10):
        T = crandn(rng, 3, 3)
        f = phi(T, fam)
        assert np.sqrt(np.sum(fam.weights * abs(f) ** 2)) == pytest.approx(
            np.linalg.norm(T), rel=1e-10)


def test_pi_vanishes_on_complement():
    fam = build_random_tight(20, 3, seed=3)
    A = analysis_by_loops(fam)
    # f with A^H W f = 0 is orthogonal to every symbol in the weighted product
    _, _, vh = np.linalg.svd(A.conj().T)
    null = vh[9:].conj().T  # columns span ker(A^H)
    rng = np.random.default_rng(0)
    for _ in range(5):
        f = (null @ crandn(rng, 11)) / fam.weights
        assert np.linalg.norm(pi(f, fam)) <= 1e-10 * np.linalg.norm(f)
        _, loss = project(f, fam)
        assert loss == pytest.approx(np.sqrt(np.sum(fam.weights * abs(f) ** 2)), rel=1e-10)


@given(st.integers(0, 2**32 - 1), st.sampled_from([("wh", 3), ("wh", 4), ("random", 3)]))
def test_reconstruction_and_projection(seed, kind):
    rng = np.random.default_rng(seed)
    fam = build_weyl_heisenberg(kind[1]) if kind[0] == "wh" else build_random_tight(18, 3, 7)
    d = fam.d
    T = crandn(rng, d, d)
    assert np.linalg.norm(pi(phi(T, fam), fam) - T) <= 1e-10 * np.linalg.norm(T)
    f = crandn(rng, fam.n_points)
    np.testing.assert_allclose(phi(pi(f, fam), fam), fam.space.projector @ f, atol=1e-10)


@given(st.integers(0, 2**32 - 1))
def test_hilbert_schmidt_isometry_on_symbols(seed):
    rng = np.random.default_rng(seed)
    fam = build_random_tight(18, 3, 11)
    f, _ = project(crandn(rng, 18), fam)
    assert np.linalg.norm(pi(f, fam)) == pytest.approx(fam.space.norm(f), rel=1e-10)


def test_shape_errors():
    fam = build_weyl_heisenberg(2)
    with pytest.raises(ValueError):
        phi(np.eye(3), fam)
    with pytest.raises(ValueError):
        pi(np.ones(5), fam)
    with pytest.raises(ValueError):
        star(np.ones(4), np.ones(3), fam)


# -- transported product ---------------------------------------------------------------


def test_star_of_idempotent_symbol():
    fam = build_weyl_heisenberg(2)
    e = phi(np.outer([1, 0], [1, 0]).astype(complex), fam)
    np.testing.assert_allclose(star(e, e, fam), e, atol=1e-15)


def test_star_pauli_product():
    fam = build_weyl_heisenberg(2)
    np.testing.assert_allclose(star(phi(X2, fam), phi(Z2, fam), fam), phi(X2 @ Z2, fam),
                               atol=1e-15)


def test_invol_pauli():
    fam = build_weyl_heisenberg(2)
    np.testing.assert_allclose(invol(phi(1j * X2, fam), fam), phi(-1j * X2, fam), atol=1e-15)


@given(st.integers(0, 2**32 - 1))
def test_star_intertwines_and_is_associative(seed):
    rng = np.random.default_rng(seed)
    fam = build_random_tight(18, 3, 3)
    A, B, C = (crandn(rng, 3, 3) for _ in range(3))
    fa, fb, fc = phi(A, fam), phi(B, fam), phi(C, fam)
    np.testing.assert_allclose(star(fa, fb, fam), phi(A @ B, fam), atol=1e-10)
    lhs, rhs = star(star(fa, fb, fam), fc, fam), star(fa, star(fb, fc, fam), fam)
    assert np.linalg.norm(lhs - rhs) <= 1e-9 * np.linalg.norm(lhs)
    anti = invol(star(fa, fb, fam), fam) - star(invol(fb, fam), invol(fa, fam), fam)
    assert np.linalg.norm(anti) <= 1e-9 * np.linalg.norm(lhs)


def test_invol_twice_is_identity(rng):
    fam = build_weyl_heisenberg(3)
    for _ in range(50):
        f = phi(crandn(rng, 3, 3), fam)
        np.testing.assert_allclose(invol(invol(f, fam), fam), f, atol=1e-12)


# -- Parseval ---------------------------------------------------------------------------


def test_parseval_corner_projection():
    fam = build_weyl_heisenberg(2)
    e = phi(np.outer([1, 0], [1, 0]).astype(complex), fam)
    res = parseval_check(e, e, fam)
    assert res.residual <= 1e-12 and res.projection_loss <= 1e-12


def test_parseval_orthogonal_pair():
    fam = build_weyl_heisenberg(2)
    f = phi(np.outer([1, 0], [1, 0]).astype(complex), fam)
    g = phi(np.outer([0, 1], [0, 1]).astype(complex), fam)
    assert abs(fam.space.inner(f, g)) < 1e-15
    assert parseval_check(f, g, fam).residual <= 1e-15


def test_parseval_reports_projection_loss(rng):
    fam = build_random_tight(18, 3, seed=4)
    f = crandn(rng, 18)
    res = parseval_check(f, f, fam)
    assert res.residual <= 1e-10 and res.projection_loss > 0.1


@given(st.integers(0, 2**32 - 1))
def test_tightness_implies_parseval(seed):
    rng = np.random.default_rng(seed)
    fam = build_weyl_heisenberg(5)
    tol = 1e-10
    assert verify_tightness(fam, tol).passed
    for _ in range(5):
        assert parseval_check(crandn(rng, 25), crandn(rng, 25), fam).residual <= 10 * tol


# -- transported model -------------------------------------------------------------------


def test_transported_wh2_axioms():
    model, triple = transported_model(build_weyl_heisenberg(2))
    report = check_hilbert_axioms(model, CorpusSpec(seed=0, n_samples=60), 1e-10)
    assert report.passed, report.to_json()
    assert triple.weights == WeightSystem(2)


def test_transported_rejects_loose_family():
    rng = np.random.default_rng(0)
    loose = OperatorFamily(crandn(rng, 20, 3, 3), np.full(20, 0.05))
    with pytest.raises(ValueError, match="not tight"):
        transported_model(loose)


def test_transported_seminorms_pull_back(rng):
    model, triple = transported_model(build_weyl_heisenberg(3))
    T = crandn(rng, 3, 3)
    f = model.lift(GradedElement(T))
    m, n = np.meshgrid(np.arange(1, 4), np.arange(1, 4), indexing="ij")
    assert triple.seminorms(f)[2] == pytest.approx(np.max(abs(T) * (m * n) ** 2), rel=1e-12)


@pytest.mark.parametrize("mutation", [{"involution": "transpose"},
                                      {"product": "drop-conjugation"}])
def test_transported_mutations_detected(mutation):
    model, _ = transported_model(build_weyl_heisenberg(4))
    report = check_hilbert_axioms(mutate(model, **mutation), CorpusSpec(n_samples=30), 1e-10)
    assert not report.passed


# -- representation check ---------------------------------------------------------------------


def test_representation_identity_operator():
    rep = representation_check((2, 3, 4), operators=[catalog.diagonal(catalog.constant(1.0))])
    assert rep.passed
    assert rep.counts["rapid"] == rep.counts["pairs"]


def test_representation_needs_three_levels():
    with pytest.raises(ValueError):
        representation_check((4, 8))


def test_representation_rejects_wild_operator():
    wild = catalog.diagonal(catalog.exponential(-np.log(2)))
    with pytest.raises(NotInDualError):
        representation_check((2, 3, 4), operators=[wild])


def test_representation_truncation_gap_shrinks():
    rep = representation_check((4, 8, 16))
    gaps = [r["truncation_gap"] for r in rep.residuals]
    assert gaps[0] > gaps[1] > gaps[2]


# -- estimator ------------------------------------------------------------------------------------


def test_operator_frame_round_trip(rng):
    fam = build_weyl_heisenberg(3)
    frame = OperatorFrame(weights=fam.weights).fit(fam.matrices)
    assert frame.tightness_.passed
    T = crandn(rng, 5, 3, 3)
    S = frame.transform(T)
    np.testing.assert_allclose(S[0], phi(T[0], fam), atol=1e-14)
    np.testing.assert_allclose(frame.inverse_transform(S), T, atol=1e-12)


def test_operator_frame_tightens_and_clones(rng):
    frame = OperatorFrame(tighten=True).fit(crandn(rng, 20, 3, 3))
    assert frame.tightness_.passed
    assert clone(frame).get_params() == {"tighten": True, "tol": 1e-10, "weights": None}


# -- file format ------------------------------------------------------------------------------------


def test_family_json_round_trip(tmp_path):
    fam = build_random_tight(10, 3, seed=0)
    save_family(fam, tmp_path / "f.json")
    back = load_family(tmp_path / "f.json")
    np.testing.assert_array_equal(back.matrices, fam.matrices)
    np.testing.assert_array_equal(back.weights, fam.weights)
    assert back.label == fam.label


@pytest.mark.parametrize("edit, field", [
    (lambda d: d.pop("d"), "d"),
    (lambda d: d.update(points=[]), "points"),
    (lambda d: d["points"][1].update(weight=0), r"points\[1\].weight"),
    (lambda d: d["points"][0].update(matrix=[[1]]), r"points\[0\].matrix"),
    (lambda d: d.update(label=3), "label"),
])
def test_family_json_errors_name_field(edit, field):
    data = json.loads(json.dumps(family_to_json(build_weyl_heisenberg(2))))
    edit(data)
    with pytest.raises(FormatError, match=field):
        family_from_json(data)
