"""Scenario runner: ``moyalab run <scenario> [options]``.

Every run writes ``report.json`` (deterministic, sorted keys, no clock
values), ``residuals.csv`` and ``metadata.json`` (timestamps and versions)
into the ``--out`` directory. Exit status is 0 when all checks pass, 2 when
a check fails (the report is still written) and 1 on usage errors.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import platform
import sys
from dataclasses import asdict, dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
import yaml

from . import __version__, catalog
from .algebra import (
    CorpusSpec,
    MatrixModel,
    NotInDualError,
    PointwiseModel,
    check_hilbert_axioms,
    extend_involution,
    extend_product_left,
    extend_product_right,
    mutate,
)
from .graded import FormatError, GradedElement, classify, load_element
from .moyal import is_left_moyal, is_right_moyal
from .opfamily import (
    TransportedModel,
    build_random_tight,
    build_weyl_heisenberg,
    load_family,
    parseval_check,
    phi,
    pi,
    representation_check,
    verify_tightness,
)

SCENARIOS = ("axioms", "extend", "moyal-check", "quantize", "representation")
MODELS = ("pointwise", "matrix", "transported")
SCHEMA = 1


class UsageError(Exception):
    """Bad flags, config or input files (exit status 1)."""


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    model: str = "matrix"
    family: str = "weyl-heisenberg:4"
    dim: int | None = None
    ladder: tuple[int, ...] | None = None
    seed: int = 0
    tol: float = 1e-10
    samples: int | None = None
    out: str = "moyalab-out"
    mutate: tuple[tuple[str, str], ...] = ()
    element: str | None = None

    def to_json(self) -> dict:
        data = asdict(self)
        data.pop("out")
        data["ladder"] = None if self.ladder is None else list(self.ladder)
        data["mutate"] = dict(self.mutate)
        return data


# -- parsing ---------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def _ladder(text) -> tuple[int, ...]:
    try:
        levels = tuple(int(x) for x in str(text).split(",") if x.strip())
    except ValueError:
        raise UsageError(f"--ladder: expected comma-separated integers, got {text!r}") from None
    if not levels or any(n < 1 for n in levels):
        raise UsageError("--ladder: levels must be positive integers")
    return levels


def _mutations(items) -> tuple[tuple[str, str], ...]:
    if isinstance(items, dict):
        items = [f"{k}={v}" for k, v in items.items()]
    out = {}
    for item in items or ():
        key, sep, value = str(item).partition("=")
        if not sep or key not in ("involution", "product"):
            raise UsageError(f"--mutate: expected involution=... or product=..., got {item!r}")
        out[key] = value
    return tuple(sorted(out.items()))


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="moyalab", description="Hilbert-algebra laboratory scenarios")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    run = sub.add_parser("run", help="run a scenario and write its report")
    run.add_argument("scenario", help=f"one of {', '.join(SCENARIOS)}")
    run.add_argument("--config", help="YAML or JSON file with default options")
    run.add_argument("--model", help=f"one of {', '.join(MODELS)}")
    run.add_argument("--family", help="weyl-heisenberg:<n> | random:<N>,<d>,<seed> | file:<path>")
    run.add_argument("--dim", type=int, help="truncation (sequence length or matrix size)")
    run.add_argument("--ladder", help="comma-separated truncation levels")
    run.add_argument("--seed", type=int)
    run.add_argument("--tol", type=float)
    run.add_argument("--samples", type=int, help="corpus size")
    run.add_argument("--out", help="output directory")
    run.add_argument("--mutate", action="append", help="planted defect, e.g. involution=transpose")
    run.add_argument("--element", help="element file for moyal-check")
    return parser


def parse_config(argv) -> ScenarioConfig:
    args = build_parser().parse_args(argv)
    if args.command != "run":
        raise UsageError("expected the 'run' command")
    if args.scenario not in SCENARIOS:
        raise UsageError(f"unknown scenario {args.scenario!r}; choose from {', '.join(SCENARIOS)}")
    values: dict = {}
    if args.config:
        try:
            loaded = yaml.safe_load(Path(args.config).read_text())
        except OSError as exc:
            raise UsageError(f"--config: {exc}") from None
        except yaml.YAMLError as exc:
            raise UsageError(f"--config: not valid YAML/JSON: {exc}") from None
        if not isinstance(loaded, dict):
            raise UsageError("--config: expected a mapping of option names to values")
        known = {f for f in ScenarioConfig.__dataclass_fields__} - {"scenario"}
        unknown = set(loaded) - known
        if unknown:
            raise UsageError(f"--config: unknown option(s) {', '.join(sorted(unknown))}")
        values.update(loaded)
    for key in ("model", "family", "dim", "ladder", "seed", "tol", "samples", "out",
                "mutate", "element"):
        v = getattr(args, key)
        if v is not None:
            values[key] = v
    if "ladder" in values and values["ladder"] is not None:
        lad = values["ladder"]
        values["ladder"] = _ladder(",".join(map(str, lad)) if isinstance(lad, list) else lad)
    values["mutate"] = _mutations(values.get("mutate"))
    if values.get("model", "matrix") not in MODELS:
        raise UsageError(f"--model: choose from {', '.join(MODELS)}")
    if "tol" in values and not float(values["tol"]) > 0:
        raise UsageError("--tol must be positive")
    for key in ("dim", "samples"):
        if values.get(key) is not None and int(values[key]) < 1:
            raise UsageError(f"--{key} must be >= 1")
    try:
        return ScenarioConfig(args.scenario, **values)
    except TypeError as exc:
        raise UsageError(str(exc)) from None


def parse_family(spec: str):
    kind, _, rest = spec.partition(":")
    try:
        if kind == "weyl-heisenberg":
            return build_weyl_heisenberg(int(rest))
        if kind == "random":
            N, d, seed = (int(x) for x in rest.split(","))
            return build_random_tight(N, d, seed)
    except ValueError as exc:
        raise UsageError(f"--family: {exc}") from None
    if kind == "file":
        try:
            return load_family(rest)
        except OSError as exc:
            raise UsageError(f"--family: {exc}") from None
    raise UsageError(f"--family: unknown family spec {spec!r}")


def _model(cfg: ScenarioConfig):
    if cfg.model == "pointwise":
        model = PointwiseModel()
    elif cfg.model == "matrix":
        model = MatrixModel()
    else:
        model = TransportedModel(parse_family(cfg.family))
    if cfg.mutate:
        model = mutate(model, **dict(cfg.mutate))
    return model


# -- scenarios ------------------------------------------------------------------


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(np.linalg.norm(a), np.linalg.norm(b))
    return float(np.linalg.norm(a - b) / scale) if scale > 0 else 0.0


def run_axioms(cfg: ScenarioConfig):
    model = _model(cfg)
    dim = cfg.dim or (64 if cfg.model == "pointwise" else 16)
    corpus = CorpusSpec(cfg.seed, cfg.samples or 200, dim)
    report = check_hilbert_axioms(model, corpus, cfg.tol)
    rows = [{"axiom": r.axiom, "status": r.status, "residual": r.residual} for r in report.results]
    return report.to_json(), rows, report.passed


def run_extend(cfg: ScenarioConfig):
    if cfg.model not in ("pointwise", "matrix"):
        raise UsageError("extend: --model must be pointwise or matrix")
    model = _model(cfg)
    dim = cfg.dim or 16
    n = cfg.samples or 200
    rng = np.random.default_rng(cfg.seed)
    assoc_tol = max(1e-9, cfg.tol)
    rows, worst = [], {}

    def note(kind, i, value):
        rows.append({"check": kind, "sample": i, "residual": value})
        worst[kind] = max(worst.get(kind, 0.0), value)

    for i in range(n):
        f = model.random_element(rng, dim, decay=0.1)
        g = model.random_element(rng, dim, decay=0.1)
        note("right-vs-direct", i, _rel(extend_product_right(f, g, model).coeffs,
                                        model.product(f, g).coeffs))
        note("left-vs-direct", i, _rel(extend_product_left(g, f, model).coeffs,
                                       model.product(g, f).coeffs))
        note("involution-vs-direct", i, _rel(extend_involution(f, model).coeffs,
                                             model.involution(f).coeffs))
    for i in range(max(1, n // 4)):
        F = model.random_element(rng, dim, decay=0.0, growth=2.0)
        g = model.random_element(rng, dim, decay=0.1)
        h = model.random_element(rng, dim, decay=0.1)
        R, L = extend_product_right, extend_product_left
        note("assoc-F(gh)", i, _rel(R(F, model.product(g, h), model).coeffs,
                                    R(R(F, g, model), h, model).coeffs))
        note("assoc-h(gF)", i, _rel(L(h, L(g, F, model), model).coeffs,
                                    L(model.product(h, g), F, model).coeffs))
        note("assoc-(gF)h", i, _rel(R(L(g, F, model), h, model).coeffs,
                                    L(g, R(F, h, model), model).coeffs))
        note("anti-hom", i, _rel(extend_involution(R(F, g, model), model).coeffs,
                                 L(model.involution(g), extend_involution(F, model), model).coeffs))
    direct = ("right-vs-direct", "left-vs-direct", "involution-vs-direct")
    passed = all(worst[k] <= cfg.tol for k in direct) and all(
        v <= assoc_tol for k, v in worst.items() if k not in direct)
    return {"worst": worst, "samples": n, "dim": dim, "assoc_tol": assoc_tol}, rows, passed


def _witness_ok(f, verdict, model) -> bool:
    w = verdict.witness
    prod = model.product(f, w) if verdict.side == "Left" else model.product(w, f)
    return not classify(prod).growth.is_rapid


def curated_suite(dim: int):
    """(name, model, element, expected) rows of the multiplier regression suite."""
    mm, pm = MatrixModel(), PointwiseModel()
    e0v = catalog.rank_one(catalog.kronecker(0), catalog.constant(1.0))
    suite = [("identity", mm, catalog.diagonal(catalog.constant(1.0)),
              {"Left": "Member", "Right": "Member"})]
    for p in (1, 3, 5):
        suite.append((f"diag((1+m)^{p})", mm, catalog.diagonal(catalog.power_law(p)),
                      {"Left": "Member", "Right": "Member"}))
    suite += [
        ("e0 v*", mm, e0v, {"Left": "Member", "Right": "NonMember"}),
        ("v e0*", mm, catalog.adjoint(e0v), {"Left": "NonMember", "Right": "Member"}),
        ("diag(2^m)", mm, catalog.diagonal(catalog.exponential(-math.log(2))), "Wild"),
        ("(1+m)^5", pm, catalog.power_law(5), {"Left": "Member", "Right": "Member"}),
        ("2^m", pm, catalog.exponential(-math.log(2)), "Wild"),
    ]
    return [(name, model, GradedElement.from_generator(g, dim), exp)
            for name, model, g, exp in suite]


def _verdicts(name, model, f):
    try:
        left, right = is_left_moyal(f, model), is_right_moyal(f, model)
    except NotInDualError:
        return {"element": name, "rejected": "Wild"}, None
    entry = {"element": name, "Left": left.to_json(), "Right": right.to_json()}
    for v in (left, right):
        if v.verdict == "NonMember":
            entry[v.side]["witness_reclassified_non_rapid"] = _witness_ok(f, v, model)
    return entry, (left, right)


def run_moyal_check(cfg: ScenarioConfig):
    dim = cfg.dim or 64
    entries, rows, passed = [], [], True
    if cfg.element:
        try:
            f = load_element(cfg.element)
        except OSError as exc:
            raise UsageError(f"--element: {exc}") from None
        model = PointwiseModel() if f.axes == 1 else MatrixModel()
        entry, _ = _verdicts(Path(cfg.element).name, model, f)
        entries.append(entry)
        return {"entries": entries}, rows, True
    for name, model, f, expected in curated_suite(dim):
        entry, verdicts = _verdicts(name, model, f)
        if verdicts is None:
            ok = expected == "Wild"
            rows.append({"element": name, "side": "-", "verdict": "rejected", "ok": ok})
        else:
            ok = True
            for v in verdicts:
                good = expected != "Wild" and v.verdict == expected[v.side]
                if v.verdict == "NonMember":
                    good = good and entry[v.side]["witness_reclassified_non_rapid"]
                rows.append({"element": name, "side": v.side, "verdict": v.verdict, "ok": good})
                ok = ok and good
        entry["ok"] = ok
        passed = passed and ok
        entries.append(entry)
    inconclusive = sum(1 for r in rows if r["verdict"] == "Inconclusive")
    return {"entries": entries, "inconclusive": inconclusive, "dim": dim}, rows, passed


def run_quantize(cfg: ScenarioConfig):
    fam = parse_family(cfg.family)
    n = cfg.samples or 100
    rng = np.random.default_rng(cfg.seed)
    tight = verify_tightness(fam, cfg.tol, seed=cfg.seed)
    rows, worst_p, worst_r, worst_loss = [], 0.0, 0.0, 0.0
    N, d = fam.n_points, fam.d
    for i in range(n):
        f = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        g = rng.standard_normal(N) + 1j * rng.standard_normal(N)
        res = parseval_check(f, g, fam)
        T = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
        rec = float(np.linalg.norm(pi(phi(T, fam), fam) - T) / np.linalg.norm(T))
        rows.append({"sample": i, "parseval": res.residual, "projection_loss": res.projection_loss,
                     "reconstruction": rec})
        worst_p, worst_r = max(worst_p, res.residual), max(worst_r, rec)
        worst_loss = max(worst_loss, res.projection_loss)
    P = fam.space.projector
    idem = float(np.linalg.norm(P @ P - P))
    result = {
        "family": fam.label,
        "tightness": tight.to_json(),
        "parseval_max": worst_p,
        "reconstruction_max": worst_r,
        "projection_loss_max": worst_loss,
        "projector_rank": fam.space.rank,
        "projector_idempotency": idem,
        "samples": n,
    }
    passed = tight.passed and worst_p <= cfg.tol and worst_r <= cfg.tol
    return result, rows, passed


def run_representation(cfg: ScenarioConfig):
    levels = cfg.ladder or (4, 8, 16)
    try:
        report = representation_check(levels)
    except ValueError as exc:
        raise UsageError(f"representation: {exc}") from None
    return report.to_json(), report.residuals, report.passed


RUNNERS = {
    "axioms": run_axioms,
    "extend": run_extend,
    "moyal-check": run_moyal_check,
    "quantize": run_quantize,
    "representation": run_representation,
}


# -- output ---------------------------------------------------------------------


def _clean(obj):
    """JSON-safe copy: non-finite floats become strings, numpy scalars plain."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def write_outputs(out: Path, report: dict, rows: list, meta: dict) -> None:
    out.mkdir(parents=True, exist_ok=True)
    (out / "report.json").write_text(json.dumps(_clean(report), indent=2, sort_keys=True) + "\n")
    with open(out / "residuals.csv", "w", newline="") as fh:
        if rows:
            names = sorted({k for r in rows for k in r})
            writer = csv.DictWriter(fh, fieldnames=names, lineterminator="\n")
            writer.writeheader()
            for r in rows:
                writer.writerow(_clean(r))
    (out / "metadata.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")


def run(cfg: ScenarioConfig) -> int:
    started = datetime.now(timezone.utc).isoformat()
    result, rows, passed = RUNNERS[cfg.scenario](cfg)
    report = {"schema": SCHEMA, "scenario": cfg.scenario, "config": cfg.to_json(),
              "passed": passed, "result": result}
    meta = {"started": started, "finished": datetime.now(timezone.utc).isoformat(),
            "version": __version__, "python": platform.python_version(),
            "numpy": np.__version__}
    write_outputs(Path(cfg.out), report, rows, meta)
    status = "PASS" if passed else "FAIL"
    print(f"{cfg.scenario}: {status} (report in {cfg.out})")
    return 0 if passed else 2


def main(argv=None) -> int:
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else argv)
        return run(cfg)
    except (UsageError, FormatError) as exc:
        print(f"moyalab: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
