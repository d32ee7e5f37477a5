"""Command line front end: ``mcqm perturb | verify | diagrams | oracle``.

Exit codes: 0 success, 1 usage / I/O / parse / validation errors,
2 degenerate level, 3 obstruction failure, 4 eigenvalue tracking failure.
Failures also print one JSON record on stderr.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass, field

import numpy as np

from . import diagrams as dg
from . import oracle as orc
from .errors import (
    DegenerateLevel,
    MCQMError,
    ObstructionFailure,
    TrackingFailure,
)
from .hilbert import homotopy_apply, homotopy_identity_residual, twisted_differential
from .models import ModelSpec, build_model
from .perturbation import (
    base_element,
    build_problem,
    corrections,
    obstruction_norm,
    recurrence_rhs,
)
from .superspace import (
    DifferentialSpec,
    GaugeElement,
    apply_differential,
    bracket,
    gauge_act,
    mc_residual,
    random_element,
)

EXIT_OK, EXIT_ERROR, EXIT_DEGENERATE, EXIT_OBSTRUCTION, EXIT_TRACKING = 0, 1, 2, 3, 4
FORMATS = ("json", "csv", "text")
MODELS = ("two-level", "random", "oscillator", "oscillator-quartic", "fd1d")


class UsageError(MCQMError):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    subcommand: str
    problem: str | None = None
    model: str | None = None
    model_params: dict = field(default_factory=dict)
    selector: tuple = ("index", 0)
    order: int = 4
    format: str = "text"
    seed: int | None = None
    tol_abs: float = orc.DEFAULT_TOL_ABS
    tol_rel: float = orc.DEFAULT_TOL_REL
    lambda0: float = orc.DEFAULT_LAMBDA0
    out: str | None = None
    render: str = "text"
    samples: int = 100

    def __post_init__(self):
        if self.order < 1:
            raise UsageError("--order must be at least 1")
        if self.format not in FORMATS:
            raise UsageError(f"unknown format {self.format!r}")

    def model_spec(self) -> ModelSpec:
        if (self.problem is None) == (self.model is None):
            raise UsageError("give exactly one of --problem or --model")
        if self.problem is not None:
            return ModelSpec("dense-file", {"path": self.problem})
        p = self.model_params
        if self.model == "two-level":
            return ModelSpec("two-level")
        if self.model == "random":
            if self.seed is None:
                raise UsageError("--model random requires --seed")
            return ModelSpec("random", {"n": _need(p, "n"), "seed": self.seed,
                                        "min_gap": p.get("min_gap", 0.5),
                                        "v_scale": p.get("v_scale", 1.0)})
        if self.model in ("oscillator", "oscillator-quartic"):
            power = 4 if self.model == "oscillator-quartic" else p.get("power", 4)
            return ModelSpec("oscillator", {"N": _need(p, "n"), "p": power})
        if self.model == "fd1d":
            return ModelSpec("fd1d", {"n": _need(p, "n"), "a": p.get("a", -10.0),
                                      "b": p.get("b", 10.0), "p": p.get("power", 4)})
        raise UsageError(f"unknown model {self.model!r}")

    def source(self) -> dict:
        if self.problem is not None:
            return {"problem": self.problem}
        out = {"model": self.model}
        out.update({k: v for k, v in sorted(self.model_params.items()) if v is not None})
        if self.seed is not None:
            out["seed"] = self.seed
        return out


def _need(params, key):
    if params.get(key) is None:
        raise UsageError(f"this model requires --{key}")
    return params[key]


def parse_selector(text: str) -> tuple:
    """``index:<k>`` or ``energy:<x>``."""
    kind, _, value = text.partition(":")
    try:
        if kind == "index":
            return ("index", int(value))
        if kind == "energy":
            return ("energy", float(value))
    except ValueError:
        pass
    raise UsageError(f"bad selector {text!r}; use index:<k> or energy:<x>")


def _selector_kwargs(cfg):
    kind, value = cfg.selector
    return {kind: value}


# ---------------------------------------------------------------------------
# output


def _num(x):
    return format(float(x), ".17g")


def _cplx(z):
    return [float(np.real(z)), float(np.imag(z))]


def _emit(cfg, doc, columns, rows):
    """Write ``doc`` as JSON, or ``rows`` (list of dicts) as CSV / text."""
    if cfg.format == "json":
        text = json.dumps(doc, indent=2) + "\n"
    elif cfg.format == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(columns)
        for row in rows:
            writer.writerow([_cell(row.get(c), csv_mode=True) for c in columns])
        text = buf.getvalue()
    else:
        cells = [[str(c) for c in columns]] + [[_cell(r.get(c)) for c in columns] for r in rows]
        widths = [max(len(line[i]) for line in cells) for i in range(len(columns))]
        text = "\n".join("  ".join(v.rjust(w) for v, w in zip(line, widths)) for line in cells)
        text += "\n"
    if cfg.out:
        with open(cfg.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _cell(value, csv_mode=False):
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(value).lower()
    if isinstance(value, (float, np.floating)):
        return _num(value) if csv_mode else f"{float(value):.12g}"
    return str(value)


# ---------------------------------------------------------------------------
# perturb


def _load(cfg):
    h0, v = build_model(cfg.model_spec())
    return build_problem(h0, v, **_selector_kwargs(cfg))


def cmd_perturb(cfg: RunConfig) -> int:
    p = _load(cfg)
    series = corrections(p, cfg.order)
    psi0 = p.eigendatum.vector
    pairs = [(complex(p.eigendatum.energy), psi0)] + series.orders
    rows, out_rows = [], []
    for k, (e, psi) in enumerate(pairs):
        overlap = complex(np.vdot(psi0, psi))
        norm = float(np.linalg.norm(psi))
        rows.append({"k": k, "energy_re": e.real, "energy_im": e.imag, "psi_norm": norm,
                     "overlap_re": overlap.real, "overlap_im": overlap.imag})
        out_rows.append({"k": k, "energy": _cplx(e), "psi_norm": norm,
                         "overlap": _cplx(overlap), "psi": [_cplx(z) for z in psi]})
    doc = {
        "command": "perturb",
        "source": cfg.source(),
        "selector": f"{cfg.selector[0]}:{cfg.selector[1]}",
        "base_index": p.eigendatum.index,
        "order": cfg.order,
        "normalization": series.normalization,
        "orders": out_rows,
    }
    _emit(cfg, doc, ["k", "energy_re", "energy_im", "psi_norm", "overlap_re", "overlap_im"], rows)
    return EXIT_OK


def load_series(doc) -> list:
    """Rebuild ``[(E(k), psi(k)) for k = 0..K]`` from perturb JSON output."""
    out = []
    for row in doc["orders"]:
        e = complex(*row["energy"])
        psi = np.array([complex(*z) for z in row["psi"]])
        out.append((e, psi))
    return out


# ---------------------------------------------------------------------------
# verify

_VERIFY_TOL = {
    "graded_antisymmetry": 1e-12,
    "graded_jacobi": 1e-12,
    "nilpotency_Q": 1e-12,
    "nilpotency_Q_twisted": 1e-12,
    "derivation": 1e-12,
    "homotopy_identity": 1e-11,
    "homotopy_squares_to_zero": 1e-12,
    "mc_residual_base": 1e-10,
    "gauge_stability": 1e-10,
    "obstruction": 1e-10,
}


def invariant_sweep(p, rng, samples: int = 100) -> dict:
    """Largest relative residual of each algebraic identity over random inputs."""
    n = p.dim
    h = p.h0
    q = DifferentialSpec(h)
    qt = twisted_differential(h, p.eigendatum)
    hnorm = max(1.0, h.norm())
    worst = dict.fromkeys(_VERIFY_TOL, 0.0)

    def note(name, value):
        worst[name] = max(worst[name], float(value))

    def homogeneous():
        return random_element(rng, n, parity=int(rng.integers(2)))

    for _ in range(samples):
        a, b, c = homogeneous(), homogeneous(), homogeneous()
        pa, pb, pc = a.parity(), b.parity(), c.parity()
        scale = a.norm() * b.norm()
        sym = bracket(a, b) + (-1) ** (pa * pb) * bracket(b, a)
        note("graded_antisymmetry", sym.norm() / scale)
        jac = ((-1) ** (pa * pc) * bracket(a, bracket(b, c))
               + (-1) ** (pb * pa) * bracket(b, bracket(c, a))
               + (-1) ** (pc * pb) * bracket(c, bracket(a, b)))
        note("graded_jacobi", jac.norm() / (scale * c.norm()))
        x = random_element(rng, n)
        note("nilpotency_Q", apply_differential(q, apply_differential(q, x)).norm()
             / (hnorm ** 2 * x.norm()))
        note("nilpotency_Q_twisted", apply_differential(qt, apply_differential(qt, x)).norm()
             / (hnorm ** 2 * x.norm()))
        der = (apply_differential(q, bracket(a, b)) - bracket(apply_differential(q, a), b)
               - (-1) ** pa * bracket(a, apply_differential(q, b)))
        note("derivation", der.norm() / (hnorm * scale))
        note("homotopy_identity",
             homotopy_identity_residual(h, p.eigendatum, x, p.homotopy) / x.norm())
        note("homotopy_squares_to_zero",
             homotopy_apply(p.homotopy, homotopy_apply(p.homotopy, x)).norm()
             / (max(1.0, np.linalg.norm(p.homotopy.resolvent, 2)) ** 2 * x.norm()))
        g = GaugeElement(rng.standard_normal(n) + 1j * rng.standard_normal(n),
                         rng.uniform(-1.0, 1.0))
        psi0 = base_element(p)
        moved = gauge_act(g, psi0, h)
        note("gauge_stability", mc_residual(h, moved).norm()
             / (hnorm * max(1.0, moved.norm())))
    note("mc_residual_base", mc_residual(h, base_element(p)).norm() / hnorm)
    history = []
    for k in range(1, 7):
        linear, quadratic = recurrence_rhs(p, history, base_element(p))
        rhs = linear + quadratic
        if rhs.norm() > 0:
            note("obstruction", obstruction_norm(p, rhs) / rhs.norm())
        history.append(homotopy_apply(p.homotopy, rhs))
    return worst


def cmd_verify(cfg: RunConfig) -> int:
    if cfg.seed is None:
        raise UsageError("verify requires --seed")
    if cfg.problem is None and cfg.model is None:
        cfg.model = "random"
        cfg.model_params.setdefault("n", 6)
    p = _load(cfg)
    rng = np.random.Generator(np.random.PCG64(cfg.seed))
    worst = invariant_sweep(p, rng, cfg.samples)
    rows = [{"invariant": name, "max_residual": worst[name], "tolerance": tol,
             "passed": worst[name] <= tol} for name, tol in _VERIFY_TOL.items()]
    ok = all(r["passed"] for r in rows)
    doc = {"command": "verify", "source": cfg.source(), "seed": cfg.seed,
           "samples": cfg.samples, "passed": ok, "invariants": rows}
    _emit(cfg, doc, ["invariant", "max_residual", "tolerance", "passed"], rows)
    return EXIT_OK if ok else EXIT_ERROR


# ---------------------------------------------------------------------------
# diagrams


def cmd_diagrams(cfg: RunConfig) -> int:
    if not 1 <= cfg.order <= dg.MAX_ORDER:
        raise UsageError(f"--order must be within 1..{dg.MAX_ORDER} for diagrams")
    diagrams = dg.enumerate_diagrams(cfg.order)
    rows = [{"order": d.order, "coefficient": d.coefficient,
             "energy_contributing": dg.is_energy_contributing(d),
             "diagram": dg.render(d, cfg.render)} for d in diagrams]
    doc = {"command": "diagrams", "order": cfg.order, "count": len(diagrams),
           "expansion_terms": dg.expansion_term_count(cfg.order), "diagrams": rows}
    if cfg.problem is not None or cfg.model is not None:
        p = _load(cfg)
        target = corrections(p, cfg.order).elements[-1]
        total = dg.diagram_sum(cfg.order, p)
        energy_part = dg.diagram_sum(cfg.order, p, energy_only=True)
        doc["source"] = cfg.source()
        doc["sum_residual"] = (total - target).norm()
        doc["correction_norm"] = target.norm()
        doc["energy_filter_residual"] = abs(energy_part.scal_c - target.scal_c)
    if cfg.format == "text" and cfg.render == "dot":
        text = "".join(f"// coefficient {r['coefficient']}, energy_contributing "
                       f"{str(r['energy_contributing']).lower()}\n{r['diagram']}" for r in rows)
        for key in ("sum_residual", "energy_filter_residual"):
            if key in doc:
                text += f"// {key} {doc[key]:.3e}\n"
        if cfg.out:
            with open(cfg.out, "w", encoding="utf-8") as fh:
                fh.write(text)
        else:
            sys.stdout.write(text)
        return EXIT_OK
    if cfg.format != "json" and "sum_residual" in doc:
        for r in rows:
            r["sum_residual"] = doc["sum_residual"]
    columns = ["order", "coefficient", "energy_contributing", "diagram"]
    if "sum_residual" in doc:
        columns.append("sum_residual")
    _emit(cfg, doc, columns, rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# oracle


def cmd_oracle(cfg: RunConfig) -> int:
    p = _load(cfg)
    series = corrections(p, cfg.order)
    e_diag, psi_diag = orc.vector_series_by_diagonalization(
        p.h0, p.v, p.eigendatum, cfg.order, lambda0=cfg.lambda0)
    diag = orc.compare(series, e_diag, cfg.tol_abs, cfg.tol_rel, oracle_vectors=psi_diag)
    kt = min(cfg.order, 3)
    tb = orc.rs_textbook(p.h0, p.v, p.eigendatum, kt)
    text = orc.compare(series, [e for e, _ in tb], cfg.tol_abs, cfg.tol_rel,
                       oracle_vectors=[psi for _, psi in tb])
    ok = diag.passed and text.passed
    rows = []
    for name, report in (("diagonalization", diag), ("textbook", text)):
        for o in report.orders:
            rows.append({"oracle": name, "k": o.k, "engine_re": o.engine.real,
                         "oracle_re": o.oracle.real, "abs_err": o.abs_err,
                         "rel_err": o.rel_err if math.isfinite(o.rel_err) else None,
                         "angle_err": o.angle_err, "passed": o.passed})
    doc = {"command": "oracle", "source": cfg.source(), "order": cfg.order,
           "lambda0": cfg.lambda0, "passed": ok,
           "diagonalization": _json_safe(diag.as_dict()),
           "textbook": _json_safe(text.as_dict())}
    _emit(cfg, doc, ["oracle", "k", "engine_re", "oracle_re", "abs_err", "rel_err",
                     "angle_err", "passed"], rows)
    return EXIT_OK if ok else EXIT_ERROR


def _json_safe(obj):
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="mcqm", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="subcommand", required=True, parser_class=_Parser)
    for name, helptext in (("perturb", "Rayleigh-Schroedinger corrections to order K"),
                           ("verify", "check the algebraic identities numerically"),
                           ("diagrams", "enumerate tree diagrams of order K"),
                           ("oracle", "compare the engine with exact diagonalization")):
        sp = sub.add_parser(name, help=helptext)
        src = sp.add_mutually_exclusive_group()
        src.add_argument("--problem", help="problem JSON file")
        src.add_argument("--model", choices=MODELS)
        sp.add_argument("--n", type=int, help="dimension / grid size / basis size")
        sp.add_argument("--a", type=float, help="fd1d left wall (default -10)")
        sp.add_argument("--b", type=float, help="fd1d right wall (default 10)")
        sp.add_argument("--power", type=int, choices=(2, 3, 4), help="perturbation x^p")
        sp.add_argument("--min-gap", type=float, help="random model spectral gap")
        sp.add_argument("--v-scale", type=float, help="random model ||V||_2")
        sp.add_argument("--select", default="index:0", help="index:<k> or energy:<x>")
        sp.add_argument("--order", type=int, default=3 if name == "diagrams" else 4)
        sp.add_argument("--format", choices=FORMATS, default="text")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--tol-abs", type=float, default=orc.DEFAULT_TOL_ABS)
        sp.add_argument("--tol-rel", type=float, default=orc.DEFAULT_TOL_REL)
        sp.add_argument("--lambda0", type=float, default=orc.DEFAULT_LAMBDA0,
                        help="oracle coupling grid spacing")
        sp.add_argument("--samples", type=int, default=100, help="verify: random inputs")
        sp.add_argument("--render", choices=("text", "dot"), default="text",
                        help="diagrams: token string or DOT")
        sp.add_argument("--out", help="output file (default stdout)")
    return parser


def config_from_args(argv) -> RunConfig:
    args = build_parser().parse_args(argv)
    if args.seed is not None and not 0 <= args.seed < 2 ** 64:
        raise UsageError("--seed must fit in an unsigned 64-bit integer")
    params = {"n": args.n, "a": args.a, "b": args.b, "power": args.power,
              "min_gap": args.min_gap, "v_scale": args.v_scale}
    return RunConfig(
        subcommand=args.subcommand, problem=args.problem, model=args.model,
        model_params={k: v for k, v in params.items() if v is not None},
        selector=parse_selector(args.select), order=args.order, format=args.format,
        seed=args.seed, tol_abs=args.tol_abs, tol_rel=args.tol_rel, lambda0=args.lambda0,
        out=args.out, render=args.render, samples=args.samples)


COMMANDS = {"perturb": cmd_perturb, "verify": cmd_verify,
            "diagrams": cmd_diagrams, "oracle": cmd_oracle}


def _fail(code, exc):
    record = {"error": type(exc).__name__, "exit_code": code, "message": str(exc)}
    location = getattr(exc, "location", None)
    if location is not None:
        record["location"] = list(location)
    sys.stderr.write(json.dumps(record) + "\n")
    return code


def main(argv=None) -> int:
    try:
        cfg = config_from_args(sys.argv[1:] if argv is None else argv)
        return COMMANDS[cfg.subcommand](cfg)
    except DegenerateLevel as exc:
        return _fail(EXIT_DEGENERATE, exc)
    except ObstructionFailure as exc:
        return _fail(EXIT_OBSTRUCTION, exc)
    except TrackingFailure as exc:
        return _fail(EXIT_TRACKING, exc)
    except (MCQMError, OSError, ValueError, IndexError, KeyError) as exc:
        return _fail(EXIT_ERROR, exc)


if __name__ == "__main__":
    sys.exit(main())
