"""Command-line front end.

Exit codes: 0 when the pipeline ran, 2 when the reference point is
infeasible, has no Lagrange multiplier, or does not admit the requested
construction, and 1 for usage, file and parse errors.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import __version__, corpus
from .config import AnalysisConfig, load_config
from .expr import DomainError, ParseError, ProblemFormatError, eval_point, format_problem, \
    load_problem, parse_problem, to_string
from .oracle import tilt_probe
from .serialize import dumps, jsonable, labels
from .stability.analyze import StabilityReport, analyze, cq_to_dict, oracle_to_dict
from .stability.cq import parse_partition, cq_suite
from .stability.perturb import PerturbationError, perturb_problem
from .stability.sets import active_set

EXIT_OK, EXIT_USAGE, EXIT_PRECONDITION = 0, 1, 2


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        sys.stderr.write(f"{self.prog}: error: {message}\n")
        raise SystemExit(EXIT_USAGE)


def _param(text):
    key, sep, val = text.partition("=")
    if not sep or not key.strip():
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    try:
        return key.strip(), float(val)
    except ValueError:
        raise argparse.ArgumentTypeError(f"parameter {key.strip()} needs a real value") from None


def _vector(text):
    try:
        return np.array([float(t) for t in text.replace(";", ",").split(",")], float)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated reals, got {text!r}") from None


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="tiltcheck", description="Tilt-stability analysis of nonlinear programs.")
    p.add_argument("--version", action="version", version=f"tiltcheck {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, samples_help):
        sp.add_argument("file", help="problem file, or the name of a bundled example")
        sp.add_argument("--json", metavar="PATH", help="write the JSON report to PATH ('-' for stdout)")
        sp.add_argument("--param", action="append", type=_param, default=[], metavar="K=V",
                        help="override a named parameter (repeatable)")
        sp.add_argument("--config", metavar="PATH", help="JSON file with configuration fields")
        sp.add_argument("--samples", type=int, metavar="N", help=samples_help)
        sp.add_argument("--gamma", type=float, metavar="R", help="oracle ball radius")
        sp.add_argument("--delta", type=float, metavar="R", help="oracle tilt radius")
        sp.add_argument("--quiet", action="store_true", help="suppress the text report")

    a = sub.add_parser("analyze", help="full second-order analysis")
    common(a, "sample count of the neighborhood qualification checks")
    a.add_argument("--partition", metavar="PARTS", help='split for SOSCMS, e.g. "E1=1,2;I1=3"')
    a.add_argument("--kappa", type=float, help="target modulus for the sufficient test")
    a.add_argument("--oracle", action="store_true", help="also run the brute-force oracle")
    a.add_argument("--grid", type=int, help="oracle tilt grid points per axis")
    a.add_argument("--starts", type=int, help="oracle starts per tilt")

    c = sub.add_parser("cqs", help="constraint qualifications only")
    common(c, "sample count of the neighborhood qualification checks")
    c.add_argument("--partition", metavar="PARTS", help='split for SOSCMS, e.g. "E1=1,2;I1=3"')

    o = sub.add_parser("oracle", help="brute-force tilt oracle")
    common(o, "starts per tilt (same as --starts)")
    o.add_argument("--grid", type=int, help="tilt grid points per axis")
    o.add_argument("--starts", type=int, help="starts per tilt")

    t = sub.add_parser("perturb", help="build a modified program that is not tilt-stable")
    common(t, "sample count of the neighborhood qualification checks")
    t.add_argument("-o", "--output", metavar="PATH",
                   help="where to write the modified problem (default: <name>_perturbed.nlp)")
    t.add_argument("--multiplier", type=_vector, help="extreme multiplier to use")
    t.add_argument("--w", type=_vector, help="direction with nonpositive Lagrangian curvature")
    t.add_argument("--v", type=_vector, help="unit critical direction")

    k = sub.add_parser("corpus", help="list or write bundled examples")
    k.add_argument("name", nargs="?", help="example name")
    k.add_argument("--emit", metavar="DIR", help="write <name>.nlp and <name>.json into DIR")
    k.add_argument("--json", metavar="PATH", help="write the listing or metadata as JSON")
    return p


# ---------------------------------------------------------------------------
# inputs


def _resolve(path: str) -> tuple[str, str]:
    """Problem text and a display name; bundled examples are found by name."""
    p = Path(path)
    if p.is_file():
        return p.read_text(encoding="utf-8"), p.stem
    stem = p.stem if p.suffix == ".nlp" else p.name
    if stem in corpus.names() and (len(p.parts) == 1 or p.parent.name == "corpus"):
        return corpus.text(stem), stem
    raise UsageError(f"cannot read problem file {path!r}")


def _load(args):
    text, name = _resolve(args.file)
    return parse_problem(text, dict(args.param)), name


def _config(args) -> AnalysisConfig:
    cfg = load_config(args.config) if args.config else AnalysisConfig()
    d = cfg.to_dict()
    o = d["oracle"]
    if getattr(args, "gamma", None) is not None:
        o["gamma"] = args.gamma
        if args.delta is None and not (args.config and "delta" in _raw_oracle(args.config)):
            o["delta"] = None
            o["cluster_tol"] = None
    if getattr(args, "delta", None) is not None:
        o["delta"] = args.delta
    if getattr(args, "grid", None) is not None:
        o["grid"] = args.grid
    if getattr(args, "starts", None) is not None:
        o["starts"] = args.starts
    if args.samples is not None:
        if args.command == "oracle":
            o["starts"] = args.samples
        else:
            d["cq_samples"] = args.samples
    if getattr(args, "kappa", None) is not None:
        d["kappa"] = args.kappa
    if getattr(args, "oracle", False):
        d["run_oracle"] = True
    return AnalysisConfig.from_dict(d)


def _raw_oracle(path) -> dict:
    import json

    with open(path, encoding="utf-8") as fh:
        return json.load(fh).get("oracle", {})


def _apply_partition(args, cfg: AnalysisConfig, n_eq: int, l: int):
    if not getattr(args, "partition", None):
        return None
    part = parse_partition(args.partition, n_eq, l)
    cfg.partition_e1 = tuple(i + 1 for i in part.e1)
    cfg.partition_i1 = tuple(i + 1 for i in part.i1)
    return part


def _emit_json(args, obj):
    text = dumps(obj)
    if args.json == "-":
        sys.stdout.write(text)
    else:
        Path(args.json).write_text(text, encoding="utf-8")


def _text_wanted(args) -> bool:
    return not args.quiet and args.json != "-"


# ---------------------------------------------------------------------------
# text rendering


def _fmt(x, digits=6) -> str:
    if x is None:
        return "-"
    if isinstance(x, (list, tuple, np.ndarray)):
        return "(" + ", ".join(_fmt(v, digits) for v in np.asarray(x, float).ravel()) + ")"
    x = float(x)
    if not np.isfinite(x):
        return "inf" if x > 0 else ("-inf" if x < 0 else "nan")
    s = f"{x:.{digits}g}"
    return "0" if s == "-0" else s


def _set(idx) -> str:
    return "{" + ", ".join(str(i) for i in labels(idx)) + "}"


def _cq_lines(cqs) -> list:
    out = ["constraint qualifications:"]
    for rec in cqs.records():
        line = f"  {rec.name:<7}{rec.status}"
        if rec.modulus is not None:
            line += f"  modulus {_fmt(rec.modulus)}"
        w = rec.witness
        if "direction" in w:
            line += f"  direction {_fmt(w['direction'])}"
        if "multiplier" in w:
            line += f"  multiplier {_fmt(w['multiplier'])}"
        if "subset" in w:
            line += f"  rows {_set(w['subset'])}"
        if rec.certified:
            line += "  (certified)"
        out.append(line)
    return out


def render_report(rep: StabilityReport) -> str:
    p, pd, act = rep.problem, rep.point, rep.active
    out = [f"problem: dimension {p.dimension}, {p.n_eq} equalities, {p.n_ineq} inequalities",
           f"  objective  {to_string(p.objective)}"]
    if p.params:
        out.append("  params     " + ", ".join(f"{k}={_fmt(v)}" for k, v in sorted(p.params.items())))
    out.append(f"  point      {_fmt(p.point)}")
    out.append(f"feasibility: {'feasible' if act.feasible else 'infeasible'}; "
               f"active inequalities {_set(act.active)}")
    if not act.feasible:
        out.append(f"  violated {_set(act.eq_violations + act.ineq_violations)}")
    if rep.status != "ok":
        out.append(f"status: {rep.status} ({rep.reason})")
        return "\n".join(out) + "\n"
    ms = rep.multipliers
    out.append(f"first order: KKT holds, residual {_fmt(rep.first_order_residual, 3)}")
    out.append(f"multipliers: {len(ms.vertices)} vertices, {len(ms.rays)} rays"
               + (", lineality present" if not ms.pointed else ""))
    for lam, ip in zip(ms.vertices, ms.i_plus):
        out.append(f"  {_fmt(lam)}  strict {_set(ip)}")
    out.append(f"  union of strict sets {_set(rep.i_plus)}")
    out += _cq_lines(rep.cqs)
    K = rep.cone
    if K.trivial:
        out.append("critical cone: {0}")
    else:
        out.append(f"critical cone: {len(K.rays)} rays, lineality dimension {K.lineality.shape[1]}")
        for r in K.rays:
            out.append(f"  ray {_fmt(r)}")
        for b in K.lineality.T:
            out.append(f"  line {_fmt(b)}")
    lbe = rep.lambda_bar
    out.append(f"extreme directional multipliers: {len(lbe.entries)} "
               f"({'exact' if lbe.exact else 'sampled'}, {lbe.mode})")
    for lam, dirs in lbe.entries:
        out.append(f"  {_fmt(lam)}  along {_fmt(dirs[0]) if dirs else '-'}")
    suf = rep.sufficiency
    out.append(f"second order: sufficient test {'holds' if suf.holds else 'fails'}"
               + (f", bound {_fmt(suf.bound)}" if suf.holds and suf.bound is not None else ""))
    for r in suf.records:
        out.append(f"  multiplier {_fmt(r.multiplier)}  minEig {_fmt(r.min_eig)}"
                   + (f"  w {_fmt(r.witness)}" if r.witness is not None else ""))
    nec = rep.necessity
    if nec is not None:
        out.append(f"necessity: hypotheses {'hold' if nec.applicable else 'not verified'}")
        for c in nec.checks:
            two = "-" if c.regular is None else str(bool(c.regular)).lower()
            out.append(f"  v {_fmt(c.v)}  nondegenerate {str(bool(c.nondegenerate)).lower()}"
                       f"  2-regular {two}")
    if rep.crcq is not None:
        c = rep.crcq
        out.append(f"constant-rank characterization: {'holds' if c.holds else 'fails'}"
                   f"{'' if rep.crcq_applicable else ' (not applicable)'}; rows {_set(c.union)}, "
                   f"minEig {_fmt(c.record.min_eig)}")
    out.append(f"verdict: {rep.verdict}")
    if rep.tilt_bound is not None:
        out.append(f"tilt bound: {_fmt(rep.tilt_bound)} ({rep.bound_kind})")
    out.append(f"reason: {rep.reason}")
    if rep.witness:
        w = rep.witness
        out.append(f"witness: multiplier {_fmt(w['multiplier'])}, w {_fmt(w['w'])}, "
                   f"quadratic {_fmt(w['quadratic'])}")
    if rep.oracle is not None:
        out += render_oracle(rep.oracle).rstrip("\n").split("\n")
    for n in rep.notes:
        out.append(f"note: {n}")
    return "\n".join(out) + "\n"


def render_oracle(rep) -> str:
    cfg = rep.config
    out = [f"oracle: {rep.verdict} over {len(rep.records)} tilts "
           f"(gamma {_fmt(cfg.gamma)}, delta {_fmt(cfg.delta)}, {cfg.starts} starts)"]
    if rep.lipschitz is not None:
        out.append(f"  Lipschitz estimate {_fmt(rep.lipschitz)}")
    w = rep.witness_record
    if w is not None:
        out.append(f"  witness tilt {_fmt(w.tilt)}, separation {_fmt(w.separation)}")
        for c in w.clusters:
            out.append(f"    cluster {_fmt(c.point)}  value {_fmt(c.value, 10)}")
    if rep.failures or rep.ambiguous:
        out.append(f"  failed tilts {rep.failures}, ambiguous tilts {rep.ambiguous}")
    for n in rep.notes:
        out.append(f"  note: {n}")
    return "\n".join(out) + "\n"


# ---------------------------------------------------------------------------
# commands


def cmd_analyze(args) -> int:
    problem, _ = _load(args)
    cfg = _config(args)
    _apply_partition(args, cfg, problem.n_eq, problem.n_eq + problem.n_ineq)
    rep = analyze(problem, cfg)
    if args.json:
        _emit_json(args, rep.to_dict())
    if _text_wanted(args):
        sys.stdout.write(render_report(rep))
    return EXIT_OK if rep.status == "ok" else EXIT_PRECONDITION


def cmd_cqs(args) -> int:
    problem, _ = _load(args)
    cfg = _config(args)
    part = _apply_partition(args, cfg, problem.n_eq, problem.n_eq + problem.n_ineq)
    pd = eval_point(problem)
    act = active_set(pd, cfg.active_tol)
    if not act.feasible:
        sys.stderr.write("tiltcheck: the reference point is infeasible\n")
        if args.json:
            _emit_json(args, {"tool": "tiltcheck", "version": __version__, "status": "infeasible",
                              "active": labels(act.active), "cqs": None})
        return EXIT_PRECONDITION
    cqs = cq_suite(problem, pd, act, part, cfg)
    if args.json:
        _emit_json(args, {"tool": "tiltcheck", "version": __version__, "status": "ok",
                          "active": labels(act.active), "cqs": cq_to_dict(cqs),
                          "config": cfg.to_dict()})
    if _text_wanted(args):
        lines = [f"active inequalities {_set(act.active)}"] + _cq_lines(cqs)
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_oracle(args) -> int:
    problem, _ = _load(args)
    cfg = _config(args)
    pd = eval_point(problem)
    if not active_set(pd, cfg.active_tol).feasible:
        sys.stderr.write("tiltcheck: the reference point is infeasible\n")
        return EXIT_PRECONDITION
    rep = tilt_probe(problem, cfg.oracle)
    if args.json:
        d = oracle_to_dict(rep)
        d = {"tool": "tiltcheck", "version": __version__, **d}
        _emit_json(args, d)
    if _text_wanted(args):
        sys.stdout.write(render_oracle(rep))
    return EXIT_OK


def _select(rep: StabilityReport, args):
    """Multiplier, flat direction and unit critical direction for the construction."""
    if rep.status != "ok":
        raise PerturbationError(rep.reason)
    lam, w, v = args.multiplier, args.w, args.v
    if lam is not None or w is not None or v is not None:
        if lam is None or w is None or v is None:
            raise UsageError("--multiplier, --w and --v must be given together")
        return lam, w, v
    lbe, suf = rep.lambda_bar, rep.sufficiency
    if not lbe.entries:
        raise PerturbationError("the set of extreme directional multipliers is empty")
    for r in suf.records:
        if r.witness is None or r.min_eig > rep.config.strict_tol:
            continue
        for mu, dirs in lbe.entries:
            if dirs and np.allclose(mu, r.multiplier, atol=1e-9):
                return r.multiplier, r.witness, dirs[0] / np.linalg.norm(dirs[0])
    raise PerturbationError("no extreme directional multiplier has a nonpositive reduced curvature")


def cmd_perturb(args) -> int:
    problem, name = _load(args)
    cfg = _config(args)
    rep = analyze(problem, cfg)
    try:
        lam, w, v = _select(rep, args)
        pp = perturb_problem(problem, rep.point, rep.active, lam, w, v, cfg,
                             soscms_ok=rep.cqs.soscms.ok)
    except PerturbationError as err:
        sys.stderr.write(f"tiltcheck: construction not possible: {err}\n")
        return EXIT_PRECONDITION
    out = Path(args.output) if args.output else Path(f"{name}_perturbed.nlp")
    header = f"modified constraints {', '.join(problem.constraint_name(i) for i in pp.modified)} of {name}"
    out.write_text(format_problem(pp.problem, header), encoding="utf-8")
    match = "PASS" if pp.matches else "FAIL"
    if args.json:
        _emit_json(args, {"tool": "tiltcheck", "version": __version__, "output": str(out),
                          "multiplier": pp.multiplier, "w": pp.witness, "quadratic": pp.quadratic,
                          "v": pp.v, "zTilde": pp.z_tilde, "alpha": pp.alpha, "z": pp.z,
                          "slope": pp.slope, "r": pp.radius, "strictSet": labels(pp.i_plus),
                          "iHat": labels(pp.i_hat), "modified": labels(pp.modified),
                          "secondOrderMatch": {**pp.match, "pass": pp.matches},
                          "warnings": pp.warnings})
    if _text_wanted(args):
        lines = [f"multiplier {_fmt(pp.multiplier)}, w {_fmt(pp.witness)}, "
                 f"quadratic {_fmt(pp.quadratic)}",
                 f"v {_fmt(pp.v)}", f"z {_fmt(pp.z)} (alpha {_fmt(pp.alpha)})",
                 f"r {_fmt(pp.radius)}", f"I-hat {_set(pp.i_hat)}",
                 f"modified constraints {_set(pp.modified)}",
                 f"second-order match: {match} (max error {_fmt(pp.match['max_error'], 3)})",
                 f"wrote {out}"]
        lines += [f"warning: {m}" for m in pp.warnings]
        sys.stdout.write("\n".join(lines) + "\n")
    return EXIT_OK


def cmd_corpus(args) -> int:
    if args.name is None:
        if args.emit:
            raise UsageError("--emit needs an example name")
        entries = [{"name": n, "title": corpus.metadata(n)["title"],
                    "params": corpus.metadata(n)["params"]} for n in corpus.names()]
        if args.json:
            _emit_json(args, entries)
        if args.json != "-":
            for e in entries:
                params = ", ".join(f"{k}={_fmt(v)}" for k, v in e["params"].items())
                sys.stdout.write(f"{e['name']:<7}{e['title']}" + (f" [{params}]" if params else "") + "\n")
        return EXIT_OK
    if args.name not in corpus.names():
        raise UsageError(f"unknown corpus entry {args.name!r}; available: {', '.join(corpus.names())}")
    if args.emit:
        nlp, meta = corpus.emit(args.name, args.emit)
        sys.stdout.write(f"wrote {nlp}\nwrote {meta}\n")
    else:
        if args.json:
            _emit_json(args, corpus.metadata(args.name))
        if args.json != "-":
            sys.stdout.write(corpus.text(args.name))
    return EXIT_OK


COMMANDS = {"analyze": cmd_analyze, "cqs": cmd_cqs, "oracle": cmd_oracle,
            "perturb": cmd_perturb, "corpus": cmd_corpus}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except ParseError as err:
        sys.stderr.write(f"tiltcheck: {args.file}:{err.line}:{err.column}: {err.message}\n")
    except (UsageError, ProblemFormatError, DomainError, OSError, ValueError) as err:
        sys.stderr.write(f"tiltcheck: {err}\n")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
