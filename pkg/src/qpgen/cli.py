"""Command-line entry point: ``qpgen <subcommand> ...``.

Exit codes: 0 pass/ok, 2 usage or input error, 3 fail verdict,
4 inconclusive, 5 spectral gaps found.
"""
import argparse
import datetime as _dt
import hashlib
import json
import os
import sys

from . import __version__
from .kernels import BACKEND
from .potential import CoefficientFileError, dimension_count, load_coefficients

EXIT_OK, EXIT_USAGE, EXIT_FAIL, EXIT_INCONCLUSIVE, EXIT_GAPS = 0, 2, 3, 4, 5
VERDICT_EXIT = {"pass": EXIT_OK, "fail": EXIT_FAIL, "inconclusive": EXIT_INCONCLUSIVE}
DEFAULT_RUNS = "runs"


class UsageError(Exception):
    pass


def canonical_json(obj):
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), allow_nan=False)


def config_hash(config):
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


class RunDir:
    """Output directory ``<base>/<UTC timestamp>-<config hash prefix>`` plus manifest."""

    def __init__(self, base, command, config, seed):
        self.command = command
        self.config = config
        self.hash = config_hash(config)
        self.seed = seed
        self.started = _dt.datetime.now(_dt.timezone.utc)
        stem = f"{self.started:%Y%m%dT%H%M%SZ}-{self.hash[:12]}"
        path = os.path.join(base, stem)
        k = 1
        while os.path.exists(path):
            path = os.path.join(base, f"{stem}-{k}")
            k += 1
        os.makedirs(path)
        self.path = path
        self.outputs = []

    def file(self, name):
        p = os.path.join(self.path, name)
        self.outputs.append(p)
        return p

    def write_json(self, name, obj):
        with open(self.file(name), "w") as fh:
            json.dump(obj, fh, indent=2, sort_keys=True)
            fh.write("\n")

    def finish(self, extra=None):
        manifest = {
            "command": self.command, "config": self.config, "config_hash": self.hash,
            "master_seed": self.seed, "tool_version": __version__, "backend": BACKEND,
            "output_paths": list(self.outputs),
            "start": self.started.isoformat(),
            "end": _dt.datetime.now(_dt.timezone.utc).isoformat(),
        }
        manifest.update(extra or {})
        with open(os.path.join(self.path, "manifest.json"), "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True)
            fh.write("\n")
        return manifest


def _load_potential(path):
    try:
        return load_coefficients(path)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except CoefficientFileError as exc:
        raise UsageError(f"{path}: {exc}") from None


def _load_json(path):
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except OSError as exc:
        raise UsageError(f"{path}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise UsageError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise UsageError(f"{path}: top level must be a JSON object")
    return obj


def _floats(text):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _ints(text):
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _emit(obj, fmt, csv_text=None):
    if fmt == "csv" and csv_text is not None:
        sys.stdout.write(csv_text)
    else:
        sys.stdout.write(json.dumps(obj, indent=2, sort_keys=True) + "\n")


def _potential_ref(V):
    return {"d": V.shape.d, "n": V.shape.n, "coefficients": [float(c) for c in V.coefficients]}


# --- subcommands -------------------------------------------------------------

def cmd_dim(args):
    try:
        N = dimension_count(args.d, args.n)
    except (ValueError, OverflowError) as exc:
        raise UsageError(str(exc)) from None
    print(N)
    if args.out_dir:
        run = RunDir(args.out_dir, "dim", {"d": args.d, "n": args.n}, args.seed)
        run.write_json("dim.json", {"d": args.d, "n": args.n, "N": N})
        run.finish()
    return EXIT_OK


def _classify_options(args, seed):
    from .cartan import SweepGrids
    from .survey import ClassifyOptions
    return ClassifyOptions(cartan=not args.no_cartan, K_list=tuple(args.K), c1=args.c1,
                           grids=SweepGrids(args.h_count, args.eta_count, args.h0_count),
                           samples=args.samples, seed=seed)


def cmd_classify(args):
    from .survey import classify_potential
    V = _load_potential(args.coeff_file)
    seed = args.seed or 0
    opts = _classify_options(args, seed)
    try:
        rep = classify_potential(V, opts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    out = rep.to_dict()
    _emit(out, "json")
    if args.out_dir:
        cfg = {"potential": _potential_ref(V), "K": list(opts.K_list), "c1": opts.c1,
               "cartan": opts.cartan, "samples": opts.samples,
               "grids": [opts.grids.h_count, opts.grids.eta_count, opts.grids.h0_count]}
        run = RunDir(args.out_dir, "classify", cfg, seed)
        run.write_json("greport.json", out)
        run.finish({"verdict": rep.in_class_G})
    return VERDICT_EXIT[rep.in_class_G]


def cmd_spectrum(args):
    from . import spectrum as sp
    V = _load_potential(args.coeff_file)
    seed = args.seed or 0
    try:
        cfg = sp.OperatorConfig(V, args.omega, args.lam, require_diophantine=not args.skip_dio)
        est = sp.approximate_spectrum(cfg, args.L, args.phases, seed, mode=args.mode,
                                      threads=args.threads)
        sp.analyze_gaps(est, args.resolution, boundary_filter=args.filter)
    except ValueError as exc:  # includes the Diophantine rejection
        raise UsageError(str(exc)) from None
    report = sp.gap_report(est, cfg)
    report["skip_dio"] = bool(args.skip_dio)
    config = {"potential": _potential_ref(V), "lambda": args.lam, "omega": list(args.omega),
              "L": args.L, "phases": args.phases, "resolution": args.resolution,
              "mode": args.mode, "filter": args.filter, "skip_dio": bool(args.skip_dio),
              "seed": seed}
    run = RunDir(args.out_dir or DEFAULT_RUNS, "spectrum", config, seed)
    with open(run.file("gaps.json"), "w") as fh:
        json.dump(report, fh, indent=2)
        fh.write("\n")
    sp.write_spectrum_csv(est, run.file("spectrum.csv"))
    run.finish({"skip_dio": bool(args.skip_dio), "is_interval": bool(est.is_interval)})
    _emit(report | {"run_dir": run.path}, "json")
    return EXIT_OK if est.is_interval else EXIT_GAPS


_SURVEY_KEYS = {"d", "n", "distribution", "sample_count", "master_seed", "cartan", "K", "c1",
                "grids", "mc_samples", "morse", "spectrum"}


def survey_config_from_dict(obj, seed_override=None):
    """Build a :class:`~qpgen.survey.SurveyConfig` from the JSON schema::

        {"d": 2, "n": 2, "sample_count": 200, "master_seed": 0,
         "distribution": {"kind": "gaussian", "scale": 1.0},
         "cartan": false, "K": [2, 3, 4], "c1": 0.3, "mc_samples": 100000,
         "grids": {"h_count": 64, "eta_count": 32, "h0_count": 32},
         "morse": {"grid_per_axis": null, ...},
         "spectrum": {"lam": 5.0, "omega": [0.618], "L": 500, "phases": 10}}

    Only ``d`` and ``n`` are required.  Returns ``(config, merged_dict)``.
    """
    from .cartan import SweepGrids
    from .morse import MorseOptions
    from .potential import PotentialShape
    from .survey import ClassifyOptions, Distribution, SpectrumOptions, SurveyConfig

    unknown = set(obj) - _SURVEY_KEYS
    if unknown:
        raise UsageError(f"unknown survey config field(s): {', '.join(sorted(unknown))}")
    for key in ("d", "n"):
        if key not in obj:
            raise UsageError(f"survey config: missing field {key!r}")
    merged = dict(obj)
    if seed_override is not None:
        merged["master_seed"] = seed_override
    merged.setdefault("master_seed", 0)
    merged.setdefault("sample_count", 100)
    merged.setdefault("distribution", {"kind": "gaussian", "scale": 1.0})
    merged.setdefault("cartan", True)
    merged.setdefault("K", list(range(2, 11)))
    merged.setdefault("c1", 0.3)
    merged.setdefault("mc_samples", 100_000)
    merged["grids"] = {"h_count": 64, "eta_count": 32, "h0_count": 32, **merged.get("grids", {})}
    merged.setdefault("morse", {})
    try:
        copts = ClassifyOptions(
            morse=MorseOptions(**merged["morse"]), cartan=bool(merged["cartan"]),
            K_list=tuple(merged["K"]), c1=float(merged["c1"]), grids=SweepGrids(**merged["grids"]),
            samples=int(merged["mc_samples"]))
        spec = merged.get("spectrum")
        cfg = SurveyConfig(
            shape=PotentialShape(merged["d"], merged["n"]),
            distribution=Distribution(**merged["distribution"]),
            sample_count=int(merged["sample_count"]), master_seed=int(merged["master_seed"]),
            classify=copts, spectrum=SpectrumOptions(**spec) if spec else None)
    except (TypeError, ValueError, OverflowError) as exc:
        raise UsageError(f"survey config: {exc}") from None
    return cfg, merged


def cmd_survey(args):
    from .survey import run_survey
    cfg, merged = survey_config_from_dict(_load_json(args.config_file), args.seed)
    res = run_survey(cfg, threads=args.threads)
    run = RunDir(args.out_dir or DEFAULT_RUNS, "survey", merged, cfg.master_seed)
    res.write_csv(run.file("survey.csv"))
    run.write_json("summary.json", res.summary())
    run.finish({"start": res.manifest["start"], "survey_end": res.manifest["end"],
                "shape": {"d": cfg.shape.d, "n": cfg.shape.n, "N": cfg.shape.N}})
    _emit(res.summary() | {"run_dir": run.path}, args.format, res.csv_text())
    return EXIT_OK


def cmd_cartan(args):
    import io
    from .cartan import Sampler, SweepGrids, cartan_sweep
    V = _load_potential(args.coeff_file)
    seed = args.seed or 0
    grids = SweepGrids(args.h_count, args.eta_count, args.h0_count)
    pair = tuple(args.pair) if args.pair else None
    if pair is not None and len(pair) != 2:
        raise UsageError("--pair takes two axis indices, e.g. 0,1")
    try:
        table = cartan_sweep(V, args.kind, args.K, grids, Sampler(args.samples, seed), args.c1,
                             pair=pair)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    config = {"potential": _potential_ref(V), "kind": args.kind, "K": list(args.K),
              "c1": args.c1, "samples": args.samples, "pair": list(pair) if pair else None,
              "grids": [grids.h_count, grids.eta_count, grids.h0_count], "seed": seed}
    run = RunDir(args.out_dir or DEFAULT_RUNS, "cartan", config, seed)
    table.write_csv(run.file("decay.csv"))
    run.write_json("decay.json", table.to_dict())
    run.finish({"verdict": table.verdict})
    buf = io.StringIO()
    table.write_rows(buf)
    _emit(table.to_dict() | {"run_dir": run.path}, args.format, buf.getvalue())
    return VERDICT_EXIT[table.verdict]


def cmd_slice(args):
    from .survey import line_slice
    if args.steps < 10:
        raise UsageError("--steps must be >= 10")
    a = _load_potential(args.start_file)
    b = _load_potential(args.end_file)
    if a.shape != b.shape:
        raise UsageError("start and end potentials must share d and n")
    res = line_slice(a, b, args.steps)
    config = {"start": _potential_ref(a), "end": _potential_ref(b), "steps": args.steps}
    run = RunDir(args.out_dir or DEFAULT_RUNS, "slice", config, args.seed)
    out = res.to_dict()
    run.write_json("slice.json", out)
    with open(run.file("slice.csv"), "w") as fh:
        fh.write("t,fails\n")
        for t, f in zip(res.t, res.failing):
            fh.write(f"{t!r},{'true' if f else 'false'}\n")
    run.finish()
    _emit(out | {"run_dir": run.path}, "json")
    return EXIT_OK


# --- parser --------------------------------------------------------------------

def _add_classify_flags(p):
    p.add_argument("--K", type=_floats, default=list(range(2, 11)),
                   help="comma-separated ascending K values (default 2..10)")
    p.add_argument("--c1", type=float, default=0.3)
    p.add_argument("--samples", type=int, default=100_000, help="Monte-Carlo samples")
    p.add_argument("--h-count", type=int, default=64)
    p.add_argument("--eta-count", type=int, default=32)
    p.add_argument("--h0-count", type=int, default=32)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None, help="master seed")
    common.add_argument("--threads", type=int, default=1, help="worker cap")
    common.add_argument("--out-dir", default=None, help=f"run directory base (default ./{DEFAULT_RUNS})")
    common.add_argument("--format", choices=("json", "csv"), default="json", help="stdout format")

    ap = argparse.ArgumentParser(prog="qpgen", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dim", parents=[common], help="real dimension N of the coefficient space")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--n", type=int, required=True)
    p.set_defaults(func=cmd_dim)

    p = sub.add_parser("classify", parents=[common], help="check all four conditions")
    p.add_argument("coeff_file")
    _add_classify_flags(p)
    p.add_argument("--no-cartan", action="store_true", help="skip the sublevel-measure sweeps")
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("spectrum", parents=[common], help="finite-volume spectrum and gaps")
    p.add_argument("coeff_file")
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--omega", type=_floats, required=True, help="comma-separated frequencies")
    p.add_argument("--L", type=int, default=1000)
    p.add_argument("--phases", type=int, default=20)
    p.add_argument("--resolution", type=float, default=None)
    p.add_argument("--mode", choices=("phases", "orbit"), default="phases")
    p.add_argument("--filter", choices=("consensus", "none"), default="consensus",
                   help="boundary-state filter applied before gap detection")
    p.add_argument("--skip-dio", action="store_true", help="skip the Diophantine check")
    p.set_defaults(func=cmd_spectrum)

    p = sub.add_parser("survey", parents=[common], help="randomized survey from a JSON config")
    p.add_argument("config_file")
    p.set_defaults(func=cmd_survey)

    p = sub.add_parser("cartan", parents=[common], help="sublevel-measure decay sweep")
    p.add_argument("coeff_file")
    p.add_argument("--kind", choices=("condition3", "condition4"), default="condition4")
    _add_classify_flags(p)
    p.add_argument("--pair", type=_ints, default=None, help="axis pair i,j (default: min over pairs)")
    p.set_defaults(func=cmd_cartan)

    p = sub.add_parser("slice", parents=[common], help="classify a straight coefficient path")
    p.add_argument("start_file")
    p.add_argument("end_file")
    p.add_argument("--steps", type=int, default=100)
    p.set_defaults(func=cmd_slice)
    return ap


def main(argv=None):
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.threads < 1:
        ap.error("--threads must be >= 1")
    try:
        return args.func(args)
    except UsageError as exc:
        sub = ap._subparsers._group_actions[0].choices[args.command]
        sub.print_usage(sys.stderr)
        print(f"qpgen {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
