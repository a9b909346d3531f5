"""Command-line interface: ``cudbound {gen,ci,coverage}``.

Exit codes: 0 success (flagged method cells included), 2 usage or
configuration error, 3 I/O error.
"""

import argparse
import datetime as _dt
import json
import sys
from pathlib import Path

from . import __version__
from ._validation import ParameterError
from .baselines import CONSTRUCTORS, BaselineConfig
from .cud import CudConfig, cud_interval
from .dataset import DataFormatError, SimSpec, generate_simulated, load_csv, write_csv
from .harness import (
    ALL_METHODS,
    SCHEMA_VERSION,
    ExperimentConfig,
    canonical_method,
    format_report,
    kurtosis_csv,
    run_coverage_experiment,
)
from .model import BasisExpansion

EXIT_OK, EXIT_USAGE, EXIT_IO = 0, 2, 3
DEFAULT_SEED = 20240101


class UsageError(Exception):
    pass


def _now():
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


def _parse_params(items):
    out = {}
    for item in items or ():
        key, sep, value = item.partition("=")
        if not sep:
            raise UsageError(f"--param expects key=value, got {item!r}")
        try:
            out[key] = json.loads(value)
        except json.JSONDecodeError:
            out[key] = value
        if isinstance(out[key], list):
            out[key] = tuple(out[key])
    return out


def _write_manifest(path, command, config, seed, outputs, started):
    manifest = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "schema_version": SCHEMA_VERSION,
        "started": started,
        "finished": _now(),
        "outputs": [str(p) for p in outputs],
    }
    Path(path).write_text(json.dumps(manifest, sort_keys=True, indent=2) + "\n")


def cmd_gen(args):
    started = _now()
    spec = SimSpec(args.family, _parse_params(args.param))
    seed = DEFAULT_SEED if args.seed is None else args.seed
    data = generate_simulated(spec, args.n, seed)
    if args.out is None:
        write_csv(data, sys.stdout)
        return EXIT_OK
    out = Path(args.out)
    write_csv(data, out)
    config = {"family": spec.family, "params": {k: list(v) if isinstance(v, tuple) else v
                                                for k, v in spec.resolved().items()}, "n": args.n}
    _write_manifest(out.with_name(out.name + ".manifest.json"), "gen", config, seed, [out], started)
    return EXIT_OK


def _load_data(args):
    if args.data:
        return load_csv(args.data, _label_column(args.label_column), args.positive_label)
    if args.family:
        seed = DEFAULT_SEED if args.seed is None else args.seed
        return generate_simulated(SimSpec(args.family), args.n or 30, seed)
    raise UsageError("give --data FILE or --family NAME")


def _label_column(value):
    try:
        return int(value)
    except (TypeError, ValueError):
        return value


def cmd_ci(args):
    method = canonical_method(args.method)
    data = _load_data(args)
    seed = DEFAULT_SEED if args.seed is None else args.seed
    basis = args.basis or "affine"
    BasisExpansion.from_string(basis)
    delta = 0.05 if args.delta is None else args.delta
    if method == "CUD":
        kw = {"delta": delta, "alpha_n": args.alpha_n}
        if args.b is not None:
            kw["n_bootstrap"] = args.b
        ci = cud_interval(data, basis, CudConfig(**kw), seed)
    else:
        kw = {"delta": delta}
        if args.b is not None:
            kw["n_bootstrap"] = args.b
        ci = CONSTRUCTORS[method](data, basis, BaselineConfig(**kw), seed)
    if args.json:
        print(json.dumps(ci.to_dict(), sort_keys=True))
    else:
        flags = ",".join(ci.flags) or "-"
        print(f"method={ci.method} center={ci.center:.6f} lower={ci.lower:.6f} upper={ci.upper:.6f} "
              f"half_width={ci.half_width:.6f} level={ci.level:.4f} flags={flags}")
    return EXIT_OK


def _experiment_configs(args):
    base = {}
    if args.config:
        try:
            base = json.loads(Path(args.config).read_text())
        except json.JSONDecodeError as exc:
            raise UsageError(f"{args.config}: invalid JSON ({exc})") from None
        if not isinstance(base, dict):
            raise UsageError(f"{args.config}: expected a JSON object")
    overrides = {
        "n_train": args.n_train,
        "reps": args.reps,
        "delta": args.delta,
        "seed": args.seed,
        "truth_size": args.truth_size,
        "basis": args.basis,
        "data_path": args.data,
    }
    base.update({k: v for k, v in overrides.items() if v is not None})
    if args.data:
        base["label_column"] = _label_column(args.label_column)
        base["positive_label"] = args.positive_label
    if args.methods:
        base["methods"] = [canonical_method(m) for m in args.methods.split(",") if m.strip()]
    base.setdefault("seed", DEFAULT_SEED)
    cud = dict(base.get("cud", {}))
    if args.b is not None:
        cud["n_bootstrap"] = args.b
        base["baseline"] = {**base.get("baseline", {}), "n_bootstrap": args.b}
    if args.alpha_n is not None:
        cud["alpha_n"] = args.alpha_n
    base["cud"] = cud
    families = [base.pop("family", "threepoints")] if args.family is None else args.family.split(",")
    try:
        if base.get("data_path"):
            return [ExperimentConfig.from_dict(base)]
        return [ExperimentConfig.from_dict({**base, "family": f.strip()}) for f in families]
    except TypeError as exc:
        raise UsageError(f"bad configuration: {exc}") from None


def cmd_coverage(args):
    started = _now()
    configs = _experiment_configs(args)
    reports = [run_coverage_experiment(c, workers=args.workers, progress=args.progress) for c in configs]
    table = format_report(reports)
    docs = [r.to_dict() for r in reports]
    payload = docs[0] if len(docs) == 1 else {"schema_version": SCHEMA_VERSION, "reports": docs}
    text = json.dumps(payload, sort_keys=True, indent=2) + "\n"
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        files = [out / "report.json", out / "table.txt", out / "kurtosis.csv"]
        files[0].write_text(text)
        files[1].write_text(table)
        files[2].write_text(kurtosis_csv(reports))
        cfg = [c.to_dict() for c in configs]
        _write_manifest(out / "manifest.json", "coverage", cfg if len(cfg) > 1 else cfg[0],
                        configs[0].seed, files, started)
    if args.json:
        sys.stdout.write(text)
    else:
        sys.stdout.write(table)
    return EXIT_OK


def build_parser():
    parser = argparse.ArgumentParser(prog="cudbound", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    gen = sub.add_parser("gen", help="write a simulated dataset as CSV")
    gen.add_argument("--family", required=True)
    gen.add_argument("--n", type=int, required=True)
    gen.add_argument("--seed", type=int)
    gen.add_argument("--param", action="append", metavar="KEY=VALUE", help="override a family parameter")
    gen.add_argument("--out")
    gen.set_defaults(func=cmd_gen)

    def common(p):
        p.add_argument("--data", help="CSV dataset")
        p.add_argument("--label-column", default="-1")
        p.add_argument("--positive-label", default="1")
        p.add_argument("--delta", type=float)
        p.add_argument("--b", type=int, help="bootstrap replicates")
        p.add_argument("--alpha-n", type=float)
        p.add_argument("--basis", help="affine, poly:<deg> or pca:<k>")
        p.add_argument("--seed", type=int)
        p.add_argument("--json", action="store_true")

    ci = sub.add_parser("ci", help="one confidence interval")
    common(ci)
    ci.add_argument("--method", required=True, help="cud, bs1, bs2, k, y, m or l")
    ci.add_argument("--family")
    ci.add_argument("--n", type=int)
    ci.set_defaults(func=cmd_ci)

    cov = sub.add_parser("coverage", help="Monte-Carlo coverage experiment")
    common(cov)
    cov.add_argument("--family", help="one or more comma-separated families")
    cov.add_argument("--n-train", type=int)
    cov.add_argument("--reps", type=int)
    cov.add_argument("--truth-size", type=int)
    cov.add_argument("--methods", help=f"comma-separated subset of {','.join(m.lower() for m in ALL_METHODS)}")
    cov.add_argument("--workers", type=int, default=1)
    cov.add_argument("--config", help="JSON experiment configuration")
    cov.add_argument("--out", help="directory for report.json, table.txt, kurtosis.csv, manifest.json")
    cov.add_argument("--progress", action="store_true", help="per-repetition counter on stderr")
    cov.set_defaults(func=cmd_coverage)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (DataFormatError, OSError) as exc:
        print(f"cudbound: error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (UsageError, ParameterError, ValueError) as exc:
        print(f"cudbound: error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
