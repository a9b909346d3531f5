"""Monte-Carlo coverage experiments.

One repetition draws a training set (simulated, or a random split of a CSV
dataset), fits the least-squares sign rule, takes its error on a large
held-out set as the truth, and asks every method for a confidence interval
built from the training set alone. Coverage is the fraction of repetitions
whose closed interval contains the truth; diameter is ``upper - lower``.

Every random stream is derived from ``(root seed, repetition, purpose)``, so
reports are identical no matter how repetitions are spread over workers.
"""

import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import lru_cache
from pathlib import Path

import numpy as np
from sklearn.preprocessing import StandardScaler

from ._seeding import derive_seed
from ._validation import ParameterError, check_delta, check_positive_int
from .baselines import METHODS as BASELINE_METHODS
from .baselines import BaselineConfig, all_baselines
from .cud import CudConfig, cud_interval
from .dataset import RECOMMENDED_BASIS, Dataset, SimSpec, generate_simulated, load_csv, split
from .model import BasisExpansion, LeastSquaresClassifier

ALL_METHODS = ("CUD", "BS1", "BS2", "K", "M", "Y", "L")
SCHEMA_VERSION = 1


def canonical_method(name):
    key = str(name).strip().upper()
    if key not in ALL_METHODS:
        raise ParameterError(f"unknown method {name!r}; choose from {', '.join(ALL_METHODS)}")
    return key


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a coverage report.

    Exactly one of ``family`` (a simulated family) and ``data_path`` (a CSV
    file) is used; ``data_path`` wins when both are set. ``delta`` overrides
    the ``delta`` of the nested CUD and baseline configurations. ``basis``
    ``"auto"`` picks the family's recommended basis (``affine`` for CSV data).
    """

    family: str = "threepoints"
    sim_params: dict = field(default_factory=dict)
    data_path: str = None
    label_column: object = -1
    positive_label: object = 1
    n_train: int = 30
    reps: int = 200
    truth_size: int = 5000
    delta: float = 0.05
    methods: tuple = ALL_METHODS
    seed: int = 0
    basis: str = "auto"
    standardize: bool = True
    cud: CudConfig = field(default_factory=CudConfig)
    baseline: BaselineConfig = field(default_factory=BaselineConfig)

    def __post_init__(self):
        check_positive_int(self.n_train, "n_train")
        check_positive_int(self.reps, "reps")
        check_positive_int(self.truth_size, "truth_size")
        check_delta(self.delta)
        if not self.methods:
            raise ParameterError("method list must be nonempty")
        object.__setattr__(self, "methods", tuple(self.methods))
        if self.data_path is None:
            SimSpec(self.family, dict(self.sim_params))
        if self.basis != "auto":
            BasisExpansion.from_string(self.basis)
        if isinstance(self.cud, dict):
            object.__setattr__(self, "cud", CudConfig(**self.cud))
        if isinstance(self.baseline, dict):
            b = dict(self.baseline)
            if "prior" in b:
                b["prior"] = tuple(b["prior"])
            object.__setattr__(self, "baseline", BaselineConfig(**b))

    @property
    def dataset_name(self):
        return Path(self.data_path).stem if self.data_path else SimSpec(self.family).family

    def resolved_basis(self):
        if self.basis != "auto":
            return self.basis
        return "affine" if self.data_path else RECOMMENDED_BASIS[SimSpec(self.family).family]

    def cud_config(self):
        return replace(self.cud, delta=self.delta)

    def baseline_config(self):
        return replace(self.baseline, delta=self.delta)

    def to_dict(self):
        d = asdict(self)
        d["methods"] = list(self.methods)
        d["baseline"]["prior"] = list(self.baseline.prior)
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        if "methods" in d:
            d["methods"] = tuple(d["methods"])
        return cls(**d)


@lru_cache(maxsize=8)
def _load(path, label_column, positive_label):
    return load_csv(path, label_column, positive_label)


def _partitions(cfg, rep_seed):
    if cfg.data_path:
        data = _load(cfg.data_path, cfg.label_column, cfg.positive_label)
        return split(data, cfg.n_train, derive_seed(rep_seed, "split"))
    spec = SimSpec(cfg.family, dict(cfg.sim_params))
    train = generate_simulated(spec, cfg.n_train, derive_seed(rep_seed, "train"))
    test = generate_simulated(spec, cfg.truth_size, derive_seed(rep_seed, "truth"))
    return train, test


def _standardize(train, test):
    scaler = StandardScaler().fit(train.features)
    return (
        Dataset(scaler.transform(train.features), train.labels),
        Dataset(scaler.transform(test.features), test.labels),
    )


def _builtin_intervals(cfg, train, basis, rep_seed, names):
    out = {}
    if "CUD" in names:
        try:
            out["CUD"] = cud_interval(train, basis, cfg.cud_config(), derive_seed(rep_seed, "CUD"))
        except Exception as exc:  # recorded, the repetition continues
            out["CUD"] = exc
    wanted = tuple(m for m in BASELINE_METHODS if m in names)
    if wanted:
        bseed = derive_seed(rep_seed, "baselines")
        try:
            out.update(all_baselines(train, basis, cfg.baseline_config(), bseed, wanted))
        except Exception:
            # isolate the failing method(s)
            for m in wanted:
                try:
                    out.update(all_baselines(train, basis, cfg.baseline_config(), bseed, (m,)))
                except Exception as exc:
                    out[m] = exc
    return out


def run_repetition(cfg, rep_index, extra_methods=None):
    """Run one repetition; returns a list of per-method record dicts.

    ``extra_methods`` maps a name to a callable ``(train, basis, seed) ->
    ConfidenceInterval``; the callable only ever sees the training set.
    """
    extra_methods = extra_methods or {}
    rep_seed = derive_seed(cfg.seed, "rep", rep_index)
    train, test = _partitions(cfg, rep_seed)
    if cfg.standardize:
        train, test = _standardize(train, test)
    basis = cfg.resolved_basis()
    clf = LeastSquaresClassifier(basis).fit(train.features, train.labels)
    truth = clf.error(test.features, test.labels)
    training_error = clf.error(train.features, train.labels)

    names = [m for m in cfg.methods if m not in extra_methods]
    results = _builtin_intervals(cfg, train, basis, rep_seed, {canonical_method(m) for m in names})
    records = []
    for name in cfg.methods:
        if name in extra_methods:
            try:
                res = extra_methods[name](train, basis, derive_seed(rep_seed, name))
            except Exception as exc:
                res = exc
        else:
            res = results[canonical_method(name)]
        rec = {"rep": rep_index, "method": name, "truth": truth, "training_error": training_error}
        if isinstance(res, Exception):
            rec["error"] = f"{type(res).__name__}: {res}"
        else:
            rec.update(
                lower=res.lower,
                upper=res.upper,
                center=res.center,
                half_width=res.half_width,
                flags=list(res.flags),
                covered=bool(res.lower <= truth <= res.upper),
                diameter=res.upper - res.lower,
            )
        records.append(rec)
    return records


def kurtosis(values):
    """Excess kurtosis ``m4 / m2^2 - 3`` from central sample moments; ``nan`` when the variance is 0."""
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size < 4:
        raise ValueError(f"kurtosis needs at least 4 values, got {v.size}")
    c = v - v.mean()
    m2 = np.mean(c**2)
    if m2 <= 1e-300:
        return math.nan
    return float(np.mean(c**4) / m2**2 - 3.0)


@dataclass(frozen=True, eq=False)
class CoverageReport:
    config: dict
    methods: tuple
    records: list
    dataset: str = ""

    @property
    def training_errors(self):
        seen = {}
        for r in self.records:
            seen.setdefault(r["rep"], r["training_error"])
        return np.array([seen[k] for k in sorted(seen)])

    def kurtosis(self):
        errs = self.training_errors
        if errs.size < 4:
            return {"value": None, "flag": "too_few_repetitions"}
        k = kurtosis(errs)
        if math.isnan(k):
            return {"value": None, "flag": "undefined_zero_variance"}
        return {"value": k, "flag": None}

    def summary(self):
        out = {}
        for m in self.methods:
            recs = [r for r in self.records if r["method"] == m]
            ok = [r for r in recs if "error" not in r]
            flags = {}
            for r in ok:
                for f in r["flags"]:
                    flags[f] = flags.get(f, 0) + 1
            if recs and len(ok) < len(recs):
                flags["failed"] = len(recs) - len(ok)
            out[m] = {
                "coverage": float(np.mean([r["covered"] for r in ok])) if ok else None,
                "mean_diameter": float(np.mean([r["diameter"] for r in ok])) if ok else None,
                "flags": flags,
                "n": len(ok),
            }
        return out

    def to_dict(self):
        return {
            "schema_version": SCHEMA_VERSION,
            "dataset": self.dataset,
            "config": self.config,
            "per_method": self.summary(),
            "per_rep": self.records,
            "kurtosis": self.kurtosis(),
        }

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True, indent=2) + "\n"

    def kurtosis_rows(self):
        k = self.kurtosis()["value"]
        return [(self.dataset, k, m, s["coverage"]) for m, s in self.summary().items()]


def run_coverage_experiment(cfg, workers=1, extra_methods=None, progress=False):
    """Aggregate :func:`run_repetition` over ``cfg.reps`` repetitions.

    ``workers > 1`` spreads repetitions over processes; records are merged
    by repetition index, so the report does not depend on scheduling.
    ``extra_methods`` must be picklable when ``workers > 1``.
    """
    workers = check_positive_int(workers, "workers")
    reps = range(cfg.reps)
    by_rep = {}
    if workers == 1:
        for i in reps:
            by_rep[i] = run_repetition(cfg, i, extra_methods)
            if progress:
                print(f"repetition {i + 1}/{cfg.reps}", file=sys.stderr)
    else:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = {i: pool.submit(run_repetition, cfg, i, extra_methods) for i in reps}
            for i in reps:
                by_rep[i] = futures[i].result()
                if progress:
                    print(f"repetition {i + 1}/{cfg.reps}", file=sys.stderr)
    records = [r for i in sorted(by_rep) for r in by_rep[i]]
    return CoverageReport(cfg.to_dict(), tuple(cfg.methods), records, cfg.dataset_name)


def _cell(value, flagged):
    text = "-" if value is None else f"{value:.3f}"
    return text + ("*" if flagged else " ")


def format_table(reports, metric="coverage"):
    """Aligned text table, one row per report (dataset) and one column per method.

    Cells marked ``*`` had failed repetitions or method flags.
    """
    methods = []
    for rep in reports:
        for m in rep.methods:
            if m not in methods:
                methods.append(m)
    width = max([7] + [len(r.dataset) for r in reports])
    lines = [f"{metric}".ljust(width) + "".join(f"{m:>9}" for m in methods)]
    for rep in reports:
        s = rep.summary()
        cells = []
        for m in methods:
            if m not in s:
                cells.append(f"{'':>9}")
                continue
            cells.append(f"{_cell(s[m][metric], bool(s[m]['flags'])):>9}")
        lines.append(rep.dataset.ljust(width) + "".join(cells))
    return "\n".join(lines) + "\n"


def format_report(reports):
    return format_table(reports, "coverage") + "\n" + format_table(reports, "mean_diameter")


def kurtosis_csv(reports):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["dataset", "kurtosis", "method", "coverage"])
    for rep in reports:
        for row in rep.kurtosis_rows():
            w.writerow(["" if v is None else (repr(v) if isinstance(v, float) else v) for v in row])
    return buf.getvalue()
