"""Repeated stratified cross-validation over per-segment classifiers and fusion strategies.

One repetition reshuffles the subjects into ``n_folds`` stratified folds. In
each fold and for each segment, ReliefF picks features on the training
subjects, the classifiers are fit, an inner CV on the same training subjects
yields the card metrics, and the held-out subjects are predicted. Fusion then
combines a held-out subject's segment predictions using that fold's cards.
Predictions are pooled over the folds of a repetition before metrics are
taken; reported numbers are mean and std over repetitions.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import platform
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .corpus import PARADIGMS, PASSAGE_SEGMENT_ID, SEGMENT_IDS, SEGMENT_TAXONOMY, Corpus
from .cv import seed_for, stratified_folds
from .errors import ConfigurationError, SchemaError
from .features import FeatureTable, FrontEndConfig, extract_corpus_features
from .fusion import STRATEGIES, SegmentModelCard, fuse
from .learners import (
    DEPRESSED,
    HEALTHY,
    ForestConfig,
    SegmentMetrics,
    _Constant,
    estimate_segment_metrics,
    metrics_from_predictions,
    train_linear_svm,
    train_random_forest,
)
from .parallel import parallel_map
from .selection import ReliefConfig, relief_weights, select_features

GROUPS = ("all", "male", "female")
CLASSIFIERS = ("svm", "rf", "both")
FUSION_ROWS = (
    ("mean_segment", "Mean segment accuracy"),
    ("max_segment", "Max segment accuracy"),
    ("passage_reading", "Passage reading"),
    ("vote", "Vote"),
    ("accuracy_tree", "Accuracy binary tree"),
    ("sens_spec_tree", "Sensitivity/specificity binary tree"),
)
SUBSTITUTION_NOTES = (
    "Voiced/silent segmentation uses a double-threshold energy and zero-crossing detector "
    "in place of the original endpoint detection tool.",
    "Feature vectors are a 113-dimensional open reimplementation (16 pause, 86 acoustic, "
    "8 tremor, 3 energy); numbers are not reproductions of published tables.",
)
REPORT_SCHEMA_VERSION = 1


@dataclass(frozen=True)
class ExperimentConfig:
    group: str = "all"
    n_folds: int = 4
    n_repetitions: int = 50
    top_n: int = 20
    classifier: str = "both"
    fusion_classifier: str = "svm"
    fusion_strategies: tuple[str, ...] = STRATEGIES
    rng_seed: int = 0
    relief_k: int = 10
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    n_trees: int = 100
    inner_folds: int = 4
    corpus_path: str | None = None
    output_dir: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "fusion_strategies", tuple(self.fusion_strategies))
        if self.group not in GROUPS:
            raise ConfigurationError(f"group must be one of {GROUPS}, got {self.group!r}")
        if self.n_folds < 2:
            raise ConfigurationError("n_folds must be >= 2")
        if self.n_repetitions < 1:
            raise ConfigurationError("n_repetitions must be >= 1")
        if self.top_n < 1 or self.relief_k < 1 or self.n_trees < 1 or self.inner_folds < 2:
            raise ConfigurationError("top_n, relief_k and n_trees must be >= 1 and inner_folds >= 2")
        if self.classifier not in CLASSIFIERS:
            raise ConfigurationError(f"classifier must be one of {CLASSIFIERS}")
        if self.fusion_classifier not in ("svm", "rf"):
            raise ConfigurationError("fusion_classifier must be svm or rf")
        bad = [s for s in self.fusion_strategies if s not in STRATEGIES]
        if bad:
            raise ConfigurationError(f"unknown fusion strategies {bad}")
        if self.svm_C <= 0 or self.svm_tol <= 0:
            raise ConfigurationError("svm_C and svm_tol must be positive")

    @property
    def classifiers(self) -> tuple[str, ...]:
        return ("svm", "rf") if self.classifier == "both" else (self.classifier,)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["fusion_strategies"] = list(self.fusion_strategies)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(d) - known)
        if unknown:
            raise ConfigurationError(f"unknown config keys {unknown}")
        try:
            return cls(**d)
        except TypeError as exc:
            raise ConfigurationError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            d = json.loads(Path(path).read_text(encoding="utf-8"))
        except json.JSONDecodeError as exc:
            raise ConfigurationError(f"config is not valid JSON: {exc}") from None
        if not isinstance(d, dict):
            raise ConfigurationError("config must be a JSON object")
        return cls.from_dict(d)


# ---------------------------------------------------------------------------
# data preparation


@dataclass(frozen=True)
class GroupData:
    """Dense per-segment matrices for the subjects of one group; absent rows are NaN."""

    subject_ids: tuple[str, ...]
    genders: tuple[str, ...]
    y: np.ndarray
    X: dict[int, np.ndarray]
    present: dict[int, np.ndarray]

    @property
    def strata(self) -> list:
        labels = ["healthy" if v == HEALTHY else "depressed" for v in self.y]
        if len(set(self.genders)) > 1:
            return list(zip(labels, self.genders))
        return labels


def group_data(table: FeatureTable, group: str, n_folds: int) -> GroupData:
    subjects = [s for s in table.subjects if group == "all" or s[1] == group]
    y = np.array([HEALTHY if lab == "healthy" else DEPRESSED for _, _, lab in subjects], dtype=np.int64)
    n_h, n_d = int(np.sum(y == HEALTHY)), int(np.sum(y == DEPRESSED))
    if min(n_h, n_d) < n_folds:
        raise ConfigurationError(
            f"group {group!r} has {n_h} healthy and {n_d} depressed subjects; "
            f"each class needs at least n_folds={n_folds}")
    d = len(table.names)
    X, present = {}, {}
    for seg in SEGMENT_IDS:
        M = np.full((len(subjects), d), np.nan)
        mask = np.zeros(len(subjects), dtype=bool)
        for i, (sid, _, _) in enumerate(subjects):
            v = table.vectors.get((sid, seg))
            if v is not None:
                M[i] = v
                mask[i] = True
        X[seg], present[seg] = M, mask
    return GroupData(tuple(s[0] for s in subjects), tuple(s[1] for s in subjects), y, X, present)


def repetition_folds(data: GroupData, cfg: ExperimentConfig, rep: int) -> np.ndarray:
    return stratified_folds(data.strata, cfg.n_folds, np.random.default_rng(seed_for(cfg.rng_seed, rep)))


# ---------------------------------------------------------------------------
# one segment in one fold


def _svm_factory(cfg: ExperimentConfig):
    def fit(X, y):
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            return train_linear_svm(X, y, C=cfg.svm_C, tol=cfg.svm_tol)
    return fit


def _rf_factory(cfg: ExperimentConfig, seed: int):
    def fit(X, y):
        return train_random_forest(X, y, ForestConfig(n_trees=cfg.n_trees), rng_seed=seed)
    return fit


def fit_segment(X_train: np.ndarray, y_train: np.ndarray, cfg: ExperimentConfig, rep: int, fold: int,
                seg: int) -> dict:
    """Selection, models and card metrics for one segment from training rows only."""
    n_h = int(np.sum(y_train == HEALTHY))
    n_d = y_train.size - n_h
    rf_seed = seed_for(cfg.rng_seed, rep, fold, seg, 1)
    inner_seed = seed_for(cfg.rng_seed, rep, fold, seg, 2)
    if min(n_h, n_d) < 2:
        # too few of one class for neighbour search; fall back to the majority label
        label = HEALTHY if n_h >= n_d else DEPRESSED
        const = _Constant(label)
        metrics = metrics_from_predictions(y_train, np.full(y_train.size, label))
        return {"selected": [], "models": {"svm": const, "rf": const}, "card": metrics, "k_used": 0}
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        fw = relief_weights(X_train, y_train, ReliefConfig(k_neighbors=cfg.relief_k, top_n=cfg.top_n))
        selected = select_features(fw, ReliefConfig(k_neighbors=cfg.relief_k, top_n=cfg.top_n))
        Xs = X_train[:, selected]
        models = {}
        needed = set(cfg.classifiers)
        if cfg.fusion_strategies:
            needed.add(cfg.fusion_classifier)
        if "svm" in needed:
            models["svm"] = _svm_factory(cfg)(Xs, y_train)
        if "rf" in needed:
            models["rf"] = _rf_factory(cfg, rf_seed)(Xs, y_train)
        factory = _svm_factory(cfg) if cfg.fusion_classifier == "svm" else _rf_factory(cfg, rf_seed)
        card = estimate_segment_metrics(factory, Xs, y_train, cfg.inner_folds, inner_seed)
    return {"selected": [int(i) for i in selected], "models": models, "card": card, "k_used": fw.k_used}


# ---------------------------------------------------------------------------
# one repetition


def _run_repetition(args) -> dict:
    data, cfg, rep = args
    n = data.y.size
    folds = repetition_folds(data, cfg, rep)
    classifiers = list(cfg.classifiers)
    preds = {c: {seg: np.zeros(n, dtype=np.int64) for seg in SEGMENT_IDS} for c in classifiers}
    fused = {s: np.zeros(n, dtype=np.int64) for s in cfg.fusion_strategies}
    fold_log = []
    for fold in range(cfg.n_folds):
        train = np.flatnonzero(folds != fold)
        test = np.flatnonzero(folds == fold)
        seg_log = {}
        cards = []
        test_preds = {}  # fusion classifier labels of test subjects: seg -> {row: label}
        for seg in SEGMENT_IDS:
            mask = data.present[seg]
            tr, te = train[mask[train]], test[mask[test]]
            if tr.size == 0:
                continue
            fit = fit_segment(data.X[seg][tr], data.y[tr], cfg, rep, fold, seg)
            seg_log[seg] = {"selected": fit["selected"], "card": fit["card"].as_dict(), "k_used": fit["k_used"]}
            Xte = data.X[seg][te][:, fit["selected"]] if fit["selected"] else np.zeros((te.size, 0))
            for c in classifiers:
                if te.size:
                    preds[c][seg][te] = fit["models"][c].predict_batch(Xte)
            if cfg.fusion_strategies:
                cards.append(SegmentModelCard(seg, fit["card"]))
                fc = fit["models"][cfg.fusion_classifier]
                labels = fc.predict_batch(Xte) if te.size else []
                test_preds[seg] = dict(zip(te.tolist(), (int(v) for v in labels)))
        for i in test.tolist():
            for strategy in cfg.fusion_strategies:
                label, _ = fuse(strategy, cards, lambda card, i=i: test_preds[card.segment_id].get(i))
                fused[strategy][i] = label
        fold_log.append({
            "fold": fold,
            "train_subjects": [data.subject_ids[i] for i in train],
            "test_subjects": [data.subject_ids[i] for i in test],
            "segments": {str(s): v for s, v in seg_log.items()},
        })
    seg_metrics = {}
    for c in classifiers:
        seg_metrics[c] = {}
        for seg in SEGMENT_IDS:
            mask = data.present[seg]
            if mask.any():
                seg_metrics[c][seg] = metrics_from_predictions(data.y[mask], preds[c][seg][mask])
    fusion_metrics = {s: metrics_from_predictions(data.y, fused[s]) for s in cfg.fusion_strategies}
    return {"rep": rep, "folds": fold_log, "segment_metrics": seg_metrics, "fusion_metrics": fusion_metrics}


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class Stat:
    mean: float
    std: float

    @classmethod
    def of(cls, values) -> "Stat":
        v = np.asarray(list(values), dtype=np.float64)
        return cls(float(v.mean()), float(v.std()))


@dataclass
class EvaluationReport:
    """All numbers as fractions in [0, 1]; rendering converts to percentages."""

    group: str
    config: dict
    provenance: dict
    per_segment: dict      # classifier -> segment_id -> {"accuracy": Stat, ..., "n_subjects": int}
    paradigm: dict         # classifier -> paradigm -> Stat (accuracy)
    fusion: dict           # row key -> {"accuracy": Stat, "sensitivity": Stat, "specificity": Stat}
    repetitions: dict      # per-repetition accuracies backing every mean
    log: list = field(default_factory=list, compare=False, repr=False)

    def to_dict(self) -> dict:
        return _canonical_dict(self)

    def canonical(self) -> "EvaluationReport":
        return report_from_dict(self.to_dict())


def _fold_summary(runs: list[dict], classifier: str, seg: int, metric: str) -> list[float]:
    return [getattr(r["segment_metrics"][classifier][seg], metric) for r in runs]


def _aggregate(data: GroupData, cfg: ExperimentConfig, runs: list[dict]) -> EvaluationReport:
    per_segment, paradigm, reps = {}, {}, {"per_segment": {}, "fusion": {}}
    for c in cfg.classifiers:
        table = {}
        reps["per_segment"][c] = {}
        for seg in SEGMENT_IDS:
            if seg not in runs[0]["segment_metrics"][c]:
                continue
            row = {m: Stat.of(_fold_summary(runs, c, seg, m)) for m in ("accuracy", "sensitivity", "specificity")}
            row["n_subjects"] = int(data.present[seg].sum())
            table[seg] = row
            reps["per_segment"][c][seg] = _fold_summary(runs, c, seg, "accuracy")
        per_segment[c] = table
        paradigm[c] = {}
        for p in PARADIGMS:
            members = [d.segment_id for d in SEGMENT_TAXONOMY if d.paradigm == p and d.segment_id in table]
            if members:
                paradigm[c][p] = Stat(float(np.mean([table[s]["accuracy"].mean for s in members])),
                                      float(np.mean([table[s]["accuracy"].std for s in members])))

    fusion = {}
    base = per_segment[cfg.fusion_classifier] if cfg.fusion_classifier in per_segment else per_segment[cfg.classifiers[0]]
    base_c = cfg.fusion_classifier if cfg.fusion_classifier in per_segment else cfg.classifiers[0]
    if base:
        segs = sorted(base)
        per_rep = {m: np.array([[getattr(r["segment_metrics"][base_c][s], m) for s in segs] for r in runs])
                   for m in ("accuracy", "sensitivity", "specificity")}
        fusion["mean_segment"] = {m: Stat.of(per_rep[m].mean(axis=1)) for m in per_rep}
        best = max(segs, key=lambda s: (base[s]["accuracy"].mean, -s))
        fusion["max_segment"] = {m: base[best][m] for m in ("accuracy", "sensitivity", "specificity")}
        fusion["max_segment"]["segment_id"] = best
        if PASSAGE_SEGMENT_ID in base:
            fusion["passage_reading"] = {m: base[PASSAGE_SEGMENT_ID][m]
                                         for m in ("accuracy", "sensitivity", "specificity")}
        reps["fusion"]["mean_segment"] = per_rep["accuracy"].mean(axis=1).tolist()
    for s in cfg.fusion_strategies:
        fusion[s] = {m: Stat.of(getattr(r["fusion_metrics"][s], m) for r in runs)
                     for m in ("accuracy", "sensitivity", "specificity")}
        reps["fusion"][s] = [r["fusion_metrics"][s].accuracy for r in runs]

    log = [{"repetition": r["rep"], "folds": r["folds"]} for r in runs]
    return EvaluationReport(cfg.group, cfg.to_dict(), provenance(cfg, data), per_segment, paradigm, fusion,
                            reps, log)


def _versions() -> dict:
    import numba
    import scipy

    from . import __version__
    return {"vocatree": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "numba": numba.__version__, "python": platform.python_version()}


def provenance(cfg: ExperimentConfig, data: GroupData) -> dict:
    return {
        "rng_seed": cfg.rng_seed,
        "n_subjects": int(data.y.size),
        "n_healthy": int(np.sum(data.y == HEALTHY)),
        "n_depressed": int(np.sum(data.y == DEPRESSED)),
        "versions": _versions(),
        "substitution_notes": list(SUBSTITUTION_NOTES),
    }


def _as_table(source) -> FeatureTable:
    if isinstance(source, FeatureTable):
        return source
    if isinstance(source, Corpus):
        return extract_corpus_features(source, FrontEndConfig())
    raise TypeError("expected a Corpus or FeatureTable")


def run_experiment(source, cfg: ExperimentConfig = ExperimentConfig(), threads: int | None = None) -> EvaluationReport:
    """Full protocol on a corpus (features are extracted first) or a precomputed feature table."""
    table = _as_table(source)
    data = group_data(table, cfg.group, cfg.n_folds)
    runs = parallel_map(_run_repetition, [(data, cfg, rep) for rep in range(cfg.n_repetitions)], threads)
    return _aggregate(data, cfg, runs)


def per_segment_baselines(source, cfg: ExperimentConfig = ExperimentConfig(), threads: int | None = None) -> dict:
    """Per-segment and paradigm tables under the same protocol, without fusion."""
    cfg = dataclasses.replace(cfg, fusion_strategies=())
    report = run_experiment(source, cfg, threads)
    return {"per_segment": report.per_segment, "paradigm": report.paradigm}


# ---------------------------------------------------------------------------
# leakage audit


def audit_no_leakage(table: FeatureTable, report: EvaluationReport, cfg: ExperimentConfig | None = None,
                     repetitions=None) -> list[str]:
    """Recompute selected features and card metrics from logged training membership.

    Returns a list of mismatch descriptions; empty means the log is reproduced exactly.
    """
    cfg = cfg or ExperimentConfig.from_dict(report.config)
    data = group_data(table, cfg.group, cfg.n_folds)
    row_of = {sid: i for i, sid in enumerate(data.subject_ids)}
    problems = []
    for entry in report.log:
        rep = entry["repetition"]
        if repetitions is not None and rep not in repetitions:
            continue
        for f in entry["folds"]:
            train = np.array([row_of[s] for s in f["train_subjects"]], dtype=int)
            for seg_key, logged in f["segments"].items():
                seg = int(seg_key)
                tr = train[data.present[seg][train]]
                fit = fit_segment(data.X[seg][tr], data.y[tr], cfg, rep, f["fold"], seg)
                if fit["selected"] != logged["selected"]:
                    problems.append(f"rep {rep} fold {f['fold']} seg {seg}: selected features differ")
                if fit["card"].as_dict() != logged["card"]:
                    problems.append(f"rep {rep} fold {f['fold']} seg {seg}: card metrics differ")
    return problems


# ---------------------------------------------------------------------------
# rendering


def _pct(v: float) -> float:
    return round(100.0 * v, 1)


def _sig(v: float) -> float:
    return float(f"{v:.6g}")


def _stat_dict(s: Stat) -> dict:
    return {"mean": _pct(s.mean), "std": _pct(s.std)}


def _clean_config(d):
    if isinstance(d, float):
        return _sig(d)
    if isinstance(d, dict):
        return {k: _clean_config(v) for k, v in d.items()}
    if isinstance(d, (list, tuple)):
        return [_clean_config(v) for v in d]
    return d


def _canonical_dict(r: EvaluationReport) -> dict:
    per_segment = {}
    for c, table in r.per_segment.items():
        per_segment[c] = {str(seg): {"accuracy": _stat_dict(row["accuracy"]),
                                     "sensitivity": _stat_dict(row["sensitivity"]),
                                     "specificity": _stat_dict(row["specificity"]),
                                     "n_subjects": row["n_subjects"]}
                          for seg, row in table.items()}
    fusion = {}
    for key, row in r.fusion.items():
        fusion[key] = {m: _stat_dict(row[m]) for m in ("accuracy", "sensitivity", "specificity")}
        if "segment_id" in row:
            fusion[key]["segment_id"] = row["segment_id"]
    reps = {
        "per_segment": {c: {str(s): [_sig(v) for v in vals] for s, vals in t.items()}
                        for c, t in r.repetitions["per_segment"].items()},
        "fusion": {k: [_sig(v) for v in vals] for k, vals in r.repetitions["fusion"].items()},
    }
    return {
        "schema_version": REPORT_SCHEMA_VERSION,
        "group": r.group,
        "config": _clean_config(r.config),
        "provenance": _clean_config(r.provenance),
        "per_segment": per_segment,
        "paradigm": {c: {p: _stat_dict(s) for p, s in t.items()} for c, t in r.paradigm.items()},
        "fusion": fusion,
        "repetitions": reps,
    }


def _stat_from(d: dict) -> Stat:
    return Stat(d["mean"] / 100.0, d["std"] / 100.0)


def report_from_dict(d: dict) -> EvaluationReport:
    try:
        if d["schema_version"] != REPORT_SCHEMA_VERSION:
            raise SchemaError(f"unsupported report schema {d['schema_version']}")
        per_segment = {}
        for c, table in d["per_segment"].items():
            per_segment[c] = {int(seg): {"accuracy": _stat_from(row["accuracy"]),
                                         "sensitivity": _stat_from(row["sensitivity"]),
                                         "specificity": _stat_from(row["specificity"]),
                                         "n_subjects": row["n_subjects"]}
                              for seg, row in table.items()}
        fusion = {}
        for key, row in d["fusion"].items():
            fusion[key] = {m: _stat_from(row[m]) for m in ("accuracy", "sensitivity", "specificity")}
            if "segment_id" in row:
                fusion[key]["segment_id"] = row["segment_id"]
        reps = {"per_segment": {c: {int(s): list(v) for s, v in t.items()}
                                for c, t in d["repetitions"]["per_segment"].items()},
                "fusion": {k: list(v) for k, v in d["repetitions"]["fusion"].items()}}
        paradigm = {c: {p: _stat_from(s) for p, s in t.items()} for c, t in d["paradigm"].items()}
        return EvaluationReport(d["group"], d["config"], d["provenance"], per_segment, paradigm, fusion, reps)
    except (KeyError, TypeError) as exc:
        raise SchemaError(f"malformed report: {exc}") from None


def report_json(report: EvaluationReport) -> str:
    return json.dumps(report.to_dict(), sort_keys=True, indent=2) + "\n"


def parse_report(text: str) -> EvaluationReport:
    return report_from_dict(json.loads(text))


def _fmt_stat(s: dict) -> str:
    return f"{s['mean']:.1f} ± {s['std']:.1f}"


def report_markdown(report: EvaluationReport) -> str:
    d = report.to_dict()
    lines = [f"# Evaluation report: group `{d['group']}`", ""]
    prov = d["provenance"]
    lines += [f"Subjects: {prov['n_subjects']} ({prov['n_healthy']} healthy, {prov['n_depressed']} depressed). "
              f"Seed {prov['rng_seed']}, {d['config']['n_folds']}-fold CV x {d['config']['n_repetitions']} "
              "repetitions. Values are percentages, mean ± std over repetitions.", ""]
    lines += ["## Paradigm accuracy", "", "| Paradigm | " + " | ".join(c.upper() for c in d["paradigm"]) + " |",
              "|---|" + "---|" * len(d["paradigm"])]
    for p in PARADIGMS:
        cells = [_fmt_stat(d["paradigm"][c][p]) if p in d["paradigm"][c] else "" for c in d["paradigm"]]
        lines.append(f"| {p.replace('_', ' ')} | " + " | ".join(cells) + " |")
    lines += ["", "## Fusion", "", "| Method | Accuracy | Sensitivity | Specificity |", "|---|---|---|---|"]
    for key, title in FUSION_ROWS:
        row = d["fusion"].get(key)
        if row is None:
            lines.append(f"| {title} | n/a | n/a | n/a |")
            continue
        if "segment_id" in row:
            title = f"{title} (segment {row['segment_id']})"
        lines.append(f"| {title} | {_fmt_stat(row['accuracy'])} | {_fmt_stat(row['sensitivity'])} | "
                     f"{_fmt_stat(row['specificity'])} |")
    for c, table in d["per_segment"].items():
        lines += ["", f"## Per-segment results ({c.upper()})", "",
                  "| Segment | Paradigm | N | Accuracy | Sensitivity | Specificity |", "|---|---|---|---|---|---|"]
        for seg in sorted(table, key=int):
            row = table[seg]
            para = SEGMENT_TAXONOMY[int(seg) - 1].paradigm.replace("_", " ")
            lines.append(f"| {seg} | {para} | {row['n_subjects']} | {_fmt_stat(row['accuracy'])} | "
                         f"{_fmt_stat(row['sensitivity'])} | {_fmt_stat(row['specificity'])} |")
    lines += ["", "## Notes", ""] + [f"- {n}" for n in prov["substitution_notes"]]
    return "\n".join(lines) + "\n"


def _write_csv(path: Path, header, rows) -> None:
    with path.open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def render_report(report: EvaluationReport, fmt: str, out_dir) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if fmt == "json":
        p = out / "report.json"
        p.write_text(report_json(report), encoding="utf-8")
        return [p]
    if fmt == "markdown":
        p = out / "report.md"
        p.write_text(report_markdown(report), encoding="utf-8")
        return [p]
    if fmt != "csv":
        raise ValueError(f"unknown report format {fmt!r}")
    d = report.to_dict()
    metrics = ("accuracy", "sensitivity", "specificity")
    stat_cols = [f"{m}_{k}" for m in metrics for k in ("mean", "std")]
    seg_rows = []
    for c, table in d["per_segment"].items():
        for seg in sorted(table, key=int):
            row = table[seg]
            seg_rows.append([c, seg, row["n_subjects"]] + [row[m][k] for m in metrics for k in ("mean", "std")])
    para_rows = [[c, p, s["mean"], s["std"]] for c, t in d["paradigm"].items() for p, s in t.items()]
    fus_rows = [[key, title] + [d["fusion"][key][m][k] for m in metrics for k in ("mean", "std")]
                for key, title in FUSION_ROWS if key in d["fusion"]]
    paths = [out / "per_segment.csv", out / "paradigm.csv", out / "fusion.csv"]
    _write_csv(paths[0], ["classifier", "segment_id", "n_subjects"] + stat_cols, seg_rows)
    _write_csv(paths[1], ["classifier", "paradigm", "accuracy_mean", "accuracy_std"], para_rows)
    _write_csv(paths[2], ["method", "title"] + stat_cols, fus_rows)
    return paths


def write_run_log(report: EvaluationReport, path) -> None:
    Path(path).write_text(json.dumps(report.log, sort_keys=True) + "\n", encoding="utf-8")


def read_run_log(path) -> list:
    return json.loads(Path(path).read_text(encoding="utf-8"))
