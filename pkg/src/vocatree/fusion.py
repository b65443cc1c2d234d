"""Decision-level fusion of per-segment labels: majority vote and two count-to-2 binary trees.

Tree strategies walk one path per subject. Each step asks the best remaining
segment model for a label; a healthy answer selects the next node by the
healthy-branch criterion, a depressed answer by the depressed-branch one.
The first class to collect two answers is the output, so no path evaluates
more than three models.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np

from .errors import NoInputError, SchemaError, ValidationError
from .learners import DEPRESSED, HEALTHY, SegmentMetrics

VOTE = "vote"
ACCURACY_TREE = "accuracy_tree"
SENS_SPEC_TREE = "sens_spec_tree"
STRATEGIES = (VOTE, ACCURACY_TREE, SENS_SPEC_TREE)
TREE_STRATEGIES = (ACCURACY_TREE, SENS_SPEC_TREE)


@dataclass(frozen=True)
class SegmentModelCard:
    segment_id: int
    metrics: SegmentMetrics
    model: object = field(default=None, compare=False, repr=False)
    selected: tuple[int, ...] = ()

    def predict(self, x) -> int:
        x = np.asarray(x, dtype=np.float64)
        if self.selected:
            x = x[list(self.selected)]
        return int(self.model.predict(x))


@dataclass
class FusionTrace:
    strategy: str
    label: int
    path: list[tuple[int, int]] = field(default_factory=list)
    skipped: list[int] = field(default_factory=list)
    flags: list[str] = field(default_factory=list)
    tally: dict[str, int] | None = None
    subject_id: str | None = None

    @property
    def health_count(self) -> int:
        return sum(1 for _, p in self.path if p == HEALTHY)

    @property
    def depression_count(self) -> int:
        return sum(1 for _, p in self.path if p == DEPRESSED)

    def to_dict(self) -> dict:
        d = {
            "strategy": self.strategy,
            "path": [{"segment_id": s, "prediction": p} for s, p in self.path],
            "label": self.label,
            "flags": list(self.flags),
        }
        if self.subject_id is not None:
            d["subject_id"] = self.subject_id
        if self.skipped:
            d["skipped"] = list(self.skipped)
        if self.tally is not None:
            d["tally"] = dict(self.tally)
        return d


def _check_strategy(strategy: str) -> None:
    if strategy not in STRATEGIES:
        raise ValidationError(f"unknown fusion strategy {strategy!r}; expected one of {STRATEGIES}")


def selection_key(metrics: SegmentMetrics, segment_id: int, strategy: str, branch: str) -> tuple:
    """Sort key (larger is better) for picking the next node.

    ``branch`` is "root", "healthy" (previous answer +1) or "depressed".
    """
    m = metrics
    if strategy == SENS_SPEC_TREE:
        primary = m.specificity if branch == "healthy" else m.sensitivity
        return (primary, m.accuracy, -segment_id)
    if strategy == ACCURACY_TREE:
        if branch == "healthy":
            return (m.accuracy, m.specificity, -segment_id)
        if branch == "depressed":
            return (m.accuracy, m.sensitivity, -segment_id)
        return (m.accuracy, -segment_id)
    raise ValidationError(f"{strategy!r} does not build a tree")


def _rank(cards, strategy: str, branch: str):
    return sorted(cards, key=lambda c: selection_key(c.metrics, c.segment_id, strategy, branch), reverse=True)


def fuse_vote(predictions: dict[int, int | None]) -> tuple[int, FusionTrace]:
    present = {s: p for s, p in predictions.items() if p is not None}
    if not present:
        raise NoInputError("no segment predictions to vote on")
    healthy = sum(1 for p in present.values() if p == HEALTHY)
    depressed = len(present) - healthy
    label = HEALTHY if healthy > depressed else DEPRESSED
    flags = ["tie"] if healthy == depressed else []
    trace = FusionTrace(VOTE, label, path=sorted(present.items()), flags=flags,
                        tally={"healthy": healthy, "depressed": depressed})
    return label, trace


def fuse_tree(cards, predictor: Callable[[SegmentModelCard], int | None], strategy: str) -> tuple[int, FusionTrace]:
    """Lazy count-to-2 path. ``predictor`` returns None when the subject lacks that segment."""
    if strategy not in TREE_STRATEGIES:
        raise ValidationError(f"{strategy!r} is not a tree strategy")
    cards = list(cards)
    if not cards:
        raise NoInputError("no segment model cards")
    for c in cards:
        vals = (c.metrics.accuracy, c.metrics.sensitivity, c.metrics.specificity)
        if not all(np.isfinite(vals)):
            raise ValidationError(f"card {c.segment_id} has non-finite metrics")
    ids = [c.segment_id for c in cards]
    if len(set(ids)) != len(ids):
        raise ValidationError("segment ids must be unique within a card set")

    trace = FusionTrace(strategy, DEPRESSED)
    if len(cards) < 3:
        trace.flags.append("fewer_than_3_cards")
    remaining = list(cards)
    health = depression = 0
    branch = "root"
    while health < 2 and depression < 2:
        pred = None
        for card in _rank(remaining, strategy, branch):
            remaining.remove(card)
            pred = predictor(card)
            if pred is None:
                trace.skipped.append(card.segment_id)
                continue
            pred = HEALTHY if pred == HEALTHY else DEPRESSED
            trace.path.append((card.segment_id, pred))
            break
        if pred is None:
            trace.flags.append("exhausted")
            break
        if pred == HEALTHY:
            health += 1
            branch = "healthy"
        else:
            depression += 1
            branch = "depressed"
    trace.label = HEALTHY if health >= 2 else DEPRESSED
    return trace.label, trace


def _feature_predictor(subject_features: dict):
    def predict(card: SegmentModelCard):
        x = subject_features.get(card.segment_id)
        return None if x is None else card.predict(x)
    return predict


def fuse_sens_spec_tree(cards, subject_features: dict) -> tuple[int, FusionTrace]:
    return fuse_tree(cards, _feature_predictor(subject_features), SENS_SPEC_TREE)


def fuse_accuracy_tree(cards, subject_features: dict) -> tuple[int, FusionTrace]:
    return fuse_tree(cards, _feature_predictor(subject_features), ACCURACY_TREE)


def fuse(strategy: str, cards, predictor) -> tuple[int, FusionTrace]:
    """Run any strategy against a predictor; vote asks every card once."""
    _check_strategy(strategy)
    if strategy == VOTE:
        return fuse_vote({c.segment_id: predictor(c) for c in cards})
    return fuse_tree(cards, predictor, strategy)


def cards_from_metrics(metrics: dict[int, SegmentMetrics]) -> list[SegmentModelCard]:
    return [SegmentModelCard(s, m) for s, m in sorted(metrics.items())]


def simulate_fusion(prediction_matrix: dict[str, dict[int, int | None]], cards_metrics, strategy: str):
    """Fusion driven by a subjects x segments label matrix instead of live models.

    ``cards_metrics`` is a card list or a ``{segment_id: SegmentMetrics}`` map.
    Returns (labels in subject order, traces).
    """
    _check_strategy(strategy)
    cards = cards_from_metrics(cards_metrics) if isinstance(cards_metrics, dict) else list(cards_metrics)
    known = {c.segment_id for c in cards}
    labels, traces = [], []
    for sid, row in prediction_matrix.items():
        unknown = set(row) - known
        if unknown:
            raise SchemaError(f"subject {sid}: segment columns {sorted(unknown)} have no card")
        label, trace = fuse(strategy, cards, lambda c, row=row: row.get(c.segment_id))
        trace.subject_id = sid
        labels.append(label)
        traces.append(trace)
    return labels, traces


# ---------------------------------------------------------------------------
# static tree export


def _fmt(v: float) -> str:
    return f"{v:.3f}"


def export_tree(cards, strategy: str) -> str:
    """DOT text of every path the count-to-2 rule can take under ``cards``."""
    if strategy not in TREE_STRATEGIES:
        raise ValidationError(f"{strategy!r} is not a tree strategy")
    cards = list(cards)
    if len(cards) < 3:
        raise ValidationError("tree export needs at least 3 cards")
    lines = [f'digraph {strategy} {{', '  node [shape=box, fontname="Helvetica"];']
    counter = [0]

    def new_id() -> str:
        counter[0] += 1
        return f"n{counter[0] - 1}"

    def leaf(label: int, note: str = "") -> str:
        nid = new_id()
        text = ("healthy" if label == HEALTHY else "depressed") + note
        fill = "palegreen" if label == HEALTHY else "lightsalmon"
        lines.append(f'  {nid} [label="{text}", shape=ellipse, style=filled, fillcolor={fill}];')
        return nid

    def expand(remaining, health: int, depression: int, branch: str) -> str:
        if health >= 2:
            return leaf(HEALTHY)
        if depression >= 2:
            return leaf(DEPRESSED)
        if not remaining:
            return leaf(DEPRESSED, " (exhausted)")
        card = _rank(remaining, strategy, branch)[0]
        m = card.metrics
        nid = new_id()
        lines.append(f'  {nid} [label="segment {card.segment_id}\\nacc={_fmt(m.accuracy)} '
                     f'sens={_fmt(m.sensitivity)} spec={_fmt(m.specificity)}"];')
        rest = [c for c in remaining if c is not card]
        h = expand(rest, health + 1, depression, "healthy")
        lines.append(f'  {nid} -> {h} [label="healthy (+1)"];')
        d = expand(rest, health, depression + 1, "depressed")
        lines.append(f'  {nid} -> {d} [label="depressed (-1)"];')
        return nid

    expand(cards, 0, 0, "root")
    lines.append("}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# CSV / JSON interfaces

_TOKENS = {"1": HEALTHY, "+1": HEALTHY, "healthy": HEALTHY, "-1": DEPRESSED, "depressed": DEPRESSED}
_ABSENT = {"", "na", "nan", "none", "absent"}


def read_predictions_csv(path) -> dict[str, dict[int, int | None]]:
    out: dict[str, dict[int, int | None]] = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = [h.strip() for h in next(reader, [])]
        if header != ["subject_id", "segment_id", "prediction"]:
            raise SchemaError("predictions CSV header must be subject_id,segment_id,prediction")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != 3:
                raise SchemaError(f"line {lineno}: expected 3 fields")
            sid, seg, pred = (c.strip() for c in row)
            token = pred.lower()
            if token in _ABSENT:
                value = None
            elif token in _TOKENS:
                value = _TOKENS[token]
            else:
                raise SchemaError(f"line {lineno}: prediction {pred!r} is not 1/-1/healthy/depressed")
            try:
                seg_id = int(seg)
            except ValueError:
                raise SchemaError(f"line {lineno}: segment_id {seg!r} is not an integer") from None
            out.setdefault(sid, {})[seg_id] = value
    return out


def read_cards_csv(path) -> dict[int, SegmentMetrics]:
    out = {}
    with Path(path).open(encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        need = {"segment_id", "accuracy", "sensitivity", "specificity"}
        if reader.fieldnames is None or not need <= {f.strip() for f in reader.fieldnames}:
            raise SchemaError("cards CSV header must be segment_id,accuracy,sensitivity,specificity")
        for lineno, row in enumerate(reader, start=2):
            try:
                seg = int(row["segment_id"])
                acc, sens, spec = (float(row[k]) for k in ("accuracy", "sensitivity", "specificity"))
            except (TypeError, ValueError):
                raise SchemaError(f"line {lineno}: malformed card row") from None
            if not all(0.0 <= v <= 1.0 for v in (acc, sens, spec)):
                raise SchemaError(f"line {lineno}: metrics must lie in [0, 1]")
            if seg in out:
                raise SchemaError(f"line {lineno}: duplicate segment_id {seg}")
            out[seg] = SegmentMetrics(acc, sens, spec, 0, 0)
    return out


def write_cards_csv(path, cards) -> None:
    with Path(path).open("w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["segment_id", "accuracy", "sensitivity", "specificity"])
        for c in sorted(cards, key=lambda c: c.segment_id):
            w.writerow([c.segment_id, repr(c.metrics.accuracy), repr(c.metrics.sensitivity),
                        repr(c.metrics.specificity)])


def traces_to_json(traces) -> str:
    return json.dumps([t.to_dict() for t in traces], indent=2, sort_keys=True) + "\n"
