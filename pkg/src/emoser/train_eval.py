"""Training loop, classification metrics, learning-curve export, comparison.

Metrics follow the usual multiclass conventions: confusion rows are true
labels, columns predictions; micro averaging pools TP/FP/FN (and therefore
equals accuracy for single-label problems, which is why comparison tables
show four identical columns per model); zero-denominator precision/recall/F1
are defined as 0 so macro means survive degenerate splits.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .models import Model, build_model
from .nn import SeededRng, make_optimizer, softmax_xent
from .ravdess import DatasetSplit, LabeledExample


class EmptySet(Exception):
    pass


class NonSquareMatrix(Exception):
    pass


class DegenerateMarginals(Exception):
    """Chance agreement is 1; kappa is undefined."""


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    batch_size: int = 32
    optimizer: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.epochs < 1 or self.batch_size < 1:
            raise ValueError("epochs and batch_size must be >= 1")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    train_acc: float
    val_loss: float
    val_acc: float


@dataclass
class MetricsReport:
    confusion: np.ndarray
    accuracy: float
    per_class_precision: list[float]
    per_class_recall: list[float]
    per_class_f1: list[float]
    macro_precision: float
    macro_recall: float
    macro_f1: float
    micro_precision: float
    micro_recall: float
    micro_f1: float
    cohens_kappa: float

    def to_dict(self) -> dict:
        d = asdict(self)
        d["confusion"] = self.confusion.tolist()
        return d


def _stack_features(examples: list[LabeledExample]) -> tuple[np.ndarray, np.ndarray]:
    x = np.stack([ex.features for ex in examples]).astype(np.float32)
    y = np.array([ex.label for ex in examples], dtype=np.int64)
    return x, y


def _eval_pass(model: Model, x: np.ndarray, y: np.ndarray,
               batch_size: int = 64) -> tuple[float, float, np.ndarray]:
    """Eval-mode mean loss, accuracy and predictions over a full set."""
    losses = []
    preds = []
    for start in range(0, len(x), batch_size):
        xb = x[start : start + batch_size]
        yb = y[start : start + batch_size]
        logits = model.forward_logits(xb, train=False)
        _, batch_losses, _ = softmax_xent(logits, yb)
        losses.append(batch_losses)
        preds.append(np.argmax(logits, axis=1))
    losses = np.concatenate(losses)
    preds = np.concatenate(preds)
    return float(losses.mean()), float((preds == y).mean()), preds


def train(model: Model, train_set: list[LabeledExample],
          val_set: list[LabeledExample], cfg: TrainConfig,
          log=None) -> tuple[Model, list[EpochRecord]]:
    """Train in place; returns the model and one EpochRecord per epoch.

    Each epoch: seeded shuffle, mini-batch forward/backward/update, then a
    full Eval-mode pass over both sets. Deterministic for a fixed seed.
    """
    if not train_set or not val_set:
        raise EmptySet("train and validation sets must be non-empty")
    x_train, y_train = _stack_features(train_set)
    x_val, y_val = _stack_features(val_set)

    rng = SeededRng(cfg.seed)
    shuffle_rng = rng.split()
    dropout_rng = rng.split()
    optimizer = make_optimizer(cfg.optimizer, cfg.learning_rate, cfg.beta1,
                               cfg.beta2, cfg.eps)
    params = model.params()
    history: list[EpochRecord] = []
    order = list(range(len(x_train)))

    for epoch in range(cfg.epochs):
        if cfg.shuffle:
            shuffle_rng.shuffle(order)
        for start in range(0, len(order), cfg.batch_size):
            idx = order[start : start + cfg.batch_size]
            xb = x_train[idx]
            yb = y_train[idx]
            logits = model.forward_logits(xb, train=True, rng=dropout_rng)
            _, _, grad = softmax_xent(logits, yb)
            for p in params:
                p.zero_grad()
            model.backward((grad / len(idx)).astype(np.float32))
            optimizer.step(params)
        train_loss, train_acc, _ = _eval_pass(model, x_train, y_train)
        val_loss, val_acc, _ = _eval_pass(model, x_val, y_val)
        record = EpochRecord(epoch, train_loss, train_acc, val_loss, val_acc)
        history.append(record)
        if log is not None:
            log(f"epoch {epoch:3d}  train loss {train_loss:.4f} acc {train_acc:.4f}"
                f"  val loss {val_loss:.4f} acc {val_acc:.4f}")
    return model, history


def confusion_matrix(y_true: np.ndarray, y_pred: np.ndarray, k: int) -> np.ndarray:
    cm = np.zeros((k, k), dtype=np.int64)
    np.add.at(cm, (np.asarray(y_true), np.asarray(y_pred)), 1)
    return cm


def evaluate(model: Model, examples: list[LabeledExample]) -> MetricsReport:
    """Eval-mode argmax predictions -> confusion matrix -> all metrics."""
    if not examples:
        raise EmptySet("cannot evaluate an empty set")
    x, y = _stack_features(examples)
    _, _, preds = _eval_pass(model, x, y)
    cm = confusion_matrix(y, preds, model.spec.num_classes)
    return metrics_from_confusion(cm)


def precision_recall_f1(confusion: np.ndarray, averaging: str = "per_class"):
    """P/R/F1 from a square confusion matrix.

    averaging: "per_class" returns three lists; "macro" unweighted class
    means; "micro" pools TP/FP/FN. Zero-denominator metrics are 0.
    """
    cm = np.asarray(confusion, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise NonSquareMatrix(f"confusion matrix shape {cm.shape}")
    tp = np.diag(cm)
    fp = cm.sum(axis=0) - tp
    fn = cm.sum(axis=1) - tp

    def safe(num, den):
        return num / den if den > 0 else 0.0

    precision = [safe(tp[i], tp[i] + fp[i]) for i in range(len(tp))]
    recall = [safe(tp[i], tp[i] + fn[i]) for i in range(len(tp))]
    f1 = [safe(2 * precision[i] * recall[i], precision[i] + recall[i])
          for i in range(len(tp))]

    if averaging == "per_class":
        return precision, recall, f1
    if averaging == "macro":
        return (float(np.mean(precision)), float(np.mean(recall)), float(np.mean(f1)))
    if averaging == "micro":
        tp_sum, fp_sum, fn_sum = tp.sum(), fp.sum(), fn.sum()
        p = safe(tp_sum, tp_sum + fp_sum)
        r = safe(tp_sum, tp_sum + fn_sum)
        return (p, r, safe(2 * p * r, p + r))
    raise ValueError(f"unknown averaging {averaging!r}")


def cohens_kappa(confusion: np.ndarray) -> float:
    """Chance-corrected agreement from row/column marginals."""
    cm = np.asarray(confusion, dtype=np.float64)
    if cm.ndim != 2 or cm.shape[0] != cm.shape[1]:
        raise NonSquareMatrix(f"confusion matrix shape {cm.shape}")
    total = cm.sum()
    if total <= 0:
        raise ValueError("empty confusion matrix")
    p_o = np.trace(cm) / total
    p_e = float((cm.sum(axis=1) * cm.sum(axis=0)).sum()) / total**2
    if p_e >= 1.0:
        raise DegenerateMarginals("chance agreement is 1, kappa undefined")
    return float((p_o - p_e) / (1.0 - p_e))


def metrics_from_confusion(cm: np.ndarray) -> MetricsReport:
    cm = np.asarray(cm)
    total = cm.sum()
    accuracy = float(np.trace(cm) / total) if total > 0 else 0.0
    per_p, per_r, per_f = precision_recall_f1(cm, "per_class")
    macro_p, macro_r, macro_f = precision_recall_f1(cm, "macro")
    micro_p, micro_r, micro_f = precision_recall_f1(cm, "micro")
    try:
        kappa = cohens_kappa(cm)
    except DegenerateMarginals:
        kappa = 1.0 if np.trace(cm) == total else 0.0
    return MetricsReport(
        confusion=cm, accuracy=accuracy,
        per_class_precision=[float(v) for v in per_p],
        per_class_recall=[float(v) for v in per_r],
        per_class_f1=[float(v) for v in per_f],
        macro_precision=float(macro_p), macro_recall=float(macro_r),
        macro_f1=float(macro_f), micro_precision=float(micro_p),
        micro_recall=float(micro_r), micro_f1=float(micro_f),
        cohens_kappa=float(kappa),
    )


HISTORY_HEADER = "epoch,train_loss,train_acc,val_loss,val_acc"


def export_history(history: list[EpochRecord], path: str | Path,
                   fmt: str = "csv") -> None:
    """Write the learning curve as CSV (fixed header) or JSON, 6 significant digits."""
    if not history:
        raise ValueError("history is empty")
    path = Path(path)
    if fmt == "csv":
        lines = [HISTORY_HEADER]
        for r in history:
            lines.append(f"{r.epoch},{r.train_loss:.6g},{r.train_acc:.6g},"
                         f"{r.val_loss:.6g},{r.val_acc:.6g}")
        path.write_text("\n".join(lines) + "\n")
    elif fmt == "json":
        records = [{"epoch": r.epoch,
                    "train_loss": float(f"{r.train_loss:.6g}"),
                    "train_acc": float(f"{r.train_acc:.6g}"),
                    "val_loss": float(f"{r.val_loss:.6g}"),
                    "val_acc": float(f"{r.val_acc:.6g}")} for r in history]
        path.write_text(json.dumps(records, indent=2) + "\n")
    else:
        raise ValueError(f"unknown history format {fmt!r}")


def _svg_panel(x0: float, title: str, series: dict[str, list[float]],
               n_epochs: int, width: float, height: float) -> list[str]:
    pad = 42.0
    plot_w, plot_h = width - 2 * pad, height - 2 * pad
    lo = min(min(v) for v in series.values())
    hi = max(max(v) for v in series.values())
    if hi - lo < 1e-12:
        hi = lo + 1.0
    span_x = max(n_epochs - 1, 1)

    def sx(i: int) -> float:
        return x0 + pad + plot_w * (i / span_x)

    def sy(v: float) -> float:
        return pad + plot_h * (1.0 - (v - lo) / (hi - lo))

    colors = {"train": "#1f77b4", "validation": "#d62728"}
    parts = [
        f'<rect x="{x0 + pad:.1f}" y="{pad:.1f}" width="{plot_w:.1f}" '
        f'height="{plot_h:.1f}" fill="none" stroke="#999"/>',
        f'<text x="{x0 + width / 2:.1f}" y="{pad - 14:.1f}" text-anchor="middle" '
        f'font-size="14">{title}</text>',
        f'<text x="{x0 + width / 2:.1f}" y="{height - 6:.1f}" text-anchor="middle" '
        f'font-size="12">epoch</text>',
        f'<text x="{x0 + 12:.1f}" y="{height / 2:.1f}" text-anchor="middle" '
        f'font-size="12" transform="rotate(-90 {x0 + 12:.1f} {height / 2:.1f})">{title}</text>',
        f'<text x="{x0 + pad - 4:.1f}" y="{pad + plot_h + 4:.1f}" text-anchor="end" '
        f'font-size="10">{lo:.3g}</text>',
        f'<text x="{x0 + pad - 4:.1f}" y="{pad + 4:.1f}" text-anchor="end" '
        f'font-size="10">{hi:.3g}</text>',
    ]
    for idx, (name, values) in enumerate(series.items()):
        pts = " ".join(f"{sx(i):.2f},{sy(v):.2f}" for i, v in enumerate(values))
        parts.append(f'<polyline class="series-{name}" points="{pts}" fill="none" '
                     f'stroke="{colors[name]}" stroke-width="1.5"/>')
        parts.append(f'<text x="{x0 + pad + 6:.1f}" y="{pad + 16 + 14 * idx:.1f}" '
                     f'font-size="11" fill="{colors[name]}">{name}</text>')
    return parts


def render_curves(history: list[EpochRecord], path: str | Path) -> None:
    """Two-panel SVG learning curve: loss and accuracy, train vs validation."""
    if not history:
        raise ValueError("history is empty")
    panel_w, panel_h = 420.0, 300.0
    n = len(history)
    body = ['<svg xmlns="http://www.w3.org/2000/svg" '
            f'width="{int(2 * panel_w)}" height="{int(panel_h)}" '
            f'viewBox="0 0 {int(2 * panel_w)} {int(panel_h)}">']
    body += _svg_panel(0.0, "loss",
                       {"train": [r.train_loss for r in history],
                        "validation": [r.val_loss for r in history]},
                       n, panel_w, panel_h)
    body += _svg_panel(panel_w, "accuracy",
                       {"train": [r.train_acc for r in history],
                        "validation": [r.val_acc for r in history]},
                       n, panel_w, panel_h)
    body.append("</svg>")
    Path(path).write_text("\n".join(body) + "\n")


@dataclass
class ComparisonRow:
    name: str
    precision: float | None
    recall: float | None
    f1: float | None
    accuracy: float | None
    status: str


@dataclass
class ComparisonReport:
    rows: list[ComparisonRow]
    histories: dict[str, list[EpochRecord]] = field(default_factory=dict)

    def to_json(self) -> str:
        return json.dumps({"models": [asdict(r) for r in self.rows]}, indent=2)

    def to_text(self) -> str:
        header = f"{'Model':<8} {'Precision':>10} {'Recall':>10} {'F1-Score':>10} {'Accuracy':>10}"
        lines = [header, "-" * len(header)]
        for r in self.rows:
            if r.precision is None:
                lines.append(f"{r.name:<8} {r.status:>43}")
            else:
                lines.append(f"{r.name:<8} {r.precision:>10.4f} {r.recall:>10.4f} "
                             f"{r.f1:>10.4f} {r.accuracy:>10.4f}")
        return "\n".join(lines)


def compare_models(split: DatasetSplit, cfg: TrainConfig,
                   input_shape: tuple[int, int], num_classes: int = 8,
                   log=None) -> ComparisonReport:
    """Train the conv stack and the MLP baseline under identical config/seed,
    evaluate both on the test half, and emit the three-row comparison table
    (the recurrent model is reported as not implemented, by design)."""
    rows: list[ComparisonRow] = []
    histories: dict[str, list[EpochRecord]] = {}
    for name, kind in (("CNN", "cnn"), ("LSTM", None), ("DNN", "dnn")):
        if kind is None:
            rows.append(ComparisonRow("LSTM", None, None, None, None,
                                      "not implemented (out of scope)"))
            continue
        model = build_model(kind, input_shape, num_classes, SeededRng(cfg.seed))
        model, history = train(model, split.train, split.test, cfg, log=log)
        report = evaluate(model, split.test)
        histories[name] = history
        rows.append(ComparisonRow(name, report.micro_precision, report.micro_recall,
                                  report.micro_f1, report.accuracy, "trained"))
    return ComparisonReport(rows=rows, histories=histories)
