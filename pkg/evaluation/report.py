"""
Report rendering and threshold gating
=====================================
Boxed human-readable tables, flat key=value text for scripts, and the
threshold check the CLI turns into a non-zero exit status.
"""

from typing import Any, Dict, List, Mapping, Union

from evaluation.scoring import PrfReport
from evaluation.slot_error import SerReport

Report = Union[PrfReport, SerReport, Mapping[str, Any]]

WIDTH = 60

# threshold name -> (report key, lower bound?)
THRESHOLDS = {
    'min_f1': ('f1', True),
    'min_precision': ('precision', True),
    'min_recall': ('recall', True),
    'max_ser': ('ser', False),
}


def _as_dict(report: Report) -> Dict[str, Any]:
    return report.to_dict() if hasattr(report, 'to_dict') else dict(report)


def _flatten(data: Mapping[str, Any], prefix: str = '') -> Dict[str, Any]:
    flat = {}
    for key, value in data.items():
        name = f"{prefix}{key}"
        if isinstance(value, Mapping):
            flat.update(_flatten(value, f"{name}."))
        else:
            flat[name] = value
    return flat


def _fmt(value: Any) -> str:
    return f"{value:.4f}" if isinstance(value, float) else str(value)


def format_key_values(report: Report) -> str:
    """One sorted `key=value` line per scalar; nested keys are dotted."""
    flat = _flatten(_as_dict(report))
    return "\n".join(f"{key}={_fmt(flat[key])}" for key in sorted(flat)) + "\n"


def format_table(report: Report, title: str = "EVALUATION") -> str:
    data = _as_dict(report)
    lines = ["┌" + "─" * WIDTH + "┐", f"│ {title:<{WIDTH - 1}}│", "├" + "─" * WIDTH + "┤"]
    for key, value in data.items():
        if key == 'per_type':
            continue
        lines.append(f"│  {key:<20}{_fmt(value):>{WIDTH - 23}} │")
    per_type = data.get('per_type') or {}
    if per_type:
        lines.append("├" + "─" * WIDTH + "┤")
        lines.append(f"│  {'type':<20}{'P':>9}{'R':>9}{'F1':>9}{'tp/fp/fn':>{WIDTH - 50}} │")
        for name, score in per_type.items():
            counts = f"{score['tp']}/{score['fp']}/{score['fn']}"
            lines.append(f"│  {name[:20]:<20}{score['precision']:>9.4f}{score['recall']:>9.4f}"
                         f"{score['f1']:>9.4f}{counts:>{WIDTH - 50}} │")
    lines.append("└" + "─" * WIDTH + "┘")
    return "\n".join(lines) + "\n"


def check_thresholds(report: Report, thresholds: Mapping[str, float]) -> List[str]:
    """Human-readable violations of the configured thresholds (empty when all pass)."""
    data = _as_dict(report)
    violations = []
    for name, bound in sorted(thresholds.items()):
        if name not in THRESHOLDS:
            raise ValueError(f"unknown threshold {name}")
        key, lower = THRESHOLDS[name]
        if key not in data:
            continue
        value = data[key]
        if lower and value < bound:
            violations.append(f"{key}: {value:.4f} < {bound}")
        elif not lower and value > bound:
            violations.append(f"{key}: {value:.4f} > {bound}")
    return violations
