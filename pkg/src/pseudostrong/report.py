"""Fixed-width AP comparison tables."""

from __future__ import annotations

from decimal import ROUND_HALF_UP, Decimal
from typing import Sequence

from .errors import ClassSetMismatch
from .metrics import ApReport
from .voc import SHORT_NAMES, VOC_CLASSES

COLUMN_WIDTH = 6


def percent(value: float) -> str:
    """AP in [0, 1] as a percentage with one decimal, halves rounded away from zero.

    The product is first rounded to 9 decimals to shed binary noise:
    0.0045 * 100 evaluates to 0.44999999999999996 but prints 0.5.
    """
    d = Decimal(repr(round(value * 100, 9)))
    return str(d.quantize(Decimal("0.1"), rounding=ROUND_HALF_UP))


def render_table(reports: Sequence[tuple[str, ApReport]]) -> str:
    """One row per (name, report): 20 class columns, then the mean.

    Classes a report excludes print as ``-``; every report must cover the
    same classes.
    """
    if not reports:
        return ""
    classes = set(reports[0][1].per_class)
    for name, rep in reports[1:]:
        if set(rep.per_class) != classes:
            raise ClassSetMismatch(
                f"report {name!r} covers a different class set than {reports[0][0]!r}"
            )

    name_width = max(len("Method"), *(len(name) for name, _ in reports))
    header = ["Method".ljust(name_width)]
    header += [SHORT_NAMES[c].rjust(COLUMN_WIDTH) for c in VOC_CLASSES]
    header.append("Avg.".rjust(COLUMN_WIDTH))
    lines = [" ".join(header)]
    for name, rep in reports:
        row = [name.ljust(name_width)]
        for c in VOC_CLASSES:
            cell = percent(rep.per_class[c]) if c in rep.per_class else "-"
            row.append(cell.rjust(COLUMN_WIDTH))
        row.append(percent(rep.mean_ap).rjust(COLUMN_WIDTH))
        lines.append(" ".join(row))
    return "\n".join(lines) + "\n"


def parse_table_row(values: Sequence[str]) -> dict[str, float]:
    """Per-class APs in [0, 1] from 20 percentage strings in table column order."""
    if len(values) != len(VOC_CLASSES):
        raise ValueError(f"expected {len(VOC_CLASSES)} values, got {len(values)}")
    return {c: float(v) / 100 for c, v in zip(VOC_CLASSES, values)}
