import math
from typing import List, Optional, Sequence

# Payments are reported with the precision the allocation tables use
PAYMENT_DECIMALS = 5


def format_number(value: Optional[float], decimals: int = PAYMENT_DECIMALS) -> str:
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return "-"
    return f"{value:.{decimals}f}"


def render_table(headers: Sequence[str], rows: Sequence[Sequence[str]]) -> str:
    """Plain right-aligned text table with a header rule."""
    widths = [len(h) for h in headers]
    for row in rows:
        widths = [max(w, len(cell)) for w, cell in zip(widths, row)]
    lines = ["  ".join(h.rjust(w) for h, w in zip(headers, widths))]
    lines.append("  ".join("-" * w for w in widths))
    for row in rows:
        lines.append("  ".join(cell.rjust(w) for cell, w in zip(row, widths)))
    return "\n".join(lines)


def allocation_table(allocation) -> str:
    headers: List[str] = ["activity", "payment"]
    sampled = allocation.std_errors is not None
    if sampled:
        headers += ["std_error", "rel_err_%"]
    rows = []
    for record in allocation.records():
        row = [record["activity"], format_number(record["payment"])]
        if sampled:
            row += [format_number(record["std_error"]), format_number(record["rel_err_pct"], 2)]
        rows.append(row)
    rows.append(["total", format_number(allocation.total)] + ([""] * 2 if sampled else []))
    return render_table(headers, rows)


def vector_text(values: Sequence[float], decimals: int = PAYMENT_DECIMALS) -> str:
    return "(" + ", ".join(format_number(float(v), decimals) for v in values) + ")"
