"""
Rich tables for configuration diffs and experiment summaries.

print_diff shows the keys a run changes relative to the defaults;
print_summary renders the compare output.
"""

from typing import Any, Dict, Sequence

from rich.table import Table

from utils.console import console


def print_diff(defaults: Dict[str, Any], current: Dict[str, Any], title: str = "Config overrides") -> int:
    """
    Print the keys whose values differ between two flat dictionaries.

    Unchanged keys are hidden.

    Args:
        defaults: Reference values (usually dataclass defaults)
        current: Values in effect for this run
        title: Table title

    Returns:
        Number of differing keys
    """
    table = Table(title=title)
    table.add_column("Field", style="cyan", no_wrap=True)
    table.add_column("Default", style="red")
    table.add_column("Run", style="green")

    changed = 0
    for key in sorted(set(defaults) | set(current)):
        default_val = defaults.get(key)
        current_val = current.get(key)
        if default_val != current_val:
            changed += 1
            table.add_row(key, _format_value(default_val), _format_value(current_val))

    if changed:
        console.print(table)
    else:
        console.print("[green]Running with default parameters[/green]")
    return changed


def print_summary(rows: Sequence, title: str = "Energy comparison") -> None:
    """Render SummaryRow records, one line per (protocol, scheme, N, K)."""
    table = Table(title=title)
    table.add_column("Protocol", style="cyan")
    table.add_column("Scheme")
    table.add_column("N", justify="right")
    table.add_column("K", justify="right")
    table.add_column("Seeds", justify="right")
    table.add_column("Energy (J)", justify="right", style="green")
    table.add_column("Reduction", justify="right", style="magenta")
    table.add_column("Rank", justify="right")
    for row in rows:
        reduction = f"{float(row.reduction_pct):.1f}%" if row.reduction_pct != "" else "[dim]-[/dim]"
        table.add_row(
            row.protocol, row.scheme, str(row.N), str(row.K), str(row.n_seeds),
            f"{row.mean_energy_J:.4f} ± {row.std_energy_J:.4f}",
            reduction,
            str(row.protocol_rank) or "[dim]-[/dim]",
        )
    console.print(table)


def _format_value(value: Any) -> str:
    """
    Format a value for display in the diff table.

    Args:
        value: Value to format

    Returns:
        Formatted string representation
    """
    if value is None:
        return "[dim]None[/dim]"
    if isinstance(value, dict):
        return f"{{...}} ({len(value)} keys)"
    if isinstance(value, (list, tuple)):
        return ", ".join(str(v) for v in value) if len(value) <= 4 else f"[...] ({len(value)} items)"
    str_val = str(value)
    if len(str_val) > 50:
        return str_val[:47] + "..."
    return str_val
