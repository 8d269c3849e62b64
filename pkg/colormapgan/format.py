from .rounding import to_places


def format_percentage(fraction: float, ndigits: int = 2) -> str:
    """Express a fraction in [0, 1] as a percentage string without the sign."""
    return str(to_places(100 * fraction, ndigits))


def format_table(
        header: list[str],
        rows: list[list[str]],
        first_width: int | None = None,
        width: int = 10,
    ) -> str:
    """Lay out a plain-text table with a left-aligned label column.

    The label column is as wide as its longest entry unless `first_width` is given;
    every other column is right-aligned in `width` characters.
    """
    if first_width is None:
        first_width = max(len(str(row[0])) for row in [header, *rows])
    lines = []
    for n, row in enumerate([header, *rows]):
        label, *cells = [str(cell) for cell in row]
        line = label.ljust(first_width) + "".join(cell.rjust(width) for cell in cells)
        lines.append(line.rstrip())
        if n == 0:
            lines.append("-" * (first_width + width * len(cells)))
    return "\n".join(lines)


def format_csv(header: list[str], rows: list[list]) -> str:
    """Comma-separated rows with a header line and a trailing newline."""
    return "\n".join(",".join(str(cell) for cell in row) for row in [header, *rows]) + "\n"


def format_audit(command: str, fields: dict) -> str:
    """Render an audit record as `command key=value ...`."""
    return " ".join([command, *(f"{key}={value}" for key, value in fields.items())])
