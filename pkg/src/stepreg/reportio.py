"""CSV emission for experiment reports.

Every file starts with `# key = value` comment lines echoing the resolved
configuration (plus seed and package version), then a header row, then the
data rows.  Floats are written with repr-precision so identical runs are
byte-identical.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence

__all__ = ["format_value", "write_csv", "config_lines"]


def format_value(v) -> str:
    if isinstance(v, float):
        return repr(v)  # shortest exact round-trip, so reruns match bytewise
    return str(v)


def config_lines(config: Mapping, version: str) -> list[str]:
    lines = [f"stepreg_version = {version}"]
    for key in sorted(config):
        lines.append(f"{key} = {format_value(config[key])}")
    return lines


def write_csv(path, fieldnames: Sequence[str], rows: Iterable[Mapping], header_lines: Iterable[str] = ()) -> None:
    with open(path, "w", newline="") as fh:
        for line in header_lines:
            fh.write(f"# {line}\n")
        fh.write(",".join(fieldnames) + "\n")
        for row in rows:
            fh.write(",".join(format_value(row.get(name, "")) for name in fieldnames) + "\n")
