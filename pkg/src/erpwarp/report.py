"""Plain-text and CSV reports.

A report opens with a reproducibility header: the command, the seed and the
fully resolved configuration as one JSON line.  The timestamp is the only
run-dependent content and always sits alone on the second line.
"""

from __future__ import annotations

import csv
import io
import json
import math
from datetime import datetime, timezone


def fmt(value) -> str:
    if value is None:
        return "undefined"
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        return format(value, ".10g")
    if hasattr(value, "value"):
        return str(value.value)
    return str(value)


class Report:
    def __init__(self, command: str, config: dict, seed: int):
        self.command = command
        self.config = config
        self.seed = seed
        self.sections = []

    def section(self, name: str, items: dict | None = None):
        self.sections.append(("kv", name, dict(items or {})))

    def table(self, name: str, columns, rows):
        self.sections.append(("table", name, (list(columns), [list(r) for r in rows])))

    def header_lines(self, timestamp=None) -> list:
        ts = timestamp or datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")
        return [
            f"# erpwarp report: {self.command}",
            f"timestamp: {ts}",
            f"seed: {self.seed}",
            "config: " + json.dumps(self.config, sort_keys=True, separators=(",", ":")),
        ]

    def render(self, fmt_name="text", timestamp=None) -> str:
        if fmt_name == "csv":
            return self._render_csv(timestamp)
        lines = self.header_lines(timestamp)
        for kind, name, body in self.sections:
            lines.append("")
            lines.append(f"[{name}]")
            if kind == "kv":
                for k, v in body.items():
                    lines.append(f"{k} = {fmt(v)}")
            else:
                cols, rows = body
                cells = [cols] + [[fmt(v) for v in r] for r in rows]
                widths = [max(len(row[i]) for row in cells) for i in range(len(cols))]
                for row in cells:
                    lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
        return "\n".join(lines) + "\n"

    def _render_csv(self, timestamp=None) -> str:
        head = self.header_lines(timestamp)
        buf = io.StringIO()
        for line in head:
            buf.write(line + "\n")
        w = csv.writer(buf, lineterminator="\n")
        for kind, name, body in self.sections:
            if kind == "kv":
                for k, v in body.items():
                    w.writerow([name, k, fmt(v)])
            else:
                cols, rows = body
                w.writerow([name] + cols)
                for r in rows:
                    w.writerow([name] + [fmt(v) for v in r])
        return buf.getvalue()

    def write(self, path, fmt_name="text", timestamp=None) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.render(fmt_name, timestamp))


def strip_timestamp(text: str) -> str:
    return "\n".join(l for l in text.splitlines() if not l.startswith("timestamp: "))
