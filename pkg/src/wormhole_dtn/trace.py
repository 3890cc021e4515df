"""Event trace: the chronological record of one simulation run.

File format (UTF-8, one record per line, append-only)::

    # wormhole-dtn trace v1
    # config area.width = 4500.0
    # ...                                  (every config key, see config.dump_config)
    # truth.wormhole_pairs = [[48, 49], [50, 51]]
    12.000000 CONTACT_UP a=3 b=48
    14.512000 XFER_DONE msg=7 from=3 to=48 copies=1 kept=1 hops=3,48

Times are seconds with exactly six decimals; internally they are integer
microseconds so that a parsed trace is identical to the live one.

Record kinds and their fields, in order:

=============  ==============================================================
MSG_CREATE     msg src dst size copies
CONTACT_UP     a b                     (radio contact, a < b)
CONTACT_DOWN   a b
XFER_DONE      msg from to copies kept hops
               copies: copies now held by ``to``; kept: copies left at
               ``from`` (0 means the sender dropped its copy); hops: the path
               of the received copy, ending with ``to``
XFER_ABORT     msg from to reason      (linkdown, gone, dup, full, stale)
DROP           msg at reason           (evict)
TUNNEL_XFER    msg from to copies kept (covert channel, ground truth only)
POS            node x y                (debug, optional)
=============  ==============================================================

A message delivered to its destination is not buffered there.
"""

from __future__ import annotations

import io
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator

US = 1_000_000
MAGIC = "# wormhole-dtn trace v1"

KIND_FIELDS: dict[str, tuple[str, ...]] = {
    "MSG_CREATE": ("msg", "src", "dst", "size", "copies"),
    "CONTACT_UP": ("a", "b"),
    "CONTACT_DOWN": ("a", "b"),
    "XFER_DONE": ("msg", "from", "to", "copies", "kept", "hops"),
    "XFER_ABORT": ("msg", "from", "to", "reason"),
    "DROP": ("msg", "at", "reason"),
    "TUNNEL_XFER": ("msg", "from", "to", "copies", "kept"),
    "POS": ("node", "x", "y"),
}

_STR_FIELDS = {"reason"}
_FLOAT_FIELDS = {("POS", "x"), ("POS", "y")}


def to_us(seconds: float) -> int:
    return int(round(seconds * US))


def format_time(t_us: int) -> str:
    return f"{t_us // US}.{t_us % US:06d}"


def parse_time(text: str) -> int:
    whole, _, frac = text.partition(".")
    return int(whole) * US + int(frac.ljust(6, "0")[:6])


class TraceFormatError(ValueError):
    pass


# A record is a plain tuple ``(t_us, kind, *values)`` in KIND_FIELDS order.
Record = tuple


def format_record(rec: Record) -> str:
    t, kind, *values = rec
    names = KIND_FIELDS[kind]
    parts = [format_time(t), kind]
    for name, value in zip(names, values):
        if name == "hops":
            value = ",".join(map(str, value))
        elif isinstance(value, float):
            value = f"{value:.3f}"
        parts.append(f"{name}={value}")
    return " ".join(parts)


def parse_record(line: str) -> Record:
    try:
        time_text, kind, *pairs = line.split()
        names = KIND_FIELDS[kind]
    except (ValueError, KeyError):
        raise TraceFormatError(f"bad record: {line!r}") from None
    if len(pairs) != len(names):
        raise TraceFormatError(f"{kind} expects fields {names}: {line!r}")
    values = []
    for name, pair in zip(names, pairs):
        key, _, text = pair.partition("=")
        if key != name:
            raise TraceFormatError(f"expected field {name!r} in {line!r}")
        try:
            if name == "hops":
                values.append(tuple(int(v) for v in text.split(",")))
            elif name in _STR_FIELDS:
                values.append(text)
            elif (kind, name) in _FLOAT_FIELDS:
                values.append(float(text))
            else:
                values.append(int(text))
        except ValueError:
            raise TraceFormatError(f"bad value for {name!r} in {line!r}") from None
    try:
        t = parse_time(time_text)
    except ValueError:
        raise TraceFormatError(f"bad time in {line!r}") from None
    return (t, kind, *values)


@dataclass
class EventTrace:
    """Header (config text + ground truth) plus the ordered record list."""

    config_text: str = ""
    wormhole_pairs: list[tuple[int, int]] = field(default_factory=list)
    records: list[Record] = field(default_factory=list)

    def __iter__(self) -> Iterator[Record]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def append(self, rec: Record) -> None:
        self.records.append(rec)

    def of_kind(self, *kinds: str) -> Iterator[Record]:
        return (r for r in self.records if r[1] in kinds)

    @property
    def config(self):
        from .config import load_config

        return load_config(self.config_text)

    def header_lines(self) -> list[str]:
        lines = [MAGIC]
        lines += [f"# config {ln}" for ln in self.config_text.splitlines() if ln.strip()]
        lines.append(f"# truth.wormhole_pairs = {json.dumps([list(p) for p in self.wormhole_pairs])}")
        return lines

    def write(self, out) -> None:
        for line in self.header_lines():
            out.write(line + "\n")
        for rec in self.records:
            out.write(format_record(rec) + "\n")

    def to_text(self) -> str:
        buf = io.StringIO()
        self.write(buf)
        return buf.getvalue()

    def save(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            self.write(fh)

    @classmethod
    def from_lines(cls, lines: Iterable[str]) -> EventTrace:
        trace = cls()
        config_lines = []
        it = iter(lines)
        first = next(it, "").rstrip("\n")
        if first != MAGIC:
            raise TraceFormatError("missing trace header")
        for raw in it:
            line = raw.rstrip("\n")
            if not line:
                continue
            if line.startswith("# config "):
                config_lines.append(line[len("# config "):])
            elif line.startswith("# truth.wormhole_pairs = "):
                pairs = json.loads(line.split("=", 1)[1])
                trace.wormhole_pairs = [tuple(p) for p in pairs]
            elif line.startswith("#"):
                continue
            else:
                trace.records.append(parse_record(line))
        trace.config_text = "\n".join(config_lines) + "\n"
        return trace

    @classmethod
    def parse(cls, text: str) -> EventTrace:
        return cls.from_lines(text.splitlines())

    @classmethod
    def load(cls, path: str | Path) -> EventTrace:
        with open(path, encoding="utf-8") as fh:
            return cls.from_lines(fh)
