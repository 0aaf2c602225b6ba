"""Allocation traces: parsing, synthetic generation and replay.

Grammar (one event per LF-terminated line, decimal integers)::

    a <id> <bytes>      allocate
    f <id>              free
    t <tid>             switch acting thread
    m                   force a mesh cycle
    s                   emit a stats row
    set <key> <value>   change a runtime config value
    # ...               comment
"""

from __future__ import annotations

import csv
import dataclasses
import io
from dataclasses import dataclass, field
from typing import Iterable, Union

from meshalloc.core import Config, Rng
from meshalloc.errors import DoubleFree, InvalidPointer
from meshalloc.heap import MeshHeap, STATS_CSV_HEADER
from meshalloc.mesher import MESH_CSV_HEADER


class TraceError(ValueError):
    def __init__(self, lineno: int, msg: str):
        super().__init__(f"line {lineno}: {msg}")
        self.lineno = lineno


@dataclass(frozen=True)
class Alloc:
    id: int
    bytes: int
    lineno: int = 0


@dataclass(frozen=True)
class Free:
    id: int
    lineno: int = 0


@dataclass(frozen=True)
class Thread:
    tid: int
    lineno: int = 0


@dataclass(frozen=True)
class ForceMesh:
    lineno: int = 0


@dataclass(frozen=True)
class Snapshot:
    lineno: int = 0


@dataclass(frozen=True)
class Set:
    key: str
    value: str
    lineno: int = 0


@dataclass(frozen=True)
class Comment:
    text: str
    lineno: int = 0


TraceEvent = Union[Alloc, Free, Thread, ForceMesh, Snapshot, Set, Comment]

_CONFIG_KEYS = {f.name for f in dataclasses.fields(Config)}


def _int(tok, lineno, what):
    if not tok.isdigit():
        raise TraceError(lineno, f"{what} must be a non-negative decimal integer, got {tok!r}")
    return int(tok)


def parse_trace(text: Union[str, Iterable[str]], validate: bool = True) -> list:
    """Parse trace text into events, keeping line numbers for diagnostics."""
    lines = text.split("\n") if isinstance(text, str) else text
    events = []
    for lineno, raw in enumerate(lines, 1):
        line = raw.rstrip("\n").strip()
        if not line:
            continue
        if line.startswith("#"):
            events.append(Comment(line[1:].strip(), lineno))
            continue
        tok = line.split()
        op, args = tok[0], tok[1:]
        arity = {"a": 2, "f": 1, "t": 1, "m": 0, "s": 0, "set": 2}.get(op)
        if arity is None:
            raise TraceError(lineno, f"unknown directive {op!r}")
        if len(args) != arity:
            raise TraceError(lineno, f"{op!r} takes {arity} argument(s), got {len(args)}")
        if op == "a":
            events.append(Alloc(_int(args[0], lineno, "id"), _int(args[1], lineno, "size"), lineno))
        elif op == "f":
            events.append(Free(_int(args[0], lineno, "id"), lineno))
        elif op == "t":
            events.append(Thread(_int(args[0], lineno, "thread id"), lineno))
        elif op == "m":
            events.append(ForceMesh(lineno))
        elif op == "s":
            events.append(Snapshot(lineno))
        else:
            if args[0] not in _CONFIG_KEYS:
                raise TraceError(lineno, f"unknown config key {args[0]!r}")
            events.append(Set(args[0], args[1], lineno))
    if validate:
        validate_trace(events)
    return events


def validate_trace(events) -> None:
    """Alloc ids are unique over the trace; frees name a live allocation."""
    live = set()
    seen = set()
    for ev in events:
        if isinstance(ev, Alloc):
            if ev.id in seen:
                raise TraceError(ev.lineno, f"allocation id {ev.id} reused")
            seen.add(ev.id)
            live.add(ev.id)
        elif isinstance(ev, Free):
            if ev.id not in live:
                raise TraceError(ev.lineno, f"free of unknown or dead id {ev.id}")
            live.remove(ev.id)


def format_trace(events) -> str:
    out = []
    for ev in events:
        if isinstance(ev, Alloc):
            out.append(f"a {ev.id} {ev.bytes}")
        elif isinstance(ev, Free):
            out.append(f"f {ev.id}")
        elif isinstance(ev, Thread):
            out.append(f"t {ev.tid}")
        elif isinstance(ev, ForceMesh):
            out.append("m")
        elif isinstance(ev, Snapshot):
            out.append("s")
        elif isinstance(ev, Set):
            out.append(f"set {ev.key} {ev.value}")
        else:
            out.append(f"# {ev.text}")
    return "\n".join(out) + ("\n" if out else "")


# -- workloads -----------------------------------------------------------------

STRING_CHURN_DEFAULTS = dict(rounds=6, count_per_round=20_000, start_len=64,
                             keep_fraction=0.25, live_budget=64 << 20)


def string_churn(rounds=6, count_per_round=20_000, start_len=64, keep_fraction=0.25,
                 rng: Rng | None = None, live_budget: int = 64 << 20) -> list:
    """Accumulate-and-filter string workload.

    Each round allocates ``count_per_round`` strings of one length, then
    frees all but an evenly spaced ``keep_fraction`` of them; survivors stay
    live to the end.  Round ``k`` uses length ``start_len * 2**k``.  A round
    is shortened if allocating it in full would push live string bytes past
    ``live_budget``.  ``rng`` only permutes the order of frees in a round.
    """
    if not 0 <= keep_fraction <= 1:
        raise ValueError("keep_fraction must be in [0, 1]")
    rng = rng if rng is not None else Rng(0)
    events = []
    next_id = 0
    retained = 0
    for k in range(rounds):
        length = start_len << k
        count = min(count_per_round, max(0, live_budget - retained) // length)
        ids = list(range(next_id, next_id + count))
        next_id += count
        events.extend(Alloc(i, length) for i in ids)
        doomed = [i for n, i in enumerate(ids)
                  if int((n + 1) * keep_fraction) == int(n * keep_fraction)]
        retained += (count - len(doomed)) * length
        rng.shuffle(doomed)
        events.extend(Free(i) for i in doomed)
    return events


# -- replay --------------------------------------------------------------------

@dataclass
class RunSummary:
    events: int = 0
    snapshots: int = 0
    mean_rss: float = 0.0
    peak_rss: int = 0
    live_byte_integral: int = 0
    meshes_total: int = 0
    meshed_bytes_reclaimed: int = 0
    mesh_cycles: int = 0
    invalid_frees: int = 0
    double_frees: int = 0
    rows: list = field(default_factory=list, repr=False)

    def as_dict(self):
        d = dataclasses.asdict(self)
        d.pop("rows")
        return d


def replay(events, config: Config | None = None, csv_out=None, mesh_out=None,
           check_invariants: bool = False, heap: MeshHeap | None = None) -> RunSummary:
    """Run ``events`` against a fresh heap.

    A stats row goes to ``csv_out`` on every ``s`` and every
    ``config.snapshot_every`` allocator events.  Mean RSS and the live-byte
    integral are taken over every allocator event.
    """
    config = dataclasses.replace(config) if config is not None else Config()
    heap = heap if heap is not None else MeshHeap(config)
    config = heap.config
    writer = csv.writer(csv_out, lineterminator="\n") if csv_out is not None else None
    if writer:
        writer.writerow(STATS_CSV_HEADER)
    summary = RunSummary()
    ptrs: dict[int, int] = {}
    rss_sum = 0

    def emit():
        row = heap.snapshot()
        summary.rows.append(row)
        summary.snapshots += 1
        if writer:
            writer.writerow(row.csv_fields())

    for ev in events:
        kind = type(ev)
        if kind is Alloc:
            ptrs[ev.id] = heap.malloc(ev.bytes)
        elif kind is Free:
            ptr = ptrs.pop(ev.id, None)
            if ptr is None:
                raise TraceError(ev.lineno, f"free of unknown id {ev.id}")
            try:
                heap.free(ptr)
            except (InvalidPointer, DoubleFree):
                pass  # counted by the heap
        elif kind is Thread:
            heap.current_thread = ev.tid
            continue
        elif kind is ForceMesh:
            heap.mesh_now()
            continue
        elif kind is Snapshot:
            emit()
            continue
        elif kind is Set:
            config.set(ev.key, ev.value)
            continue
        else:
            continue
        summary.events += 1
        rss = heap.rss_bytes
        rss_sum += rss
        if rss > summary.peak_rss:
            summary.peak_rss = rss
        summary.live_byte_integral += heap.live_bytes
        if check_invariants:
            heap.check_invariants()
        if config.snapshot_every and summary.events % config.snapshot_every == 0:
            emit()

    if summary.events:
        summary.mean_rss = rss_sum / summary.events
    st = heap.stats
    summary.meshes_total = st.meshes_total
    summary.meshed_bytes_reclaimed = st.meshed_bytes_reclaimed
    summary.mesh_cycles = st.mesh_cycles
    summary.invalid_frees = st.invalid_frees
    summary.double_frees = st.double_frees
    if mesh_out is not None:
        mw = csv.writer(mesh_out, lineterminator="\n")
        mw.writerow(MESH_CSV_HEADER)
        for rep in heap.global_heap.reports:
            mw.writerows(rep.csv_rows())
    return summary


def replay_text(text: str, config: Config | None = None, **kw) -> tuple[RunSummary, str]:
    buf = io.StringIO()
    summary = replay(parse_trace(text), config, csv_out=buf, **kw)
    return summary, buf.getvalue()
