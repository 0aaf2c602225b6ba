"""Shared heap: occupancy bins, span hand-out, large objects, remote frees, meshing."""

from __future__ import annotations

import bisect
import threading
from contextlib import contextmanager
from dataclasses import dataclass

from meshalloc.arena import Arena
from meshalloc.core import Config, Rng, SizeClassTable, DEFAULT_TABLE
from meshalloc.errors import DoubleFree, InvalidPointer
from meshalloc.mesher import MeshReport, mesh_size_class
from meshalloc.miniheap import MiniHeap


class IndexedSet:
    """Insertion-ordered set with O(1) add, remove and random pop."""

    __slots__ = ("_items", "_pos")

    def __init__(self):
        self._items = []
        self._pos = {}

    def __len__(self):
        return len(self._items)

    def __iter__(self):
        return iter(self._items)

    def __contains__(self, x):
        return x in self._pos

    def add(self, x):
        if x not in self._pos:
            self._pos[x] = len(self._items)
            self._items.append(x)

    def remove(self, x):
        i = self._pos.pop(x)
        last = self._items.pop()
        if last is not x:
            self._items[i] = last
            self._pos[last] = i

    def pop_random(self, rng: Rng):
        x = self._items[rng.below(len(self._items))]
        self.remove(x)
        return x


@dataclass
class MeshScheduler:
    """Event-count rate limiter for mesh cycles.

    After a cycle that reclaimed less than ``min_reclaim`` bytes the
    scheduler is disarmed and its counter frozen until the next free routed
    through the global heap.
    """

    period: int = 10_000
    min_reclaim: int = 1 << 20
    events_since_mesh: int = 0
    last_reclaim: int = 0
    armed: bool = True

    def tick(self):
        if self.armed:
            self.events_since_mesh += 1

    def on_global_free(self):
        if not self.armed:
            self.armed = True
            self.events_since_mesh = 0

    def due(self) -> bool:
        return self.armed and self.events_since_mesh >= self.period

    def record(self, reclaimed: int):
        self.events_since_mesh = 0
        self.last_reclaim = reclaimed
        self.armed = reclaimed >= self.min_reclaim


@dataclass
class HeapStats:
    invalid_frees: int = 0
    double_frees: int = 0
    meshes_total: int = 0
    meshed_bytes_reclaimed: int = 0
    mesh_cycles: int = 0
    lock_acquisitions: int = 0


class GlobalHeap:
    def __init__(self, config: Config | None = None, table: SizeClassTable = DEFAULT_TABLE,
                 rng: Rng | None = None):
        self.config = config if config is not None else Config()
        self.table = table
        self.rng = rng if rng is not None else Rng(self.config.rng_seed)
        self.arena = Arena(table.page_size, self.config.punch_threshold_bytes)
        self.miniheaps: dict[int, MiniHeap] = {}
        self._next_id = 1
        nbins = len(self.config.occupancy_bin_edges) + 1
        # per class: partial bins (ascending occupancy) followed by the full list
        self.bins = [[IndexedSet() for _ in range(nbins + 1)] for _ in range(len(table))]
        self.scheduler = MeshScheduler(self.config.mesh_period_events,
                                       self.config.mesh_min_reclaim_bytes)
        self.stats = HeapStats()
        self.reports: list[MeshReport] = []
        self.event_index = 0
        self._lock = threading.Lock()

    @contextmanager
    def locked(self):
        with self._lock:
            self.stats.lock_acquisitions += 1
            yield

    # -- bins ----------------------------------------------------------------

    def bin_index(self, mh: MiniHeap) -> int:
        if mh.is_full():
            return len(self.config.occupancy_bin_edges) + 1
        return bisect.bisect_right(self.config.occupancy_bin_edges, mh.occupancy())

    def unbin(self, mh: MiniHeap) -> None:
        if mh.bin_index is not None:
            self.bins[mh.size_class][mh.bin_index].remove(mh)
            mh.bin_index = None

    def rebin(self, mh: MiniHeap) -> None:
        """Place a detached small MiniHeap in the bin matching its occupancy."""
        self.unbin(mh)
        if mh.attached or mh.is_large or mh.retired:
            return
        if mh.is_empty():
            self._free_miniheap(mh)
            return
        idx = self.bin_index(mh)
        self.bins[mh.size_class][idx].add(mh)
        mh.bin_index = idx

    def partial_miniheaps(self, cls: int) -> list[MiniHeap]:
        out = []
        for b in self.bins[cls][:-1]:
            out.extend(b)
        return out

    def retire(self, mh: MiniHeap) -> None:
        self.unbin(mh)
        self.miniheaps.pop(mh.id, None)

    def _free_miniheap(self, mh: MiniHeap) -> None:
        self.unbin(mh)
        self.arena.free_span(mh)
        mh.retired = True
        del self.miniheaps[mh.id]

    # -- span hand-out ----------------------------------------------------------

    def _new_miniheap(self, cls, object_size, count, pages, is_large=False) -> MiniHeap:
        vid, pid = self.arena.allocate_span(pages)
        mh = MiniHeap(self._next_id, cls, object_size, count, pages, vid, pid, is_large)
        self._next_id += 1
        self.miniheaps[mh.id] = mh
        self.arena.assign(vid, mh)
        return mh

    def select_miniheap(self, cls: int, owner) -> MiniHeap:
        """Highest-occupancy partial span (random within its bin), else a fresh one.

        Caller holds the lock.
        """
        for b in reversed(self.bins[cls][:-1]):
            if len(b):
                mh = b.pop_random(self.rng)
                mh.bin_index = None
                break
        else:
            t = self.table
            mh = self._new_miniheap(cls, t.object_size(cls), t.object_count(cls),
                                    t.span_pages[cls])
        mh.owner = owner
        return mh

    def release_miniheap(self, mh: MiniHeap) -> None:
        """Take back a span detached from a thread-local heap.  Caller holds the lock."""
        mh.owner = None
        self.rebin(mh)

    def span_start(self, mh: MiniHeap) -> int:
        return self.arena.vspans[mh.virtual_spans[0]].start

    def malloc_large(self, size: int) -> int:
        ps = self.arena.page_size
        pages = -(-size // ps)
        with self.locked():
            mh = self._new_miniheap(None, pages * ps, 1, pages, is_large=True)
            mh.try_set(0)
            return self.span_start(mh)

    # -- frees --------------------------------------------------------------------

    def free(self, ptr: int) -> MiniHeap:
        """Non-local free.  Invalid and double frees are counted, then re-raised
        with the heap left unchanged."""
        with self.locked():
            try:
                mh, off = self.arena.resolve(ptr)
                vec = mh.vector
                if vec is not None and vec.holds(off):
                    # already free in the owner's vector (bit still reserved)
                    raise DoubleFree(f"offset {off} is not allocated")
                mh.reset(off)
            except InvalidPointer:
                self.stats.invalid_frees += 1
                raise
            except DoubleFree:
                self.stats.double_frees += 1
                raise
            if mh.is_large:
                self._free_miniheap(mh)
            elif not mh.attached:
                self.rebin(mh)
            self.scheduler.on_global_free()
            self.maybe_mesh()
            return mh

    # -- meshing ------------------------------------------------------------------

    def tick(self) -> None:
        self.event_index += 1
        self.scheduler.tick()

    def maybe_mesh(self, force: bool = False) -> MeshReport | None:
        """Run a mesh cycle if the scheduler is due (or ``force``).  Lock held."""
        cfg = self.config
        self.scheduler.period = cfg.mesh_period_events
        self.scheduler.min_reclaim = cfg.mesh_min_reclaim_bytes
        if not cfg.meshing or not (force or self.scheduler.due()):
            return None
        report = MeshReport(self.event_index)
        for cls in range(len(self.table)):
            res = mesh_size_class(self, cls, cfg.splitmesher_t)
            if res.candidates:
                report.classes.append(res)
        report.punched_bytes = self.arena.punch_holes_if_needed(force=True)
        self.stats.mesh_cycles += 1
        self.stats.meshes_total += report.pairs
        self.stats.meshed_bytes_reclaimed += report.bytes_reclaimed
        self.scheduler.record(report.bytes_reclaimed)
        self.reports.append(report)
        return report
