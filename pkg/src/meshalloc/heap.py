"""Whole-allocator facade: global heap plus lazily created thread-local heaps."""

from __future__ import annotations

from dataclasses import dataclass

from meshalloc.core import Config, Rng, SizeClassTable, DEFAULT_TABLE
from meshalloc.errors import InvalidPointer, InvariantViolation
from meshalloc.global_heap import GlobalHeap
from meshalloc.local_heap import LocalHeap

STATS_CSV_HEADER = ("event_index", "live_bytes", "rss_bytes", "physical_spans",
                    "virtual_spans", "meshes_total", "meshed_bytes_reclaimed",
                    "fragmentation")


@dataclass(frozen=True)
class StatsRow:
    event_index: int
    live_bytes: int
    rss_bytes: int
    physical_spans: int
    virtual_spans: int
    meshes_total: int
    meshed_bytes_reclaimed: int

    @property
    def fragmentation(self) -> float:
        return self.rss_bytes / self.live_bytes if self.live_bytes else 0.0

    def csv_fields(self):
        return (self.event_index, self.live_bytes, self.rss_bytes, self.physical_spans,
                self.virtual_spans, self.meshes_total, self.meshed_bytes_reclaimed,
                f"{self.fragmentation:.6f}")


class MeshHeap:
    """A meshing allocator over a simulated arena.

    Thread identity is logical: each call names the acting thread (default
    ``current_thread``), and every thread gets its own shuffle vectors and
    random stream derived from ``config.rng_seed``.
    """

    def __init__(self, config: Config | None = None, table: SizeClassTable = DEFAULT_TABLE):
        self.config = config if config is not None else Config()
        self._root_rng = Rng(self.config.rng_seed)
        self.global_heap = GlobalHeap(self.config, table, self._root_rng.spawn(0))
        self.arena = self.global_heap.arena
        self.table = table
        self.locals: dict[int, LocalHeap] = {}
        self.current_thread = 0
        self.live_bytes = 0
        self.live_objects = 0

    def local(self, thread=None) -> LocalHeap:
        tid = self.current_thread if thread is None else thread
        lh = self.locals.get(tid)
        if lh is None:
            lh = LocalHeap(tid, self.global_heap, self._root_rng.spawn(tid + 1),
                           self.config.randomize)
            self.locals[tid] = lh
        return lh

    @property
    def stats(self):
        return self.global_heap.stats

    # -- allocation API ------------------------------------------------------

    def malloc(self, size: int, thread=None) -> int:
        self.global_heap.tick()
        ptr = self.local(thread).malloc(size)
        self.live_bytes += self.arena.resolve(ptr)[0].object_size
        self.live_objects += 1
        return ptr

    def free(self, ptr: int, thread=None) -> None:
        self.global_heap.tick()
        try:
            size = self.arena.resolve(ptr)[0].object_size
        except InvalidPointer:
            size = 0
        self.local(thread).free(ptr)
        self.live_bytes -= size
        self.live_objects -= 1

    def read(self, ptr: int, length: int) -> bytes:
        return self.arena.read(ptr, length)

    def write(self, ptr: int, data: bytes) -> None:
        self.arena.write(ptr, data)

    def mesh_now(self):
        gh = self.global_heap
        with gh.locked():
            return gh.maybe_mesh(force=True)

    def detach_all(self) -> None:
        for lh in self.locals.values():
            lh.detach_all()

    # -- introspection ----------------------------------------------------------

    @property
    def rss_bytes(self) -> int:
        return self.arena.rss_bytes

    def snapshot(self) -> StatsRow:
        gh = self.global_heap
        return StatsRow(gh.event_index, self.live_bytes, self.arena.rss_bytes,
                        self.arena.physical_span_count, self.arena.virtual_span_count,
                        gh.stats.meshes_total, gh.stats.meshed_bytes_reclaimed)

    def _vector_for(self, mh):
        return mh.vector

    def live_slots(self) -> set[tuple[int, int]]:
        """Live (miniheap id, offset) pairs read off bitmaps and shuffle vectors."""
        out = set()
        for mh in self.global_heap.miniheaps.values():
            vec = self._vector_for(mh)
            live = mh.bitmap.bits & ~vec.free_mask if vec is not None else mh.bitmap.bits
            mid = mh.id
            while live:
                low = live & -live
                out.add((mid, low.bit_length() - 1))
                live ^= low
        return out

    def dump(self) -> str:
        return "\n".join(mh.dump() for mh in self.global_heap.miniheaps.values())

    def check_invariants(self) -> None:
        """Raise InvariantViolation if any structural invariant is broken."""
        gh = self.global_heap
        arena = self.arena
        live = 0
        objects = 0
        seen_pspans = set()
        for mh in gh.miniheaps.values():
            bm = mh.bitmap
            if bm.popcount != bm.bits.bit_count() or bm.bits >> bm.count:
                raise InvariantViolation(f"bitmap cache broken for {mh.dump()}")
            if mh.physical_span not in arena.physical_live:
                raise InvariantViolation(f"miniheap {mh.id} has no live physical span")
            if mh.physical_span in seen_pspans:
                raise InvariantViolation(f"physical span {mh.physical_span} shared")
            seen_pspans.add(mh.physical_span)
            for vid in mh.virtual_spans:
                vs = arena.vspans.get(vid)
                if vs is None or vs.pspan != mh.physical_span or vs.miniheap is not mh:
                    raise InvariantViolation(f"virtual span {vid} of {mh.id} misrouted")
            vec = self._vector_for(mh)
            if mh.owner is not None and vec is None:
                raise InvariantViolation(f"miniheap {mh.id} owned but not attached")
            held = (vec.end - vec.head) if vec is not None else 0
            n = bm.popcount - held
            live += n * mh.object_size
            objects += n
            if mh.attached or mh.is_large:
                if mh.bin_index is not None:
                    raise InvariantViolation(f"attached/large miniheap {mh.id} is binned")
            else:
                if mh.is_empty():
                    raise InvariantViolation(f"empty detached miniheap {mh.id} kept")
                if mh.bin_index != gh.bin_index(mh) or mh not in gh.bins[mh.size_class][mh.bin_index]:
                    raise InvariantViolation(f"miniheap {mh.id} in wrong bin")
        if seen_pspans != arena.physical_live:
            raise InvariantViolation("physical spans leaked")
        if live != self.live_bytes or objects != self.live_objects:
            raise InvariantViolation(
                f"conservation: bitmaps say {objects} objects/{live} B, "
                f"heap says {self.live_objects}/{self.live_bytes}")
        if arena.rss_bytes < self.live_bytes:
            raise InvariantViolation("rss below live bytes")
