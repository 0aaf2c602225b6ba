"""Finding meshable span pairs and consolidating them onto one physical span."""

from __future__ import annotations

from dataclasses import dataclass, field

from meshalloc.errors import InvariantViolation
from meshalloc.miniheap import MiniHeap

DEFAULT_PROBES = 64


def split_mesher(spans, t: int = DEFAULT_PROBES, key=None):
    """Probe pairs across the two halves of a randomly ordered span list.

    ``spans`` is split into a left half (taking the middle element when the
    length is odd) and a right half.  On outer round ``i`` every surviving
    left span ``j`` is compared with right span ``(j + i) % len(left)``; a
    meshable pair is removed from both halves.  Removals are applied
    between rounds, so within a round indices refer to the round's snapshot.

    ``key`` maps a span to its occupancy bitmask (identity by default).
    Returns ``(pairs, probes)`` where pairs are ``(left, right)`` tuples.
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    items = list(spans)
    bits = [key(s) for s in items] if key is not None else items
    half = (len(items) + 1) // 2
    left = list(range(half))
    right = list(range(half, len(items)))
    pairs = []
    probes = 0
    for i in range(t):
        ln = len(left)
        rn = len(right)
        if ln == 0 or rn == 0:
            break
        used_l = []
        used_r = set()
        for j in range(ln):
            k = (j + i) % ln
            if k >= rn or k in used_r:
                continue
            probes += 1
            a = left[j]
            b = right[k]
            if bits[a] & bits[b] == 0:
                used_l.append(j)
                used_r.add(k)
                pairs.append((items[a], items[b]))
        if used_l:
            drop = set(used_l)
            left = [x for idx, x in enumerate(left) if idx not in drop]
            right = [x for idx, x in enumerate(right) if idx not in used_r]
    return pairs, probes


def choose_direction(a: MiniHeap, b: MiniHeap) -> tuple[MiniHeap, MiniHeap]:
    """(dst, src): the fuller span keeps its physical memory; ties go to the lower id."""
    if (b.bitmap.popcount, -b.id) > (a.bitmap.popcount, -a.id):
        return b, a
    return a, b


def execute_mesh(arena, dst: MiniHeap, src: MiniHeap) -> bool:
    """Copy src's live objects into dst's physical span and alias src's pages.

    Returns False (and changes nothing) if the bitmaps overlap.  The caller
    owns bin bookkeeping and retiring ``src`` from any registry.
    """
    if dst.bitmap.bits & src.bitmap.bits:
        return False
    if dst.attached or src.attached:
        raise InvariantViolation("only detached spans may be meshed")
    size = src.object_size
    for off in src.bitmap.set_bits():
        arena.copy_physical(src.physical_span, dst.physical_span, off * size, size)
    dst.bitmap.merge(src.bitmap)
    for vid in src.virtual_spans:
        arena.remap(vid, dst.physical_span)
        arena.vspans[vid].miniheap = dst
    dst.virtual_spans.extend(src.virtual_spans)
    arena.release_physical(src.physical_span)
    src.virtual_spans = []
    src.retired = True
    return True


@dataclass
class ClassMeshResult:
    object_size: int
    candidates: int
    pairs: int
    bytes_reclaimed: int
    probes: int


@dataclass
class MeshReport:
    event_index: int
    classes: list = field(default_factory=list)
    punched_bytes: int = 0

    @property
    def pairs(self) -> int:
        return sum(c.pairs for c in self.classes)

    @property
    def bytes_reclaimed(self) -> int:
        return sum(c.bytes_reclaimed for c in self.classes)

    def csv_rows(self):
        for c in self.classes:
            yield (self.event_index, c.object_size, c.candidates, c.pairs,
                   c.bytes_reclaimed, c.probes)


MESH_CSV_HEADER = ("event_index", "class", "candidates", "pairs",
                   "bytes_reclaimed", "probes_used")


def mesh_size_class(heap, cls: int, t: int) -> ClassMeshResult:
    """Mesh the detached, partially full spans of one size class.

    ``heap`` is the global heap; its lock must be held.
    """
    candidates = heap.partial_miniheaps(cls)
    size = heap.table.object_size(cls)
    if len(candidates) < 2:
        return ClassMeshResult(size, len(candidates), 0, 0, 0)
    heap.rng.shuffle(candidates)
    found, probes = split_mesher(candidates, t, key=lambda mh: mh.bitmap.bits)
    meshed = 0
    reclaimed = 0
    for a, b in found:
        dst, src = choose_direction(a, b)
        heap.unbin(dst)
        heap.unbin(src)
        if execute_mesh(heap.arena, dst, src):
            heap.retire(src)
            meshed += 1
            reclaimed += src.span_pages * heap.arena.page_size
        else:
            heap.rebin(src)
        heap.rebin(dst)
    return ClassMeshResult(size, len(candidates), meshed, reclaimed, probes)
