"""Shared test machinery: random traces and a ground-truth heap oracle."""

import random

from meshalloc import MeshHeap
from meshalloc.trace import Alloc, ForceMesh, Free, Thread

SIZES = [1, 8, 16, 24, 40, 48, 64, 100, 128, 200, 256, 500, 1000, 1024, 2000, 4096, 9000,
         16384, 17000, 40000]
HOT_SIZES = [48, 512, 1024, 2048, 4096]


def random_trace(seed, n_events, threads=3, mesh_every=None, phase=150):
    """Seeded alloc/free/thread-switch trace.

    Alternates alloc-heavy and free-heavy phases of ``phase`` events so spans
    fill up, get detached and then fragment.  Most sizes come from a few hot
    classes; the rest cover every class plus large objects.
    """
    r = random.Random(seed)
    events = []
    live = []
    next_id = 0
    for n in range(n_events):
        if threads > 1 and r.random() < 0.04:
            events.append(Thread(r.randrange(threads)))
            continue
        if mesh_every and r.random() < 1 / mesh_every:
            events.append(ForceMesh())
            continue
        p_free = 0.1 if (n // phase) % 2 == 0 else 0.9
        if live and r.random() < p_free:
            i = r.randrange(len(live))
            live[i], live[-1] = live[-1], live[i]
            events.append(Free(live.pop()))
        else:
            u = r.random()
            size = r.choice(HOT_SIZES) if u < 0.8 else (
                r.choice(SIZES) if u < 0.95 else r.randint(1, 300))
            events.append(Alloc(next_id, size))
            live.append(next_id)
            next_id += 1
    return events


class Oracle:
    """Drives a heap from trace events while tracking the true live set."""

    def __init__(self, heap: MeshHeap):
        self.heap = heap
        self.ptrs = {}

    def step(self, ev):
        h = self.heap
        if isinstance(ev, Alloc):
            self.ptrs[ev.id] = (h.malloc(ev.bytes), ev.bytes)
        elif isinstance(ev, Free):
            ptr, _ = self.ptrs.pop(ev.id)
            h.free(ptr)
        elif isinstance(ev, Thread):
            h.current_thread = ev.tid
        elif isinstance(ev, ForceMesh):
            h.mesh_now()

    def check(self):
        """Allocator-side live map equals ground truth; no physical overlap."""
        h = self.heap
        span_of = h.arena.span_of
        truth = {}
        ranges = {}
        for oid, (ptr, size) in self.ptrs.items():
            vs = span_of(ptr)
            mh = vs.miniheap
            osz = mh.object_size
            delta = ptr - vs.start
            off, rem = divmod(delta, osz)
            assert rem == 0 and off < mh.object_count, f"object {oid} misaligned"
            slot = (mh.id, off)
            assert slot not in truth, f"objects {truth.get(slot)} and {oid} share {slot}"
            truth[slot] = oid
            assert size <= osz
            ranges.setdefault(vs.pspan, []).append((delta, delta + osz, oid))
        assert h.live_slots() == truth.keys()
        for pspan, rs in ranges.items():
            if len(rs) > 1:
                rs.sort()
                for (s0, e0, a), (s1, e1, b) in zip(rs, rs[1:]):
                    assert e0 <= s1, f"objects {a} and {b} overlap in physical span {pspan}"


def sentinel(oid, size):
    seed = (oid * 2654435761) & 0xFFFFFFFF
    return bytes((seed >> (8 * (i % 4)) ^ i) & 0xFF for i in range(size))
