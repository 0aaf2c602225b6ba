"""Thread-local allocation front end: one shuffle vector per size class."""

from __future__ import annotations

from meshalloc.core import LARGE, Rng
from meshalloc.errors import DoubleFree, InvalidPointer
from meshalloc.global_heap import GlobalHeap
from meshalloc.shuffle_vector import ShuffleVector


class LocalHeap:
    def __init__(self, thread_id, global_heap: GlobalHeap, rng: Rng, randomize: bool = True):
        self.thread_id = thread_id
        self.global_heap = global_heap
        self.rng = rng
        self.vectors = [ShuffleVector(rng, randomize) for _ in range(len(global_heap.table))]
        self.refills = 0

    def malloc(self, size: int) -> int:
        gh = self.global_heap
        cls = gh.table.size_class_for(size)
        if cls is LARGE:
            return gh.malloc_large(size)
        vec = self.vectors[cls]
        if vec.exhausted:
            self._refill(vec, cls)
        return vec.malloc()

    def _refill(self, vec: ShuffleVector, cls: int) -> None:
        gh = self.global_heap
        with gh.locked():
            old = vec.detach()
            if old is not None:
                gh.release_miniheap(old)
            mh = gh.select_miniheap(cls, self.thread_id)
            vec.attach(mh, gh.span_start(mh))
        self.refills += 1

    def free(self, ptr: int) -> None:
        gh = self.global_heap
        try:
            mh, off = gh.arena.resolve(ptr)
        except InvalidPointer:
            gh.free(ptr)  # counts and re-raises
            return
        if mh.owner == self.thread_id and self.vectors[mh.size_class].miniheap is mh:
            try:
                self.vectors[mh.size_class].free(off)
            except DoubleFree:
                gh.stats.double_frees += 1
                raise
            return
        gh.free(ptr)

    def detach_all(self) -> None:
        """Hand every attached span back to the global heap."""
        gh = self.global_heap
        with gh.locked():
            for vec in self.vectors:
                mh = vec.detach()
                if mh is not None:
                    gh.release_miniheap(mh)

    def attached_miniheaps(self):
        return [v.miniheap for v in self.vectors if v.miniheap is not None]
