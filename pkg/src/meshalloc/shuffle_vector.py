"""Randomized free list for the span attached to one thread-local heap."""

from __future__ import annotations

from meshalloc.core import MAX_OBJECTS, Rng
from meshalloc.errors import DoubleFree
from meshalloc.miniheap import MiniHeap


class Exhausted(Exception):
    """The vector has no offsets left; the owner must refill it."""


class ShuffleVector:
    """Free offsets of the attached span, kept in uniformly random order.

    Offsets live in one byte each in ``_list``; the free region is
    ``_list[head:end]`` where ``end`` is the attached span's object count.
    ``malloc`` pops at ``head`` and ``free`` pushes at ``head - 1`` followed
    by one Fisher-Yates step, so both are O(1) worst case.

    Claimed-but-unallocated offsets keep their bitmap bit set while they sit
    in the vector; :meth:`detach` clears them again.
    """

    def __init__(self, rng: Rng, randomize: bool = True):
        self.rng = rng
        self.randomize = randomize
        self._list = bytearray(MAX_OBJECTS)
        self.free_mask = 0  # bit i set iff offset i is in the free region
        self.head = 0
        self.end = 0
        self.span_start = 0
        self.obj_size = 0
        self.miniheap: MiniHeap | None = None
        self.touches = 0  # list elements read or written by malloc/free

    @property
    def exhausted(self) -> bool:
        return self.head == self.end

    @property
    def attached(self) -> bool:
        return self.miniheap is not None

    def free_offsets(self) -> list[int]:
        return list(self._list[self.head:self.end])

    def holds(self, offset: int) -> bool:
        """True iff ``offset`` is free in this vector (not handed out)."""
        return (self.free_mask >> offset) & 1 == 1

    def attach(self, mh: MiniHeap, span_start: int) -> None:
        if self.miniheap is not None:
            raise RuntimeError("detach the current span before attaching")
        count = mh.object_count
        claimed = [i for i in range(count) if mh.try_set(i)]
        self.miniheap = mh
        mh.vector = self
        self.span_start = span_start
        self.obj_size = mh.object_size
        self.end = count
        self.head = count - len(claimed)
        lst = self._list
        mask = 0
        for k, off in enumerate(claimed, self.head):
            lst[k] = off
            mask |= 1 << off
        self.free_mask = mask
        if self.randomize:
            rng = self.rng
            for i in range(count - 1, self.head, -1):
                j = rng.in_range(self.head, i)
                lst[i], lst[j] = lst[j], lst[i]

    def detach(self) -> MiniHeap | None:
        """Release unallocated offsets back to the bitmap; return the span."""
        mh = self.miniheap
        if mh is None:
            return None
        for k in range(self.head, self.end):
            mh.reset(self._list[k])
        self.free_mask = 0
        mh.vector = None
        self.miniheap = None
        self.head = self.end = 0
        return mh

    def malloc(self) -> int:
        if self.head == self.end:
            raise Exhausted()
        off = self._list[self.head]
        self.head += 1
        self.free_mask ^= 1 << off
        self.touches += 1
        return self.span_start + off * self.obj_size

    def free(self, offset: int) -> None:
        """Return ``offset`` of the attached span to the free region."""
        bit = 1 << offset
        if self.free_mask & bit or not self.miniheap.bitmap.bits & bit:
            raise DoubleFree(f"offset {offset} is not allocated")
        self.head -= 1
        head = self.head
        lst = self._list
        lst[head] = offset
        self.free_mask |= bit
        self.touches += 1
        if self.randomize:
            j = self.rng.in_range(head, self.end - 1)
            lst[head], lst[j] = lst[j], lst[head]
            self.touches += 2

    def offset_of(self, ptr: int) -> int:
        return (ptr - self.span_start) // self.obj_size

    def contains(self, ptr: int) -> bool:
        return (self.miniheap is not None
                and self.span_start <= ptr < self.span_start + self.end * self.obj_size)
