"""Simulated meshable arena: virtual->physical span mapping and page bins.

Virtual spans are never reused; physical spans are recycled through the
dirty bins until holes are punched, after which they are gone for good.
Pointers are plain integers measured from an arena base of 0.
"""

from __future__ import annotations

from meshalloc.core import PAGE_SIZE
from meshalloc.errors import BadRemap, InvalidPointer, LiveObjects

PUNCH_THRESHOLD = 64 << 20


class VirtualSpan:
    __slots__ = ("id", "start", "pages", "pspan", "miniheap")

    def __init__(self, id, start, pages, pspan):
        self.id = id
        self.start = start  # byte address
        self.pages = pages
        self.pspan = pspan
        self.miniheap = None


class Arena:
    def __init__(self, page_size: int = PAGE_SIZE, punch_threshold: int = PUNCH_THRESHOLD):
        self.page_size = page_size
        self.punch_threshold = punch_threshold
        self._next_vpage = 0
        self._next_vspan = 0
        self._next_pspan = 0
        self.vspans: dict[int, VirtualSpan] = {}
        self.page_owner: dict[int, VirtualSpan] = {}
        self.pspan_pages: dict[int, int] = {}  # live or binned physical spans
        self.physical_live: set[int] = set()
        self.dirty_bins: dict[int, list[int]] = {}
        self.clean_bins: dict[int, list[int]] = {}
        self.dirty_bytes = 0
        self.returned: set[int] = set()
        self.returned_bytes = 0
        self._storage: dict[int, bytearray] = {}
        self._live_pages = 0
        self._binned_pages = 0

    # -- spans -----------------------------------------------------------

    def allocate_span(self, pages: int, zeroed: bool = False) -> tuple[int, int]:
        """Fresh virtual span backed by a reused or new physical span."""
        if pages < 1:
            raise ValueError("span needs at least one page")
        pspan = self._take_binned(pages, zeroed)
        if pspan is None:
            pspan = self._next_pspan
            self._next_pspan += 1
            self.pspan_pages[pspan] = pages
        self.physical_live.add(pspan)
        self._live_pages += pages
        vid = self._next_vspan
        self._next_vspan += 1
        self.vspans[vid] = VirtualSpan(vid, self._next_vpage * self.page_size, pages, pspan)
        self._next_vpage += pages
        return vid, pspan

    def _take_binned(self, pages, zeroed):
        for bins, dirty in ((self.dirty_bins, True), (self.clean_bins, False)):
            lst = bins.get(pages)
            if lst:
                pspan = lst.pop()
                self._binned_pages -= pages
                if dirty:
                    self.dirty_bytes -= pages * self.page_size
                    if zeroed:
                        self._storage.pop(pspan, None)
                return pspan
        return None

    def assign(self, vspan_id: int, miniheap) -> None:
        """Point every page of ``vspan_id`` at ``miniheap``."""
        vs = self.vspans[vspan_id]
        vs.miniheap = miniheap
        first = vs.start // self.page_size
        for page in range(first, first + vs.pages):
            self.page_owner[page] = vs

    def free_span(self, mh) -> None:
        """Unmap all of ``mh``'s virtual spans and bin its physical span as dirty."""
        if not mh.is_empty():
            raise LiveObjects(f"miniheap {mh.id} still holds {mh.bitmap.popcount} objects")
        if mh.attached:
            raise LiveObjects(f"miniheap {mh.id} is attached")
        for vid in mh.virtual_spans:
            self._unmap(vid)
        self.release_physical(mh.physical_span)

    def _unmap(self, vspan_id):
        vs = self.vspans.pop(vspan_id)
        first = vs.start // self.page_size
        for page in range(first, first + vs.pages):
            del self.page_owner[page]

    def release_physical(self, pspan: int) -> None:
        if pspan not in self.physical_live:
            raise BadRemap(f"physical span {pspan} is not live")
        pages = self.pspan_pages[pspan]
        self.physical_live.remove(pspan)
        self._live_pages -= pages
        self._binned_pages += pages
        self.dirty_bins.setdefault(pages, []).append(pspan)
        self.dirty_bytes += pages * self.page_size

    def punch_holes_if_needed(self, force: bool = False) -> int:
        """Return dirty spans to the OS once enough accumulate (or on demand)."""
        if not force and self.dirty_bytes < self.punch_threshold:
            return 0
        returned = 0
        for pages, lst in self.dirty_bins.items():
            for pspan in lst:
                self.returned.add(pspan)
                del self.pspan_pages[pspan]
                self._storage.pop(pspan, None)
                returned += pages * self.page_size
            self._binned_pages -= pages * len(lst)
        self.dirty_bins.clear()
        self.dirty_bytes = 0
        self.returned_bytes += returned
        return returned

    def remap(self, vspan_id: int, pspan: int) -> None:
        if pspan not in self.physical_live:
            raise BadRemap(f"physical span {pspan} is not live")
        vs = self.vspans.get(vspan_id)
        if vs is None:
            raise BadRemap(f"virtual span {vspan_id} is not mapped")
        if self.pspan_pages[pspan] != vs.pages:
            raise BadRemap("span length mismatch")
        # single reference swap: readers see either the old or the new target
        vs.pspan = pspan

    # -- pointers ----------------------------------------------------------

    def span_of(self, ptr: int) -> VirtualSpan:
        vs = self.page_owner.get(ptr // self.page_size) if ptr >= 0 else None
        if vs is None:
            raise InvalidPointer(f"address {ptr:#x} is not in a live span")
        return vs

    def resolve(self, ptr: int):
        """(MiniHeap, offset) owning ``ptr``; InvalidPointer otherwise."""
        vs = self.span_of(ptr)
        mh = vs.miniheap
        if mh is None:
            raise InvalidPointer(f"address {ptr:#x} has no owner")
        delta = ptr - vs.start
        off, rem = divmod(delta, mh.object_size)
        if rem or off >= mh.object_count:
            raise InvalidPointer(f"address {ptr:#x} is not an object start")
        return mh, off

    def physical_address(self, ptr: int) -> tuple[int, int]:
        vs = self.span_of(ptr)
        return vs.pspan, ptr - vs.start

    def _buffer(self, pspan):
        buf = self._storage.get(pspan)
        if buf is None:
            buf = self._storage[pspan] = bytearray(self.pspan_pages[pspan] * self.page_size)
        return buf

    def read(self, ptr: int, length: int) -> bytes:
        vs = self.span_of(ptr)
        delta = ptr - vs.start
        if delta + length > vs.pages * self.page_size:
            raise InvalidPointer("read crosses span end")
        buf = self._storage.get(vs.pspan)
        if buf is None:
            return bytes(length)
        return bytes(buf[delta:delta + length])

    def write(self, ptr: int, data: bytes) -> None:
        vs = self.span_of(ptr)
        delta = ptr - vs.start
        if delta + len(data) > vs.pages * self.page_size:
            raise InvalidPointer("write crosses span end")
        self._buffer(vs.pspan)[delta:delta + len(data)] = data

    def copy_physical(self, src_pspan: int, dst_pspan: int, start: int, length: int) -> None:
        src = self._storage.get(src_pspan)
        if src is None:
            # never written: destination must read back as zeros
            if dst_pspan in self._storage:
                self._storage[dst_pspan][start:start + length] = bytes(length)
            return
        self._buffer(dst_pspan)[start:start + length] = src[start:start + length]

    # -- accounting --------------------------------------------------------

    @property
    def rss_bytes(self) -> int:
        return (self._live_pages + self._binned_pages) * self.page_size

    @property
    def physical_span_count(self) -> int:
        return len(self.physical_live)

    @property
    def virtual_span_count(self) -> int:
        return len(self.vspans)
