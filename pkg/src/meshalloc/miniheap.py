"""Per-span metadata: occupancy bitmap, size class and virtual span list."""

from __future__ import annotations

import threading

from meshalloc.errors import ClassMismatch, DoubleFree


class SpanBitmap:
    """Fixed-length occupancy bitmap backed by a Python int.

    Bit operations take a private lock so remote frees may race with the
    owning thread's claims; every other MiniHeap field relies on the global
    heap lock instead.
    """

    __slots__ = ("count", "bits", "popcount", "_lock")

    def __init__(self, count: int, bits: int = 0):
        if bits >> count:
            raise ValueError("bits beyond bitmap length")
        self.count = count
        self.bits = bits
        self.popcount = bits.bit_count()
        self._lock = threading.Lock()

    def is_set(self, i: int) -> bool:
        return (self.bits >> i) & 1 == 1

    def try_set(self, i: int) -> bool:
        """Set bit ``i``; True iff it was clear (0 -> 1)."""
        if not 0 <= i < self.count:
            raise IndexError(i)
        m = 1 << i
        with self._lock:
            if self.bits & m:
                return False
            self.bits |= m
            self.popcount += 1
            return True

    def reset(self, i: int) -> None:
        if not 0 <= i < self.count:
            raise IndexError(i)
        m = 1 << i
        with self._lock:
            if not self.bits & m:
                raise DoubleFree(f"offset {i} is not allocated")
            self.bits &= ~m
            self.popcount -= 1

    def merge(self, other: "SpanBitmap") -> None:
        with self._lock:
            if self.bits & other.bits:
                raise ValueError("merging overlapping bitmaps")
            self.bits |= other.bits
            self.popcount = self.bits.bit_count()

    def set_bits(self):
        """Yield set offsets in ascending order."""
        x = self.bits
        while x:
            low = x & -x
            yield low.bit_length() - 1
            x ^= low

    def to_hex(self) -> str:
        return format(self.bits, "0{}x".format((self.count + 3) // 4))

    def __repr__(self):
        return f"SpanBitmap({self.popcount}/{self.count}, 0x{self.to_hex()})"


class MiniHeap:
    """Metadata for one physical span and every virtual span mapped onto it.

    ``owner`` is the attached thread id, or None when the global heap holds
    the span.
    """

    __slots__ = (
        "id", "size_class", "object_size", "span_pages", "bitmap",
        "virtual_spans", "physical_span", "owner", "retired", "is_large",
        "bin_index", "vector",
    )

    def __init__(self, id, size_class, object_size, object_count, span_pages,
                 virtual_span, physical_span, is_large=False):
        self.id = id
        self.size_class = size_class
        self.object_size = object_size
        self.span_pages = span_pages
        self.bitmap = SpanBitmap(object_count)
        self.virtual_spans = [virtual_span]
        self.physical_span = physical_span
        self.owner = None
        self.retired = False
        self.is_large = is_large
        self.bin_index = None
        self.vector = None  # ShuffleVector while attached

    @property
    def object_count(self) -> int:
        return self.bitmap.count

    @property
    def attached(self) -> bool:
        return self.owner is not None

    def is_empty(self) -> bool:
        return self.bitmap.popcount == 0

    def is_full(self) -> bool:
        return self.bitmap.popcount == self.bitmap.count

    def occupancy(self) -> float:
        return self.bitmap.popcount / self.bitmap.count

    def try_set(self, offset: int) -> bool:
        return self.bitmap.try_set(offset)

    def reset(self, offset: int) -> None:
        self.bitmap.reset(offset)

    def dump(self) -> str:
        return "mh {} class={} occ={}/{} vspans={} bits={}".format(
            self.id, self.object_size, self.bitmap.popcount, self.bitmap.count,
            len(self.virtual_spans), self.bitmap.to_hex())

    def __repr__(self):
        return f"<MiniHeap {self.dump()}>"


def bits_mesh(a: int, b: int) -> bool:
    """Two occupancy strings mesh iff no offset is live in both."""
    return a & b == 0


def meshable(a: MiniHeap, b: MiniHeap) -> bool:
    if a.object_size != b.object_size or a.span_pages != b.span_pages:
        raise ClassMismatch(f"cannot mesh class {a.object_size} with {b.object_size}")
    return bits_mesh(a.bitmap.bits, b.bitmap.bits)
