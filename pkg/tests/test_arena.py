import pytest

from meshalloc.arena import Arena
from meshalloc.errors import BadRemap, InvalidPointer, LiveObjects
from meshalloc.miniheap import MiniHeap


def make(arena, pages=1, size=512, count=8, id=1):
    vid, pid = arena.allocate_span(pages)
    mh = MiniHeap(id, 0, size, count, pages, vid, pid)
    arena.assign(vid, mh)
    return mh


def test_virtual_spans_are_monotone():
    a = Arena()
    seen = []
    for i in range(5):
        mh = make(a, pages=1 + i % 3, id=i)
        vs = a.vspans[mh.virtual_spans[0]]
        seen.append((vs.id, vs.start))
        a.free_span(mh)
    assert [s[0] for s in seen] == list(range(5))
    starts = [s[1] for s in seen]
    assert starts == sorted(set(starts)) and starts[0] == 0


def test_physical_reuse_from_dirty_bins():
    a = Arena()
    mh = make(a)
    p = mh.physical_span
    a.free_span(mh)
    assert a.rss_bytes == 4096  # dirty pages still count
    mh2 = make(a, id=2)
    assert mh2.physical_span == p
    other = make(a, pages=2, id=3)
    assert other.physical_span != p  # bins match exact lengths only


def test_punch_holes():
    a = Arena(punch_threshold=3 * 4096)
    spans = [make(a, id=i) for i in range(3)]
    a.free_span(spans[0])
    a.free_span(spans[1])
    assert a.punch_holes_if_needed() == 0
    a.free_span(spans[2])
    assert a.punch_holes_if_needed() == 3 * 4096
    assert a.rss_bytes == 0
    assert a.returned == {s.physical_span for s in spans}
    fresh = make(a, id=9)
    assert fresh.physical_span not in a.returned


def test_free_span_guards():
    a = Arena()
    mh = make(a)
    mh.try_set(0)
    with pytest.raises(LiveObjects):
        a.free_span(mh)


def test_resolve():
    a = Arena()
    mh = make(a, pages=1, size=48, count=85)
    base = a.vspans[mh.virtual_spans[0]].start
    assert a.resolve(base + 96) == (mh, 2)
    with pytest.raises(InvalidPointer):
        a.resolve(base + 97)
    with pytest.raises(InvalidPointer):
        a.resolve(base + 85 * 48)  # tail slack
    with pytest.raises(InvalidPointer):
        a.resolve(1 << 40)
    with pytest.raises(InvalidPointer):
        a.resolve(-8)


def test_stale_pointer_after_free():
    a = Arena()
    mh = make(a)
    ptr = a.vspans[mh.virtual_spans[0]].start
    a.free_span(mh)
    make(a, id=2)  # reuses the physical span under a new virtual address
    with pytest.raises(InvalidPointer):
        a.resolve(ptr)


def test_aliasing_after_remap():
    a = Arena()
    m1, m2 = make(a, id=1), make(a, id=2)
    v1 = a.vspans[m1.virtual_spans[0]]
    v2 = a.vspans[m2.virtual_spans[0]]
    a.write(v1.start + 100, b"hello")
    a.remap(v2.id, m1.physical_span)
    a.release_physical(m2.physical_span)
    for delta in (0, 100, 4000):
        assert a.read(v1.start + delta, 5) == a.read(v2.start + delta, 5)
    a.write(v2.start + 200, b"x")
    assert a.read(v1.start + 200, 1) == b"x"
    assert a.physical_span_count == 1 and a.virtual_span_count == 2


def test_remap_errors():
    a = Arena()
    m1 = make(a, id=1)
    m2 = make(a, pages=2, id=2)
    with pytest.raises(BadRemap):
        a.remap(m1.virtual_spans[0], m2.physical_span)  # length mismatch
    with pytest.raises(BadRemap):
        a.remap(m1.virtual_spans[0], 999)
    with pytest.raises(BadRemap):
        a.remap(999, m1.physical_span)


def test_read_write_bounds():
    a = Arena()
    mh = make(a)
    start = a.vspans[mh.virtual_spans[0]].start
    assert a.read(start, 4) == bytes(4)
    with pytest.raises(InvalidPointer):
        a.write(start + 4094, b"abc")
