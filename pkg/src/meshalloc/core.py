"""Size classes, deterministic randomness and run configuration."""

from __future__ import annotations

import bisect
import dataclasses
import random
from dataclasses import dataclass
from pathlib import Path

PAGE_SIZE = 4096
MAX_SMALL = 16384
MIN_OBJECTS = 8
MAX_OBJECTS = 256

# jemalloc-style classes up to 1K, powers of two above.
DEFAULT_SIZE_CLASSES = (
    8, 16, 32, 48, 64, 80, 96, 112, 128, 160, 192, 224, 256,
    320, 384, 448, 512, 640, 768, 896, 1024,
    2048, 4096, 8192, 16384,
)

LARGE = None  # size_class_for result for requests above MAX_SMALL


class SizeClassTable:
    """Immutable size-class table with per-class span geometry.

    Span length for a class is the smallest page count holding at least
    ``MIN_OBJECTS`` objects; the object count is the floor of span bytes over
    object size, capped at ``MAX_OBJECTS``.
    """

    def __init__(self, classes=DEFAULT_SIZE_CLASSES, page_size: int = PAGE_SIZE):
        classes = tuple(int(c) for c in classes)
        if any(b <= a for a, b in zip(classes, classes[1:])):
            raise ValueError("size classes must be strictly increasing")
        if classes[-1] != MAX_SMALL:
            raise ValueError(f"largest size class must be {MAX_SMALL}")
        self.page_size = page_size
        self.classes = classes
        pages = []
        counts = []
        for size in classes:
            p = 1
            while (p * page_size) // size < MIN_OBJECTS:
                p += 1
            pages.append(p)
            counts.append(min(MAX_OBJECTS, (p * page_size) // size))
        self.span_pages = tuple(pages)
        self.object_counts = tuple(counts)

    def __len__(self) -> int:
        return len(self.classes)

    def size_class_for(self, request_bytes: int):
        """Index of the smallest class holding ``request_bytes``, or ``LARGE``.

        Zero-byte requests are served as one byte.
        """
        if request_bytes < 0:
            raise ValueError("negative allocation size")
        if request_bytes > self.classes[-1]:
            return LARGE
        return bisect.bisect_left(self.classes, max(1, request_bytes))

    def object_size(self, cls: int) -> int:
        return self.classes[cls]

    def object_count(self, cls: int) -> int:
        return self.object_counts[cls]

    def span_bytes(self, cls: int) -> int:
        return self.span_pages[cls] * self.page_size


DEFAULT_TABLE = SizeClassTable()


class Rng:
    """Seeded generator: MT19937 (``random.Random``) keyed by a 64-bit seed.

    Child generators for thread-local heaps are derived with :meth:`spawn`
    so a run is fully determined by the root seed.
    """

    _MASK = (1 << 64) - 1

    def __init__(self, seed: int = 0):
        self.seed = int(seed) & self._MASK
        self._r = random.Random(self.seed)

    def in_range(self, lo: int, hi: int) -> int:
        """Uniform integer in the closed range [lo, hi]."""
        return lo + self._r._randbelow(hi - lo + 1)

    def below(self, n: int) -> int:
        return self._r._randbelow(n)

    def random(self) -> float:
        return self._r.random()

    def shuffle(self, items: list) -> None:
        # Fisher-Yates, driven through in_range so every draw is seed-determined.
        for i in range(len(items) - 1, 0, -1):
            j = self.in_range(0, i)
            items[i], items[j] = items[j], items[i]

    def sample(self, population, k: int) -> list:
        return self._r.sample(population, k)

    def spawn(self, tag: int) -> "Rng":
        # splitmix64 finalizer over (seed, tag) keeps child streams distinct.
        z = (self.seed + 0x9E3779B97F4A7C15 * (tag + 1)) & self._MASK
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & self._MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & self._MASK
        return Rng(z ^ (z >> 31))


@dataclass
class Config:
    rng_seed: int = 0
    mesh_period_events: int = 10_000
    mesh_min_reclaim_bytes: int = 1 << 20
    splitmesher_t: int = 64
    occupancy_bin_edges: tuple = (0.25, 0.5, 0.75)
    randomize: bool = True
    meshing: bool = True
    snapshot_every: int = 1000
    punch_threshold_bytes: int = 64 << 20

    def __post_init__(self):
        edges = tuple(float(e) for e in self.occupancy_bin_edges)
        if any(not 0.0 < e < 1.0 for e in edges) or list(edges) != sorted(set(edges)):
            raise ValueError(f"bad occupancy_bin_edges: {edges}")
        self.occupancy_bin_edges = edges
        if self.splitmesher_t < 1:
            raise ValueError("splitmesher_t must be >= 1")
        if self.mesh_period_events < 1:
            raise ValueError("mesh_period_events must be >= 1")

    def set(self, key: str, value: str) -> None:
        """Assign one field from its textual form (config files, ``set`` directives)."""
        fields = {f.name: f for f in dataclasses.fields(self)}
        if key not in fields:
            raise KeyError(f"unknown config key {key!r}")
        setattr(self, key, _coerce(fields[key], value))
        self.__post_init__()


def _coerce(f: dataclasses.Field, value):
    if not isinstance(value, str):
        return value
    default = f.default
    if isinstance(default, bool):
        v = value.strip().lower()
        if v in ("1", "true", "yes", "on"):
            return True
        if v in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {value!r}")
    if isinstance(default, int):
        return int(value, 0)
    if isinstance(default, tuple):
        return tuple(float(x) for x in value.split(",") if x.strip())
    return value


def parse_config(text: str, base: Config | None = None) -> Config:
    """Parse ``key=value`` lines; ``#`` starts a comment."""
    cfg = dataclasses.replace(base) if base is not None else Config()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key=value")
        key, value = (s.strip() for s in line.split("=", 1))
        try:
            cfg.set(key, value)
        except (KeyError, ValueError) as exc:
            raise ValueError(f"config line {lineno}: {exc}") from None
    return cfg


def load_config(path, base: Config | None = None) -> Config:
    return parse_config(Path(path).read_text(), base)
