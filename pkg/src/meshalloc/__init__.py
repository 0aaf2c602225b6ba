"""Meshing allocator core over a simulated virtual-memory arena."""

from meshalloc.core import (
    LARGE,
    PAGE_SIZE,
    Config,
    Rng,
    SizeClassTable,
    DEFAULT_SIZE_CLASSES,
    load_config,
)
from meshalloc.errors import (
    AllocatorError,
    BadRemap,
    ClassMismatch,
    DoubleFree,
    InvalidPointer,
    LiveObjects,
)
from meshalloc.heap import MeshHeap

__all__ = [
    "LARGE",
    "PAGE_SIZE",
    "Config",
    "Rng",
    "SizeClassTable",
    "DEFAULT_SIZE_CLASSES",
    "load_config",
    "AllocatorError",
    "BadRemap",
    "ClassMismatch",
    "DoubleFree",
    "InvalidPointer",
    "LiveObjects",
    "MeshHeap",
]
