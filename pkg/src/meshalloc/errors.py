class AllocatorError(Exception):
    """Base class for errors surfaced by the allocator."""


class InvalidPointer(AllocatorError):
    """Pointer does not resolve to a live object slot."""


class DoubleFree(AllocatorError):
    """Offset freed while not allocated (double or invalid free)."""


class ClassMismatch(AllocatorError):
    """Two spans of different size class or length were compared."""


class LiveObjects(AllocatorError):
    """A span still holding live objects was released."""


class BadRemap(AllocatorError):
    """Remap target is not a live physical span."""


class InvariantViolation(AllocatorError):
    """Internal consistency check failed."""
