"""64-bit FNV-1a hashing.

Used as the deterministic hash everywhere a stable, portable value is
needed: feature hashing, cache keys, chunk ids, file checksums, and the
mock answer generator.
"""

_OFFSET_BASIS = 0xCBF29CE484222325
_PRIME = 0x100000001B3
_MASK = 0xFFFFFFFFFFFFFFFF


def fnv1a_64(data: bytes) -> int:
    """Hash ``data`` with FNV-1a (64-bit). Empty input returns the offset basis."""
    h = _OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * _PRIME) & _MASK
    return h


def fnv1a_64_hex(data: bytes) -> str:
    """Lowercase, zero-padded hex form of :func:`fnv1a_64`."""
    return f"{fnv1a_64(data):016x}"
