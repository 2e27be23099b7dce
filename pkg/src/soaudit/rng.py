"""Seeded, named PRNG streams.

Every random draw in the engine flows from a single 64-bit run seed through a
named stream (``neighbor-sampling``, ``random-baseline/<i>``, ...).  Streams
are derived by hashing, so adding draws to one subsystem never perturbs
another's sequence.  The derivation is versioned: bump STREAM_VERSION when the
mapping changes so old reports aren't silently "reproduced" with new draws.
"""

from __future__ import annotations

import hashlib
import random

STREAM_VERSION = 1


def stream_rng(seed: int, stream: str) -> random.Random:
    """Deterministic PRNG for one named subsystem of a seeded run."""
    material = f"soaudit/{STREAM_VERSION}/{stream}/{seed}".encode()
    digest = hashlib.sha256(material).digest()
    return random.Random(int.from_bytes(digest[:16], "big"))
