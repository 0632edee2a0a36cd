"""Counter-based random streams.

Every stream is a Philox generator keyed by ``(base_seed, trial, purpose)``,
so the numbers a trial sees never depend on how many other trials ran,
in which order, or on which thread.
"""

import zlib

import numpy as np

# purposes get a stable integer tag; crc32 keeps it independent of hash seed
def _tag(purpose):
    return zlib.crc32(purpose.encode("utf-8"))


def stream(seed, *path):
    """Return a Philox ``Generator`` for ``seed`` and a path of ints/strings."""
    entropy = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in path:
        entropy.append(_tag(part) if isinstance(part, str) else int(part))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def trial_stream(seed, trial, purpose):
    return stream(seed, "trial", trial, purpose)


def as_generator(rng):
    """Accept ``None``, an int seed or a ``Generator``."""
    if isinstance(rng, np.random.Generator):
        return rng
    if rng is None:
        return np.random.default_rng()
    return stream(rng)
