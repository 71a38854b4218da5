"""Counter-based random streams keyed by (master seed, stream index)."""

import numpy as np


def stream(seed, index=0):
    """Return a Philox generator keyed by ``(seed, index)``.

    Streams for different indices are independent and do not depend on the
    order in which they are created, so parallel trials stay reproducible.
    """
    key = np.array([int(seed) % 2**64, int(index) % 2**64], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))
