"""Counter-based random substreams.

Every random draw in the package goes through :func:`substream`, keyed by a
master seed, a named stream and an integer index path.  Results therefore do
not depend on the order in which paths, masks or frequencies are processed.
"""
import numpy as np

STREAMS = {"fbm": 0, "noise": 1, "masks": 2, "test": 99}


def substream(master_seed, stream, *index):
    """Return an independent Philox generator for ``(master_seed, stream, *index)``."""
    if stream not in STREAMS:
        raise ValueError(f"unknown random stream {stream!r}")
    seed = int(master_seed)
    if seed < 0 or seed >= 2**64:
        raise ValueError("master seed must be an unsigned 64-bit integer")
    key = (STREAMS[stream],) + tuple(int(i) for i in index)
    seq = np.random.SeedSequence(entropy=seed, spawn_key=key)
    return np.random.Generator(np.random.Philox(seq))
