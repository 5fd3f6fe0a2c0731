"""Built-in time sources and loading of user-supplied samples."""
import math

import numpy as np

BREAKS = (0.8 * math.pi, 1.6 * math.pi, 2.4 * math.pi, 3.2 * math.pi)
LEVELS = (0.0, 2.0, 0.5, 1.5, 0.0)


def example1(t):
    return np.sin(t) * np.exp(-t / 6.0)


def example2(t):
    return np.sin(t) * np.cos(2.0 * t)


def example3(t):
    """Piecewise constant with jumps at 4pi/5, 8pi/5, 12pi/5, 16pi/5 (left-closed pieces)."""
    t = np.asarray(t, dtype=float)
    # grid nodes that land on a break up to roundoff belong to the right piece
    idx = np.searchsorted(np.asarray(BREAKS), t + 1e-9, side="right")
    return np.asarray(LEVELS)[idx]


BUILTIN = {"example1": example1, "example2": example2, "example3": example3}


def builtin_source(name, grid):
    """Samples ``f(t_n)``, ``n = 0..N``, of a named source."""
    try:
        fn = BUILTIN[name]
    except KeyError:
        raise ValueError(f"unknown source {name!r}; choose from {sorted(BUILTIN)}") from None
    return np.asarray(fn(grid.t), dtype=float)


def load_source(path, grid):
    """Samples from a file: one value per line, or two columns ``t,f`` (header optional)."""
    rows = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.replace(",", " ").split()
            try:
                rows.append([float(p) for p in parts])
            except ValueError:
                if rows:
                    raise ValueError(f"{path}: non-numeric row {line!r}") from None
    if not rows:
        raise ValueError(f"{path}: no samples")
    values = np.array([r[-1] for r in rows])
    if values.size != grid.N + 1:
        raise ValueError(f"{path}: expected {grid.N + 1} samples, found {values.size}")
    if values[0] != 0.0:
        raise ValueError(f"{path}: the source must vanish at t = 0")
    return values


def jump_indices(grid):
    """Grid indices of the first node at or after each jump of example3."""
    return [int(np.searchsorted(grid.t, b - 1e-12)) for b in BREAKS]
