"""Small map builders shared by the tests."""
from __future__ import annotations

import numpy as np

from collision_replay.gridmap import GridMap, load_map


def empty_room(w: int, h: int, step_size: float = 0.25) -> GridMap:
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return GridMap(occ, step_size, f"room{w}x{h}")


def corridor(length: int) -> GridMap:
    """1-wide horizontal corridor with ``length`` free cells."""
    return load_map("#" * (length + 2) + "\n#" + "." * length + "#\n" + "#" * (length + 2) + "\n",
                    name=f"corridor{length}")
