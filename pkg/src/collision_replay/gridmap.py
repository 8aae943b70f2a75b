"""Occupancy grids, map generators, and the ground-truth distance oracle."""
from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

DEFAULT_STEP_SIZE = 0.25

# Heading vectors (dx, dy) with y pointing down the rows. Index order is
# clockwise on screen, so heading + 1 is a right turn.
DIRS4 = np.array([(1, 0), (0, 1), (-1, 0), (0, -1)], dtype=np.int64)
DIRS8 = np.array(
    [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)],
    dtype=np.int64,
)

FREE_CHAR = "."
OCC_CHAR = "#"


class InvalidMapError(ValueError):
    pass


class MapParseError(InvalidMapError):
    def __init__(self, message: str, line: int, column: int):
        super().__init__(f"line {line}, column {column}: {message}")
        self.line = line
        self.column = column


class MapGenerationError(RuntimeError):
    pass


def heading_dirs(n_headings: int) -> np.ndarray:
    if n_headings == 4:
        return DIRS4
    if n_headings == 8:
        return DIRS8
    raise ValueError(f"heading count must be 4 or 8, got {n_headings}")


@dataclass(frozen=True, eq=False)
class GridMap:
    """Walled occupancy grid. ``occ[y, x]`` is True for occupied cells."""

    occ: np.ndarray
    step_size: float = DEFAULT_STEP_SIZE
    name: str = ""

    def __post_init__(self):
        occ = np.array(self.occ, dtype=bool)
        if occ.ndim != 2:
            raise InvalidMapError("occupancy must be a 2-D array")
        h, w = occ.shape
        if w < 3 or h < 3:
            raise InvalidMapError(f"map must be at least 3x3, got {w}x{h}")
        if not (occ[0].all() and occ[-1].all() and occ[:, 0].all() and occ[:, -1].all()):
            raise InvalidMapError("outer border must be fully occupied")
        if occ.all():
            raise InvalidMapError("map has no free cells")
        if not self.step_size > 0:
            raise InvalidMapError("step_size must be positive")
        occ.setflags(write=False)
        object.__setattr__(self, "occ", occ)

    @property
    def width(self) -> int:
        return self.occ.shape[1]

    @property
    def height(self) -> int:
        return self.occ.shape[0]

    @property
    def free(self) -> np.ndarray:
        return ~self.occ

    @property
    def n_free(self) -> int:
        return int((~self.occ).sum())

    def is_free(self, x: int, y: int) -> bool:
        return 0 <= x < self.width and 0 <= y < self.height and not self.occ[y, x]

    def digest(self) -> str:
        return hashlib.sha256(save_map(self).encode()).hexdigest()[:12]

    @property
    def map_id(self) -> str:
        return self.name or self.digest()

    def __eq__(self, other):
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.step_size == other.step_size
            and self.occ.shape == other.occ.shape
            and bool((self.occ == other.occ).all())
        )

    def __hash__(self):
        return hash((self.occ.tobytes(), self.occ.shape, self.step_size))


@dataclass(frozen=True, eq=False)
class DistField:
    """Per-cell distance in meters; NaN marks occupied or unknown cells."""

    values: np.ndarray
    step_size: float = DEFAULT_STEP_SIZE
    provenance: str = "ground-truth"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def steps(self) -> np.ndarray:
        return self.values / self.step_size


def collision_seeds(grid: GridMap, n_headings: int = 4) -> np.ndarray:
    """Free cells with an occupied neighbour along one of the headings."""
    occ = grid.occ
    seeds = np.zeros_like(occ)
    for dx, dy in heading_dirs(n_headings):
        seeds |= _shift(occ, dx, dy, fill=True)
    return seeds & ~occ


def _shift(a: np.ndarray, dx: int, dy: int, fill) -> np.ndarray:
    """out[y, x] = a[y + dy, x + dx], ``fill`` outside the array."""
    h, w = a.shape
    out = np.full_like(a, fill)
    ys = slice(max(0, -dy), min(h, h - dy))
    xs = slice(max(0, -dx), min(w, w - dx))
    ys_src = slice(max(0, dy), min(h, h + dy))
    xs_src = slice(max(0, dx), min(w, w + dx))
    out[ys, xs] = a[ys_src, xs_src]
    return out


def ground_truth_df(grid: GridMap, n_headings: int = 4) -> DistField:
    """Minimum number of forward steps to a collision, in meters.

    Multi-source BFS from every cell that can collide immediately. The BFS
    runs as repeated dilation of the frontier over the heading neighbourhood.
    """
    dirs = heading_dirs(n_headings)
    free = grid.free
    if not free.any():
        raise InvalidMapError("map has no free cells")
    depth = np.full(free.shape, -1, dtype=np.int64)
    frontier = collision_seeds(grid, n_headings)
    d = 0
    while frontier.any():
        depth[frontier] = d
        grown = np.zeros_like(frontier)
        for dx, dy in dirs:
            grown |= _shift(frontier, dx, dy, fill=False)
        frontier = grown & free & (depth < 0)
        d += 1
    values = np.where(depth >= 0, depth * grid.step_size, np.nan)
    return DistField(values, grid.step_size, "ground-truth", {"headings": n_headings})


# -- text format -------------------------------------------------------------

def normalize_map_text(text: str) -> str:
    lines = text.replace("\r\n", "\n").replace("\r", "\n").split("\n")
    while lines and lines[-1] == "":
        lines.pop()
    return "\n".join(lines) + "\n"


def load_map(text: str, step_size: float = DEFAULT_STEP_SIZE, name: str = "") -> GridMap:
    lines = normalize_map_text(text).rstrip("\n").split("\n")
    if not lines or lines == [""]:
        raise MapParseError("empty map", 1, 1)
    width = len(lines[0])
    for li, line in enumerate(lines, start=1):
        if len(line) != width:
            raise MapParseError(
                f"ragged row: expected {width} cells, found {len(line)}",
                li, min(len(line), width) + 1,
            )
        for ci, ch in enumerate(line, start=1):
            if ch not in (FREE_CHAR, OCC_CHAR):
                raise MapParseError(f"illegal character {ch!r}", li, ci)
    occ = np.array([[ch == OCC_CHAR for ch in line] for line in lines], dtype=bool)
    h, w = occ.shape
    if w < 3 or h < 3:
        raise MapParseError(f"map must be at least 3x3, got {w}x{h}", 1, 1)
    for y in range(h):
        for x in range(w):
            on_border = x in (0, w - 1) or y in (0, h - 1)
            if on_border and not occ[y, x]:
                raise MapParseError("border cell is not occupied", y + 1, x + 1)
    if occ.all():
        raise MapParseError("map has no free cells", 1, 1)
    return GridMap(occ, step_size, name)


def save_map(grid: GridMap) -> str:
    rows = ["".join(OCC_CHAR if c else FREE_CHAR for c in row) for row in grid.occ]
    return "\n".join(rows) + "\n"


# -- field exports -----------------------------------------------------------

def field_to_csv(df: DistField, header: str | None = None) -> str:
    out = []
    if header:
        out.append(f"# {header}")
    for row in df.values:
        out.append(",".join("occ" if np.isnan(v) else f"{v:.4f}" for v in row))
    return "\n".join(out) + "\n"


def field_to_pgm(df: DistField, comment: str | None = None) -> str:
    v = df.values
    d_max = float(np.nanmax(v)) if df.defined.any() else 0.0
    if d_max > 0:
        scaled = np.clip(np.rint(255.0 * np.nan_to_num(v, nan=0.0) / d_max), 0, 255)
    else:
        scaled = np.zeros_like(v)
    pix = scaled.astype(np.int64)
    out = ["P2"]
    if comment:
        out.append(f"# {comment}")
    out.append(f"{df.width} {df.height}")
    out.append("255")
    out.extend(" ".join(str(p) for p in row) for row in pix)
    return "\n".join(out) + "\n"


# -- generators --------------------------------------------------------------

MAP_KINDS = ("rooms", "corridors", "random-obstacles")
_MAX_TRIES = 8


def generate_map(
    kind: str,
    seed: int,
    width: int,
    height: int,
    density: float = 0.0,
    step_size: float = DEFAULT_STEP_SIZE,
) -> GridMap:
    """Seeded walled map whose free cells form one 4-connected region."""
    if kind not in MAP_KINDS:
        raise ValueError(f"unknown map kind {kind!r}; expected one of {MAP_KINDS}")
    if width < 8 or height < 8:
        raise ValueError(f"map size must be at least 8x8, got {width}x{height}")
    if not 0 <= density < 0.5:
        raise ValueError(f"density must be in [0, 0.5), got {density}")
    rng = np.random.default_rng(seed)
    interior = (width - 2) * (height - 2)
    for _ in range(_MAX_TRIES):
        if kind == "rooms":
            occ = _rooms(width, height, rng)
        elif kind == "corridors":
            occ = _corridors(width, height, rng)
        else:
            occ = _walled(width, height)
        _scatter(occ, density, rng)
        _connect(occ)
        if (~occ).sum() >= max(1, interior // 10):
            return GridMap(occ, step_size, f"{kind}-s{seed}-{width}x{height}")
    raise MapGenerationError(
        f"could not generate a connected {kind} map after {_MAX_TRIES} tries"
    )


def _walled(w: int, h: int) -> np.ndarray:
    occ = np.zeros((h, w), dtype=bool)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def _scatter(occ: np.ndarray, density: float, rng: np.random.Generator) -> None:
    draws = rng.random(occ.shape)
    occ |= draws < density
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True


def _rooms(w: int, h: int, rng: np.random.Generator, min_room: int = 4) -> np.ndarray:
    occ = _walled(w, h)
    stack = [(1, 1, w - 2, h - 2)]
    while stack:
        x0, y0, x1, y1 = stack.pop()
        rw, rh = x1 - x0 + 1, y1 - y0 + 1
        can_v = rw >= 2 * min_room + 1
        can_h = rh >= 2 * min_room + 1
        if not (can_v or can_h):
            continue
        vertical = can_v and (not can_h or rw > rh or (rw == rh and rng.random() < 0.5))
        if vertical:
            wx = int(rng.integers(x0 + min_room, x1 - min_room + 1))
            occ[y0:y1 + 1, wx] = True
            door = int(rng.integers(y0, y1))
            occ[door:door + 2, wx] = False
            stack += [(x0, y0, wx - 1, y1), (wx + 1, y0, x1, y1)]
        else:
            wy = int(rng.integers(y0 + min_room, y1 - min_room + 1))
            occ[wy, x0:x1 + 1] = True
            door = int(rng.integers(x0, x1))
            occ[wy, door:door + 2] = False
            stack += [(x0, y0, x1, wy - 1), (x0, wy + 1, x1, y1)]
    return occ


def _corridors(w: int, h: int, rng: np.random.Generator, braid: float = 0.15) -> np.ndarray:
    occ = np.ones((h, w), dtype=bool)
    nx, ny = (w - 1) // 2, (h - 1) // 2
    seen = np.zeros((ny, nx), dtype=bool)
    start = (int(rng.integers(nx)), int(rng.integers(ny)))
    stack = [start]
    seen[start[1], start[0]] = True
    occ[2 * start[1] + 1, 2 * start[0] + 1] = False
    while stack:
        cx, cy = stack[-1]
        nbrs = [
            (cx + dx, cy + dy)
            for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1))
            if 0 <= cx + dx < nx and 0 <= cy + dy < ny and not seen[cy + dy, cx + dx]
        ]
        if not nbrs:
            stack.pop()
            continue
        ax, ay = nbrs[int(rng.integers(len(nbrs)))]
        seen[ay, ax] = True
        occ[2 * ay + 1, 2 * ax + 1] = False
        occ[cy + ay + 1, cx + ax + 1] = False
        stack.append((ax, ay))
    # knock out some walls to create loops and wider junctions
    inner = occ[1:-1, 1:-1]
    inner &= ~(rng.random(inner.shape) < braid)
    occ[0, :] = occ[-1, :] = occ[:, 0] = occ[:, -1] = True
    return occ


def _connect(occ: np.ndarray) -> None:
    """Carve L-shaped passages until the free cells are 4-connected."""
    while True:
        labels, n = ndimage.label(~occ)
        if n <= 1:
            return
        sizes = np.bincount(labels.ravel())[1:]
        main = int(np.argmax(sizes)) + 1
        other = 1 if main != 1 else 2
        ay, ax = np.argwhere(labels == other)[0]
        mys, mxs = np.nonzero(labels == main)
        k = int(np.argmin(np.abs(mys - ay) + np.abs(mxs - ax)))
        by, bx = int(mys[k]), int(mxs[k])
        step = 1 if bx >= ax else -1
        for x in range(ax, bx + step, step):
            occ[ay, x] = False
        step = 1 if by >= ay else -1
        for y in range(ay, by + step, step):
            occ[y, bx] = False
