"""Instance file parsing: coordinate tours, volume lists, edge lists.

Formats:

* ``tsplib`` -- the classic coordinate file layout (``NODE_COORD_SECTION``
  with ``EUC_2D`` weights, nearest-integer rounded per that convention),
* ``bpp`` -- one volume per line, unit bin capacity,
* ``dimacs`` -- ``p edge N M`` header plus ``e u v`` lines (1-based ids).
"""

import random
from typing import List

from .bpp import BppInstance
from .tsp import TspInstance
from .vc import VcInstance


class ParseError(ValueError):
    def __init__(self, path, line_no: int, message: str):
        super().__init__(f"{path}:{line_no}: {message}")
        self.line_no = line_no


def load_tsplib(path) -> TspInstance:
    coords = {}
    dimension = None
    weight_type = None
    in_coords = False
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line == "EOF":
                continue
            upper = line.upper()
            if upper.startswith("DIMENSION"):
                try:
                    dimension = int(line.split(":")[-1])
                except ValueError:
                    raise ParseError(path, line_no, "bad DIMENSION")
                continue
            if upper.startswith("EDGE_WEIGHT_TYPE"):
                weight_type = line.split(":")[-1].strip().upper()
                continue
            if upper.startswith("NODE_COORD_SECTION"):
                in_coords = True
                continue
            if in_coords:
                parts = line.split()
                if len(parts) != 3:
                    raise ParseError(path, line_no, f"expected 'id x y', got {line!r}")
                try:
                    idx, x, y = int(parts[0]), float(parts[1]), float(parts[2])
                except ValueError:
                    raise ParseError(path, line_no, f"bad coordinate line {line!r}")
                coords[idx] = (x, y)
    if weight_type is not None and weight_type != "EUC_2D":
        raise ValueError(f"{path}: unsupported EDGE_WEIGHT_TYPE {weight_type}")
    if not coords:
        raise ValueError(f"{path}: no NODE_COORD_SECTION found")
    if dimension is not None and len(coords) != dimension:
        raise ValueError(f"{path}: DIMENSION {dimension} but {len(coords)} coordinates")
    ordered = [coords[k] for k in sorted(coords)]
    return TspInstance.from_coords(ordered, rounded=True)


def load_volumes(path) -> BppInstance:
    volumes: List[float] = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            try:
                v = float(line)
            except ValueError:
                raise ParseError(path, line_no, f"bad volume {line!r}")
            if v <= 0:
                raise ParseError(path, line_no, "volume must be positive")
            if v > 1.0:
                raise ParseError(path, line_no, "volume exceeds capacity")
            volumes.append(v)
    if not volumes:
        raise ValueError(f"{path}: empty volume list")
    return BppInstance(volumes)


def load_dimacs(path) -> VcInstance:
    n = None
    edges = []
    with open(path) as fh:
        for line_no, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("c"):
                continue
            parts = line.split()
            if parts[0] == "p":
                if len(parts) < 4 or parts[1] not in ("edge", "col"):
                    raise ParseError(path, line_no, f"bad problem line {line!r}")
                n = int(parts[2])
            elif parts[0] == "e":
                if n is None:
                    raise ParseError(path, line_no, "edge before problem line")
                if len(parts) != 3:
                    raise ParseError(path, line_no, f"bad edge line {line!r}")
                try:
                    u, v = int(parts[1]) - 1, int(parts[2]) - 1
                except ValueError:
                    raise ParseError(path, line_no, f"bad edge line {line!r}")
                edges.append((u, v))
    if n is None:
        raise ValueError(f"{path}: missing problem line")
    return VcInstance(n, edges)


_LOADERS = {
    "tsplib": load_tsplib,
    "bpp": load_volumes,
    "dimacs": load_dimacs,
}


def load_instance(path, fmt: str):
    """Parse ``path`` as one of 'tsplib', 'bpp', 'dimacs'."""
    try:
        loader = _LOADERS[fmt]
    except KeyError:
        raise ValueError(f"unknown instance format {fmt!r}; choose from {sorted(_LOADERS)}")
    return loader(path)


def generate_bpp_volumes(n: int, seed: int) -> List[float]:
    """``n`` volumes drawn uniformly from the open unit interval."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(f"bpp/{seed}")
    out = []
    while len(out) < n:
        v = rng.random()
        if 0.0 < v < 1.0:
            out.append(v)
    return out


def write_volume_file(path, volumes) -> None:
    with open(path, "w") as fh:
        for v in volumes:
            fh.write(format(float(v), ".17g") + "\n")
