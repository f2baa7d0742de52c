"""Replacement graphs of the doubled-center subdivision complex.

Vertices of the level-n graph are the 10^n words; two tiles are joined when
they meet along a face of positive length.  Adjacency is decided by exact
integer segment arithmetic on the projected squares plus the seam loci of the
doubled center; an independent chain oracle re-derives the same answer from
pointwise membership under the fold dynamics and arbitrates any disagreement.
"""

from __future__ import annotations

import itertools
import json
import struct
from collections import deque
from dataclasses import dataclass, field

import numpy as np

from .words import (
    ALPHABET,
    CENTER_LETTERS,
    LETTERS,
    _prefix_states,
    all_words,
    flip,
    grid_word_of_square,
    parse_word,
    project_word,
)

HORIZONTAL = "H"
VERTICAL = "V"
SEAM = "S"
EDGE_TYPES = (HORIZONTAL, VERTICAL, SEAM)

GRAPH_SCHEMA = "pillow-graph-v1"
GRAPH_MAGIC = b"PLG1"
MAX_LEVEL = 6
ORACLE_MAX_LEVEL = 3


class CapacityError(RuntimeError):
    """Raised when a build would exceed the supported size."""


# ---------------------------------------------------------------------------
# face adjacency (normative rule)


def _square_boundary(state, scale):
    x0, y0 = state[0] * scale, state[1] * scale
    x1, y1 = x0 + scale, y0 + scale
    return [
        ("v", x0, y0, y1),
        ("v", x1, y0, y1),
        ("h", y0, x0, x1),
        ("h", y1, x0, x1),
    ]


def _shared_edge(state, dx, dy, scale):
    # Full common edge between a square and its (dx,dy) grid neighbor.
    x0, y0 = state[0] * scale, state[1] * scale
    if dx == 1:
        return ("v", x0 + scale, y0, y0 + scale)
    if dx == -1:
        return ("v", x0, y0, y0 + scale)
    if dy == 1:
        return ("h", y0 + scale, x0, x0 + scale)
    return ("h", y0, x0, x0 + scale)


def _intersect(segs, constraint):
    out = []
    for a in segs:
        for b in constraint:
            # Perpendicular or offset segments meet in at most a point, which
            # never contributes a positive-length face.
            if a[0] != b[0] or a[1] != b[1]:
                continue
            lo = max(a[2], b[2])
            hi = min(a[3], b[3])
            if hi > lo:
                out.append((a[0], a[1], lo, hi))
    return out


def adjacency(w, v):
    """Edge type joining the tiles of w and v, or None.

    Returns "H" for tiles meeting across a vertical face (side by side), "V"
    across a horizontal face (stacked), "S" for distinct sheets glued along a
    seam.  Corner-only contact is not an edge.
    """
    if len(w) != len(v):
        raise ValueError("words must have equal length")
    if w == v:
        raise ValueError("adjacency is defined for distinct words")
    n = len(w)
    sw = _prefix_states(w)
    sv = _prefix_states(v)

    seam = sw[n][:2] == sv[n][:2]
    constraints = []
    for k in range(1, n + 1):
        a, b = w[k - 1], v[k - 1]
        if a == b:
            continue
        qa, qb = sw[k], sv[k]
        scale = 3 ** (n - k)
        if a in CENTER_LETTERS and b in CENTER_LETTERS:
            # Sheet difference: the meeting point must sit on the level-k
            # seam, i.e. the boundary of the common level-k center square.
            if qa[:2] != qb[:2]:
                return None
            constraints.append(_square_boundary(qa, scale))
        else:
            # Grid difference: the level-k prefix squares must share a full
            # edge; the meeting locus lies on that edge.
            dx, dy = qb[0] - qa[0], qb[1] - qa[1]
            if abs(dx) + abs(dy) != 1:
                return None
            constraints.append([_shared_edge(qa, dx, dy, scale)])

    if seam:
        # Same footprint, different sheets: clip seam boundaries to the tile.
        x0, y0 = sw[n][0], sw[n][1]
        segs = None
        for constraint in constraints:
            if segs is None:
                segs = [
                    s
                    for s in (
                        _clip_to_box(c, x0, y0, x0 + 1, y0 + 1) for c in constraint
                    )
                    if s is not None
                ]
            else:
                segs = _intersect(segs, constraint)
            if not segs:
                return None
        return SEAM if segs else None

    dx, dy = sv[n][0] - sw[n][0], sv[n][1] - sw[n][1]
    if abs(dx) + abs(dy) != 1:
        return None
    edge = _shared_edge(sw[n], dx, dy, 1)
    segs = [edge]
    for constraint in constraints:
        segs = _intersect(segs, constraint)
        if not segs:
            return None
    return HORIZONTAL if edge[0] == "v" else VERTICAL


def _clip_to_box(seg, x0, y0, x1, y1):
    ax, pos, lo, hi = seg
    if ax == "v":
        if not x0 <= pos <= x1:
            return None
        lo, hi = max(lo, y0), min(hi, y1)
    else:
        if not y0 <= pos <= y1:
            return None
        lo, hi = max(lo, x0), min(hi, x1)
    return (ax, pos, lo, hi) if hi > lo else None


# ---------------------------------------------------------------------------
# chain oracle

# The oracle re-decides adjacency from first principles: a point of the n-th
# stage is a base point plus one sheet choice per level, the sheet choice
# being quotiented away off the open center cell.  Two tiles meet along a
# positive-length face iff some level-n grid edge midpoint admits a chain
# lying in both tiles.  Membership walks the fold dynamics in exact integer
# arithmetic over a fixed denominator.


def _fold_scaled(a, denom):
    b = 3 * a
    if b <= denom:
        return b
    if b <= 2 * denom:
        return 2 * denom - b
    return b - 2 * denom


def _chains_meet(w, v, px, py, denom):
    # Is there a point over (px/denom, py/denom) lying in both tiles?
    x, y = px, py
    for cw, cv in zip(w, v):
        lw, lv = LETTERS[cw], LETTERS[cv]
        x3, y3 = 3 * x, 3 * y
        for let in (lw, lv):
            if not (let.grid_col - 1) * denom <= x3 <= let.grid_col * denom:
                return False
            if not (let.grid_row - 1) * denom <= y3 <= let.grid_row * denom:
                return False
        if denom < x3 < 2 * denom and denom < y3 < 2 * denom:
            # Interior of the center cell: the sheet choice is real, so the
            # two letters must select the same sheet.
            if lw.sheet_bit != lv.sheet_bit:
                return False
        x = _fold_scaled(x, denom)
        y = _fold_scaled(y, denom)
    return True


def chain_oracle_adjacency(w, v, exhaustive=False):
    """Slow independent adjacency decision, levels <= 3 only.

    With exhaustive=True every level-n grid edge is probed; otherwise probing
    is restricted to the edges touching both projected squares, which is
    where any positive-length intersection must lie.
    """
    if len(w) != len(v):
        raise ValueError("words must have equal length")
    if w == v:
        raise ValueError("oracle compares distinct words")
    n = len(w)
    if n > ORACLE_MAX_LEVEL:
        raise ValueError(f"chain oracle supports length <= {ORACLE_MAX_LEVEL}, got {n}")
    top = 3**n
    denom = 2 * top

    sw = _prefix_states(w)[n]
    sv = _prefix_states(v)[n]
    same_square = sw[:2] == sv[:2]

    if exhaustive:
        candidates = []
        for i in range(top + 1):
            for j in range(top):
                candidates.append((2 * i, 2 * j + 1))  # on line x = i/3^n
                candidates.append((2 * j + 1, 2 * i))  # on line y = i/3^n
    elif same_square:
        x0, y0 = sw[0], sw[1]
        candidates = [
            (2 * x0, 2 * y0 + 1),
            (2 * x0 + 2, 2 * y0 + 1),
            (2 * x0 + 1, 2 * y0),
            (2 * x0 + 1, 2 * y0 + 2),
        ]
    else:
        dx, dy = sv[0] - sw[0], sv[1] - sw[1]
        if abs(dx) + abs(dy) != 1:
            return None
        x0, y0 = sw[0], sw[1]
        if dx == 1:
            candidates = [(2 * x0 + 2, 2 * y0 + 1)]
        elif dx == -1:
            candidates = [(2 * x0, 2 * y0 + 1)]
        elif dy == 1:
            candidates = [(2 * x0 + 1, 2 * y0 + 2)]
        else:
            candidates = [(2 * x0 + 1, 2 * y0)]

    for px, py in candidates:
        if _chains_meet(w, v, px, py, denom):
            if same_square:
                return SEAM
            return HORIZONTAL if px % 2 == 0 else VERTICAL
    return None


# ---------------------------------------------------------------------------
# graph construction


@dataclass
class ReplacementGraph:
    """Level-n tile graph: lexicographic words, sorted typed edge list."""

    level: int
    policy: str
    words: list[str]
    edges: list[tuple[int, int, str]]
    neighbors: list[list[int]] = field(repr=False, default=None)
    square_x: np.ndarray = field(repr=False, default=None)
    square_y: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.neighbors is None:
            nb = [[] for _ in self.words]
            for i, j, _t in self.edges:
                nb[i].append(j)
                nb[j].append(i)
            for lst in nb:
                lst.sort()
            self.neighbors = nb
        if self.square_x is None:
            from .words import _square_state

            xs = np.empty(len(self.words), dtype=np.int64)
            ys = np.empty(len(self.words), dtype=np.int64)
            for i, w in enumerate(self.words):
                st = _square_state(w)
                xs[i], ys[i] = st[0], st[1]
            self.square_x, self.square_y = xs, ys

    def index(self, word):
        if len(word) != self.level:
            raise ValueError(f"word {word!r} is not level {self.level}")
        return int(word)

    def word(self, i):
        return self.words[i]

    @property
    def n_vertices(self):
        return len(self.words)

    def edge_arrays(self):
        """Edges as three aligned numpy arrays (u, v, type code H=0,V=1,S=2)."""
        if not hasattr(self, "_edge_arrays"):
            u = np.fromiter((e[0] for e in self.edges), dtype=np.int64, count=len(self.edges))
            v = np.fromiter((e[1] for e in self.edges), dtype=np.int64, count=len(self.edges))
            t = np.fromiter(
                (EDGE_TYPES.index(e[2]) for e in self.edges),
                dtype=np.int64,
                count=len(self.edges),
            )
            self._edge_arrays = (u, v, t)
        return self._edge_arrays


def build_graph(n, central_edge_policy="on"):
    """Construct the level-n replacement graph.

    central_edge_policy "on" keeps every seam edge; "off" suppresses seam
    edges whose only differing level is the last letter.
    """
    if n < 1:
        raise ValueError(f"level must be >= 1, got {n}")
    if n > MAX_LEVEL:
        raise CapacityError(f"level {n} exceeds the supported maximum {MAX_LEVEL}")
    if central_edge_policy not in ("on", "off"):
        raise ValueError(f"unknown policy {central_edge_policy!r}")

    words = all_words(n)
    top = 3**n
    swap = {"5": "0", "0": "5"}
    edges = []

    for i, w in enumerate(words):
        # Seam partners share the footprint and differ at exactly one center
        # level (boundaries of nested center squares are disjoint, so
        # multi-level sheet flips never meet).
        for k in range(n):
            c = w[k]
            if c not in CENTER_LETTERS:
                continue
            if central_edge_policy == "off" and k == n - 1:
                continue
            v = w[:k] + swap[c] + w[k + 1 :]
            j = int(v)
            if j > i and adjacency(w, v) == SEAM:
                edges.append((i, j, SEAM))

        # Grid partners live over one of the four neighboring squares.
        st = _prefix_states(w)[n]
        for dx, dy in ((1, 0), (-1, 0), (0, 1), (0, -1)):
            nx, ny = st[0] + dx, st[1] + dy
            if not (0 <= nx < top and 0 <= ny < top):
                continue
            base = grid_word_of_square(n, nx, ny)
            centers = [p for p in range(n) if base[p] == "5"]
            for picks in itertools.product("50", repeat=len(centers)):
                v = base
                for p, c in zip(centers, picks):
                    if c == "0":
                        v = v[:p] + "0" + v[p + 1 :]
                j = int(v)
                if j > i:
                    t = adjacency(w, v)
                    if t is not None:
                        edges.append((i, j, t))

    edges.sort()
    g = ReplacementGraph(level=n, policy=central_edge_policy, words=words, edges=edges)
    _check_connected_simple(g)
    return g


def _check_connected_simple(g):
    seen = set()
    for i, j, _t in g.edges:
        if i == j:
            raise RuntimeError(f"loop edge at vertex {i}")
        if (i, j) in seen:
            raise RuntimeError(f"duplicate edge ({i}, {j})")
        seen.add((i, j))
    if g.n_vertices and len(_bfs_distances(g, 0)) != g.n_vertices:
        raise RuntimeError(f"level-{g.level} graph is not connected")


# ---------------------------------------------------------------------------
# metric primitives


def _bfs_distances(g, start, cutoff=None):
    dist = {start: 0}
    queue = deque([start])
    nb = g.neighbors
    while queue:
        u = queue.popleft()
        du = dist[u]
        if cutoff is not None and du >= cutoff:
            continue
        for x in nb[u]:
            if x not in dist:
                dist[x] = du + 1
                queue.append(x)
    return dist


def bfs_row(g, start):
    """Distances from one vertex to all others as an int array (-1 unreachable)."""
    row = np.full(g.n_vertices, -1, dtype=np.int64)
    row[start] = 0
    queue = deque([start])
    nb = g.neighbors
    while queue:
        u = queue.popleft()
        du = row[u]
        for x in nb[u]:
            if row[x] < 0:
                row[x] = du + 1
                queue.append(x)
    return row


def distance(g, u, v):
    """Hop distance between two vertices given as words or indices."""
    su = g.index(u) if isinstance(u, str) else u
    sv = g.index(v) if isinstance(v, str) else v
    if su == sv:
        return 0
    dist = {su: 0}
    queue = deque([su])
    nb = g.neighbors
    while queue:
        a = queue.popleft()
        da = dist[a]
        for x in nb[a]:
            if x == sv:
                return da + 1
            if x not in dist:
                dist[x] = da + 1
                queue.append(x)
    raise RuntimeError(f"vertices {u!r} and {v!r} are disconnected")


def ball(g, center, radius):
    """Closed-ball vertex set around a word or index."""
    c = g.index(center) if isinstance(center, str) else center
    if radius < 0:
        raise ValueError("radius must be >= 0")
    return set(_bfs_distances(g, c, cutoff=radius))


# ---------------------------------------------------------------------------
# structure maps


def boundary_face(g, side):
    """Vertices whose square touches one side of the unit square."""
    top = 3**g.level - 1
    if side == "left":
        mask = g.square_x == 0
    elif side == "right":
        mask = g.square_x == top
    elif side == "bottom":
        mask = g.square_y == 0
    elif side == "top":
        mask = g.square_y == top
    else:
        raise ValueError(f"unknown side {side!r}")
    return set(int(i) for i in np.nonzero(mask)[0])


@dataclass
class PrefixBlock:
    """Induced subgraph over one prefix, relabeled by suffix words."""

    prefix: str
    level: int  # level of the suffix block
    start: int  # first global index of the block
    words: list[str]  # suffix words, block-local order
    edges: list[tuple[int, int, str]]  # block-local indices


def prefix_subgraph(g, prefix, reference=None):
    """Extract the block over a prefix and certify it matches level n-k.

    Returns the PrefixBlock; raises if the induced edge set does not equal the
    reference graph's under the suffix bijection.  The reference is built on
    demand when not supplied (it must share g's policy).
    """
    prefix = parse_word(prefix)
    k = len(prefix)
    if not 1 <= k < g.level:
        raise ValueError(f"prefix length must be in 1..{g.level - 1}")
    m = g.level - k
    size = 10**m
    start = int(prefix) * size
    u, v, t = g.edge_arrays()
    mask = (u >= start) & (u < start + size) & (v >= start) & (v < start + size)
    local = sorted(
        (int(a) - start, int(b) - start, EDGE_TYPES[int(c)])
        for a, b, c in zip(u[mask], v[mask], t[mask])
    )
    if reference is None:
        reference = build_graph(m, g.policy)
    if reference.level != m or reference.policy != g.policy:
        raise ValueError("reference graph has wrong level or policy")
    if local != reference.edges:
        raise RuntimeError(
            f"block over prefix {prefix!r} is not isomorphic to level {m}"
        )
    return PrefixBlock(
        prefix=prefix,
        level=m,
        start=start,
        words=all_words(m),
        edges=local,
    )


def flip_permutation(g, bits):
    """Vertex permutation induced by a sheet flip, as an index array."""
    if len(bits) < g.level:
        raise ValueError("bit string shorter than the level")
    idx = np.arange(g.n_vertices, dtype=np.int64)
    out = idx.copy()
    for k in range(g.level):
        if bits[k] != "1":
            continue
        p = 10 ** (g.level - k - 1)
        digit = (out // p) % 10
        out = np.where(digit == 5, out - 5 * p, np.where(digit == 0, out + 5 * p, out))
    return out


def is_automorphism(g, perm):
    """Does the vertex permutation preserve the typed edge set?"""
    u, v, t = g.edge_arrays()
    pu, pv = perm[u], perm[v]
    lo, hi = np.minimum(pu, pv), np.maximum(pu, pv)
    mapped = np.stack([lo, hi, t], axis=1)
    orig = np.stack([u, v, t], axis=1)
    order = np.lexsort((mapped[:, 2], mapped[:, 1], mapped[:, 0]))
    return bool(np.array_equal(mapped[order], orig))


# ---------------------------------------------------------------------------
# persistence


def write_graph_json(g, path):
    payload = {
        "schema": GRAPH_SCHEMA,
        "level": g.level,
        "policy": g.policy,
        "vertices": g.words,
        "edges": [[i, j, t] for i, j, t in g.edges],
    }
    with open(path, "w") as fh:
        json.dump(payload, fh, separators=(",", ":"))
        fh.write("\n")


def read_graph_json(path):
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("schema") != GRAPH_SCHEMA:
        raise ValueError(f"not a {GRAPH_SCHEMA} file: {path}")
    level = payload["level"]
    words = payload["vertices"]
    if words != all_words(level):
        raise ValueError("vertex list is not the lexicographic word list")
    edges = [(int(i), int(j), str(t)) for i, j, t in payload["edges"]]
    for i, j, t in edges:
        if not (0 <= i < j < len(words)) or t not in EDGE_TYPES:
            raise ValueError(f"malformed edge ({i}, {j}, {t})")
    if edges != sorted(edges):
        raise ValueError("edge list is not sorted")
    return ReplacementGraph(level=level, policy=payload["policy"], words=words, edges=edges)


def write_graph_binary(g, path):
    with open(path, "wb") as fh:
        fh.write(GRAPH_MAGIC)
        fh.write(
            struct.pack(
                "<IIII",
                g.level,
                1 if g.policy == "on" else 0,
                g.n_vertices,
                len(g.edges),
            )
        )
        for i, j, t in g.edges:
            fh.write(struct.pack("<III", i, j, EDGE_TYPES.index(t)))


def read_graph_binary(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != GRAPH_MAGIC:
            raise ValueError(f"bad magic {magic!r} in {path}")
        level, policy_flag, n_vertices, n_edges = struct.unpack("<IIII", fh.read(16))
        words = all_words(level)
        if n_vertices != len(words):
            raise ValueError("vertex count does not match the level")
        raw = fh.read(12 * n_edges)
        if len(raw) != 12 * n_edges:
            raise ValueError("truncated edge block")
        edges = []
        for off in range(0, len(raw), 12):
            i, j, t = struct.unpack_from("<III", raw, off)
            edges.append((i, j, EDGE_TYPES[t]))
    return ReplacementGraph(
        level=level,
        policy="on" if policy_flag else "off",
        words=words,
        edges=edges,
    )


def read_graph(path):
    """Load a graph from either the JSON or the binary format."""
    with open(path, "rb") as fh:
        head = fh.read(4)
    if head == GRAPH_MAGIC:
        return read_graph_binary(path)
    return read_graph_json(path)
