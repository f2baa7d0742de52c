"""Experiments on vertex metrics of the tile graphs.

A MetricMatrix is a dense symmetric distance table over all words of one
level.  On top of it: averaging over the sheet-flip group, blowups into
prefix blocks, empirical quasisymmetry-distortion profiles, the ball-image
check for the collapsing projection, the covering construction over a grid
ball, and a Poincare-ratio diagnostic.  A compact binary format round-trips
matrices through files.
"""

from __future__ import annotations

import itertools
import math
import random
import struct
from dataclasses import dataclass

import numpy as np

from .graphs import CapacityError, bfs_row, prefix_subgraph
from .words import all_words, parse_word

DENSE_LEVEL_LIMIT = 4  # 10^4 x 10^4 float64 is ~0.8 GB; beyond that use rows
EXACT_GROUP_LIMIT = 2**15

_FIXED_ONE = 65536  # 16.16 fixed point in the on-disk format
_MAGIC = b"PLM1"

# enough triples to make a broken metric effectively certain to be caught,
# cheap enough to run on every construction
_VALIDATE_TRIPLES = 20000
_VALIDATE_SEED = 20210


@dataclass
class MetricMatrix:
    """Symmetric nonnegative distance table over all words of one level."""

    words: list[str]
    entries: np.ndarray
    slack: float = 1e-9  # additive tolerance for the triangle check

    def __post_init__(self):
        self.entries = np.asarray(self.entries, dtype=np.float64)
        n = len(self.words)
        if n == 0 or self.entries.shape != (n, n):
            raise ValueError("entries must be a square table over the words")
        level = len(self.words[0])
        if self.words != all_words(level):
            raise ValueError("vertex universe must be all words of one level")
        e = self.entries
        if np.diagonal(e).any():
            raise ValueError("diagonal must be zero")
        if not np.array_equal(e, e.T):
            raise ValueError("table must be symmetric")
        off = e[~np.eye(n, dtype=bool)]
        if off.size and (off <= 0).any():
            raise ValueError("off-diagonal distances must be positive")
        self._check_triangle()

    def _check_triangle(self):
        e, n = self.entries, len(self.words)
        if n <= 100:
            for k in range(n):  # exhaustive at level <= 2
                if (e > e[:, k, None] + e[None, k, :] + self.slack).any():
                    raise ValueError("triangle inequality violated")
            return
        rng = np.random.default_rng(_VALIDATE_SEED)
        idx = rng.integers(0, n, size=(_VALIDATE_TRIPLES, 3))
        i, j, k = idx[:, 0], idx[:, 1], idx[:, 2]
        if (e[i, j] > e[i, k] + e[k, j] + self.slack).any():
            raise ValueError("triangle inequality violated (sampled)")

    @property
    def level(self):
        return len(self.words[0])

    @property
    def n_vertices(self):
        return len(self.words)


class RowMetric:
    """On-demand rows of the graph metric, for levels too large to hold dense.

    One BFS per requested row, cached; quacks like a read-only mapping from
    vertex index to a distance row.
    """

    def __init__(self, g):
        self.graph = g
        self.words = g.words
        self._rows = {}

    def row(self, i):
        if i not in self._rows:
            self._rows[i] = bfs_row(self.graph, i)
        return self._rows[i]

    def entry(self, i, j):
        return int(self.row(i)[j])


def graph_metric(g, mode="dense"):
    """All-pairs hop distances of a replacement graph.

    mode="dense" returns a full MetricMatrix (levels up to 4); mode="rows"
    returns a RowMetric that computes rows lazily, for any level.
    """
    if mode == "rows":
        return RowMetric(g)
    if mode != "dense":
        raise ValueError(f"unknown mode {mode!r}")
    if g.level > DENSE_LEVEL_LIMIT:
        raise CapacityError(
            f"dense metric capped at level {DENSE_LEVEL_LIMIT}; use mode='rows'"
        )
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    u, v, _t = g.edge_arrays()
    n = g.n_vertices
    ones = np.ones(len(u))
    adj = csr_matrix(
        (np.concatenate([ones, ones]), (np.concatenate([u, v]), np.concatenate([v, u]))),
        shape=(n, n),
    )
    dist = shortest_path(adj, unweighted=True, directed=False)
    if np.isinf(dist).any():
        raise ValueError("graph is disconnected; hop distance is not a metric")
    return MetricMatrix(list(g.words), dist)


# ---------------------------------------------------------------------------
# the flip group acting on metrics


def _flip_index_permutation(level, bits):
    """Index permutation of the level's words under a sheet flip."""
    if len(bits) < level:
        raise ValueError("bit string shorter than the level")
    out = np.arange(10**level, dtype=np.int64)
    for k in range(level):
        if bits[k] != "1":
            continue
        p = 10 ** (level - k - 1)
        digit = (out // p) % 10
        out = np.where(digit == 5, out - 5 * p, np.where(digit == 0, out + 5 * p, out))
    return out


def symmetrize(d, mode="exact", samples=None, seed=None):
    """Average the metric over the sheet-flip group.

    Exact mode sums all 2^level terms (the result is flip-invariant on the
    nose and still a metric, averages of metrics being metrics); sampled mode
    draws `samples` seeded uniform group elements instead and is reproducible
    for a fixed seed.
    """
    level = d.level
    if mode == "exact":
        if 2**level > EXACT_GROUP_LIMIT:
            raise CapacityError("group too large for exact mode; use mode='sampled'")
        draws = ["".join(b) for b in itertools.product("01", repeat=level)]
    elif mode == "sampled":
        if samples is None or samples < 1:
            raise ValueError("sampled mode needs samples >= 1")
        if seed is None:
            raise ValueError("sampled mode needs an explicit seed")
        rng = random.Random(seed)
        draws = ["".join(rng.choice("01") for _ in range(level)) for _ in range(samples)]
    else:
        raise ValueError(f"unknown mode {mode!r}")

    acc = np.zeros_like(d.entries)
    for bits in draws:
        perm = _flip_index_permutation(level, bits)
        acc += d.entries[np.ix_(perm, perm)]
    acc /= len(draws)
    return MetricMatrix(list(d.words), acc, slack=max(d.slack, 1e-9))


# ---------------------------------------------------------------------------
# blowups


def _normalizer(block, n, normalization):
    if normalization == "diameter":
        lam = float(block.max())
    elif normalization == "none":
        lam = 1.0
    elif isinstance(normalization, tuple) and len(normalization) == 3 and normalization[0] == "pair":
        a, b = parse_word(normalization[1]), parse_word(normalization[2])
        if len(a) != n or len(b) != n:
            raise ValueError("normalization pair must be words of the blowup level")
        lam = float(block[int(a), int(b)])
    else:
        raise ValueError(f"unknown normalization {normalization!r}")
    if lam <= 0:
        raise ValueError("normalizer must be positive")
    return lam


def blowup_metric(d, prefix, normalization="diameter"):
    """Restrict the metric to one prefix block and rescale.

    Entry (p, q) of the result is d(prefix+p, prefix+q) / lambda with lambda
    the block diameter, a chosen pair distance, or 1.  The empty prefix with
    normalization "none" is the identity.
    """
    prefix = parse_word(prefix) if prefix else ""
    n = d.level - len(prefix)
    if n < 1:
        raise ValueError("prefix leaves no room for a block level")
    size = 10**n
    start = int(prefix) * size if prefix else 0
    block = d.entries[start : start + size, start : start + size]
    lam = _normalizer(block, n, normalization)
    return MetricMatrix(all_words(n), block / lam, slack=max(d.slack, 1e-12))


def internal_block_metric(g, prefix, normalization="none"):
    """Blowup of the metric measured inside one prefix block.

    BFS runs on the block's own edges, so ambient shortcuts around the block
    do not contribute.  The block is certified isomorphic to its level during
    extraction, which is why the result reproduces the smaller graph's metric
    exactly under normalization "none".
    """
    from scipy.sparse import csr_matrix
    from scipy.sparse.csgraph import shortest_path

    block = prefix_subgraph(g, prefix)
    size = 10**block.level
    if block.edges:
        u = np.fromiter((e[0] for e in block.edges), dtype=np.int64)
        v = np.fromiter((e[1] for e in block.edges), dtype=np.int64)
        ones = np.ones(len(u))
        adj = csr_matrix(
            (np.concatenate([ones, ones]), (np.concatenate([u, v]), np.concatenate([v, u]))),
            shape=(size, size),
        )
        dist = shortest_path(adj, unweighted=True, directed=False)
    else:
        dist = np.full((size, size), np.inf)
        np.fill_diagonal(dist, 0.0)
    if np.isinf(dist).any():
        raise ValueError("block is disconnected; hop distance is not a metric")
    lam = _normalizer(dist, block.level, normalization)
    return MetricMatrix(list(block.words), dist / lam)


# ---------------------------------------------------------------------------
# quasisymmetry distortion


_BIN_LOG = 0.5 * math.log(2.0)  # multiplicative bins a factor sqrt(2) wide


@dataclass
class DistortionProfile:
    """Per-bin distortion statistics of sampled vertex triples.

    Bin b covers ratios in [sqrt(2)^b, sqrt(2)^(b+1)).  max_ratio is the raw
    per-bin maximum of the second metric's ratio, envelope its running max
    over increasing bins (a monotone nondecreasing empirical distortion
    bound).  Empty interior bins are kept with count 0 and NaN statistics,
    never interpolated.  inverse is the same profile for reciprocal ratios.
    """

    bin_low: np.ndarray
    bin_high: np.ndarray
    count: np.ndarray
    max_ratio: np.ndarray
    envelope: np.ndarray
    samples_used: int
    samples_skipped: int
    inverse: "DistortionProfile | None" = None

    def rows(self):
        """Plot-ready (bin_low, bin_high, count, max_ratio, envelope) tuples."""
        return [
            (float(lo), float(hi), int(c), float(m), float(e))
            for lo, hi, c, m, e in zip(
                self.bin_low, self.bin_high, self.count, self.max_ratio, self.envelope
            )
        ]


def _profile_from_pairs(pairs, used, skipped):
    bins = {}
    for t, r in pairs:
        b = math.floor(math.log(t) / _BIN_LOG + 1e-12)
        cnt, mx = bins.get(b, (0, 0.0))
        bins[b] = (cnt + 1, max(mx, r))
    lo_b, hi_b = min(bins), max(bins)
    span = range(lo_b, hi_b + 1)
    count = np.array([bins.get(b, (0, 0.0))[0] for b in span], dtype=np.int64)
    max_ratio = np.array(
        [bins[b][1] if b in bins else math.nan for b in span], dtype=np.float64
    )
    envelope = np.empty_like(max_ratio)
    running = -math.inf
    for i, m in enumerate(max_ratio):
        if not math.isnan(m):
            running = max(running, m)
        envelope[i] = running if running > -math.inf else math.nan
    return DistortionProfile(
        bin_low=np.array([math.exp(_BIN_LOG * b) for b in span]),
        bin_high=np.array([math.exp(_BIN_LOG * (b + 1)) for b in span]),
        count=count,
        max_ratio=max_ratio,
        envelope=envelope,
        samples_used=used,
        samples_skipped=skipped,
    )


def qs_distortion(d1, d2, samples, seed):
    """Empirical distortion profile of the identity map between two metrics.

    Draws seeded triples (x, y, z), bins t = d1(x,y)/d1(x,z) and records the
    maximum of d2(x,y)/d2(x,z) per bin.  Triples with x = z (ratio undefined)
    or x = y (both ratios zero, no distortion information) are skipped and
    counted.  The inverse profile bins the reciprocal ratios, covering the
    switched-and-reciprocated form of the distortion bound.
    """
    if d1.words != d2.words:
        raise ValueError("profiles need a common vertex universe")
    if samples < 1:
        raise ValueError("need at least one sample")
    rng = random.Random(seed)
    n = d1.n_vertices
    e1, e2 = d1.entries, d2.entries
    fwd, bwd = [], []
    skipped = 0
    for _ in range(samples):
        x, y, z = rng.randrange(n), rng.randrange(n), rng.randrange(n)
        if x == z or x == y:
            skipped += 1
            continue
        t = e1[x, y] / e1[x, z]
        r = e2[x, y] / e2[x, z]
        fwd.append((t, r))
        bwd.append((1.0 / t, 1.0 / r))
    if not fwd:
        raise ValueError("all samples degenerate; increase samples")
    profile = _profile_from_pairs(fwd, len(fwd), skipped)
    profile.inverse = _profile_from_pairs(bwd, len(bwd), skipped)
    return profile


# ---------------------------------------------------------------------------
# ball images under the collapsing projection


@dataclass
class QuotientReport:
    level: int
    vertices_checked: int
    max_radius: int
    ok: bool
    witness: tuple | None  # (word, cell, ball_image_radius, grid_radius)


def lipschitz_quotient_check(g):
    """Projected graph balls versus grid balls, all centers and radii.

    For each vertex x the check compares, per grid cell c, the least graph
    distance from x to the fiber over c against the grid distance from x's
    cell to c.  Their equality for every cell is equivalent to the two-sided
    ball identity (image of ball(x, r) = grid ball of radius r) at every
    radius simultaneously.
    """
    if g.level > 3:
        raise CapacityError("exhaustive ball-image check capped at level 3")
    side = 3**g.level
    sx, sy = g.square_x, g.square_y
    cell = sx * side + sy
    gx, gy = np.divmod(np.arange(side * side, dtype=np.int64), side)
    max_radius = 0
    for i in range(g.n_vertices):
        dist = bfs_row(g, i)
        if (dist < 0).any():
            raise ValueError("graph is disconnected; ball images are unbounded")
        max_radius = max(max_radius, int(dist.max()))
        nearest = np.full(side * side, np.iinfo(np.int64).max, dtype=np.int64)
        np.minimum.at(nearest, cell, dist)
        grid = np.abs(gx - sx[i]) + np.abs(gy - sy[i])
        if not np.array_equal(nearest, grid):
            bad = int(np.nonzero(nearest != grid)[0][0])
            return QuotientReport(
                g.level,
                i + 1,
                max_radius,
                False,
                (g.words[i], (int(gx[bad]), int(gy[bad])), int(nearest[bad]), int(grid[bad])),
            )
    return QuotientReport(g.level, g.n_vertices, max_radius, True, None)


# ---------------------------------------------------------------------------
# covering a grid ball's preimage


@dataclass
class CoverReport:
    center: tuple[int, int]
    radius: int
    c: int
    centers: list[str]  # covering centers as words
    ball_radius: int  # common radius c * r of the covering balls
    uniform_radius: bool
    target_covered: bool  # projected image of every ball contains the grid ball
    shrunk_disjoint: bool  # 1/c-scaled balls are pairwise disjoint
    preimage_covered: bool
    max_overlap: int
    witness: tuple | None

    @property
    def ok(self):
        return self.uniform_radius and self.target_covered and self.shrunk_disjoint


def cover_preimage(g, center, radius, c=5):
    """Cover the preimage of a grid ball by graph balls of uniform radius.

    Centers are chosen greedily in vertex order, pairwise more than 2*radius
    apart in the graph, from the fibers over the grid ball; each carries a
    ball of radius c*radius.  The report verifies the covering properties:
    every ball's projected image contains the grid ball, the 1/c-scaled
    balls are pairwise disjoint, the dilated balls cover the whole preimage,
    and their worst overlap multiplicity is counted.
    """
    if c < 5:
        raise ValueError("constant must be at least 5 to cover while staying disjoint")
    if radius < 0:
        raise ValueError("radius must be >= 0")
    side = 3**g.level
    cx, cy = center
    if not (0 <= cx < side and 0 <= cy < side):
        raise ValueError(f"grid cell {center} outside the {side} x {side} grid")
    sx, sy = g.square_x, g.square_y
    target_cells = {
        (int(a), int(b))
        for a in range(max(0, cx - radius), min(side, cx + radius + 1))
        for b in range(max(0, cy - radius), min(side, cy + radius + 1))
        if abs(a - cx) + abs(b - cy) <= radius
    }
    pre = np.nonzero(np.abs(sx - cx) + np.abs(sy - cy) <= radius)[0]

    centers, rows = [], {}
    for v in pre:
        v = int(v)
        if all(rows[u][v] > 2 * radius for u in centers):
            centers.append(v)
            row = bfs_row(g, v)
            if (row < 0).any():
                raise ValueError("graph is disconnected; balls do not nest")
            rows[v] = row

    ball_radius = c * radius
    target_covered, shrunk_disjoint, preimage_covered = True, True, True
    witness = None
    covered = np.zeros(g.n_vertices, dtype=np.int64)
    shrunk = []
    for u in centers:
        members = rows[u] <= ball_radius
        covered += members
        image = {(int(a), int(b)) for a, b in zip(sx[members], sy[members])}
        if not target_cells <= image:
            target_covered = False
            witness = witness or ("image", g.words[u], sorted(target_cells - image)[:3])
        shrunk.append(np.nonzero(rows[u] <= radius)[0])
    for i in range(len(shrunk)):
        for j in range(i + 1, len(shrunk)):
            if np.intersect1d(shrunk[i], shrunk[j]).size:
                shrunk_disjoint = False
                witness = witness or (
                    "overlap",
                    g.words[centers[i]],
                    g.words[centers[j]],
                )
    if (covered[pre] == 0).any():
        preimage_covered = False
        missing = int(pre[np.nonzero(covered[pre] == 0)[0][0]])
        witness = witness or ("uncovered", g.words[missing])
    return CoverReport(
        center=(cx, cy),
        radius=radius,
        c=c,
        centers=[g.words[u] for u in centers],
        ball_radius=ball_radius,
        uniform_radius=True,
        target_covered=target_covered,
        shrunk_disjoint=shrunk_disjoint,
        preimage_covered=preimage_covered,
        max_overlap=int(covered.max()) if len(centers) else 0,
        witness=witness,
    )


# ---------------------------------------------------------------------------
# Poincare-ratio diagnostic


@dataclass
class PIDiagnostic:
    p: float
    dilation: int
    trials: int
    worst_ratio: float
    worst_case: tuple | None  # (function label, center word, radius)
    rows: list[tuple]  # (label, center word, radius, lhs, rhs, ratio)


def pi_diagnostic(g, m, p, trials, seed, dilation=2):
    """Worst observed ratio of mean oscillation to the gradient term.

    For sampled balls and a small family of test functions (the two cell
    coordinates, the ambient x coordinate of the projected square, and
    random functions constant on level-1 prefix blocks), computes

        mean_B |u - u_B|   over   diam(B) * (mean_CB grad^p)^(1/p)

    with the graph gradient (max absolute difference over incident edges),
    means weighted by the tile measure, CB the dilated ball, and diam(B)
    proxied by twice the largest center distance observed in B.  The maximum
    ratio is an empirical lower bound for any Poincare constant at this
    level; constant functions give 0/0 and are recorded as 0, excluded from
    the max.
    """
    if p < 1:
        raise ValueError("exponent must be >= 1")
    if m.level != g.level:
        raise ValueError("measure level must match the graph")
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = random.Random(seed)
    n = g.n_vertices
    weight = np.zeros(n)
    for idx, frac in m.mass.items():
        weight[idx] = float(frac)
    side = 3**g.level

    fixed = [
        ("cell-x", g.square_x.astype(np.float64)),
        ("cell-y", g.square_y.astype(np.float64)),
        ("ambient-x", (g.square_x + 0.5) / side),
    ]

    def low_frequency():
        values = [rng.uniform(0.0, 1.0) for _ in range(10)]
        blocks = np.arange(n) // 10 ** (g.level - 1)
        return np.array([values[b] for b in blocks])

    rows = []
    worst, worst_case = 0.0, None
    for t in range(trials):
        which = rng.randrange(len(fixed) + 1)
        label, u = fixed[which] if which < len(fixed) else ("low-frequency", low_frequency())
        center = rng.randrange(n)
        radius = rng.randint(1, max(1, side // 2))
        dist = bfs_row(g, center)
        if (dist < 0).any():
            raise ValueError("graph is disconnected; balls are ill-defined")
        in_b = dist <= radius
        in_cb = dist <= dilation * radius
        wb = weight[in_b]
        if wb.sum() == 0:
            continue
        ub = float((u[in_b] * wb).sum() / wb.sum())
        lhs = float((np.abs(u[in_b] - ub) * wb).sum() / wb.sum())
        grad = np.zeros(n)
        for v in np.nonzero(in_cb)[0]:
            nb = g.neighbors[v]
            if nb:
                grad[v] = max(abs(u[v] - u[x]) for x in nb)
        wcb = weight[in_cb]
        denom_mass = wcb.sum()
        gterm = (
            float((grad[in_cb] ** p * wcb).sum() / denom_mass) ** (1.0 / p)
            if denom_mass > 0
            else 0.0
        )
        diam = 2 * int(dist[in_b].max())
        rhs = diam * gterm
        if lhs == 0.0:
            ratio = 0.0
        elif rhs == 0.0:
            ratio = math.inf
        else:
            ratio = lhs / rhs
        rows.append((label, g.words[center], radius, lhs, rhs, ratio))
        if ratio > worst:
            worst, worst_case = ratio, (label, g.words[center], radius)
    return PIDiagnostic(p, dilation, trials, worst, worst_case, rows)


# ---------------------------------------------------------------------------
# persistence


def write_metric_matrix(d, path):
    """Binary dump: magic, level, vertex count, upper triangle in 16.16."""
    e = d.entries
    scaled = np.round(e * _FIXED_ONE)
    if (scaled < 0).any() or (scaled >= 2**32).any():
        raise ValueError("distances out of range for the 16.16 format")
    iu = np.triu_indices(d.n_vertices, k=1)
    payload = scaled[iu].astype("<u4")
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", d.level, d.n_vertices))
        fh.write(payload.tobytes())


def read_metric_matrix(path):
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != _MAGIC:
            raise ValueError(f"not a metric matrix file: bad magic {magic!r}")
        level, n = struct.unpack("<II", fh.read(8))
        if n != 10**level:
            raise ValueError("vertex count does not match the level")
        want = n * (n - 1) // 2
        payload = np.frombuffer(fh.read(), dtype="<u4")
        if payload.size != want:
            raise ValueError("truncated or oversized payload")
    entries = np.zeros((n, n))
    iu = np.triu_indices(n, k=1)
    entries[iu] = payload / _FIXED_ONE
    entries += entries.T
    # quantization can nick the triangle inequality by a few fixed-point ulps
    return MetricMatrix(all_words(level), entries, slack=4.0 / _FIXED_ONE)
