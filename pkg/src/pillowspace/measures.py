"""Exact tile measures and their singularity diagnostics.

Masses are Fractions keyed by word index.  The dict's key set is the
measure's universe: absent tiles are outside the measure entirely, while an
explicit zero entry is a genuine zero-mass tile (the distinction matters for
the doubling check).  The headline computation is the pushforward to the
x-axis, whose middle-third weight ratio is exactly 4/10 for the uniform
measure at every triadic interval: the mechanism behind measure singularity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .words import GRID_LETTERS, all_words, section, word_square


@dataclass
class TileMeasure:
    """Nonnegative rational masses on level-`level` tiles (sparse by universe)."""

    level: int
    mass: dict[int, Fraction]

    def __post_init__(self):
        if not self.mass:
            raise ValueError("a tile measure needs a nonempty universe")
        for idx, m in self.mass.items():
            if not (0 <= idx < 10**self.level):
                raise ValueError(f"tile index {idx} outside level {self.level}")
            if m < 0:
                raise ValueError(f"negative mass at tile {idx}")
        if self.total() <= 0:
            raise ValueError("total mass must be positive")

    def total(self):
        return sum(self.mass.values(), Fraction(0))

    @classmethod
    def uniform(cls, level):
        """Equal mass 10^-level on every tile."""
        m = Fraction(1, 10**level)
        return cls(level, {i: m for i in range(10**level)})

    @classmethod
    def one_sheet(cls, level, bits=None):
        """Uniform mass 9^-level on the tiles of a single sheet.

        The sheet is selected by a flip-group bit string (default: the base
        sheet of the center-free words).  Tiles off the sheet are not part of
        this measure's universe.
        """
        if bits is None:
            bits = "0" * level
        m = Fraction(1, 9**level)
        mass = {}
        for letters in _grid_words(level):
            mass[int(section(letters, bits))] = m
        return cls(level, mass)

    @classmethod
    def dirac(cls, word):
        return cls(len(word), {int(word): Fraction(1)})


def _grid_words(level):
    import itertools

    for p in itertools.product(GRID_LETTERS, repeat=level):
        yield "".join(p)


@dataclass
class IntervalWeights:
    """Exact weights of the 3^level triadic x-intervals."""

    level: int
    weights: list[Fraction]

    def total(self):
        return sum(self.weights, Fraction(0))


def pushforward_x(measure):
    """Project a tile measure to the x-axis subdivision."""
    n = measure.level
    weights = [Fraction(0)] * 3**n
    words = all_words(n)
    for idx, m in measure.mass.items():
        if m:
            weights[word_square(words[idx]).x] += m
    return IntervalWeights(n, weights)


@dataclass(frozen=True)
class RatioRow:
    level: int  # level of the parent interval
    index: int  # parent interval index at that level
    weight: Fraction  # parent weight
    ratio: Fraction  # weight(middle third) / weight(parent)


def middle_third_ratios(interval_weights):
    """Exact mid-third ratios for every positive-weight triadic interval.

    Returns (rows, skipped) where skipped lists the (level, index) pairs of
    zero-weight parents, which have no well-defined ratio.
    """
    n = interval_weights.level
    per_level = {n: list(interval_weights.weights)}
    for m in range(n - 1, -1, -1):
        finer = per_level[m + 1]
        per_level[m] = [
            finer[3 * i] + finer[3 * i + 1] + finer[3 * i + 2] for i in range(3**m)
        ]
    rows, skipped = [], []
    for m in range(n):
        coarse, finer = per_level[m], per_level[m + 1]
        for i, weight in enumerate(coarse):
            if weight == 0:
                skipped.append((m, i))
            else:
                rows.append(RatioRow(m, i, weight, finer[3 * i + 1] / weight))
    return rows, skipped


@dataclass
class DoublingReport:
    max_ratio: Fraction | None  # None when flagged non-doubling
    non_doubling: bool
    witness: tuple | None = None
    pairs_checked: int = 0

    @property
    def ratio(self):
        return math.inf if self.non_doubling else self.max_ratio


def tile_doubling_check(measure, graph):
    """Worst mass ratio over nearby tile pairs at levels n and n-1.

    Same-level pairs run over graph edges inside the universe; cross-level
    pairs compare each tile to its one-letter-coarser parent (prefix sum over
    the universe).  An explicit zero-mass tile adjacent to positive mass is
    non-doubling (infinite ratio).
    """
    if graph.level != measure.level:
        raise ValueError("graph level must match the measure level")
    mass = measure.mass
    worst = Fraction(0)
    witness = None
    checked = 0

    for i, j, _t in graph.edges:
        if i in mass and j in mass:
            a, b = mass[i], mass[j]
            checked += 1
            if (a == 0) != (b == 0):
                return DoublingReport(None, True, ("edge", i, j), checked)
            if a and b:
                r = max(a / b, b / a)
                if r > worst:
                    worst, witness = r, ("edge", i, j)

    if measure.level >= 1:
        parent_sum = {}
        for idx, m in mass.items():
            parent_sum[idx // 10] = parent_sum.get(idx // 10, Fraction(0)) + m
        for idx, m in mass.items():
            total = parent_sum[idx // 10]
            checked += 1
            if total > 0 and m == 0:
                return DoublingReport(None, True, ("parent", idx), checked)
            if total > 0 and m > 0:
                r = total / m
                if r > worst:
                    worst, witness = r, ("parent", idx)

    return DoublingReport(worst, False, witness, checked)


@dataclass
class DimensionFit:
    estimate: float
    residual: float  # max abs deviation of the fit over the data points
    rows: list = field(default_factory=list)  # (variant, level_or_radius, count)


def box_dimension_estimate(levels):
    """Tile-count slope: log(#tiles) against log(1/side) across levels."""
    levels = sorted(set(levels))
    if len(levels) < 2:
        raise ValueError("need at least two levels for a slope")
    xs = np.array([n * math.log(3) for n in levels])
    ys = np.array([n * math.log(10) for n in levels])
    slope, intercept = _least_squares(xs, ys)
    resid = float(np.max(np.abs(ys - (slope * xs + intercept))))
    rows = [("tiles", n, 10**n) for n in levels]
    return DimensionFit(slope, resid, rows)


def ball_dimension_estimate(graph, samples, seed, radii_exponents=None):
    """Ball-count slope: log |ball(v, 3^m)| against m log 3, averaged over v.

    Samples only vertices whose largest ball avoids the outer hull (when any
    exist); a clipped ball undercounts and drags the slope down.  The default
    radius grid likewise drops 3^1, whose discreteness bias dominates.
    """
    from .graphs import _bfs_distances

    n = graph.level
    if radii_exponents is None:
        radii_exponents = list(range(2, n)) if n >= 4 else list(range(1, n))
    if len(radii_exponents) < 2:
        raise ValueError("need at least two radii")
    rng = np.random.default_rng(seed)
    side = 3**n
    hull = np.minimum(
        np.minimum(graph.square_x, side - 1 - graph.square_x),
        np.minimum(graph.square_y, side - 1 - graph.square_y),
    )
    candidates = np.nonzero(hull >= 3 ** max(radii_exponents))[0]
    if len(candidates) == 0:
        candidates = np.arange(graph.n_vertices)
    centers = rng.choice(candidates, size=min(samples, len(candidates)), replace=False)
    max_r = 3 ** max(radii_exponents)
    log_counts = np.zeros(len(radii_exponents))
    rows = []
    for c in centers:
        dist = _bfs_distances(graph, int(c), cutoff=max_r)
        values = np.fromiter(dist.values(), dtype=np.int64, count=len(dist))
        for col, m in enumerate(radii_exponents):
            count = int((values <= 3**m).sum())
            log_counts[col] += math.log(count)
            rows.append(("balls", 3**m, count))
    log_counts /= len(centers)
    xs = np.array([m * math.log(3) for m in radii_exponents])
    slope, intercept = _least_squares(xs, log_counts)
    resid = float(np.max(np.abs(log_counts - (slope * xs + intercept))))
    return DimensionFit(slope, resid, rows)


def _least_squares(xs, ys):
    xbar, ybar = xs.mean(), ys.mean()
    slope = float(((xs - xbar) * (ys - ybar)).sum() / ((xs - xbar) ** 2).sum())
    return slope, float(ybar - slope * xbar)


def blowup_measure(measure, prefix):
    """Renormalized restriction to a prefix block, shifted down to its level.

    The uniform measure is a fixed point: blowing up uniform at level n+k
    along any prefix of length k gives uniform at level n.
    """
    k = len(prefix)
    n = measure.level - k
    if n < 1:
        raise ValueError("prefix leaves no levels behind")
    size = 10**n
    start = int(prefix) * size
    sub = {
        idx - start: m
        for idx, m in measure.mass.items()
        if start <= idx < start + size
    }
    if not sub:
        raise ValueError(f"measure has no universe over prefix {prefix!r}")
    total = sum(sub.values(), Fraction(0))
    if total == 0:
        raise ValueError(f"measure vanishes over prefix {prefix!r}")
    return TileMeasure(n, {idx: m / total for idx, m in sub.items()})
