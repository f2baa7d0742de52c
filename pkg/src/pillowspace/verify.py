"""Named invariant suites, one per structural claim the package rests on.

Each suite checks one family of invariants across a range of levels and
returns plain dicts ready for JSON reporting.  Suites are deterministic for
a fixed seed; sampling sizes follow the acceptance protocol.
"""

from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction

from .graphs import (
    adjacency,
    bfs_row,
    boundary_face,
    build_graph,
    chain_oracle_adjacency,
    flip_permutation,
    is_automorphism,
    prefix_subgraph,
)
from .measures import TileMeasure, middle_third_ratios, pushforward_x
from .metrics import graph_metric, internal_block_metric, lipschitz_quotient_check
from .metrics import cover_preimage
from .modulus import (
    ModulusProblem,
    Network,
    effective_conductance,
    mincut_oracle,
    solve_modulus,
)
from .words import all_words, grid_word_of_square, section

SUITES = (
    "counts",
    "adjacency-oracle",
    "sheets",
    "automorphisms",
    "self-similar",
    "singular-measure",
    "quotient",
    "covering",
    "modulus-oracles",
)

# default level ranges: the cheap exhaustive regimes of each suite
DEFAULT_LEVELS = {
    "counts": range(1, 6),
    "adjacency-oracle": range(1, 4),
    "sheets": range(1, 5),
    "automorphisms": range(1, 4),
    "self-similar": range(2, 4),
    "singular-measure": range(1, 6),
    "quotient": range(1, 4),
    "covering": range(1, 4),
    "modulus-oracles": range(1, 4),
}

ORACLE_SAMPLE_PAIRS = 100_000  # random word pairs per level above the exhaustive cap
SHEET_PAIRS = 1000  # sampled same-sheet pairs per sheet
SAMPLED_DRAWS = 100  # flips or prefixes at levels past the exhaustive range
COVER_OVERLAP_CAP = 4  # observed 2 on the default protocol; fail loudly past this


@dataclass
class SuiteReport:
    suite: str
    levels: list[int]
    policy: str
    seed: int
    tolerance: float
    ok: bool
    results: list[dict] = field(default_factory=list)

    def to_dict(self):
        return {
            "suite": self.suite,
            "levels": self.levels,
            "policy": self.policy,
            "seed": self.seed,
            "tolerance": self.tolerance,
            "ok": self.ok,
            "results": self.results,
        }


def _suite_counts(n, g, ctx):
    return {
        "vertices": g.n_vertices,
        "edges": len(g.edges),
        "expected_vertices": 10**n,
        "ok": g.n_vertices == 10**n,
    }


def _suite_adjacency_oracle(n, g, ctx):
    words = all_words(n)
    if n <= 2:
        pairs = itertools.combinations(words, 2)
        checked = len(words) * (len(words) - 1) // 2
    else:
        rng = random.Random(ctx["seed"] + n)
        drawn = []
        while len(drawn) < ORACLE_SAMPLE_PAIRS:
            w, v = rng.choice(words), rng.choice(words)
            if w != v:
                drawn.append((w, v))
        pairs, checked = drawn, ORACLE_SAMPLE_PAIRS
    disagreements = sum(
        1 for w, v in pairs if adjacency(w, v) != chain_oracle_adjacency(w, v)
    )
    return {
        "pairs_checked": checked,
        "exhaustive": n <= 2,
        "disagreements": disagreements,
        "ok": disagreements == 0,
    }


def _suite_sheets(n, g, ctx):
    rng = random.Random(ctx["seed"] + 10 * n)
    side = 3**n
    if 2**n <= 8:
        sheets = ["".join(b) for b in itertools.product("01", repeat=n)]
    else:
        sheets = sorted({"".join(rng.choice("01") for _ in range(n)) for _ in range(8)})
    mismatches, pairs = 0, 0
    for bits in sheets:
        starts = max(1, SHEET_PAIRS // 40)
        for _ in range(starts):
            ax, ay = rng.randrange(side), rng.randrange(side)
            a = int(section(grid_word_of_square(n, ax, ay), bits))
            dist = bfs_row(g, a)
            for _ in range(SHEET_PAIRS // starts):
                bx, by = rng.randrange(side), rng.randrange(side)
                b = int(section(grid_word_of_square(n, bx, by), bits))
                pairs += 1
                if dist[b] != abs(ax - bx) + abs(ay - by):
                    mismatches += 1
    return {
        "sheets": len(sheets),
        "pairs_checked": pairs,
        "mismatches": mismatches,
        "ok": mismatches == 0,
    }


def _suite_automorphisms(n, g, ctx):
    if n <= 3:
        draws = ["".join(b) for b in itertools.product("01", repeat=n)]
    else:
        rng = random.Random(ctx["seed"] + 7 * n)
        draws = ["".join(rng.choice("01") for _ in range(n)) for _ in range(SAMPLED_DRAWS)]
    failures = [
        bits for bits in draws if not is_automorphism(g, flip_permutation(g, bits))
    ]
    return {
        "flips_checked": len(draws),
        "exhaustive": n <= 3,
        "failures": failures[:5],
        "ok": not failures,
    }


def _suite_self_similar(n, g, ctx):
    if n < 2:
        return {"blocks_checked": 0, "ok": True, "note": "no proper prefixes"}
    if n <= 3:
        prefixes = [w for k in range(1, n) for w in all_words(k)]
    else:
        rng = random.Random(ctx["seed"] + 13 * n)
        prefixes = [
            "".join(rng.choice("1234567890") for _ in range(rng.randint(1, n - 1)))
            for _ in range(SAMPLED_DRAWS)
        ]
    references = {
        m: build_graph(m, g.policy) for m in {n - len(p) for p in prefixes}
    }
    bad_blocks, bad_metrics, metrics_checked = [], [], 0
    for prefix in prefixes:
        m = n - len(prefix)
        try:
            prefix_subgraph(g, prefix, references[m])
        except RuntimeError:
            bad_blocks.append(prefix)
            continue
        if n <= 3:  # entrywise metric equality, cheap in the exhaustive regime
            metrics_checked += 1
            ib = internal_block_metric(g, prefix)
            ref = ctx["metric_cache"].setdefault(
                (m, g.policy), graph_metric(references[m])
            )
            if not (ib.entries == ref.entries).all():
                bad_metrics.append(prefix)
    return {
        "blocks_checked": len(prefixes),
        "metrics_checked": metrics_checked,
        "bad_blocks": bad_blocks[:5],
        "bad_metrics": bad_metrics[:5],
        "ok": not bad_blocks and not bad_metrics,
    }


def _suite_singular_measure(n, g, ctx):
    rows, skipped = middle_third_ratios(pushforward_x(TileMeasure.uniform(n)))
    want = Fraction(4, 10)
    off = [r for r in rows if r.ratio != want]
    return {
        "intervals_checked": len(rows),
        "skipped": len(skipped),
        "off_ratio": [(r.level, r.index, str(r.ratio)) for r in off[:5]],
        "ok": not off and not skipped,
    }


def _suite_quotient(n, g, ctx):
    rep = lipschitz_quotient_check(g)
    return {
        "vertices_checked": rep.vertices_checked,
        "max_radius": rep.max_radius,
        "witness": rep.witness,
        "ok": rep.ok,
    }


def _suite_covering(n, g, ctx):
    rng = random.Random(ctx["seed"] + 100 + n)
    side = 3**n
    cases = [((side // 2, side // 2), 2 if n > 1 else 1)]
    cases += [
        ((rng.randrange(side), rng.randrange(side)), rng.randint(0, 3))
        for _ in range(8)
    ]
    worst_overlap, failures = 0, []
    for center, radius in cases:
        rep = cover_preimage(g, center, radius, c=5)
        worst_overlap = max(worst_overlap, rep.max_overlap)
        if not (rep.ok and rep.preimage_covered):
            failures.append((center, radius, rep.witness))
    return {
        "balls_checked": len(cases),
        "worst_overlap": worst_overlap,
        "failures": failures[:5],
        "ok": not failures and worst_overlap <= COVER_OVERLAP_CAP,
    }


def _suite_modulus_oracles(n, g, ctx):
    net = Network.from_graph(g)
    src = frozenset(boundary_face(g, "left"))
    tgt = frozenset(boundary_face(g, "right"))
    tol = ctx["tolerance"]
    res1 = solve_modulus(ModulusProblem(net, src, tgt, 1.0, tol))
    cut = mincut_oracle(net, src, tgt)
    res2 = solve_modulus(ModulusProblem(net, src, tgt, 2.0, tol))
    cond = effective_conductance(net, src, tgt)
    ok1 = res1.converged and abs(res1.value - cut) <= 10 * tol * cut
    ok2 = res2.converged and abs(res2.value - cond) <= 10 * tol * cond
    return {
        "p1_value": res1.value,
        "mincut": cut,
        "p2_value": res2.value,
        "conductance": cond,
        "ok": ok1 and ok2,
    }


_RUNNERS = {
    "counts": _suite_counts,
    "adjacency-oracle": _suite_adjacency_oracle,
    "sheets": _suite_sheets,
    "automorphisms": _suite_automorphisms,
    "self-similar": _suite_self_similar,
    "singular-measure": _suite_singular_measure,
    "quotient": _suite_quotient,
    "covering": _suite_covering,
    "modulus-oracles": _suite_modulus_oracles,
}


def run_suite(suite, levels=None, policy="on", seed=0, tolerance=1e-6):
    """Run one named suite over the given levels and report per-level results."""
    if suite not in _RUNNERS:
        raise ValueError(f"unknown suite {suite!r}; choose from {', '.join(SUITES)}")
    if levels is None:
        levels = list(DEFAULT_LEVELS[suite])
    levels = sorted(set(levels))
    if not levels or levels[0] < 1:
        raise ValueError("levels must be >= 1")
    # no timing in results: written reports must be byte-stable across reruns
    ctx = {"seed": seed, "tolerance": tolerance, "metric_cache": {}}
    results = []
    for n in levels:
        g = build_graph(n, policy)
        row = _RUNNERS[suite](n, g, ctx)
        row["level"] = n
        results.append(row)
    return SuiteReport(
        suite=suite,
        levels=levels,
        policy=policy,
        seed=seed,
        tolerance=tolerance,
        ok=all(r["ok"] for r in results),
        results=results,
    )
