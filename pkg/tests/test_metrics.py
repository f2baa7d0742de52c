import numpy as np
import pytest

from pillowspace import (
    CapacityError,
    MetricMatrix,
    TileMeasure,
    all_words,
    blowup_metric,
    build_graph,
    cover_preimage,
    flip_permutation,
    graph_metric,
    internal_block_metric,
    lipschitz_quotient_check,
    pi_diagnostic,
    qs_distortion,
    read_metric_matrix,
    symmetrize,
    write_metric_matrix,
)
from pillowspace.graphs import bfs_row
from pillowspace.metrics import _flip_index_permutation


@pytest.fixture(scope="module")
def graphs():
    return {n: build_graph(n) for n in (1, 2, 3)}


@pytest.fixture(scope="module")
def metrics(graphs):
    return {n: graph_metric(graphs[n]) for n in (1, 2, 3)}


# ---------------------------------------------------------------------------
# graph_metric and MetricMatrix validation


def test_level1_distances(metrics):
    e = metrics[1].entries
    assert e[1, 9] == 4  # opposite corners
    assert e[1, 3] == 2
    assert e[5, 0] == 1  # the doubled-center pair


def test_diameters(metrics):
    assert metrics[2].entries.max() == 16
    assert metrics[3].entries.max() == 52


def test_metric_axioms_hold(metrics):
    for d in metrics.values():
        e = d.entries
        assert np.array_equal(e, e.T)
        assert not np.diagonal(e).any()
        assert (e[~np.eye(len(e), dtype=bool)] > 0).all()


def test_rows_mode_matches_dense(graphs, metrics):
    rm = graph_metric(graphs[2], mode="rows")
    assert np.array_equal(rm.row(0), metrics[2].entries[0].astype(np.int64))
    assert rm.entry(1, 99) == metrics[2].entries[1, 99]
    assert rm.row(0) is rm.row(0)  # cached


def test_dense_capacity_guard():
    class Big:
        level = 5

    with pytest.raises(CapacityError):
        graph_metric(Big())
    with pytest.raises(ValueError):
        graph_metric(Big(), mode="sideways")


def test_rejects_asymmetric():
    e = np.ones((10, 10)) - np.eye(10)
    e[0, 1] = 2.0
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1), e)


def test_rejects_nonzero_diagonal():
    e = np.ones((10, 10))
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1), e)


def test_rejects_nonpositive_offdiagonal():
    e = np.ones((10, 10)) - np.eye(10)
    e[0, 1] = e[1, 0] = 0.0
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1), e)


def test_rejects_triangle_violation():
    e = np.ones((10, 10)) - np.eye(10)
    e[0, 1] = e[1, 0] = 5.0  # 5 > 1 + 1
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1), e)


def test_rejects_wrong_universe(metrics):
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1)[:9], metrics[1].entries[:9, :9])
    with pytest.raises(ValueError):
        MetricMatrix(all_words(1), np.ones((3, 3)))


# ---------------------------------------------------------------------------
# symmetrize


def _perturbed(d):
    """A valid metric that is not flip-invariant: add an indicator pseudometric."""
    f = np.array([1.0 if "0" in w else 0.0 for w in d.words])
    return MetricMatrix(list(d.words), d.entries + np.abs(f[:, None] - f[None, :]))


def test_graph_metric_already_invariant(metrics):
    # flips are automorphisms, so averaging changes nothing
    s = symmetrize(metrics[2])
    assert np.array_equal(s.entries, metrics[2].entries)


def test_symmetrize_makes_invariant(metrics):
    pert = _perturbed(metrics[2])
    p10 = _flip_index_permutation(2, "10")
    assert not np.array_equal(pert.entries[np.ix_(p10, p10)], pert.entries)
    s = symmetrize(pert)
    for bits in ["10", "01", "11"]:
        p = _flip_index_permutation(2, bits)
        assert np.array_equal(s.entries[np.ix_(p, p)], s.entries)


def test_symmetrize_idempotent(metrics):
    s = symmetrize(_perturbed(metrics[2]))
    assert np.array_equal(symmetrize(s).entries, s.entries)


def test_sampled_symmetrize_reproducible(metrics):
    pert = _perturbed(metrics[2])
    a = symmetrize(pert, mode="sampled", samples=5, seed=42)
    b = symmetrize(pert, mode="sampled", samples=5, seed=42)
    c = symmetrize(pert, mode="sampled", samples=5, seed=43)
    assert np.array_equal(a.entries, b.entries)
    assert not np.array_equal(a.entries, c.entries)


def test_sampled_symmetrize_validation(metrics):
    with pytest.raises(ValueError):
        symmetrize(metrics[1], mode="sampled", samples=5)
    with pytest.raises(ValueError):
        symmetrize(metrics[1], mode="sampled", seed=1)
    with pytest.raises(ValueError):
        symmetrize(metrics[1], mode="shaken")


def test_flip_index_permutation_matches_graph(graphs):
    for bits in ["10", "01", "11"]:
        assert np.array_equal(
            _flip_index_permutation(2, bits), flip_permutation(graphs[2], bits)
        )
    with pytest.raises(ValueError):
        _flip_index_permutation(3, "01")


# ---------------------------------------------------------------------------
# blowups


def test_internal_block_reproduces_lower_level(graphs, metrics):
    for prefix in ["1", "5", "0", "9"]:
        ib = internal_block_metric(graphs[2], prefix)
        assert np.array_equal(ib.entries, metrics[1].entries)
    ib = internal_block_metric(graphs[3], "55")
    assert np.array_equal(ib.entries, metrics[1].entries)


def test_ambient_blowup_dominated_by_internal(graphs, metrics):
    for level, prefix in [(2, "1"), (2, "5"), (3, "2"), (3, "55")]:
        amb = blowup_metric(metrics[level], prefix, normalization="none")
        ib = internal_block_metric(graphs[level], prefix)
        assert (amb.entries <= ib.entries).all()
        # blocks happen to embed isometrically here
        assert np.array_equal(amb.entries, ib.entries)


def test_blowup_identity(metrics):
    b = blowup_metric(metrics[1], "", normalization="none")
    assert np.array_equal(b.entries, metrics[1].entries)


def test_blowup_normalizations(metrics):
    bd = blowup_metric(metrics[2], "3", normalization="diameter")
    assert bd.entries.max() == 1.0
    bp = blowup_metric(metrics[2], "3", normalization=("pair", "1", "9"))
    assert bp.entries[1, 9] == 1.0


def test_blowup_validation(metrics):
    with pytest.raises(ValueError):
        blowup_metric(metrics[1], "5")  # no room for a block
    with pytest.raises(ValueError):
        blowup_metric(metrics[2], "3", normalization=("pair", "1", "1"))  # zero
    with pytest.raises(ValueError):
        blowup_metric(metrics[2], "3", normalization=("pair", "11", "99"))
    with pytest.raises(ValueError):
        blowup_metric(metrics[2], "3", normalization="perimeter")


# ---------------------------------------------------------------------------
# distortion profiles


def test_identity_profile_tracks_bins(metrics):
    prof = qs_distortion(metrics[2], metrics[2], samples=2000, seed=7)
    assert prof.samples_used + prof.samples_skipped == 2000
    for lo, hi, count, mx, _env in prof.rows():
        if count:
            assert lo - 1e-12 <= mx <= hi + 1e-12


def test_envelope_monotone(metrics):
    prof = qs_distortion(metrics[2], _perturbed(metrics[2]), samples=2000, seed=7)
    env = prof.envelope[~np.isnan(prof.envelope)]
    assert (np.diff(env) >= 0).all()
    assert prof.inverse is not None
    inv_env = prof.inverse.envelope[~np.isnan(prof.inverse.envelope)]
    assert (np.diff(inv_env) >= 0).all()


def test_scaling_cancels(metrics):
    d = metrics[1]
    doubled = MetricMatrix(list(d.words), 2.0 * d.entries)
    a = qs_distortion(d, d, samples=1000, seed=3)
    b = qs_distortion(d, doubled, samples=1000, seed=3)
    assert np.array_equal(a.count, b.count)
    assert np.array_equal(a.max_ratio, b.max_ratio, equal_nan=True)


def test_snowflake_profile(metrics):
    """Square-rooting the metric bends ratios to their square roots, bin by bin."""
    d = metrics[2]
    snow = MetricMatrix(list(d.words), np.sqrt(d.entries))
    prof = qs_distortion(d, snow, samples=2000, seed=9)
    for lo, hi, count, mx, _env in prof.rows():
        if count:
            assert np.sqrt(lo) - 1e-12 <= mx <= np.sqrt(hi) + 1e-12


def test_profile_reproducible(metrics):
    a = qs_distortion(metrics[1], metrics[1], samples=500, seed=11)
    b = qs_distortion(metrics[1], metrics[1], samples=500, seed=11)
    assert np.array_equal(a.count, b.count)
    assert a.samples_skipped == b.samples_skipped


def test_profile_validation(metrics):
    with pytest.raises(ValueError):
        qs_distortion(metrics[1], metrics[2], samples=10, seed=0)
    with pytest.raises(ValueError):
        qs_distortion(metrics[1], metrics[1], samples=0, seed=0)


# ---------------------------------------------------------------------------
# projection ball images


def test_quotient_check_passes(graphs):
    for n in (1, 2, 3):
        rep = lipschitz_quotient_check(graphs[n])
        assert rep.ok, rep.witness
        assert rep.vertices_checked == graphs[n].n_vertices
        assert rep.witness is None
    assert lipschitz_quotient_check(graphs[2]).max_radius == 16


def test_quotient_check_capacity():
    class Big:
        level = 4

    with pytest.raises(CapacityError):
        lipschitz_quotient_check(Big())


# ---------------------------------------------------------------------------
# covering the preimage of a grid ball


def test_cover_radius_zero(graphs):
    # fiber over the doubled center: every vertex its own ball
    rep = cover_preimage(graphs[2], (4, 4), 0)
    assert rep.ok and rep.preimage_covered
    assert len(rep.centers) == 4
    assert rep.ball_radius == 0
    assert rep.max_overlap == 1


def test_cover_center_ball(graphs):
    rep = cover_preimage(graphs[2], (4, 4), 1)
    assert rep.ok, rep.witness
    assert rep.centers == ["00", "50"]
    assert rep.ball_radius == 5
    assert rep.preimage_covered
    assert rep.max_overlap == 2


def test_cover_level3(graphs):
    rep = cover_preimage(graphs[3], (13, 13), 2)
    assert rep.ok, rep.witness
    assert rep.preimage_covered
    assert rep.ball_radius == 10
    # chosen centers really are pairwise far apart
    for i, a in enumerate(rep.centers):
        for b in rep.centers[i + 1 :]:
            assert bfs_row(graphs[3], int(a))[int(b)] > 4


def test_cover_validation(graphs):
    with pytest.raises(ValueError):
        cover_preimage(graphs[2], (4, 4), 1, c=4)
    with pytest.raises(ValueError):
        cover_preimage(graphs[2], (4, 4), -1)
    with pytest.raises(ValueError):
        cover_preimage(graphs[2], (9, 0), 1)


# ---------------------------------------------------------------------------
# Poincare-ratio diagnostic


def test_pi_diagnostic_pinned_level2(graphs):
    rep = pi_diagnostic(graphs[2], TileMeasure.uniform(2), p=2.0, trials=40, seed=11)
    assert rep.worst_ratio == pytest.approx(0.27777777777777773, rel=1e-12)
    assert rep.worst_case == ("ambient-x", "49", 1)
    assert len(rep.rows) == 40


def test_pi_diagnostic_pinned_level3(graphs):
    rep = pi_diagnostic(graphs[3], TileMeasure.uniform(3), p=1.5, trials=25, seed=5)
    assert rep.worst_ratio == pytest.approx(0.22837370242214533, rel=1e-12)


def test_pi_diagnostic_ratios_finite(graphs):
    rep = pi_diagnostic(graphs[2], TileMeasure.uniform(2), p=3.0, trials=30, seed=2)
    for _label, _center, _radius, lhs, rhs, ratio in rep.rows:
        assert np.isfinite(ratio) and ratio >= 0
        assert lhs >= 0 and rhs >= 0


def test_pi_diagnostic_sheet_measure(graphs):
    # mass on one sheet only; balls missing the sheet are skipped, not crashed
    rep = pi_diagnostic(graphs[2], TileMeasure.one_sheet(2, "00"), p=2.0, trials=20, seed=4)
    assert rep.worst_ratio >= 0


def test_pi_diagnostic_validation(graphs):
    m = TileMeasure.uniform(2)
    with pytest.raises(ValueError):
        pi_diagnostic(graphs[2], m, p=0.5, trials=5, seed=0)
    with pytest.raises(ValueError):
        pi_diagnostic(graphs[2], m, p=2.0, trials=0, seed=0)
    with pytest.raises(ValueError):
        pi_diagnostic(graphs[1], m, p=2.0, trials=5, seed=0)


# ---------------------------------------------------------------------------
# persistence


def test_roundtrip_exact(metrics, tmp_path):
    for n in (1, 2):
        path = tmp_path / f"m{n}.bin"
        write_metric_matrix(metrics[n], path)
        back = read_metric_matrix(path)
        assert back.words == metrics[n].words
        assert np.array_equal(back.entries, metrics[n].entries)


def test_roundtrip_quantizes_fractions(metrics, tmp_path):
    d = metrics[1]
    scaled = MetricMatrix(list(d.words), d.entries / 3.0)
    path = tmp_path / "frac.bin"
    write_metric_matrix(scaled, path)
    back = read_metric_matrix(path)
    assert np.allclose(back.entries, scaled.entries, atol=1e-5)
    assert not np.array_equal(back.entries, scaled.entries)


def test_read_rejects_bad_magic(metrics, tmp_path):
    path = tmp_path / "m.bin"
    write_metric_matrix(metrics[1], path)
    raw = bytearray(path.read_bytes())
    raw[0] ^= 0xFF
    path.write_bytes(bytes(raw))
    with pytest.raises(ValueError, match="magic"):
        read_metric_matrix(path)


def test_read_rejects_truncation(metrics, tmp_path):
    path = tmp_path / "m.bin"
    write_metric_matrix(metrics[1], path)
    raw = path.read_bytes()
    path.write_bytes(raw[:-4])
    with pytest.raises(ValueError):
        read_metric_matrix(path)


def test_read_rejects_count_mismatch(tmp_path):
    import struct

    path = tmp_path / "m.bin"
    path.write_bytes(b"PLM1" + struct.pack("<II", 1, 11))
    with pytest.raises(ValueError):
        read_metric_matrix(path)


def test_write_rejects_overflow(tmp_path):
    e = 65536.0 * (np.ones((10, 10)) - np.eye(10))
    big = MetricMatrix(all_words(1), e)
    with pytest.raises(ValueError):
        write_metric_matrix(big, tmp_path / "m.bin")
