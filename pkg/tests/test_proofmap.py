import json

import numpy as np
import pytest

from gridverify import (
    CorrectnessProperty,
    SolverConfig,
    build_partition,
    build_proofmap,
    emit_heatmap,
    load_proofmap,
    presample,
    save_proofmap,
    stats_table,
)
from gridverify.fixtures import (
    constant_bias_composed,
    identity_composed,
    tiny_random_composed,
)
from gridverify.netpbm import read_ppm
from gridverify.proofmap import RESULT_PALETTE, MapEntry, ProofMap, aggregate
from gridverify.solver import check_candidate

C_DOMAIN = ((-3.0, -0.37), (-0.03, 0.17))


def test_partition_experiment_grid():
    part = build_partition(C_DOMAIN, (20, 20))
    assert part.n_cells == 400
    for cell in part.cells():
        lo, hi = cell.bounds[1]
        assert hi - lo == pytest.approx(0.01, abs=1e-12)
    first = part.cell_at((0, 0))
    assert first.bounds[0][0] == -3.0 and first.bounds[1][0] == -0.03


def test_partition_latent_grid():
    part = build_partition(
        ((-1.0, -0.75), (-0.25, 0.2), (-0.1, 0.1)), (11, 11, 2), ("d", "theta", "z")
    )
    assert part.n_cells == 242
    assert part.cell_at((0, 0, 1)).bounds[2] == (0.0, 0.1)


def test_partition_single_cell_is_domain():
    part = build_partition(C_DOMAIN, (1, 1))
    assert part.cells()[0].bounds == C_DOMAIN


def test_partition_tiles_domain():
    part = build_partition(C_DOMAIN, (7, 13))
    vol = sum(
        np.prod([hi - lo for lo, hi in cell.bounds]) for cell in part.cells()
    )
    domain_vol = np.prod([hi - lo for lo, hi in C_DOMAIN])
    assert vol == pytest.approx(domain_vol, rel=1e-12)
    # neighbors share boundaries exactly
    for i in range(6):
        a = part.cell_at((i, 0)).bounds[0][1]
        b = part.cell_at((i + 1, 0)).bounds[0][0]
        assert a == b


def test_partition_rejects_bad_counts():
    with pytest.raises(ValueError):
        build_partition(C_DOMAIN, (0, 20))
    with pytest.raises(ValueError):
        build_partition(((-1.0, -1.0), (0.0, 1.0)), (2, 2))


def test_presample_bias_marks_every_center():
    part = build_partition(C_DOMAIN, (5, 5))
    net = constant_bias_composed(1.0)
    marked = presample(part, net, CorrectnessProperty(0.5))
    assert len(marked) == part.n_cells
    for idx, entry in marked.items():
        cell = part.cell_at(idx)
        assert entry.witness["point"] == cell.center().tolist()
        assert entry.result == 1


def test_presample_identity_marks_none():
    part = build_partition(C_DOMAIN, (5, 5))
    marked = presample(part, identity_composed(), CorrectnessProperty(0.25))
    assert marked == {}


def test_presample_only_marks_true_violations():
    net = tiny_random_composed(11, weight_scale=2.0)
    part = build_partition(((-1.0, 1.0), (-1.0, 1.0)), (5, 5))
    prop = CorrectnessProperty(0.8)
    marked = presample(part, net, prop, points_per_cell=5)
    assert marked  # this fixture has violating cells
    for idx, entry in marked.items():
        hit = check_candidate(net, np.array(entry.witness["point"]), prop)
        assert hit is not None and hit.violation == entry.witness["violation"]


def _tiny_map(jobs=1, out_path=None, resume=False):
    net = tiny_random_composed(11, weight_scale=2.0)
    part = build_partition(((-1.0, 1.0), (-1.0, 1.0)), (3, 3))
    return build_proofmap(
        part,
        net,
        CorrectnessProperty(0.8),
        SolverConfig(),
        jobs=jobs,
        out_path=out_path,
        resume=resume,
    )


def test_build_proofmap_identity_all_proved():
    part = build_partition(C_DOMAIN, (4, 4))
    pm = build_proofmap(part, identity_composed(), CorrectnessProperty(0.25), SolverConfig(), jobs=1)
    agg = aggregate(pm)
    assert agg["UNSAT"] == (16, 100)
    assert agg["SAT"] == (0, 0) and agg["Unknown"] == (0, 0)


def _synthetic_map(counts):
    part = build_partition(((0.0, 1.0), (0.0, 1.0)), (20, 20))
    pm = ProofMap(part, CorrectnessProperty(0.25), SolverConfig())
    codes = [-1] * counts[0] + [1] * counts[1] + [0] * counts[2]
    for cell, code in zip(part.cells(), codes):
        pm.entries[cell.index] = MapEntry(cell.index, cell.bounds, code)
    return pm


def test_aggregate_c_space_counts():
    pm = _synthetic_map((218, 56, 126))
    agg = aggregate(pm)
    assert agg == {"UNSAT": (218, 55), "SAT": (56, 14), "Unknown": (126, 32)}
    table = stats_table(pm)
    assert "UNSAT" in table and "55%" in table and "14%" in table and "32%" in table


def test_aggregate_cz_space_counts():
    part = build_partition(((0.0, 1.0), (0.0, 1.0)), (11, 22))
    pm = ProofMap(part, CorrectnessProperty(0.5), SolverConfig())
    codes = [-1] * 89 + [1] * 88 + [0] * 65
    for cell, code in zip(part.cells(), codes):
        pm.entries[cell.index] = MapEntry(cell.index, cell.bounds, code)
    agg = aggregate(pm)
    assert agg == {"UNSAT": (89, 37), "SAT": (88, 36), "Unknown": (65, 27)}


def test_counts_sum_and_percent_recompute():
    pm = _synthetic_map((218, 56, 126))
    agg = aggregate(pm)
    assert sum(v for v, _ in agg.values()) == 400
    for count, pct in agg.values():
        assert pct == int(np.floor(100 * count / 400 + 0.5))


def _strip_times(text):
    out = []
    for line in text.splitlines():
        rec = json.loads(line)
        rec.pop("time_s", None)
        out.append(json.dumps(rec, sort_keys=True))
    return "\n".join(out)


def test_jobs_do_not_change_results(tmp_path):
    a = tmp_path / "a.jsonl"
    b = tmp_path / "b.jsonl"
    _tiny_map(jobs=1, out_path=a)
    _tiny_map(jobs=4, out_path=b)
    assert _strip_times(a.read_text()) == _strip_times(b.read_text())


def test_map_file_round_trip_bytes(tmp_path):
    path = tmp_path / "map.jsonl"
    _tiny_map(jobs=1, out_path=path)
    pm = load_proofmap(path)
    again = tmp_path / "map2.jsonl"
    save_proofmap(pm, again)
    assert path.read_bytes() == again.read_bytes()


def test_resume_skips_recorded_cells(tmp_path):
    path = tmp_path / "map.jsonl"
    full = _tiny_map(jobs=1, out_path=path)
    # keep the header and the first four records, then resume
    lines = path.read_text().splitlines(keepends=True)
    partial = tmp_path / "partial.jsonl"
    partial.write_text("".join(lines[:5]))
    resumed = _tiny_map(jobs=1, out_path=partial, resume=True)
    assert _strip_times(partial.read_text()) == _strip_times(path.read_text())
    assert {i: e.result for i, e in resumed.entries.items()} == {
        i: e.result for i, e in full.entries.items()
    }


def test_resume_rejects_different_settings(tmp_path):
    path = tmp_path / "map.jsonl"
    _tiny_map(jobs=1, out_path=path)
    net = tiny_random_composed(11, weight_scale=2.0)
    part = build_partition(((-1.0, 1.0), (-1.0, 1.0)), (3, 3))
    with pytest.raises(ValueError, match="different settings"):
        build_proofmap(
            part, net, CorrectnessProperty(0.7), SolverConfig(), jobs=1,
            out_path=path, resume=True,
        )


def test_failed_cell_recorded_as_unknown():
    from gridverify.layers import Dense, Reshape
    from gridverify.network import ComposedNetwork, NetworkSpec

    n = 16
    w = np.zeros((n, 2))
    w[0, 0] = 1e308
    decoder = NetworkSpec(
        name="overflow", input_shape=(2,), role="decoder",
        layers=[Dense(w, np.zeros(n)), Reshape((4, 4))],
    )
    w2 = np.zeros((1, n))
    w2[0, 0] = 1e10
    regressor = NetworkSpec(
        name="reader", input_shape=(4, 4), role="regressor",
        layers=[Reshape((n,)), Dense(w2, np.zeros(1))],
    )
    net = ComposedNetwork(decoder, regressor)
    part = build_partition(((1.0, 2.0), (0.0, 0.1)), (2, 1))
    pm = build_proofmap(part, net, CorrectnessProperty(0.25), SolverConfig(), jobs=1)
    assert pm.complete()
    for entry in pm.entries.values():
        assert entry.result == 0
        assert entry.note.startswith("error:")


def test_heatmap_palette_quadrants(tmp_path):
    part = build_partition(((0.0, 1.0), (0.0, 1.0)), (2, 2))
    pm = ProofMap(part, CorrectnessProperty(0.25), SolverConfig())
    codes = {(0, 0): -1, (0, 1): 1, (1, 0): 0, (1, 1): -1}
    for idx, code in codes.items():
        cell = part.cell_at(idx)
        pm.entries[idx] = MapEntry(idx, cell.bounds, code, time_s=1.0)
    out = tmp_path / "map.ppm"
    emit_heatmap(pm, "results", out, scale=2)
    img = read_ppm(out)
    assert img.shape == (4, 4, 3)
    assert tuple(img[0, 0]) == RESULT_PALETTE[-1]  # blue
    assert tuple(img[0, 3]) == RESULT_PALETTE[1]  # red
    assert tuple(img[3, 0]) == RESULT_PALETTE[0]  # purple
    assert tuple(img[3, 3]) == RESULT_PALETTE[-1]  # blue


def test_heatmap_uniform_timing_is_uniform(tmp_path):
    part = build_partition(((0.0, 1.0), (0.0, 1.0)), (2, 2))
    pm = ProofMap(part, CorrectnessProperty(0.25), SolverConfig())
    for cell in part.cells():
        pm.entries[cell.index] = MapEntry(cell.index, cell.bounds, -1, time_s=3.3)
    out = tmp_path / "t.ppm"
    emit_heatmap(pm, "timing", out, scale=1)
    img = read_ppm(out)
    assert (img == img[0, 0]).all()


def test_heatmap_scale_geometry(tmp_path):
    part = build_partition(((0.0, 1.0), (0.0, 1.0)), (20, 20))
    pm = ProofMap(part, CorrectnessProperty(0.25), SolverConfig())
    for cell in part.cells():
        pm.entries[cell.index] = MapEntry(cell.index, cell.bounds, -1)
    for scale in (1, 3):
        out = tmp_path / f"s{scale}.ppm"
        emit_heatmap(pm, "results", out, scale=scale)
        assert read_ppm(out).shape == (20 * scale, 20 * scale, 3)


def test_heatmap_z_slices(tmp_path):
    part = build_partition(
        ((0.0, 1.0), (0.0, 1.0), (-0.1, 0.1)), (2, 2, 2), ("d", "theta", "z")
    )
    pm = ProofMap(part, CorrectnessProperty(0.5), SolverConfig())
    for cell in part.cells():
        code = -1 if cell.index[2] == 0 else 1
        pm.entries[cell.index] = MapEntry(cell.index, cell.bounds, code)
    a, b = tmp_path / "z0.ppm", tmp_path / "z1.ppm"
    emit_heatmap(pm, "results", a, scale=1, z_slice=0)
    emit_heatmap(pm, "results", b, scale=1, z_slice=1)
    assert (read_ppm(a) == RESULT_PALETTE[-1]).all()
    assert (read_ppm(b) == RESULT_PALETTE[1]).all()
    with pytest.raises(ValueError):
        emit_heatmap(pm, "results", tmp_path / "bad.ppm", z_slice=None)


def test_heatmap_rejects_high_dimension(tmp_path):
    part = build_partition(
        ((0.0, 1.0),) * 4, (2, 2, 2, 2), ("a", "b", "c", "e")
    )
    pm = ProofMap(part, CorrectnessProperty(0.5), SolverConfig())
    with pytest.raises(ValueError):
        emit_heatmap(pm, "results", tmp_path / "bad.ppm")
