import math
from types import SimpleNamespace

import numpy as np
import pytest

from osgs_goal.harness import (
    CSV_FIELDS, HarnessError, ReferenceQoi, compute_reference_qoi, export_fields, least_squares_rate,
    pairwise_rates, read_records_csv, run_convergence, solve_level, write_records_csv,
)
from osgs_goal.mesh import Mesh
from osgs_goal.problem import builtin_example
from osgs_goal.vtk import read_vtk_cell_data


def test_records_and_csv_roundtrip(tmp_path):
    path = tmp_path / "ex1.csv"
    recs = run_convergence("ex1", [20, 40, 80], csv_path=path)
    assert [r.n for r in recs] == [20, 40, 80]
    assert recs[0].rate_pairwise is None and recs[1].rate_pairwise > 0
    assert all(a.h > b.h for a, b in zip(recs, recs[1:]))
    assert recs[0].ref_provenance == "analytic"
    assert path.read_text().splitlines()[0] == ",".join(CSV_FIELDS)
    assert read_records_csv(path) == recs


def test_sizes_must_increase():
    with pytest.raises(HarnessError):
        run_convergence("ex1", [40, 20])
    with pytest.raises(HarnessError):
        run_convergence("ex1", [20, 20])


def test_workers_keep_order():
    ref = ReferenceQoi(0.2, "test")
    serial = run_convergence("ex4", [8, 12, 16], reference=ref)
    threaded = run_convergence("ex4", [8, 12, 16], reference=ref, workers=3)
    assert serial == threaded


def test_failed_level_is_dropped(caplog):
    ref = ReferenceQoi(0.2, "test")
    recs = run_convergence("ex4", [7, 8], reference=ref)  # odd L-shape size is rejected
    assert [r.n for r in recs] == [8]
    assert "level aborted" in caplog.text


def test_rates():
    h = [0.1, 0.05, 0.025]
    assert pairwise_rates(h, [1.0, 0.25, 0.0625])[1:] == pytest.approx([2.0, 2.0])
    assert math.isnan(pairwise_rates(h, [1.0, 0.0, 1.0])[1])
    recs = [SimpleNamespace(h=x, err_abs=3 * x ** 1.5) for x in h]
    assert least_squares_rate(recs) == pytest.approx(1.5)


def test_reference_analytic_and_cached():
    r1 = compute_reference_qoi("ex3")
    assert r1.provenance == "analytic" and abs(r1.value - 0.0436) < 5e-4
    a = compute_reference_qoi("ex4", override_n=16)
    b = compute_reference_qoi("ex4", override_n=16)
    assert a.provenance == "fine-mesh n=16" and not a.cached
    assert b.cached and b.value == a.value
    c = compute_reference_qoi("ex4", override_n=16, use_cache=False)
    assert not c.cached and c.value == a.value


def test_export_ex2_n20(tmp_path):
    p = builtin_example("ex2")
    lvl = solve_level(p, 20, ReferenceQoi(0.0175, "published"))
    vtk, csv_path = export_fields(lvl.primal, lvl.dual, lvl.report, tmp_path / "ex2_20")
    cells = read_vtk_cell_data(vtk)
    assert set(cells) == {"eta1", "eta2", "tau"}
    assert all(v.shape == (400,) for v in cells.values())
    assert np.array_equal(cells["eta1"], lvl.report.eta1_local)
    rows = csv_path.read_text().splitlines()
    assert rows[0] == "element,x,y,eta1,eta2,tau" and len(rows) == 401
    text = vtk.read_text()
    assert "POINT_DATA 441" in text and "SCALARS z_h double 1" in text
    assert "CELL_TYPES 400" in text


def test_ex3_estimates_concentrate_in_layers(tmp_path):
    p = builtin_example("ex3")
    n = 80
    lvl = solve_level(p, n, compute_reference_qoi(p))
    centers = lvl.primal.mesh.element_coords().mean(axis=1)
    for local in (lvl.report.eta1_local, lvl.report.eta2_local):
        c = centers[np.argmax(np.abs(local))]
        assert max(c[0], c[1]) > 1 - 2.0 / n


def test_export_rejects_empty_mesh(tmp_path):
    mesh = Mesh(2, "square", 1, np.zeros((0, 2)), np.zeros((0, 4), dtype=np.int64), {})
    primal = SimpleNamespace(mesh=mesh, values=np.zeros(0))
    with pytest.raises(HarnessError):
        export_fields(primal, None, SimpleNamespace(), tmp_path / "x")


def test_export_unwritable(tmp_path):
    p = builtin_example("ex1")
    lvl = solve_level(p, 10, ReferenceQoi(1.0, "test"))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(HarnessError):
        export_fields(lvl.primal, lvl.dual, lvl.report, blocker / "sub" / "ex1_10")


def test_write_csv_nan_and_inf(tmp_path):
    recs = run_convergence("ex1", [10, 20])
    recs[0].ieff1 = math.inf
    path = write_records_csv(recs, tmp_path / "r.csv")
    back = read_records_csv(path)
    assert back[0].ieff1 == math.inf and back[1].rate_pairwise == recs[1].rate_pairwise
