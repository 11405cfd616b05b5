"""End-to-end tests of the CLI and the record / CSV layer."""

import json

import numpy as np
import pytest

from spinscape import cli, record as rec
from spinscape.errors import RecordError
from spinscape.network import build_network
from spinscape.optimizer import OptimizationConfig, TransferTask, maximize


def _run(argv):
    return cli.main(argv)


@pytest.fixture(scope="module")
def design_record(tmp_path_factory):
    out = tmp_path_factory.mktemp("rec") / "r5.json"
    code = _run([
        "design", "--n", "5", "--topology", "ring", "--from", "1", "--to", "3",
        "--restarts", "15", "--seed", "7", "--out", str(out),
    ])
    assert code == 0
    return str(out)


def test_design_writes_valid_record(design_record):
    record = rec.read_record(design_record)
    assert record["schema_version"] == rec.SCHEMA_VERSION
    assert record["network"] == {"n_spins": 5, "topology": "ring", "kappa": 0.0}
    assert record["task"]["m"] == 0 and record["task"]["n"] == 2
    assert len(record["controllers"]) == 15
    assert record["config"]["rng_seed"] == 7
    infids = [c["infidelity"] for c in record["controllers"]]
    assert infids == sorted(infids)
    assert all(c["sensitivity_norm"] is not None for c in record["controllers"])
    assert record["reports"]["superoptimality"] is not None
    assert record["reports"]["sensitivity"]["fd_residual"] < 1e-5


def test_record_roundtrip_identity(design_record, tmp_path):
    record = rec.read_record(design_record)
    copy_path = tmp_path / "copy.json"
    rec.write_record(str(copy_path), record)
    again = rec.read_record(str(copy_path))
    assert again == record


def test_same_seed_byte_identical_modulo_timestamp(tmp_path):
    paths = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        code = _run([
            "design", "--n", "4", "--topology", "ring", "--from", "1", "--to", "2",
            "--restarts", "5", "--seed", "3", "--out", str(out),
        ])
        assert code == 0
        paths.append(out)
    docs = []
    for p in paths:
        d = json.loads(p.read_text())
        d.pop("created_utc")
        docs.append(json.dumps(d, sort_keys=True))
    assert docs[0] == docs[1]


def test_controller_set_reconstruction(design_record):
    record = rec.read_record(design_record)
    net = rec.network_from_record(record)
    cset = rec.controller_set_from_record(record)
    assert net.n_spins == 5
    assert len(cset.controllers) == 15
    assert cset.best.infidelity == record["controllers"][0]["infidelity"]


def test_unknown_schema_major_rejected(tmp_path, design_record):
    record = rec.read_record(design_record)
    record["schema_version"] = "2.0"
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps(record))
    with pytest.raises(RecordError):
        rec.read_record(str(bad))
    assert _run(["verify", "--record", str(bad)]) == 3


def test_malformed_record_exit_code(tmp_path):
    bad = tmp_path / "broken.json"
    bad.write_text("{not json")
    assert _run(["verify", "--record", str(bad)]) == 3
    missing = tmp_path / "nope.json"
    assert _run(["verify", "--record", str(missing)]) == 3


def test_usage_errors_exit_2(tmp_path):
    with pytest.raises(SystemExit) as exc:
        _run(["design", "--n", "5"])  # missing --from/--to
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        _run(["design", "--n", "5", "--from", "9", "--to", "1", "--restarts", "1"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        _run(["verify", "--n", "3"])  # incomplete explicit controller
    assert exc.value.code == 2


def test_verify_three_chain_pst(capsys):
    code = _run([
        "verify", "--n", "3", "--topology", "chain", "--bias", "0,0,0",
        "--t", repr(float(np.pi / np.sqrt(2))), "--from", "1", "--to", "3",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "SUPEROPTIMAL" in out
    assert "sensitivity norm" in out


def test_verify_random_bias_not_superoptimal(capsys):
    code = _run([
        "verify", "--n", "5", "--topology", "ring", "--bias", "0.4,-1.2,0.9,2.2,-0.3",
        "--t", "3.0", "--from", "1", "--to", "3",
    ])
    out = capsys.readouterr().out
    assert code == 0
    assert "not superoptimal" in out


def test_verify_record_and_report_file(design_record, tmp_path, capsys):
    report_path = tmp_path / "report.json"
    code = _run(["verify", "--record", design_record, "--index", "0",
                 "--out", str(report_path)])
    assert code == 0
    report = json.loads(report_path.read_text())
    assert "superoptimality" in report and "sensitivity" in report
    assert _run(["verify", "--record", design_record, "--index", "99"]) == 3


def test_export_time_vs_infidelity(design_record, tmp_path):
    out = tmp_path / "tv.csv"
    assert _run(["export-plot", "--record", design_record,
                 "--kind", "time-vs-infidelity", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "T,log10_infidelity"
    assert len(lines) == 16
    ts = [float(l.split(",")[0]) for l in lines[1:]]
    assert ts == sorted(ts)


def test_export_histogram(design_record, tmp_path):
    out = tmp_path / "h.csv"
    assert _run(["export-plot", "--record", design_record,
                 "--kind", "infidelity-histogram", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "bin_left,count"
    counts = [int(l.split(",")[1]) for l in lines[1:]]
    assert sum(counts) == 15


def test_export_rank_vs_sensitivity(design_record, tmp_path):
    out = tmp_path / "r.csv"
    assert _run(["export-plot", "--record", design_record,
                 "--kind", "rank-vs-sensitivity", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "rank,log10_infidelity,log10_sensitivity_norm"
    ranks = [int(l.split(",")[0]) for l in lines[1:]]
    assert ranks == list(range(1, 16))
    infs = [float(l.split(",")[1]) for l in lines[1:]]
    assert infs == sorted(infs)


def test_export_fastest_table(design_record, tmp_path):
    out = tmp_path / "f.csv"
    assert _run(["export-plot", "--record", design_record,
                 "--kind", "fastest-table", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "N,target,T_fastest,infidelity"


def test_export_evolution_contains_pst_row(tmp_path):
    # Record with the known zero-bias 3-chain PST controller: the evolution
    # CSV must contain the exact row p(pi/sqrt(2)) = 1.
    from spinscape.optimizer import Controller, ControllerSet, Provenance

    net = build_network(3, "chain")
    t_pst = float(np.pi / np.sqrt(2))
    ctrl = Controller(bias=np.zeros(3), time=t_pst, fidelity=1.0, infidelity=0.0,
                      provenance=Provenance(seed=1, restart_index=0, iterations=0,
                                            converged=True))
    cset = ControllerSet(m=0, n=2, objective_kind="instantaneous", delta_t=None,
                         controllers=(ctrl,))
    cfg = OptimizationConfig(restarts=1, rng_seed=1, time_mode="fixed")
    record = rec.build_record(net, cset, cfg)
    rpath = tmp_path / "chain3.json"
    rec.write_record(str(rpath), record)
    out = tmp_path / "ev.csv"
    assert _run(["export-plot", "--record", str(rpath),
                 "--kind", "evolution", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "t,p,p_natural"
    rows = [list(map(float, l.split(","))) for l in lines[1:]]
    target = min(rows, key=lambda r: abs(r[0] - np.pi / np.sqrt(2)))
    assert target[0] == pytest.approx(np.pi / np.sqrt(2), abs=1e-12)
    assert target[1] >= 1.0 - 1e-10
    # natural evolution of the zero-bias chain is identical here (bias ~ 0)
    assert all(0.0 <= r[1] <= 1.0 for r in rows)


def test_export_unknown_kind_is_usage_error(design_record, tmp_path):
    with pytest.raises(SystemExit) as exc:
        _run(["export-plot", "--record", design_record, "--kind", "nope",
              "--out", str(tmp_path / "x.csv")])
    assert exc.value.code == 2


def test_empty_record_exports_header_only(tmp_path):
    net = build_network(3, "chain")
    task = TransferTask(m=0, n=2, t=1.0)
    cfg = OptimizationConfig(restarts=1, rng_seed=1, time_mode="fixed")
    cset = maximize(net, task, cfg)
    record = rec.build_record(net, cset, cfg)
    record["controllers"] = []
    rpath = tmp_path / "empty.json"
    rec.write_record(str(rpath), record)
    for kind in ("time-vs-infidelity", "infidelity-histogram", "rank-vs-sensitivity"):
        out = tmp_path / f"{kind}.csv"
        assert _run(["export-plot", "--record", str(rpath), "--kind", kind,
                     "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert len(lines) == 1  # header only


def test_localize_cli_smoke(tmp_path):
    out = tmp_path / "loc.json"
    code = _run(["localize", "--n", "2", "--node", "1", "--hold", "10",
                 "--restarts", "1", "--seed", "1", "--out", str(out)])
    assert code == 0
    record = rec.read_record(str(out))
    assert record["task"]["objective_kind"] == "localization"
    assert record["task"]["t_hold"] == 10.0


def test_outdir_env_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("SPINSCAPE_OUTDIR", str(tmp_path))
    code = _run(["design", "--n", "4", "--topology", "ring", "--from", "1",
                 "--to", "2", "--restarts", "2", "--seed", "1"])
    assert code == 0
    expected = tmp_path / "design-ring4-1to2-seed1.json"
    assert expected.exists()


def test_grid_design_produces_grid_record(tmp_path, capsys):
    out = tmp_path / "grid.json"
    code = _run(["design", "--n", "4", "--topology", "ring", "--from", "1", "--to", "2",
                 "--time", "fixed", "--t-grid", "1.0:0.5:2.5", "--restarts", "3",
                 "--seed", "5", "--out", str(out)])
    assert code == 0
    record = rec.read_record(str(out))
    assert [g["t"] for g in record["grid"]] == [1.0, 1.5, 2.0, 2.5]
    assert len(record["controllers"]) == 4
    csv_out = tmp_path / "grid.csv"
    assert _run(["export-plot", "--record", str(out), "--kind", "time-vs-infidelity",
                 "--out", str(csv_out)]) == 0
    lines = csv_out.read_text().splitlines()
    assert lines[0] == "T,log10_infidelity"
    assert [float(l.split(",")[0]) for l in lines[1:]] == [1.0, 1.5, 2.0, 2.5]


def test_no_threshold_solution_still_exit_zero(tmp_path, capsys):
    # A single tiny fixed-time run on a 9-ring will not reach 0.999.
    out = tmp_path / "none.json"
    code = _run(["design", "--n", "9", "--topology", "ring", "--from", "1", "--to", "2",
                 "--time", "fixed", "--t", "1.0", "--restarts", "2", "--seed", "2",
                 "--out", str(out)])
    assert code == 0
    assert "none" in capsys.readouterr().out
