import json

import numpy as np
import pytest

from ibsc import cli, data

SYNTH = "[synth]\nK_s = 6\nK_u = 2\nd = 5\ng = 3\ne = 6\nn_c = 10\nsigma_noise = 0.3\n"


@pytest.fixture
def synth_config(tmp_path):
    path = tmp_path / "synth.ini"
    path.write_text("[construct]\nk = 3\n[run]\nseed = 1\nthreads = 1\n" + SYNTH)
    return path


def _run(capsys, *argv):
    code = cli.main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, [json.loads(line) for line in out.splitlines()], err


def test_pipeline_writes_reports(tmp_path, capsys, synth_config):
    code, lines, _ = _run(capsys, "pipeline", "--config", synth_config, "--out", tmp_path / "o")
    assert code == 0
    assert [l["stage"] for l in lines] == ["synth", "relation", "construct", "screen", "eval", "compare"]
    report = json.loads((tmp_path / "o" / cli.COMPARE_REPORT).read_text())
    assert set(report) >= {"M1", "M2", "M3", "IBSC", "IBSC_S", "config", "seed"}
    assert (tmp_path / "o" / cli.EVAL_REPORT).exists()


def test_seed_flag_overrides_and_is_echoed(tmp_path, capsys, synth_config):
    code, lines, _ = _run(capsys, "pipeline", "--config", synth_config, "--out", tmp_path / "o", "--seed", 7)
    assert code == 0
    assert all(l["seed"] == 7 for l in lines)
    for name in (cli.EVAL_REPORT, cli.COMPARE_REPORT):
        doc = json.loads((tmp_path / "o" / name).read_text())
        assert doc["seed"] == 7 and doc["config"]["seed"] == 7


def test_stages_resume_from_disk(tmp_path, capsys, synth_config):
    assert _run(capsys, "pipeline", "--config", synth_config, "--out", tmp_path / "a")[0] == 0
    for stage in ("synth", "relation", "construct", "screen", "eval", "compare"):
        assert _run(capsys, stage, "--config", synth_config, "--out", tmp_path / "b")[0] == 0
    for name in (cli.RELATION_R, cli.CONSTRUCTED, cli.CONSTRUCTED_PROV, cli.SCREENED, cli.EVAL_REPORT,
                 cli.COMPARE_REPORT):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_relation_twice_identical(tmp_path, capsys, synth_config):
    out = tmp_path / "o"
    _run(capsys, "synth", "--config", synth_config, "--out", out)
    _run(capsys, "relation", "--config", synth_config, "--out", out, "--threads", 1)
    first = (out / cli.RELATION_R).read_bytes()
    code, lines, _ = _run(capsys, "relation", "--config", synth_config, "--out", out, "--threads", 3)
    assert code == 0 and (out / cli.RELATION_R).read_bytes() == first
    assert 0.0 <= lines[0]["f1_vs_ground_truth"] <= 1.0


def test_flags_reach_stages(tmp_path, capsys, synth_config):
    out = tmp_path / "o"
    _run(capsys, "synth", "--config", synth_config, "--out", out)
    _run(capsys, "relation", "--config", synth_config, "--out", out)
    _run(capsys, "construct", "--config", synth_config, "--out", out, "--k", 2)
    header = (out / cli.PLAN).read_text().splitlines()[0]
    assert header == "unseen_id,S1,S2,cost,hamming"
    code, lines, _ = _run(capsys, "screen", "--config", synth_config, "--out", out, "--keep-fraction", 0.2)
    assert code == 0 and lines[0]["kept"] == 2 * 2
    code, _, _ = _run(capsys, "eval", "--config", synth_config, "--out", out, "--classifier", "nearest_centroid")
    assert json.loads((out / cli.EVAL_REPORT).read_text())["config"]["classifier"] == "nearest_centroid"


def test_missing_features_path_exit_1(tmp_path, capsys):
    cfg = tmp_path / "c.ini"
    cfg.write_text("[paths]\nfeatures = missing.csv\n")
    code, _, err = _run(capsys, "relation", "--config", cfg, "--out", tmp_path / "o")
    assert code == 1
    lines = err.strip().splitlines()
    doc = json.loads(lines[-1])
    assert doc["exit"] == 1 and str(tmp_path / "missing.csv") in doc["message"]


@pytest.mark.parametrize("argv", [["frobnicate"], ["relation", "--k", "zero"], ["eval", "--keep-fraction", "2"]])
def test_bad_arguments_exit_1(tmp_path, capsys, argv):
    code, _, err = _run(capsys, *argv, "--out", tmp_path / "o")
    assert code == 1
    assert json.loads(err.strip().splitlines()[-1])["exit"] == 1


def test_degenerate_attributes_exit_2(tmp_path, capsys, synth_config):
    out = tmp_path / "o"
    _run(capsys, "synth", "--config", synth_config, "--out", out)
    _run(capsys, "relation", "--config", synth_config, "--out", out)
    attrs = data.load_attribute_table(out / cli.ATTR_CONT, out / cli.ATTR_BIN)
    flat = data.AttributeTable(np.full(attrs.continuous.shape, 0.5), attrs.binary, attrs.class_names)
    data.write_attribute_table(flat, out / cli.ATTR_CONT, out / cli.ATTR_BIN)
    code, _, err = _run(capsys, "construct", "--config", synth_config, "--out", out)
    assert code == 2
    assert json.loads(err.strip().splitlines()[-1])["error"] == "DegenerateError"
