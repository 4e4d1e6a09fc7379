import csv
import json

import numpy as np
import pytest

from atn_evm.cli import main
from atn_evm.evm import EVM_OFF, PARAM_KEYS
from atn_evm.io import data_path, read_dataset, write_dataset
from atn_evm.scenario import EnvVector
from atn_evm.tuner import DatasetRow

TWO = str(data_path("two_station.json"))
CALL = str(data_path("calling_only.json"))
OFF_JSON = str(data_path("evm_off.json"))


def run(*argv):
    return main([str(a) for a in argv])


def clustered_dataset(path, k=3, per=8, seed=0):
    """Valid environment vectors in k obvious groups, each with its own parameter set."""
    rng = np.random.default_rng(seed)
    rows = []
    for i in range(k * per):
        c = i % k
        onehot = [0, 0, 0, 0]
        onehot[c % 4] = 1
        probes = [10.0 * (c + 1) + rng.uniform(0, 1) for _ in range(4)]
        env = EnvVector(5 + 5 * c, 8.0 + c, sum(probes) + 20.0, probes, onehot)
        params = np.full(18, 1.0 + 3 * c) + rng.uniform(0, 0.05, 18)
        for j, key in enumerate(PARAM_KEYS):
            if key[2:] in ("t_q", "t_eb", "t_ev"):
                params[j] = float(c)
        rows.append(DatasetRow(i, env.to_vector(), [float(x) for x in params], 10.0, 20.0))
    write_dataset(path, rows)
    return rows


# -- simulate -----------------------------------------------------------------------------

def test_simulate_writes_all_metrics(tmp_path):
    out = tmp_path / "m.json"
    assert run("simulate", TWO, CALL, "--out", out, "--quiet") == 0
    m = json.loads(out.read_text())
    assert set(m) >= {"full_trips", "empty_trips", "throughput", "mean_wait", "p90_wait", "empty_distance",
                      "full_distance", "served_groups", "residual_queue"}
    assert m["full_trips"] == 5


def test_simulate_ridership_mode(tmp_path):
    out = tmp_path / "m.json"
    assert run("simulate", TWO, CALL, "--mode", "ridership", "--out", out) == 0
    assert json.loads(out.read_text())["throughput"] == 180.0


def test_simulate_to_stdout_and_event_log(tmp_path, capsys):
    events = tmp_path / "ev.tsv"
    assert run("simulate", TWO, OFF_JSON, "--events", events, "--quiet") == 0
    assert json.loads(capsys.readouterr().out)["full_trips"] == 1
    lines = events.read_text().splitlines()
    assert lines and all(len(line.split("\t")) == 5 for line in lines)


def test_simulate_bad_od_row_names_station(tmp_path, capsys):
    sc = json.loads(open(TWO).read())
    sc["network"] = json.loads(open(data_path(sc["network"])).read()) if isinstance(sc["network"], str) else sc["network"]
    sc["demand"]["od_matrix"][0] = [0.0, 0.6]
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(sc, indent=2))
    assert run("simulate", path, CALL) == 2
    err = capsys.readouterr().err
    assert "A" in err and "od_matrix" in err
    assert f"{path}:" in err


def test_simulate_bad_params_has_line_number(tmp_path, capsys):
    d = EVM_OFF.to_dict()
    d["c_f_q"] = -1.0
    path = tmp_path / "p.json"
    path.write_text(json.dumps({k: (v if v != float("inf") else 1e308) for k, v in d.items()}, indent=2))
    assert run("simulate", TWO, path) == 2
    assert f"{path}:2:" in capsys.readouterr().err


def test_simulate_missing_file(tmp_path):
    assert run("simulate", tmp_path / "nope.json", CALL) == 2


# -- tune -------------------------------------------------------------------------------

def _one_env_batch(tmp_path, horizon=900.0):
    batch = json.loads(open(data_path("reference_batch.json")).read())
    batch["network"] = str(data_path("reference_network.json"))
    batch["od_library"] = str(data_path("od_library.json"))
    batch["sim"]["horizon"] = horizon
    batch["sim"]["warmup"] = 90.0
    path = tmp_path / "batch.json"
    path.write_text(json.dumps(batch))
    return path


def test_tune_budget_one_gives_baseline(tmp_path):
    out = tmp_path / "d.csv"
    assert run("tune", _one_env_batch(tmp_path), "--budget", 1, "--out", out, "--quiet") == 0
    rows = read_dataset(out)
    assert len(rows) == 1
    assert rows[0].params == EVM_OFF.to_vector()
    assert rows[0].objective == rows[0].baseline


def test_tune_is_repeatable(tmp_path):
    batch = _one_env_batch(tmp_path)
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for out in (a, b):
        assert run("tune", batch, "--budget", 6, "--rounds", 2, "--replications", 1, "--seed", 5,
                   "--out", out, "--quiet") == 0
    assert a.read_bytes() == b.read_bytes()


def test_tune_missing_bounds(tmp_path):
    assert run("tune", _one_env_batch(tmp_path), "--bounds", tmp_path / "missing.json",
               "--out", tmp_path / "d.csv") == 2


def test_tune_progress_goes_to_stderr(tmp_path, capsys):
    assert run("tune", _one_env_batch(tmp_path), "--budget", 1, "--out", tmp_path / "d.csv") == 0
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "scenario 0" in captured.err


# -- train / predict / evaluate ----------------------------------------------------------

@pytest.fixture
def trained(tmp_path, capsys):
    data = tmp_path / "data.csv"
    rows = clustered_dataset(data)
    model = tmp_path / "model.json"
    test = tmp_path / "test.csv"
    assert run("train", data, "--k", 3, "--epochs", 200, "--seed", 1, "--out", model, "--test-out", test,
               "--quiet") == 0
    report = json.loads(capsys.readouterr().out)
    return rows, data, model, test, report


def test_train_report_and_repeatability(trained, tmp_path, capsys):
    rows, data, model, _, report = trained
    assert 0.0 <= report["accuracy"] <= 1.0
    again = tmp_path / "again.json"
    assert run("train", data, "--k", 3, "--epochs", 200, "--seed", 1, "--out", again, "--quiet") == 0
    assert again.read_bytes() == model.read_bytes()


def test_train_too_few_rows(tmp_path, capsys):
    data = tmp_path / "small.csv"
    clustered_dataset(data, k=2, per=2)
    assert run("train", data, "--k", 10, "--out", tmp_path / "m.json") == 2
    assert "TooFewRows" in capsys.readouterr().err


def test_train_wrong_header(tmp_path):
    data = tmp_path / "bad.csv"
    data.write_text("a,b,c\n1,2,3\n")
    assert run("train", data, "--out", tmp_path / "m.json") == 2


def test_predict_matches_cluster_centroid(trained, tmp_path):
    rows, _, model_path, *_ = trained
    from atn_evm.cli import load_model
    model = load_model(model_path)
    env = EnvVector.from_vector(rows[0].env)
    env_path, out = tmp_path / "env.json", tmp_path / "p.json"
    env_path.write_text(json.dumps(env.to_dict()))
    assert run("predict", model_path, env_path, "--out", out) == 0
    cluster = int(model.classify([rows[0].env])[0])
    assert json.loads(out.read_text()) == json.loads(json.dumps(model.centroid_params(cluster).to_dict()))
    # the predicted parameters drive a simulation without complaint
    assert run("simulate", TWO, out, "--quiet", "--out", tmp_path / "m.json") == 0


def test_predict_rejects_two_hot_env(trained, tmp_path, capsys):
    rows, _, model_path, *_ = trained
    d = EnvVector.from_vector(rows[0].env).to_dict()
    d["od_structure"] = [1, 1, 0, 0]
    env_path = tmp_path / "env.json"
    env_path.write_text(json.dumps(d, indent=2))
    assert run("predict", model_path, env_path) == 2
    assert "one-hot" in capsys.readouterr().err


def _read_curve(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_evaluate_noise_free(trained, tmp_path, capsys):
    _, _, model, test, report = trained
    out = tmp_path / "curve.csv"
    assert run("evaluate", model, test, "--sigmas", "0", "--trials", 7, "--out", out) == 0
    rows = _read_curve(out)
    assert list(rows[0]) == ["cluster", "sigma", "success_rate", "trials"]
    for r in rows:
        assert float(r["success_rate"]) == report["per_cluster"][r["cluster"]]
        assert r["trials"] == "7"


def test_evaluate_rates_are_proportions(trained, tmp_path):
    _, _, model, test, _ = trained
    out = tmp_path / "curve.csv"
    assert run("evaluate", model, test, "--sigmas", "0,0.5,2", "--trials", 20, "--out", out, "--seed", 3) == 0
    rows = _read_curve(out)
    assert len(rows) == 3 * len({r["cluster"] for r in rows})
    assert all(0.0 <= float(r["success_rate"]) <= 1.0 for r in rows)
    assert {r["trials"] for r in rows} == {"20"}


# -- finetune / misc ---------------------------------------------------------------------

def test_finetune(tmp_path):
    out = tmp_path / "tuned.json"
    assert run("finetune", TWO, OFF_JSON, "--iterations", 0, "--out", out, "--quiet") == 0
    assert json.loads(out.read_text()) == json.loads(open(OFF_JSON).read())
    assert run("finetune", TWO, CALL, "--iterations", 3, "--replications", 1, "--out", out, "--quiet") == 0


def test_manifest_lists_outputs(tmp_path):
    out, man = tmp_path / "m.json", tmp_path / "manifest.json"
    assert run("simulate", TWO, CALL, "--out", out, "--manifest", man, "--seed", 9, "--quiet") == 0
    m = json.loads(man.read_text())
    assert m["command"] == "simulate" and m["seed"] == 9 and m["outputs"] == [str(out)]
    assert "duration_s" in m and "version" in m
