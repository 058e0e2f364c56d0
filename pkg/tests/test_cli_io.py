import json

import numpy as np
import pytest

from oracles import random_instance
from rumtest import io
from rumtest.cli import EXIT_INPUT, EXIT_OK, EXIT_PARTIAL, main
from rumtest.errors import InputError
from rumtest.synthetic import bundles_from_counts, null_counts


@pytest.fixture
def files(tmp_path):
    rng = np.random.default_rng(0)
    ps = random_instance(rng, 4, 3)
    counts, _ = null_counts(ps, rng, per_period=30)
    paths = {k: tmp_path / f"{k}.csv" for k in ("prices", "choices", "counts")}
    io.write_prices(paths["prices"], ps.prices)
    io.write_choices(paths["choices"], bundles_from_counts(ps, counts, rng))
    io.write_patch_counts(paths["counts"], counts)
    return ps, counts, paths, tmp_path


def test_csv_round_trip(files):
    ps, counts, paths, _ = files
    labels, prices = io.read_prices(paths["prices"])
    assert labels == [1, 2, 3, 4] and np.array_equal(prices, ps.prices)
    d1 = io.load_dataset(paths["prices"], choices_path=paths["choices"])
    d2 = io.load_dataset(paths["prices"], counts_path=paths["counts"])
    assert d1.N_t.tolist() == d2.N_t.tolist() == [int(c.sum()) for c in counts]
    with pytest.raises(InputError):
        io.load_dataset(paths["prices"])


@pytest.mark.parametrize(
    "text",
    ["", "t,p1\n1,2\n", "period,p2\n1,2\n", "period,p1\n1,x\n", "period,p1\n1,2\n1,3\n", "period,p1,p2\n1,2\n"],
)
def test_bad_price_files(tmp_path, text):
    path = tmp_path / "p.csv"
    path.write_text(text)
    with pytest.raises(InputError):
        io.read_prices(path)


def test_run_outputs_and_determinism(files, capsys):
    _, _, paths, tmp = files
    args = ["run", "--prices", str(paths["prices"]), "--choices", str(paths["choices"]),
            "--bootstrap", "20", "--seed", "5"]
    outs = []
    for k in range(2):
        out = tmp / f"report{k}.json"
        assert main(args + ["--out", str(out)]) == EXIT_OK
        d = json.loads(out.read_text())
        d.pop("timing")
        outs.append(json.dumps(d, sort_keys=True))
    assert outs[0] == outs[1]
    assert main(args + ["--table"]) == EXIT_OK
    assert "Jstat" in capsys.readouterr().out


def test_run_with_counts_and_trace(files):
    _, _, paths, tmp = files
    trace = tmp / "trace.jsonl"
    code = main(["run", "--prices", str(paths["prices"]), "--patch-counts", str(paths["counts"]),
                 "--bootstrap", "5", "--mode", "exact", "--trace", str(trace),
                 "--out", str(tmp / "r.json")])
    assert code == EXIT_OK
    events = [json.loads(line) for line in trace.read_text().splitlines()]
    kinds = {e["event"] for e in events}
    assert {"master", "pricing", "replication"} <= kinds


def test_partial_exit_code(files):
    _, _, paths, tmp = files
    code = main(["run", "--prices", str(paths["prices"]), "--choices", str(paths["choices"]),
                 "--time-limit", "0", "--out", str(tmp / "r.json")])
    assert code == EXIT_PARTIAL
    assert json.loads((tmp / "r.json").read_text())["partial"] is True


def test_input_error_exit_code(files, tmp_path, capsys):
    _, _, paths, _ = files
    bad = tmp_path / "bad.csv"
    bad.write_text("period,q1\n1,1\n")
    assert main(["run", "--prices", str(paths["prices"]), "--choices", str(bad)]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err
    assert main(["run", "--prices", str(tmp_path / "missing.csv"), "--choices", str(bad)]) == EXIT_INPUT


def test_boundary_bundle_exit_code(tmp_path):
    io.write_prices(tmp_path / "p.csv", np.array([[1.0, 2.0], [2.0, 1.0]]))
    io.write_choices(tmp_path / "c.csv", [np.array([[1.0, 1.0]]), np.array([[1.0, 0.0]])])
    args = ["run", "--prices", str(tmp_path / "p.csv"), "--choices", str(tmp_path / "c.csv"), "--bootstrap", "2"]
    assert main(args) == EXIT_INPUT
    assert main(args + ["--tie-policy", "perturb", "--out", str(tmp_path / "r.json")]) == EXIT_OK


def test_patches_and_enumerate(tmp_path, capsys):
    io.write_prices(tmp_path / "p.csv", np.array([[1.0, 2.0], [2.0, 1.0]]))
    assert main(["patches", "--prices", str(tmp_path / "p.csv"), "--out", str(tmp_path / "x.json")]) == EXIT_OK
    fixture = json.loads((tmp_path / "x.json").read_text())
    assert [len(p["signs"]) for p in fixture["patches"]] == [2, 2]
    capsys.readouterr()
    assert main(["enumerate", "--patches", str(tmp_path / "x.json")]) == EXIT_OK
    assert json.loads(capsys.readouterr().out) == [[0, 1], [1, 0], [1, 1]]
    assert main(["enumerate", "--patches", str(tmp_path / "x.json"), "--out", str(tmp_path / "t.json")]) == EXIT_OK
    assert io.load_types(tmp_path / "t.json") == [(0, 1), (1, 0), (1, 1)]
    assert main(["enumerate", "--patches", str(tmp_path / "x.json"), "--limit", "3"]) == EXIT_INPUT


def test_bad_patch_fixture(tmp_path):
    (tmp_path / "x.json").write_text("{}")
    assert main(["enumerate", "--patches", str(tmp_path / "x.json")]) == EXIT_INPUT


def test_bad_tau_rejected(files):
    _, _, paths, _ = files
    with pytest.raises(SystemExit):
        main(["run", "--prices", str(paths["prices"]), "--choices", str(paths["choices"]), "--tau", "-1"])
