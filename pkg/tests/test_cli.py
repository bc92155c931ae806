import json

import numpy as np
import pytest

from fheact.cli import main
from fheact.weights import save_tensor_csv


@pytest.fixture(scope="module")
def weight_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli_weights")
    assert main(["gen-fixtures", "--network", "lenet5", "--seed", "42", "--out", str(out)]) == 0
    return out


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


class TestGenFixtures:
    def test_deterministic(self, tmp_path, capsys):
        rc1 = main(["gen-fixtures", "--network", "lenet5", "--seed", "7", "--out", str(tmp_path / "a")])
        m1 = json.loads(capsys.readouterr().out)
        rc2 = main(["gen-fixtures", "--network", "lenet5", "--seed", "7", "--out", str(tmp_path / "b")])
        m2 = json.loads(capsys.readouterr().out)
        assert rc1 == rc2 == 0
        assert [f["sha256"] for f in m1["files"]] == [f["sha256"] for f in m2["files"]]

    def test_requires_out(self):
        assert main(["gen-fixtures", "--network", "lenet5"]) == 2


class TestPlan:
    def test_lenet_approx_four_sites(self, tmp_path):
        out = tmp_path / "plan.json"
        rc = main(
            ["plan", "--network", "lenet5", "--activation", "approx",
             "--beta", "1.5", "--degree", "50", "--out", str(out)]
        )
        assert rc == 0
        plan = read_json(out)["plan"]
        assert len(plan["insert_before"]) == 4
        assert plan["bootstrap_count"] == 4

    def test_square_zero_sites(self, tmp_path):
        out = tmp_path / "plan.json"
        assert main(["plan", "--network", "lenet5", "--activation", "square", "--out", str(out)]) == 0
        assert read_json(out)["plan"]["bootstrap_count"] == 0

    def test_unknown_network(self):
        assert main(["plan", "--network", "alexnet"]) == 2

    def test_unknown_activation(self):
        assert main(["plan", "--network", "lenet5", "--activation", "gelu"]) == 2

    def test_resnet_square_rejected(self):
        assert main(["plan", "--network", "resnet20", "--activation", "square"]) == 3


class TestInfer:
    def test_random_inputs_report(self, weight_dir, tmp_path):
        out = tmp_path / "report.json"
        rc = main(
            ["infer", "--network", "lenet5", "--activation", "square",
             "--weights", str(weight_dir), "--samples", "3", "--seed", "1",
             "--out", str(out)]
        )
        assert rc == 0
        report = read_json(out)
        assert report["schema_version"] == 1
        assert len(report["records"]) == 3
        assert all(r["bootstraps"] == 0 for r in report["records"])

    def test_deterministic_modulo_timestamp(self, weight_dir, tmp_path):
        args = [
            "infer", "--network", "lenet5", "--activation", "square",
            "--weights", str(weight_dir), "--samples", "2", "--seed", "5",
        ]
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        assert main(args + ["--out", str(a)]) == 0
        assert main(args + ["--out", str(b)]) == 0
        ra, rb = read_json(a), read_json(b)
        ra.pop("timestamp"), rb.pop("timestamp")
        assert ra == rb

    def test_jobs_parallelism_preserves_order(self, weight_dir, tmp_path):
        base = [
            "infer", "--network", "lenet5", "--activation", "square",
            "--weights", str(weight_dir), "--samples", "4", "--seed", "5",
        ]
        a, b = tmp_path / "serial.json", tmp_path / "parallel.json"
        assert main(base + ["--jobs", "1", "--out", str(a)]) == 0
        assert main(base + ["--jobs", "4", "--out", str(b)]) == 0
        assert read_json(a)["records"] == read_json(b)["records"]

    def test_missing_weights_flag(self):
        assert main(["infer", "--network", "lenet5"]) == 2

    def test_bad_weight_dir(self, tmp_path):
        rc = main(
            ["infer", "--network", "lenet5", "--weights", str(tmp_path / "nope")]
        )
        assert rc == 3

    def test_csv_image_input(self, weight_dir, tmp_path):
        img = np.random.default_rng(0).uniform(-1, 1, (1, 28, 28))
        save_tensor_csv(tmp_path / "img.csv", img)
        out = tmp_path / "r.json"
        rc = main(
            ["infer", "--network", "lenet5", "--activation", "switch",
             "--weights", str(weight_dir), "--inputs", str(tmp_path / "img.csv"),
             "--out", str(out)]
        )
        assert rc == 0
        assert len(read_json(out)["records"]) == 1


class TestCompare:
    def test_square_vs_switch_cost_ordering(self, weight_dir, tmp_path):
        out = tmp_path / "cmp.json"
        rc = main(
            ["compare", "--network", "lenet5", "--activation", "square,switch",
             "--weights", str(weight_dir), "--samples", "1", "--seed", "3",
             "--out", str(out)]
        )
        assert rc == 0
        rows = {r["variant"]: r for r in read_json(out)["comparison"]}
        assert rows["switch"]["cost_units"] > rows["square"]["cost_units"]


class TestApproxAnalyze:
    def test_ten_row_csv(self, tmp_path):
        out = tmp_path / "sweep.csv"
        assert main(["approx-analyze", "--degree-range", "10..100", "--out", str(out)]) == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "degree,max_error,depth_cost"
        assert len(lines) == 11
        errs = [float(ln.split(",")[1]) for ln in lines[1:]]
        assert errs == sorted(errs, reverse=True)

    def test_explicit_degree_list(self, capsys):
        assert main(["approx-analyze", "--degree-range", "10,50"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert len(lines) == 3


class TestConfigFile:
    def test_config_supplies_flags(self, weight_dir, tmp_path):
        cfg = {
            "network": "lenet5",
            "activation": "square",
            "weights": str(weight_dir),
            "samples": 2,
            "seed": 1,
        }
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps(cfg))
        out = tmp_path / "r.json"
        assert main(["infer", "--config", str(cfg_path), "--out", str(out)]) == 0
        assert len(read_json(out)["records"]) == 2

    def test_flags_override_config(self, weight_dir, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"network": "lenet5", "samples": 5}))
        out = tmp_path / "r.json"
        rc = main(
            ["infer", "--config", str(cfg_path), "--weights", str(weight_dir),
             "--samples", "1", "--seed", "0", "--out", str(out)]
        )
        assert rc == 0
        assert len(read_json(out)["records"]) == 1

    def test_unknown_config_key(self, tmp_path):
        cfg_path = tmp_path / "run.json"
        cfg_path.write_text(json.dumps({"networc": "lenet5"}))
        assert main(["plan", "--config", str(cfg_path)]) == 2


class TestUsage:
    def test_no_subcommand(self):
        assert main([]) == 2

    def test_missing_network(self):
        assert main(["plan"]) == 2
