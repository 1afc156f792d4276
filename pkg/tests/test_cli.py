import json
import subprocess
import sys
import threading
from pathlib import Path

import pytest

from bellhat import modelio
from bellhat.cli import default_checkpoints, main
from bellhat.errors import ValidationError
from bellhat.fixtures import fixture_path
from bellhat.harness import worker_run
from bellhat.nosignalling import local_model, pr_box


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


class TestModelIO:
    def test_round_trip(self):
        box = pr_box()
        doc = modelio.model_to_json(box)
        assert modelio.model_from_json(doc) == box

    def test_fixture_files_load(self):
        for name in ("pr-box", "signalling", "local-mix", "echo"):
            model = modelio.load_model(fixture_path(name))
            assert model.scenario.parties == ("p0", "p1")

    @pytest.mark.parametrize("mutate", [
        lambda d: d.pop("scenario"),
        lambda d: d["table"].pop(),
        lambda d: d["table"].append(d["table"][0]),
        lambda d: d["table"][0]["dist"][0].update(p=0.7),
        lambda d: d["table"][0].pop("input"),
    ])
    def test_schema_violations(self, mutate):
        doc = modelio.model_to_json(pr_box())
        mutate(doc)
        with pytest.raises(ValidationError):
            modelio.model_from_json(doc)

    def test_certificate_round_trip(self):
        from bellhat.nosignalling import is_local
        model = modelio.load_model(fixture_path("local-mix"))
        verdict = is_local(model)
        doc = verdict.to_json()
        mu = modelio.certificate_from_json(doc["certificate"], model.scenario)
        assert local_model(mu, model.scenario) is not None


class TestCheckCommands:
    def test_check_ns_pass(self, capsys):
        code, out, _ = run_cli(capsys, "check-ns", "--model",
                               str(fixture_path("pr-box")))
        assert code == 0
        assert json.loads(out)["passed"] is True

    def test_check_ns_fail_with_witness(self, capsys):
        code, out, _ = run_cli(capsys, "check-ns", "--model",
                               str(fixture_path("signalling")))
        assert code == 1
        doc = json.loads(out)
        assert doc["passed"] is False and doc["witness"] is not None

    def test_check_ns_fast_flag(self, capsys):
        code, out, _ = run_cli(capsys, "check-ns", "--fast", "--model", "pr-box")
        assert code == 0

    def test_check_ns_malformed_file(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json", encoding="utf-8")
        code, _, err = run_cli(capsys, "check-ns", "--model", str(bad))
        assert code == 2 and "error" in err

    def test_check_local_pass_with_certificate(self, capsys):
        code, out, _ = run_cli(capsys, "check-local", "--model", "local-mix")
        assert code == 0
        doc = json.loads(out)
        assert doc["passed"] and doc["certificate"]["support"]

    def test_check_local_pr_box_fails(self, capsys):
        code, out, _ = run_cli(capsys, "check-local", "--model", "pr-box")
        assert code == 1

    def test_check_local_oversize(self, tmp_path, capsys):
        from bellhat.core import BellScenario
        from bellhat.generators import uniform_product_model
        big = BellScenario(parties=("p0", "p1"), inputs=(0, 1, 2, 3),
                           outcomes=(0, 1, 2))
        path = tmp_path / "big.json"
        modelio.save_model(uniform_product_model(big), path)
        code, _, err = run_cli(capsys, "check-local", "--model", str(path))
        assert code == 2


class TestSimulate:
    def test_stdout_summary(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--strategy", "g",
                               "--input", "evzero:100", "--players", "10000",
                               "--trials", "3", "--seed", "9")
        assert code == 0
        doc = json.loads(out)
        assert doc["aggregate"]["max_last_loss"] < 100
        assert all(t["last_loss"] is None or t["last_loss"] < 100
                   for t in doc["trials"])

    def test_output_files_and_determinism(self, tmp_path, capsys):
        args = ("simulate", "--strategy", "e", "--input", "evzero:10",
                "--players", "500", "--trials", "5", "--seed", "3",
                "--checkpoints", "1,250,500")
        out1 = tmp_path / "a"
        out2 = tmp_path / "b"
        assert run_cli(capsys, *args, "--out", str(out1))[0] == 0
        assert run_cli(capsys, *args, "--out", str(out2))[0] == 0
        for name in ("summary.json", "trajectories.csv"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
        rows = (out1 / "trajectories.csv").read_text().strip().splitlines()
        assert rows[0] == "trial,k,S_k,W_k"
        assert len(rows) == 1 + 5 * 3

    def test_overwrite_requires_force(self, tmp_path, capsys):
        args = ("simulate", "--strategy", "g", "--input", "uniform",
                "--players", "10", "--out", str(tmp_path))
        assert run_cli(capsys, *args)[0] == 0
        assert run_cli(capsys, *args)[0] == 2
        assert run_cli(capsys, *args, "--force")[0] == 0

    def test_latent_index_in_summary(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--strategy", "d",
                               "--input", "uniform", "--players", "10",
                               "--trials", "4", "--seed", "1")
        doc = json.loads(out)
        assert all(t["latent_index"] in (0, 1) for t in doc["trials"])

    def test_bad_flags(self, capsys):
        assert run_cli(capsys, "simulate", "--strategy", "nope",
                       "--players", "5")[0] == 2
        assert run_cli(capsys, "simulate", "--strategy", "g",
                       "--input", "evzero:50", "--players", "10")[0] == 2


class TestVerifyAzuma:
    def test_report(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "verify-azuma", "--strategy", "const:0",
                               "--players", "1000", "--trials", "200",
                               "--delta", "0.05", "--seed", "2",
                               "--out", str(tmp_path))
        assert code == 0
        doc = json.loads(out)
        assert doc["passed"] is True
        saved = json.loads((tmp_path / "azuma.json").read_text())
        assert len(saved["abs_s_values"]) == 200


class TestOracle:
    def test_majority_three_players(self, capsys):
        code, out, _ = run_cli(capsys, "oracle", "--strategy", "majority",
                               "--players", "3")
        assert code == 0
        doc = json.loads(out)
        assert (doc["expected_wins_num"], doc["expected_wins_den"]) == (3, 2)
        assert doc["expected_ratio"] == 0.5

    def test_const0_single_player(self, capsys):
        code, out, _ = run_cli(capsys, "oracle", "--strategy", "const:0",
                               "--players", "1")
        doc = json.loads(out)
        assert (doc["expected_wins_num"], doc["expected_wins_den"]) == (1, 2)

    def test_probabilistic_rejected(self, capsys):
        code, _, err = run_cli(capsys, "oracle", "--strategy", "d",
                               "--players", "3")
        assert code == 2 and "probabilistic" in err


class TestReport:
    def test_renders_figures(self, tmp_path, capsys):
        assert run_cli(capsys, "simulate", "--strategy", "const:0",
                       "--input", "uniform", "--players", "200",
                       "--trials", "20", "--seed", "4",
                       "--out", str(tmp_path))[0] == 0
        assert run_cli(capsys, "verify-azuma", "--strategy", "const:0",
                       "--players", "200", "--trials", "50",
                       "--seed", "4", "--out", str(tmp_path))[0] == 0
        code, out, _ = run_cli(capsys, "report", "--dir", str(tmp_path))
        assert code == 0
        written = [Path(line) for line in out.strip().splitlines()]
        names = {p.name for p in written}
        assert {"trajectories.png", "win_ratios.png",
                "last_losses.png", "azuma.png"} <= names
        for p in written:
            assert p.stat().st_size > 1000

    def test_empty_dir(self, tmp_path, capsys):
        assert run_cli(capsys, "report", "--dir", str(tmp_path))[0] == 2


class TestRefereeWorkerCli:
    def test_subprocess_referee_and_worker(self):
        referee = subprocess.Popen(
            [sys.executable, "-m", "bellhat", "referee", "--players", "16",
             "--seed", "5", "--port", "0"],
            stdout=subprocess.PIPE, text=True)
        listening = json.loads(referee.stdout.readline())
        assert listening["type"] == "listening"
        worker = subprocess.run(
            [sys.executable, "-m", "bellhat", "worker",
             "--connect", f"127.0.0.1:{listening['port']}",
             "--strategy", "majority"],
            timeout=30)
        assert worker.returncode == 0
        assert referee.wait(timeout=30) == 0
        summary = json.loads(referee.stdout.read())
        from bellhat.hatgame import run_game
        expected = run_game("majority", "uniform", n=16, seed=5)
        assert summary["S_n"] == expected.s_sum
        assert summary["W_n"] == expected.win_ratio

    def test_worker_connect_refused(self, capsys):
        code, _, err = run_cli(capsys, "worker", "--connect",
                               "127.0.0.1:1", "--strategy", "g")
        assert code == 1 and "worker error" in err


def test_default_checkpoints():
    assert default_checkpoints(1) == [1]
    assert default_checkpoints(10) == [1, 2, 4, 8, 10]
    assert default_checkpoints(16) == [1, 2, 4, 8, 16]
