import xml.etree.ElementTree as ET

import numpy as np
import pandas as pd
import pytest

from main import main
from models.networks import init_dynamics
from repository.checkpoints import load_checkpoint
from repository.datasets import load_dataset
from schemas.evaluation import REPORT_COLUMNS, EvalRecord, EvalReport
from services.trainer import sample

FAST = [
    "--set", "solver.step_size=0.25",
    "--set", "eval_solver.method=rk4",
    "--set", "eval_solver.step_size=0.25",
]


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def arch_csv(workdir):
    path = workdir / "arch.csv"
    assert main(["generate", "--dataset", "arch", "--n", "60", "--seed", "0", "--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def model(workdir, arch_csv):
    path = workdir / "arch.ckpt"
    argv = ["train", "--data", str(arch_csv), "--out", str(path), "--holdout", "0.5", "--iterations", "2", "--batch-size", "16"]
    assert main(argv + FAST) == 0
    return path


def test_generate_writes_dataset(arch_csv):
    data = load_dataset(arch_csv)
    assert data.labels == (0.0, 0.5, 1.0)
    assert data.sizes == (60, 60, 60)


def test_unknown_flag_exits_with_one(capsys):
    assert main(["generate", "--dataset", "arch", "--bogus"]) == 1
    assert "error" in capsys.readouterr().err


def test_unknown_configuration_key_exits_with_one(arch_csv, workdir):
    argv = ["train", "--data", str(arch_csv), "--out", str(workdir / "x.ckpt"), "--set", "solver.order=3"]
    assert main(argv) == 1


def test_checkpoint_records_run(model):
    checkpoint = load_checkpoint(model)
    assert checkpoint.meta.held_out == 0.5
    assert checkpoint.meta.iterations == 2
    assert checkpoint.meta.dataset == "arch"
    assert checkpoint.meta.solver.method == "rk4"
    assert checkpoint.meta.effective_config["batch_size"] == "16"


def test_evaluate_writes_report(model, arch_csv, workdir, capsys):
    report = workdir / "report.csv"
    argv = ["evaluate", "--model", str(model), "--data", str(arch_csv), "--report", str(report)]
    assert main(argv + ["--n-eval", "30", "--n-traj", "10", "--baselines", "prev,ot"]) == 0
    frame = pd.read_csv(report)
    assert list(frame.columns) == list(REPORT_COLUMNS)
    assert list(frame["method"]) == ["flow", "prev", "ot"]
    assert (frame["emd"] > 0).all()
    assert report.with_suffix(".conf").is_file()
    assert "flow" in capsys.readouterr().out


def test_boundary_holdout_exits_with_one(model, arch_csv, workdir):
    argv = ["evaluate", "--model", str(model), "--data", str(arch_csv), "--report", str(workdir / "r.csv")]
    assert main(argv + ["--holdout", "0.0"]) == 1


def test_plot_is_valid_svg(model, arch_csv, workdir):
    out = workdir / "paths.svg"
    assert main(["plot", "--model", str(model), "--data", str(arch_csv), "--out", str(out), "--trajectories", "3"]) == 0
    root = ET.parse(out).getroot()
    assert root.tag.endswith("svg")


def test_sample_after_zero_iterations_matches_fresh_network(arch_csv, workdir):
    ckpt, out = workdir / "zero.ckpt", workdir / "samples.csv"
    assert main(["train", "--data", str(arch_csv), "--out", str(ckpt), "--iterations", "0"] + FAST) == 0
    argv = ["sample", "--model", str(ckpt), "--n", "25", "--label", "1.0", "--seed", "4", "--out", str(out)]
    assert main(argv) == 0
    drawn = load_dataset(out)
    assert drawn.labels == (1.0,)
    checkpoint = load_checkpoint(ckpt)
    expected = sample(init_dynamics(2, 0), 25, 3.0, checkpoint.meta.solver, seed=4)
    np.testing.assert_array_equal(drawn.points_at(1.0), expected)


def test_trajectory_prints_csv(model, capsys):
    assert main(["trajectory", "--model", str(model), "--start", "0.1,0.2", "--times", "1,1.5,2"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "t,x0,x1"
    assert len(lines) == 4
    assert lines[1] == f"{1.0:.17g},{0.1:.17g},{0.2:.17g}"


def test_trajectory_with_wrong_start_dimension(model):
    assert main(["trajectory", "--model", str(model), "--start", "0.1,0.2,0.3", "--times", "1,2"]) == 1


def test_solver_failure_exits_with_two(arch_csv, workdir, capsys):
    ckpt = workdir / "limited.ckpt"
    argv = ["train", "--data", str(arch_csv), "--out", str(ckpt), "--iterations", "0", "--set", "eval_solver.max_steps=1"]
    assert main(argv) == 0
    assert main(["trajectory", "--model", str(ckpt), "--start", "0,0", "--times", "0,5"]) == 2
    assert "error" in capsys.readouterr().err


def test_table_runs_every_cell(mocker, workdir, capsys):
    report = EvalReport(
        records=[EvalRecord(dataset="arch", method="prev", held_out_time=0.5, seed=0, emd=1.1, mse=0.2)]
    )
    run_table = mocker.patch("routes.evaluation.run_table", return_value=report)
    out, text = workdir / "table.csv", workdir / "table.txt"
    argv = ["table", "--datasets", "arch", "--methods", "prev", "--n", "20", "--report", str(out), "--table", str(text)]
    assert main(argv) == 0
    datasets, methods, _ = run_table.call_args.args
    assert list(datasets) == ["arch"] and methods == ["prev"]
    assert "1.100" in text.read_text(encoding="utf-8")
    assert "1.100" in capsys.readouterr().out
    assert pd.read_csv(out)["emd"].tolist() == [1.1]


def test_bench_dim(capsys):
    assert main(["bench-dim", "--dims", "2,3", "--batch-size", "8", "--repeats", "1"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 3
