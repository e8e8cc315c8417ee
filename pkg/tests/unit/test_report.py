import os

import pytest
import yaml

from iterative_binarization import constants
from iterative_binarization import exceptions as exc
from iterative_binarization.binarize import BinarizationState
from iterative_binarization.experiment import report, storage
from iterative_binarization.schema import MetricsRecord, RunSummary

# mean test error per case for a small and a big network, single seed
SMALL = {"binary": 0.023, "float": 0.015, "reverse": 0.024, "forward": 0.026}
BIG = {"binary": 0.021, "float": 0.014, "reverse": 0.018, "forward": 0.016}


def fake_run(root, case, seed, lr, test_error, val_error=0.02, status="completed", curve=None):
    directory = storage.run_dir(str(root), case, "123", seed, lr)
    os.makedirs(directory, exist_ok=True)
    completed = status == constants.RUN_STATUS_COMPLETED
    storage.write_summary(
        os.path.join(directory, constants.SUMMARY_FILENAME),
        RunSummary(
            network="net",
            case=case,
            order="123",
            seed=seed,
            lr=lr,
            digest="d",
            status=status,
            val_error=val_error if completed else None,
            test_error=test_error if completed else None,
        ),
    )
    if curve is not None:
        storage.write_metrics(
            os.path.join(directory, constants.METRICS_FILENAME),
            [
                MetricsRecord(
                    epoch=epoch,
                    train_error=0.1,
                    val_error=0.1,
                    test_error=error,
                    lr=lr,
                    state=BinarizationState.ones(3),
                )
                for epoch, error in enumerate(curve, start=1)
            ],
        )
    return directory


def make_run_dir(root, network, errors, lr_grid=(0.001,)):
    root.mkdir()
    (root / constants.EXPERIMENT_FILENAME).write_text(
        yaml.safe_dump({"network": network, "lr_grid": list(lr_grid)})
    )
    for case, error in errors.items():
        fake_run(root, case, 0, 0.001, error)
    return str(root)


def test_select_case_runs_picks_lowest_mean_val_error(tmp_path):
    runs = [
        (fake_run(tmp_path, "forward", seed, 0.001, 0.02, val_error=0.1), None)
        for seed in (0, 1)
    ]
    runs += [
        (fake_run(tmp_path, "forward", seed, 0.003, 0.04 + seed / 100, val_error=0.05), None)
        for seed in (1, 0)
    ]
    runs = [(path, storage.read_summary(os.path.join(path, "summary.yaml"))) for path, _ in runs]

    lr, selected = report.select_case_runs(runs, lr_grid=[0.001, 0.003])
    assert lr == 0.003
    assert [summary.seed for _, summary in selected] == [0, 1]
    mean, std = report.mean_std([summary.test_error for _, summary in selected])
    assert mean == pytest.approx(0.045)
    assert std == pytest.approx(0.005)


def test_select_case_runs_skips_diverged(tmp_path):
    directory = fake_run(tmp_path, "forward", 0, 0.001, 0.0, status="diverged")
    good = fake_run(tmp_path, "forward", 0, 0.003, 0.05)
    runs = [
        (path, storage.read_summary(os.path.join(path, "summary.yaml")))
        for path in (directory, good)
    ]
    lr, selected = report.select_case_runs(runs)
    assert lr == 0.003
    assert [path for path, _ in selected] == [good]


def test_mean_std_single_seed():
    assert report.mean_std([0.0192]) == (0.0192, 0.0)


def test_improvement_rounding():
    assert report.improvement(0.016, 0.014) == 0.002
    assert report.improvement(0.027, 0.017) == 0.01


def test_cmd_report_two_networks(tmp_path):
    small = make_run_dir(tmp_path / "small", "300-100-10", SMALL)
    big = make_run_dir(tmp_path / "big", "784-784-10", BIG)
    out = tmp_path / "out"

    result = report.cmd_report([small, big], output_dir=str(out))

    improvements = {row["case"]: row["improvement"] for row in result.improvements}
    assert improvements == {"binary": 0.002, "float": 0.001, "reverse": 0.006, "forward": 0.01}
    aggregate = result.get("300-100-10", "forward")
    assert aggregate.mean_test_error == 0.026
    assert aggregate.std_test_error == 0.0
    assert aggregate.n_seeds == 1

    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0] == "network,case,lr,mean_test_error,std_test_error,n_seeds"
    assert len(rows) == 9
    improvement_rows = (out / "improvement.csv").read_text().splitlines()
    assert improvement_rows[0] == "case,small,big,improvement"
    assert "binary,0.023,0.021,0.002" in improvement_rows


def test_cmd_report_missing_case_is_omitted(tmp_path, caplog):
    small = make_run_dir(tmp_path / "small", "300-100-10", SMALL)
    big = make_run_dir(tmp_path / "big", "784-784-10", {"float": BIG["float"]})
    result = report.cmd_report([small, big])

    assert [row["case"] for row in result.improvements] == ["float"]
    assert "Case 'binary' missing for the second network" in caplog.text
    assert os.path.isfile(os.path.join(small, "report.csv"))


def test_cmd_report_requested_cases(tmp_path, caplog):
    small = make_run_dir(tmp_path / "small", "300-100-10", SMALL)
    result = report.cmd_report([small], cases=["forward", "ascending"])
    assert [a.case for a in result.cases] == ["forward"]
    assert "Case 'ascending' has no runs" in caplog.text
    assert not os.path.exists(os.path.join(small, "improvement.csv"))


def test_cmd_report_learning_curves(tmp_path):
    root = tmp_path / "runs"
    root.mkdir()
    fake_run(root, "forward", 0, 0.001, 0.02, curve=[0.5, 0.3, 0.1])
    fake_run(root, "forward", 1, 0.001, 0.03, curve=[0.3, 0.1, 0.1])
    result = report.cmd_report([str(root)])

    aggregate = result.get("runs", "forward")
    assert aggregate.curve_epochs == (1, 2, 3)
    assert aggregate.curve_mean == pytest.approx((0.4, 0.2, 0.1))
    assert aggregate.curve_std == pytest.approx((0.1, 0.1, 0.0))
    lines = (root / "curves_runs_forward.csv").read_text().splitlines()
    assert lines[0] == "epoch,mean_test_error,std_test_error"
    assert len(lines) == 4


def test_cmd_report_argument_count(tmp_path):
    with pytest.raises(exc.ConfigurationError, match="one or two run directories"):
        report.cmd_report([str(tmp_path)] * 3)
    with pytest.raises(exc.ConfigurationError, match="not found"):
        report.cmd_report([str(tmp_path / "missing")])


def test_cmd_report_cases_trained_with_different_grids(tmp_path):
    root = tmp_path / "runs"
    root.mkdir()
    # the experiment file only records the grid of the last training call
    (root / constants.EXPERIMENT_FILENAME).write_text(
        yaml.safe_dump({"network": "300-100-10", "lr_grid": [0.003]})
    )
    fake_run(root, "float", 0, 0.001, 0.015)
    fake_run(root, "forward", 0, 0.003, 0.026)

    result = report.cmd_report([str(root)])

    assert [a.case for a in result.cases] == ["float", "forward"]
    assert result.get("300-100-10", "float").lr == 0.001
    assert result.get("300-100-10", "forward").lr == 0.003


def test_select_case_runs_tie_follows_grid_order(tmp_path):
    runs = [
        (path, storage.read_summary(os.path.join(path, "summary.yaml")))
        for path in (
            fake_run(tmp_path, "binary", 0, 0.001, 0.03),
            fake_run(tmp_path, "binary", 0, 0.003, 0.02),
            fake_run(tmp_path, "binary", 0, 0.0003, 0.04),
        )
    ]
    assert report.select_case_runs(runs, lr_grid=[0.003, 0.001])[0] == 0.003
    assert report.select_case_runs(runs)[0] == 0.0003
