import pytest

from iterative_binarization import exceptions as exc
from iterative_binarization import schedule
from iterative_binarization import sensitivity
from iterative_binarization.engine import Network
from iterative_binarization.schema import (
    DenseSpec,
    ExperimentConfig,
    NetworkSpec,
    ProbeResult,
    SensitivityReport,
    TrainPlan,
)


def probes(*errors):
    return [ProbeResult(layer=i + 1, val_error=e) for i, e in enumerate(errors)]


def test_build_report_orders():
    report = sensitivity.build_report(probes(0.03, 0.01, 0.02), network="300-100-10")
    assert report.ascending_order == (2, 3, 1)
    assert report.descending_order == (1, 3, 2)


def test_build_report_ties_go_to_lower_layer():
    report = sensitivity.build_report(probes(0.02, 0.02, 0.02, 0.02))
    assert report.ascending_order == (1, 2, 3, 4)
    assert report.descending_order == (4, 3, 2, 1)


def test_failed_probe_ranks_last():
    results = probes(0.03, 0.01)
    results.append(ProbeResult(layer=3, val_error=1.0, failed=True))
    assert sensitivity.build_report(results).ascending_order == (2, 1, 3)


def test_build_report_missing_probe():
    results = [ProbeResult(layer=1, val_error=0.1), ProbeResult(layer=3, val_error=0.2)]
    with pytest.raises(exc.ConfigurationError, match="missing \\[2\\]"):
        sensitivity.build_report(results, num_layers=3)


def test_build_report_duplicate_probe():
    results = [ProbeResult(layer=1, val_error=0.1), ProbeResult(layer=1, val_error=0.2)]
    with pytest.raises(exc.ConfigurationError):
        sensitivity.build_report(results, num_layers=2)


def test_report_file_round_trip(tmp_path):
    report = sensitivity.build_report(probes(0.03, 0.01, 0.02), network="300-100-10")
    path = tmp_path / "reports" / "sensitivity.yaml"
    sensitivity.write_report(report, str(path))
    loaded = sensitivity.load_report(str(path))
    assert loaded == report
    assert "ascending_order: '231'" in path.read_text()


def test_load_report_missing_file(tmp_path):
    with pytest.raises(exc.ConfigurationError, match="not found"):
        sensitivity.load_report(str(tmp_path / "nope.yaml"))


def _record_runs(mocker):
    runs = []
    original = schedule.Trainer.run

    def recording_run(self, state_for_epoch, restrict_to_fully_binarized):
        result = original(self, state_for_epoch, restrict_to_fully_binarized)
        runs.append(result)
        return result

    mocker.patch.object(schedule.Trainer, "run", recording_run)
    return runs


def test_probe_binarizes_exactly_one_layer(toy_spec, toy_splits, cfg, mocker):
    runs = _record_runs(mocker)
    result = sensitivity.run_probe(
        toy_spec, 2, probe_epochs=2, lr_grid=(1e-3, 1e-2), seed=0, data=toy_splits, cfg=cfg
    )

    assert len(runs) == 2
    for run in runs:
        assert len(run.records) == 2
        assert all(r.state.bitstring == "010" for r in run.records)
    assert result.layer == 2
    assert result.lr in (1e-3, 1e-2)
    best = min(min(r.val_error for r in run.records) for run in runs)
    assert result.val_error == best


def test_probe_last_epoch_selection(toy_spec, toy_splits, cfg, mocker):
    runs = _record_runs(mocker)
    result = sensitivity.run_probe(
        toy_spec, 1, 3, (1e-2,), 0, toy_splits, selection="last", cfg=cfg
    )
    assert result.val_error == runs[0].records[-1].val_error


def test_probe_is_deterministic(toy_spec, toy_splits, cfg):
    first = sensitivity.run_probe(toy_spec, 3, 2, (1e-2,), 5, toy_splits, cfg=cfg)
    second = sensitivity.run_probe(toy_spec, 3, 2, (1e-2,), 5, toy_splits, cfg=cfg)
    assert first == second


def test_probe_of_single_layer_net_is_binary_baseline(toy_splits, cfg):
    spec = NetworkSpec(name="linear", input_shape=(8,), layers=[DenseSpec(8, 3)])
    result = sensitivity.run_probe(spec, 1, 3, (1e-2,), 0, toy_splits, cfg=cfg)
    baseline = schedule.run_iterative(
        TrainPlan(order=(1,), epochs_per_layer=0, total_epochs=3, lr0=1e-2),
        Network(spec, seed=0),
        toy_splits,
        cfg=cfg,
    )
    assert result.val_error == min(r.val_error for r in baseline.records)


def test_probe_all_grid_points_diverged(toy_spec, toy_splits, cfg, mocker):
    mocker.patch.object(
        Network, "loss_and_gradients", return_value=(float("nan"), [], None)
    )
    result = sensitivity.run_probe(toy_spec, 1, 2, (1e-3, 1e-2), 0, toy_splits, cfg=cfg)
    assert result.failed
    assert result.val_error == 1.0
    assert result.lr is None


@pytest.mark.parametrize("layer", [0, 4])
def test_probe_layer_out_of_range(toy_spec, toy_splits, layer):
    with pytest.raises(exc.ConfigurationError, match="Probe layer"):
        sensitivity.run_probe(toy_spec, layer, 2, (1e-2,), 0, toy_splits)


def test_probe_seeds(toy_presets):
    shared = ExperimentConfig.parse({"network": "toy-3", "seeds": [4, 5]})
    assert sensitivity.probe_seeds_for(shared) == [4, 4, 4]
    explicit = ExperimentConfig.parse({"network": "toy-3", "probe_seeds": [1, 2, 3]})
    assert sensitivity.probe_seeds_for(explicit) == [1, 2, 3]


def test_report_entries_need_every_layer():
    with pytest.raises(exc.ConfigurationError):
        SensitivityReport(network=None, entries=[ProbeResult(layer=2, val_error=0.1)])
