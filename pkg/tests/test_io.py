import numpy as np
import pytest

from app.core.errors import InputFileError
from app.models import (
    TRACER,
    SimConfig,
    StepAction,
    StepRecord,
    SyntheticFieldSpec,
    TaskKind,
    TaskReport,
)
from app.io.files import (
    load_trajectory_set,
    read_field_model,
    read_grid,
    read_sindy_result,
    read_task,
    read_trajectories,
    write_field_model,
    write_grid,
    write_orientation_sidecar,
    write_report_summary,
    write_sindy_result,
    write_step_log,
    write_task,
    write_trajectories,
)
from app.io.plots import plot_task_report, plot_trajectories
from app.services.dynamics import simulate
from app.services.presets import preset
from app.services.sindy import ensemble_fit
from app.services.synthetic import generate_synthetic_grid, generate_synthetic_snapshots
from tests.conftest import tracer_at


def _write(path, text: str):
    path.write_text(text, encoding="utf-8")
    return path


def test_grid_survives_a_file(tmp_path, geometry):
    grid = generate_synthetic_grid(SyntheticFieldSpec(noise=0.05), geometry)
    assert read_grid(write_grid(grid, tmp_path / "grid.csv")) == grid


def test_grid_pan_defaults_to_ninety(tmp_path):
    path = _write(tmp_path / "g.csv", "# tilt_deg=0 source=measurement\nx_m,y_m,speed_mps\n0,0,1.5\n")
    grid = read_grid(path)
    assert grid.pan_deg == 90.0
    assert grid.points == [(0.0, 0.0, 1.5)]


def test_negative_grid_speed_names_the_line(tmp_path):
    path = _write(
        tmp_path / "g.csv",
        "# tilt_deg=0 source=measurement\nx_m,y_m,speed_mps\n0,0,1.5\n0.1,0,-0.2\n",
    )
    with pytest.raises(InputFileError) as info:
        read_grid(path)
    assert info.value.context == {"file": str(path), "line": 4}


def test_duplicate_grid_location_is_rejected(tmp_path):
    path = _write(
        tmp_path / "g.csv",
        "# tilt_deg=0 source=cfd\nx_m,y_m,speed_mps\n0,0,1.5\n0,0,1.0\n",
    )
    with pytest.raises(InputFileError) as info:
        read_grid(path)
    assert info.value.context["line"] == 4


@pytest.mark.parametrize(
    "text",
    [
        "x_m,y_m,speed_mps\n0,0,1\n",
        "# tilt_deg=0\nx_m,y_m,speed_mps\n0,0,1\n",
        "# tilt_deg=0 source=wind\nx_m,y_m,speed_mps\n0,0,1\n",
        "# tilt_deg=0 source=cfd\nx,y,v\n0,0,1\n",
        "# tilt_deg=0 source=cfd\nx_m,y_m,speed_mps\n0,zero,1\n",
        "# tilt_deg=0 source=cfd\nx_m,y_m,speed_mps\n0,0\n",
        "# tilt_deg=95 source=cfd\nx_m,y_m,speed_mps\n0,0,1\n",
        "# tilt_deg=0 source=cfd\nx_m,y_m,speed_mps\n",
    ],
)
def test_malformed_grids_are_rejected(tmp_path, text):
    with pytest.raises(InputFileError):
        read_grid(_write(tmp_path / "g.csv", text))


def test_missing_file_is_reported(tmp_path):
    with pytest.raises(InputFileError) as info:
        read_grid(tmp_path / "absent.csv")
    assert "not found" in info.value.message


def test_field_model_survives_a_file(tmp_path, field_model):
    loaded = read_field_model(write_field_model(field_model, tmp_path / "model.csv"))
    np.testing.assert_array_equal(loaded.table, field_model.table)
    np.testing.assert_array_equal(loaded.tilt_nodes, field_model.tilt_nodes)
    assert loaded.geometry == field_model.geometry


def test_field_model_with_missing_bins_is_rejected(tmp_path, field_model):
    path = write_field_model(field_model, tmp_path / "model.csv")
    lines = path.read_text().splitlines()
    _write(path, "\n".join(lines[:-1]) + "\n")
    with pytest.raises(InputFileError) as info:
        read_field_model(path)
    assert "359 alpha bins" in info.value.message


def test_field_model_with_invalid_profile_names_the_line(tmp_path):
    path = _write(
        tmp_path / "model.csv",
        "# h=1.43 a1=0.1 a2=2.33\ntilt_deg,alpha_deg,b1,b2,b3\n0,-180,5.0,-16.0,-2.0\n",
    )
    with pytest.raises(InputFileError) as info:
        read_field_model(path)
    assert info.value.context["line"] == 3


def test_trajectories_survive_a_file(tmp_path, field_model, orientation):
    trajectories = simulate(
        [tracer_at(0.2, 0.3, 0), tracer_at(-0.1, 0.4, 7)], field_model, orientation, 0.5, SimConfig()
    )
    loaded = read_trajectories(write_trajectories(trajectories, tmp_path / "t.csv"))
    assert loaded == trajectories


def test_trajectory_time_must_increase(tmp_path):
    path = _write(
        tmp_path / "t.csv",
        "object_id,t_s,x_m,y_m,speed_mps\n0,0.0,0,0,0\n0,0.05,0,0,0\n0,0.025,0,0,0\n",
    )
    with pytest.raises(InputFileError) as info:
        read_trajectories(path)
    assert info.value.context["line"] == 4


def test_sidecar_resolves_files_next_to_it(tmp_path, field_model, orientation):
    trajectories = simulate([tracer_at(0.2, 0.3)], field_model, orientation, 0.25, SimConfig())
    data_dir = tmp_path / "run"
    write_trajectories(trajectories, data_dir / "trajectory_0000.csv")
    sidecar = write_orientation_sidecar(
        [("trajectory_0000.csv", orientation)], data_dir / "orientations.csv"
    )
    [(trajectory, loaded_orientation)] = load_trajectory_set(sidecar)
    assert trajectory == trajectories[0]
    assert loaded_orientation == orientation


def test_sidecar_with_invalid_orientation_is_rejected(tmp_path):
    path = _write(tmp_path / "o.csv", "trajectory_file,pan_deg,tilt_deg\nt.csv,90,95\n")
    with pytest.raises(InputFileError) as info:
        load_trajectory_set(path)
    assert info.value.context["line"] == 2


def test_task_survives_a_file(tmp_path):
    for name in ("octagon", "sorting"):
        task = preset(name)
        assert read_task(write_task(task, tmp_path / f"{name}.yaml")) == task


def test_invalid_task_file_is_rejected(tmp_path):
    path = _write(tmp_path / "task.yaml", "kind: aggregation\nobjects: []\n")
    with pytest.raises(InputFileError):
        read_task(path)
    with pytest.raises(InputFileError):
        read_task(_write(tmp_path / "list.yaml", "- 1\n- 2\n"))


def test_sindy_result_survives_a_file(tmp_path):
    result = ensemble_fit(generate_synthetic_snapshots(TRACER, 300, seed=1))
    path = write_sindy_result(result, tmp_path / "sindy.yaml", dynamics_label="tracer")
    assert "dynamics:" in path.read_text()
    assert read_sindy_result(path) == result


def _report() -> TaskReport:
    step = StepRecord(
        step=0,
        action=StepAction.HOLD,
        waypoint_index=0,
        cost=1e3,
        positions_before=[(0.0, 0.25), (0.1, 0.25)],
        predicted_positions=[(0.0, 0.25), (0.1, 0.25)],
        positions_after=[(0.0, 0.25), (0.1, 0.25)],
        errors=[0.0, 0.0],
        max_pairwise_distance=0.1,
    )
    return TaskReport(
        task_name="line",
        kind=TaskKind.PATH_FOLLOWING,
        steps=[step],
        mean_error=0.0,
        std_error=0.0,
        max_error=0.0,
        steps_used=1,
        completed=False,
        failure_reason="not completed within 1 steps",
        final_positions=[(0.0, 0.25), (0.1, 0.25)],
        waypoint_count=5,
        error_convention="test",
    )


def test_step_log_has_one_row_per_object(tmp_path):
    path = write_step_log(_report(), tmp_path / "steps.csv")
    lines = path.read_text().splitlines()
    assert lines[0].startswith("step,action,waypoint_index,pan_deg")
    assert len(lines) == 3
    assert lines[1].startswith("0,hold,0,,,,,1000.0,0,")


def test_report_summary_leaves_out_steps(tmp_path):
    text = write_report_summary(_report(), tmp_path / "report.yaml").read_text()
    assert "steps:" not in text
    assert "steps_used: 1" in text


def test_plots_are_written_as_svg(tmp_path, field_model, orientation):
    trajectories = simulate([tracer_at(0.2, 0.3)], field_model, orientation, 0.5, SimConfig())
    path = plot_trajectories(trajectories, tmp_path / "t.svg", stagnation=(0.0, 0.56))
    assert path.read_text().lstrip().startswith("<?xml")

    report_svg = plot_task_report(preset("line"), _report(), tmp_path / "report.svg")
    assert "<svg" in report_svg.read_text()
