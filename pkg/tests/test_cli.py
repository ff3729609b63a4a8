import json
import os

import numpy as np
import pytest

from gripper_twin import calibration as cal
from gripper_twin import dynamics as dyn
from gripper_twin import render, vision
from gripper_twin.cli import main
from gripper_twin.model import LoadCondition, default_model
from gripper_twin.signal_metrics import TimeSeries


def read_angles_csv(path):
    with open(path) as fh:
        assert fh.readline().strip() == "joint,angle_rad"
        return np.array([float(line.split(",")[1]) for line in fh])


def no_tmp_litter(directory):
    return not any(name.endswith(".tmp") for name in os.listdir(directory))


# ---------------------------------------------------------------------------
# simulate


def test_simulate_static(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--static", "--tip-mass-g", "40",
                 "--out-dir", str(out)]) == 0
    angles = read_angles_csv(out / "angles.csv")
    expected = dyn.static_equilibrium(default_model(), LoadCondition(tip_mass=0.040))
    assert np.allclose(angles, expected, atol=1e-10)
    assert no_tmp_litter(out)


def test_simulate_release(tmp_path):
    out = tmp_path / "out"
    assert main(["simulate", "--release", "--initial-mass-g", "40",
                 "--duration-s", "0.3", "--out-dir", str(out)]) == 0
    series = TimeSeries.from_csv(out / "trajectory.csv")
    expected = dyn.simulate_release(default_model(), 0.040, 0.3)
    assert series.values.size == expected.values.size
    assert np.allclose(series.values, expected.values, atol=1e-9)


def test_simulate_force(tmp_path, capsys):
    out = tmp_path / "out"
    assert main(["simulate", "--force", "--pressure-kpa", "50",
                 "--out-dir", str(out)]) == 0
    text = (out / "force.csv").read_text().strip().splitlines()
    assert text[0] == "pressure_pa,force_n"
    pressure, force = (float(v) for v in text[1].split(","))
    assert pressure == 50e3
    assert force == pytest.approx(dyn.measure_tip_force(default_model(), 50e3).force)
    assert "tip force" in capsys.readouterr().out


def test_simulate_input_errors(tmp_path):
    assert main(["simulate", "--static", "--model", str(tmp_path / "nope.json"),
                 "--out-dir", str(tmp_path)]) == 1
    assert main(["simulate", "--static", "--release",
                 "--out-dir", str(tmp_path)]) == 1
    assert main(["simulate", "--out-dir", str(tmp_path)]) == 1


def test_simulate_custom_model(tmp_path):
    model_path = tmp_path / "model.json"
    default_model(joint_k=np.full(7, 0.5)).save(model_path)
    out = tmp_path / "out"
    assert main(["simulate", "--static", "--tip-mass-g", "20",
                 "--model", str(model_path), "--out-dir", str(out)]) == 0
    angles = read_angles_csv(out / "angles.csv")
    expected = dyn.static_equilibrium(default_model(joint_k=np.full(7, 0.5)),
                                      LoadCondition(tip_mass=0.020))
    assert np.allclose(angles, expected, atol=1e-10)


# ---------------------------------------------------------------------------
# calibrate


SPRING_CAMPAIGN = {
    "stage": "spring",
    "optimizer": {"swarm_size": 8, "iterations": 10},
    "train": {
        "specs": [{"kind": "static_load", "tip_mass_g": 0},
                  {"kind": "static_load", "tip_mass_g": 20},
                  {"kind": "static_load", "tip_mass_g": 40}],
        "observations": {"synthesize": {}},
    },
    "validation": {
        "specs": [{"kind": "static_load", "tip_mass_g": 30}],
        "observations": {"synthesize": {}},
    },
}


def test_calibrate_writes_outputs_and_is_deterministic(tmp_path, capsys):
    campaign = tmp_path / "campaign.json"
    campaign.write_text(json.dumps(SPRING_CAMPAIGN))
    out1, out2 = tmp_path / "a", tmp_path / "b"
    assert main(["calibrate", "--campaign", str(campaign), "--seed", "5",
                 "--out-dir", str(out1)]) == 0
    assert "final training fitness" in capsys.readouterr().out
    assert main(["calibrate", "--campaign", str(campaign), "--seed", "5",
                 "--out-dir", str(out2)]) == 0
    for name in ("parameters.json", "history.csv", "particles.csv", "validation.csv"):
        assert (out1 / name).exists()
        assert (out1 / name).read_bytes() == (out2 / name).read_bytes()
    params = json.loads((out1 / "parameters.json").read_text())
    assert len(params["k"]) == 7
    assert params["c"] is None
    assert no_tmp_litter(out1)


def test_calibrate_stage_order_exit_code(tmp_path):
    campaign = tmp_path / "damping.json"
    campaign.write_text(json.dumps({
        "stage": "damping",
        "optimizer": {"swarm_size": 4, "iterations": 2},
        "train": {
            "specs": [{"kind": "release", "initial_mass_g": 20, "duration_s": 0.3}],
            "observations": {"synthesize": {}},
        },
    }))
    assert main(["calibrate", "--campaign", str(campaign), "--seed", "1",
                 "--out-dir", str(tmp_path / "out")]) == 3


def test_calibrate_missing_campaign(tmp_path):
    assert main(["calibrate", "--campaign", str(tmp_path / "nope.json"),
                 "--seed", "1", "--out-dir", str(tmp_path)]) == 1


# ---------------------------------------------------------------------------
# extract


def test_extract_single_image(tmp_path):
    m = default_model()
    img, _ = render.render_chain(m, np.zeros(7))
    img_path = tmp_path / "straight.ppm"
    vision.write_image(img, img_path)
    out = tmp_path / "out"
    assert main(["extract", str(img_path), "--out-dir", str(out)]) == 0
    angles = read_angles_csv(out / "angles.csv")
    assert np.abs(angles).max() < 0.02


def test_extract_frame_directory(tmp_path):
    m = default_model()
    theta = dyn.static_equilibrium(m, LoadCondition())
    frames, _ = render.render_sequence(m, np.tile(theta, (4, 1)), px_per_m=6000)
    frame_dir = tmp_path / "frames"
    frame_dir.mkdir()
    for i, frame in enumerate(frames):
        vision.write_image(frame, frame_dir / f"frame_{i:04d}.ppm")
    out = tmp_path / "out"
    assert main(["extract", str(frame_dir), "--fps", "100",
                 "--px-per-mm", "6", "--out-dir", str(out)]) == 0
    series = TimeSeries.from_csv(out / "trajectory.csv")
    assert series.values.size == 4
    assert series.sample_rate == pytest.approx(100.0)
    # frames without --fps is an input error
    assert main(["extract", str(frame_dir), "--out-dir", str(out)]) == 1


def test_extract_bad_mask_spec(tmp_path):
    m = default_model()
    img, _ = render.render_chain(m, np.zeros(7))
    img_path = tmp_path / "img.ppm"
    vision.write_image(img, img_path)
    bad_spec = tmp_path / "spec.json"
    bad_spec.write_text("{broken")
    assert main(["extract", str(img_path), "--mask-spec", str(bad_spec),
                 "--out-dir", str(tmp_path)]) == 1


def test_extract_blank_image_is_compute_error(tmp_path):
    px = np.full((80, 200, 3), 255, dtype=np.uint8)
    img_path = tmp_path / "blank.ppm"
    vision.write_image(vision.RasterImage(px), img_path)
    assert main(["extract", str(img_path), "--out-dir", str(tmp_path)]) == 2


# ---------------------------------------------------------------------------
# report


def test_report_history_cumulative_min(tmp_path):
    rd = tmp_path / "results"
    rd.mkdir()
    (rd / "history.csv").write_text(
        "iteration,best_fitness\n1,5.0\n2,3.0\n3,4.0\n4,2.0\n")
    out = tmp_path / "out"
    assert main(["report", "--results-dir", str(rd), "--out-dir", str(out)]) == 0
    lines = (out / "fitness_evolution.csv").read_text().strip().splitlines()
    assert [line.split(",")[1] for line in lines[1:]] == ["5", "3", "3", "2"]


def test_report_particle_quartiles(tmp_path):
    rd = tmp_path / "results"
    rd.mkdir()
    rng = np.random.default_rng(0)
    log = rng.uniform(0.0, 1.0, (20, 6, 2))
    lines = ["iteration,particle,pbest_fitness,p1,p2"]
    for it in range(20):
        for p in range(6):
            lines.append(f"{it + 1},{p},0.5,{log[it, p, 0]:.10g},{log[it, p, 1]:.10g}")
    (rd / "particles.csv").write_text("\n".join(lines) + "\n")
    out = tmp_path / "out"
    assert main(["report", "--results-dir", str(rd), "--out-dir", str(out)]) == 0
    got = (out / "parameter_convergence.csv").read_text().strip().splitlines()
    # oracle: first group, joint 1 quartiles over iterations 1..10 pooled
    pooled = log[:10, :, 0].ravel()
    want = np.quantile(pooled, [0.0, 0.25, 0.5, 0.75, 1.0])
    row = got[1].split(",")
    assert row[:3] == ["1", "10", "1"]
    assert np.allclose([float(v) for v in row[3:8]], want, atol=1e-9)
    assert float(row[8]) == pytest.approx(pooled.mean())


def test_report_validation_tables(tmp_path):
    rd = tmp_path / "results"
    rd.mkdir()
    (rd / "validation.csv").write_text(
        "kind,condition,metric,observed,simulated\n"
        "Actuation,10000,force_n,0.1,0.11\n"
        "Actuation,10000,fitness,0,0.01\n"
        "Release,0.02,settling_time_s,0.4,0.42\n"
        "Release,0.02,overshoots,3,4\n")
    out = tmp_path / "out"
    assert main(["report", "--results-dir", str(rd), "--out-dir", str(out)]) == 0
    force = (out / "force_pressure.csv").read_text().strip().splitlines()
    assert force[0] == "pressure_pa,observed_n,simulated_n"
    assert force[1] == "10000,0.1,0.11"
    settle = (out / "settling_comparison.csv").read_text().strip().splitlines()
    assert len(settle) == 3


def test_report_empty_dir_lists_missing(tmp_path, capsys):
    rd = tmp_path / "empty"
    rd.mkdir()
    assert main(["report", "--results-dir", str(rd), "--out-dir", str(tmp_path)]) == 1
    err = capsys.readouterr().err
    assert "history.csv" in err and "particles.csv" in err and "validation.csv" in err
