"""Command-line front end: simulate, calibrate, extract, report.

Units at the CLI boundary are human scale (grams, millimeters,
kilopascals); everything internal is SI. All outputs are written
atomically (temp file + rename) so interrupted runs never leave partial
results behind.

Exit codes: 0 success, 1 input error, 2 computation failure,
3 protocol violation.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import calibration as cal
from . import vision
from .dynamics import measure_tip_force, simulate_release, static_equilibrium
from .errors import (ConvergenceError, GripperTwinError, IntegrationError,
                     ModelError, ObjectiveError, StageOrderError, ValidityError,
                     VisionError)
from .model import GripperModel, LoadCondition, default_model

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_COMPUTE = 2
EXIT_PROTOCOL = 3


def _atomic_write(path, writer) -> None:
    tmp = f"{path}.tmp"
    writer(tmp)
    os.replace(tmp, path)


def _write_text(path, text: str) -> None:
    def writer(tmp):
        with open(tmp, "w") as fh:
            fh.write(text)
    _atomic_write(path, writer)


def _load_model(path) -> GripperModel:
    if path is None:
        return default_model()
    if not os.path.exists(path):
        raise ModelError(f"model file not found: {path}")
    return GripperModel.load(path)


def _angles_csv(angles) -> str:
    lines = ["joint,angle_rad"]
    lines += [f"{j + 1},{a:.12g}" for j, a in enumerate(angles)]
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# subcommands

def cmd_simulate(args) -> int:
    model = _load_model(args.model)
    os.makedirs(args.out_dir, exist_ok=True)
    modes = [bool(args.static), bool(args.release), bool(args.force)]
    if sum(modes) != 1:
        raise ModelError("choose exactly one of --static, --release, --force")

    if args.static:
        load = LoadCondition(tip_mass=args.tip_mass_g / 1000.0,
                             pressure=args.pressure_kpa * 1000.0)
        theta = static_equilibrium(model, load)
        out = os.path.join(args.out_dir, "angles.csv")
        _write_text(out, _angles_csv(theta))
        print(f"wrote {out} (tip mass {args.tip_mass_g} g)")
    elif args.release:
        series = simulate_release(model, args.initial_mass_g / 1000.0,
                                  args.duration_s, sample_rate=args.sample_rate)
        out = os.path.join(args.out_dir, "trajectory.csv")
        _atomic_write(out, series.to_csv)
        print(f"wrote {out} ({series.values.size} samples at {args.sample_rate:g} Hz)")
    else:
        result = measure_tip_force(model, args.pressure_kpa * 1000.0)
        out = os.path.join(args.out_dir, "force.csv")
        _write_text(out, "pressure_pa,force_n\n"
                    f"{args.pressure_kpa * 1000.0:.10g},{result.force:.12g}\n")
        note = " (tip lifted off the plane)" if result.liftoff else ""
        print(f"tip force at {args.pressure_kpa:g} kPa: {result.force:.6g} N{note}")
        print(f"wrote {out}")
    return EXIT_OK


def cmd_calibrate(args) -> int:
    if not os.path.exists(args.campaign):
        raise ModelError(f"campaign file not found: {args.campaign}")
    campaign = cal.load_campaign(args.campaign, seed=args.seed)
    os.makedirs(args.out_dir, exist_ok=True)
    result = cal.run_campaign(campaign, workers=args.workers)

    params_path = os.path.join(args.out_dir, "parameters.json")
    _atomic_write(params_path, result.parameters_to_json)
    history_path = os.path.join(args.out_dir, "history.csv")
    _atomic_write(history_path, result.pso_result.history_to_csv)
    particles_path = os.path.join(args.out_dir, "particles.csv")
    _atomic_write(particles_path, result.particles_to_csv)
    written = [params_path, history_path, particles_path]
    if result.validation is not None:
        val_path = os.path.join(args.out_dir, "validation.csv")
        _atomic_write(val_path, result.validation.to_csv)
        written.append(val_path)

    print(f"stage {result.stage}: final training fitness {result.train_fitness:.6g}")
    if result.validation is not None:
        print(f"validation fitness {result.validation.mean_fitness:.6g}")
    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


def _collect_images(paths):
    files = []
    for p in paths:
        if os.path.isdir(p):
            inside = sorted(os.path.join(p, f) for f in os.listdir(p)
                            if f.lower().endswith((".ppm", ".pgm")))
            if not inside:
                raise ModelError(f"no .ppm/.pgm files in directory {p}")
            files.extend(inside)
        elif os.path.exists(p):
            files.append(p)
        else:
            raise ModelError(f"image not found: {p}")
    return files


def cmd_extract(args) -> int:
    spec = vision.MaskSpec.from_json(args.mask_spec) if args.mask_spec else vision.MaskSpec()
    model = _load_model(args.model)
    files = _collect_images(args.images)
    os.makedirs(args.out_dir, exist_ok=True)

    if len(files) == 1:
        img = vision.read_image(files[0])
        angles, scale = vision.angles_from_image(img, spec, model)
        out = os.path.join(args.out_dir, "angles.csv")
        _write_text(out, _angles_csv(angles))
        print(f"wrote {out} (pixel scale {scale:.1f} px/m)")
        return EXIT_OK

    if args.fps is None or args.px_per_mm is None:
        raise ModelError("frame sequences need --fps and --px-per-mm")
    frames = [vision.read_image(f) for f in files]
    series = vision.track_tip(frames, spec, fps=args.fps,
                              px_per_m=args.px_per_mm * 1000.0)
    out = os.path.join(args.out_dir, "trajectory.csv")
    _atomic_write(out, series.to_csv)
    print(f"wrote {out} ({len(files)} frames)")
    return EXIT_OK


def _read_csv_rows(path):
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    return header, rows


def cmd_report(args) -> int:
    os.makedirs(args.out_dir, exist_ok=True)
    rd = args.results_dir
    candidates = {
        "history": os.path.join(rd, "history.csv"),
        "particles": os.path.join(rd, "particles.csv"),
        "validation": os.path.join(rd, "validation.csv"),
    }
    present = {k: p for k, p in candidates.items() if os.path.exists(p)}
    if not present:
        raise ModelError(
            "no result files found; looked for "
            + ", ".join(sorted(candidates.values())))

    written = []
    if "history" in present:
        header, rows = _read_csv_rows(present["history"])
        best = np.minimum.accumulate([float(r[1]) for r in rows])
        text = "iteration,best_fitness\n" + "".join(
            f"{r[0]},{b:.12g}\n" for r, b in zip(rows, best))
        out = os.path.join(args.out_dir, "fitness_evolution.csv")
        _write_text(out, text)
        written.append(out)

    if "particles" in present:
        header, rows = _read_csv_rows(present["particles"])
        n_joints = len(header) - 3
        iters = sorted({int(r[0]) for r in rows})
        parts = sorted({int(r[1]) for r in rows})
        log = np.empty((len(iters), len(parts), n_joints))
        it_idx = {v: i for i, v in enumerate(iters)}
        for r in rows:
            log[it_idx[int(r[0])], int(r[1])] = [float(v) for v in r[3:]]
        summary = cal.summarize_particles(log)
        cols = ["iteration_start", "iteration_end", "joint",
                "min", "q1", "median", "q3", "max", "mean"]
        text = ",".join(cols) + "\n" + "".join(
            ",".join(f"{row[c]:.10g}" if isinstance(row[c], float) else str(row[c])
                     for c in cols) + "\n"
            for row in summary)
        out = os.path.join(args.out_dir, "parameter_convergence.csv")
        _write_text(out, text)
        written.append(out)

    if "validation" in present:
        header, rows = _read_csv_rows(present["validation"])
        force_rows = [r for r in rows if r[2] == "force_n"]
        if force_rows:
            text = "pressure_pa,observed_n,simulated_n\n" + "".join(
                f"{r[1]},{r[3]},{r[4]}\n" for r in force_rows)
            out = os.path.join(args.out_dir, "force_pressure.csv")
            _write_text(out, text)
            written.append(out)
        settle_rows = [r for r in rows if r[2] in ("settling_time_s", "overshoots")]
        if settle_rows:
            text = "condition_kg,metric,observed,simulated\n" + "".join(
                f"{r[1]},{r[2]},{r[3]},{r[4]}\n" for r in settle_rows)
            out = os.path.join(args.out_dir, "settling_comparison.csv")
            _write_text(out, text)
            written.append(out)

    for path in written:
        print(f"wrote {path}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gripper-twin",
        description="Soft-gripper digital twin: simulation, measurement "
                    "extraction, and PSO calibration.")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run a static, release, or force experiment")
    p_sim.add_argument("--model", help="model JSON (default: built-in reference gripper)")
    p_sim.add_argument("--out-dir", default=".")
    p_sim.add_argument("--static", action="store_true", help="static equilibrium angles")
    p_sim.add_argument("--release", action="store_true", help="release trajectory")
    p_sim.add_argument("--force", action="store_true", help="tip force on the scale plane")
    p_sim.add_argument("--tip-mass-g", type=float, default=0.0)
    p_sim.add_argument("--initial-mass-g", type=float, default=40.0)
    p_sim.add_argument("--duration-s", type=float, default=2.0)
    p_sim.add_argument("--sample-rate", type=float, default=1000.0)
    p_sim.add_argument("--pressure-kpa", type=float, default=0.0)
    p_sim.set_defaults(func=cmd_simulate)

    p_cal = sub.add_parser("calibrate", help="run a calibration campaign")
    p_cal.add_argument("--campaign", required=True, help="campaign definition JSON")
    p_cal.add_argument("--seed", type=int, required=True,
                       help="optimizer seed (mandatory for reproducibility)")
    p_cal.add_argument("--out-dir", default=".")
    p_cal.add_argument("--workers", type=int, default=0,
                       help="parallel fitness evaluations (0 = serial)")
    p_cal.set_defaults(func=cmd_calibrate)

    p_ext = sub.add_parser("extract", help="joint angles or tip track from images")
    p_ext.add_argument("images", nargs="+", help="image file(s) or a frame directory")
    p_ext.add_argument("--mask-spec", help="MaskSpec JSON (default: blue band)")
    p_ext.add_argument("--model", help="model JSON for scale/joint count")
    p_ext.add_argument("--fps", type=float, help="frame rate for sequences")
    p_ext.add_argument("--px-per-mm", type=float, help="pixel scale for sequences")
    p_ext.add_argument("--out-dir", default=".")
    p_ext.set_defaults(func=cmd_extract)

    p_rep = sub.add_parser("report", help="plot-ready aggregate CSVs from results")
    p_rep.add_argument("--results-dir", required=True)
    p_rep.add_argument("--out-dir", default=".")
    p_rep.set_defaults(func=cmd_report)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except StageOrderError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PROTOCOL
    except (ValidityError, IntegrationError, ConvergenceError, VisionError,
            ObjectiveError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE
    except (ModelError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except GripperTwinError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_COMPUTE


if __name__ == "__main__":
    sys.exit(main())
