"""Command-line harness: simulate, solve, eval, sweep, pipeline.

Exit codes: 0 success, 2 configuration, 3 I/O, 4 solver, 5 evaluation.
"""

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import jsonio, so3
from .baseline import DeadReckonState, dead_reckon_positions
from .config import config_from_dict, config_to_dict, reference_config
from .derivatives import savgol_filter
from .errors import ConfigError, DynSfmError
from .evaluate import evaluate, procrustes_no_scale
from .simulate import simulate_dataset
from .solver import SolverOptions, reconstruct

EXIT_CONFIG = 2
EXIT_IO = 3
EXIT_SOLVER = 4
EXIT_EVAL = 5

NOISE_SEED_OFFSET = 10_000_019  # sweep runs derive noise seeds from run seeds


class _CliFailure(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def _load_config(path, seed_override=None):
    try:
        doc = jsonio.read_json(path)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot read config: {err}")
    except json.JSONDecodeError as err:
        raise _CliFailure(EXIT_CONFIG, f"config is not valid JSON: {err}")
    try:
        cfg = config_from_dict(doc)
    except ConfigError as err:
        raise _CliFailure(EXIT_CONFIG, str(err))
    if seed_override is not None:
        cfg.seed = seed_override
    return cfg


def _simulate(cfg):
    order, window = cfg.flow_filter
    filters = (savgol_filter(order, window, 1), savgol_filter(order, window, 2))
    return simulate_dataset(
        duration=cfg.duration, t_s=cfg.t_s, n_points=cfg.points,
        extent=cfg.extent, amp_trans=cfg.amp_trans, amp_rot=cfg.amp_rot,
        seed=cfg.seed, noise=cfg.noise, flow_mode=cfg.flow_mode,
        flow_filters=filters)


def _write(path, obj):
    try:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        jsonio.write_json(path, obj)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot write {path}: {err}")


def _eval_outputs(recon, dataset):
    """Error report plus the plot-ready trajectory/structure tables."""
    traj, scene = dataset.trajectory, dataset.scene
    try:
        report = evaluate(recon, traj, scene, dataset.gravity)
        align = procrustes_no_scale(recon.structure, scene.points)
    except DynSfmError as err:
        raise _CliFailure(EXIT_EVAL, f"evaluation failed: {err}")
    meas = dataset.measurements
    init = DeadReckonState(traj.rotations[0].copy(), traj.T[0].copy(),
                           traj.dT[0].copy())
    imu_T = dead_reckon_positions(meas.gyro, meas.accel, dataset.gravity,
                                  init, dataset.t_s)
    F = traj.n_frames
    window = max(1, F // 4)
    dr_err = imu_T[F - window:] - traj.T[F - window:]
    dr_rmse = float(np.sqrt((dr_err ** 2).sum(axis=1).mean()))

    est_T = align.apply(recon.positions)
    rows = []
    try:
        for f in range(F):
            gt_log = so3.log_so3(traj.rotations[f])
            est_log = so3.log_so3(align.rotation @ recon.rotations[f])
            rows.append([f, f * dataset.t_s, *gt_log, *est_log,
                         *traj.T[f], *est_T[f], *imu_T[f]])
    except DynSfmError as err:
        raise _CliFailure(EXIT_EVAL, f"evaluation failed: {err}")
    traj_header = ["frame", "t",
                   "gt_logR_x", "gt_logR_y", "gt_logR_z",
                   "est_logR_x", "est_logR_y", "est_logR_z",
                   "gt_T_x", "gt_T_y", "gt_T_z",
                   "est_T_x", "est_T_y", "est_T_z",
                   "imu_T_x", "imu_T_y", "imu_T_z"]
    est_S = align.apply(recon.structure)
    struct_header = ["point", "gt_x", "gt_y", "gt_z", "est_x", "est_y", "est_z"]
    struct_rows = [[p, *scene.points[p], *est_S[p]]
                   for p in range(scene.n_points)]
    report_dict = jsonio.report_to_dict(
        report, extra={"dead_reckoning_terminal_rmse": dr_rmse})
    return report_dict, (traj_header, rows), (struct_header, struct_rows)


def cmd_simulate(args):
    cfg = _load_config(args.config, args.seed)
    dataset = _simulate(cfg)
    _write(args.out, jsonio.dataset_to_dict(dataset))
    if not args.quiet:
        traj = dataset.trajectory
        print(f"frames={traj.n_frames} points={dataset.scene.n_points} "
              f"peak_speed={traj.peak_speed:.3f} m/s "
              f"peak_rotation={np.degrees(traj.peak_rotation):.1f} deg")
    return 0


def _load_dataset(path):
    try:
        return jsonio.dataset_from_dict(jsonio.read_json(path))
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot read dataset: {err}")
    except (json.JSONDecodeError, KeyError, DynSfmError) as err:
        raise _CliFailure(EXIT_IO, f"bad dataset file: {err}")


def _solve(dataset, options):
    try:
        return reconstruct(dataset.measurements, options)
    except DynSfmError as err:
        raise _CliFailure(EXIT_SOLVER, f"solver failed: {err}")


def cmd_solve(args):
    dataset = _load_dataset(args.dataset)
    options = SolverOptions()
    if args.options:
        try:
            options = jsonio.options_from_dict(jsonio.read_json(args.options))
        except OSError as err:
            raise _CliFailure(EXIT_IO, f"cannot read options: {err}")
        except (json.JSONDecodeError, ValueError) as err:
            raise _CliFailure(EXIT_CONFIG, f"bad solver options: {err}")
    recon = _solve(dataset, options)
    _write(args.out, jsonio.reconstruction_to_dict(recon))
    if not args.quiet:
        r = recon.residuals
        print(f"sigma_ratio={r['sigma_ratio']:.3e} "
              f"rotation_lsq={r['rotation_lsq']:.3e} "
              f"translation_lsq={r['translation_lsq']:.3e}")
    return 0


def cmd_eval(args):
    dataset = _load_dataset(args.dataset)
    try:
        recon = jsonio.reconstruction_from_dict(jsonio.read_json(args.recon))
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot read reconstruction: {err}")
    except (json.JSONDecodeError, KeyError, ValueError) as err:
        raise _CliFailure(EXIT_IO, f"bad reconstruction file: {err}")
    report, traj_csv, struct_csv = _eval_outputs(recon, dataset)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        jsonio.write_json(out / "report.json", report)
        jsonio.write_csv(out / "trajectory.csv", *traj_csv)
        jsonio.write_csv(out / "structure.csv", *struct_csv)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot write outputs: {err}")
    if not args.quiet:
        print(f"trans_rmse={report['trans_rmse']:.4e} "
              f"struct_rmse={report['struct_rmse']:.4e} "
              f"rot_err_mean={report['rot_err_mean']:.4e} "
              f"dr_terminal_rmse={report['dead_reckoning_terminal_rmse']:.4e}")
    return 0


def cmd_pipeline(args):
    cfg = _load_config(args.config, args.seed)
    out = Path(args.out)
    dataset = _simulate(cfg)
    recon = _solve(dataset, cfg.solver)
    report, traj_csv, struct_csv = _eval_outputs(recon, dataset)
    try:
        out.mkdir(parents=True, exist_ok=True)
        jsonio.write_json(out / "dataset.json", jsonio.dataset_to_dict(dataset))
        jsonio.write_json(out / "reconstruction.json",
                          jsonio.reconstruction_to_dict(recon))
        jsonio.write_json(out / "report.json", report)
        jsonio.write_csv(out / "trajectory.csv", *traj_csv)
        jsonio.write_csv(out / "structure.csv", *struct_csv)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot write outputs: {err}")
    if not args.quiet:
        print(f"trans_rmse={report['trans_rmse']:.4e} "
              f"gravity_angle_err={report['gravity_angle_err']:.4e} "
              f"dr_terminal_rmse={report['dead_reckoning_terminal_rmse']:.4e}")
    return 0


SWEEP_HEADER = ["seed", "noise_scale", "status", "trans_rmse",
                "dr_terminal_rmse", "rot_err_mean", "axis_err_x",
                "axis_err_y", "axis_err_z", "gravity_angle_err",
                "struct_rmse", "sigma_ratio"]


def cmd_sweep(args):
    cfg = _load_config(args.config)
    try:
        sweep = jsonio.read_json(args.sweep)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot read sweep spec: {err}")
    except json.JSONDecodeError as err:
        raise _CliFailure(EXIT_CONFIG, f"sweep spec is not valid JSON: {err}")
    for key in sweep:
        if key not in ("seeds", "noise_scales"):
            raise _CliFailure(EXIT_CONFIG, f"sweep: unknown field {key!r}")
    seeds = [int(s) for s in sweep.get("seeds", [cfg.seed])]
    scales = [float(s) for s in sweep.get("noise_scales", [1.0])]
    rows = []
    failures = 0
    for scale in scales:
        for seed in seeds:
            run_cfg = _load_config(args.config)
            run_cfg.seed = seed
            run_cfg.noise = run_cfg.noise.scaled(scale)
            run_cfg.noise.seed = seed + NOISE_SEED_OFFSET
            try:
                dataset = _simulate(run_cfg)
                recon = _solve(dataset, run_cfg.solver)
                report, _, _ = _eval_outputs(recon, dataset)
                rows.append([seed, scale, "ok", report["trans_rmse"],
                             report["dead_reckoning_terminal_rmse"],
                             report["rot_err_mean"],
                             report["per_axis_err"][0],
                             report["per_axis_err"][1],
                             report["per_axis_err"][2],
                             report["gravity_angle_err"],
                             report["struct_rmse"],
                             recon.residuals["sigma_ratio"]])
            except _CliFailure as err:
                failures += 1
                rows.append([seed, scale, "failed", "", "", "", "", "", "",
                             "", "", ""])
                if not args.quiet:
                    print(f"run seed={seed} scale={scale} failed: {err}",
                          file=sys.stderr)
    out = Path(args.out)
    try:
        out.mkdir(parents=True, exist_ok=True)
        jsonio.write_csv(out / "aggregate.csv", SWEEP_HEADER, rows)
    except OSError as err:
        raise _CliFailure(EXIT_IO, f"cannot write aggregate: {err}")
    if not args.quiet:
        print(f"{len(rows) - failures}/{len(rows)} runs succeeded")
    if failures == len(rows):
        raise _CliFailure(EXIT_SOLVER, "all sweep runs failed")
    return 0


def cmd_print_config(args):
    jsonio.write_json(args.out, config_to_dict(reference_config()))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="dynsfm",
        description="Affine structure-from-motion with inertial "
                    "measurements: simulation, closed-form solver, "
                    "dead-reckoning baseline and evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--quiet", action="store_true",
                       help="suppress the summary line")

    p = sub.add_parser("simulate", help="generate a dataset file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None,
                   help="override the config seed")
    common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("solve", help="reconstruct motion and structure")
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--options", default=None,
                   help="JSON file with solver options")
    common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("eval", help="compare a reconstruction to ground truth")
    p.add_argument("--recon", required=True)
    p.add_argument("--dataset", required=True)
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="run a seed/noise sweep")
    p.add_argument("--config", required=True)
    p.add_argument("--sweep", required=True, help="sweep spec JSON")
    p.add_argument("--out", required=True, help="output directory")
    common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("pipeline", help="simulate, solve and eval in one go")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    common(p)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("example-config", help="write the default config")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_print_config, quiet=True)
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except _CliFailure as err:
        print(f"error: {err}", file=sys.stderr)
        return err.code


if __name__ == "__main__":
    sys.exit(main())
