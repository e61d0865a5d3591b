"""Deterministic JSON/CSV serialization for datasets and results.

Floats are printed with 17 significant digits (lossless for IEEE-754
doubles), so identical inputs produce byte-identical files. Line endings
are LF everywhere.
"""

import json
import math

import numpy as np

from .errors import DimensionMismatch
from .simulate import (Dataset, MeasurementSet, NoiseSpec, Scene, Trajectory)
from .solver import Reconstruction, SolverOptions

SCHEMA_VERSION = 1


def _fmt_float(x):
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite float {x}")
    return format(x, ".17g")


def dumps(obj):
    """Serialize nested dict/list/scalar structures deterministically."""
    if isinstance(obj, dict):
        items = (f"{json.dumps(str(k))}:{dumps(v)}" for k, v in obj.items())
        return "{" + ",".join(items) + "}"
    if isinstance(obj, (list, tuple)):
        return "[" + ",".join(dumps(v) for v in obj) + "]"
    if isinstance(obj, np.ndarray):
        return dumps(obj.tolist())
    if isinstance(obj, bool):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if obj is None:
        return "null"
    if isinstance(obj, str):
        return json.dumps(obj)
    raise TypeError(f"cannot serialize {type(obj)!r}")


def write_json(path, obj):
    with open(path, "w", newline="") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)


def write_csv(path, header, rows):
    """CSV with a header row, 17-significant-digit floats, LF endings."""
    def cell(v):
        if isinstance(v, (float, np.floating)):
            return _fmt_float(float(v))
        return str(v)

    with open(path, "w", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(cell(v) for v in row) + "\n")


def noise_spec_to_dict(spec):
    return {"gyro_std": float(spec.gyro_std),
            "accel_std": float(spec.accel_std),
            "image_rel_std": float(spec.image_rel_std),
            "seed": int(spec.seed)}


def noise_spec_from_dict(d):
    return NoiseSpec(gyro_std=d["gyro_std"], accel_std=d["accel_std"],
                     image_rel_std=d["image_rel_std"], seed=d["seed"])


def dataset_to_dict(ds):
    traj = ds.trajectory
    frames = []
    for f in range(traj.n_frames):
        frames.append({
            "R": traj.rotations[f].reshape(9).tolist(),
            "T": traj.T[f].tolist(),
            "dT": traj.dT[f].tolist(),
            "ddT": traj.ddT[f].tolist(),
            "omega": traj.omega[f].tolist(),
            "domega": traj.domega[f].tolist()})
    meas = ds.measurements
    mdict = {
        "tracks": meas.tracks.tolist(),
        "flows": meas.flows.tolist(),
        "double_flows": meas.double_flows.tolist(),
        "gyro": meas.gyro.tolist(),
        "accel": meas.accel.tolist()}
    if meas.torque is not None:
        mdict["torque"] = meas.torque.tolist()
        mdict["inertia"] = np.asarray(meas.inertia).reshape(9).tolist()
    return {"schema_version": SCHEMA_VERSION,
            "t_s": float(ds.t_s),
            "gravity": ds.gravity.tolist(),
            "scene": ds.scene.points.tolist(),
            "trajectory": frames,
            "measurements": mdict,
            "noise_spec": noise_spec_to_dict(ds.noise_spec),
            "seed": int(ds.seed)}


def dataset_from_dict(d):
    if d.get("schema_version") != SCHEMA_VERSION:
        raise DimensionMismatch(
            f"unsupported dataset schema_version {d.get('schema_version')!r}")
    frames = d["trajectory"]
    traj = Trajectory(
        t_s=d["t_s"],
        rotations=np.array([np.reshape(fr["R"], (3, 3)) for fr in frames]),
        T=np.array([fr["T"] for fr in frames]),
        dT=np.array([fr["dT"] for fr in frames]),
        ddT=np.array([fr["ddT"] for fr in frames]),
        omega=np.array([fr["omega"] for fr in frames]),
        domega=np.array([fr["domega"] for fr in frames]))
    m = d["measurements"]
    meas = MeasurementSet(
        t_s=d["t_s"],
        tracks=np.asarray(m["tracks"], dtype=float),
        flows=np.asarray(m["flows"], dtype=float),
        double_flows=np.asarray(m["double_flows"], dtype=float),
        gyro=np.asarray(m["gyro"], dtype=float),
        accel=np.asarray(m["accel"], dtype=float),
        torque=(np.asarray(m["torque"], dtype=float)
                if "torque" in m else None),
        inertia=(np.reshape(np.asarray(m["inertia"], dtype=float), (3, 3))
                 if "inertia" in m else None))
    return Dataset(t_s=d["t_s"],
                   gravity=np.asarray(d["gravity"], dtype=float),
                   scene=Scene(points=np.asarray(d["scene"], dtype=float)),
                   trajectory=traj,
                   measurements=meas,
                   noise_spec=noise_spec_from_dict(d["noise_spec"]),
                   seed=d["seed"])


def options_to_dict(opts):
    return {"lambda_R": float(opts.lambda_R),
            "lambda_tau": float(opts.lambda_tau),
            "lambda_nu": float(opts.lambda_nu),
            "omega_dot_mode": opts.omega_dot_mode,
            "omega_dot_filter": [int(v) for v in opts.omega_dot_filter],
            "reg_filter": [int(v) for v in opts.reg_filter],
            "reflection_resolution": opts.reflection_resolution}


def options_from_dict(d):
    opts = SolverOptions(
        lambda_R=d.get("lambda_R", 1.0),
        lambda_tau=d.get("lambda_tau", 1.0),
        lambda_nu=d.get("lambda_nu", 1.0),
        omega_dot_mode=d.get("omega_dot_mode", "auto"),
        omega_dot_filter=tuple(d.get("omega_dot_filter", (2, 5))),
        reg_filter=tuple(d.get("reg_filter", (1, 3))),
        reflection_resolution=d.get("reflection_resolution", "auto"))
    opts.validate()
    return opts


def reconstruction_to_dict(recon):
    return {
        "rotations": [R.reshape(9).tolist() for R in recon.rotations],
        "tau": recon.tau.tolist(),
        "nu": recon.nu.tolist(),
        "gravity": recon.gravity.tolist(),
        "structure": recon.structure.tolist(),
        "residuals": {k: float(v) for k, v in recon.residuals.items()},
        "options": options_to_dict(recon.options)}


def reconstruction_from_dict(d):
    return Reconstruction(
        rotations=np.array([np.reshape(r, (3, 3)) for r in d["rotations"]]),
        tau=np.asarray(d["tau"], dtype=float),
        nu=np.asarray(d["nu"], dtype=float),
        gravity=np.asarray(d["gravity"], dtype=float),
        structure=np.asarray(d["structure"], dtype=float),
        residuals=dict(d["residuals"]),
        options=options_from_dict(d["options"]))


def report_to_dict(report, extra=None):
    d = {"rot_err": report.rot_err.tolist(),
         "rot_err_mean": report.rot_err_mean,
         "trans_rmse": float(report.trans_rmse),
         "struct_rmse": float(report.struct_rmse),
         "gravity_angle_err": float(report.gravity_angle_err),
         "per_axis_err": report.per_axis_err.tolist()}
    if extra:
        d.update(extra)
    return d
