"""Scene, trajectory and sensor simulation.

Ground truth is a rigid body carrying a camera and an IMU whose frames
coincide. Translations are sums of random-phase sinusoids with closed-form
derivatives; the rotation is the exponential of a sinusoidal axis-angle
curve, with the body angular velocity obtained through the right Jacobian
and its rate by complex-step differentiation (exact to machine precision).

The image model is affine: a projector that drops the third coordinate.
Tracks, flows (first derivatives) and double flows (second derivatives)
are emitted in closed form so that the stacked measurement matrix is
exactly rank four in the noiseless case.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from . import so3
from .errors import (BadSampling, DegenerateScene, LengthMismatch,
                     SingularInertia, TooFewPoints)

DEFAULT_GRAVITY = np.array([0.0, 0.0, -9.8])
DEFAULT_INERTIA = np.diag([0.01, 0.01, 0.02])

# Projector of the affine camera model: drops the depth coordinate.
PROJECTOR = np.array([[1.0, 0.0, 0.0],
                      [0.0, 1.0, 0.0]])

# Sinusoid frequency bands (Hz) for the default trajectory family, chosen
# so that 5 s at 30 Hz keeps finite-difference consistency errors well
# below the noiseless recovery tolerances while still exciting all axes.
TRANS_FREQ_BAND = (0.04, 0.10)
ROT_FREQ_BAND = (0.08, 0.35)


@dataclass
class Scene:
    """Static landmarks in the spatial frame, centroid exactly zero."""
    points: np.ndarray  # (P, 3) meters

    @property
    def n_points(self):
        return self.points.shape[0]


@dataclass
class Trajectory:
    """Sampled rigid-body states with analytic derivatives.

    rotations map body to spatial coordinates; omega/domega are the body
    angular velocity and its rate.
    """
    t_s: float
    rotations: np.ndarray  # (F, 3, 3)
    T: np.ndarray          # (F, 3) position, spatial frame (m)
    dT: np.ndarray         # (F, 3) velocity (m/s)
    ddT: np.ndarray        # (F, 3) acceleration (m/s^2)
    omega: np.ndarray      # (F, 3) body angular velocity (rad/s)
    domega: np.ndarray     # (F, 3) body angular acceleration (rad/s^2)

    @property
    def n_frames(self):
        return self.rotations.shape[0]

    @property
    def peak_speed(self):
        return float(np.linalg.norm(self.dT, axis=1).max())

    @property
    def peak_rotation(self):
        return max(so3.rotation_angle(R) for R in self.rotations)


@dataclass
class NoiseSpec:
    """Gaussian measurement-noise levels; all zero means no corruption."""
    gyro_std: float = 0.0        # rad/s
    accel_std: float = 0.0       # m/s^2
    image_rel_std: float = 0.0   # fraction of the peak track coordinate
    seed: int = 0

    def scaled(self, factor):
        return NoiseSpec(self.gyro_std * factor, self.accel_std * factor,
                         self.image_rel_std * factor, self.seed)


@dataclass
class MeasurementSet:
    """Per-frame camera and IMU observations.

    Torque and inertia are carried along when the dataset supports the
    Euler-equation angular-acceleration mode; they are control inputs,
    known exactly, and are never corrupted by add_noise.
    """
    t_s: float
    tracks: np.ndarray        # (F, P, 2)
    flows: np.ndarray         # (F, P, 2) per second
    double_flows: np.ndarray  # (F, P, 2) per second^2
    gyro: np.ndarray          # (F, 3)
    accel: np.ndarray         # (F, 3)
    torque: np.ndarray = None   # (F, 3) optional
    inertia: np.ndarray = None  # (3, 3) optional

    @property
    def n_frames(self):
        return self.tracks.shape[0]

    @property
    def n_points(self):
        return self.tracks.shape[1]


@dataclass
class Dataset:
    """Full simulation artifact: ground truth plus measurements."""
    t_s: float
    gravity: np.ndarray
    scene: Scene
    trajectory: Trajectory
    measurements: MeasurementSet
    noise_spec: NoiseSpec
    seed: int


def generate_scene(n_points, extent, seed):
    """Uniform points in a cube of side `extent`, re-centred to zero.

    The draw is retried (continuing the same generator) up to 10 times if
    the points come out nearly coplanar.
    """
    if n_points < 4:
        raise TooFewPoints(f"need at least 4 points, got {n_points}")
    if extent <= 0:
        raise DegenerateScene(f"extent must be positive, got {extent}")
    rng = np.random.default_rng(seed)
    for _ in range(10):
        pts = rng.uniform(-extent / 2.0, extent / 2.0, size=(n_points, 3))
        pts = pts - pts.mean(axis=0)
        s = np.linalg.svd(pts, compute_uv=False)
        if s[2] > 1e-6 * s[0]:
            return Scene(points=pts)
    raise DegenerateScene("could not draw a non-coplanar scene in 10 tries")


def _sum_of_sinusoids(rng, n_terms, freq_band):
    """Random per-axis sinusoid parameters: (amplitudes, freqs, phases)."""
    amps = [rng.uniform(0.3, 1.0, n) for n in n_terms]
    freqs = [rng.uniform(freq_band[0], freq_band[1], n) for n in n_terms]
    phases = [rng.uniform(0.0, 2.0 * np.pi, n) for n in n_terms]
    return amps, freqs, phases


def _eval_sinusoids(t, amps, freqs, phases, deriv=0):
    """d-th time derivative of the per-axis sinusoid sums at times t."""
    t = np.asarray(t)
    out = np.zeros(t.shape + (3,), dtype=np.result_type(t, float))
    for axis in range(3):
        w = 2.0 * np.pi * np.asarray(freqs[axis])
        arg = w * t[..., None] + phases[axis] + deriv * np.pi / 2.0
        out[..., axis] = (amps[axis] * w ** deriv * np.sin(arg)).sum(-1)
    return out


def generate_trajectory(duration, t_s, amp_trans, amp_rot, seed,
                        trans_freq_band=TRANS_FREQ_BAND,
                        rot_freq_band=ROT_FREQ_BAND):
    """Smooth random trajectory with exact analytic derivatives.

    Each translation axis is a sum of 2-4 random-phase sinusoids scaled so
    the per-axis peak displacement equals amp_trans; the rotation is
    exp_so3 of a sinusoidal axis-angle curve scaled so the peak rotation
    angle equals amp_rot. Peak speed is bounded by construction
    (amp_trans times the largest angular frequency) and reported via
    Trajectory.peak_speed.
    """
    n_frames = int(round(duration / t_s))
    if n_frames < 3:
        raise BadSampling(
            f"duration must cover at least 3 samples, got {duration}/{t_s}")
    rng = np.random.default_rng(seed)
    nT = rng.integers(2, 5, size=3)
    aT, fT, pT = _sum_of_sinusoids(rng, nT, trans_freq_band)
    aR, fR, pR = _sum_of_sinusoids(rng, [2, 2, 2], rot_freq_band)

    grid = np.arange(n_frames) * t_s
    fine = np.linspace(0.0, (n_frames - 1) * t_s, 4096)

    peak = np.abs(_eval_sinusoids(fine, aT, fT, pT)).max(axis=0)
    for axis in range(3):
        scale = amp_trans / peak[axis] if peak[axis] > 0 else 0.0
        aT[axis] = aT[axis] * scale
    peak_rot = np.linalg.norm(_eval_sinusoids(fine, aR, fR, pR), axis=-1).max()
    rot_scale = amp_rot / peak_rot if peak_rot > 0 else 0.0
    aR = [a * rot_scale for a in aR]

    T = _eval_sinusoids(grid, aT, fT, pT, deriv=0)
    dT = _eval_sinusoids(grid, aT, fT, pT, deriv=1)
    ddT = _eval_sinusoids(grid, aT, fT, pT, deriv=2)
    theta = _eval_sinusoids(grid, aR, fR, pR, deriv=0)
    dtheta = _eval_sinusoids(grid, aR, fR, pR, deriv=1)
    rotations = np.array([so3.exp_so3(theta[f]) for f in range(n_frames)])
    omega = np.array([so3.right_jacobian(theta[f]) @ dtheta[f]
                      for f in range(n_frames)])

    def omega_at(t):
        th = _eval_sinusoids(t, aR, fR, pR, deriv=0)
        dth = _eval_sinusoids(t, aR, fR, pR, deriv=1)
        return so3.right_jacobian(th) @ dth

    # complex step: omega(t) is analytic in t, so Im(omega(t + ih))/h is the
    # derivative to machine precision
    h = 1e-30
    domega = np.array([np.imag(omega_at(np.asarray(t + 1j * h))) / h
                       for t in grid])
    return Trajectory(t_s=t_s, rotations=rotations, T=T, dT=dT, ddT=ddT,
                      omega=omega, domega=domega)


def body_translation(trajectory):
    """tau_f = R_f^T T_f: translation expressed in the body frame."""
    return np.einsum("fij,fi->fj", trajectory.rotations, trajectory.T)


def body_velocity(trajectory):
    """nu_f = R_f^T dT_f: linear velocity expressed in the body frame."""
    return np.einsum("fij,fi->fj", trajectory.rotations, trajectory.dT)


def synthesize_imu(trajectory, gravity=DEFAULT_GRAVITY):
    """Ideal gyro and accelerometer readings.

    The gyro measures the body angular velocity exactly; the accelerometer
    measures the specific force R_f^T (ddT_f + g_s).
    """
    gyro = trajectory.omega.copy()
    accel = np.einsum("fij,fi->fj", trajectory.rotations,
                      trajectory.ddT + gravity)
    return gyro, accel


def synthesize_images(trajectory, scene, gravity=DEFAULT_GRAVITY):
    """Affine tracks, flows and double flows for every frame and point.

    With tau = R^T T, nu = R^T dT and the accelerometer reading a_imu:
      x   = P (R^T X - tau)
      dx  = P (-hat(w) R^T X + hat(w) tau - nu)
      ddx = P ((hat(w)^2 - hat(dw)) (R^T X - tau) + 2 hat(w) nu
               - a_imu + R^T g)
    where P drops the third coordinate.
    """
    F = trajectory.n_frames
    P = scene.n_points
    X = scene.points
    tau = body_translation(trajectory)
    nu = body_velocity(trajectory)
    _, accel = synthesize_imu(trajectory, gravity)
    tracks = np.zeros((F, P, 2))
    flows = np.zeros((F, P, 2))
    dflows = np.zeros((F, P, 2))
    for f in range(F):
        R = trajectory.rotations[f]
        W1 = so3.hat(trajectory.omega[f])
        W2 = W1 @ W1 - so3.hat(trajectory.domega[f])
        RX = X @ R  # rows are R^T X_p
        tracks[f] = (RX - tau[f]) @ PROJECTOR.T
        flows[f] = (-(RX @ W1.T) + (W1 @ tau[f] - nu[f])) @ PROJECTOR.T
        dflows[f] = ((RX @ W2.T)
                     + (-W2 @ tau[f] + 2.0 * W1 @ nu[f]
                        - accel[f] + R.T @ gravity)) @ PROJECTOR.T
    return tracks, flows, dflows


def euler_omega_dot(inertia, torque, omega):
    """Angular acceleration from the rigid-body equation of motion:
    domega = J^-1 (torque - hat(omega) J omega)."""
    J = np.asarray(inertia, dtype=float)
    if J.shape != (3, 3) or np.linalg.norm(J - J.T) > 1e-9 * np.linalg.norm(J):
        raise SingularInertia("inertia must be a symmetric 3x3 matrix")
    if np.linalg.eigvalsh(J).min() <= 0:
        raise SingularInertia("inertia must be positive definite")
    omega = np.atleast_2d(np.asarray(omega, dtype=float))
    torque = np.atleast_2d(np.asarray(torque, dtype=float))
    if torque.shape != omega.shape:
        raise LengthMismatch("torque and omega series lengths differ")
    rhs = torque - np.cross(omega, omega @ J.T)
    return np.linalg.solve(J, rhs.T).T


def torque_for_trajectory(trajectory, inertia=DEFAULT_INERTIA):
    """Torque series realizing the trajectory's angular acceleration, so
    the Euler-equation mode reproduces domega exactly."""
    J = np.asarray(inertia, dtype=float)
    om, dom = trajectory.omega, trajectory.domega
    return dom @ J.T + np.cross(om, om @ J.T)


def add_noise(measurements, spec, flow_mode="analytic",
              flow_filters=None):
    """Corrupt a measurement set with i.i.d. Gaussian noise.

    Image noise has per-coordinate std image_rel_std times the largest
    clean track coordinate magnitude. In "analytic" mode the flows and
    double flows get independent noise scaled by 1/t_s and 1/t_s^2; in
    "numeric" mode they are recomputed by differentiating the noisy
    tracks with `flow_filters` (a pair of DerivFilter), which propagates
    the track noise through the filter taps.
    """
    rng = np.random.default_rng(spec.seed)
    t_s = measurements.t_s
    gyro = measurements.gyro + rng.normal(0.0, 1.0, measurements.gyro.shape) * spec.gyro_std
    accel = measurements.accel + rng.normal(0.0, 1.0, measurements.accel.shape) * spec.accel_std
    img_std = spec.image_rel_std * np.abs(measurements.tracks).max(initial=0.0)
    tracks = measurements.tracks + rng.normal(0.0, 1.0, measurements.tracks.shape) * img_std
    if flow_mode == "numeric":
        from .derivatives import differentiate_tracks, savgol_filter
        if flow_filters is None:
            flow_filters = (savgol_filter(2, 5, 1), savgol_filter(2, 5, 2))
        flows, dflows = differentiate_tracks(tracks, t_s, *flow_filters)
    elif flow_mode == "analytic":
        flows = measurements.flows + rng.normal(
            0.0, 1.0, measurements.flows.shape) * (img_std / t_s)
        dflows = measurements.double_flows + rng.normal(
            0.0, 1.0, measurements.double_flows.shape) * (img_std / t_s ** 2)
    else:
        raise ValueError(f"unknown flow mode {flow_mode!r}")
    return replace(measurements, tracks=tracks, flows=flows,
                   double_flows=dflows, gyro=gyro, accel=accel)


def simulate_dataset(duration, t_s, n_points, extent, amp_trans, amp_rot,
                     seed, noise=None, gravity=DEFAULT_GRAVITY,
                     flow_mode="analytic", flow_filters=None,
                     inertia=DEFAULT_INERTIA):
    """Generate a complete dataset: scene, trajectory, clean measurements
    with consistent torque, then optional noise corruption."""
    noise = noise if noise is not None else NoiseSpec()
    scene = generate_scene(n_points, extent, seed)
    trajectory = generate_trajectory(duration, t_s, amp_trans, amp_rot,
                                     seed + 1)
    gyro, accel = synthesize_imu(trajectory, gravity)
    tracks, flows, dflows = synthesize_images(trajectory, scene, gravity)
    torque = torque_for_trajectory(trajectory, inertia)
    clean = MeasurementSet(t_s=t_s, tracks=tracks, flows=flows,
                           double_flows=dflows, gyro=gyro, accel=accel,
                           torque=torque, inertia=np.asarray(inertia, float))
    measurements = add_noise(clean, noise, flow_mode=flow_mode,
                             flow_filters=flow_filters)
    return Dataset(t_s=t_s, gravity=np.asarray(gravity, dtype=float),
                   scene=scene, trajectory=trajectory,
                   measurements=measurements, noise_spec=noise, seed=seed)
