"""Closed-form factorization solver for affine structure from motion with
inertial measurements.

The stacked measurement matrix W (tracks, flows, double flows) admits an
exact decomposition W = C M S + m 1^T where C depends only on the gyro
readings and their rates, M stacks the transposed rotations, S holds the
structure and m the translation-dependent terms. Recovery proceeds in five
closed-form stages: rank-4 factorization, similarity fix, centering,
rotation recovery with metric upgrade, and a final linear solve for the
body-frame translations, velocities and the gravity vector.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import so3
from .derivatives import omega_dot_series, savgol_filter
from .errors import (DynSfmError, IllConditionedWarning, IndefiniteQ,
                     LengthMismatch, RankDeficient, SingularTransform,
                     TooFewFramesOrPoints)
from .simulate import PROJECTOR

COND_LIMIT = 1e12  # normal-equation condition number that triggers a warning


@dataclass
class SolverOptions:
    """Tunables of the closed-form solver.

    omega_dot_mode "auto" uses the Euler equation of motion when torque
    and inertia are present in the measurement set and falls back to
    numerical differentiation of the gyro otherwise.
    """
    lambda_R: float = 1.0
    lambda_tau: float = 1.0
    lambda_nu: float = 1.0
    omega_dot_mode: str = "auto"   # auto | euler | zero | numeric
    omega_dot_filter: tuple = (2, 5)
    reg_filter: tuple = (1, 3)
    reflection_resolution: str = "auto"  # auto | positive | negative

    def validate(self):
        if min(self.lambda_R, self.lambda_tau, self.lambda_nu) < 0:
            raise ValueError("regularization weights must be nonnegative")
        if self.omega_dot_mode not in ("auto", "euler", "zero", "numeric"):
            raise ValueError(f"bad omega_dot_mode {self.omega_dot_mode!r}")
        if self.reflection_resolution not in ("auto", "positive", "negative"):
            raise ValueError(
                f"bad reflection_resolution {self.reflection_resolution!r}")


@dataclass
class Reconstruction:
    """Solver output: motion, structure, gravity and diagnostics."""
    rotations: np.ndarray   # (F, 3, 3) estimated R_f
    tau: np.ndarray         # (F, 3) body-frame translations (m)
    nu: np.ndarray          # (F, 3) body-frame velocities (m/s)
    gravity: np.ndarray     # (3,) spatial-frame gravity estimate (m/s^2)
    structure: np.ndarray   # (P, 3)
    residuals: dict = field(default_factory=dict)
    options: SolverOptions = field(default_factory=SolverOptions)

    @property
    def positions(self):
        """Spatial-frame camera positions T_f = R_f tau_f."""
        return np.einsum("fij,fj->fi", self.rotations, self.tau)


def lstsq_checked(A, b, label="lstsq"):
    """Least squares with conditioning and normal-equation diagnostics.

    Returns (x, info) where info holds the normal-equation condition
    number and the relative normal-equation residual. A condition number
    above COND_LIMIT raises an IllConditionedWarning (reported, not fatal).
    """
    x, _, _, sv = np.linalg.lstsq(A, b, rcond=None)
    cond = float((sv[0] / sv[-1]) ** 2) if sv[-1] > 0 else np.inf
    if cond > COND_LIMIT:
        warnings.warn(f"{label}: normal-equation condition number {cond:.2e}",
                      IllConditionedWarning)
    At_res = A.T @ (A @ x - b)
    denom = np.linalg.norm(A.T @ b)
    normal_ratio = float(np.linalg.norm(At_res) / denom) if denom > 0 else 0.0
    return x, {"cond": cond, "normal_ratio": normal_ratio}


def assemble_W(measurements):
    """Stack tracks, flows and double flows into the 6F x P data matrix.

    Row layout: 2F track rows (frame-major), then 2F flow rows, then 2F
    double-flow rows; columns follow the point index.
    """
    F, P = measurements.n_frames, measurements.n_points
    if F < 3 or P < 4:
        raise TooFewFramesOrPoints(f"need F >= 3 and P >= 4, got F={F} P={P}")
    bands = (measurements.tracks, measurements.flows,
             measurements.double_flows)
    W = np.zeros((6 * F, P))
    for band, data in enumerate(bands):
        # (F, P, 2) -> rows (2F, P) with the two image coordinates adjacent
        W[2 * F * band:2 * F * (band + 1)] = (
            data.transpose(0, 2, 1).reshape(2 * F, P))
    return W


def coefficient_blocks(omega, domega):
    """Per-frame 2x3 coefficient blocks (order 0, 1, 2) of the C matrix."""
    W1 = so3.hat(omega)
    W2 = W1 @ W1 - so3.hat(domega)
    return PROJECTOR, -PROJECTOR @ W1, PROJECTOR @ W2


def assemble_C(omega, domega):
    """Coefficient matrix C (6F x 3F), fully determined by the gyro series
    and its rate: block row (order o, frame f) holds the order-o block at
    block column f."""
    omega = np.asarray(omega, dtype=float)
    domega = np.asarray(domega, dtype=float)
    if omega.shape != domega.shape:
        raise LengthMismatch("omega and domega lengths differ")
    F = omega.shape[0]
    C = np.zeros((6 * F, 3 * F))
    for f in range(F):
        b0, b1, b2 = coefficient_blocks(omega[f], domega[f])
        C[2 * f:2 * f + 2, 3 * f:3 * f + 3] = b0
        C[2 * F + 2 * f:2 * F + 2 * f + 2, 3 * f:3 * f + 3] = b1
        C[4 * F + 2 * f:4 * F + 2 * f + 2, 3 * f:3 * f + 3] = b2
    return C


def translation_vector(omega, domega, tau, nu, accel, rotations, gravity):
    """Ground-truth translation vector m of the decomposition (6F,).

    Used by tests and by the factorization-identity oracle; the solver
    itself recovers m from the data.
    """
    F = omega.shape[0]
    m = np.zeros(6 * F)
    for f in range(F):
        W1 = so3.hat(omega[f])
        W2 = W1 @ W1 - so3.hat(domega[f])
        m[2 * f:2 * f + 2] = -PROJECTOR @ tau[f]
        m[2 * F + 2 * f:2 * F + 2 * f + 2] = PROJECTOR @ (W1 @ tau[f] - nu[f])
        m[4 * F + 2 * f:4 * F + 2 * f + 2] = PROJECTOR @ (
            -W2 @ tau[f] + 2.0 * W1 @ nu[f] - accel[f]
            + rotations[f].T @ gravity)
    return m


def factor_rank4(W):
    """Rank-four factorization W ~ Mt @ St via truncated SVD.

    Uses the deterministic sign convention from the so3 module. Returns
    (Mt, St, sigma_ratio) where sigma_ratio = s5/s4 measures how well the
    data fits the rank-4 model.
    """
    if min(W.shape) < 4:
        raise TooFewFramesOrPoints("W must have at least 4 rows and columns")
    U, s, Vt = so3.deterministic_svd(W)
    rank_ratio = s[3] / s[0] if s[0] > 0 else 0.0
    if rank_ratio < 1e-10:
        raise RankDeficient(f"sigma4/sigma1 = {rank_ratio:.2e} < 1e-10")
    sigma_ratio = float(s[4] / s[3]) if len(s) > 4 else 0.0
    return U[:, :4] * s[:4], Vt[:4], sigma_ratio


def fix_similarity(Mt, St):
    """Normalize the factorization so the last row of St is ~ 1^T.

    Solves k^T St = 1^T in least squares and applies the similarity
    transform K = [[I, 0], [k^T]] (and its inverse) to the factors.
    """
    P = St.shape[1]
    k, _ = lstsq_checked(St.T, np.ones(P), "fix_similarity")
    if abs(k[3]) < 1e-12:
        raise SingularTransform("similarity transform is singular")
    K = np.eye(4)
    K[3] = k
    return Mt @ np.linalg.inv(K), K @ St


def center_structure(Mt, St):
    """Shift the reconstruction so the structure centroid is exactly zero.

    The shift c solves mean(St[:3] - c * St[3]) = 0 per row, which reduces
    to the plain row mean when the last row of St is exactly ones. Returns
    (Mt'', St'', m_hat) with m_hat the fourth column of Mt''.
    """
    c = St[:3].mean(axis=1) / St[3].mean()
    K = np.eye(4)
    K[:3, 3] = -c
    Kinv = np.eye(4)
    Kinv[:3, 3] = c
    Mt2 = Mt @ Kinv
    St2 = K @ St
    return Mt2, St2, Mt2[:, 3].copy()


def rotation_regularizer(omega, t_s):
    """Block-banded operator penalizing deviation from gyro propagation.

    Block row f carries -exp_so3(t_s * w)^T at block column f and the
    identity at block column f + 1, acting on the stacked R_f^T blocks.
    The propagation rate w is the midpoint gyro average over the interval
    [f, f+1], the second-order-accurate discretization of the underlying
    continuous constraint (per-sample rates leave an O(t_s^2 * domega)
    inconsistency that dominates the noiseless error budget).
    """
    F = omega.shape[0]
    CR = np.zeros((3 * max(F - 1, 0), 3 * F))
    for f in range(F - 1):
        w = 0.5 * (omega[f] + omega[f + 1])
        CR[3 * f:3 * f + 3, 3 * f:3 * f + 3] = -so3.exp_so3(t_s * w).T
        CR[3 * f:3 * f + 3, 3 * f + 3:3 * f + 6] = np.eye(3)
    return CR


def recover_rotation_blocks(Mt_cols, C, omega, t_s, lambda_R):
    """Solve for the 3F x 3 stacked rotation blocks (up to a 3x3 gauge).

    Minimizes |Mt_cols - C M''|^2 + lambda_R |C_R M''|^2 as one linear
    least-squares problem over all blocks. Returns (M'', info).
    """
    F = omega.shape[0]
    if Mt_cols.shape != (6 * F, 3):
        raise LengthMismatch(
            f"expected {(6 * F, 3)} motion columns, got {Mt_cols.shape}")
    CR = rotation_regularizer(omega, t_s)
    A = np.vstack([C, np.sqrt(lambda_R) * CR])
    B = np.vstack([Mt_cols, np.zeros((CR.shape[0], 3))])
    M2, info = lstsq_checked(A, B, "recover_rotation_blocks")
    info["residual"] = float(np.linalg.norm(Mt_cols - C @ M2))
    return M2, info


def metric_upgrade(M2):
    """Symmetric 3x3 upgrade K with M''_f K orthonormal in least squares.

    Fits symmetric Q to M''_f Q M''_f^T = I over all frames (6 unknowns),
    clamps the eigenvalues at 1e-10 of the largest, and returns the
    symmetric square root (deterministic: invariant to eigenvector sign
    choices) together with the fit residual. Raises IndefiniteQ when more
    than one eigenvalue needs clamping.
    """
    F = M2.shape[0] // 3
    pairs = [(0, 0), (0, 1), (0, 2), (1, 1), (1, 2), (2, 2)]
    A = np.zeros((6 * F, 6))
    b = np.zeros(6 * F)
    for f in range(F):
        Mf = M2[3 * f:3 * f + 3]
        for e, (i, j) in enumerate(pairs):
            mi, mj = Mf[i], Mf[j]
            A[6 * f + e] = [
                mi[0] * mj[0],
                mi[0] * mj[1] + mi[1] * mj[0],
                mi[0] * mj[2] + mi[2] * mj[0],
                mi[1] * mj[1],
                mi[1] * mj[2] + mi[2] * mj[1],
                mi[2] * mj[2]]
            b[6 * f + e] = 1.0 if i == j else 0.0
    q, _ = lstsq_checked(A, b, "metric_upgrade")
    Q = np.array([[q[0], q[1], q[2]],
                  [q[1], q[3], q[4]],
                  [q[2], q[4], q[5]]])
    w, V = np.linalg.eigh(Q)
    floor = 1e-10 * w.max()
    clamped = int((w < floor).sum())
    if clamped > 1:
        raise IndefiniteQ(f"{clamped} eigenvalues of Q are not positive")
    w = np.clip(w, floor, None)
    K = V @ np.diag(np.sqrt(w)) @ V.T
    fit = max(np.linalg.norm(M2[3 * f:3 * f + 3] @ Q @ M2[3 * f:3 * f + 3].T
                             - np.eye(3)) for f in range(F))
    return K, fit


def extract_rotations_structure(M2, K_upg, St_rows, reflection="auto",
                                W=None, C=None, m_hat=None):
    """Project the upgraded motion blocks to rotations and undo the
    upgrade on the structure.

    The metric upgrade leaves a reflection ambiguity (K and K diag(1,1,-1)
    produce the same Q). Mode "auto" keeps the candidate whose projected
    rotations reproduce the data better, measured by
    |W - (C stack(R^T) S + m 1^T)|; "positive"/"negative" select the
    unflipped/flipped candidate directly.
    """
    F = M2.shape[0] // 3
    if reflection == "auto" and (W is None or C is None or m_hat is None):
        raise ValueError("reflection='auto' needs W, C and m_hat to score "
                         "the two candidates")
    flips = {"positive": [np.eye(3)],
             "negative": [np.diag([1.0, 1.0, -1.0])],
             "auto": [np.eye(3), np.diag([1.0, 1.0, -1.0])]}[reflection]
    best = None
    for flip in flips:
        K = K_upg @ flip
        M_hat = M2 @ K
        rotations = np.array([so3.project_to_so3(M_hat[3 * f:3 * f + 3]).T
                              for f in range(F)])
        structure = np.linalg.solve(K, St_rows).T
        if len(flips) == 1:
            return rotations, structure
        M_proj = rotations.transpose(0, 2, 1).reshape(3 * F, 3)
        resid = np.linalg.norm(
            W - (C @ M_proj @ structure.T + np.outer(m_hat, np.ones(W.shape[1]))))
        if best is None or resid < best[0]:
            best = (resid, rotations, structure)
    return best[1], best[2]


def translation_system(m_hat, rotations, omega, domega, accel, t_s,
                       lambda_tau, lambda_nu, reg_filter=None,
                       include_order0=True):
    """Assemble the (A, b) of the translation/velocity/gravity solve.

    Unknown ordering: x = stack(tau_1..tau_F, nu_1..nu_F, g). The
    include_order0 switch exists for observability probes: without the
    order-0 rows, gravity and a constant translation offset become jointly
    near-unobservable.
    """
    F = len(rotations)
    if not (len(omega) == len(domega) == len(accel) == F):
        raise LengthMismatch("series lengths differ")
    if reg_filter is None:
        reg_filter = savgol_filter(1, 3, 1)
    win, half = reg_filter.window, reg_filter.window // 2
    taps = reg_filter.taps / t_s
    n_centers = max(F - win + 1, 0)
    n = 6 * F + 3
    n_data = 6 * F if include_order0 else 4 * F
    A = np.zeros((n_data + 6 * n_centers, n))
    b = np.zeros(n_data + 6 * n_centers)
    Pi = PROJECTOR

    def tau_cols(f):
        return slice(3 * f, 3 * f + 3)

    def nu_cols(f):
        return slice(3 * F + 3 * f, 3 * F + 3 * f + 3)

    g_cols = slice(6 * F, 6 * F + 3)
    skip = 0 if include_order0 else 2 * F
    for f in range(F):
        W1 = so3.hat(omega[f])
        W2 = W1 @ W1 - so3.hat(domega[f])
        if include_order0:
            r0 = slice(2 * f, 2 * f + 2)
            A[r0, tau_cols(f)] = -Pi
            b[r0] = m_hat[2 * f:2 * f + 2]
        r1 = slice(2 * F + 2 * f - skip, 2 * F + 2 * f + 2 - skip)
        A[r1, tau_cols(f)] = Pi @ W1
        A[r1, nu_cols(f)] = -Pi
        b[r1] = m_hat[2 * F + 2 * f:2 * F + 2 * f + 2]
        r2 = slice(4 * F + 2 * f - skip, 4 * F + 2 * f + 2 - skip)
        A[r2, tau_cols(f)] = -Pi @ W2
        A[r2, nu_cols(f)] = 2.0 * Pi @ W1
        A[r2, g_cols] = Pi @ rotations[f].T
        b[r2] = m_hat[4 * F + 2 * f:4 * F + 2 * f + 2] + Pi @ accel[f]
    row = n_data
    st, sn = np.sqrt(lambda_tau), np.sqrt(lambda_nu)
    for center in range(half, F - half):
        rt = slice(row, row + 3)
        rn = slice(row + 3, row + 6)
        for k in range(win):
            f = center - half + k
            A[rt, tau_cols(f)] += st * taps[k] * rotations[f]
            A[rn, nu_cols(f)] += sn * taps[k] * rotations[f]
        A[rt, nu_cols(center)] += -st * rotations[center]
        A[rn, g_cols] += sn * np.eye(3)
        b[rn] = sn * rotations[center] @ accel[center]
        row += 6
    return A, b


def recover_translations(m_hat, rotations, omega, domega, accel, t_s,
                         lambda_tau, lambda_nu, reg_filter=None):
    """Linear solve for body translations, velocities and gravity.

    Data rows restate the three bands of the translation vector m with
    the accelerometer term moved to the right-hand side. Regularizer rows
    tie consecutive samples through the derivative filter, written in the
    spatial frame via the estimated rotations (where the derivative
    constraints are free of angular-velocity coupling):

        D(R tau)_f - R_f nu_f          = 0
        D(R nu)_f + g                  = R_f a_imu_f

    with D the filter derivative. Returns (tau, nu, gravity, info).
    """
    F = len(rotations)
    A, b = translation_system(m_hat, rotations, omega, domega, accel, t_s,
                              lambda_tau, lambda_nu, reg_filter)
    x, info = lstsq_checked(A, b, "recover_translations")
    info["residual"] = float(np.linalg.norm(A @ x - b))
    tau = x[:3 * F].reshape(F, 3)
    nu = x[3 * F:6 * F].reshape(F, 3)
    gravity = x[6 * F:]
    return tau, nu, gravity, info


def _omega_dot_for(measurements, options):
    mode = options.omega_dot_mode
    if mode == "auto":
        mode = "euler" if measurements.torque is not None else "numeric"
    if mode == "euler":
        return omega_dot_series(measurements.gyro, "euler", measurements.t_s,
                                inertia=measurements.inertia,
                                torque=measurements.torque)
    if mode == "numeric":
        filt = savgol_filter(options.omega_dot_filter[0],
                             options.omega_dot_filter[1], 1)
        return omega_dot_series(measurements.gyro, "numeric",
                                measurements.t_s, filt=filt)
    return omega_dot_series(measurements.gyro, "zero", measurements.t_s)


def reconstruct(measurements, options=None):
    """Run the full five-stage closed-form recovery on a measurement set.

    Any stage failure is re-raised as the same error type with the stage
    name prefixed to the message.
    """
    options = options if options is not None else SolverOptions()
    options.validate()
    residuals = {}
    stage = "assemble_W"
    try:
        W = assemble_W(measurements)
        stage = "omega_dot"
        omega = measurements.gyro
        domega = _omega_dot_for(measurements, options)
        stage = "assemble_C"
        C = assemble_C(omega, domega)
        stage = "factor_rank4"
        Mt, St, sigma_ratio = factor_rank4(W)
        residuals["sigma_ratio"] = sigma_ratio
        stage = "fix_similarity"
        Mt, St = fix_similarity(Mt, St)
        stage = "center_structure"
        Mt, St, m_hat = center_structure(Mt, St)
        stage = "recover_rotation_blocks"
        M2, rot_info = recover_rotation_blocks(
            Mt[:, :3], C, omega, measurements.t_s, options.lambda_R)
        residuals["rotation_lsq"] = rot_info["residual"]
        residuals["rotation_cond"] = rot_info["cond"]
        residuals["rotation_normal_ratio"] = rot_info["normal_ratio"]
        stage = "metric_upgrade"
        K_upg, q_fit = metric_upgrade(M2)
        residuals["metric_upgrade_fit"] = q_fit
        stage = "extract_rotations_structure"
        rotations, structure = extract_rotations_structure(
            M2, K_upg, St[:3], reflection=options.reflection_resolution,
            W=W, C=C, m_hat=m_hat)
        stage = "recover_translations"
        reg = savgol_filter(options.reg_filter[0], options.reg_filter[1], 1)
        tau, nu, gravity, tr_info = recover_translations(
            m_hat, rotations, omega, domega, measurements.accel,
            measurements.t_s, options.lambda_tau, options.lambda_nu, reg)
        residuals["translation_lsq"] = tr_info["residual"]
        residuals["translation_cond"] = tr_info["cond"]
        residuals["translation_normal_ratio"] = tr_info["normal_ratio"]
    except DynSfmError as err:
        raise type(err)(f"[{stage}] {err}") from err
    return Reconstruction(rotations=rotations, tau=tau, nu=nu,
                          gravity=gravity, structure=structure,
                          residuals=residuals, options=options)
