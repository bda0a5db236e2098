"""Inertia/damping identification from ambient generator measurements.

With no forcing, the sampled deviations X_i = [theta_i; omega_i] follow the
linear recursion Delta_i = A X_i + noise, where Delta_i = (X_{i+1} - X_i)/tau
and A stacks [[0, I], [-Minv L_r, -Minv D]].  Because the per-step noise is
independent of the current state, the empirical second moments satisfy
S1 = A S0, giving the moment estimator A_hat = S1 S0^-1.  Knowing the reduced
Laplacian, the bottom-left block of A_hat yields 1/m_i by row-wise least
squares against the rows of -L_r, and the bottom-right diagonal yields d_i.

The noise scale is recovered from the covariance of the one-step frequency
residuals: tau * M Cov(r) M has expectation sigma^2 * sigma_shape, so the
trace ratio estimates sigma^2.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import IdentificationError
from .reduction import ReducedModel
from .simulator import DynParams, Trajectory

COND_LIMIT = 1e12


@dataclass
class MomentEstimates:
    """Empirical second moments of a trajectory and the implied dynamics matrix.

    s0 = mean of X X^T, s1 = mean of Delta X^T, s_delta = mean of
    Delta Delta^T, all over the n_used = N-1 usable steps; a_hat = S1 S0^-1.
    """

    s0: np.ndarray
    s1: np.ndarray
    a_hat: np.ndarray
    n_used: int
    dt: float
    s_delta: np.ndarray
    cond_s0: float


def empirical_moments(traj: Trajectory) -> MomentEstimates:
    """Estimate S0, S1 and the dynamics matrix from one trajectory.

    Raises:
        IdentificationError: too few samples, or S0 numerically singular
            ("insufficient excitation").
    """
    ng = len(traj.gen_ids)
    n = traj.n_samples
    if n < 2 * (2 * ng) + 2:
        raise IdentificationError(
            f"need at least {2 * (2 * ng) + 2} samples for {ng} generators, got {n}"
        )
    x_full = np.hstack([traj.theta, traj.omega])
    delta = np.diff(x_full, axis=0) / traj.dt
    x = x_full[:-1]
    n_used = n - 1
    s0 = x.T @ x / n_used
    s0 = 0.5 * (s0 + s0.T)
    s1 = delta.T @ x / n_used
    s_delta = delta.T @ delta / n_used
    cond = float(np.linalg.cond(s0))
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IdentificationError(
            f"insufficient excitation: moment matrix condition number {cond:.3g}"
        )
    a_hat = scipy.linalg.solve(s0, s1.T, assume_a="sym").T
    return MomentEstimates(s0=s0, s1=s1, a_hat=a_hat, n_used=n_used,
                           dt=traj.dt, s_delta=s_delta, cond_s0=cond)


def extract_params(moments: MomentEstimates, model: ReducedModel) -> DynParams:
    """Read inertia, damping and the noise scale out of the moment estimates.

    1/m_i comes from projecting row i of the bottom-left block of A_hat onto
    row i of -L_r (a one-parameter least-squares fit, which averages the noise
    over all couplings of generator i); d_i = -m_i * (bottom-right diagonal).
    Off-diagonal damping entries are estimation noise and ignored.

    Raises:
        IdentificationError: non-positive inertia/damping estimate, naming the
            offending bus.
    """
    ng = model.n_gen
    a_bl = moments.a_hat[ng:, :ng]
    a_br = moments.a_hat[ng:, ng:]
    lred = model.l_reduced
    inertia = np.empty(ng)
    damping = np.empty(ng)
    for i, gid in enumerate(model.gen_ids):
        row = lred[i]
        denom = float(row @ row)
        if denom == 0.0:
            raise IdentificationError(
                f"identification failed at bus {gid}: zero coupling row"
            )
        m_inv = -float(a_bl[i] @ row) / denom
        if m_inv <= 0.0:
            raise IdentificationError(
                f"identification failed at bus {gid}: non-positive inertia estimate"
            )
        inertia[i] = 1.0 / m_inv
        damping[i] = -inertia[i] * float(a_br[i, i])
        if damping[i] <= 0.0:
            raise IdentificationError(
                f"identification failed at bus {gid}: non-positive damping estimate"
            )

    # Cov of the frequency-block residual r = Delta_2 - (A_hat X)_2; since
    # S1 = A_hat S0 exactly, the cross terms reduce and
    # Cov(r) = S_delta_22 - A2 S0 A2^T.
    a2 = moments.a_hat[ng:, :]
    cov_r = moments.s_delta[ng:, ng:] - a2 @ moments.s0 @ a2.T
    sigma_sq = (moments.dt
                * float(np.sum(inertia * inertia * np.diag(cov_r)))
                / float(np.trace(model.sigma_shape)))
    if sigma_sq <= 0.0:
        raise IdentificationError("identification failed: non-positive noise variance")
    return DynParams(inertia=inertia, damping=damping, sigma=float(np.sqrt(sigma_sq)))


def learn_params(traj: Trajectory, model: ReducedModel) -> tuple[DynParams, MomentEstimates]:
    """Convenience wrapper: moments then parameter extraction."""
    moments = empirical_moments(traj)
    return extract_params(moments, model), moments
