"""Synthetic measurement generation for the reduced and full grid dynamics.

Both integrators use the explicit Euler-Maruyama scheme with step tau = 1/rate
and start from the equilibrium (all deviations zero):

    theta[i+1] = theta[i] + tau * omega[i]
    omega[i+1] = omega[i] + tau * Minv (-L_r theta[i] - D omega[i] + F(t_i))
                           + Minv * eta_gl[i]

where the per-step noise eta_gl[i] = eta_g[i] - K eta_l[i] combines the raw
bus noises, each i.i.d. N(0, sigma^2 * tau).  `simulate_full_dae` integrates
the unreduced system instead, solving the algebraic load equations at every
step; with a shared noise stream it reproduces the reduced trajectories to
machine-accumulation accuracy, which is the main cross-validation of the
reduction.

Noise discipline: one counter-based Philox stream per (seed), consumed in a
fixed (step, bus) order with buses in canonical order, so both integrators see
identical draws.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy.linalg

from . import __version__
from .errors import CaseValidationError, SimulationError, TrajectoryIOError
from .grid_model import GridCase, build_laplacian
from .reduction import ReducedModel


@dataclass(frozen=True)
class DynParams:
    """Generator dynamic parameters in canonical generator order.

    inertia[i] (s^2) and damping[i] (s) are the diagonal entries of M and D;
    sigma (p.u.) is the common scale of the ambient noise.
    """

    inertia: np.ndarray
    damping: np.ndarray
    sigma: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "inertia", np.asarray(self.inertia, dtype=float))
        object.__setattr__(self, "damping", np.asarray(self.damping, dtype=float))
        if self.inertia.ndim != 1 or self.damping.shape != self.inertia.shape:
            raise ValueError("inertia and damping must be 1-d arrays of equal length")
        if np.any(self.inertia <= 0.0):
            raise ValueError("all inertia entries must be > 0")
        if np.any(self.damping <= 0.0):
            raise ValueError("all damping entries must be > 0")
        if self.sigma <= 0.0:
            raise ValueError("sigma must be > 0")

    @classmethod
    def from_case(cls, case: GridCase, sigma: float) -> "DynParams":
        """Collect the true generator parameters stored in a case file."""
        inertia, damping = [], []
        for gid in case.gen_ids:
            bus = case.bus(gid)
            if bus.inertia is None or bus.damping is None:
                raise CaseValidationError(
                    f"bus {gid}: case carries no inertia/damping, cannot simulate"
                )
            inertia.append(bus.inertia)
            damping.append(bus.damping)
        return cls(inertia=np.array(inertia), damping=np.array(damping), sigma=sigma)

    def as_dict(self, gen_ids: list[int]) -> dict:
        return {
            "inertia": {str(g): float(m) for g, m in zip(gen_ids, self.inertia)},
            "damping": {str(g): float(d) for g, d in zip(gen_ids, self.damping)},
            "sigma": float(self.sigma),
        }

    @classmethod
    def from_dict(cls, raw: dict, gen_ids: list[int]) -> "DynParams":
        return cls(
            inertia=np.array([float(raw["inertia"][str(g)]) for g in gen_ids]),
            damping=np.array([float(raw["damping"][str(g)]) for g in gen_ids]),
            sigma=float(raw["sigma"]),
        )


@dataclass(frozen=True)
class ForcingSpec:
    """A sustained sinusoidal disturbance gamma*cos(2*pi*(f*t + phase)) at one bus."""

    source: int
    amplitude: float
    frequency: float
    phase: float = 0.0

    def __post_init__(self) -> None:
        if self.amplitude < 0.0:
            raise ValueError("amplitude must be >= 0")
        if self.frequency <= 0.0:
            raise ValueError("frequency must be > 0")
        if not 0.0 <= self.phase < 1.0:
            raise ValueError("phase must lie in [0, 1) cycles")

    def as_dict(self) -> dict:
        return {
            "source": self.source,
            "amplitude": self.amplitude,
            "frequency": self.frequency,
            "phase": self.phase,
        }

    @classmethod
    def from_dict(cls, raw: dict) -> "ForcingSpec":
        return cls(
            source=int(raw["source"]),
            amplitude=float(raw["amplitude"]),
            frequency=float(raw["frequency"]),
            phase=float(raw.get("phase", 0.0)),
        )


@dataclass
class Trajectory:
    """Uniformly sampled generator deviations (angles rad, frequencies rad/s)."""

    dt: float
    gen_ids: list[int]
    theta: np.ndarray
    omega: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if self.theta.shape != self.omega.shape or self.theta.ndim != 2:
            raise ValueError("theta and omega must be equal-shape 2-d arrays")
        if self.n_samples < 2:
            raise ValueError("need at least 2 samples")
        if self.theta.shape[1] != len(self.gen_ids):
            raise ValueError("column count does not match gen_ids")

    @property
    def n_samples(self) -> int:
        return self.theta.shape[0]

    @property
    def duration(self) -> float:
        return self.n_samples * self.dt

    def times(self) -> np.ndarray:
        return np.arange(self.n_samples) * self.dt


def _check_window(duration: float, rate: float, forcing: ForcingSpec | None) -> tuple[int, float]:
    if duration <= 0.0 or rate <= 0.0:
        raise SimulationError("duration and rate must be > 0")
    n_float = duration * rate
    n = int(round(n_float))
    if abs(n_float - n) > 1e-9 or n < 2:
        raise SimulationError(
            f"duration*rate must be an integer >= 2, got {duration}*{rate} = {n_float}"
        )
    if forcing is not None and rate <= 2.0 * forcing.frequency:
        raise SimulationError(
            f"Nyquist violation: rate {rate} Hz cannot carry forcing at {forcing.frequency} Hz"
        )
    return n, 1.0 / rate


def _noise_block(seed: int, n_steps: int, n_buses: int) -> np.ndarray:
    """Standard-normal draws, row = step, column = bus in canonical order."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    return rng.standard_normal((n_steps, n_buses))


def _base_meta(kind: str, case_name: str, params: DynParams, forcing: ForcingSpec | None,
               gen_ids: list[int], duration: float, rate: float, seed: int,
               burn_in: float) -> dict:
    return {
        "version": __version__,
        "kind": kind,
        "case": case_name,
        "seed": seed,
        "rate": rate,
        "duration": duration,
        "burn_in": burn_in,
        "forcing": None if forcing is None else forcing.as_dict(),
        "params": params.as_dict(gen_ids),
    }


def simulate_reduced(model: ReducedModel, params: DynParams,
                     forcing: ForcingSpec | None, duration: float, rate: float,
                     seed: int, burn_in: float = 0.0) -> Trajectory:
    """Integrate the reduced generator dynamics.

    Returns `duration*rate` samples at spacing 1/rate starting at the
    equilibrium; with `burn_in` > 0 the first `burn_in*rate` samples are
    simulated and discarded (time restarts at 0).  Deterministic in `seed`.
    """
    n_keep, tau = _check_window(duration, rate, forcing)
    n_burn = int(round(burn_in * rate)) if burn_in > 0.0 else 0
    n_total = n_keep + n_burn
    ng = model.n_gen
    if len(params.inertia) != ng:
        raise SimulationError("params dimension does not match model")
    minv = 1.0 / params.inertia

    noise = _noise_block(seed, n_total - 1, ng + len(model.load_ids))
    scale = params.sigma * np.sqrt(tau)
    eta_gl = scale * model.mix_noise(noise[:, :ng], noise[:, ng:])

    # one-step transition x -> T x + c_i on the stacked state [theta; omega]
    trans = np.zeros((2 * ng, 2 * ng))
    trans[:ng, :ng] = np.eye(ng)
    trans[:ng, ng:] = tau * np.eye(ng)
    trans[ng:, :ng] = -tau * (minv[:, None] * model.l_reduced)
    trans[ng:, ng:] = np.eye(ng) - tau * np.diag(minv * params.damping)

    shift = np.zeros((n_total - 1, 2 * ng))
    shift[:, ng:] = minv * eta_gl
    if forcing is not None and forcing.amplitude > 0.0:
        gain = model.gamma[:, model.bus_index(forcing.source)]
        sgn = 1.0 if model.is_generator(forcing.source) else -1.0
        t_steps = np.arange(n_total - 1) * tau
        wave = np.cos(2.0 * np.pi * (forcing.frequency * t_steps + forcing.phase))
        shift[:, ng:] += (tau * sgn * forcing.amplitude) * wave[:, None] * (minv * gain)

    states = np.zeros((n_total, 2 * ng))
    x = states[0].copy()
    for i in range(n_total - 1):
        x = trans @ x + shift[i]
        states[i + 1] = x

    kept = states[n_burn:]
    meta = _base_meta("reduced", model.case_name, params, forcing,
                      model.gen_ids, duration, rate, seed, burn_in)
    return Trajectory(dt=tau, gen_ids=list(model.gen_ids),
                      theta=kept[:, :ng].copy(), omega=kept[:, ng:].copy(), meta=meta)


def simulate_full_dae(case: GridCase, params: DynParams,
                      forcing: ForcingSpec | None, duration: float, rate: float,
                      seed: int, burn_in: float = 0.0) -> Trajectory:
    """Integrate the unreduced differential-algebraic dynamics.

    Generator states follow the swing difference equations; at each step the
    load angles are obtained from the algebraic balance
    theta_l = (L_ll)^-1 (eta_l/tau + forcing_at_loads - L_lg theta_g).
    Consumes the same noise stream as `simulate_reduced`, so with identical
    inputs the generator trajectories agree to ~1e-12 per step.
    """
    n_keep, tau = _check_window(duration, rate, forcing)
    n_burn = int(round(burn_in * rate)) if burn_in > 0.0 else 0
    n_total = n_keep + n_burn
    blocks = build_laplacian(case)
    gen_ids, load_ids = blocks.gen_ids, blocks.load_ids
    ng, nl = len(gen_ids), len(load_ids)
    if len(params.inertia) != ng:
        raise SimulationError("params dimension does not match case")
    minv = 1.0 / params.inertia
    if nl:
        try:
            cho = scipy.linalg.cho_factor(blocks.ll)
        except scipy.linalg.LinAlgError as exc:
            raise CaseValidationError(f"load island: load block is singular ({exc})") from exc

    force_gen = np.zeros(ng)
    force_load = np.zeros(nl)
    src_is_gen = False
    if forcing is not None and forcing.amplitude > 0.0:
        if forcing.source in gen_ids:
            src_is_gen = True
            force_gen[gen_ids.index(forcing.source)] = forcing.amplitude
        elif forcing.source in load_ids:
            force_load[load_ids.index(forcing.source)] = forcing.amplitude
        else:
            raise CaseValidationError(f"unknown bus {forcing.source}")

    noise = _noise_block(seed, n_total - 1, ng + nl)
    scale = params.sigma * np.sqrt(tau)

    theta_g = np.zeros(ng)
    omega = np.zeros(ng)
    theta_out = np.zeros((n_total, ng))
    omega_out = np.zeros((n_total, ng))
    for i in range(n_total - 1):
        t = i * tau
        wave = np.cos(2.0 * np.pi * (forcing.frequency * t + forcing.phase)) if forcing else 0.0
        eta_g = scale * noise[i, :ng]
        rhs_g = -blocks.gg @ theta_g - params.damping * omega + eta_g / tau
        if src_is_gen:
            rhs_g = rhs_g + force_gen * wave
        if nl:
            eta_l = scale * noise[i, ng:]
            rhs_l = eta_l / tau - blocks.lg @ theta_g
            if forcing is not None and not src_is_gen:
                rhs_l = rhs_l + force_load * wave
            theta_l = scipy.linalg.cho_solve(cho, rhs_l)
            rhs_g = rhs_g - blocks.gl @ theta_l
        theta_g = theta_g + tau * omega
        omega = omega + tau * (minv * rhs_g)
        theta_out[i + 1] = theta_g
        omega_out[i + 1] = omega

    meta = _base_meta("dae", case.name, params, forcing,
                      gen_ids, duration, rate, seed, burn_in)
    return Trajectory(dt=tau, gen_ids=list(gen_ids),
                      theta=theta_out[n_burn:], omega=omega_out[n_burn:], meta=meta)


def write_trajectory(traj: Trajectory, path: str | Path,
                     header_comments: dict | None = None) -> None:
    """Write a trajectory as CSV plus a `<path>.meta.json` sidecar.

    Columns: t, theta_<id>..., omega_<id>... in canonical generator order.
    Values use 17 significant digits, enough to round-trip doubles exactly.
    """
    path = Path(path)
    comments = {"version": __version__}
    comments.update(header_comments or {})
    cols = (["t"]
            + [f"theta_{g}" for g in traj.gen_ids]
            + [f"omega_{g}" for g in traj.gen_ids])
    data = np.column_stack([traj.times(), traj.theta, traj.omega])
    with open(path, "w") as fh:
        for key, val in comments.items():
            fh.write(f"# {key}: {val}\n")
        fh.write(",".join(cols) + "\n")
        for row in data:
            fh.write(",".join(format(v, ".17g") for v in row) + "\n")
    meta = dict(traj.meta)
    meta.setdefault("version", __version__)
    meta["dt"] = traj.dt
    meta["n_samples"] = traj.n_samples
    meta["gen_ids"] = list(traj.gen_ids)
    with open(f"{path}.meta.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_trajectory(path: str | Path) -> Trajectory:
    """Read a trajectory CSV (and its sidecar, when present) back."""
    path = Path(path)
    try:
        with open(path) as fh:
            rows = [line.rstrip("\n") for line in fh if not line.startswith("#")]
    except OSError as exc:
        raise TrajectoryIOError(f"{path}: {exc}") from exc
    if not rows:
        raise TrajectoryIOError(f"{path}: empty file")
    header = rows[0].split(",")
    if header[0] != "t":
        raise TrajectoryIOError(f"{path}: first column must be 't', got {header[0]!r}")
    theta_ids = [int(c[6:]) for c in header if c.startswith("theta_")]
    omega_ids = [int(c[6:]) for c in header if c.startswith("omega_")]
    if not theta_ids or theta_ids != omega_ids:
        raise TrajectoryIOError(
            f"{path}: schema mismatch, need matching theta_<id>/omega_<id> column sets"
        )
    expected = 1 + 2 * len(theta_ids)
    if len(header) != expected:
        raise TrajectoryIOError(f"{path}: unexpected columns {header}")
    try:
        data = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    except ValueError as exc:
        raise TrajectoryIOError(f"{path}: non-numeric data ({exc})") from exc
    if data.ndim != 2 or data.shape[1] != expected:
        raise TrajectoryIOError(f"{path}: inconsistent column count")

    meta_path = Path(f"{path}.meta.json")
    meta: dict = {}
    if meta_path.exists():
        with open(meta_path) as fh:
            meta = json.load(fh)
    if "dt" in meta:
        dt = float(meta["dt"])
    else:
        steps = np.diff(data[:, 0])
        dt = float(np.median(steps))
        if dt <= 0 or np.max(np.abs(steps - dt)) > 1e-9 * max(dt, 1.0):
            raise TrajectoryIOError(f"{path}: non-uniform time column and no sidecar")
    ng = len(theta_ids)
    return Trajectory(dt=dt, gen_ids=theta_ids,
                      theta=data[:, 1:1 + ng], omega=data[:, 1 + ng:], meta=meta)
