"""Network reduction to the generator subgrid.

Eliminating the algebraic (load) buses from the Laplacian by Schur complement
yields an equivalent smaller network among the generators:

    L_r = L_gg - L_gl (L_ll)^-1 L_lg

Disturbances injected at eliminated buses reappear at the generators through
the map K = L_gl (L_ll)^-1:

  * i.i.d. noise eta_g, eta_l of scale sigma becomes eta_g - K eta_l, with
    covariance sigma^2 * (I + K K^T)  =: sigma^2 * sigma_shape;
  * a unit sinusoidal injection at bus l acts on the generators through the
    gain column Gamma_l (identity for generator buses, K e_l for load buses,
    applied with opposite sign for load-side injections);
  * nominal load power P_l contributes -K P_l to the reduced injections.

All solves against L_ll use a Cholesky factorization; L_ll is positive
definite whenever the grid is connected and has at least one generator.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import CaseValidationError
from .grid_model import GridCase, LaplacianBlocks, build_laplacian

DEGENERACY_TOL = 1e-10


@dataclass
class ReducedModel:
    """Generator-subgrid equivalent of a grid case.  Immutable; arrays read-only.

    Attributes:
        l_reduced: reduced Laplacian, |G| x |G|.
        sigma_shape: noise covariance with the scale factored out,
            I + K K^T (symmetric positive definite, sigma_shape - I PSD).
        gamma: |G| x n_buses gain matrix; column for bus l is Gamma_l in
            canonical bus order (generators first).
        p_reduced: contribution of eliminated load power to the generator
            injections, -K P_l.
        gen_ids / load_ids: canonical id lists.
    """

    l_reduced: np.ndarray
    sigma_shape: np.ndarray
    gamma: np.ndarray
    p_reduced: np.ndarray
    gen_ids: list[int]
    load_ids: list[int]
    case_name: str = ""

    def __post_init__(self) -> None:
        for arr in (self.l_reduced, self.sigma_shape, self.gamma, self.p_reduced):
            arr.setflags(write=False)

    @property
    def n_gen(self) -> int:
        return len(self.gen_ids)

    @property
    def bus_order(self) -> list[int]:
        return list(self.gen_ids) + list(self.load_ids)

    @property
    def load_mix(self) -> np.ndarray:
        """K = L_gl (L_ll)^-1, the load-to-generator injection map (|G| x |L|)."""
        return self.gamma[:, self.n_gen:]

    def bus_index(self, bus_id: int) -> int:
        """Position of a bus in the canonical order."""
        try:
            return self.bus_order.index(bus_id)
        except ValueError:
            raise CaseValidationError(f"unknown bus {bus_id}") from None

    def is_generator(self, bus_id: int) -> bool:
        return bus_id in self.gen_ids

    def mix_noise(self, eta_g: np.ndarray, eta_l: np.ndarray) -> np.ndarray:
        """Map raw per-bus noise (rows = draws) to effective generator noise.

        Returns eta_g - eta_l @ K^T, one row per draw.
        """
        if len(self.load_ids) == 0:
            return eta_g
        return eta_g - eta_l @ self.load_mix.T


def kron_reduce(blocks: LaplacianBlocks, load_power: np.ndarray | None = None) -> ReducedModel:
    """Eliminate the load block of a partitioned Laplacian.

    Args:
        blocks: valid Laplacian partition (generators first).
        load_power: nominal injections at the load buses in canonical order;
            zeros when omitted (only p_reduced depends on it).

    Raises:
        CaseValidationError: singular load block ("load island"), which a
            validated connected case cannot produce.
    """
    ng = len(blocks.gen_ids)
    nl = len(blocks.load_ids)
    if load_power is None:
        load_power = np.zeros(nl)
    if nl == 0:
        return ReducedModel(
            l_reduced=blocks.gg.copy(),
            sigma_shape=np.eye(ng),
            gamma=np.eye(ng),
            p_reduced=np.zeros(ng),
            gen_ids=list(blocks.gen_ids),
            load_ids=[],
        )
    try:
        cho = scipy.linalg.cho_factor(blocks.ll)
    except scipy.linalg.LinAlgError as exc:
        raise CaseValidationError(f"load island: load block is singular ({exc})") from exc
    # Y = (L_ll)^-1 L_lg, so K = Y^T and sigma_shape = I + Y^T Y (Gram form).
    y = scipy.linalg.cho_solve(cho, blocks.lg)
    l_reduced = blocks.gg - blocks.gl @ y
    l_reduced = 0.5 * (l_reduced + l_reduced.T)
    sigma_shape = np.eye(ng) + y.T @ y
    kmap = y.T
    gamma = np.hstack([np.eye(ng), kmap])
    p_reduced = -kmap @ np.asarray(load_power, dtype=float)
    return ReducedModel(
        l_reduced=l_reduced,
        sigma_shape=sigma_shape,
        gamma=gamma,
        p_reduced=p_reduced,
        gen_ids=list(blocks.gen_ids),
        load_ids=list(blocks.load_ids),
    )


def reduce_case(case: GridCase) -> ReducedModel:
    """Build the Laplacian of a case and reduce it, wiring in load powers."""
    blocks = build_laplacian(case)
    p_load = np.array([case.bus(i).power for i in case.load_ids], dtype=float)
    model = kron_reduce(blocks, load_power=p_load)
    model.case_name = case.name
    return model


def noise_covariance(model: ReducedModel, sigma: float) -> np.ndarray:
    """Effective generator-noise covariance sigma^2 * sigma_shape."""
    if sigma <= 0.0:
        raise ValueError(f"sigma must be > 0, got {sigma}")
    return sigma * sigma * model.sigma_shape


def forcing_gain(model: ReducedModel, source: int) -> np.ndarray:
    """Gain column Gamma_l for a candidate source bus.

    Identity basis vector for generators; K e_l for loads.  The physical
    forcing seen at the generators is +gamma*Gamma_l*cos(...) for a generator
    source and -gamma*Gamma_l*cos(...) for a load source; downstream code
    absorbs the sign into the estimated phase.
    """
    return model.gamma[:, model.bus_index(source)].copy()


def degeneracy_groups(model: ReducedModel, tol: float = DEGENERACY_TOL) -> list[list[int]]:
    """Partition buses whose gain columns coincide up to sign.

    Buses l, l' land in one group when ||Gamma_l - Gamma_l'||_inf <= tol or
    ||Gamma_l + Gamma_l'||_inf <= tol (a sign flip is a half-cycle phase shift,
    hence observationally equivalent); groups are the transitive closure.
    Returns disjoint covering groups, each ascending, ordered by first member.
    """
    if tol <= 0.0:
        raise ValueError(f"tol must be > 0, got {tol}")
    order = model.bus_order
    n = len(order)
    parent = list(range(n))

    def find(a: int) -> int:
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    cols = model.gamma
    for i in range(n):
        for j in range(i + 1, n):
            diff = np.max(np.abs(cols[:, i] - cols[:, j]))
            summ = np.max(np.abs(cols[:, i] + cols[:, j]))
            if min(diff, summ) <= tol:
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(order[i])
    return sorted((sorted(g) for g in groups.values()), key=lambda g: g[0])


def natural_modes(model: ReducedModel, params) -> np.ndarray:
    """Undamped small-signal mode frequencies, Hz, ascending.

    Square roots of the nonzero eigenvalues of M^-1 L_r divided by 2*pi.
    Diagnostic only: damping shifts the true resonances slightly.
    `params` needs an `inertia` array in canonical generator order.
    """
    inertia = np.asarray(params.inertia, dtype=float)
    vals = scipy.linalg.eigh(model.l_reduced, np.diag(inertia), eigvals_only=True)
    scale = max(float(np.max(np.abs(vals))), 1.0)
    nonzero = vals[np.abs(vals) > 1e-9 * scale]
    return np.sqrt(np.maximum(nonzero, 0.0)) / (2.0 * np.pi)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_matrix(mat: np.ndarray, indent: str) -> str:
    rows = [
        "[" + ", ".join(_fmt(v) for v in row) + "]"
        for row in np.atleast_2d(mat)
    ]
    sep = ",\n" + indent
    return "[\n" + indent + sep.join(rows) + "\n" + indent[:-2] + "]"


def reduced_model_to_json(model: ReducedModel, header: dict | None = None) -> str:
    """Serialize a ReducedModel to JSON with 17-significant-digit floats.

    Matrices are row-major nested arrays; `header` entries (version, hashes)
    are emitted first as plain JSON strings.
    """
    import json as _json

    parts = []
    for key, val in (header or {}).items():
        parts.append(f'  "{key}": {_json.dumps(val)}')
    parts.append(f'  "case_name": {_json.dumps(model.case_name)}')
    parts.append(f'  "gen_ids": {_json.dumps(model.gen_ids)}')
    parts.append(f'  "load_ids": {_json.dumps(model.load_ids)}')
    parts.append(f'  "bus_order": {_json.dumps(model.bus_order)}')
    parts.append(f'  "l_reduced": {_json_matrix(model.l_reduced, "    ")}')
    parts.append(f'  "sigma_shape": {_json_matrix(model.sigma_shape, "    ")}')
    parts.append(f'  "gamma": {_json_matrix(model.gamma, "    ")}')
    parts.append('  "p_reduced": [' + ", ".join(_fmt(v) for v in model.p_reduced) + "]")
    return "{\n" + ",\n".join(parts) + "\n}\n"
