"""Likelihood scan over (source bus, frequency bin) forcing hypotheses.

The generalized-least-squares objective for a hypothesized forcing at bus l
and bin k is the per-sample normalized quadratic form

    L(gamma, phi) = -(1/N) sum_i v_i^T Sigma^-1 v_i,
    v_i = r_i - s_l * gamma * cos(2*pi*(k*i/N + phi)) * w,

where r_i = Delta2_i + Minv L_r theta_i + Minv D omega_i is the one-step
frequency residual of the ambient model, w = Minv Gamma_l is the forcing
direction seen at the generators, s_l = +1/-1 for generator/load sources, and
Sigma = sigma^2 * sigma_shape.  Writing the cosine as the real part of a
complex exponential, the only phase-dependent term involves the DFT of the
residual series at bin k, so the maximization over (gamma >= 0, phi) is exact
and closed-form:

    z     = w^T Sigma^-1 r_tilde(k)          (complex projection)
    phi*  = -arg(z)/2pi  (+1/2 for load sources), mod 1
    gamma* = 2 |z| / (sqrt(N) w^T Sigma^-1 w)
    L*    = L(0) + 2 |z|^2 / (N w^T Sigma^-1 w)

The DFT uses the positive-exponent convention X_tilde(k) =
N^-1/2 sum_i exp(+2pi j k i / N) X_i over the N = n_samples - 1 common
indices of X and Delta (the final X sample is dropped so both series align).

sigma enters every quantity as an overall factor (Sigma^-1 = sigma^-2 *
sigma_shape^-1), so the scan ranks hypotheses on sigma-free internals:
rescaling sigma provably never changes the ranking or gamma*.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import LocalizationError
from .reduction import ReducedModel, degeneracy_groups
from .simulator import DynParams, Trajectory


@dataclass
class SpectralCache:
    """DFTs and summed second moments of one trajectory.

    x_tilde / d_tilde hold the full spectra (rows = bins 0..n_fft-1, columns =
    the 2|G| stacked channels).  `bins` is the validated default scan range.
    Per-bin outer-product matrices are exposed as methods (`g_mat`, `e_mat`,
    `h_mat`) rather than stored; the full-sum moments g_sum/e_sum/h_sum feed
    the hypothesis-independent baseline term.
    """

    x_tilde: np.ndarray
    d_tilde: np.ndarray
    bins: np.ndarray
    dt: float
    gen_ids: list[int]
    n_fft: int
    duration: float
    g_sum: np.ndarray
    e_sum: np.ndarray
    h_sum: np.ndarray

    @property
    def max_bin(self) -> int:
        """Largest admissible bin, strictly below n_fft/2."""
        return (self.n_fft - 1) // 2

    def frequency(self, k) -> np.ndarray | float:
        """Bin -> Hz map, k / duration (duration = n_samples * dt)."""
        return np.asarray(k) / self.duration

    def g_mat(self, k: int) -> np.ndarray:
        x = self.x_tilde[k]
        return np.real(np.outer(x, x.conj()))

    def e_mat(self, k: int) -> np.ndarray:
        return np.real(np.outer(self.d_tilde[k], self.x_tilde[k].conj()))

    def h_mat(self, k: int) -> np.ndarray:
        d = self.d_tilde[k]
        return np.real(np.outer(d, d.conj()))


@dataclass(frozen=True)
class Hypothesis:
    """One candidate explanation: forcing at `source` in frequency bin `bin`."""

    source: int
    bin: int
    frequency: float


@dataclass(frozen=True)
class LikelihoodValue:
    loglik: float
    gamma_hat: float
    phi_hat: float


@dataclass
class ScanResult:
    """Full hypothesis table plus ranking and degeneracy-aware winner report.

    Columnar arrays are aligned (entry j = sources[j], bins[j], ...); `ranking`
    holds entry indices by descending loglik with ties broken by ascending
    (bus id, bin).  `winner_group` lists candidate buses whose gain columns
    coincide (up to sign) with the winner's, i.e. sources the data cannot
    distinguish from it.
    """

    sources: np.ndarray
    bins: np.ndarray
    freqs: np.ndarray
    loglik: np.ndarray
    gamma_hat: np.ndarray
    phi_hat: np.ndarray
    ranking: np.ndarray
    winner_group: list[int]
    runner_up_index: int | None
    meta: dict = field(default_factory=dict)

    @property
    def n_entries(self) -> int:
        return len(self.sources)

    def entry(self, index: int) -> "ScanEntry":
        return ScanEntry(
            hypothesis=Hypothesis(int(self.sources[index]), int(self.bins[index]),
                                  float(self.freqs[index])),
            loglik=float(self.loglik[index]),
            gamma_hat=float(self.gamma_hat[index]),
            phi_hat=float(self.phi_hat[index]),
        )

    def top(self, count: int) -> list["ScanEntry"]:
        return [self.entry(i) for i in self.ranking[:count]]

    @property
    def winner(self) -> "ScanEntry":
        return self.entry(self.ranking[0])

    @property
    def runner_up(self) -> "ScanEntry | None":
        """Best-ranked entry whose source lies outside the winner's group."""
        if self.runner_up_index is None:
            return None
        return self.entry(self.runner_up_index)

    @property
    def runner_up_gap(self) -> float | None:
        if self.runner_up_index is None:
            return None
        return float(self.loglik[self.ranking[0]] - self.loglik[self.runner_up_index])


@dataclass(frozen=True)
class ScanEntry:
    hypothesis: Hypothesis
    loglik: float
    gamma_hat: float
    phi_hat: float


def spectral_stats(traj: Trajectory, bins: np.ndarray | range | None = None) -> SpectralCache:
    """DFT the stacked state and finite-difference series of a trajectory.

    The two series share indices i = 0..N-2 (the last state sample is dropped
    to align with the N-1 finite differences), so n_fft = n_samples - 1.
    `bins` defaults to every admissible bin 1..(n_fft-1)//2.
    """
    x_full = np.hstack([traj.theta, traj.omega])
    if not np.all(np.isfinite(x_full)):
        raise LocalizationError("trajectory contains non-finite values")
    delta = np.diff(x_full, axis=0) / traj.dt
    x = x_full[:-1]
    n_fft = x.shape[0]
    sqrt_n = np.sqrt(n_fft)
    x_tilde = sqrt_n * np.fft.ifft(x, axis=0)
    d_tilde = sqrt_n * np.fft.ifft(delta, axis=0)
    max_bin = (n_fft - 1) // 2
    if bins is None:
        bins_arr = np.arange(1, max_bin + 1)
    else:
        bins_arr = np.asarray(list(bins) if isinstance(bins, range) else bins, dtype=int)
    if bins_arr.size == 0:
        raise LocalizationError("empty bin range")
    if np.any(bins_arr < 1) or np.any(bins_arr > max_bin):
        raise LocalizationError(
            f"bins must lie in [1, {max_bin}] for n_fft = {n_fft}"
        )
    return SpectralCache(
        x_tilde=x_tilde,
        d_tilde=d_tilde,
        bins=bins_arr,
        dt=traj.dt,
        gen_ids=list(traj.gen_ids),
        n_fft=n_fft,
        duration=traj.n_samples * traj.dt,
        g_sum=x.T @ x,
        e_sum=delta.T @ x,
        h_sum=delta.T @ delta,
    )


class _ScanContext:
    """Quantities shared by every hypothesis of one (cache, model, params) triple.

    All internals are sigma-free; sigma^-2 is applied once when reporting
    loglik values, never before ranking.
    """

    def __init__(self, cache: SpectralCache, model: ReducedModel, params: DynParams):
        ng = model.n_gen
        if len(cache.gen_ids) != ng or list(cache.gen_ids) != list(model.gen_ids):
            raise LocalizationError("cache generators do not match model")
        if len(params.inertia) != ng:
            raise LocalizationError("params dimension does not match model")
        self.cache = cache
        self.model = model
        self.params = params
        self.ng = ng
        minv = 1.0 / params.inertia
        self.w_cols = minv[:, None] * model.gamma  # per-bus forcing directions
        self._chol = scipy.linalg.cho_factor(model.sigma_shape)
        self.u_cols = scipy.linalg.cho_solve(self._chol, self.w_cols)
        self.q_cols = np.sum(self.w_cols * self.u_cols, axis=0)
        # residual projection matrix P = [Minv L_r, Minv D] so r = Delta2 + P X
        self.proj = np.hstack([minv[:, None] * model.l_reduced,
                               np.diag(minv * params.damping)])
        h22 = cache.h_sum[ng:, ng:]
        e2 = cache.e_sum[ng:, :]
        outer = h22 + e2 @ self.proj.T + self.proj @ e2.T + self.proj @ cache.g_sum @ self.proj.T
        self.base_quad = float(np.trace(scipy.linalg.cho_solve(self._chol, outer)))
        self.inv_sigma_sq = 1.0 / (params.sigma * params.sigma)

    def residual_spectrum(self, bins: np.ndarray) -> np.ndarray:
        """r_tilde(k) for the requested bins, rows = bins, columns = generators."""
        ng = self.ng
        x1 = self.cache.x_tilde[bins, :ng]
        x2 = self.cache.x_tilde[bins, ng:]
        d2 = self.cache.d_tilde[bins, ng:]
        return d2 + x1 @ self.proj[:, :ng].T + x2 @ self.proj[:, ng:].T

    def evaluate(self, source: int, bins: np.ndarray, r_tilde: np.ndarray
                 ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Closed-form maximized (loglik, gamma_hat, phi_hat) arrays over bins."""
        idx = self.model.bus_index(source)
        u = self.u_cols[:, idx]
        q = self.q_cols[idx]
        z = r_tilde @ u
        absz = np.abs(z)
        n = self.cache.n_fft
        loglik_free = -self.base_quad / n + 2.0 * absz * absz / (n * q)
        gamma = 2.0 * absz / (np.sqrt(n) * q)
        phi = -np.angle(z) / (2.0 * np.pi)
        if not self.model.is_generator(source):
            phi = phi + 0.5
        phi = np.mod(phi, 1.0)
        return loglik_free, gamma, phi


def likelihood_at(cache: SpectralCache, model: ReducedModel, params: DynParams,
                  hyp: Hypothesis) -> LikelihoodValue:
    """Evaluate one hypothesis, maximized in closed form over amplitude and phase."""
    if not 1 <= hyp.bin <= cache.max_bin:
        raise LocalizationError(f"bin {hyp.bin} outside [1, {cache.max_bin}]")
    ctx = _ScanContext(cache, model, params)
    bins = np.array([hyp.bin])
    loglik_free, gamma, phi = ctx.evaluate(hyp.source, bins, ctx.residual_spectrum(bins))
    return LikelihoodValue(
        loglik=float(loglik_free[0] * ctx.inv_sigma_sq),
        gamma_hat=float(gamma[0]),
        phi_hat=float(phi[0]),
    )


def scan(cache: SpectralCache, model: ReducedModel, params: DynParams,
         candidates: list[int] | None = None,
         bins: np.ndarray | range | None = None) -> ScanResult:
    """Evaluate every (candidate bus, bin) hypothesis and rank them.

    Candidates default to all buses, bins to the cache's validated range.
    Entries are laid out source-major in ascending (bus id, bin) order;
    evaluation order never affects values (hypotheses are independent).
    """
    if candidates is None:
        cand = list(model.bus_order)
    else:
        cand = sorted(set(int(c) for c in candidates))
    if not cand:
        raise LocalizationError("empty candidate set")
    if bins is None:
        bins_arr = cache.bins
    else:
        bins_arr = np.asarray(list(bins) if isinstance(bins, range) else bins, dtype=int)
    if bins_arr.size == 0:
        raise LocalizationError("empty bin range")
    if np.any(bins_arr < 1) or np.any(bins_arr > cache.max_bin):
        raise LocalizationError(f"bins must lie in [1, {cache.max_bin}]")

    ctx = _ScanContext(cache, model, params)
    r_tilde = ctx.residual_spectrum(bins_arr)
    nb = bins_arr.size
    n_entries = len(cand) * nb
    sources_out = np.empty(n_entries, dtype=int)
    bins_out = np.empty(n_entries, dtype=int)
    loglik_free = np.empty(n_entries)
    gamma_out = np.empty(n_entries)
    phi_out = np.empty(n_entries)
    for row, src in enumerate(cand):
        ll, gm, ph = ctx.evaluate(src, bins_arr, r_tilde)
        sl = slice(row * nb, (row + 1) * nb)
        sources_out[sl] = src
        bins_out[sl] = bins_arr
        loglik_free[sl] = ll
        gamma_out[sl] = gm
        phi_out[sl] = ph

    # rank on sigma-free values: ordering is then bit-identical for any sigma
    ranking = np.lexsort((bins_out, sources_out, -loglik_free))
    loglik_out = loglik_free * ctx.inv_sigma_sq

    winner_src = int(sources_out[ranking[0]])
    groups = degeneracy_groups(model)
    group = next(g for g in groups if winner_src in g)
    winner_group = sorted(set(group) & set(cand))
    runner_idx = None
    for idx in ranking[1:]:
        if int(sources_out[idx]) not in winner_group:
            runner_idx = int(idx)
            break
    return ScanResult(
        sources=sources_out,
        bins=bins_out,
        freqs=np.asarray(cache.frequency(bins_out), dtype=float),
        loglik=loglik_out,
        gamma_hat=gamma_out,
        phi_hat=phi_out,
        ranking=ranking,
        winner_group=winner_group,
        runner_up_index=runner_idx,
        meta={"n_fft": cache.n_fft, "duration": cache.duration,
              "sigma": params.sigma, "candidates": cand},
    )
