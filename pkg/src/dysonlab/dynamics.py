"""Interacting-particle stochastic dynamics and collision statistics.

Two drift fields are integrated with the same adaptive Euler-Maruyama
scheme:

* the log-gas field, component i = sum_{j != i} 1/(x_i - x_j) - lam * x_i,
  which is half the gradient of the log of the quadratic-confinement
  ensemble density;
* the gradient field half * grad log sigma_n of a windowed determinantal
  density, evaluated by central differences of the spectral-route density
  (particles conditioned to a fixed count n).

The step rule is dt = min(dt_max, c_dt * g_min^2) with g_min the current
minimum gap; a proposal that breaks the strict ordering is rejected and
retried with dt/2 (at most 20 halvings, after which the path is marked hit
if the gap is already below delta, else counted as an integration failure).
Paths are independent jobs keyed by stream id.

A "hit" means the minimum gap dropped to the threshold delta, the
computational stand-in for a collision.  For a two-particle system with
unit-noise coordinates the gap follows dg = sqrt(2) dW + ((d-1)/g) dt with
d = 3 for the log-gas pair, and d = 1 + a for a gradient pair whose density
vanishes like gap^a; d < 2 hits zero, d >= 2 does not, which is what the
probes measure.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .errors import (IntegrationFailureError, NearSingularDensityError,
                     SingularConfigurationError)
from .rng import RngStream
from .sampler import Configuration, DppSampler, lambda_n, sample_log_gas_batch
from .spectral import SpectralDecomposition
from .statistics import sigma_fredholm, sigma_fredholm_batch

log = logging.getLogger(__name__)

_MAX_HALVINGS = 20


# ---------------------------------------------------------------------------
# drift fields and energies
# ---------------------------------------------------------------------------

def dyson_drift(points, lam: float) -> np.ndarray:
    """Pairwise-repulsion drift with quadratic confinement."""
    x = np.asarray(points, dtype=float)
    if x.size >= 2 and np.min(np.diff(x)) <= 0.0:
        raise SingularConfigurationError("points must be strictly sorted")
    d = x[:, None] - x[None, :]
    np.fill_diagonal(d, np.inf)
    return np.sum(1.0 / d, axis=1) - lam * x


def loggas_energy(points, lam: float) -> float:
    """Ordered-pair interaction energy plus confinement,
    sum_{i != j} -2 log|x_i - x_j| + lam sum_i x_i^2; +inf on a tie."""
    x = np.asarray(points, dtype=float)
    conf = lam * float(np.sum(x * x))
    if x.size < 2:
        return conf
    d = np.abs(x[:, None] - x[None, :])
    iu = np.triu_indices(x.size, 1)
    gaps = d[iu]
    if np.any(gaps == 0.0):
        return np.inf
    return conf - 4.0 * float(np.sum(np.log(gaps)))


def log_gas_log_density(points, lam: float) -> float:
    """Unnormalized log density of the confinement ensemble,
    2 sum_{i<j} log|x_i - x_j| - lam sum x_i^2.  Equals
    -1/2 * loggas_energy(points, 2*lam); dyson_drift is half its gradient."""
    x = np.asarray(points, dtype=float)
    val = -lam * float(np.sum(x * x))
    if x.size >= 2:
        iu = np.triu_indices(x.size, 1)
        gaps = np.abs(x[:, None] - x[None, :])[iu]
        if np.any(gaps == 0.0):
            return -np.inf
        val += 2.0 * float(np.sum(np.log(gaps)))
    return val


def distorted_drift(decomp: SpectralDecomposition, points, h: float | None = None) -> np.ndarray:
    """half * grad log sigma_n by central differences of the spectral density.

    The stencil step is floored at a few quadrature node spacings: between
    nodes the extended eigenfunctions carry the quadrature error of the
    kernel rows, so differencing below that scale amplifies noise rather
    than resolving the density (visible for the cusped product family).
    Each coordinate's stencil is also clamped to stay on its side of the
    coincidence diagonal.
    """
    x = np.asarray(points, dtype=float)
    n = x.size
    if n >= 2:
        gaps = np.abs(x[:, None] - x[None, :])
        np.fill_diagonal(gaps, np.inf)
        g_min = float(gaps.min())
        if g_min == 0.0:
            raise SingularConfigurationError("coincident points have zero density")
        nearest = gaps.min(axis=1)
    else:
        g_min = np.inf
        nearest = np.full(n, np.inf)
    if h is None:
        a, b = decomp.window
        h_floor = max(1e-4, 3.0 * (b - a) / decomp.n_nodes)
        h = max(h_floor, 1e-2 * g_min) if np.isfinite(g_min) else h_floor
    out = np.empty(n)
    for i in range(n):
        hi = min(h, 0.45 * nearest[i]) if np.isfinite(nearest[i]) else h
        up, dn = x.copy(), x.copy()
        up[i] += hi
        dn[i] -= hi
        s_up = sigma_fredholm(decomp, up)
        s_dn = sigma_fredholm(decomp, dn)
        if s_up <= 0.0 or s_dn <= 0.0:
            raise NearSingularDensityError(
                f"density nonpositive at stencil of coordinate {i}")
        out[i] = 0.5 * (np.log(s_up) - np.log(s_dn)) / (2.0 * hi)
    return out


# ---------------------------------------------------------------------------
# single-path integrator
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray            # (n_times, n)
    min_gap_series: np.ndarray
    hit_flag: bool
    hit_time: float | None
    n_rejections: int = 0

    def to_csv(self, path) -> None:
        n = self.states.shape[1]
        with open(path, "w") as fh:
            fh.write("time," + ",".join(f"x{i}" for i in range(n)) + ",min_gap\n")
            for t, row, g in zip(self.times, self.states, self.min_gap_series):
                fh.write(f"{float(t)!r}," + ",".join(repr(float(v)) for v in row)
                         + f",{float(g)!r}\n")


def _min_gap(x: np.ndarray) -> float:
    return float(np.min(np.diff(x))) if x.size >= 2 else np.inf


def integrate_sde(initial: Configuration, drift_fn, T: float, delta: float,
                  rng: RngStream, dt_max: float = 1e-3, c_dt: float = 2e-3,
                  stop_on_hit: bool = True, record: bool = True) -> Trajectory:
    """Adaptive Euler-Maruyama path of dX = drift(X) dt + dB.

    Records the min-gap series and the first time the gap reaches delta.
    delta = 0 disables hit detection (used for equilibrium checks).
    """
    x = np.asarray(initial.points, dtype=float).copy()
    if x.size >= 2 and np.min(np.diff(x)) <= 0.0:
        raise SingularConfigurationError("initial configuration must be strictly sorted")
    gen = rng.generator()
    t = 0.0
    times, states, gaps = [0.0], [x.copy()], [_min_gap(x)]
    hit = gaps[0] <= delta if delta > 0 else False
    hit_time = 0.0 if hit else None
    rejections = 0

    while t < T and not (hit and stop_on_hit):
        g = _min_gap(x)
        dt = min(dt_max, T - t) if not np.isfinite(g) else min(dt_max, c_dt * g * g, T - t)
        drift = drift_fn(x)
        for halving in range(_MAX_HALVINGS + 1):
            prop = x + drift * dt + np.sqrt(dt) * gen.normal(size=x.size)
            if x.size < 2 or np.min(np.diff(prop)) > 0.0:
                break
            dt *= 0.5
            rejections += 1
        else:
            if _min_gap(x) <= delta:
                hit, hit_time = True, t
                break
            raise IntegrationFailureError(
                f"step size underflow at t={t:.6g} with gap {_min_gap(x):.3e}")
        x = prop
        t += dt
        g_new = _min_gap(x)
        if record:
            times.append(t)
            states.append(x.copy())
            gaps.append(g_new)
        if delta > 0 and g_new <= delta and not hit:
            hit, hit_time = True, t
    if not record:
        times, states, gaps = [t], [x.copy()], [_min_gap(x)]
    return Trajectory(np.array(times), np.array(states), np.array(gaps),
                      hit, hit_time, rejections)


# ---------------------------------------------------------------------------
# vectorized path ensembles
# ---------------------------------------------------------------------------

def _ensemble_sde(initials: np.ndarray, drift_batch, T: float, delta: float,
                  gen, dt_max: float, c_dt: float,
                  record_final: bool = False):
    """All paths advanced in lockstep with per-path adaptive steps.

    Returns (hit flags, failure flags, hit times, final states or None).
    Noise is drawn per iteration for the active set, so results depend on
    the generator sequence but not on any worker decomposition.
    """
    X = np.array(initials, dtype=float, copy=True)
    n_paths, n = X.shape
    t = np.zeros(n_paths)
    hit = np.zeros(n_paths, dtype=bool)
    failed = np.zeros(n_paths, dtype=bool)
    hit_time = np.full(n_paths, np.nan)
    if delta > 0:
        g0 = np.diff(X, axis=1).min(axis=1) if n >= 2 else np.full(n_paths, np.inf)
        hit |= g0 <= delta
        hit_time[hit] = 0.0
    active = ~hit & (t < T)

    while active.any():
        Xa = X[active]
        g = np.diff(Xa, axis=1).min(axis=1) if n >= 2 else np.full(Xa.shape[0], np.inf)
        dt = np.minimum(dt_max, T - t[active])
        fin = np.isfinite(g)
        dt[fin] = np.minimum(dt[fin], c_dt * g[fin] * g[fin])
        drift = drift_batch(Xa)
        prop = Xa + drift * dt[:, None] + np.sqrt(dt)[:, None] * gen.normal(size=Xa.shape)
        bad = (np.diff(prop, axis=1).min(axis=1) <= 0.0) if n >= 2 else np.zeros(len(Xa), bool)
        for _ in range(_MAX_HALVINGS):
            if not bad.any():
                break
            dt[bad] *= 0.5
            prop[bad] = (Xa[bad] + drift[bad] * dt[bad, None]
                         + np.sqrt(dt[bad])[:, None] * gen.normal(size=(int(bad.sum()), n)))
            bad = (np.diff(prop, axis=1).min(axis=1) <= 0.0) if n >= 2 else bad & False
        if bad.any():
            # exhausted halvings: hit if already at the threshold, else failed
            ga = np.diff(Xa, axis=1).min(axis=1)
            idx = np.flatnonzero(active)[bad]
            now_hit = ga[bad] <= delta
            hit[idx[now_hit]] = True
            hit_time[idx[now_hit]] = t[idx[now_hit]]
            failed[idx[~now_hit]] = True
            prop[bad] = Xa[bad]
            dt[bad] = 0.0
        X[active] = prop
        t[active] = t[active] + dt
        if n >= 2 and delta > 0:
            g_new = np.diff(prop, axis=1).min(axis=1)
            idx = np.flatnonzero(active)
            newly = (g_new <= delta) & ~hit[idx]
            hit[idx[newly]] = True
            hit_time[idx[newly]] = t[idx[newly]]
        active = ~hit & ~failed & (t < T)
    return hit, failed, hit_time, (X if record_final else None)


# ---------------------------------------------------------------------------
# hitting statistics
# ---------------------------------------------------------------------------

def wilson_interval(k: int, n: int, z: float = 1.959963984540054) -> tuple[float, float]:
    """95% Wilson score interval for a binomial fraction."""
    if n == 0:
        return 0.0, 1.0
    p = k / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2 * n)) / denom
    half = z * np.sqrt(p * (1 - p) / n + z * z / (4 * n * n)) / denom
    lo = 0.0 if k == 0 else max(0.0, center - half)
    hi = 1.0 if k == n else min(1.0, center + half)
    return lo, hi


@dataclass
class HittingStats:
    n_paths: int
    n_hit: int
    delta: float
    T: float
    ci_low: float
    ci_high: float
    n_failures: int = 0
    inconclusive: bool = False
    params: dict = field(default_factory=dict)

    @property
    def hit_fraction(self) -> float:
        return self.n_hit / self.n_paths if self.n_paths else 0.0


def _stats_from_flags(hit, failed, delta, T, params) -> HittingStats:
    n_paths = hit.size
    n_hit = int(hit.sum())
    n_fail = int(failed.sum())
    lo, hi = wilson_interval(n_hit, n_paths)
    return HittingStats(n_paths, n_hit, delta, T, lo, hi, n_fail,
                        inconclusive=(n_fail > 0.05 * n_paths), params=params)


def dyson_collision_probe(N: int, n_paths: int, T: float, delta: float,
                          rng: RngStream, rho_bar: float = 0.5,
                          dt_max: float = 1e-3, c_dt: float = 2e-3) -> HittingStats:
    """Hit frequency of the log-gas dynamics started in equilibrium."""
    lam = lambda_n(N, rho_bar)
    initials = sample_log_gas_batch(N, rho_bar, rng.seed, n_paths,
                                    base_stream=rng.stream_id)
    gen = rng.child(0).generator()

    def drift(Xa):
        d = Xa[:, :, None] - Xa[:, None, :]
        d[:, np.arange(N), np.arange(N)] = np.inf
        return np.sum(1.0 / d, axis=2) - lam * Xa

    hit, failed, _, _ = _ensemble_sde(initials, drift, T, delta, gen, dt_max, c_dt)
    return _stats_from_flags(hit, failed, delta, T,
                             {"model": "dyson", "N": N, "rho_bar": rho_bar,
                              "c_dt": c_dt, "dt_max": dt_max})


def _series_sigma2_grid(kernel, window, x1: np.ndarray, x2: np.ndarray,
                        n_quad: int = 48) -> np.ndarray:
    """Two-point window density at many pairs through the alternating
    series truncated after the double integral, with all correlations as
    direct kernel determinants (resolves the near-coincidence exponent at
    every scale, unlike the finite eigenexpansion).

    The inner integrals use a fixed n_quad-node Gauss rule; the z-block
    Schur factors are shared across all pairs.
    """
    from numpy.polynomial.legendre import leggauss
    a, b = window
    z0, w0 = leggauss(n_quad)
    z = 0.5 * (b - a) * z0 + 0.5 * (b + a)
    w = 0.5 * (b - a) * w0

    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    m = x1.size
    k11 = kernel.eval(x1, x1)
    k22 = kernel.eval(x2, x2)
    k12 = kernel.eval(x1, x2)
    rho2 = k11 * k22 - k12 * k12

    # single z integral of the 3x3 determinant
    k1z = kernel.eval(x1[:, None], z[None, :])
    k2z = kernel.eval(x2[:, None], z[None, :])
    kzz = kernel.eval(z, z)
    det3 = (k11[:, None] * (k22[:, None] * kzz[None, :] - k2z ** 2)
            - k12[:, None] * (k12[:, None] * kzz[None, :] - k2z * k1z)
            + k1z * (k12[:, None] * k2z - k22[:, None] * k1z))
    int3 = det3 @ w

    # double z integral of the 4x4 determinant via the shared z-pair block
    z1, z2 = np.meshgrid(z, z, indexing="ij")
    zp1, zp2 = z1.ravel(), z2.ravel()
    ww = (w[:, None] * w[None, :]).ravel()
    c11 = kernel.eval(zp1, zp1)
    c22 = kernel.eval(zp2, zp2)
    c12 = kernel.eval(zp1, zp2)
    det_c = c11 * c22 - c12 * c12
    safe = np.where(det_c > 1e-14, det_c, np.inf)
    i11, i22, i12 = c22 / safe, c11 / safe, -c12 / safe
    int4 = np.empty(m)
    chunk = max(1, (1 << 21) // max(zp1.size, 1))
    for s in range(0, m, chunk):
        e = min(s + chunk, m)
        b1 = kernel.eval(x1[s:e, None], zp1[None, :])
        b2 = kernel.eval(x1[s:e, None], zp2[None, :])
        d1 = kernel.eval(x2[s:e, None], zp1[None, :])
        d2 = kernel.eval(x2[s:e, None], zp2[None, :])
        # S = A - B C^-1 B^T for A the fixed 2x2 pair block
        q11 = b1 * (i11 * b1 + i12 * b2) + b2 * (i12 * b1 + i22 * b2)
        q22 = d1 * (i11 * d1 + i12 * d2) + d2 * (i12 * d1 + i22 * d2)
        q12 = b1 * (i11 * d1 + i12 * d2) + b2 * (i12 * d1 + i22 * d2)
        s11 = k11[s:e, None] - q11
        s22 = k22[s:e, None] - q22
        s12 = k12[s:e, None] - q12
        int4[s:e] = ((s11 * s22 - s12 * s12) * det_c) @ ww
    return rho2 - int3 + 0.5 * int4


class PairDriftTable:
    """Gradient drift of a two-particle windowed density on a
    (log gap) x (sum) grid with bilinear interpolation.

    The tabulated density is the series route by default; tabulating
    d log sigma / d log g keeps relative accuracy uniform down to tiny
    gaps, where the drift behaves like a/(2 g).
    """

    def __init__(self, decomp: SpectralDecomposition, g_min: float = 1e-5,
                 g_max: float | None = None, n_g: int = 240, n_s: int = 161,
                 floor: float = 1e-300, route: str = "series", n_quad: int = 48):
        a, b = decomp.window
        g_max = g_max or 2.2 * (b - a)
        self.gs = np.geomspace(g_min, g_max, n_g)
        self.ss = np.linspace(2 * a - 1.0, 2 * b + 1.0, n_s)
        G, S = np.meshgrid(self.gs, self.ss, indexing="ij")
        x1 = (S - G) / 2.0
        x2 = (S + G) / 2.0
        if route == "series":
            vals = _series_sigma2_grid(decomp.kernel, decomp.window,
                                       x1.ravel(), x2.ravel(), n_quad)
        elif route == "spectral":
            tuples = np.stack([x1.ravel(), x2.ravel()], axis=1)
            vals = sigma_fredholm_batch(decomp, tuples)
        else:
            raise ValueError(f"unknown drift table route {route!r}")
        u = np.log(np.maximum(vals, floor)).reshape(G.shape)
        self.du_dlng = np.gradient(u, np.log(self.gs[1] / self.gs[0]), axis=0)
        self.du_ds = np.gradient(u, self.ss[1] - self.ss[0], axis=1)
        self._lng0 = np.log(self.gs[0])
        self._dlng = np.log(self.gs[1] / self.gs[0])
        self._ds = self.ss[1] - self.ss[0]

    def _interp(self, table, fi, fj):
        i = fi.astype(int)
        j = fj.astype(int)
        ti = fi - i
        tj = fj - j
        return (table[i, j] * (1 - ti) * (1 - tj) + table[i + 1, j] * ti * (1 - tj)
                + table[i, j + 1] * (1 - ti) * tj + table[i + 1, j + 1] * ti * tj)

    def drift(self, X: np.ndarray) -> np.ndarray:
        g = X[:, 1] - X[:, 0]
        s = X[:, 0] + X[:, 1]
        fi = np.clip((np.log(np.maximum(g, 1e-12)) - self._lng0) / self._dlng,
                     0.0, self.gs.size - 1.001)
        fj = np.clip((s - self.ss[0]) / self._ds, 0.0, self.ss.size - 1.001)
        a = self._interp(self.du_ds, fi, fj)
        b = self._interp(self.du_dlng, fi, fj) / g
        return 0.5 * np.stack([a - b, a + b], axis=1)


def _cached_drift_table(decomp: SpectralDecomposition) -> PairDriftTable:
    table = decomp._cache.get("pair_drift_table")
    if table is None:
        table = PairDriftTable(decomp)
        decomp._cache["pair_drift_table"] = table
    return table


def conditioned_pair_initials(decomp: SpectralDecomposition, n_paths: int,
                              rng: RngStream, max_tries: int = 400) -> np.ndarray:
    """Equilibrium samples conditioned on exactly two points."""
    sampler = DppSampler(decomp)
    out = np.empty((n_paths, 2))
    got = 0
    for i in range(max_tries * n_paths):
        cfg = sampler.sample(RngStream(rng.seed, rng.stream_id + i))
        if cfg.count == 2:
            out[got] = cfg.points
            got += 1
            if got == n_paths:
                return out
    raise IntegrationFailureError("could not draw enough two-point configurations")


def distorted_pair_collision_probe(decomp: SpectralDecomposition, n_paths: int,
                                   T: float, delta: float, rng: RngStream,
                                   dt_max: float = 1e-3, c_dt: float = 2e-3,
                                   initial_gap: float | None = None) -> HittingStats:
    """Hit frequency of the gradient dynamics on the two-point sector.

    Initial states come from the conditioned equilibrium unless a fixed
    starting gap is given (then paths start at +-gap/2).
    """
    if initial_gap is None:
        initials = conditioned_pair_initials(decomp, n_paths, rng)
    else:
        initials = np.tile([-initial_gap / 2, initial_gap / 2], (n_paths, 1))
    table = _cached_drift_table(decomp)
    gen = rng.child(1).generator()
    hit, failed, _, _ = _ensemble_sde(initials, table.drift, T, delta, gen, dt_max, c_dt)
    return _stats_from_flags(hit, failed, delta, T,
                             {"model": "distorted-pair", "c_dt": c_dt, "dt_max": dt_max})


def collision_probe(model, n_paths: int, size: int, T: float, delta: float,
                    rng: RngStream, **kw) -> HittingStats:
    """Dispatch: model is "dyson" (size = particle count) or a spectral
    decomposition (size must be 2, the conditioned sector)."""
    if isinstance(model, str) and model == "dyson":
        return dyson_collision_probe(size, n_paths, T, delta, rng, **kw)
    if isinstance(model, SpectralDecomposition):
        if size != 2:
            raise ValueError("gradient dynamics probe supports the two-point sector only")
        return distorted_pair_collision_probe(model, n_paths, T, delta, rng, **kw)
    raise ValueError(f"unknown dynamics model {model!r}")


# ---------------------------------------------------------------------------
# gap scaling exponent (effective radial dimension)
# ---------------------------------------------------------------------------

def gap_dimension_fit(drift_batch, g0: float, rng: RngStream, n_paths: int = 8000,
                      t_max: float = 8e-4, n_steps: int = 20,
                      center: float = 0.0) -> float:
    """Effective radial dimension of a two-particle gap process.

    Starting all pairs at gap g0, E[g_t^2] = g0^2 + 2 d t for small t when
    the gap diffuses like a dimension-d radial process with the pair's
    sqrt(2) volatility; the fitted slope over [0, t_max] divided by 2
    estimates d.  Per-step drift displacements are capped at a fraction of
    the current gap so the rare near-zero excursions cannot blow up the
    fixed-step mean (crossing proposals are reflected).
    """
    gen = rng.generator()
    X = np.tile([center - g0 / 2, center + g0 / 2], (n_paths, 1))
    dt = t_max / n_steps
    ts = [0.0]
    m2 = [g0 * g0]
    for s in range(n_steps):
        g = X[:, 1] - X[:, 0]
        cap = 0.3 * g[:, None]
        move = np.clip(drift_batch(X) * dt, -cap, cap)
        prop = X + move + np.sqrt(dt) * gen.normal(size=X.shape)
        swap = prop[:, 1] <= prop[:, 0]
        if swap.any():
            prop[swap] = prop[swap][:, ::-1]
        X = prop
        g = X[:, 1] - X[:, 0]
        ts.append((s + 1) * dt)
        m2.append(float(np.mean(g * g)))
    slope = np.polyfit(ts, m2, 1)[0]
    return float(slope / 2.0)


def dyson_pair_dimension(rng: RngStream, rho_bar: float = 0.5, g0: float = 0.1,
                         **kw) -> float:
    lam = lambda_n(2, rho_bar)

    def drift(Xa):
        g = Xa[:, 1] - Xa[:, 0]
        return np.stack([-1.0 / g, 1.0 / g], axis=1) - lam * Xa

    return gap_dimension_fit(drift, g0, rng, **kw)


def distorted_pair_dimension(decomp: SpectralDecomposition, rng: RngStream,
                             g0: float = 0.1, **kw) -> float:
    table = _cached_drift_table(decomp)
    return gap_dimension_fit(table.drift, g0, rng, **kw)


def bessel_gap_hit_fraction(dim: float, g0s: np.ndarray, delta: float, T: float,
                            rng: RngStream, dt_max: float = 1e-3,
                            c_dt: float = 2e-3) -> HittingStats:
    """Oracle: the gap-scale radial process dg = sqrt(2) dW + ((dim-1)/g) dt,
    integrated with the same step rule, absorbed at delta."""
    g0s = np.asarray(g0s, dtype=float)
    gen = rng.generator()
    X = np.stack([-g0s / 2, g0s / 2], axis=1)

    def drift(Xa):
        g = Xa[:, 1] - Xa[:, 0]
        b = 0.5 * (dim - 1.0) / g
        return np.stack([-b, b], axis=1)

    hit, failed, _, _ = _ensemble_sde(X, drift, T, delta, gen, dt_max, c_dt)
    return _stats_from_flags(hit, failed, delta, T, {"model": "bessel", "dim": dim})


def hitting_stats_json(stats: HittingStats) -> dict:
    return {
        "hit_fraction": stats.hit_fraction,
        "ci": [stats.ci_low, stats.ci_high],
        "n_paths": stats.n_paths,
        "n_hit": stats.n_hit,
        "n_failures": stats.n_failures,
        "inconclusive": stats.inconclusive,
        "delta": stats.delta,
        "T": stats.T,
        "params": stats.params,
    }
