"""Exact samplers: determinantal fields on a window, the finite-N log-gas,
and Poisson configurations.

Determinantal sampling follows the spectral two-stage scheme: keep each
eigenfunction independently with probability lambda_i, then place as many
points as survived by sequentially sampling the retained frame's diagonal
and projecting the frame orthogonally to the evaluation at each placed
point.  Point counts are therefore an exact Bernoulli(lambda_i) sum by
construction.

The log-gas sampler realizes the quadratic-confinement ensemble

    mu_N ~ prod_{i<j} |x_i - x_j|^2 * exp(-lam_N sum_i x_i^2)

as the eigenvalues of a Hermitian Gaussian matrix with entry density
proportional to exp(-lam_N tr H^2): real diagonal N(0, 1/(2 lam_N)),
off-diagonal real and imaginary parts N(0, 1/(4 lam_N)).  The default
confinement lam_N = (pi rho_bar)^2 / (2 N) puts the bulk density at the
origin at rho_bar for every N, so the finite-N 1-point function converges
to the sine field's constant density as N grows.

All samplers are pure functions of (inputs, RngStream): replicas with
distinct stream ids can run on any number of workers and reproduce
bit-identically.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .errors import SamplingError
from .rng import RngStream
from .spectral import SpectralDecomposition, eigenfunction_values

log = logging.getLogger(__name__)

# eigenfunctions effectively never retained below this weight
_RETAIN_CUTOFF = 1e-12
_ZERO_DENSITY = 1e-12
_MAX_POINT_RETRIES = 100


@dataclass(frozen=True)
class Box:
    """Axis-aligned box in R^d, rows of (lo, hi)."""

    bounds: np.ndarray

    def __post_init__(self):
        b = np.atleast_2d(np.asarray(self.bounds, dtype=float))
        if b.shape[1] != 2 or np.any(b[:, 1] < b[:, 0]):
            raise ValueError("box bounds must be rows of (lo, hi)")
        object.__setattr__(self, "bounds", b)

    @property
    def dim(self) -> int:
        return self.bounds.shape[0]

    @property
    def volume(self) -> float:
        return float(np.prod(self.bounds[:, 1] - self.bounds[:, 0]))

    def contains(self, pts: np.ndarray) -> np.ndarray:
        pts = np.atleast_2d(pts)
        return np.all((pts >= self.bounds[:, 0]) & (pts <= self.bounds[:, 1]), axis=1)


@dataclass
class Configuration:
    """Finite point set together with the region it was sampled on.

    One-dimensional points are stored sorted ascending in a flat array;
    d >= 2 uses an (n, d) array and a :class:`Box` window.
    """

    points: np.ndarray
    window: object

    @property
    def count(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return 1 if self.points.ndim == 1 else self.points.shape[1]

    def min_gap(self) -> float:
        if self.dim == 1:
            return float(np.min(np.diff(self.points))) if self.count >= 2 else np.inf
        if self.count < 2:
            return np.inf
        d = np.linalg.norm(self.points[:, None, :] - self.points[None, :, :], axis=2)
        d[np.diag_indices(self.count)] = np.inf
        return float(d.min())

    def to_json(self) -> list:
        return self.points.tolist()


def restrict(config: Configuration, window) -> Configuration:
    """Sub-configuration of the points inside ``window``; idempotent."""
    if config.dim == 1:
        a, b = float(window[0]), float(window[1])
        keep = (config.points >= a) & (config.points <= b)
        return Configuration(config.points[keep], (a, b))
    box = window if isinstance(window, Box) else Box(window)
    if config.count == 0:
        return Configuration(config.points.reshape(0, box.dim), box)
    return Configuration(config.points[box.contains(config.points)], box)


class DppSampler:
    """Reusable sampling tables for one spectral decomposition.

    Densities are tracked on a uniform refinement grid over the window
    (Nystrom-extended eigenfunctions), and points are placed by inverse
    CDF of the trapezoid mass with a linear correction inside the selected
    cell.  Projection updates use exact eigenfunction values at the chosen
    point, so only the placement density is interpolated.
    """

    def __init__(self, decomp: SpectralDecomposition, n_fine: int | None = None):
        self.decomp = decomp
        a, b = decomp.window
        m = n_fine or max(1024, 4 * decomp.n_nodes)
        self.grid = np.linspace(a, b, m)
        self.dx = self.grid[1] - self.grid[0]
        ext, kept = eigenfunction_values(decomp, self.grid, cutoff=_RETAIN_CUTOFF)
        self.ext = ext
        self.kept = kept
        self.lam = decomp.eigenvalues

    def _place(self, density, gen):
        seg = 0.5 * (density[:-1] + density[1:]) * self.dx
        total = seg.sum()
        if total <= 0.0:
            raise SamplingError("projected density vanished on the whole window")
        cdf = np.cumsum(seg)
        u = gen.random() * total
        s = int(np.searchsorted(cdf, u))
        s = min(s, seg.size - 1)
        target = u - (cdf[s - 1] if s > 0 else 0.0)
        d0, d1 = density[s], density[s + 1]
        aq = 0.5 * (d1 - d0)
        c = target / self.dx
        if abs(aq) < 1e-14 * max(d0, 1e-300):
            xi = c / d0 if d0 > 0 else gen.random()
        else:
            disc = max(d0 * d0 + 4.0 * aq * c, 0.0)
            xi = (-d0 + np.sqrt(disc)) / (2.0 * aq)
        xi = min(max(xi, 0.0), 1.0)
        return self.grid[s] + xi * self.dx

    def sample(self, rng: RngStream) -> Configuration:
        gen = rng.generator()
        u = gen.random(self.lam.size)
        retained = np.flatnonzero((u < self.lam) & (self.lam > _RETAIN_CUTOFF))
        k = retained.size
        if k == 0:
            return Configuration(np.empty(0), self.decomp.window)

        cols = np.searchsorted(self.kept, retained)
        frame = self.ext[:, cols]                      # (m, k) retained eigenfunctions
        density = np.maximum(np.sum(frame * frame, axis=1), 0.0)
        basis: list[np.ndarray] = []
        pts = np.empty(k)
        for j in range(k):
            for attempt in range(_MAX_POINT_RETRIES + 1):
                x = self._place(density, gen)
                row, _ = eigenfunction_values(self.decomp, x, cutoff=_RETAIN_CUTOFF)
                v = row[0, cols]
                for e in basis:
                    v = v - np.dot(e, v) * e
                norm2 = float(np.dot(v, v))
                if norm2 >= _ZERO_DENSITY:
                    break
            else:
                raise SamplingError("projection step kept producing zero density")
            e_new = v / np.sqrt(norm2)
            basis.append(e_new)
            pts[j] = x
            density = np.maximum(density - (frame @ e_new) ** 2, 0.0)

        pts.sort()
        if k >= 2 and np.min(np.diff(pts)) <= 0.0:
            # ties have probability zero; redraw the whole configuration
            log.warning("tie in sampled configuration, resampling")
            return self.sample(rng.child(1))
        return Configuration(pts, self.decomp.window)


def sample_dpp(decomp: SpectralDecomposition, rng: RngStream) -> Configuration:
    """One exact draw of the determinantal field on the decomposition window."""
    sampler = decomp._cache.get("dpp_sampler")
    if sampler is None:
        sampler = DppSampler(decomp)
        decomp._cache["dpp_sampler"] = sampler
    return sampler.sample(rng)


def sample_dpp_batch(decomp: SpectralDecomposition, seed: int, n_samples: int,
                     base_stream: int = 0) -> list[Configuration]:
    """n_samples independent draws on streams base_stream + i."""
    sampler = DppSampler(decomp)
    return [sampler.sample(RngStream(seed, base_stream + i)) for i in range(n_samples)]


def lambda_n(n: int, rho_bar: float) -> float:
    """Confinement strength for which the bulk density at 0 equals rho_bar."""
    return (np.pi * rho_bar) ** 2 / (2.0 * n)


def _gue_matrix(n: int, lam: float, gen) -> np.ndarray:
    sd_diag = np.sqrt(1.0 / (2.0 * lam))
    sd_off = np.sqrt(1.0 / (4.0 * lam))
    h = np.zeros((n, n), dtype=complex)
    iu = np.triu_indices(n, 1)
    h[iu] = gen.normal(0.0, sd_off, iu[0].size) + 1j * gen.normal(0.0, sd_off, iu[0].size)
    h = h + h.conj().T
    h[np.diag_indices(n)] = gen.normal(0.0, sd_diag, n)
    return h


def sample_log_gas(n: int, rho_bar: float, rng: RngStream,
                   lam: float | None = None) -> Configuration:
    """n points of the quadratic-confinement log-gas, sorted ascending."""
    if n < 1:
        raise ValueError("n must be at least 1")
    if not 0.0 < rho_bar <= 1.0:
        raise ValueError("rho_bar must lie in (0, 1]")
    lam = lambda_n(n, rho_bar) if lam is None else float(lam)
    gen = rng.generator()
    for attempt in range(4):
        try:
            ev = np.linalg.eigvalsh(_gue_matrix(n, lam, gen))
        except np.linalg.LinAlgError:
            continue
        ev.sort()
        if n == 1 or np.min(np.diff(ev)) > 0.0:
            return Configuration(ev, (-np.inf, np.inf))
        log.warning("tied eigenvalues in log-gas draw, retrying")
    raise SamplingError("log-gas eigensolve failed after 3 retries")


def sample_log_gas_batch(n: int, rho_bar: float, seed: int, n_samples: int,
                         base_stream: int = 0, lam: float | None = None) -> np.ndarray:
    """(n_samples, n) array of sorted draws, one stream per sample.

    Matrices are drawn per-stream, then eigensolved in stacked batches,
    so the result is identical however the batch is chunked.
    """
    lam = lambda_n(n, rho_bar) if lam is None else float(lam)
    out = np.empty((n_samples, n))
    block = 4096
    for s in range(0, n_samples, block):
        e = min(s + block, n_samples)
        mats = np.stack([_gue_matrix(n, lam, RngStream(seed, base_stream + i).generator())
                         for i in range(s, e)])
        out[s:e] = np.sort(np.linalg.eigvalsh(mats), axis=1)
    return out


def sample_poisson(intensity: float, region: Box, rng: RngStream) -> Configuration:
    """Homogeneous Poisson configuration on a box: Poisson(intensity * volume)
    many i.i.d. uniform points."""
    if intensity <= 0:
        raise ValueError("intensity must be positive")
    region = region if isinstance(region, Box) else Box(region)
    gen = rng.generator()
    count = int(gen.poisson(intensity * region.volume))
    lo, hi = region.bounds[:, 0], region.bounds[:, 1]
    pts = gen.uniform(lo, hi, size=(count, region.dim))
    if region.dim == 1:
        return Configuration(np.sort(pts[:, 0]), (float(lo[0]), float(hi[0])))
    return Configuration(pts, region)
