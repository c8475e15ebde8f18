"""Windowed integral-operator spectra by Nystrom quadrature.

The windowed operator (restrict, apply kernel, restrict) is discretized on
Gauss-Legendre nodes through the symmetrized scheme

    G[q, q'] = sqrt(w_q) K(x_q, x_q') sqrt(w_q'),

whose eigenpairs converge to the operator's as the node count grows.  The
stored eigenvectors are node values of weight-normalized eigenfunctions,
i.e. sum_q w_q phi_i(x_q) phi_j(x_q) = delta_ij, and eigenfunctions extend
off the node set by

    phi_i(x) = (1/lambda_i) sum_q w_q K(x, x_q) phi_i(x_q),

which reproduces the node values exactly.

Eigenvalues are validated against the [0, 1] operator band and then
clamped into it so that downstream Bernoulli sampling never sees
discretization noise.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from numpy.polynomial.legendre import leggauss

from .errors import DegenerateProjectionError, KernelValidityError

# eigenvalues within a whisker of 1 make lambda/(1-lambda) meaningless
_PROJECTION_EPS = 1e-12
# eigenfunctions below this weight are dropped from resolvent-type series
_SERIES_CUTOFF = 1e-14


@dataclass
class SpectralDecomposition:
    """Quadrature rule plus eigenpairs of one windowed operator."""

    kernel: object
    window: tuple
    nodes: np.ndarray
    weights: np.ndarray
    eigenvalues: np.ndarray      # descending, clamped to [0, 1]
    eigenvectors: np.ndarray     # column i = phi_i at nodes
    raw_eigenvalues: np.ndarray  # descending, before clamping
    clamp_tol: float = 1e-8
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n_nodes(self) -> int:
        return self.nodes.size

    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    def to_json(self) -> dict:
        out = {
            "window": [float(self.window[0]), float(self.window[1])],
            "nodes": self.nodes.tolist(),
            "weights": self.weights.tolist(),
            "eigenvalues": self.eigenvalues.tolist(),
            "eigenvectors": self.eigenvectors.tolist(),
        }
        if hasattr(self.kernel, "to_json"):
            out["kernel"] = self.kernel.to_json()
        return out


def nystrom_decompose(kernel, window, n_nodes: int, validate: bool = True,
                      clamp_tol: float = 1e-8) -> SpectralDecomposition:
    """Discretize the windowed operator and eigendecompose it.

    With ``validate`` set, an eigenvalue below -10*clamp_tol or above
    1 + 10*clamp_tol raises :class:`KernelValidityError` (the kernel does
    not define a determinantal field).  ``validate=False`` skips the check
    and is what the report-producing validator uses.
    """
    if n_nodes < 8:
        raise ValueError("n_nodes must be at least 8")
    a, b = float(window[0]), float(window[1])
    x0, w0 = leggauss(n_nodes)
    nodes = 0.5 * (b - a) * x0 + 0.5 * (b + a)
    weights = 0.5 * (b - a) * w0

    kmat = kernel.eval(nodes[:, None], nodes[None, :])
    if not np.all(np.isfinite(kmat)):
        raise KernelValidityError("kernel is not finite on the quadrature grid")
    sw = np.sqrt(weights)
    gram = sw[:, None] * kmat * sw[None, :]
    gram = 0.5 * (gram + gram.T)
    lam, vecs = np.linalg.eigh(gram)
    lam = lam[::-1].copy()
    vecs = vecs[:, ::-1]

    if validate and (lam.min() < -10 * clamp_tol or lam.max() > 1.0 + 10 * clamp_tol):
        raise KernelValidityError(
            f"eigenvalues outside [0, 1] band: min {lam.min():.3e}, max {lam.max():.6g}")

    clamped = np.clip(lam, 0.0, 1.0)
    phi = vecs / sw[:, None]
    return SpectralDecomposition(kernel, (a, b), nodes, weights,
                                 clamped, phi, lam, clamp_tol)


def eigenfunction_values(decomp: SpectralDecomposition, x,
                         cutoff: float = _SERIES_CUTOFF):
    """Nystrom extension of all eigenfunctions with lambda > cutoff.

    Returns (values, kept) where values has shape (len(x), n_kept) and
    kept is the index array into decomp.eigenvalues.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    kept = np.flatnonzero(decomp.eigenvalues > cutoff)
    if kept.size == 0:
        return np.zeros((x.size, 0)), kept
    rows = decomp.kernel.eval(x[:, None], decomp.nodes[None, :]) * decomp.weights
    vals = rows @ decomp.eigenvectors[:, kept] / decomp.eigenvalues[kept]
    return vals, kept


def fredholm_det(decomp: SpectralDecomposition) -> float:
    """prod_i (1 - lambda_i), the probability of an empty window,
    accumulated in log space."""
    lam = decomp.eigenvalues
    if lam.size and lam.max() >= 1.0 - _PROJECTION_EPS:
        raise DegenerateProjectionError(
            f"top eigenvalue {lam.max():.15f} is numerically a projection direction")
    return float(np.exp(np.sum(np.log1p(-lam))))


def _l_weights(decomp: SpectralDecomposition):
    lam = decomp.eigenvalues
    if lam.size and lam.max() >= 1.0 - _PROJECTION_EPS:
        raise DegenerateProjectionError(
            f"top eigenvalue {lam.max():.15f} is numerically a projection direction")
    kept = np.flatnonzero(lam > _SERIES_CUTOFF)
    return kept, lam[kept] / (1.0 - lam[kept])


def l_kernel_eval(decomp: SpectralDecomposition, x, y) -> float | np.ndarray:
    """Resolvent-type kernel L(x,y) = sum_i lambda_i/(1-lambda_i) phi_i(x) phi_i(y).

    Scalar in, scalar out; arrays broadcast elementwise.
    """
    kept, fac = _l_weights(decomp)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    y = np.atleast_1d(np.asarray(y, dtype=float))
    if kept.size == 0:
        out = np.zeros(np.broadcast(x, y).shape)
        return float(out[0]) if out.size == 1 else out
    px, _ = eigenfunction_values(decomp, x)
    py, _ = eigenfunction_values(decomp, y)
    out = np.einsum("ik,ik->i", px * fac, py) if x.shape == y.shape else (px * fac) @ py.T
    return float(out[0]) if out.size == 1 else out


def l_matrix(decomp: SpectralDecomposition, points) -> np.ndarray:
    """L evaluated on the n x n grid of a point tuple."""
    pts = np.atleast_1d(np.asarray(points, dtype=float))
    kept, fac = _l_weights(decomp)
    if kept.size == 0:
        return np.zeros((pts.size, pts.size))
    p, _ = eigenfunction_values(decomp, pts)
    return (p * fac) @ p.T


def l_matrix_batch(decomp: SpectralDecomposition, tuples: np.ndarray) -> np.ndarray:
    """L on each row of ``tuples`` (shape (m, n)); returns (m, n, n)."""
    tuples = np.asarray(tuples, dtype=float)
    m, n = tuples.shape
    kept, fac = _l_weights(decomp)
    if kept.size == 0:
        return np.zeros((m, n, n))
    p, _ = eigenfunction_values(decomp, tuples.ravel())
    p = p.reshape(m, n, kept.size)
    return np.einsum("mik,mjk->mij", p * fac, p)


def mercer_reconstruction(decomp: SpectralDecomposition, x) -> np.ndarray:
    """sum_i lambda_i phi_i(x) phi_i(x')^T on an arbitrary grid."""
    p, kept = eigenfunction_values(decomp, x)
    return (p * decomp.eigenvalues[kept]) @ p.T


def decomposition_from_json(data: dict | str) -> SpectralDecomposition:
    if isinstance(data, str):
        data = json.loads(data)
    from .kernels import kernel_from_json  # local import keeps module load acyclic
    kernel = kernel_from_json(data["kernel"]) if "kernel" in data else None
    lam = np.asarray(data["eigenvalues"], dtype=float)
    return SpectralDecomposition(
        kernel,
        tuple(data["window"]),
        np.asarray(data["nodes"], dtype=float),
        np.asarray(data["weights"], dtype=float),
        lam,
        np.asarray(data["eigenvectors"], dtype=float),
        lam.copy(),
    )
