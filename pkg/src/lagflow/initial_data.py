"""Seeded initial data for flow experiments."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import GridSpec, ScalarField, make_ball_mask

KINDS = ("quadratic", "seeded_convex", "file")


@dataclass(frozen=True)
class ConvexSeed:
    """Ingredients of ``x.Ax/2 + eps sqrt(1 + |x - c|^2)`` (before any rescaling)."""

    A: np.ndarray
    eps: float
    center: np.ndarray

    def __call__(self, pts):
        quad = 0.5 * np.einsum("...i,ij,...j->...", pts, self.A, pts)
        return quad + self.eps * np.sqrt(1.0 + np.sum((pts - self.center) ** 2, axis=-1))

    def gradient(self, pts):
        d = pts - self.center
        return pts @ self.A + self.eps * d / np.sqrt(1.0 + np.sum(d * d, axis=-1))[..., None]

    def hessian(self, pts):
        d = pts - self.center
        s = 1.0 + np.sum(d * d, axis=-1)
        n = pts.shape[-1]
        bump = (np.eye(n) * s[..., None, None] - d[..., :, None] * d[..., None, :]) / s[..., None, None] ** 1.5
        return self.A + self.eps * bump


def random_rotation(rng: np.random.Generator, n: int) -> np.ndarray:
    """Haar-distributed rotation from the QR factorisation of a Gaussian matrix."""
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    q = q * np.sign(np.diag(r))
    if np.linalg.det(q) < 0:
        q[:, 0] = -q[:, 0]
    return q


def random_psd(seed: int, n: int, d_max: float = 1.0) -> np.ndarray:
    """``Q^T D Q`` with a seeded rotation and eigenvalues uniform in ``[0, d_max]``."""
    rng = np.random.default_rng(seed)
    q = random_rotation(rng, n)
    d = rng.uniform(0.0, d_max, n)
    a = q.T @ np.diag(d) @ q
    return 0.5 * (a + a.T)


def convex_seed(seed: int, n: int, d_max: float = 1.0, eps: float = 0.5, center_range: float = 0.25) -> ConvexSeed:
    rng = np.random.default_rng(seed)
    q = random_rotation(rng, n)
    d = rng.uniform(0.0, d_max, n)
    a = q.T @ np.diag(d) @ q
    c = rng.uniform(-center_range, center_range, n)
    return ConvexSeed(0.5 * (a + a.T), float(eps), c)


def _check_psd(a):
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ConfigurationError(f"A must be a square matrix, got shape {a.shape}")
    if np.max(np.abs(a - a.T)) > 1e-12:
        raise ConfigurationError("A must be symmetric")
    lo = np.linalg.eigvalsh(a)[0]
    if lo < -1e-12:
        raise ConfigurationError(f"A must be positive semidefinite (smallest eigenvalue {lo:.3e})")
    return a


def _normalise(values, grid, parameters):
    target = parameters.get("normalize_oscillation")
    if target:
        members = make_ball_mask(grid, None, float(target["radius"])).members
        osc = values[members].max() - values[members].min()
        if osc > 0:
            values = values * (float(target["M"]) / osc)
    return values * float(parameters.get("scale", 1.0))


def generate_initial_data(kind: str, parameters: dict | None, seed: int | None, grid: GridSpec) -> ScalarField:
    """Build initial data on ``grid``.

    ``quadratic``
        ``x.Ax/2`` with ``parameters["A"]`` (must be PSD); when ``A`` is
        omitted a seeded PSD matrix with eigenvalues in ``[0, d_max]`` is used.
    ``seeded_convex``
        ``x.(Q^T D Q)x/2 + eps sqrt(1 + |x - c|^2)`` with a seeded rotation
        ``Q``, ``D`` uniform in ``[0, d_max]`` and ``c`` uniform in
        ``[-center_range, center_range]^n``. Parameters: ``d_max`` (1.0),
        ``eps`` (0.5), ``center_range`` (0.25).
    ``file``
        Snapshot ``index`` (default last) of the trajectory saved at ``path``.

    Every kind honours ``scale`` and ``normalize_oscillation`` (a mapping
    with ``M`` and ``radius``: the field is rescaled so that its oscillation
    over the ball of that radius equals ``M``).
    """
    parameters = dict(parameters or {})
    pts = grid.points()
    if kind == "quadratic":
        if "A" in parameters:
            a = _check_psd(parameters["A"])
            if a.shape[0] != grid.dim:
                raise ConfigurationError(f"A is {a.shape[0]}x{a.shape[0]}, grid dim is {grid.dim}")
        else:
            a = random_psd(0 if seed is None else seed, grid.dim, float(parameters.get("d_max", 1.0)))
        values = 0.5 * np.einsum("...i,ij,...j->...", pts, a, pts)
    elif kind == "seeded_convex":
        eps = float(parameters.get("eps", 0.5))
        if eps < 0:
            raise ConfigurationError("eps must be nonnegative")
        cs = convex_seed(
            0 if seed is None else seed,
            grid.dim,
            float(parameters.get("d_max", 1.0)),
            eps,
            float(parameters.get("center_range", 0.25)),
        )
        values = cs(pts)
    elif kind == "file":
        from .persistence import load_trajectory

        traj = load_trajectory(parameters["path"])
        if traj.grid != grid:
            raise ConfigurationError("trajectory file grid does not match the requested grid")
        values = traj.data[int(parameters.get("index", -1))]
    else:
        raise ConfigurationError(f"unknown initial data kind {kind!r}; expected one of {KINDS}")
    return ScalarField(grid, _normalise(values, grid, parameters))
