"""Pointwise geometry of the gradient graph ``x -> (x, Du(x))``.

All functions are vectorised: a "matrix" argument may be a single ``(n, n)``
array or a stack of shape ``(..., n, n)`` (for instance the output of
:func:`lagflow.grid.fd_hessian`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, RangeError
from .grid import ScalarField, fd_hessian, hessian_array

SYMMETRY_TOL = 1e-12
JACOBI_TOL = 1e-14
_MAX_SWEEPS = 50


@dataclass(frozen=True, eq=False)
class HessianSpectrum:
    """Ascending eigenvalues and orthonormal eigenvector frames.

    ``frame[..., :, k]`` is the unit eigenvector for ``eigenvalues[..., k]``.
    """

    eigenvalues: np.ndarray
    frame: np.ndarray

    @property
    def dim(self) -> int:
        return self.eigenvalues.shape[-1]

    def reconstruct(self) -> np.ndarray:
        q = self.frame
        return np.einsum("...ik,...k,...jk->...ij", q, self.eigenvalues, q)


@dataclass(frozen=True, eq=False)
class MetricData:
    """Induced metric ``g = I + S^2`` with inverse, volume element and ``b``."""

    g: np.ndarray
    g_inv: np.ndarray
    volume: np.ndarray
    b: np.ndarray


def _check_symmetric(s):
    if s.shape[-1] != s.shape[-2] or s.shape[-1] not in (1, 2, 3):
        raise ContractViolation(f"expected square matrices of size <= 3, got shape {s.shape}")
    asym = np.max(np.abs(s - np.swapaxes(s, -1, -2)), initial=0.0)
    if asym > SYMMETRY_TOL:
        raise ContractViolation(f"matrix is not symmetric (max |S - S^T| = {asym:.3e})")


def _eigvals_2x2(s):
    a, b, c = s[..., 0, 0], s[..., 0, 1], s[..., 1, 1]
    m = 0.5 * (a + c)
    r = np.hypot(0.5 * (a - c), b)
    return m - r, m + r


def _fix_signs(q):
    # Make the largest-magnitude component of every column positive. Near-ties
    # go to the lowest index so that e.g. (1, -1)/sqrt(2) keeps its sign.
    mag = np.abs(q)
    top = mag.max(axis=-2, keepdims=True)
    first = np.argmax(mag >= top * (1.0 - 1e-12), axis=-2)
    lead = np.take_along_axis(q, first[..., None, :], axis=-2)
    return q * np.where(lead < 0, -1.0, 1.0) + 0.0


def _eigen_2x2(s):
    a, b, c = s[..., 0, 0], s[..., 0, 1], s[..., 1, 1]
    lo, hi = _eigvals_2x2(s)
    # eigenvector of the larger eigenvalue from whichever row of (S - hi I)
    # gives the better-conditioned direction
    v1 = np.stack([b, hi - a], axis=-1)
    v2 = np.stack([hi - c, b], axis=-1)
    use1 = np.sum(v1 * v1, axis=-1) >= np.sum(v2 * v2, axis=-1)
    v = np.where(use1[..., None], v1, v2)
    nrm = np.linalg.norm(v, axis=-1)
    degenerate = nrm == 0.0
    v = np.where(degenerate[..., None], np.array([0.0, 1.0]), v / np.where(degenerate, 1.0, nrm)[..., None])
    w = np.stack([v[..., 1], -v[..., 0]], axis=-1)
    q = np.stack([w, v], axis=-1)
    return np.stack([lo, hi], axis=-1), _fix_signs(q)


def _jacobi_3x3(s):
    a = np.array(s, dtype=float, copy=True)
    batch = a.shape[:-2]
    v = np.broadcast_to(np.eye(3), a.shape).copy()
    scale = np.sqrt(np.sum(a * a, axis=(-2, -1)))
    for _ in range(_MAX_SWEEPS):
        off = np.sqrt(2.0 * (a[..., 0, 1] ** 2 + a[..., 0, 2] ** 2 + a[..., 1, 2] ** 2))
        if np.all(off <= JACOBI_TOL * scale):
            break
        for p, q in ((0, 1), (0, 2), (1, 2)):
            apq = a[..., p, q]
            active = apq != 0.0
            safe = np.where(active, apq, 1.0)
            theta = (a[..., q, q] - a[..., p, p]) / (2.0 * safe)
            t = np.where(theta >= 0, 1.0, -1.0) / (np.abs(theta) + np.hypot(theta, 1.0))
            t = np.where(active, t, 0.0)
            c = 1.0 / np.sqrt(t * t + 1.0)
            sn = t * c
            rot = np.broadcast_to(np.eye(3), batch + (3, 3)).copy()
            rot[..., p, p] = c
            rot[..., q, q] = c
            rot[..., p, q] = sn
            rot[..., q, p] = -sn
            a = np.einsum("...ki,...kl,...lj->...ij", rot, a, rot)
            a[..., p, q] = 0.0
            a[..., q, p] = 0.0
            v = v @ rot
    lam = np.diagonal(a, axis1=-2, axis2=-1)
    order = np.argsort(lam, axis=-1, kind="stable")
    lam = np.take_along_axis(lam, order, axis=-1)
    v = np.take_along_axis(v, order[..., None, :], axis=-1)
    return lam, _fix_signs(v)


def eigen_sym(s) -> HessianSpectrum:
    """Eigen-decomposition of symmetric 1x1, 2x2 or 3x3 matrices.

    Closed form for dimensions 1 and 2; cyclic Jacobi rotations for
    dimension 3, iterated until the off-diagonal Frobenius norm drops below
    ``1e-14 * ||S||``. Eigenvalues are ascending and every eigenvector has a
    positive largest-magnitude component.
    """
    s = np.asarray(s, dtype=float)
    _check_symmetric(s)
    n = s.shape[-1]
    if n == 1:
        return HessianSpectrum(s[..., 0].copy(), np.ones(s.shape))
    if n == 2:
        lam, q = _eigen_2x2(s)
    else:
        lam, q = _jacobi_3x3(s)
    return HessianSpectrum(lam, q)


def eigenvalues_sym(s) -> np.ndarray:
    """Ascending eigenvalues only (no symmetry check, no frames).

    This is the hot path of the time stepper. It agrees with
    ``eigen_sym(s).eigenvalues``.
    """
    s = np.asarray(s, dtype=float)
    n = s.shape[-1]
    if n == 1:
        return s[..., 0]
    if n == 2:
        return np.stack(_eigvals_2x2(s), axis=-1)
    return _jacobi_3x3(s)[0]


def lagrangian_angle(spectrum) -> np.ndarray:
    """Sum of ``arctan`` of the eigenvalues.

    Accepts a :class:`HessianSpectrum` or a raw eigenvalue array whose last
    axis runs over eigenvalues.
    """
    lam = spectrum.eigenvalues if isinstance(spectrum, HessianSpectrum) else np.asarray(spectrum)
    return np.sum(np.arctan(lam), axis=-1)


def log_volume(lam) -> np.ndarray:
    """``log V = 1/2 * sum log(1 + lam_i^2)``, overflow-safe."""
    a = np.abs(np.asarray(lam, dtype=float))
    big = a > 1.0
    safe = np.where(big, a, 1.0)
    # log(1 + a^2)/2 = log a + log1p(a^-2)/2 once a^2 could overflow
    terms = np.where(big, np.log(safe) + 0.5 * np.log1p((1.0 / safe) ** 2), 0.5 * np.log1p(np.where(big, 0.0, a) ** 2))
    return np.sum(terms, axis=-1)


def volume_b(lam) -> np.ndarray:
    """``b = V^(1/n)`` straight from eigenvalues."""
    lam = np.asarray(lam)
    return np.exp(log_volume(lam) / lam.shape[-1])


def induced_metric(spectrum: HessianSpectrum) -> MetricData:
    lam, q = spectrum.eigenvalues, spectrum.frame
    n = lam.shape[-1]
    diag = 1.0 + lam * lam
    g = np.einsum("...ik,...k,...jk->...ij", q, diag, q)
    g_inv = np.einsum("...ik,...k,...jk->...ij", q, 1.0 / diag, q)
    logv = log_volume(lam)
    return MetricData(g, g_inv, np.exp(logv), np.exp(logv / n))


def metric_from_hessian(s) -> MetricData:
    return induced_metric(eigen_sym(s))


def covariant_grad_sq(metric: MetricData, grad_f) -> np.ndarray:
    """``g^{ij} f_i f_j``, the squared length of a gradient in the metric."""
    grad_f = np.asarray(grad_f, dtype=float)
    return np.einsum("...ij,...i,...j->...", metric.g_inv, grad_f, grad_f)


def _as_array(x):
    return x.values if isinstance(x, ScalarField) else np.asarray(x, dtype=float)


def apply_L(traj, derived, time_index: int) -> ScalarField:
    """Apply ``L = d/dt - g^{ij} d_ij`` to a field derived from snapshots.

    ``derived(u, t)`` maps a snapshot ``u`` (a ScalarField) at time ``t`` to
    a ScalarField or node array. The time derivative is the central
    difference over the neighbouring snapshots, the metric comes from the
    Hessian of the middle snapshot and the spatial second derivatives are
    :func:`fd_hessian` of the derived field.
    """
    nt = len(traj.times)
    if not 1 <= time_index <= nt - 2:
        raise RangeError(
            f"time_index {time_index} needs neighbours on both sides (trajectory has {nt} snapshots)"
        )
    grid = traj.grid
    times = traj.times
    prev = _as_array(derived(traj.snapshot(time_index - 1), times[time_index - 1]))
    mid = _as_array(derived(traj.snapshot(time_index), times[time_index]))
    nxt = _as_array(derived(traj.snapshot(time_index + 1), times[time_index + 1]))
    dt_f = (nxt - prev) / (times[time_index + 1] - times[time_index - 1])
    metric = metric_from_hessian(hessian_array(traj.data[time_index], grid.spacing))
    hf = fd_hessian(ScalarField(grid, mid))
    return ScalarField(grid, dt_f - np.einsum("...ij,...ij->...", metric.g_inv, hf))
