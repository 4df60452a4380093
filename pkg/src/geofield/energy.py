"""Complementarity score, geometric energy, force and torque.

Full translational landscapes go through the inverse transform; single
configurations go through the cascade partial sum, which accepts any real
translation exactly (the exponential multiplier needs no interpolation).
Rotational gradients differentiate the interpolated mode sum itself, so they
agree with finite differences of the score to roundoff; the moment-spectrum
form is kept as an alternate cross-check path.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import backend
from .descriptor import ComplexField, vector_density
from .spectral import (
    Spectrum,
    TruncatedSpectrum,
    VectorSpectrum,
    center_window,
    check_rotation,
    forward_dft,
    truncate,
)

__all__ = [
    "Configuration",
    "PartAsset",
    "EnergyEval",
    "score_field",
    "score_at",
    "translational_gradient",
    "rotational_gradient",
    "evaluate",
]


class Configuration:
    """Relative pose of the moving part: p -> R p + t."""

    def __init__(self, rotation, translation):
        t = np.asarray(translation, dtype=np.float64).ravel()
        self.rotation = check_rotation(rotation, len(t))
        self.translation = t

    @classmethod
    def from_angle(cls, theta, translation):
        c, s = np.cos(theta), np.sin(theta)
        return cls(np.array([[c, -s], [s, c]]), translation)

    @property
    def dimension(self):
        return len(self.translation)


class PartAsset:
    """Per-part precomputed spectra plus grid metadata.

    The moving part carries the componentwise moment spectra (transforms of
    rho(p) * p_k) used by the alternate rotational-gradient path. solid_box is
    the part's bounding box in grid coordinates, needed for wrap flagging.
    """

    def __init__(self, solid_id, spectrum, truncated=None, vector=None,
                 movable=False, solid_box=None):
        if movable and vector is None:
            raise ValueError("movable part requires its vector spectrum")
        if not movable and vector is not None:
            raise ValueError("vector spectrum only belongs to the movable part")
        self.solid_id = solid_id
        self.spectrum = spectrum
        self.truncated = truncated
        self.vector = vector
        self.movable = movable
        self.grid = spectrum.grid
        if solid_box is not None:
            solid_box = (np.asarray(solid_box[0], float), np.asarray(solid_box[1], float))
        self.solid_box = solid_box
        self._windows = {}
        self._moment_windows = {}

    @classmethod
    def from_field(cls, solid_id, fld, movable=False, m_prime=None, solid_box=None):
        spec = forward_dft(fld)
        trunc = truncate(spec, m_prime) if m_prime else None
        vec = None
        if movable:
            vec = VectorSpectrum([forward_dft(c) for c in vector_density(fld).components])
        return cls(solid_id, spec, trunc, vec, movable, solid_box)

    @property
    def full_available(self):
        return isinstance(self.spectrum, Spectrum)

    def max_modes(self):
        return self.spectrum.m_prime if isinstance(self.spectrum, TruncatedSpectrum) \
            else self.grid.node_count

    def window(self, m_prime=None):
        """Center-referenced window array for the given mode budget.

        Returns (C, wrap): wrap means the window is the full mod-N spectrum.
        """
        key = m_prime or 0
        if key not in self._windows:
            if isinstance(self.spectrum, TruncatedSpectrum):
                if m_prime is None or m_prime > self.spectrum.m_prime:
                    raise ValueError("mode budget exceeds the stored truncated window")
                src = self.spectrum if m_prime == self.spectrum.m_prime else _rewindow(
                    self.spectrum, m_prime
                )
                self._windows[key] = (center_window(src), False)
            elif m_prime is None or m_prime == self.grid.node_count:
                self._windows[key] = (center_window(self.spectrum), True)
            else:
                self._windows[key] = (center_window(truncate(self.spectrum, m_prime)), False)
        return self._windows[key]

    def moment_window(self, m_prime=None):
        if self.vector is None:
            raise ValueError("part has no vector spectrum")
        key = m_prime or 0
        if key not in self._moment_windows:
            comps = []
            for comp in self.vector.components:
                src = comp if m_prime in (None, self.grid.node_count) else truncate(comp, m_prime)
                comps.append(center_window(src))
            self._moment_windows[key] = comps
        return self._moment_windows[key]


def _rewindow(truncated, m_prime):
    """Shrink a stored truncated window to a smaller centered one."""
    from .spectral import _window_side

    side = _window_side(truncated.grid.dimension, m_prime)
    w = truncated.window[0]
    sl = tuple(slice(w // 2 - side // 2, w // 2 + side // 2) for _ in truncated.window)
    return TruncatedSpectrum(truncated.grid, m_prime, truncated.reshaped()[sl].ravel())


@dataclass
class EnergyEval:
    """One evaluated configuration; energy = -Re(score) by definition."""

    score: complex
    energy: float
    force: np.ndarray
    torque: np.ndarray
    eval_time_us: float
    modes_used: int


# ---------------------------------------------------------------------------
# cascade plumbing


def _check_pair(asset1, asset2):
    if asset1.grid != asset2.grid:
        raise ValueError("grid mismatch")


def _cascade(asset1, asset2, config, m_prime):
    _check_pair(asset1, asset2)
    g = asset1.grid
    if config.dimension != g.dimension:
        raise ValueError("configuration dimension mismatch")
    C1, wrap1 = asset1.window(m_prime)
    C2, wrap2 = asset2.window(m_prime)
    wrap = wrap1 and wrap2
    c = g.center()
    R, t = config.rotation, config.translation
    t_eff = t - c + R @ c
    dcell = 1.0 / (g.node_count * g.cell_volume)
    return backend.cascade(C1, C2, wrap, g.delta_omega(), dcell, R, t_eff, c)


def score_at(asset1, asset2, config, m_prime=None):
    """Cascade partial sum at one configuration, exact in t."""
    return complex(_cascade(asset1, asset2, config, m_prime)[0])


def translational_gradient(asset1, asset2, config, m_prime=None):
    """d score / dt per axis (the 2 pi i w multiplier under the mode sum)."""
    d = asset1.grid.dimension
    return np.asarray(_cascade(asset1, asset2, config, m_prime)[1:1 + d])


def rotational_gradient(asset1, asset2, config, m_prime=None, path="interp"):
    """d score / d theta about each axis (one generator in 2D, three in 3D).

    path="interp" differentiates the interpolated mode sum exactly;
    path="vector" evaluates the moment-spectrum form instead. Both require
    the moving part's vector spectrum to be present.
    """
    if asset2.vector is None:
        raise ValueError("moving part has no vector spectrum")
    d = asset1.grid.dimension
    if path == "interp":
        return np.asarray(_cascade(asset1, asset2, config, m_prime)[1 + d:])
    if path != "vector":
        raise ValueError(f"unknown gradient path {path!r}")
    return _rotational_gradient_vector(asset1, asset2, config, m_prime)


def _rotational_gradient_vector(asset1, asset2, config, m_prime):
    """Moment-spectrum rotational gradient.

    Decomposes -rho(p) p = -rho(p)(p - c) - c rho(p) about the grid center, so
    the first piece interpolates the center-referenced moment windows and the
    second reduces to the exact phase term. Interpolation does not commute
    with the p-weighting, which is why this path only tracks the interp path
    to a few percent; it exists as an independent cross-check.
    """
    _check_pair(asset1, asset2)
    g = asset1.grid
    c = g.center()
    R, t = config.rotation, config.translation
    C1, wrap1 = asset1.window(m_prime)
    C2, wrap2 = asset2.window(m_prime)
    wrap = wrap1 and wrap2
    moments = asset2.moment_window(m_prime)
    window = C1.shape
    dom = np.asarray(g.delta_omega())
    axes = [(np.arange(w) - w // 2) * dw for w, dw in zip(window, dom)]
    W = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    nu = -(W @ R)
    u = nu / dom + np.asarray([w // 2 for w in window])
    from ._fallback import _interp_window, _rotation_generators

    V, _ = _interp_window(C2, u, wrap)
    # center-referenced moment windows of rho * p_k; shift to -(p - c) weighting
    M = [-(_interp_window(mw, u, wrap)[0]) + c[a] * V for a, mw in enumerate(moments)]
    t_eff = t - c + R @ c
    phase = np.exp(2j * np.pi * (W @ t_eff))
    base = C1.ravel() * phase
    dcell = 1.0 / (g.node_count * g.cell_volume)
    out = []
    for G in _rotation_generators(g.dimension):
        # (R^T Omega w)_a = sum_b (R^T Omega)[a,b] w_b; as rows: W @ (R^T Omega)^T
        dirs = W @ (R.T @ G).T
        samp = sum(dirs[:, a] * M[a] for a in range(g.dimension))
        grad = 2j * np.pi * np.sum(base * samp)
        # the -c rho piece contributes the exact center phase term
        extra = 2j * np.pi * np.sum(base * (W @ (G @ (R @ c))) * V)
        out.append(dcell * (grad + extra))
    return np.asarray(out)


def evaluate(asset1, asset2, config, m_prime=None):
    """Score, energy, force, torque and timing for one configuration."""
    t0 = time.perf_counter_ns()
    res = _cascade(asset1, asset2, config, m_prime)
    us = (time.perf_counter_ns() - t0) / 1000.0
    d = asset1.grid.dimension
    score = complex(res[0])
    force = np.real(res[1:1 + d]).copy()
    torque = np.real(res[1 + d:]).copy()
    modes = m_prime if m_prime else asset1.max_modes()
    return EnergyEval(
        score=score,
        energy=-score.real,
        force=force,
        torque=torque if d == 3 else torque[:1],
        eval_time_us=us,
        modes_used=int(modes),
    )


# ---------------------------------------------------------------------------
# full translational landscape


def _rotated_box(box, R):
    lo, hi = box
    d = len(lo)
    corners = np.stack(np.meshgrid(*[(lo[a], hi[a]) for a in range(d)], indexing="ij"), axis=-1)
    corners = corners.reshape(-1, d) @ R.T
    return corners.min(axis=0), corners.max(axis=0)


def _wrap_mask(grid, asset1, asset2, R):
    """True where the translated support can touch the circular-wrap seam.

    Clean translations keep the moved part's box, dilated by half the fixed
    part's box diagonal, inside the grid box (the same rule that sizes pair
    grids); everything else is flagged, never silently returned.
    """
    if asset1.solid_box is None or asset2.solid_box is None:
        return np.zeros(grid.dims, dtype=bool)  # no support info: nothing provable
    glo, ghi = grid.box()
    rlo, rhi = _rotated_box(asset2.solid_box, R)
    r1 = 0.5 * float(np.linalg.norm(asset1.solid_box[1] - asset1.solid_box[0]))
    lo_ok = glo + r1 - rlo  # t >= this per axis
    hi_ok = ghi - r1 - rhi  # t <= this per axis
    mask = np.zeros(grid.dims, dtype=bool)
    for a, ax in enumerate(grid.axes()):
        shape = [1] * grid.dimension
        shape[a] = grid.dims[a]
        bad = ((ax < lo_ok[a]) | (ax > hi_ok[a])).reshape(shape)
        mask |= bad
    return mask


def score_field(asset1, asset2, R, m_prime=None):
    """Score over every grid translation at fixed rotation R.

    Pointwise product of the fixed spectrum with the rotated-reflected moving
    spectrum, inverse transformed; node (j0..jd) holds the score at t equal to
    that node's physical coordinate. wrap_mask marks translations whose moved
    support leaves the padded box.
    """
    _check_pair(asset1, asset2)
    g = asset1.grid
    R = check_rotation(R, g.dimension)
    C1, wrap1 = asset1.window(m_prime)
    C2, wrap2 = asset2.window(m_prime)
    wrap = wrap1 and wrap2
    window = C1.shape
    dom = np.asarray(g.delta_omega())
    axes = [(np.arange(w) - w // 2) * dw for w, dw in zip(window, dom)]
    W = np.stack([a.ravel() for a in np.meshgrid(*axes, indexing="ij")], axis=1)
    nu = -(W @ R)
    u = nu / dom + np.asarray([w // 2 for w in window])
    from ._fallback import _interp_window

    V, _ = _interp_window(C2, u, wrap)
    c = g.center()
    # Q(w) = C1 V exp(2 pi i w.(R c - c)); embed into full dims, then the
    # landscape over lattice translations is one inverse FFT with origin phases
    Q = (C1.ravel() * V * np.exp(2j * np.pi * (W @ (R @ c - c)))).reshape(window)
    full = np.zeros(g.dims, dtype=np.complex128)
    sl = tuple(slice(n // 2 - w // 2, n // 2 + w // 2) for n, w in zip(g.dims, window))
    full[sl] = Q
    for a, freqs in enumerate(g.freq_axes()):
        shape = [1] * g.dimension
        shape[a] = g.dims[a]
        full = full * np.exp(2j * np.pi * freqs * g.origin[a]).reshape(shape)
    land = np.fft.ifftn(np.fft.ifftshift(full)) / g.cell_volume
    return ComplexField(g, land.ravel(), wrap_mask=_wrap_mask(g, asset1, asset2, R))
