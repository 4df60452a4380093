"""DFTs of complex fields, low-pass truncation, spectrum rotation/reflection.

Amplitude convention: sum_i f_i exp(-2 pi i w.p_i) * dV with physical node
coordinates p_i, stored DC-centered row-major. Interpolation-heavy paths work
on the center-referenced form C(w) = A(w) exp(+2 pi i w.c) with c the grid's
DC-center node: the physical phases oscillate at the Nyquist rate across the
index lattice and would wreck any multilinear stencil, while C is smooth and
exactly N-periodic; the phases are restored analytically afterwards.
"""

from __future__ import annotations

import struct

import numpy as np

from ._fallback import _interp_window
from .descriptor import ComplexField, SampleGrid

__all__ = [
    "Spectrum",
    "TruncatedSpectrum",
    "VectorSpectrum",
    "forward_dft",
    "inverse_dft",
    "truncate",
    "ranked_truncate",
    "zero_padded",
    "rotate_reflect_spectrum",
    "write_spectrum",
    "read_spectrum",
]


class Spectrum:
    """Full DFT amplitudes on the dual grid (same dims, spacing 1/(N_a h))."""

    def __init__(self, grid, amplitudes):
        amplitudes = np.asarray(amplitudes, dtype=np.complex128).ravel()
        if len(amplitudes) != grid.node_count:
            raise ValueError("amplitude count does not match grid")
        if not np.all(np.isfinite(amplitudes.view(np.float64))):
            raise ValueError("spectrum contains non-finite amplitudes")
        self.grid = grid
        self.amplitudes = amplitudes

    @property
    def m(self):
        return self.grid.node_count

    def reshaped(self):
        return self.amplitudes.reshape(self.grid.dims)


class TruncatedSpectrum:
    """Centered low-frequency window; discarded modes are exact zeros downstream."""

    def __init__(self, grid, m_prime, amplitudes):
        side = _window_side(grid.dimension, m_prime)
        for n in grid.dims:
            if side > n:
                raise ValueError("truncation window exceeds parent dims")
        amplitudes = np.asarray(amplitudes, dtype=np.complex128).ravel()
        if len(amplitudes) != m_prime:
            raise ValueError("amplitude count does not match m_prime")
        self.grid = grid
        self.m_prime = int(m_prime)
        self.window = (side,) * grid.dimension
        self.amplitudes = amplitudes

    def window_slices(self):
        return tuple(
            slice(n // 2 - w // 2, n // 2 + w // 2) for n, w in zip(self.grid.dims, self.window)
        )

    def reshaped(self):
        return self.amplitudes.reshape(self.window)


class VectorSpectrum:
    """d componentwise Spectra sharing one grid."""

    def __init__(self, components):
        grids = {c.grid for c in components}
        if len(components) != components[0].grid.dimension or len(grids) != 1:
            raise ValueError("need d components on one shared grid")
        self.components = list(components)
        self.grid = components[0].grid


def _window_side(d, m_prime):
    side = round(m_prime ** (1.0 / d))
    for cand in (side - 1, side, side + 1):
        if cand >= 2 and cand % 2 == 0 and cand ** d == m_prime:
            return cand
    raise ValueError(f"m_prime={m_prime} is not an even-sided centered window in {d}D")


# ---------------------------------------------------------------------------
# transforms


def _axis_phases(grid, sign, reference):
    """Per-axis factors exp(sign * 2 pi i w_a * r_a), broadcastable to dims."""
    out = []
    for a, freqs in enumerate(grid.freq_axes()):
        ph = np.exp(sign * 2j * np.pi * freqs * reference[a])
        shape = [1] * grid.dimension
        shape[a] = grid.dims[a]
        out.append(ph.reshape(shape))
    return out


def forward_dft(field):
    """Amplitudes sum_i f_i exp(-2 pi i w.p_i) dV via FFT plus origin phases."""
    g = field.grid
    F = np.fft.fftshift(np.fft.fftn(field.values.reshape(g.dims))) * g.cell_volume
    for ph in _axis_phases(g, -1.0, g.origin):
        F = F * ph
    return Spectrum(g, F.ravel())


def inverse_dft(spectrum):
    """Exact inverse of forward_dft (normalization 1 / (m dV))."""
    g = spectrum.grid
    F = spectrum.reshaped().copy()
    for ph in _axis_phases(g, +1.0, g.origin):
        F = F * ph
    vals = np.fft.ifftn(np.fft.ifftshift(F)) / g.cell_volume
    return ComplexField(g, vals.ravel())


def truncate(spectrum, m_prime):
    """Keep the DC-centered cubic window of m_prime modes."""
    g = spectrum.grid
    side = _window_side(g.dimension, m_prime)
    t = TruncatedSpectrum(g, m_prime, np.zeros(m_prime, dtype=np.complex128))
    t.amplitudes = spectrum.reshaped()[t.window_slices()].ravel().copy()
    return t


def ranked_truncate(spectrum, m_prime):
    """Magnitude-ranked alternative: zero all but the m_prime largest modes.

    Returned as a full Spectrum since the survivors are scattered; downstream
    treats zeros exactly like window-truncated modes.
    """
    if not 0 < m_prime <= spectrum.m:
        raise ValueError("m_prime out of range")
    order = np.argsort(-np.abs(spectrum.amplitudes), kind="stable")[:m_prime]
    out = np.zeros_like(spectrum.amplitudes)
    out[order] = spectrum.amplitudes[order]
    return Spectrum(spectrum.grid, out)


def zero_padded(truncated):
    """Embed a TruncatedSpectrum back into full dims with exact zeros."""
    full = np.zeros(truncated.grid.dims, dtype=np.complex128)
    full[truncated.window_slices()] = truncated.reshaped()
    return Spectrum(truncated.grid, full.ravel())


# ---------------------------------------------------------------------------
# rotation / reflection


def check_rotation(R, d):
    R = np.asarray(R, dtype=np.float64)
    if R.shape != (d, d):
        raise ValueError("rotation matrix has wrong shape")
    if np.max(np.abs(R.T @ R - np.eye(d))) > 1e-9 or abs(np.linalg.det(R) - 1.0) > 1e-9:
        raise ValueError("rotation must be proper orthogonal")
    return R


def _window_freqs(grid, window):
    axes = [
        (np.arange(w) - w // 2) * dw for w, dw in zip(window, grid.delta_omega())
    ]
    mesh = np.meshgrid(*axes, indexing="ij")
    return np.stack([g.ravel() for g in mesh], axis=1)


def center_window(spec):
    """Center-referenced window array C(w) = A(w) exp(+2 pi i w.c), reshaped."""
    g = spec.grid
    if isinstance(spec, TruncatedSpectrum):
        window = spec.window
        amps = spec.reshaped()
    else:
        window = g.dims
        amps = spec.reshaped()
    W = _window_freqs(g, window)
    phase = np.exp(2j * np.pi * (W @ g.center())).reshape(window)
    return amps * phase


def _restore_phys(grid, window, C):
    W = _window_freqs(grid, window)
    phase = np.exp(-2j * np.pi * (W @ grid.center())).reshape(window)
    return C * phase


def rotate_reflect_spectrum(spec, R):
    """Sample the reflected spectrum at rotated frequencies: out(w) = A(-R^T w).

    Multilinear in the center-referenced representation with the physical
    phase restored exactly at the target frequency. Full spectra wrap
    periodically (they are mod-N objects); truncated windows read zero
    outside. R = identity therefore reduces to the exact index negation.
    """
    g = spec.grid
    R = check_rotation(R, g.dimension)
    truncated = isinstance(spec, TruncatedSpectrum)
    window = spec.window if truncated else g.dims
    C = center_window(spec)
    W = _window_freqs(g, window)
    nu = -(W @ R)
    dom = np.asarray(g.delta_omega())
    u = nu / dom + np.asarray([w // 2 for w in window])
    V, _ = _interp_window(C, u, wrap=not truncated)
    # out(w) = C(nu) exp(-2 pi i nu.c) with nu = -R^T w
    out = V * np.exp(-2j * np.pi * (nu @ g.center()))
    if truncated:
        return TruncatedSpectrum(g, spec.m_prime, out)
    return Spectrum(g, out)


# ---------------------------------------------------------------------------
# spectrum file format: GSPC, little-endian, complex64 window payload


_MAGIC = b"GSPC"
_VERSION = 1


def write_spectrum(spec, path):
    g = spec.grid
    m_prime = spec.m_prime if isinstance(spec, TruncatedSpectrum) else g.node_count
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<II", _VERSION, g.dimension))
        fh.write(struct.pack(f"<{g.dimension}I", *g.dims))
        fh.write(struct.pack("<d", g.spacing))
        fh.write(struct.pack(f"<{g.dimension}d", *g.origin))
        fh.write(struct.pack("<Q", m_prime))
        fh.write(spec.amplitudes.astype(np.complex64).tobytes())


def read_spectrum(path):
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError("not a GSPC file")
        version, d = struct.unpack("<II", fh.read(8))
        if version != _VERSION:
            raise ValueError(f"unsupported GSPC version {version}")
        dims = struct.unpack(f"<{d}I", fh.read(4 * d))
        (spacing,) = struct.unpack("<d", fh.read(8))
        origin = struct.unpack(f"<{d}d", fh.read(8 * d))
        (m_prime,) = struct.unpack("<Q", fh.read(8))
        grid = SampleGrid(d, tuple(dims), tuple(origin), spacing)
        amps = np.frombuffer(fh.read(8 * m_prime), dtype=np.complex64).astype(np.complex128)
    if m_prime == grid.node_count:
        return Spectrum(grid, amps)
    return TruncatedSpectrum(grid, m_prime, amps)
