"""Spectral algebra for multi-channel circulant operators.

Convention: a template ``x`` (rows x cols x C) defines the operator
``Phi`` whose output at shift ``d`` is the inner product of
``np.roll(x, d, axis=(0, 1))`` with the filter. In the Fourier domain this is
``sum_c conj(x_hat[..., c]) * w_hat[..., c]`` at every frequency, so the
per-frequency Gram matrix of ``Phi^T Phi`` is ``a a^H`` with ``a = x_hat``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, NumericalError

IMAG_RTOL = 1e-6


@dataclass(frozen=True)
class Spectrum:
    coefficients: np.ndarray  # complex, rows x cols x channels

    @property
    def rows(self) -> int:
        return self.coefficients.shape[0]

    @property
    def cols(self) -> int:
        return self.coefficients.shape[1]

    @property
    def channels(self) -> int:
        return self.coefficients.shape[2]


@dataclass(frozen=True)
class ResponseMap:
    values: np.ndarray
    peak_row: int
    peak_col: int
    peak_value: float

    @classmethod
    def from_values(cls, values: np.ndarray) -> ResponseMap:
        # argmax on the flattened row-major grid returns the first maximum,
        # i.e. smallest row then smallest column
        flat = int(np.argmax(values))
        r, c = divmod(flat, values.shape[1])
        return cls(values=values, peak_row=r, peak_col=c, peak_value=float(values[r, c]))


def _as3d(grid) -> np.ndarray:
    a = np.asarray(grid)
    if a.ndim == 2:
        a = a[:, :, None]
    if a.ndim != 3 or min(a.shape) < 1:
        raise InvalidArgument(f"expected a rows x cols x channels grid, got shape {a.shape}")
    return a


def forward_spectrum(grid) -> Spectrum:
    """Unnormalized 2-D DFT of each channel."""
    return Spectrum(np.fft.fft2(_as3d(grid).astype(float, copy=False), axes=(0, 1)))


def inverse_spectrum(s: Spectrum | np.ndarray) -> np.ndarray:
    """Normalized inverse DFT, returning the real part.

    A spectrum that is not (numerically) Hermitian-symmetric signals a broken
    spectral computation and raises :class:`NumericalError`.
    """
    coeffs = s.coefficients if isinstance(s, Spectrum) else np.asarray(s)
    if coeffs.ndim == 2:
        coeffs = coeffs[:, :, None]
    out = np.fft.ifft2(coeffs, axes=(0, 1))
    scale = np.max(np.abs(out))
    resid = np.max(np.abs(out.imag))
    if resid > IMAG_RTOL * scale and resid > 1e-14:
        raise NumericalError(f"inverse transform has imaginary residue {resid:.3g} (scale {scale:.3g})")
    return out.real


def response_spectrum(template_spec: Spectrum, filter_spec: Spectrum) -> np.ndarray:
    t, f = template_spec.coefficients, filter_spec.coefficients
    if t.shape != f.shape:
        raise InvalidArgument(f"template {t.shape} and filter {f.shape} differ in shape")
    return np.sum(np.conj(t) * f, axis=2)


def correlation_response(template_spec: Spectrum, filter_spec: Spectrum) -> ResponseMap:
    """Filter response at every cyclic shift of the template."""
    r = inverse_spectrum(response_spectrum(template_spec, filter_spec)[:, :, None])[:, :, 0]
    return ResponseMap.from_values(r)


def per_frequency_solve(a, b, alpha, beta, mu, rhs, *, dense=False) -> np.ndarray:
    """Solve ``(alpha a a^H + beta b b^H + mu I) w = rhs`` independently per bin.

    ``a``, ``b`` and ``rhs`` have the channel axis last; any leading axes
    index frequency bins and are solved independently. The default path uses
    the rank-2 Woodbury identity (a 2x2 solve per bin); ``dense=True`` builds
    and factors the full ``C x C`` matrix per bin instead.
    """
    if not mu > 0:
        raise InvalidArgument(f"mu must be positive, got {mu}")
    if alpha < 0 or beta < 0:
        raise InvalidArgument("alpha and beta must be non-negative")
    a = np.asarray(a, dtype=complex)
    b = np.asarray(b, dtype=complex)
    rhs = np.asarray(rhs, dtype=complex)
    if not (a.shape == b.shape == rhs.shape):
        raise InvalidArgument(f"shape mismatch: a {a.shape}, b {b.shape}, rhs {rhs.shape}")
    if dense:
        return _dense_solve(a, b, alpha, beta, mu, rhs)

    # w = (rhs - U z) / mu  with  (mu I2 + D U^H U) z = D U^H rhs,  U = [a b], D = diag(alpha, beta)
    aa = np.sum(np.abs(a) ** 2, axis=-1)
    bb = np.sum(np.abs(b) ** 2, axis=-1)
    ab = np.sum(np.conj(a) * b, axis=-1)  # a^H b
    ar = np.sum(np.conj(a) * rhs, axis=-1)
    br = np.sum(np.conj(b) * rhs, axis=-1)
    m11 = mu + alpha * aa
    m12 = alpha * ab
    m21 = beta * np.conj(ab)
    m22 = mu + beta * bb
    r1 = alpha * ar
    r2 = beta * br
    det = m11 * m22 - m12 * m21
    z1 = (m22 * r1 - m12 * r2) / det
    z2 = (m11 * r2 - m21 * r1) / det
    return (rhs - a * z1[..., None] - b * z2[..., None]) / mu


def _dense_solve(a, b, alpha, beta, mu, rhs):
    c = a.shape[-1]
    m = alpha * a[..., :, None] * np.conj(a[..., None, :])
    m = m + beta * b[..., :, None] * np.conj(b[..., None, :])
    m = m + mu * np.eye(c)
    return np.linalg.solve(m, rhs[..., None])[..., 0]
