"""Reference DFT, FFT-based valid convolution and Gauss' 3-multiply complex product.

The DFT here is a direct O(n^2) summation; it exists to check correctness and
numerical accuracy, not speed.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np

from .model import half_spectrum_width

SYMMETRY_TOL = 1e-9
# looser bound for spectra computed in single precision
SYMMETRY_TOL_SINGLE = 1e-4


@functools.lru_cache(maxsize=256)
def _dft_matrix(n: int, inverse: bool) -> np.ndarray:
    k = np.arange(n)
    # reduce jk mod n before scaling so large indices keep full angle precision
    phase = (np.outer(k, k) % n) * (2.0 * np.pi / n)
    sign = 1.0 if inverse else -1.0
    mat = np.exp(sign * 1j * phase)
    if inverse:
        mat /= n
    mat.setflags(write=False)
    return mat


def dft_matrix(n: int, inverse: bool = False, dtype=np.complex128) -> np.ndarray:
    if n < 1:
        raise ValueError(f"DFT length must be >= 1, got {n}")
    return _dft_matrix(n, inverse).astype(dtype, copy=False)


def dft_1d(signal, inverse: bool = False) -> np.ndarray:
    """Forward (or inverse, scaled by 1/n) DFT of a sequence of any length."""
    x = np.asarray(signal, dtype=np.complex128)
    if x.ndim != 1 or x.size == 0:
        raise ValueError("dft_1d expects a non-empty 1-D sequence")
    return dft_matrix(x.size, inverse) @ x


def dft_2d(tiles: np.ndarray, inverse: bool = False, dtype=np.complex128) -> np.ndarray:
    """2-D DFT over the last two axes of a stack of square tiles."""
    n = tiles.shape[-1]
    f = dft_matrix(n, inverse, dtype)
    return f @ tiles.astype(dtype, copy=False) @ f.T


@dataclass(frozen=True)
class ComplexTensor:
    """Split real/imaginary storage, as used by the Gauss element-wise stage."""

    real: np.ndarray
    imag: np.ndarray

    def __post_init__(self) -> None:
        if np.shape(self.real) != np.shape(self.imag):
            raise ValueError(
                f"real and imaginary parts differ in shape: {np.shape(self.real)} vs {np.shape(self.imag)}"
            )

    @classmethod
    def from_complex(cls, z: np.ndarray) -> "ComplexTensor":
        z = np.asarray(z)
        return cls(np.ascontiguousarray(z.real), np.ascontiguousarray(z.imag))

    def to_complex(self) -> np.ndarray:
        return self.real + 1j * self.imag

    @property
    def shape(self) -> tuple[int, ...]:
        return np.shape(self.real)


def gauss_multiply(ur, ui, vr, vi):
    """(ur + i ui)(vr + i vi) with three real multiplications; returns (re, im)."""
    tmp1 = vr * (ur + ui)
    tmp2 = ur * (vi - vr)
    tmp3 = ui * (vr + vi)
    return tmp1 - tmp3, tmp1 + tmp2


def gauss_product(u: complex, v: complex) -> complex:
    re, im = gauss_multiply(u.real, u.imag, v.real, v.imag)
    return complex(re, im)


def conjugate_symmetric_pack(spectrum: np.ndarray) -> np.ndarray:
    """Keep the t x ceil((t+1)/2) non-redundant half of a real tile's spectrum.

    Raises ValueError if the input is not conjugate symmetric, i.e. it cannot
    be the spectrum of a real tile.
    """
    spectrum = np.asarray(spectrum)
    t = spectrum.shape[-1]
    if spectrum.shape[-2:] != (t, t):
        raise ValueError(f"expected square spectra, got shape {spectrum.shape}")
    idx = (-np.arange(t)) % t
    mirrored = np.conj(spectrum[..., idx[:, None], idx[None, :]])
    tol = SYMMETRY_TOL_SINGLE if spectrum.dtype == np.complex64 else SYMMETRY_TOL
    scale = max(1.0, float(np.max(np.abs(spectrum), initial=0.0)))
    if np.max(np.abs(spectrum - mirrored), initial=0.0) > tol * scale:
        raise ValueError("spectrum is not conjugate symmetric; input was not a real tile's DFT")
    return spectrum[..., : half_spectrum_width(t)].copy()


def conjugate_symmetric_unpack(packed: np.ndarray, t: int) -> np.ndarray:
    """Rebuild the full t x t spectrum from its packed half."""
    packed = np.asarray(packed)
    width = half_spectrum_width(t)
    if packed.shape[-2:] != (t, width):
        raise ValueError(f"expected packed shape (..., {t}, {width}), got {packed.shape}")
    full = np.empty(packed.shape[:-1] + (t,), dtype=packed.dtype)
    full[..., :width] = packed
    rows = (-np.arange(t)) % t
    for col in range(width, t):
        full[..., :, col] = np.conj(packed[..., rows, t - col])
    return full


def reversed_kernel_padded(kernel: np.ndarray, t: int) -> np.ndarray:
    """Flip the kernel(s) in both axes and zero-pad to t x t.

    Circular convolution with the flipped kernel leaves the valid
    cross-correlation in the last m x m block.
    """
    r = kernel.shape[-1]
    out = np.zeros(kernel.shape[:-2] + (t, t), dtype=kernel.dtype)
    out[..., :r, :r] = kernel[..., ::-1, ::-1]
    return out


def _precision(precision: str):
    if precision == "single":
        return np.float32, np.complex64
    if precision == "double":
        return np.float64, np.complex128
    raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")


def fft_conv_valid_2d(
    tile: np.ndarray, kernel: np.ndarray, m: int, precision: str = "double"
) -> np.ndarray:
    """m x m valid cross-correlation of a t x t tile with an r x r kernel via DFTs."""
    tile = np.asarray(tile)
    kernel = np.asarray(kernel)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square, got shape {kernel.shape}")
    r = kernel.shape[0]
    t = m + r - 1
    if m < 1 or tile.shape != (t, t):
        raise ValueError(f"m={m}, r={r} expects a {t}x{t} tile, got {tile.shape}")
    real_t, cplx_t = _precision(precision)
    spec_in = dft_2d(tile.astype(real_t), dtype=cplx_t)
    spec_k = dft_2d(reversed_kernel_padded(kernel.astype(real_t), t), dtype=cplx_t)
    circ = dft_2d(spec_in * spec_k, inverse=True, dtype=cplx_t).real
    return circ[r - 1 :, r - 1 :]
