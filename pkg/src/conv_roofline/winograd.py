"""Winograd minimal filtering F(m, r) via the Toom-Cook / Vandermonde construction.

For valid correlation y_i = sum_j g_j f_{i+j} of a length t = m + r - 1 input
with a length r filter, pick t - 1 finite points plus the point at infinity.
With V_k the t x k evaluation matrix of those points (infinity row
[0, ..., 0, 1]):

    A^T = V_m^T,   G = S V_r,   B^T = S^-1 V_t^-T

where S scales each finite row of G by the Lagrange denominator
1 / prod_{k != i}(p_i - p_k). All matrices are computed exactly with
rationals and then rounded once to float64.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

MAX_TILE = 8

DEFAULT_POINTS: tuple[Fraction, ...] = (
    Fraction(0),
    Fraction(1),
    Fraction(-1),
    Fraction(2),
    Fraction(-2),
    Fraction(1, 2),
    Fraction(-1, 2),
    Fraction(3),
    Fraction(-3),
    Fraction(1, 3),
    Fraction(-1, 3),
)


@dataclass(frozen=True)
class WinogradMatrices:
    A_t: np.ndarray
    B_t: np.ndarray
    G: np.ndarray
    points: tuple[Fraction, ...]

    @property
    def m(self) -> int:
        return self.A_t.shape[0]

    @property
    def r(self) -> int:
        return self.G.shape[1]

    @property
    def t(self) -> int:
        return self.B_t.shape[0]


def _evaluation_matrix(points: Sequence[Fraction], cols: int) -> list[list[Fraction]]:
    rows = [[p**j for j in range(cols)] for p in points]
    rows.append([Fraction(0)] * (cols - 1) + [Fraction(1)])
    return rows


def _inverse(matrix: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(matrix)
    aug = [row[:] + [Fraction(int(i == j)) for j in range(n)] for i, row in enumerate(matrix)]
    for col in range(n):
        pivot = next(i for i in range(col, n) if aug[i][col] != 0)
        aug[col], aug[pivot] = aug[pivot], aug[col]
        scale = aug[col][col]
        aug[col] = [v / scale for v in aug[col]]
        for i in range(n):
            if i != col and aug[i][col] != 0:
                factor = aug[i][col]
                aug[i] = [a - factor * b for a, b in zip(aug[i], aug[col])]
    return [row[n:] for row in aug]


@functools.lru_cache(maxsize=None)
def _matrices(m: int, r: int, points: tuple[Fraction, ...]) -> WinogradMatrices:
    t = m + r - 1
    finite = points[: t - 1]
    denominators = []
    for i, p in enumerate(finite):
        d = Fraction(1)
        for k, q in enumerate(finite):
            if k != i:
                d *= p - q
        denominators.append(d)
    scale = denominators + [Fraction(1)]

    v_m = _evaluation_matrix(finite, m)
    v_r = _evaluation_matrix(finite, r)
    v_inv = _inverse(_evaluation_matrix(finite, t))

    a_t = [[v_m[k][i] for k in range(t)] for i in range(m)]
    g = [[v_r[k][j] / scale[k] for j in range(r)] for k in range(t)]
    b_t = [[v_inv[l][k] * scale[k] for l in range(t)] for k in range(t)]

    def to_array(rows):
        arr = np.array([[float(v) for v in row] for row in rows], dtype=np.float64)
        arr.setflags(write=False)
        return arr

    return WinogradMatrices(A_t=to_array(a_t), B_t=to_array(b_t), G=to_array(g), points=finite)


def winograd_matrices(
    m: int, r: int, points: Sequence[Fraction | int | float] | None = None
) -> WinogradMatrices:
    """Transform matrices for F(m, r); interpolation points default to 0, 1, -1, 2, -2, 1/2, -1/2."""
    if m < 2 or r < 2:
        raise ValueError(f"F(m, r) needs m >= 2 and r >= 2, got m={m}, r={r}")
    t = m + r - 1
    if t > MAX_TILE:
        raise ValueError(f"F({m}, {r}) has tile size {t}; Winograd tiles are limited to {MAX_TILE}")
    pts = tuple(Fraction(p) for p in (DEFAULT_POINTS if points is None else points))
    if len(pts) < t - 1:
        raise ValueError(f"F({m}, {r}) needs {t - 1} interpolation points, got {len(pts)}")
    if len(set(pts[: t - 1])) != t - 1:
        raise ValueError("interpolation points must be distinct")
    return _matrices(m, r, pts)


def _dtype(precision: str):
    if precision == "single":
        return np.float32
    if precision == "double":
        return np.float64
    raise ValueError(f"precision must be 'single' or 'double', got {precision!r}")


def winograd_conv_2d(
    tile: np.ndarray,
    kernel: np.ndarray,
    m: int,
    precision: str = "double",
    points: Sequence[Fraction | int | float] | None = None,
) -> np.ndarray:
    """m x m valid cross-correlation of a t x t tile with an r x r kernel."""
    tile = np.asarray(tile)
    kernel = np.asarray(kernel)
    if kernel.ndim != 2 or kernel.shape[0] != kernel.shape[1]:
        raise ValueError(f"kernel must be square, got shape {kernel.shape}")
    r = kernel.shape[0]
    t = m + r - 1
    if tile.shape != (t, t):
        raise ValueError(f"F({m}, {r}) expects a {t}x{t} tile, got {tile.shape}")
    dt = _dtype(precision)
    mats = winograd_matrices(m, r, points)
    a_t, b_t, g = (x.astype(dt) for x in (mats.A_t, mats.B_t, mats.G))
    u = g @ kernel.astype(dt) @ g.T
    v = b_t @ tile.astype(dt) @ b_t.T
    return a_t @ (u * v) @ a_t.T
