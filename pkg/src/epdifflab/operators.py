"""Fourier multipliers acting on spectral fields, with norms and inner products.

A multiplier applies its matrix symbol diagonally in frequency:
``(a(D) u)^(k) = a(k/L) u^(k)``.  Elliptic multipliers additionally carry a
precomputed inverse table, so inversion in the time loop costs one
matrix-vector product per mode.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .grid import GridMismatchError, SpectralVectorField, TorusGrid
from .symbols import ClassCertificate, MatrixSymbol, check_ellipticity, sobolev_weight


@dataclass(frozen=True, eq=False)
class FourierMultiplier:
    """Matrix symbol tabulated on a grid's frequency lattice.

    ``table`` holds ``a(k/L)`` with shape ``(n, ..., n, d, d)``; ``inv_table``
    is present only when the symbol's ellipticity certificate passed, and then
    satisfies ``table @ inv_table = I`` to 1e-13 at every mode.
    """

    symbol: MatrixSymbol
    grid: TorusGrid
    table: np.ndarray
    inv_table: Optional[np.ndarray] = None
    ellipticity: Optional[ClassCertificate] = None

    @classmethod
    def build(cls, symbol: MatrixSymbol, grid: TorusGrid) -> "FourierMultiplier":
        """Tabulate a symbol on the lattice without inverting it."""
        if symbol.dim != grid.dim:
            raise ValueError(f"symbol dim {symbol.dim} != grid dim {grid.dim}")
        pts = grid.frequency_points()
        table = symbol(pts).reshape(grid.shape + (grid.dim, grid.dim))
        return cls(symbol=symbol, grid=grid, table=table)

    @classmethod
    def build_elliptic(
        cls, symbol: MatrixSymbol, grid: TorusGrid, xi_max: float = 1e3
    ) -> "FourierMultiplier":
        """Tabulate an elliptic symbol together with its inverse table.

        Runs the ellipticity certificate first (out to ``xi_max``; lattice
        -sampled symbols should cap this at the represented band); a failing
        symbol is rejected, so ``apply_inverse`` is only ever available behind
        a passed check.
        """
        base = cls.build(symbol, grid)
        cert = check_ellipticity(symbol, xi_max=xi_max)
        if not cert.verdict:
            raise ValueError(f"symbol '{symbol.name}' failed the ellipticity check")
        inv = np.linalg.inv(base.table)
        resid = np.abs(base.table @ inv - np.eye(grid.dim)).max()
        if resid > 1e-13:
            raise ValueError(f"inverse table residual {resid:.3g} exceeds 1e-13")
        return cls(symbol=symbol, grid=grid, table=base.table, inv_table=inv, ellipticity=cert)

    @property
    def invertible(self) -> bool:
        return self.inv_table is not None


def apply(mult: FourierMultiplier, u: SpectralVectorField) -> SpectralVectorField:
    """Apply ``a(D)``: multiply each coefficient vector by the tabulated matrix."""
    if u.grid != mult.grid:
        raise GridMismatchError("field and multiplier live on different grids")
    out = np.einsum("...ij,j...->i...", mult.table, u.coeffs)
    return SpectralVectorField(u.grid, out)


def apply_inverse(mult: FourierMultiplier, w: SpectralVectorField) -> SpectralVectorField:
    """Apply ``a(D)^-1``; available only for multipliers built elliptic."""
    if mult.inv_table is None:
        raise ValueError("multiplier has no inverse table (not built as elliptic)")
    if w.grid != mult.grid:
        raise GridMismatchError("field and multiplier live on different grids")
    out = np.einsum("...ij,j...->i...", mult.inv_table, w.coeffs)
    return SpectralVectorField(w.grid, out)


def sobolev_norm(u: SpectralVectorField, q: float) -> float:
    """Discrete H^q norm: frequency sum with weight ``(1 + |2 pi k/L|^2)^(q/2)``.

    ``q = 0`` recovers the L^2 norm (Parseval); the norm is monotone in ``q``.
    Diagnostics quoting constants should remember the companion plain
    ``(1 + |k/L|^2)^(q/2)`` convention differs by powers of ``2 pi``.
    """
    grid = u.grid
    weight = sobolev_weight(q, grid.frequency_points()).reshape(grid.shape)
    total = np.sum(weight**2 * np.sum(np.abs(u.coeffs) ** 2, axis=0))
    return float(np.sqrt(total / grid.length**grid.dim))


def inner_product(mult: FourierMultiplier, u: SpectralVectorField, v: SpectralVectorField) -> float:
    """Metric pairing ``integral (A u) . v dx`` for Hermitian positive definite ``A``."""
    if not (mult.symbol.hermitian and mult.symbol.positive_definite):
        raise ValueError("inner products need a Hermitian positive definite symbol")
    if u.grid != mult.grid or v.grid != mult.grid:
        raise GridMismatchError("fields and multiplier live on different grids")
    au = np.einsum("...ij,j...->i...", mult.table, u.coeffs)
    total = np.sum(np.conj(v.coeffs) * au).real
    return float(total / mult.grid.length**mult.grid.dim)


def sobolev_multiplier(s: float, grid: TorusGrid) -> FourierMultiplier:
    """Convenience: the inertia operator ``(1 - Laplacian)^s`` on a grid, invertible."""
    from .symbols import sobolev_symbol

    return FourierMultiplier.build_elliptic(sobolev_symbol(s, grid.dim), grid)
