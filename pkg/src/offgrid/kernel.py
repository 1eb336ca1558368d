"""RBF kernel matrices and the element-wise algebra used by the bandwidth search.

Every :class:`KernelMatrix` remembers the exact rational power it carries
relative to the base matrix it was derived from, so that ``sqrt``, product
and quotient chains can be checked and converted back to a bandwidth
without floating-point drift in the bookkeeping.
"""
from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

__all__ = [
    "DEFAULT_FLOOR",
    "KernelMatrix",
    "KernelError",
    "rbf_kernel",
    "elementwise_sqrt",
    "hadamard",
    "hadamard_div",
    "reparametrize_exact",
    "rebase",
    "save_matrix",
    "load_matrix",
]

DEFAULT_FLOOR = 1e-300


class KernelError(ValueError):
    """Invalid kernel operation (shape, lineage or exponent violation)."""


class _Lineage:
    """Identity token shared by all matrices derived from one base matrix."""

    __slots__ = ("base_bandwidth",)

    def __init__(self, base_bandwidth: float):
        self.base_bandwidth = base_bandwidth

    def __repr__(self):
        return f"<lineage sigma={self.base_bandwidth:g} at {id(self):#x}>"


@dataclass(frozen=True, eq=False)
class KernelMatrix:
    """Symmetric kernel matrix ``K_base ** exponent`` with unit diagonal.

    ``bandwidth`` is the effective RBF bandwidth, ``base_bandwidth /
    exponent``. ``clamped`` counts entries raised to ``floor`` when the
    matrix was built.
    """

    entries: np.ndarray
    exponent: Fraction
    lineage: _Lineage
    floor: float = DEFAULT_FLOOR
    clamped: int = field(default=0)

    @property
    def n(self) -> int:
        return self.entries.shape[0]

    @property
    def base_bandwidth(self) -> float:
        return self.lineage.base_bandwidth

    @property
    def bandwidth(self) -> float:
        return self.lineage.base_bandwidth / float(self.exponent)

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def __repr__(self):
        return (
            f"KernelMatrix(n={self.n}, exponent={self.exponent}, "
            f"bandwidth={self.bandwidth:.6g})"
        )


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def _clamp(entries: np.ndarray, floor: float) -> int:
    low = entries < floor
    count = int(np.count_nonzero(low))
    if count:
        entries[low] = floor
    return count


def rbf_kernel(D: np.ndarray, sigma: float, floor: float = DEFAULT_FLOOR) -> KernelMatrix:
    """``exp(-D / sigma)`` entry-wise, floored at ``floor`` against underflow."""
    sigma = float(sigma)
    if not math.isfinite(sigma) or sigma <= 0:
        raise KernelError(f"bandwidth must be positive and finite, got {sigma!r}")
    D = np.asarray(D, dtype=np.float64)
    if D.ndim != 2 or D.shape[0] != D.shape[1]:
        raise KernelError(f"distance matrix must be square, got {D.shape}")
    entries = np.exp(-(D / sigma))
    clamped = _clamp(entries, floor)
    return KernelMatrix(_freeze(entries), Fraction(1), _Lineage(sigma), floor, clamped)


def rebase(K: KernelMatrix) -> KernelMatrix:
    """Start a fresh lineage at ``K`` (exponent 1, base bandwidth = K's)."""
    return KernelMatrix(K.entries, Fraction(1), _Lineage(K.bandwidth), K.floor, K.clamped)


def _wrap(entries: np.ndarray, out: np.ndarray | None) -> np.ndarray:
    # caller-owned buffers stay writable so a search can recycle them
    return entries if out is not None else _freeze(entries)


def elementwise_sqrt(K: KernelMatrix, out: np.ndarray | None = None) -> KernelMatrix:
    """Entry-wise square root; the tracked exponent halves.

    ``out`` may alias ``K.entries`` for an in-place update.
    """
    entries = np.sqrt(K.entries, out=out)
    return KernelMatrix(_wrap(entries, out), K.exponent / 2, K.lineage, K.floor)


def _check_pair(K1: KernelMatrix, K2: KernelMatrix) -> None:
    if K1.entries.shape != K2.entries.shape:
        raise KernelError(f"shape mismatch {K1.entries.shape} vs {K2.entries.shape}")
    if K1.lineage is not K2.lineage:
        raise KernelError("matrices derive from different base matrices")


def hadamard(K1: KernelMatrix, K2: KernelMatrix, out: np.ndarray | None = None) -> KernelMatrix:
    """Entry-wise product; exponents add."""
    _check_pair(K1, K2)
    exponent = K1.exponent + K2.exponent
    entries = np.multiply(K1.entries, K2.entries, out=out)
    # a total exponent <= 1 keeps every entry >= K_base >= floor
    clamped = _clamp(entries, K1.floor) if exponent > 1 else 0
    return KernelMatrix(_wrap(entries, out), exponent, K1.lineage, K1.floor, clamped)


def hadamard_div(
    K1: KernelMatrix, K2: KernelMatrix, out: np.ndarray | None = None
) -> KernelMatrix:
    """Entry-wise quotient ``K1 / K2``; exponents subtract and must stay positive."""
    _check_pair(K1, K2)
    exponent = K1.exponent - K2.exponent
    if exponent <= 0:
        raise KernelError(
            f"exponent underflow: {K1.exponent} - {K2.exponent} leaves (0, 1]"
        )
    # K2 >= floor by construction, so no 0/0
    entries = np.divide(K1.entries, K2.entries, out=out)
    return KernelMatrix(_wrap(entries, out), exponent, K1.lineage, K1.floor)


def reparametrize_exact(
    K: KernelMatrix, sigma_new: float, out: np.ndarray | None = None
) -> KernelMatrix:
    """Kernel at bandwidth ``sigma_new`` via the general power ``K ** (sigma/sigma_new)``.

    This is the slow reference path the dyadic search is measured against.
    """
    sigma_new = float(sigma_new)
    if not math.isfinite(sigma_new) or sigma_new <= 0:
        raise KernelError(f"bandwidth must be positive and finite, got {sigma_new!r}")
    power = K.bandwidth / sigma_new
    if not math.isfinite(power):
        raise KernelError(f"non-finite exponent {power!r}")
    entries = np.power(K.entries, power, out=out)
    clamped = _clamp(entries, K.floor) if power > 1 else 0
    exponent = K.exponent * Fraction(power)
    return KernelMatrix(_wrap(entries, out), exponent, K.lineage, K.floor, clamped)


_HEADER = struct.Struct("<Q")


def save_matrix(a: np.ndarray | KernelMatrix, path: str | Path) -> None:
    """Write a square matrix as an 8-byte little-endian n header + row-major float64."""
    a = np.ascontiguousarray(np.asarray(a, dtype="<f8"))
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise KernelError(f"expected a square matrix, got {a.shape}")
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(a.shape[0]))
        fh.write(a.tobytes(order="C"))


def load_matrix(path: str | Path) -> np.ndarray:
    raw = Path(path).read_bytes()
    (n,) = _HEADER.unpack_from(raw)
    body = np.frombuffer(raw, dtype="<f8", offset=_HEADER.size)
    if body.size != n * n:
        raise KernelError(f"{path}: expected {n * n} entries, found {body.size}")
    return body.reshape(n, n).astype(np.float64)
