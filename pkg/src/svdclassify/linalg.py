"""SVD factorization, rank-k truncation, and matrix norms.

Reconstruction errors are measured with one of four matrix norms (1, 2,
infinity, Frobenius).  The 2-norm is defined as the largest singular
value and reuses the SVD routine rather than a separate power method, so
there is a single code path for spectral quantities.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np


class NormKind(Enum):
    """The four matrix norms used for reconstruction-error measurement.

    Values are the serialized forms used in CLI flags, config files, and
    reports.
    """

    ONE = "1"
    TWO = "2"
    INF = "inf"
    FRO = "fro"

    @classmethod
    def parse(cls, text: str) -> "NormKind":
        try:
            return cls(text.strip().lower())
        except ValueError:
            valid = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown norm {text!r} (expected one of: {valid})") from None


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD of a real matrix: ``a = u @ diag(sigma) @ v.T``.

    ``u`` is m x r and ``v`` is n x r with orthonormal columns, ``sigma``
    holds the r = min(m, n) singular values in descending order.
    """

    u: np.ndarray
    sigma: np.ndarray
    v: np.ndarray

    @property
    def rank_limit(self) -> int:
        return int(self.sigma.size)


def _validated(a, name: str = "matrix") -> np.ndarray:
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be 2-D with at least one row and column")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} contains non-finite entries")
    return arr


def svd(a) -> SvdFactors:
    """Thin SVD with a deterministic sign convention.

    Each left singular vector is flipped so its largest-magnitude entry
    is nonnegative (the right vector is flipped to match), which makes
    factorizations reproducible across runs and platforms.
    """
    arr = _validated(a)
    u, sigma, vt = np.linalg.svd(arr, full_matrices=False)
    v = vt.T
    cols = np.arange(sigma.size)
    anchor = u[np.argmax(np.abs(u), axis=0), cols]
    signs = np.where(anchor < 0.0, -1.0, 1.0)
    return SvdFactors(u=u * signs, sigma=sigma, v=v * signs)


def truncate(factors: SvdFactors, k: int) -> np.ndarray:
    """Rank-k reconstruction: sum of the top-k singular triplets."""
    r = factors.rank_limit
    if not 1 <= k <= r:
        raise ValueError(f"rank k={k} out of range [1, {r}]")
    return (factors.u[:, :k] * factors.sigma[:k]) @ factors.v[:, :k].T


def truncate_many(factors: SvdFactors, ranks: Sequence[int]) -> np.ndarray:
    """Stack of rank-k reconstructions for several k at once.

    Returns an array of shape ``(len(ranks), m, n)``.  Built from a
    cumulative sum of rank-one terms, so asking for many ranks costs one
    pass instead of one reconstruction per rank.
    """
    ks = np.asarray(list(ranks), dtype=int)
    r = factors.rank_limit
    if ks.size == 0:
        raise ValueError("ranks must be nonempty")
    if ks.min() < 1 or ks.max() > r:
        raise ValueError(f"ranks must lie within [1, {r}], got {ks.min()}..{ks.max()}")
    kmax = int(ks.max())
    outers = (
        factors.sigma[:kmax, None, None]
        * factors.u.T[:kmax, :, None]
        * factors.v.T[:kmax, None, :]
    )
    partial = np.cumsum(outers, axis=0)
    return partial[ks - 1]


def matrix_norm(a, kind: NormKind) -> float:
    """Matrix norm of ``a``: max column sum (1), max row sum (inf),
    root sum of squares (fro), or largest singular value (2)."""
    arr = _validated(a)
    if kind is NormKind.ONE:
        return float(np.abs(arr).sum(axis=0).max())
    if kind is NormKind.INF:
        return float(np.abs(arr).sum(axis=1).max())
    if kind is NormKind.FRO:
        return float(np.sqrt((arr * arr).sum()))
    if kind is NormKind.TWO:
        return float(svd(arr).sigma[0])
    raise ValueError(f"unknown norm kind: {kind!r}")


def matrix_norm_batch(stack: np.ndarray, kind: NormKind) -> np.ndarray:
    """Vectorized :func:`matrix_norm` over a ``(k, m, n)`` stack.

    Agrees with the scalar routine entry for entry; the 2-norm case uses
    the same LAPACK backend on the whole stack at once.
    """
    arr = np.asarray(stack, dtype=np.float64)
    if arr.ndim != 3:
        raise ValueError("expected a stack of matrices with shape (k, m, n)")
    if kind is NormKind.ONE:
        return np.abs(arr).sum(axis=1).max(axis=1)
    if kind is NormKind.INF:
        return np.abs(arr).sum(axis=2).max(axis=1)
    if kind is NormKind.FRO:
        return np.sqrt((arr * arr).sum(axis=(1, 2)))
    if kind is NormKind.TWO:
        return np.linalg.svd(arr, compute_uv=False)[:, 0]
    raise ValueError(f"unknown norm kind: {kind!r}")


def parse_norm_list(text: str | Iterable[str]) -> list[NormKind]:
    """Parse a comma list like ``"fro,2"`` into norm kinds (order kept)."""
    parts = text.split(",") if isinstance(text, str) else list(text)
    kinds = [NormKind.parse(p) for p in parts if str(p).strip()]
    if not kinds:
        raise ValueError("norm list is empty")
    if len(set(kinds)) != len(kinds):
        raise ValueError(f"duplicate norms in {text!r}")
    return kinds
