"""Random Hermitian operators, arguments and node tuples.

Every sampler takes an explicit ``numpy.random.Generator``; nothing here
touches global random state.
"""

from __future__ import annotations

import numpy as np

from .errors import DomainError
from .linalg import schatten_norm

CONSTRAINTS = ("any", "psd", "nsd")


def complex_gaussian(rng: np.random.Generator, rows: int, cols: int | None = None) -> np.ndarray:
    cols = rows if cols is None else cols
    return (rng.standard_normal((rows, cols)) + 1j * rng.standard_normal((rows, cols))) / np.sqrt(2)


def haar_unitary(rng: np.random.Generator, d: int) -> np.ndarray:
    """Haar-distributed unitary: QR of a Ginibre matrix with the phases of ``R`` removed."""
    q, r = np.linalg.qr(complex_gaussian(rng, d))
    diag = np.diag(r)
    return q * (diag / np.abs(diag))


def gue(rng: np.random.Generator, d: int) -> np.ndarray:
    """Gaussian unitary ensemble scaled so the spectrum fills roughly ``[-2, 2]``."""
    g = complex_gaussian(rng, d)
    return (g + g.conj().T) / np.sqrt(2 * d)


def with_spectrum(rng: np.random.Generator, eigenvalues) -> np.ndarray:
    u = haar_unitary(rng, len(eigenvalues))
    h = (u * np.asarray(eigenvalues, dtype=float)) @ u.conj().T
    return 0.5 * (h + h.conj().T)


def random_hermitian(rng: np.random.Generator, d: int, kind: str = "uniform",
                     constraint: str = "any") -> np.ndarray:
    """Random Hermitian ``d x d`` matrix.

    ``kind="uniform"`` draws eigenvalues uniformly from ``[-2, 2]`` (``[0, 2]``
    or ``[-2, 0]`` under a sign constraint) and rotates them by a Haar
    unitary; ``kind="gue"`` draws from the Gaussian ensemble and, under a
    constraint, replaces each eigenvalue by its absolute value with the
    required sign.
    """
    if constraint not in CONSTRAINTS:
        raise DomainError(f"constraint must be one of {CONSTRAINTS}, got {constraint!r}")
    sign = {"any": 0, "psd": 1, "nsd": -1}[constraint]
    if kind == "uniform":
        lo, hi = {0: (-2.0, 2.0), 1: (0.0, 2.0), -1: (-2.0, 0.0)}[sign]
        return with_spectrum(rng, rng.uniform(lo, hi, size=d))
    if kind == "gue":
        h = gue(rng, d)
        if sign == 0:
            return h
        w, v = np.linalg.eigh(h)
        h = (v * (sign * np.abs(w))) @ v.conj().T
        return 0.5 * (h + h.conj().T)
    raise DomainError(f"unknown matrix ensemble {kind!r}")


def with_kernel(rng: np.random.Generator, d: int, rank_deficit: int = 1) -> np.ndarray:
    """Hermitian matrix with an exact ``rank_deficit``-dimensional kernel."""
    w = rng.uniform(-2.0, 2.0, size=d)
    w[:rank_deficit] = 0.0
    return with_spectrum(rng, w)


def with_repeats(rng: np.random.Generator, d: int) -> np.ndarray:
    """Hermitian matrix whose spectrum has repeated eigenvalues."""
    pool = rng.uniform(-2.0, 2.0, size=max(1, d // 2))
    return with_spectrum(rng, rng.choice(pool, size=d))


def unit_sphere(rng: np.random.Generator, d: int, p: float) -> np.ndarray:
    """Complex Gaussian matrix rescaled to unit Schatten ``p``-norm."""
    while True:
        x = complex_gaussian(rng, d)
        norm = schatten_norm(x, p)
        if norm > 0:
            return x / norm


def arguments(rng: np.random.Generator, d: int, ps) -> list[np.ndarray]:
    return [unit_sphere(rng, d, p) for p in ps]


def frobenius_unit(rng: np.random.Generator, d: int, count: int) -> list[np.ndarray]:
    return [unit_sphere(rng, d, 2.0) for _ in range(count)]


def node_tuple(rng: np.random.Generator, size: int, zero_prob: float = 0.15,
               repeat_prob: float = 0.2, scale: float = 3.0) -> list[float]:
    """Random nodes in ``[-scale, scale]`` with occasional exact zeros and repeats."""
    out: list[float] = []
    for _ in range(size):
        u = rng.random()
        if u < zero_prob:
            out.append(0.0)
        elif out and u < zero_prob + repeat_prob:
            out.append(out[int(rng.integers(len(out)))])
        else:
            out.append(float(rng.uniform(-scale, scale)))
    return out


def orthant_tuple(rng: np.random.Generator, size: int, sign: int, scale: float = 3.0) -> list[float]:
    """Nodes of one sign (zeros allowed, never all zero)."""
    while True:
        ts = [0.0 if rng.random() < 0.1 else sign * float(rng.uniform(0, scale)) for _ in range(size)]
        if any(ts):
            return ts
