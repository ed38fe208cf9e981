"""Dense Hermitian linear algebra.

Spectral decomposition into grouped eigenprojections, singular values,
Schatten norms, the weak trace-class quasi-norm and the Kronecker / matrix
unit helpers used by the amplification construction.

Matrices are plain complex ``numpy`` arrays.  Hermitian inputs are validated
and symmetrised by :func:`as_hermitian`; nothing here mutates its arguments.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import DomainError, EigenSolverError

TOL_HERM = 1e-12
CLUSTER_RTOL = 1e-9


def as_complex_matrix(x) -> np.ndarray:
    """Return ``x`` as a 2-d complex array (copied)."""
    arr = np.array(x, dtype=complex)
    if arr.ndim != 2 or 0 in arr.shape:
        raise DomainError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
    return arr


def as_hermitian(a, tol: float = TOL_HERM) -> np.ndarray:
    """Validate Hermitian symmetry and return the symmetrised matrix.

    The check is relative: ``max|a - a^*| <= tol * max(1, max|a|)``.
    """
    arr = as_complex_matrix(a)
    if arr.shape[0] != arr.shape[1]:
        raise DomainError(f"Hermitian matrix must be square, got shape {arr.shape}")
    scale = max(1.0, float(np.abs(arr).max()))
    defect = float(np.abs(arr - arr.conj().T).max())
    if defect > tol * scale:
        raise DomainError(f"matrix is not Hermitian (asymmetry {defect:.3e})")
    return 0.5 * (arr + arr.conj().T)


def cluster_tolerance(eigenvalues: np.ndarray) -> float:
    radius = float(np.abs(eigenvalues).max()) if eigenvalues.size else 0.0
    return CLUSTER_RTOL * max(1.0, radius)


@dataclass(frozen=True)
class SpectralDecomposition:
    """Distinct eigenvalues of a Hermitian matrix with their eigenprojections.

    ``vectors`` is the full unitary eigenvector matrix and ``labels[j]`` the
    index of the distinct eigenvalue that column ``j`` belongs to, so that
    ``projections[i] = V_i V_i^*`` with ``V_i = vectors[:, labels == i]``.
    """

    eigenvalues: np.ndarray
    multiplicities: tuple[int, ...]
    vectors: np.ndarray
    labels: np.ndarray
    tol: float

    @property
    def dim(self) -> int:
        return self.vectors.shape[0]

    @cached_property
    def projections(self) -> tuple[np.ndarray, ...]:
        out = []
        for i in range(len(self.eigenvalues)):
            v = self.vectors[:, self.labels == i]
            out.append(v @ v.conj().T)
        return tuple(out)

    def reconstruct(self) -> np.ndarray:
        lam = self.eigenvalues[self.labels]
        return (self.vectors * lam) @ self.vectors.conj().T

    def spectral_projection(self, mask) -> np.ndarray:
        """Sum of the projections whose eigenvalue satisfies ``mask``."""
        keep = np.asarray(mask, dtype=bool)[self.labels]
        v = self.vectors[:, keep]
        return v @ v.conj().T

    def apply_function(self, func) -> np.ndarray:
        """``func(A)`` by the spectral theorem; ``func`` acts on a real array."""
        vals = np.asarray(func(self.eigenvalues), dtype=complex)[self.labels]
        return (self.vectors * vals) @ self.vectors.conj().T


def eig(a, tol: float | None = None) -> SpectralDecomposition:
    """Spectral decomposition with eigenvalue clustering.

    Sorted eigenvalues whose gap is at most ``tol`` (default
    ``1e-9 * max(1, spectral radius)``) are merged into one projection; each
    group is represented by its mean, and a group within ``tol`` of zero is
    snapped to exactly ``0.0`` so that zero-indicator symbols and the
    divided-difference zero convention see an exact zero.
    """
    h = as_hermitian(a)
    try:
        w, v = np.linalg.eigh(h)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - LAPACK failure
        cond = np.linalg.cond(h)
        raise EigenSolverError(f"eigh failed (condition number {cond:.3e}): {exc}") from exc
    if not np.all(np.isfinite(w)):
        raise EigenSolverError("eigh returned non-finite eigenvalues")
    if tol is None:
        tol = cluster_tolerance(w)
    labels = np.zeros(len(w), dtype=int)
    starts = [0]
    for j in range(1, len(w)):
        if w[j] - w[j - 1] > tol:
            starts.append(j)
        labels[j] = len(starts) - 1
    bounds = starts + [len(w)]
    reps = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        lam = float(np.mean(w[lo:hi]))
        reps.append(0.0 if abs(lam) <= tol else lam)
    mult = tuple(hi - lo for lo, hi in zip(bounds[:-1], bounds[1:]))
    return SpectralDecomposition(np.array(reps), mult, v, labels, float(tol))


def singular_values(x) -> np.ndarray:
    """Singular values in nonincreasing order, ``min(rows, cols)`` of them."""
    return np.linalg.svd(as_complex_matrix(x), compute_uv=False)


def schatten_norm(x, p: float) -> float:
    """Schatten ``p``-norm for ``1 <= p <= inf``."""
    if not p >= 1:
        raise DomainError(f"Schatten exponent must satisfy p >= 1, got {p}")
    mu = singular_values(x)
    if np.isinf(p):
        return float(mu[0])
    if p == 1:
        return float(mu.sum())
    if p == 2:
        return float(np.sqrt(np.sum(mu**2)))
    top = mu[0]
    if top == 0:
        return 0.0
    return float(top * np.sum((mu / top) ** p) ** (1.0 / p))


def weak_norm(x) -> float:
    """The weak trace-class quasi-norm ``max_k (k+1) mu_k(x)``."""
    mu = singular_values(x)
    return float(np.max(np.arange(1, len(mu) + 1) * mu))


def weak_norm_index(x) -> int:
    """Index ``k`` at which ``(k+1) mu_k(x)`` attains its maximum."""
    mu = singular_values(x)
    return int(np.argmax(np.arange(1, len(mu) + 1) * mu))


def trace(x) -> complex:
    return complex(np.trace(as_complex_matrix(x)))


def matrix_unit(size: int, i: int, j: int) -> np.ndarray:
    """``size x size`` matrix with a single 1 at row ``i``, column ``j``."""
    if size < 1:
        raise DomainError(f"matrix unit size must be positive, got {size}")
    if not (0 <= i < size and 0 <= j < size):
        raise DomainError(f"matrix unit index ({i}, {j}) out of range for size {size}")
    e = np.zeros((size, size), dtype=complex)
    e[i, j] = 1.0
    return e


def kron(e, x) -> np.ndarray:
    return np.kron(as_complex_matrix(e), as_complex_matrix(x))


def block_diagonal(blocks) -> np.ndarray:
    """``sum_l E_{l,l} (x) blocks[l]`` for equally sized square blocks."""
    blocks = [as_complex_matrix(b) for b in blocks]
    d = blocks[0].shape[0]
    out = np.zeros((len(blocks) * d, len(blocks) * d), dtype=complex)
    for l, b in enumerate(blocks):
        if b.shape != (d, d):
            raise DomainError("block_diagonal needs equally sized square blocks")
        out[l * d:(l + 1) * d, l * d:(l + 1) * d] = b
    return out


def frobenius_residual(lhs, rhs, floor: float = 1.0) -> float:
    """``|lhs - rhs|_F / max(floor, |lhs|_F, |rhs|_F)``.

    Inputs in the verification sweeps are Frobenius-normalised, so the floor
    of one turns this into an absolute error whenever both sides are small.
    """
    lhs = np.asarray(lhs)
    rhs = np.asarray(rhs)
    scale = max(floor, float(np.linalg.norm(lhs)), float(np.linalg.norm(rhs)))
    return float(np.linalg.norm(lhs - rhs)) / scale


# -- serialisation ---------------------------------------------------------


def matrix_to_json(x) -> dict:
    arr = as_complex_matrix(x)
    out = {"re": arr.real.tolist(), "im": arr.imag.tolist()}
    if arr.shape[0] == arr.shape[1]:
        return {"dim": arr.shape[0], **out}
    return {"rows": arr.shape[0], "cols": arr.shape[1], **out}


def matrix_from_json(obj: dict) -> np.ndarray:
    try:
        re = np.array(obj["re"], dtype=float)
        im = np.array(obj.get("im", np.zeros_like(re)), dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise DomainError(f"malformed matrix literal: {exc}") from exc
    if re.ndim != 2 or re.shape != im.shape:
        raise DomainError("matrix literal needs equally shaped 2-d 're' and 'im' arrays")
    if "dim" in obj and re.shape != (obj["dim"], obj["dim"]):
        raise DomainError(f"declared dim {obj['dim']} does not match entries {re.shape}")
    return re + 1j * im


def load_matrix(path) -> np.ndarray:
    return matrix_from_json(json.loads(Path(path).read_text()))


def save_matrix(path, x) -> None:
    Path(path).write_text(json.dumps(matrix_to_json(x)))


def singular_values_csv(x) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["k", "mu_k"])
    for k, mu in enumerate(singular_values(x)):
        writer.writerow([k, repr(float(mu))])
    return buf.getvalue()
