"""Multiple operator integrals on finite Hermitian tuples.

In finite dimension the integral is the exact spectral sum

    T(x_1, ..., x_n) = sum phi(l_0, ..., l_n) P_0 x_1 P_1 ... x_n P_n

over the eigenprojections ``P_k`` of ``A_k``.  It is evaluated in the
eigenbases: with ``A_k = U_k diag(.) U_k^*`` and ``y_k = U_{k-1}^* x_k U_k``
the sum becomes a single tensor contraction of the kernel
``K[j_0, ..., j_n] = phi(eigenvalue of column j_0, ...)`` against the chain
``y_1[j_0, j_1] ... y_n[j_{n-1}, j_n]``.  Columns belonging to one eigenvalue
cluster share a kernel value, so the result agrees with the projection sum.
"""

from __future__ import annotations

import string
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .linalg import (
    SpectralDecomposition,
    as_complex_matrix,
    as_hermitian,
    block_diagonal,
    eig,
    frobenius_residual,
    kron,
    matrix_unit,
)
from .symbols import (
    Constant,
    ElementaryTensor,
    MoiSymbol,
    OrthantIndicator,
    Product,
    Translate,
    ZeroIndicator,
)

_LETTERS = string.ascii_letters


def _decompose_all(As) -> list[SpectralDecomposition]:
    """Eigendecompose each operator once, reusing repeated objects."""
    cache: dict[int, SpectralDecomposition] = {}
    out = []
    for a in As:
        key = id(a)
        if key not in cache:
            cache[key] = a if isinstance(a, SpectralDecomposition) else eig(a)
        out.append(cache[key])
    return out


class MultipleOperatorIntegral:
    """The multilinear map ``(x_1, ..., x_n) -> T_phi^{(A_0, ..., A_n)}``.

    Building the object fixes the kernel; it can then be applied to many
    argument tuples, which is what the bound estimators do.
    """

    def __init__(self, phi: MoiSymbol, As: Sequence):
        if len(As) != phi.arity:
            raise DomainError(f"symbol of arity {phi.arity} needs {phi.arity} operators, got {len(As)}")
        self.phi = phi
        self.spectra = _decompose_all(As)
        dims = {s.dim for s in self.spectra}
        if len(dims) != 1:
            raise DomainError(f"operators must share one dimension, got {sorted(dims)}")
        self.dim = dims.pop()
        self.n = phi.arity - 1
        grid = np.asarray(phi.grid([s.eigenvalues for s in self.spectra]), dtype=float)
        if not np.all(np.isfinite(grid)):
            raise DomainError("symbol is not finite on the spectrum grid")
        self.grid = grid

    @cached_property
    def kernel(self) -> np.ndarray:
        return self.grid[np.ix_(*[s.labels for s in self.spectra])]

    def _subscripts(self, skip: int | None = None, out: str | None = None) -> str:
        idx = _LETTERS[: self.n + 1]
        terms = [idx] + [idx[l - 1] + idx[l] for l in range(1, self.n + 1) if l != skip]
        if out is None:
            out = idx[0] + idx[-1]
        return ",".join(terms) + "->" + out

    def _to_eigenbasis(self, xs) -> list[np.ndarray]:
        if len(xs) != self.n:
            raise DomainError(f"expected {self.n} arguments, got {len(xs)}")
        ys = []
        for l, x in enumerate(xs, start=1):
            x = as_complex_matrix(x)
            if x.shape != (self.dim, self.dim):
                raise DomainError(f"argument {l} has shape {x.shape}, expected {(self.dim, self.dim)}")
            ys.append(self.spectra[l - 1].vectors.conj().T @ x @ self.spectra[l].vectors)
        return ys

    def __call__(self, *xs) -> np.ndarray:
        u0 = self.spectra[0].vectors
        if self.n == 0:
            return (u0 * self.kernel) @ u0.conj().T
        ys = self._to_eigenbasis(xs)
        r = np.einsum(self._subscripts(), self.kernel, *ys, optimize=True)
        return u0 @ r @ self.spectra[-1].vectors.conj().T

    def gradient(self, xs, k: int, z) -> np.ndarray:
        """The matrix ``G`` with ``Re Tr(z^* T(xs)) = Re Tr(G^* x_k)``.

        ``T`` is linear in ``x_k``, so ``G`` is the adjoint of the partial map
        applied to ``z``; it is the steepest-ascent direction for ``x_k``.
        """
        if not 1 <= k <= self.n:
            raise DomainError(f"argument index {k} outside 1..{self.n}")
        ys = self._to_eigenbasis(xs)
        zp = self.spectra[0].vectors.conj().T @ as_complex_matrix(z) @ self.spectra[-1].vectors
        idx = _LETTERS[: self.n + 1]
        terms = [idx, idx[0] + idx[-1]] + [idx[l - 1] + idx[l] for l in range(1, self.n + 1) if l != k]
        operands = [self.kernel, zp.conj()] + [ys[l - 1] for l in range(1, self.n + 1) if l != k]
        h = np.einsum(",".join(terms) + "->" + idx[k - 1] + idx[k], *operands, optimize=True)
        return self.spectra[k - 1].vectors @ h.conj() @ self.spectra[k].vectors.conj().T


def apply_moi(phi: MoiSymbol, As: Sequence, xs: Sequence) -> np.ndarray:
    """``T_phi^{(A_0, ..., A_n)}(x_1, ..., x_n)`` by exact spectral summation."""
    return MultipleOperatorIntegral(phi, As)(*xs)


def moi_s2_bound(phi: MoiSymbol, As: Sequence) -> float:
    """Norm of ``T_phi`` on ``S_2 x ... x S_2 -> S_2``: the max of ``|phi|`` on the grid."""
    return float(np.abs(MultipleOperatorIntegral(phi, As).grid).max())


def s2_sharpness_witness(phi: MoiSymbol, As: Sequence) -> tuple[list[np.ndarray], float]:
    """Rank-one arguments attaining the S_2 bound.

    With ``u_l`` a unit eigenvector of ``A_l`` for the maximising eigenvalue
    tuple, ``x_l = u_{l-1} u_l^*`` gives ``T(xs) = phi(...) u_0 u_n^*``.
    """
    op = MultipleOperatorIntegral(phi, As)
    best = np.unravel_index(int(np.argmax(np.abs(op.grid))), op.grid.shape)
    us = []
    for s, i in zip(op.spectra, best):
        col = int(np.flatnonzero(s.labels == i)[0])
        us.append(s.vectors[:, col])
    xs = [np.outer(us[l - 1], us[l].conj()) for l in range(1, op.n + 1)]
    return xs, float(abs(op.grid[best]))


# -- structural identities ---------------------------------------------------


def _chain_product(xs, sandwich=None) -> np.ndarray:
    """``Q x_1 Q x_2 ... x_n Q`` (``Q`` defaults to the identity)."""
    xs = [as_complex_matrix(x) for x in xs]
    out = np.eye(xs[0].shape[0], dtype=complex) if sandwich is None else sandwich
    for x in xs:
        out = out @ x
        if sandwich is not None:
            out = out @ sandwich
    return out


def truncate_orthant(phi: MoiSymbol, sign: int) -> MoiSymbol:
    return Product((phi, OrthantIndicator(sign, phi.arity)))


def check_truncation(phi: MoiSymbol, A, xs, sign: int = 1) -> float:
    """Residual of ``T_phi = T_{phi chi}`` for one operator with ``sign*A >= 0``."""
    spec = eig(A)
    if np.any(sign * spec.eigenvalues < 0):
        raise PreconditionError(f"truncation needs sign*A >= 0 (sign {sign}), min eigenvalue "
                                f"{float((sign * spec.eigenvalues).min()):.3e}")
    As = [spec] * phi.arity
    return frobenius_residual(apply_moi(phi, As, xs), apply_moi(truncate_orthant(phi, sign), As, xs))


def translate_symbol(phi: MoiSymbol, delta: float) -> MoiSymbol:
    return phi if delta == 0 else Translate(phi, float(delta))


def check_translation(phi: MoiSymbol, A, xs, delta: float) -> float:
    """Residual of ``T_{tau phi}^{(A, ...)} = T_phi^{(A + delta, ...)}``.

    ``tau phi`` evaluates ``phi`` at every variable shifted by ``+delta``, so
    it sees the spectrum of ``A + delta I``.
    """
    A = as_hermitian(A)
    shifted = A + delta * np.eye(A.shape[0])
    lhs = apply_moi(translate_symbol(phi, delta), [A] * phi.arity, xs)
    rhs = apply_moi(phi, [shifted] * phi.arity, xs)
    return frobenius_residual(lhs, rhs)


def check_zero_indicator(A, xs, c: float = 1.0) -> float:
    """Residual of ``T_{c chi_0}^{(A, ...)}(xs) = c Q x_1 Q ... x_n Q``, ``Q`` the kernel projection."""
    spec = eig(A)
    n1 = len(xs) + 1
    phi = Product((Constant(c, n1), ZeroIndicator(n1)))
    q = spec.spectral_projection(spec.eigenvalues == 0)
    return frobenius_residual(apply_moi(phi, [spec] * n1, xs), c * _chain_product(xs, q))


def amplify(As: Sequence, xs: Sequence) -> tuple[np.ndarray, list[np.ndarray]]:
    """Fold a tuple into one operator: ``sum E_ll (x) A_l`` and ``z_l = E_{l-1,l} (x) x_l``."""
    n1 = len(As)
    if len(xs) != n1 - 1:
        raise DomainError(f"{n1} operators need {n1 - 1} arguments, got {len(xs)}")
    big = block_diagonal([as_hermitian(a) for a in As])
    zs = [kron(matrix_unit(n1, l - 1, l), x) for l, x in enumerate(xs, start=1)]
    return big, zs


def check_amplification(phi: MoiSymbol, As: Sequence, xs: Sequence) -> float:
    big, zs = amplify(As, xs)
    lhs = apply_moi(phi, [big] * phi.arity, zs)
    rhs = kron(matrix_unit(phi.arity, 0, phi.arity - 1), apply_moi(phi, As, xs))
    return frobenius_residual(lhs, rhs)


def check_elementary_tensor(factors, matrix_functions, As, xs) -> float:
    """Compare ``T`` of ``phi_0 (x) ... (x) phi_n`` with ``phi_0(A_0) x_1 ... x_n phi_n(A_n)``.

    ``matrix_functions[l]`` must compute ``phi_l`` of a matrix independently
    (for instance ``scipy.linalg.expm``).
    """
    lhs = apply_moi(ElementaryTensor(tuple(factors)), As, xs)
    rhs = np.asarray(matrix_functions[0](as_hermitian(As[0])), dtype=complex)
    for x, fm, a in zip(xs, matrix_functions[1:], As[1:]):
        rhs = rhs @ as_complex_matrix(x) @ np.asarray(fm(as_hermitian(a)), dtype=complex)
    return frobenius_residual(lhs, rhs)


@dataclass(frozen=True)
class InvertibilityPolicy:
    delta: float = 0.1


def ensure_invertible(A, policy: InvertibilityPolicy | None = None) -> tuple[np.ndarray, float]:
    """Shift ``A`` off a zero eigenvalue.

    Returns ``(A - delta I, delta)`` with ``delta = min(policy.delta, half the
    smallest nonzero |eigenvalue|)`` when zero is an eigenvalue, otherwise
    ``(A, 0.0)``.
    """
    policy = policy or InvertibilityPolicy()
    A = as_hermitian(A)
    spec = eig(A)
    if not np.any(spec.eigenvalues == 0):
        return A, 0.0
    nonzero = np.abs(spec.eigenvalues[spec.eigenvalues != 0])
    delta = policy.delta if nonzero.size == 0 else min(policy.delta, 0.5 * float(nonzero.min()))
    return A - delta * np.eye(A.shape[0]), delta
