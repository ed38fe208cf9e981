"""Reduction identities for divided differences and their operator integrals.

Scalar identities relate ``f^[n]`` to divided differences of the chain
``f_1(t) = (f(t) - f(0)) / t``.  Operator identities split an integral over
one operator ``A`` into sign blocks and rewrite each mixed-sign block as a
sum of two lower-order integrals with a double operator integral of ``rho``
or ``psi`` inserted.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError, PreconditionError
from .functions import ScalarFunction, divided_difference, f_chain, psi, rho
from .linalg import SpectralDecomposition, as_complex_matrix, eig, frobenius_residual
from .moi import MultipleOperatorIntegral, apply_moi, truncate_orthant
from .symbols import BivariateLift, DividedDifference, Expand, MoiSymbol, Product

HOLDER_TOL = 1e-12


def _relative(lhs: float, rhs: float, *scales: float) -> float:
    return abs(lhs - rhs) / max(1.0, abs(lhs), abs(rhs), *(abs(s) for s in scales))


# -- scalar identities -----------------------------------------------------


def check_precrucial(f: ScalarFunction, ts: Sequence[float]) -> float:
    """``f^[n](0, t_1, ..., t_n)`` against ``f_1^[n-1](t_1, ..., t_n)``."""
    ts = [float(t) for t in ts]
    if len(ts) != f.order_n:
        raise DomainError(f"need {f.order_n} nodes, got {len(ts)}")
    lhs = divided_difference(f, [0.0] + ts)
    rhs = divided_difference(f_chain(f, 1), ts)
    return _relative(lhs, rhs)


def check_crucial(f: ScalarFunction, ts: Sequence[float], i: int, j: int) -> float:
    """``f^[n](t)`` against its two-term split at the nodes ``t_i`` and ``t_j``."""
    ts = [float(t) for t in ts]
    if len(ts) != f.order_n + 1:
        raise DomainError(f"need {f.order_n + 1} nodes, got {len(ts)}")
    if i == j or not (0 <= i < len(ts) and 0 <= j < len(ts)):
        raise DomainError(f"invalid node pair ({i}, {j})")
    ti, tj = ts[i], ts[j]
    if ti == tj or ti == 0 or tj == 0:
        raise DomainError(f"split needs distinct nonzero t_i, t_j; got {ti}, {tj}")
    g = f_chain(f, 1)
    drop_j = ts[:j] + ts[j + 1:]
    drop_i = ts[:i] + ts[i + 1:]
    first = ti / (ti - tj) * divided_difference(g, drop_j)
    second = tj / (tj - ti) * divided_difference(g, drop_i)
    lhs = divided_difference(f, ts)
    return _relative(lhs, first + second, first, second)


def check_postcrucial(f: ScalarFunction, l: int, ts: Sequence[float]) -> float:
    """``f^[n](t_0, ..., t_{n-l}, 0, ..., 0)`` against ``f_l^[n-l](t_0, ..., t_{n-l})``."""
    n = f.order_n
    if not 0 <= l <= n - 1:
        raise DomainError(f"need 0 <= l <= {n - 1}, got {l}")
    ts = [float(t) for t in ts]
    if len(ts) != n - l + 1:
        raise DomainError(f"need {n - l + 1} nodes, got {len(ts)}")
    lhs = divided_difference(f, ts + [0.0] * l)
    rhs = divided_difference(f_chain(f, l), ts)
    return _relative(lhs, rhs)


# -- sign blocks -----------------------------------------------------------


def _in_mask(mask: int, j: int) -> bool:
    return bool((mask >> j) & 1)


def sign_projections(A) -> tuple[SpectralDecomposition, np.ndarray, np.ndarray]:
    """Spectral decomposition with the positive and negative spectral projections."""
    spec = A if isinstance(A, SpectralDecomposition) else eig(A)
    if np.any(spec.eigenvalues == 0):
        raise PreconditionError("sign blocks need 0 outside the spectrum; shift with ensure_invertible")
    return spec, spec.spectral_projection(spec.eigenvalues > 0), spec.spectral_projection(spec.eigenvalues < 0)


def sign_blocks(A, xs: Sequence) -> dict[int, list[np.ndarray]]:
    """Compress each ``x_k`` by the sign projections selected by the bitmask.

    Bit ``j`` of the mask set means variable ``t_j`` lives on the positive
    spectrum, so ``x_k`` becomes ``P(k-1) x_k P(k)`` with ``P(j)`` the positive
    or negative projection accordingly.
    """
    _, p_pos, p_neg = sign_projections(A)
    xs = [as_complex_matrix(x) for x in xs]
    n = len(xs)
    side = {True: p_pos, False: p_neg}
    out = {}
    for mask in range(2 ** (n + 1)):
        out[mask] = [side[_in_mask(mask, k - 1)] @ x @ side[_in_mask(mask, k)]
                     for k, x in enumerate(xs, start=1)]
    return out


def sign_change(mask: int, n: int) -> int | None:
    """Smallest ``k`` in ``0..n-1`` where bits ``k`` and ``k+1`` of ``mask`` differ."""
    for k in range(n):
        if _in_mask(mask, k) != _in_mask(mask, k + 1):
            return k
    return None


def double_oi_rho(A, x) -> np.ndarray:
    return apply_moi(BivariateLift(rho(), 0, 1, 2), [A, A], [x])


def double_oi_psi(A, x) -> np.ndarray:
    return apply_moi(BivariateLift(psi(), 0, 1, 2), [A, A], [x])


@dataclass(frozen=True)
class BlockReduction:
    k: int
    rho_term: np.ndarray
    psi_term: np.ndarray
    direct: np.ndarray

    @property
    def residual(self) -> float:
        return frobenius_residual(self.rho_term + self.psi_term, self.direct)


def reduce_block(f: ScalarFunction, A, block: Sequence, mask: int, k: int | None = None) -> BlockReduction:
    """Rewrite the mixed-sign block ``T_{f^[n]}(x^mask)`` through ``f_1``.

    With ``t_k`` and ``t_{k+1}`` of opposite sign,
    ``f^[n](t) = rho(t_k, t_{k+1}) f_1^[n-1](t without t_{k+1})
    + psi(t_k, t_{k+1}) f_1^[n-1](t without t_k)``; a factor depending on two
    neighbouring variables becomes a double operator integral of the argument
    between them, and a dropped variable merges its two neighbouring
    arguments into their product.
    """
    n = f.order_n
    if n < 2:
        raise DomainError("block reduction needs n >= 2")
    if len(block) != n:
        raise DomainError(f"expected {n} arguments, got {len(block)}")
    if not 0 <= mask < 2 ** (n + 1):
        raise DomainError(f"mask {mask} out of range for n = {n}")
    if k is None:
        k = sign_change(mask, n)
        if k is None:
            raise PreconditionError(f"mask {mask:b} has no sign change")
    elif not (0 <= k < n) or _in_mask(mask, k) == _in_mask(mask, k + 1):
        raise PreconditionError(f"mask {mask:b} has no sign change at ({k}, {k + 1})")

    spec, _, _ = sign_projections(A)
    xs = [as_complex_matrix(x) for x in block]
    lower = MultipleOperatorIntegral(DividedDifference(f_chain(f, 1)), [spec] * n)
    t_rho = double_oi_rho(spec, xs[k])
    t_psi = double_oi_psi(spec, xs[k])

    # xs[k] is the argument between t_k and t_{k+1}.
    if k <= n - 2:
        rho_term = lower(*xs[:k], t_rho @ xs[k + 1], *xs[k + 2:])
    else:
        rho_term = lower(*xs[:k]) @ t_rho
    if k >= 1:
        psi_term = lower(*xs[: k - 1], xs[k - 1] @ t_psi, *xs[k + 1:])
    else:
        psi_term = t_psi @ lower(*xs[1:])
    direct = apply_moi(DividedDifference(f), [spec] * (n + 1), xs)
    return BlockReduction(k, rho_term, psi_term, direct)


def block_sum(f: ScalarFunction, A, xs: Sequence, routed: bool = True) -> np.ndarray:
    """Sum of the sign-block integrals.

    With ``routed`` the two one-signed blocks go through orthant truncation
    and the mixed blocks through :func:`reduce_block`, so the sum exercises
    every branch; otherwise each block is integrated directly.
    """
    spec, _, _ = sign_projections(A)
    n = len(xs)
    phi = DividedDifference(f)
    full = 2 ** (n + 1) - 1
    total = np.zeros((spec.dim, spec.dim), dtype=complex)
    for mask, block in sign_blocks(spec, xs).items():
        if not routed:
            total += apply_moi(phi, [spec] * (n + 1), block)
        elif mask in (0, full):
            total += apply_moi(truncate_orthant(phi, 1 if mask else -1), [spec] * (n + 1), block)
        else:
            red = reduce_block(f, spec, block, mask)
            total += red.rho_term + red.psi_term
    return total


def check_block_decomposition(f: ScalarFunction, A, xs: Sequence, routed: bool = True) -> float:
    spec = eig(A)
    direct = apply_moi(DividedDifference(f), [spec] * (len(xs) + 1), xs)
    return frobenius_residual(block_sum(f, spec, xs, routed), direct)


def check_composition(h2: MoiSymbol, sigma, k: int, A, xs: Sequence) -> float:
    """``T_{sigma(t_k, t_{k+1}) h2}(xs)`` against ``T_{h2}`` with ``x_{k+1}`` replaced by ``T_sigma(x_{k+1})``."""
    n1 = h2.arity
    spec = eig(A)
    lifted = Product((h2, BivariateLift(sigma, k, k + 1, n1)))
    lhs = apply_moi(lifted, [spec] * n1, xs)
    inner = apply_moi(BivariateLift(sigma, 0, 1, 2), [spec, spec], [xs[k]])
    rhs = apply_moi(h2, [spec] * n1, list(xs[:k]) + [inner] + list(xs[k + 1:]))
    return frobenius_residual(lhs, rhs)


def check_dummy_merge(h: MoiSymbol, position: int, A, xs: Sequence) -> float:
    """A symbol ignoring interior variable ``t_position`` merges the arguments around it."""
    n = h.arity
    if not 1 <= position <= n - 1:
        raise DomainError(f"dummy position must be interior, got {position}")
    spec = eig(A)
    lhs = apply_moi(Expand(h, position), [spec] * (n + 1), xs)
    merged = list(xs[: position - 1]) + [as_complex_matrix(xs[position - 1]) @ as_complex_matrix(xs[position])] \
        + list(xs[position + 1:])
    rhs = apply_moi(h, [spec] * n, merged)
    return frobenius_residual(lhs, rhs)


# -- exponent tuples -------------------------------------------------------


@dataclass(frozen=True)
class ExponentTuple:
    """Schatten exponents ``p_1, ..., p_n >= 1`` with ``sum 1/p_l = 1``."""

    p: tuple[float, ...]

    def __post_init__(self):
        p = tuple(float(v) for v in self.p)
        object.__setattr__(self, "p", p)
        if not p:
            raise DomainError("exponent tuple must be non-empty")
        if any(not v >= 1 for v in p):
            raise DomainError(f"exponents must be >= 1, got {p}")
        total = sum(1.0 / v for v in p)
        if abs(total - 1.0) > HOLDER_TOL:
            raise DomainError(f"reciprocals must sum to 1, got {total!r}")

    def __len__(self) -> int:
        return len(self.p)

    def __iter__(self):
        return iter(self.p)

    @classmethod
    def parse(cls, text: str) -> "ExponentTuple":
        try:
            return cls(tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip()))
        except ValueError as exc:
            raise DomainError(f"cannot parse exponent tuple {text!r}") from exc

    def label(self) -> str:
        return ";".join(repr(v) for v in self.p)


def _merged_exponent(ps: Sequence[float]) -> float:
    q = 1.0 / sum(1.0 / v for v in ps)
    # merging a whole Holder tuple must land on exactly 1, not just below it
    return 1.0 if abs(q - 1.0) <= HOLDER_TOL else q


def consummations(p: ExponentTuple) -> list[ExponentTuple]:
    """All coarsenings of ``p`` by merging runs of consecutive indices.

    ``1/q = sum of 1/p_l`` over each run.  The ``2^(n-1)`` results are ordered
    by the number of merged gaps, then lexicographically by which gaps.
    """
    n = len(p)
    gaps = range(n - 1)
    merge_sets = [c for r in range(n) for c in itertools.combinations(gaps, r)]
    out = []
    for merged in merge_sets:
        runs, current = [], [p.p[0]]
        for g in gaps:
            if g in merged:
                current.append(p.p[g + 1])
            else:
                runs.append(current)
                current = [p.p[g + 1]]
        runs.append(current)
        qs = tuple(v[0] if len(v) == 1 else _merged_exponent(v) for v in runs)
        out.append(ExponentTuple(qs))
    return out
