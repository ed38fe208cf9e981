"""Scalar functions, confluent divided differences and the reduction chain.

Every builtin function is stored as a piecewise Laurent polynomial: a sorted
tuple of breakpoints and one Laurent polynomial per interval.  This covers
the generalized absolute value ``|t| t^(n-1)``, the monomial ``t^n``, user
polynomials and the ``C^(n+1)`` bridge modification, and it is closed under
the chain step ``f -> (f(t) - f(0)) / t`` with exact coefficients.

Divided differences use the modified convention at the origin: the top
order difference of the all-zero node tuple is ``0``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .errors import ConstructionError, DomainError

__all__ = [
    "ScalarFunction",
    "BumpSpec",
    "BivariateSymbol",
    "builtin_a",
    "builtin_b",
    "builtin_smoothed",
    "polynomial",
    "function_from_id",
    "divided_difference",
    "divided_differences",
    "divided_difference_recursive",
    "f_chain",
    "rho",
    "psi",
]


@dataclass(frozen=True)
class _Laurent:
    """``sum_i coeffs[i] * t**(low + i)``."""

    coeffs: tuple[float, ...]
    low: int = 0

    def derivative(self, k: int, t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        out = np.zeros_like(t)
        for i, c in enumerate(self.coeffs):
            if c == 0:
                continue
            e = self.low + i
            fall = 1.0
            for r in range(k):
                fall *= e - r
            if fall == 0:
                continue
            with np.errstate(divide="ignore", invalid="ignore"):
                out = out + c * fall * t ** (e - k)
        return out

    def exact_derivative(self, k: int, t: Fraction) -> Fraction:
        out = Fraction(0)
        for i, c in enumerate(self.coeffs):
            e = self.low + i
            fall = math.prod(e - r for r in range(k))
            if c and fall:
                out += Fraction(c) * fall * t ** (e - k)
        return out

    def divide_shift(self, c0: float, touches_zero: bool) -> "_Laurent":
        """``(p(t) - c0) / t``."""
        coeffs = list(self.coeffs)
        low = self.low
        if low > 0:
            coeffs = [0.0] * low + coeffs
            low = 0
        idx = -low
        if idx >= len(coeffs):
            coeffs += [0.0] * (idx - len(coeffs) + 1)
        coeffs[idx] -= c0
        if touches_zero:
            # continuity at 0 forces an exact cancellation; drop roundoff residue
            scale = max([1.0] + [abs(c) for c in coeffs])
            if abs(coeffs[idx]) <= 1e-13 * scale:
                coeffs[idx] = 0.0
        low -= 1
        while coeffs and coeffs[0] == 0.0 and low < 0:
            coeffs.pop(0)
            low += 1
        return _Laurent(tuple(coeffs) or (0.0,), low)


@dataclass(frozen=True)
class ScalarFunction:
    """A member of the class of ``C^(n-1)`` functions that are ``C^n`` off zero.

    ``order_n`` is the fixed order ``n``.  Derivatives of any order are
    available away from zero; at zero they are available up to ``n - 1``, or
    up to ``n`` when ``smooth_at_zero`` is set.  At a breakpoint the piece to
    the right is used.
    """

    name: str
    order_n: int
    breaks: tuple[float, ...]
    pieces: tuple[_Laurent, ...]
    smooth_at_zero: bool = False
    chain_depth: int = field(default=0, compare=False)

    def __post_init__(self):
        if self.order_n < 0:
            raise DomainError(f"order must be nonnegative, got {self.order_n}")
        if len(self.pieces) != len(self.breaks) + 1:
            raise ConstructionError("need exactly one piece per interval")

    def _piece_index(self, t: np.ndarray) -> np.ndarray:
        return np.searchsorted(np.asarray(self.breaks, dtype=float), t, side="right")

    def derivatives(self, k: int, t) -> np.ndarray:
        """Vectorised ``f^(k)(t)``; unavailable derivatives at zero are ``nan``."""
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        idx = self._piece_index(t)
        for i, piece in enumerate(self.pieces):
            sel = idx == i
            if np.any(sel):
                out[sel] = piece.derivative(k, t[sel])
        if k > self.max_order_at_zero:
            out[t == 0] = np.nan
        return out

    @property
    def max_order_at_zero(self) -> int:
        return self.order_n if self.smooth_at_zero else self.order_n - 1

    def value(self, t: float) -> float:
        return float(self.derivatives(0, np.array([t]))[0])

    def deriv(self, k: int, t: float) -> float:
        if k < 0:
            raise DomainError(f"derivative order must be nonnegative, got {k}")
        if t == 0:
            return self.deriv_at_zero(k)
        return float(self.derivatives(k, np.array([t]))[0])

    def deriv_at_zero(self, k: int) -> float:
        if k > self.max_order_at_zero:
            raise DomainError(
                f"{self.name}: derivative of order {k} at 0 exceeds regularity "
                f"{self.max_order_at_zero}"
            )
        return float(self.derivatives(k, np.array([0.0]))[0])

    def __call__(self, t):
        return self.derivatives(0, t)


# -- builtin functions -----------------------------------------------------


def _monomial(n: int, sign: float = 1.0) -> _Laurent:
    return _Laurent(tuple([0.0] * n + [sign]), 0)


def builtin_a(n: int) -> ScalarFunction:
    """The generalized absolute value ``a(t) = |t| t^(n-1)``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return ScalarFunction(f"a[{n}]", n, (0.0,), (_monomial(n, -1.0), _monomial(n)), False)


def builtin_b(n: int) -> ScalarFunction:
    """The monomial ``b(t) = t^n``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return ScalarFunction(f"b[{n}]", n, (), (_monomial(n),), True)


def polynomial(coeffs, n: int) -> ScalarFunction:
    """Polynomial with ascending coefficients ``c_0 + c_1 t + ...`` as an order-``n`` function."""
    coeffs = tuple(float(c) for c in coeffs)
    if not coeffs:
        raise DomainError("polynomial needs at least one coefficient")
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    return ScalarFunction(f"poly{list(coeffs)}[{n}]", n, (), (_Laurent(coeffs, 0),), True)


@dataclass(frozen=True)
class BumpSpec:
    """Shape of the polynomial bridge used by :func:`builtin_smoothed`.

    ``degree`` defaults to ``2n + 3``, the smallest degree that can match
    ``n + 2`` derivative values (orders ``0..n+1``) at both endpoints
    ``+-width``.  ``width`` must lie in ``(0, 1]``.
    """

    degree: int | None = None
    width: float = 1.0


def builtin_smoothed(n: int, bump_spec: BumpSpec | None = None) -> ScalarFunction:
    """A ``C^(n+1)`` function equal to ``|t| t^(n-1)`` outside ``[-1, 1]``."""
    if n < 1:
        raise DomainError(f"n must be >= 1, got {n}")
    spec = bump_spec or BumpSpec()
    w = float(spec.width)
    if not 0 < w <= 1:
        raise ConstructionError(f"bridge width must lie in (0, 1], got {w}")
    deg = 2 * n + 3 if spec.degree is None else int(spec.degree)
    if deg < 0:
        raise ConstructionError(f"bridge degree must be nonnegative, got {deg}")
    a = builtin_a(n)
    rows, rhs = [], []
    for s in (-w, w):
        for j in range(n + 2):
            row = []
            for i in range(deg + 1):
                fall = math.perm(i, j) if i >= j else 0
                row.append(fall * s ** (i - j) if fall else 0.0)
            rows.append(row)
            rhs.append(a.deriv(j, s))
    mat = np.array(rows)
    rhs = np.array(rhs)
    coef, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    resid = float(np.abs(mat @ coef - rhs).max())
    if resid > 1e-9 * max(1.0, float(np.abs(rhs).max())):
        raise ConstructionError(
            f"bridge of degree {deg} cannot match {n + 2} derivatives at +-{w} "
            f"(residual {resid:.3e})"
        )
    bridge = _Laurent(tuple(float(c) for c in coef), 0)
    pieces = (_monomial(n, -1.0), bridge, _monomial(n))
    return ScalarFunction(f"smoothed[{n}]", n, (-w, w), pieces, True)


def function_from_id(spec: str, n: int) -> ScalarFunction:
    """Resolve ``a``, ``b``, ``smoothed`` or ``poly:c0,c1,...``."""
    if spec == "a":
        return builtin_a(n)
    if spec == "b":
        return builtin_b(n)
    if spec == "smoothed":
        return builtin_smoothed(n)
    if spec.startswith("poly:"):
        try:
            coeffs = [float(c) for c in spec[5:].split(",") if c.strip()]
        except ValueError as exc:
            raise DomainError(f"bad polynomial coefficients in {spec!r}") from exc
        return polynomial(coeffs, n)
    raise DomainError(f"unknown function id {spec!r}")


# -- divided differences ---------------------------------------------------


def _complete_homogeneous(m: int, zs: np.ndarray) -> np.ndarray:
    """``h_0..h_m`` of the columns of ``zs``; returns shape ``(m + 1, rows)``."""
    h = np.zeros((m + 1, zs.shape[0]))
    h[0] = 1.0
    for r in range(zs.shape[1]):
        x = zs[:, r]
        for d in range(1, m + 1):
            h[d] = h[d] + x * h[d - 1]
    return h


def _piece_dd(piece: _Laurent, zs: np.ndarray) -> np.ndarray:
    """Divided difference of one Laurent piece over the rows of ``zs``.

    ``t^e`` contributes ``h_(e-j)(z)`` for ``e >= j`` and
    ``(-1)^j h_(-e-1)(1/z) / prod(z)`` for ``e < 0``; no division by node gaps.
    """
    j = zs.shape[1] - 1
    out = np.zeros(zs.shape[0])
    exps = [piece.low + i for i in range(len(piece.coeffs))]
    top = max(exps)
    if top >= j:
        h = _complete_homogeneous(top - j, zs)
        for c, e in zip(piece.coeffs, exps):
            if c and e >= j:
                out += c * h[e - j]
    bottom = min(exps)
    if bottom < 0:
        inv = 1.0 / zs
        h = _complete_homogeneous(-bottom - 1, inv)
        scale = (-1) ** j / np.prod(zs, axis=1)
        for c, e in zip(piece.coeffs, exps):
            if c and e < 0:
                out += c * scale * h[-e - 1]
    return out


def divided_differences(f: ScalarFunction, nodes, classical_zero: bool = False) -> np.ndarray:
    """Vectorised divided differences over the last axis of ``nodes``.

    Each row is sorted and a Newton table is built.  An entry whose nodes
    all fall in one piece of ``f`` is evaluated in closed form from that
    piece (this covers every confluent entry); entries spanning a breakpoint
    use the difference recurrence, whose nodes are then distinct.  Node
    equality is exact; callers cluster nearly equal nodes beforehand.
    """
    z = np.sort(np.asarray(nodes, dtype=float), axis=-1)
    if z.ndim == 1:
        z = z[None, :]
    lead = z.shape[:-1]
    z = z.reshape(-1, z.shape[-1])
    m = z.shape[1]
    k = m - 1
    if k < 0:
        raise DomainError("need at least one node")
    if k > f.order_n:
        raise DomainError(f"{f.name}: {m} nodes exceed order {f.order_n}")

    pid = f._piece_index(z)
    level = f.derivatives(0, z)
    for j in range(1, k + 1):
        den = z[:, j:] - z[:, :-j]
        same = pid[:, j:] == pid[:, :-j]
        with np.errstate(divide="ignore", invalid="ignore"):
            q = (level[:, 1:] - level[:, :-1]) / den
        for i in range(m - j):
            for p in np.unique(pid[same[:, i], i]):
                rows = same[:, i] & (pid[:, i] == p)
                q[rows, i] = _piece_dd(f.pieces[p], z[rows, i:i + j + 1])
        level = q
    result = level[:, 0].copy()

    if k == f.order_n:
        origin = np.all(z == 0, axis=1)
        if np.any(origin):
            if classical_zero:
                if not f.smooth_at_zero:
                    raise DomainError(f"{f.name}: classical zero value needs f in C^n")
                result[origin] = f.deriv_at_zero(k) / math.factorial(k)
            else:
                result[origin] = 0.0
    if not np.all(np.isfinite(result)):
        raise DomainError(f"{f.name}: divided difference not finite at the given nodes")
    return result.reshape(lead)


def divided_difference(f: ScalarFunction, nodes, classical_zero: bool = False) -> float:
    """Divided difference of ``f`` at one node tuple."""
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 1:
        raise DomainError("nodes must be a flat sequence")
    return float(divided_differences(f, nodes, classical_zero)[0])


def divided_difference_recursive(f: ScalarFunction, nodes) -> float:
    """Reference evaluation by the defining top-down recursion.

    Runs in exact rational arithmetic on the stored piece coefficients, so
    nearly coincident nodes cost no accuracy; exponential in the number of
    nodes and meant as an oracle for :func:`divided_differences`.  When the
    first two nodes coincide a differing node is swapped into second
    position; when all coincide at ``v`` the value is ``f^(k)(v) / k!``,
    except at the origin on the top level where it is ``0``.
    """
    t = [Fraction(float(x)) for x in nodes]
    if len(t) - 1 > f.order_n:
        raise DomainError(f"{f.name}: {len(t)} nodes exceed order {f.order_n}")

    def deriv(k: int, v: Fraction) -> Fraction:
        if v == 0 and k > f.max_order_at_zero:
            raise DomainError(f"{f.name}: confluent zero node beyond regularity")
        piece = f.pieces[int(f._piece_index(np.array(float(v))))]
        return piece.exact_derivative(k, v)

    def rec(ts: list[Fraction]) -> Fraction:
        k = len(ts) - 1
        if k == 0:
            return deriv(0, ts[0])
        if ts[0] == ts[1]:
            other = next((i for i in range(2, len(ts)) if ts[i] != ts[0]), None)
            if other is None:
                if k == f.order_n and ts[0] == 0:
                    return Fraction(0)
                return deriv(k, ts[0]) / math.factorial(k)
            ts = [ts[0], ts[other]] + [x for i, x in enumerate(ts[1:], 1) if i != other]
        head = rec([ts[0]] + ts[2:])
        tail = rec([ts[1]] + ts[2:])
        return (head - tail) / (ts[0] - ts[1])

    return float(rec(t))


@lru_cache(maxsize=256)
def _chain_step(f: ScalarFunction) -> ScalarFunction:
    if f.order_n < 2:
        raise DomainError(f"{f.name}: chain step needs order >= 2")
    c0 = f.value(0.0)
    edges = (-np.inf,) + f.breaks + (np.inf,)
    pieces = []
    for i, piece in enumerate(f.pieces):
        lo, hi = edges[i], edges[i + 1]
        pieces.append(piece.divide_shift(c0, lo <= 0 <= hi))
    name = f"{f.name}_1" if f.chain_depth == 0 else f"{f.name.rsplit('_', 1)[0]}_{f.chain_depth + 1}"
    return ScalarFunction(name, f.order_n - 1, f.breaks, tuple(pieces),
                          f.smooth_at_zero, f.chain_depth + 1)


def f_chain(f: ScalarFunction, l: int) -> ScalarFunction:
    """``f_l`` with ``f_0 = f`` and ``f_l(t) = (f_{l-1}(t) - f_{l-1}(0)) / t``.

    ``f_l`` has order ``n - l``; ``l`` must satisfy ``0 <= l < n``.
    """
    if not 0 <= l < f.order_n:
        raise DomainError(f"chain index must satisfy 0 <= l < {f.order_n}, got {l}")
    for _ in range(l):
        f = _chain_step(f)
    return f


# -- bivariate symbols -----------------------------------------------------


@dataclass(frozen=True)
class BivariateSymbol:
    """A real function of two variables evaluated with numpy broadcasting."""

    name: str
    numerator_index: int

    def __call__(self, s0, s1):
        a0 = np.abs(np.asarray(s0, dtype=float))
        a1 = np.abs(np.asarray(s1, dtype=float))
        den = a0 + a1
        num = a0 if self.numerator_index == 0 else a1
        with np.errstate(divide="ignore", invalid="ignore"):
            out = np.where(den > 0, num / np.where(den > 0, den, 1.0), 0.0)
        return out if out.ndim else float(out)

    def eval(self, s0: float, s1: float) -> float:
        return float(self(s0, s1))


def rho() -> BivariateSymbol:
    """``|s0| / (|s0| + |s1|)``, zero at the origin."""
    return BivariateSymbol("rho", 0)


def psi() -> BivariateSymbol:
    """``|s1| / (|s0| + |s1|)``, zero at the origin."""
    return BivariateSymbol("psi", 1)
