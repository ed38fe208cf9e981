"""Symbols of multiple operator integrals.

A symbol is a function of ``arity`` real variables.  Everything downstream
only ever evaluates a symbol on the product of finitely many spectra, so the
single required method is :meth:`MoiSymbol.grid`, which maps a list of 1-d
eigenvalue arrays to the array of symbol values on their Cartesian product.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import DomainError
from .functions import BivariateSymbol, ScalarFunction, divided_differences


class MoiSymbol:
    arity: int

    def grid(self, spectra: Sequence[np.ndarray]) -> np.ndarray:
        raise NotImplementedError

    def _check(self, spectra):
        if len(spectra) != self.arity:
            raise DomainError(f"symbol of arity {self.arity} given {len(spectra)} spectra")
        return [np.asarray(s, dtype=float).ravel() for s in spectra]

    def __call__(self, *t: float) -> float:
        return float(self.grid([np.array([x], dtype=float) for x in t]).ravel()[0])

    def __mul__(self, other: "MoiSymbol") -> "Product":
        return Product((self, other))


def _outer(vectors: Sequence[np.ndarray]) -> np.ndarray:
    out = np.ones(())
    for v in vectors:
        out = np.multiply.outer(out, v)
    return out


@dataclass(frozen=True, eq=False)
class DividedDifference(MoiSymbol):
    """``f^[n]`` as a symbol of ``n + 1`` variables."""

    f: ScalarFunction
    classical_zero: bool = False

    @property
    def arity(self) -> int:
        return self.f.order_n + 1

    def grid(self, spectra):
        spectra = self._check(spectra)
        mesh = np.meshgrid(*spectra, indexing="ij")
        nodes = np.stack([g.ravel() for g in mesh], axis=-1)
        vals = divided_differences(self.f, nodes, self.classical_zero)
        return vals.reshape(tuple(len(s) for s in spectra))


@dataclass(frozen=True, eq=False)
class OrthantIndicator(MoiSymbol):
    """Indicator of ``sign * [0, inf)^arity`` (closed orthant)."""

    sign: int
    arity: int

    def __post_init__(self):
        if self.sign not in (1, -1):
            raise DomainError(f"orthant sign must be +1 or -1, got {self.sign}")

    def grid(self, spectra):
        spectra = self._check(spectra)
        return _outer([(self.sign * s >= 0).astype(float) for s in spectra])


@dataclass(frozen=True, eq=False)
class ZeroIndicator(MoiSymbol):
    """Indicator of the origin of ``R^arity``."""

    arity: int

    def grid(self, spectra):
        spectra = self._check(spectra)
        return _outer([(s == 0).astype(float) for s in spectra])


@dataclass(frozen=True, eq=False)
class Constant(MoiSymbol):
    value: float
    arity: int

    def grid(self, spectra):
        spectra = self._check(spectra)
        return np.full(tuple(len(s) for s in spectra), float(self.value))


@dataclass(frozen=True, eq=False)
class ElementaryTensor(MoiSymbol):
    """``phi_0(t_0) * ... * phi_n(t_n)`` for vectorised scalar callables."""

    factors: tuple[Callable[[np.ndarray], np.ndarray], ...]

    @property
    def arity(self) -> int:
        return len(self.factors)

    def grid(self, spectra):
        spectra = self._check(spectra)
        return _outer([np.asarray(phi(s), dtype=float) for phi, s in zip(self.factors, spectra)])


@dataclass(frozen=True, eq=False)
class Translate(MoiSymbol):
    """``inner(t_0 + delta, ..., t_n + delta)``."""

    inner: MoiSymbol
    delta: float

    @property
    def arity(self) -> int:
        return self.inner.arity

    def grid(self, spectra):
        spectra = self._check(spectra)
        return self.inner.grid([s + self.delta for s in spectra])


@dataclass(frozen=True, eq=False)
class Product(MoiSymbol):
    factors: tuple[MoiSymbol, ...]

    def __post_init__(self):
        if len({f.arity for f in self.factors}) != 1:
            raise DomainError("product factors must share one arity")

    @property
    def arity(self) -> int:
        return self.factors[0].arity

    def grid(self, spectra):
        spectra = self._check(spectra)
        out = self.factors[0].grid(spectra)
        for f in self.factors[1:]:
            out = out * f.grid(spectra)
        return out


@dataclass(frozen=True, eq=False)
class BivariateLift(MoiSymbol):
    """``sigma(t_i, t_j)`` viewed as a symbol of ``arity`` variables."""

    sigma: BivariateSymbol
    i: int
    j: int
    arity: int

    def __post_init__(self):
        if not (0 <= self.i < self.arity and 0 <= self.j < self.arity and self.i != self.j):
            raise DomainError(f"lift indices ({self.i}, {self.j}) invalid for arity {self.arity}")

    def grid(self, spectra):
        spectra = self._check(spectra)
        shape = tuple(len(s) for s in spectra)
        si = spectra[self.i].reshape([-1 if a == self.i else 1 for a in range(self.arity)])
        sj = spectra[self.j].reshape([-1 if a == self.j else 1 for a in range(self.arity)])
        return np.broadcast_to(self.sigma(si, sj), shape).copy()


@dataclass(frozen=True, eq=False)
class Expand(MoiSymbol):
    """``inner`` with a dummy variable inserted at ``position``."""

    inner: MoiSymbol
    position: int

    @property
    def arity(self) -> int:
        return self.inner.arity + 1

    def grid(self, spectra):
        spectra = self._check(spectra)
        rest = spectra[: self.position] + spectra[self.position + 1:]
        vals = np.expand_dims(self.inner.grid(rest), self.position)
        return np.repeat(vals, len(spectra[self.position]), axis=self.position)


def divided_difference_symbol(f: ScalarFunction, classical_zero: bool = False) -> DividedDifference:
    return DividedDifference(f, classical_zero)


def symbol_from_id(spec: str) -> MoiSymbol:
    """Parse ``ddiff:<function>:<n>``, ``const:<c>:<arity>``,
    ``orthant:<+|->:<arity>`` or ``zero:<arity>``."""
    from .functions import function_from_id

    parts = spec.split(":")
    try:
        if parts[0] == "ddiff" and len(parts) >= 3:
            n = int(parts[-1])
            return DividedDifference(function_from_id(":".join(parts[1:-1]), n))
        if parts[0] == "const" and len(parts) == 3:
            return Constant(float(parts[1]), int(parts[2]))
        if parts[0] == "orthant" and len(parts) == 3:
            return OrthantIndicator(-1 if parts[1] == "-" else 1, int(parts[2]))
        if parts[0] == "zero" and len(parts) == 2:
            return ZeroIndicator(int(parts[1]))
    except ValueError as exc:
        raise DomainError(f"cannot parse symbol {spec!r}: {exc}") from exc
    raise DomainError(f"unknown symbol {spec!r}")
