"""Seeded randomized sweeps over the exact identities.

Each sweep draws ``trials`` independent cases, trial ``i`` from its own
generator seeded by ``(seed, i)``, and returns one residual per trial.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
import scipy.linalg

from . import sampling
from .errors import DomainError
from .functions import (
    ScalarFunction,
    builtin_a,
    builtin_b,
    builtin_smoothed,
    divided_difference,
    divided_difference_recursive,
    psi,
    rho,
)
from .linalg import eig, frobenius_residual, schatten_norm, weak_norm
from .moi import (
    MultipleOperatorIntegral,
    check_amplification,
    check_elementary_tensor,
    check_translation,
    check_truncation,
    check_zero_indicator,
    ensure_invertible,
    s2_sharpness_witness,
)
from .reduction import (
    check_block_decomposition,
    check_composition,
    check_crucial,
    check_dummy_merge,
    check_postcrucial,
    check_precrucial,
    consummations,
    ExponentTuple,
    reduce_block,
    sign_blocks,
    sign_change,
)
from .symbols import (
    Constant,
    DividedDifference,
    ElementaryTensor,
    MoiSymbol,
    OrthantIndicator,
    Product,
)

FUNCTION_IDS = ("a", "b", "smoothed")
_BUILDERS = {"a": builtin_a, "b": builtin_b, "smoothed": builtin_smoothed}


@dataclass
class SweepResult:
    name: str
    residuals: list[float] = field(default_factory=list)
    tol: float = 0.0

    @property
    def trials(self) -> int:
        return len(self.residuals)

    @property
    def max_residual(self) -> float:
        return max(self.residuals, default=0.0)

    @property
    def passed(self) -> bool:
        return all(np.isfinite(r) and r <= self.tol for r in self.residuals)


def trial_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng((int(seed), int(index)))


def make_function(fid: str, n: int) -> ScalarFunction:
    try:
        return _BUILDERS[fid](n)
    except KeyError:
        raise DomainError(f"unknown function id {fid!r}") from None


def _pick(rng, seq):
    return seq[int(rng.integers(len(seq)))]


def _orders(n: int | None, choices) -> tuple[int, ...]:
    return (n,) if n is not None else tuple(choices)


def _sweep(name: str, tol: float, trials: int, seed: int, case: Callable) -> SweepResult:
    out = SweepResult(name, tol=tol)
    for i in range(trials):
        out.residuals.append(float(case(trial_rng(seed, i))))
    return out


# -- scalar identities -----------------------------------------------------


def sweep_symmetry(trials: int, seed: int, n: int | None = None, tol: float = 1e-9) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3, 4)))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        ts = sampling.node_tuple(rng, order + 1)
        base = divided_difference(f, ts)
        worst = 0.0
        for _ in range(5):
            val = divided_difference(f, list(rng.permutation(ts)))
            worst = max(worst, abs(val - base) / max(1.0, abs(base)))
        return worst

    return _sweep("symmetry", tol, trials, seed, case)


def sweep_recursion(trials: int, seed: int, n: int | None = None, tol: float = 1e-8) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3, 4)))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        ts = sampling.node_tuple(rng, order + 1)
        fast = divided_difference(f, ts)
        slow = divided_difference_recursive(f, ts)
        return abs(fast - slow) / max(1.0, abs(slow))

    return _sweep("recursion", tol, trials, seed, case)


def sweep_precrucial(trials: int, seed: int, n: int | None = None, tol: float = 1e-8) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3, 4)))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        return check_precrucial(f, sampling.node_tuple(rng, order))

    return _sweep("precrucial", tol, trials, seed, case)


def sweep_crucial(trials: int, seed: int, n: int | None = None, tol: float = 1e-8) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3, 4)))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        while True:
            ts = sampling.node_tuple(rng, order + 1)
            pairs = [(i, j) for i in range(order + 1) for j in range(order + 1)
                     if i != j and ts[i] != ts[j] and ts[i] != 0 and ts[j] != 0]
            if pairs:
                i, j = _pick(rng, pairs)
                return check_crucial(f, ts, i, j)

    return _sweep("crucial", tol, trials, seed, case)


def sweep_postcrucial(trials: int, seed: int, n: int | None = None, tol: float = 1e-8) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3, 4)))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        l = int(rng.integers(order))
        return check_postcrucial(f, l, sampling.node_tuple(rng, order - l + 1))

    return _sweep("postcrucial", tol, trials, seed, case)


# -- operator identities ---------------------------------------------------


def random_symbol(rng: np.random.Generator, n: int) -> MoiSymbol:
    """A divided-difference symbol, possibly multiplied by a constant or an orthant indicator."""
    base = DividedDifference(make_function(_pick(rng, FUNCTION_IDS), n))
    u = rng.random()
    if u < 0.2:
        return Product((base, Constant(float(rng.uniform(-2, 2)), n + 1)))
    if u < 0.35:
        return Product((base, OrthantIndicator(_pick(rng, (1, -1)), n + 1)))
    return base


def _operator(rng, d):
    u = rng.random()
    if u < 0.15:
        return sampling.with_repeats(rng, d)
    if u < 0.3:
        return sampling.with_kernel(rng, d)
    return sampling.random_hermitian(rng, d, kind=_pick(rng, ("uniform", "gue")))


def sweep_amplify(trials: int, seed: int, n: int | None = None, tol: float = 1e-11) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4))
        phi = random_symbol(rng, order)
        As = [_operator(rng, d) for _ in range(order + 1)]
        return check_amplification(phi, As, sampling.frobenius_unit(rng, d, order))

    return _sweep("amplify", tol, trials, seed, case)


def sweep_indicator(trials: int, seed: int, n: int | None = None, tol: float = 1e-11) -> SweepResult:
    """Orthant truncation on sign-definite operators and the zero-indicator identity."""
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6, 7, 8))
        xs = sampling.frobenius_unit(rng, d, order)
        if rng.random() < 0.25:
            return check_zero_indicator(sampling.with_kernel(rng, d, int(rng.integers(1, d + 1))), xs,
                                        float(rng.uniform(-2, 2)))
        sign = _pick(rng, (1, -1))
        A = sampling.random_hermitian(rng, d, _pick(rng, ("uniform", "gue")), "psd" if sign > 0 else "nsd")
        return check_truncation(random_symbol(rng, order), A, xs, sign)

    return _sweep("indicator", tol, trials, seed, case)


def sweep_translate(trials: int, seed: int, n: int | None = None, tol: float = 1e-11) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6, 7, 8))
        A = _operator(rng, d)
        return check_translation(random_symbol(rng, order), A, sampling.frobenius_unit(rng, d, order),
                                 float(rng.uniform(-1, 1)))

    return _sweep("translate", tol, trials, seed, case)


_ELEMENTARY = (
    (np.exp, scipy.linalg.expm),
    (np.cos, scipy.linalg.cosm),
    (np.sin, scipy.linalg.sinm),
    (lambda t: t, lambda m: m),
    (lambda t: t**2 - 1, lambda m: m @ m - np.eye(m.shape[0])),
)


def sweep_elementary(trials: int, seed: int, n: int | None = None, tol: float = 1e-11) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6, 7, 8))
        picks = [_ELEMENTARY[int(rng.integers(len(_ELEMENTARY)))] for _ in range(order + 1)]
        As = [_operator(rng, d) for _ in range(order + 1)]
        return check_elementary_tensor([p[0] for p in picks], [p[1] for p in picks], As,
                                       sampling.frobenius_unit(rng, d, order))

    return _sweep("elementary", tol, trials, seed, case)


def sweep_composition(trials: int, seed: int, n: int | None = None, tol: float = 1e-11) -> SweepResult:
    """Bivariate factor composed into a neighbouring slot, and dummy-variable merging."""
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6, 7, 8))
        A = _operator(rng, d)
        picks = [_ELEMENTARY[int(rng.integers(len(_ELEMENTARY)))][0] for _ in range(order + 1)]
        h2 = ElementaryTensor(tuple(picks))
        k = int(rng.integers(order))
        r1 = check_composition(h2, _pick(rng, (rho(), psi())), k, A, sampling.frobenius_unit(rng, d, order))
        inner = DividedDifference(make_function(_pick(rng, FUNCTION_IDS), order - 1))
        r2 = check_dummy_merge(inner, int(rng.integers(1, order)), A, sampling.frobenius_unit(rng, d, order))
        return max(r1, r2)

    return _sweep("composition", tol, trials, seed, case)


def _invertible(rng, d):
    A, _ = ensure_invertible(sampling.random_hermitian(rng, d, _pick(rng, ("uniform", "gue"))))
    return A


def sweep_blocks(trials: int, seed: int, n: int | None = None, tol: float = 1e-9) -> SweepResult:
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3)))
        d = _pick(rng, (4, 6, 8))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        return check_block_decomposition(f, _invertible(rng, d), sampling.frobenius_unit(rng, d, order))

    return _sweep("blocks", tol, trials, seed, case)


def sweep_reduce(trials: int, seed: int, n: int | None = None, tol: float = 1e-9) -> SweepResult:
    """Worst residual over every mixed-sign block and every admissible split position."""
    def case(rng):
        order = _pick(rng, _orders(n, (2, 3)))
        d = _pick(rng, (4, 6, 8))
        f = make_function(_pick(rng, FUNCTION_IDS), order)
        spec = eig(_invertible(rng, d))
        blocks = sign_blocks(spec, sampling.frobenius_unit(rng, d, order))
        worst = 0.0
        for mask, block in blocks.items():
            if sign_change(mask, order) is None:
                continue
            for k in range(order):
                if ((mask >> k) & 1) != ((mask >> (k + 1)) & 1):
                    worst = max(worst, reduce_block(f, spec, block, mask, k).residual)
        return worst

    return _sweep("reduce", tol, trials, seed, case)


def sweep_consummation(trials: int, seed: int, n: int | None = None, tol: float = 1e-12) -> SweepResult:
    """Residual ``|sum 1/q - 1|``; a wrong count is reported as an infinite residual."""
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3, 4, 5)))
        w = rng.dirichlet(np.ones(order))
        w = np.clip(w, 1e-3, None)
        p = ExponentTuple(tuple(1.0 / v for v in w / w.sum()))
        outs = consummations(p)
        if len(outs) != 2 ** (order - 1):
            return np.inf
        return max(abs(sum(1.0 / q for q in c.p) - 1.0) for c in outs)

    return _sweep("consummation", tol, trials, seed, case)


# -- norm layer ------------------------------------------------------------


def sweep_s2_bound(trials: int, seed: int, n: int | None = None, tol: float = 1e-10) -> SweepResult:
    """Excess of ``|T(xs)|_2`` over the grid bound, and the sharpness gap of the witness."""
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6))
        phi = random_symbol(rng, order)
        As = [_operator(rng, d) for _ in range(order + 1)]
        op = MultipleOperatorIntegral(phi, As)
        bound = float(np.abs(op.grid).max())
        xs = sampling.frobenius_unit(rng, d, order)
        excess = max(0.0, np.linalg.norm(op(*xs)) - bound) / max(1.0, bound)
        ws, attained = s2_sharpness_witness(phi, As)
        gap = abs(np.linalg.norm(op(*ws)) - bound) / max(1.0, bound)
        return max(excess, gap, abs(attained - bound))

    return _sweep("s2-bound", tol, trials, seed, case)


def holder_tuple(rng: np.random.Generator, n: int) -> tuple[float, ...]:
    choices = {1: [(1.0,)], 2: [(2.0, 2.0), (4.0, 4.0 / 3.0), (3.0, 1.5), (1.0, np.inf)],
               3: [(3.0, 3.0, 3.0), (2.0, 4.0, 4.0), (4.0, 2.0, 4.0), (2.0, 2.0, np.inf)]}
    return _pick(rng, choices[n])


def sweep_contraction(trials: int, seed: int, n: int | None = None, tol: float = 1e-10) -> SweepResult:
    """Excess of ``|T_chi(xs)|_1`` over ``prod |x_l|_{p_l}``, relative to the product."""
    def case(rng):
        order = _pick(rng, _orders(n, (1, 2, 3)))
        d = _pick(rng, (2, 3, 4, 5, 6))
        ps = holder_tuple(rng, order)
        sign = _pick(rng, (1, -1))
        A = _operator(rng, d)
        xs = [sampling.complex_gaussian(rng, d) for _ in range(order)]
        out = MultipleOperatorIntegral(OrthantIndicator(sign, order + 1), [A] * (order + 1))(*xs)
        rhs = float(np.prod([schatten_norm(x, p) for x, p in zip(xs, ps)]))
        return max(0.0, schatten_norm(out, 1) - rhs) / rhs

    return _sweep("contraction", tol, trials, seed, case)


def sweep_quasi_triangle(trials: int, seed: int, n: int | None = None, tol: float = 1e-12) -> SweepResult:
    def case(rng):
        d = int(rng.integers(1, 16))
        x = sampling.complex_gaussian(rng, d) * rng.exponential()
        y = sampling.complex_gaussian(rng, d) * rng.exponential()
        rhs = 2 * weak_norm(x) + 2 * weak_norm(y)
        return max(0.0, weak_norm(x + y) - rhs) / rhs

    return _sweep("quasi-triangle", tol, trials, seed, case)


def sweep_weak_vs_s1(trials: int, seed: int, n: int | None = None, tol: float = 1e-12) -> SweepResult:
    def case(rng):
        d = int(rng.integers(1, 16))
        x = sampling.complex_gaussian(rng, d, int(rng.integers(1, 16)))
        s1 = schatten_norm(x, 1)
        return max(0.0, weak_norm(x) - s1) / s1

    return _sweep("weak<=s1", tol, trials, seed, case)


SWEEPS: dict[str, Callable[..., SweepResult]] = {
    "symmetry": sweep_symmetry,
    "recursion": sweep_recursion,
    "precrucial": sweep_precrucial,
    "crucial": sweep_crucial,
    "postcrucial": sweep_postcrucial,
    "amplify": sweep_amplify,
    "indicator": sweep_indicator,
    "translate": sweep_translate,
    "elementary": sweep_elementary,
    "composition": sweep_composition,
    "blocks": sweep_blocks,
    "reduce": sweep_reduce,
    "consummation": sweep_consummation,
    "s2-bound": sweep_s2_bound,
    "contraction": sweep_contraction,
    "quasi-triangle": sweep_quasi_triangle,
    "weak<=s1": sweep_weak_vs_s1,
}


def run_sweep(name: str, trials: int, seed: int, n: int | None = None) -> SweepResult:
    try:
        sweep = SWEEPS[name]
    except KeyError:
        raise DomainError(f"unknown sweep {name!r}; choose from {sorted(SWEEPS)}") from None
    return sweep(trials, seed, n=n)
