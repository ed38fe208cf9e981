"""Randomised lower bounds for weak-type norms of divided-difference integrals.

For an operator ``A`` and arguments ``x_l`` the ratio

    ||T_{f^[n]}^{(A, ..., A)}(x_1, ..., x_n)||_target / prod ||x_l||_{p_l}

is a lower bound for the multilinear norm.  The estimators below sample
``A`` and the ``x_l``, improve the arguments by coordinate ascent, and
report the largest ratio seen.  Nothing here certifies an upper bound; every
reported number is an empirical lower bound on a supremum.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import sampling
from .errors import DomainError
from .functions import ScalarFunction, f_chain, function_from_id
from .linalg import matrix_from_json, matrix_to_json, schatten_norm, weak_norm
from .moi import MultipleOperatorIntegral
from .reduction import ExponentTuple, consummations
from .symbols import DividedDifference

TARGETS = ("weak", "s1", "s2")
SAMPLE_HEADER = ["dim", "n", "p_tuple", "target", "constraint", "trial", "ratio", "is_witness"]
SWEEP_HEADER = ["dim", "n", "p_tuple", "target", "constraint", "max_ratio", "samples", "seed"]
ULTIMATE_HEADER = ["dim", "n", "p_tuple", "m_hat", "sup_norm", "l_plus", "l_minus", "ratio"]


def target_norm(x: np.ndarray, target: str) -> float:
    if target == "weak":
        return weak_norm(x)
    if target == "s1":
        return schatten_norm(x, 1)
    if target == "s2":
        return schatten_norm(x, 2)
    raise DomainError(f"target must be one of {TARGETS}, got {target!r}")


def thread_count() -> int:
    raw = os.environ.get("MOILAB_THREADS", "")
    try:
        cap = int(raw) if raw else (os.cpu_count() or 1)
    except ValueError:
        raise DomainError(f"MOILAB_THREADS must be an integer, got {raw!r}") from None
    return max(1, cap)


@dataclass(frozen=True)
class ExperimentConfig:
    function: str = "a"
    n: int = 2
    p: tuple[float, ...] = (2.0, 2.0)
    target: str = "weak"
    constraint: str = "any"
    dims: tuple[int, ...] = (4, 8, 16, 32)
    samples: int = 50
    ascent_steps: int = 5
    restarts: int = 8
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "p", ExponentTuple(tuple(self.p)).p)
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if len(self.p) != self.n:
            raise DomainError(f"exponent tuple has {len(self.p)} entries, expected n = {self.n}")
        if self.target not in TARGETS:
            raise DomainError(f"target must be one of {TARGETS}, got {self.target!r}")
        if self.constraint not in sampling.CONSTRAINTS:
            raise DomainError(f"constraint must be one of {sampling.CONSTRAINTS}, got {self.constraint!r}")
        if not self.dims or min(self.dims) < 2:
            raise DomainError(f"dims must be non-empty and >= 2, got {self.dims}")
        if self.samples < 0 or self.ascent_steps < 0 or self.restarts < 1:
            raise DomainError("samples and ascent_steps must be >= 0 and restarts >= 1")

    @property
    def exponents(self) -> ExponentTuple:
        return ExponentTuple(self.p)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f for f in cls.__dataclass_fields__}
        unknown = set(data) - known
        if unknown:
            raise DomainError(f"unknown config keys {sorted(unknown)}")
        data = dict(data)
        if "p" in data:
            data["p"] = tuple(float(v) for v in data["p"])
        if "dims" in data:
            data["dims"] = tuple(data["dims"])
        return cls(**data)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except json.JSONDecodeError as exc:
            raise DomainError(f"config {path} is not valid JSON: {exc}") from exc

    def to_dict(self) -> dict:
        out = asdict(self)
        out["p"], out["dims"] = list(self.p), list(self.dims)
        return out


@dataclass
class RatioSample:
    dim: int
    trial: int
    ratio: float
    A: np.ndarray = field(repr=False)
    xs: list[np.ndarray] = field(repr=False)


@dataclass
class BoundEstimate:
    """Empirical lower bound: the largest ratio over all recorded trials."""

    value: float
    witness: RatioSample | None
    trials: int
    per_dim: dict[int, float]
    samples: list[RatioSample] = field(default_factory=list, repr=False)
    label: str = ""


# -- ascent ----------------------------------------------------------------


def _dual_direction(y: np.ndarray, target: str) -> np.ndarray:
    """A matrix ``z`` whose pairing ``Re Tr(z^* y)`` tracks the target norm of ``y``."""
    u, s, vh = np.linalg.svd(y)
    if target == "s2":
        return y / max(np.linalg.norm(y), np.finfo(float).tiny)
    if target == "s1":
        return u @ vh
    k = int(np.argmax(np.arange(1, len(s) + 1) * s))
    return u[:, : k + 1] @ vh[: k + 1]


def holder_dual(g: np.ndarray, p: float) -> np.ndarray:
    """Unit-``S_p`` maximiser of ``Re Tr(g^* x)``.

    With ``g = W diag(s) V^*`` this is ``W diag(s^(q-1)) V^*`` rescaled, ``q``
    the conjugate exponent.
    """
    w, s, vh = np.linalg.svd(g)
    if s[0] == 0:
        return g
    if p == 1:
        return np.outer(w[:, 0], vh[0])
    if np.isinf(p):
        return w @ vh
    powered = (s / s[0]) ** (1.0 / (p - 1.0))
    x = (w * powered) @ vh
    return x / schatten_norm(x, p)


def ratio(op: MultipleOperatorIntegral, xs: Sequence[np.ndarray], ps: Sequence[float], target: str) -> float:
    denom = math.prod(schatten_norm(x, p) for x, p in zip(xs, ps))
    if denom == 0:
        raise DomainError("zero argument in ratio")
    return target_norm(op(*xs), target) / denom


def ascend(op: MultipleOperatorIntegral, xs: list[np.ndarray], ps: Sequence[float], target: str,
           steps: int) -> tuple[list[np.ndarray], float]:
    """Coordinate ascent: replace one argument at a time by the Holder dual of the gradient.

    A move is kept only if it raises the ratio, so the returned ratio is never
    below the starting one.
    """
    best = ratio(op, xs, ps, target)
    for _ in range(steps):
        for k in range(1, op.n + 1):
            y = op(*xs)
            if not np.any(y):
                break
            g = op.gradient(xs, k, _dual_direction(y, target))
            if not np.any(g):
                continue
            trial = list(xs)
            trial[k - 1] = holder_dual(g, ps[k - 1])
            r = ratio(op, trial, ps, target)
            if r > best:
                xs, best = trial, r
    return xs, best


# -- estimators ------------------------------------------------------------


def trial_rng(seed: int, dim: int, index: int, salt: int = 0) -> np.random.Generator:
    return np.random.default_rng((int(seed), int(dim), int(index), int(salt)))


def _run_trial(f: ScalarFunction, ps, target: str, constraint: str, dim: int, index: int,
               cfg: ExperimentConfig, salt: int) -> RatioSample:
    rng = trial_rng(cfg.seed, dim, index, salt)
    kind = "uniform" if rng.random() < 0.5 else "gue"
    A = sampling.random_hermitian(rng, dim, kind, constraint)
    op = MultipleOperatorIntegral(DividedDifference(f), [A] * (len(ps) + 1))
    best_r, best_xs = -1.0, None
    for _ in range(cfg.restarts):
        xs = sampling.arguments(rng, dim, ps)
        xs, r = ascend(op, xs, ps, target, cfg.ascent_steps)
        if r > best_r:
            best_r, best_xs = r, xs
    return RatioSample(dim, index, best_r, A, best_xs)


def _estimate(f: ScalarFunction, ps, target: str, constraint: str, cfg: ExperimentConfig,
              salt: int = 0, label: str = "") -> BoundEstimate:
    jobs = [(dim, i) for dim in cfg.dims for i in range(cfg.samples)]
    run = lambda job: _run_trial(f, ps, target, constraint, job[0], job[1], cfg, salt)  # noqa: E731
    workers = min(thread_count(), max(1, len(jobs)))
    if workers == 1:
        samples = [run(j) for j in jobs]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            samples = list(pool.map(run, jobs))
    per_dim = {dim: max((s.ratio for s in samples if s.dim == dim), default=0.0) for dim in cfg.dims}
    witness = max(samples, key=lambda s: s.ratio, default=None)
    return BoundEstimate(witness.ratio if witness else 0.0, witness, len(samples), per_dim, samples, label)


def estimate_M(cfg: ExperimentConfig, target: str | None = None) -> BoundEstimate:
    """Empirical lower bound for the norm of ``T_{f^[n]}`` into the target space."""
    f = function_from_id(cfg.function, cfg.n)
    target = target or cfg.target
    return _estimate(f, cfg.p, target, cfg.constraint, cfg, label=f"M[{target},{cfg.constraint}]")


def estimate_L(cfg: ExperimentConfig, sign: int) -> BoundEstimate:
    """Max over ``0 <= k < n`` and consummations ``q`` of length ``n - k`` of the
    sign-constrained weak-type estimate for ``f_k^[n-k]`` on ``S_q``."""
    if sign not in (1, -1):
        raise DomainError(f"sign must be +1 or -1, got {sign}")
    constraint = "psd" if sign > 0 else "nsd"
    f = function_from_id(cfg.function, cfg.n)
    best: BoundEstimate | None = None
    salt = 0
    for k in range(cfg.n):
        fk = f_chain(f, k)
        for q in consummations(cfg.exponents):
            if len(q) != cfg.n - k:
                continue
            salt += 1
            est = _estimate(fk, q.p, "weak", constraint, cfg, salt=salt, label=f"k={k};q={q.label()}")
            if best is None or est.value > best.value:
                best = est
    return best


def psd_product_residual(sample: RatioSample, ps, constant: float, function: str = "a") -> float:
    """Compare ``T_{f^[n]}(xs)`` with ``constant * x_1 ... x_n`` for a sign-definite sample."""
    n = len(ps)
    f = function_from_id(function, n)
    out = MultipleOperatorIntegral(DividedDifference(f), [sample.A] * (n + 1))(*sample.xs)
    prod = np.eye(sample.A.shape[0], dtype=complex)
    for x in sample.xs:
        prod = prod @ x
    return float(np.linalg.norm(out - constant * prod)) / max(1.0, float(np.linalg.norm(out)))


# -- reports ---------------------------------------------------------------


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def samples_csv(cfg: ExperimentConfig, est: BoundEstimate, target: str | None = None) -> str:
    target = target or cfg.target
    winners = {}
    for s in est.samples:
        if s.dim not in winners or s.ratio > winners[s.dim].ratio:
            winners[s.dim] = s
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(SAMPLE_HEADER)
    label = cfg.exponents.label()
    for s in est.samples:
        w.writerow([s.dim, cfg.n, label, target, cfg.constraint, s.trial, repr(s.ratio),
                    int(winners[s.dim] is s)])
    return buf.getvalue()


def witnesses_json(cfg: ExperimentConfig, est: BoundEstimate, target: str | None = None) -> dict:
    """Per-dimension maximising samples with everything needed to re-evaluate them."""
    out = {"config": cfg.to_dict(), "target": target or cfg.target, "witnesses": []}
    for dim in cfg.dims:
        cands = [s for s in est.samples if s.dim == dim]
        if not cands:
            continue
        s = max(cands, key=lambda c: c.ratio)
        out["witnesses"].append({"dim": dim, "trial": s.trial, "ratio": s.ratio, "A": matrix_to_json(s.A),
                                 "xs": [matrix_to_json(x) for x in s.xs]})
    return out


def reevaluate_witness(entry: dict, config: dict, target: str) -> float:
    cfg = ExperimentConfig.from_dict(config)
    A = matrix_from_json(entry["A"])
    xs = [matrix_from_json(x) for x in entry["xs"]]
    op = MultipleOperatorIntegral(DividedDifference(function_from_id(cfg.function, cfg.n)), [A] * (cfg.n + 1))
    return ratio(op, xs, cfg.p, target)


def run_experiment(cfg: ExperimentConfig, out: str | Path, witness_out: str | Path | None = None
                   ) -> BoundEstimate:
    """Write the per-trial CSV (and the witness sidecar) for one configuration."""
    est = estimate_M(cfg)
    Path(out).write_text(samples_csv(cfg, est))
    witness_out = Path(witness_out) if witness_out else Path(str(out) + ".witness.json")
    witness_out.write_text(json.dumps(witnesses_json(cfg, est)))
    return est


def sweep_dimensions(cfg: ExperimentConfig, targets: Sequence[str] = ("weak", "s1")) -> str:
    """Per-dimension maxima for several targets on identical seeds."""
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(SWEEP_HEADER)
    label = cfg.exponents.label()
    for target in targets:
        est = estimate_M(cfg, target)
        for dim in cfg.dims:
            w.writerow([dim, cfg.n, label, target, cfg.constraint, repr(est.per_dim[dim]), cfg.samples, cfg.seed])
    return buf.getvalue()


def grid_sup(f: ScalarFunction, samples: Sequence[RatioSample]) -> float:
    """Largest ``|f^[n]|`` on the spectrum grids of the sampled operators."""
    best = 0.0
    for s in samples:
        op = MultipleOperatorIntegral(DividedDifference(f), [s.A] * (f.order_n + 1))
        best = max(best, float(np.abs(op.grid).max()))
    return best


def verify_theorem_ultimate(cfg: ExperimentConfig) -> str:
    """Per dimension, ``M_hat / (sup|f^[n]| + L_hat^+ + L_hat^-)`` with its ingredients.

    A consistency probe: the ratio is expected to stay bounded as the
    dimension grows, but no threshold is asserted.
    """
    buf = io.StringIO()
    w = _writer(buf)
    w.writerow(ULTIMATE_HEADER)
    if cfg.samples == 0:
        return buf.getvalue()
    f = function_from_id(cfg.function, cfg.n)
    label = cfg.exponents.label()
    for dim in cfg.dims:
        sub = ExperimentConfig(**{**cfg.to_dict(), "p": cfg.p, "dims": (dim,), "target": "weak",
                                  "constraint": "any"})
        m = estimate_M(sub)
        sup = grid_sup(f, m.samples)
        lp = estimate_L(sub, 1).value
        lm = estimate_L(sub, -1).value
        denom = sup + lp + lm
        w.writerow([dim, cfg.n, label, repr(m.value), repr(sup), repr(lp), repr(lm),
                    repr(m.value / denom) if denom > 0 else "inf"])
    return buf.getvalue()

