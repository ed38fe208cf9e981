import csv
import io
import json
import math

import numpy as np
import pytest

from moilab.errors import DomainError
from moilab.experiments import (
    SAMPLE_HEADER,
    SWEEP_HEADER,
    ULTIMATE_HEADER,
    ExperimentConfig,
    RatioSample,
    ascend,
    estimate_L,
    estimate_M,
    holder_dual,
    psd_product_residual,
    ratio,
    reevaluate_witness,
    run_experiment,
    samples_csv,
    sweep_dimensions,
    verify_theorem_ultimate,
)
from moilab.functions import builtin_a
from moilab.linalg import schatten_norm
from moilab.moi import MultipleOperatorIntegral, moi_s2_bound
from moilab.symbols import DividedDifference

from conftest import random_matrix

SMALL = dict(function="a", n=2, p=[2, 2], target="weak", constraint="any", dims=[3, 4],
             samples=4, ascent_steps=2, restarts=2, seed=3)


def small(**kw):
    return ExperimentConfig.from_dict({**SMALL, **kw})


class TestConfig:
    def test_round_trip(self, tmp_path):
        cfg = small()
        path = tmp_path / "cfg.json"
        path.write_text(json.dumps(cfg.to_dict()))
        assert ExperimentConfig.load(path) == cfg

    @pytest.mark.parametrize("bad", [
        dict(p=[2, 3]), dict(p=[2]), dict(target="s3"), dict(constraint="pos"),
        dict(dims=[1, 4]), dict(dims=[]), dict(restarts=0), dict(samples=-1), dict(colour="red"),
    ])
    def test_rejects(self, bad):
        with pytest.raises(DomainError):
            small(**bad)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text("{")
        with pytest.raises(DomainError):
            ExperimentConfig.load(path)


class TestAscent:
    def test_holder_dual_is_unit_and_aligned(self, rng):
        g = random_matrix(rng, 4)
        for p in (1.0, 1.5, 2.0, 3.0, np.inf):
            x = holder_dual(g, p)
            assert schatten_norm(x, p) == pytest.approx(1.0)
            q = 1.0 if np.isinf(p) else (np.inf if p == 1 else p / (p - 1))
            # Holder equality: Re Tr(g^* x) = |g|_q
            assert np.real(np.trace(g.conj().T @ x)) == pytest.approx(schatten_norm(g, q))

    def test_ascent_never_decreases(self, rng):
        A = np.diag(rng.uniform(-2, 2, 4))
        op = MultipleOperatorIntegral(DividedDifference(builtin_a(2)), [A] * 3)
        xs = [random_matrix(rng, 4) for _ in range(2)]
        for target in ("weak", "s1", "s2"):
            start = ratio(op, xs, (2, 2), target)
            _, best = ascend(op, xs, (2, 2), target, 3)
            assert best >= start

    def test_zero_argument_rejected(self):
        op = MultipleOperatorIntegral(DividedDifference(builtin_a(1)), [np.eye(2)] * 2)
        with pytest.raises(DomainError):
            ratio(op, [np.zeros((2, 2))], (1.0,), "weak")


class TestExamples:
    def test_identity_map_on_positive_spectrum(self, rng):
        A = np.diag([1.0, 2.0])
        op = MultipleOperatorIntegral(DividedDifference(builtin_a(1)), [A, A])
        for _ in range(50):
            x = random_matrix(rng, 2)
            assert np.allclose(op(x), x)
            assert ratio(op, [x], (1.0,), "weak") <= 1 + 1e-12

    def test_opposite_signs_give_zero(self):
        A = np.diag([1.0, -1.0])
        op = MultipleOperatorIntegral(DividedDifference(builtin_a(1)), [A, A])
        assert ratio(op, [np.array([[0.0, 1.0], [1.0, 0.0]])], (1.0,), "weak") == 0.0

    def test_n1_estimate_on_psd_at_most_one(self):
        est = estimate_M(small(n=1, p=[1], constraint="psd"))
        assert 0 < est.value <= 1 + 1e-12

    def test_psd_samples_are_products(self):
        cfg = small(constraint="psd")
        est = estimate_M(cfg)
        for s in est.samples:
            assert psd_product_residual(s, cfg.p, 1.0) < 1e-10

    def test_s2_target_below_grid_bound(self):
        cfg = small(target="s2")
        est = estimate_M(cfg)
        for s in est.samples:
            bound = moi_s2_bound(DividedDifference(builtin_a(2)), [s.A] * 3)
            assert s.ratio <= bound + 1e-9


class TestEstimates:
    def test_deterministic(self):
        a, b = estimate_M(small()), estimate_M(small())
        assert [s.ratio for s in a.samples] == [s.ratio for s in b.samples]

    def test_value_is_max_and_nonnegative(self):
        est = estimate_M(small())
        assert est.value == max(s.ratio for s in est.samples)
        assert all(s.ratio >= 0 for s in est.samples)
        assert est.per_dim.keys() == {3, 4}

    def test_monotone_in_trials(self):
        values = [estimate_M(small(samples=k)).value for k in (1, 2, 4, 6)]
        assert values == sorted(values)

    def test_thread_count_does_not_change_results(self, monkeypatch):
        monkeypatch.setenv("MOILAB_THREADS", "1")
        serial = [s.ratio for s in estimate_M(small()).samples]
        monkeypatch.setenv("MOILAB_THREADS", "4")
        parallel = [s.ratio for s in estimate_M(small()).samples]
        assert serial == parallel

    def test_bad_thread_env(self, monkeypatch):
        monkeypatch.setenv("MOILAB_THREADS", "many")
        with pytest.raises(DomainError):
            estimate_M(small())

    def test_zero_samples(self):
        est = estimate_M(small(samples=0))
        assert est.value == 0.0 and est.witness is None and est.trials == 0


class TestEstimateL:
    def test_enumeration(self):
        est = estimate_L(small(samples=1, ascent_steps=0, restarts=1), 1)
        assert est.label in {"k=0;q=2.0;2.0", "k=1;q=1.0"}

    def test_n1_reduces_to_constrained_M(self):
        cfg = small(n=1, p=[1], samples=2)
        L = estimate_L(cfg, -1)
        assert L.label == "k=0;q=1.0"
        # on the negative orthant the integral is minus the identity map
        assert 0 < L.value <= 1 + 1e-12

    def test_bad_sign(self):
        with pytest.raises(DomainError):
            estimate_L(small(), 0)


class TestReports:
    def test_csv_schema(self):
        cfg = small()
        rows = list(csv.reader(io.StringIO(samples_csv(cfg, estimate_M(cfg)))))
        assert rows[0] == SAMPLE_HEADER
        assert len(rows) == 1 + 8
        for dim in ("3", "4"):
            assert sum(r[7] == "1" for r in rows[1:] if r[0] == dim) == 1

    def test_run_and_witnesses(self, tmp_path):
        cfg = small()
        out = tmp_path / "r.csv"
        run_experiment(cfg, out)
        first = out.read_bytes()
        run_experiment(cfg, out)
        assert out.read_bytes() == first
        data = json.loads((tmp_path / "r.csv.witness.json").read_text())
        assert len(data["witnesses"]) == 2
        for w in data["witnesses"]:
            assert abs(reevaluate_witness(w, data["config"], data["target"]) - w["ratio"]) <= 1e-9

    def test_sweep_has_both_targets(self):
        rows = list(csv.reader(io.StringIO(sweep_dimensions(small()))))
        assert rows[0] == SWEEP_HEADER
        assert {(r[0], r[3]) for r in rows[1:]} == {(d, t) for d in ("3", "4") for t in ("weak", "s1")}
        assert all(math.isfinite(float(r[5])) for r in rows[1:])

    def test_ultimate_empty(self):
        assert verify_theorem_ultimate(small(samples=0)) == ",".join(ULTIMATE_HEADER) + "\n"

    def test_ultimate_finite(self):
        rows = list(csv.reader(io.StringIO(verify_theorem_ultimate(small(function="b", samples=1, dims=[3])))))
        assert rows[0] == ULTIMATE_HEADER
        assert all(math.isfinite(float(v)) for v in rows[1][3:])

    def test_psd_residual_detects_wrong_constant(self, rng):
        A = np.diag([0.5, 1.5, 2.0])
        xs = [random_matrix(rng, 3) for _ in range(2)]
        sample = RatioSample(3, 0, 0.0, A, xs)
        assert psd_product_residual(sample, (2, 2), 1.0) < 1e-12
        assert psd_product_residual(sample, (2, 2), 2.0) > 0.1
