import numpy as np
import pytest

from moilab.errors import DomainError, PreconditionError
from moilab.functions import builtin_a, builtin_b, builtin_smoothed
from moilab.reduction import (
    ExponentTuple,
    block_sum,
    check_block_decomposition,
    check_crucial,
    check_postcrucial,
    check_precrucial,
    consummations,
    double_oi_psi,
    double_oi_rho,
    reduce_block,
    sign_blocks,
    sign_change,
)

from conftest import random_hermitian, random_matrix


def mixed_operator(rng, d):
    u, _ = np.linalg.qr(random_matrix(rng, d))
    w = rng.uniform(0.2, 2.0, d) * np.where(np.arange(d) % 2, -1.0, 1.0)
    return u @ np.diag(w) @ u.conj().T


class TestScalarIdentities:
    def test_precrucial_examples(self):
        assert check_precrucial(builtin_b(2), [1.0, 2.0]) < 1e-10
        assert check_precrucial(builtin_a(2), [1.0, 1.0]) < 1e-10
        assert check_precrucial(builtin_a(3), [0.0, 0.0, 0.0]) == 0.0

    def test_crucial_examples(self, rng):
        assert check_crucial(builtin_a(2), [3.0, -1.0, 2.0], 0, 1) < 1e-10
        assert check_crucial(builtin_smoothed(2), [0.5, 2.0, -3.0], 0, 2) < 1e-9
        t = rng.uniform(0.5, 2.0, 4) * np.array([1, -1, 1, -1])
        for i in range(4):
            for j in range(4):
                if i != j:
                    assert check_crucial(builtin_b(3), t, i, j) < 1e-9

    def test_crucial_preconditions(self):
        with pytest.raises(DomainError):
            check_crucial(builtin_a(2), [1.0, 1.0, 2.0], 0, 1)
        with pytest.raises(DomainError):
            check_crucial(builtin_a(2), [0.0, 1.0, 2.0], 0, 1)

    def test_postcrucial_examples(self):
        assert check_postcrucial(builtin_a(3), 0, [1.0, 2.0, -1.0, 0.5]) == 0.0
        assert check_postcrucial(builtin_a(3), 1, [1.0, -2.0, 0.5]) < 1e-9
        assert check_postcrucial(builtin_a(3), 2, [-1.0, -4.0]) < 1e-9

    def test_postcrucial_out_of_range(self):
        with pytest.raises(DomainError):
            check_postcrucial(builtin_a(2), 2, [1.0])


class TestSignBlocks:
    def test_positive_operator_has_one_block(self, rng):
        A = np.diag([1.0, 2.0, 3.0])
        xs = [random_matrix(rng, 3) for _ in range(2)]
        blocks = sign_blocks(A, xs)
        assert len(blocks) == 8
        for mask, block in blocks.items():
            # a block contributes only if no argument is compressed to zero
            alive = all(np.any(x) for x in block)
            assert alive == (mask == 0b111)

    def test_per_argument_reconstruction(self, rng):
        A = mixed_operator(rng, 5)
        xs = [random_matrix(rng, 5) for _ in range(3)]
        blocks = sign_blocks(A, xs)
        for k in range(3):
            # the four sign patterns of (t_k, t_{k+1}) each appear 4 times among 16 masks
            total = sum(b[k] for b in blocks.values()) / 4
            assert np.linalg.norm(total - xs[k]) < 1e-12 * np.linalg.norm(xs[k])

    def test_zero_eigenvalue_rejected(self):
        with pytest.raises(PreconditionError):
            sign_blocks(np.diag([0.0, 1.0]), [np.eye(2)])

    @pytest.mark.parametrize("n", [2, 3])
    @pytest.mark.parametrize("routed", [True, False])
    def test_decomposition(self, rng, n, routed):
        for f in (builtin_a(n), builtin_b(n), builtin_smoothed(n)):
            A = mixed_operator(rng, 6)
            assert check_block_decomposition(f, A, [random_matrix(rng, 6) for _ in range(n)], routed) < 1e-10

    def test_sign_change(self):
        assert sign_change(0b011, 2) == 1
        assert sign_change(0b110, 2) == 0
        assert sign_change(0b111, 2) is None


class TestReduceBlock:
    def setup_method(self):
        self.rng = np.random.default_rng(5)
        self.A = np.diag([1.0, -1.0, 0.5, -2.0])

    def _block(self, n, mask):
        xs = [random_matrix(self.rng, 4) for _ in range(n)]
        return sign_blocks(self.A, xs)[mask]

    def test_first_position(self):
        red = reduce_block(builtin_a(2), self.A, self._block(2, 0b001), 0b001)
        assert red.k == 0 and red.residual < 1e-10

    def test_last_position(self):
        red = reduce_block(builtin_a(2), self.A, self._block(2, 0b011), 0b011)
        assert red.k == 1 and red.residual < 1e-10

    def test_interior_position(self):
        red = reduce_block(builtin_smoothed(3), self.A, self._block(3, 0b0011), 0b0011)
        assert red.k == 1 and red.residual < 1e-10

    def test_mirrored_orientation(self):
        red = reduce_block(builtin_b(3), self.A, self._block(3, 0b1100), 0b1100)
        assert red.k == 1 and red.residual < 1e-10

    def test_explicit_position(self):
        block = self._block(3, 0b0101)
        for k in range(3):
            assert reduce_block(builtin_a(3), self.A, block, 0b0101, k).residual < 1e-10

    def test_no_sign_change(self):
        with pytest.raises(PreconditionError):
            reduce_block(builtin_a(2), self.A, self._block(2, 0b111), 0b111)
        with pytest.raises(PreconditionError):
            reduce_block(builtin_a(2), self.A, self._block(2, 0b011), 0b011, k=0)

    def test_routed_sum_uses_every_branch(self):
        xs = [random_matrix(self.rng, 4) for _ in range(2)]
        direct = block_sum(builtin_a(2), self.A, xs, routed=False)
        assert np.allclose(block_sum(builtin_a(2), self.A, xs), direct, atol=1e-12)


class TestDoubleIntegrals:
    def test_equal_eigenvalues(self, rng):
        x = random_matrix(rng, 2)
        assert np.allclose(double_oi_rho(np.eye(2), x), x / 2)

    def test_schur_entry(self):
        out = double_oi_rho(np.diag([1.0, 3.0]), np.array([[0.0, 1.0], [0.0, 0.0]]))
        assert out[0, 1] == pytest.approx(0.25)

    def test_positive_schur_form(self, rng):
        lam = rng.uniform(0.1, 3.0, 4)
        x = random_matrix(rng, 4)
        expected = lam[:, None] / (lam[:, None] + lam[None, :]) * x
        assert np.allclose(double_oi_rho(np.diag(lam), x), expected)

    def test_complementary(self, rng):
        for _ in range(50):
            A = mixed_operator(rng, 5)
            x = random_matrix(rng, 5)
            assert np.linalg.norm(double_oi_rho(A, x) + double_oi_psi(A, x) - x) < 1e-12 * max(1, np.linalg.norm(x))


class TestConsummations:
    def test_pair(self):
        assert [c.p for c in consummations(ExponentTuple((2, 2)))] == [(2.0, 2.0), (1.0,)]

    def test_triple(self):
        assert [c.p for c in consummations(ExponentTuple((3, 3, 3)))] == [
            (3.0, 3.0, 3.0), (1.5, 3.0), (3.0, 1.5), (1.0,)]

    def test_singleton(self):
        assert [c.p for c in consummations(ExponentTuple((1,)))] == [(1.0,)]

    def test_counts_and_sums(self, rng):
        for n in range(1, 7):
            w = rng.dirichlet(np.ones(n))
            p = ExponentTuple(tuple(1 / v for v in w))
            outs = consummations(p)
            assert len(outs) == 2 ** (n - 1)
            for q in outs:
                assert abs(sum(1 / v for v in q.p) - 1) < 1e-12

    def test_invalid_tuple(self):
        with pytest.raises(DomainError):
            ExponentTuple((2.0, 3.0))
        with pytest.raises(DomainError):
            ExponentTuple((0.5, -1.0))

    def test_parse(self):
        assert ExponentTuple.parse("4,4/3".replace("4/3", repr(4 / 3))).p == (4.0, 4 / 3)
