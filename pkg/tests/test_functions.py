import itertools
import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from moilab.errors import ConstructionError, DomainError
from moilab.functions import (
    BumpSpec,
    builtin_a,
    builtin_b,
    builtin_smoothed,
    divided_difference,
    divided_difference_recursive,
    divided_differences,
    f_chain,
    function_from_id,
    polynomial,
    psi,
    rho,
)

T = sp.Symbol("t")


def symbolic_dd(expr, nodes):
    """Divided difference of a polynomial expression via distinct symbols, then substitution.

    For polynomials the symbolic quotient cancels to a polynomial, so
    substituting repeated values gives the confluent value.
    """
    syms = sp.symbols(f"z0:{len(nodes)}")

    def rec(ss):
        if len(ss) == 1:
            return expr.subs(T, ss[0])
        return sp.cancel((rec(ss[:-1]) - rec(ss[1:])) / (ss[0] - ss[-1]))

    return float(rec(list(syms)).subs(dict(zip(syms, [sp.nsimplify(v) for v in nodes]))))


class TestBuiltins:
    def test_a_value(self):
        assert builtin_a(2).value(-2.0) == -4.0

    def test_b_third_derivative(self):
        b = builtin_b(3)
        assert all(b.deriv(3, t) == 6.0 for t in (-2.0, 0.3, 5.0))

    @pytest.mark.parametrize("t", [-2.0, -0.5, 0.5, 2.0])
    def test_a_derivative_matches_finite_difference(self, t):
        a = builtin_a(2)
        h = 1e-6
        fd = (a.value(t + h) - a.value(t - h)) / (2 * h)
        assert a.deriv(1, t) == pytest.approx(fd, rel=1e-6)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_a_derivative_formula(self, n):
        a = builtin_a(n)
        for t in (-1.7, 0.4, 2.2):
            for k in range(1, n + 1):
                expected = np.sign(t) * math.factorial(n) / math.factorial(n - k) * t ** (n - k)
                assert a.deriv(k, t) == pytest.approx(expected, rel=1e-12)
        assert all(a.deriv_at_zero(k) == 0.0 for k in range(n))
        assert not a.smooth_at_zero
        with pytest.raises(DomainError):
            a.deriv_at_zero(n)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_smoothed_agrees_outside_unit_interval(self, n):
        g, a = builtin_smoothed(n), builtin_a(n)
        ts = np.concatenate([np.linspace(-50, -1, 1001)[:-1], np.linspace(1, 50, 1001)[1:]])
        assert np.array_equal(g(ts), a(ts))

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_smoothed_derivatives_continuous_at_edges(self, n):
        g = builtin_smoothed(n)
        left, bridge, right = g.pieces
        for k in range(n + 2):
            assert abs(left.derivative(k, np.array(-1.0)) - bridge.derivative(k, np.array(-1.0))) < 1e-7
            assert abs(right.derivative(k, np.array(1.0)) - bridge.derivative(k, np.array(1.0))) < 1e-7

    def test_smoothed_finite_difference(self):
        g = builtin_smoothed(2)
        h = 1e-6
        for t in (-1.0, -0.3, 0.0, 0.7, 1.0):
            fd = (g.value(t + h) - g.value(t - h)) / (2 * h)
            assert g.deriv(1, t) == pytest.approx(fd, rel=1e-6, abs=1e-8)

    def test_bridge_degree_too_low(self):
        with pytest.raises(ConstructionError):
            builtin_smoothed(2, BumpSpec(degree=3))

    def test_bridge_width_out_of_range(self):
        with pytest.raises(ConstructionError):
            builtin_smoothed(2, BumpSpec(width=1.5))

    def test_function_ids(self):
        assert function_from_id("poly:1,0,2", 2).value(3.0) == 19.0
        with pytest.raises(DomainError):
            function_from_id("exp", 2)


class TestDividedDifference:
    def test_square_two_nodes(self):
        assert divided_difference(polynomial([0, 0, 1], 1), [1.0, 3.0]) == pytest.approx(4.0)

    def test_cube_confluent_second_order(self):
        assert divided_difference(polynomial([0, 0, 0, 1], 2), [1.0, 1.0, 1.0]) == pytest.approx(3.0)

    def test_monomial_top_difference_is_leading_coefficient(self):
        assert divided_difference(builtin_b(3), [0.5, -1.2, 2.0, 3.3]) == pytest.approx(1.0, rel=1e-12)

    def test_a_constant_on_orthants(self):
        a = builtin_a(2)
        assert divided_difference(a, [1.0, 2.0, 3.0]) == pytest.approx(1.0)
        assert divided_difference(a, [-1.0, -2.0, -3.0]) == pytest.approx(-1.0)

    def test_a_zero_tuple_convention(self):
        assert divided_difference(builtin_a(2), [0.0, 0.0, 0.0]) == 0.0

    def test_a_mixed_signs_hand_value(self):
        # a(-2) = -4, a(1) = 1, a(3) = 9: first differences 5/3 and 4
        assert divided_difference(builtin_a(2), [-2.0, 1.0, 3.0]) == pytest.approx(7 / 15)

    def test_a_straddling_zero(self):
        a = builtin_a(2)
        assert divided_difference(a, [-1.0, 0.0, 1.0]) == pytest.approx(0.0)
        assert divided_difference(a, [0.0, 0.0, 1.0]) == pytest.approx(1.0)

    def test_classical_zero_flag(self):
        b = builtin_b(3)
        assert divided_difference(b, [0.0] * 4) == 0.0
        assert divided_difference(b, [0.0] * 4, classical_zero=True) == 1.0
        with pytest.raises(DomainError):
            divided_difference(builtin_a(3), [0.0] * 4, classical_zero=True)

    def test_lower_order_zero_tuple_uses_derivative(self):
        f = polynomial([0, 0, 5, 1], 3)
        assert divided_difference(f, [0.0, 0.0, 0.0]) == pytest.approx(5.0)

    def test_too_many_nodes(self):
        with pytest.raises(DomainError):
            divided_difference(builtin_a(2), [1.0, 2.0, 3.0, 4.0])

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    def test_monomial_identity(self, n, rng):
        nodes = rng.uniform(-3, 3, size=(1000, n + 1))
        nodes[::7, 0] = 0.0
        nodes[1::5, 1] = nodes[1::5, 0]
        nodes[~nodes.any(axis=1), -1] = 1.0
        assert np.allclose(divided_differences(builtin_b(n), nodes), 1.0, rtol=1e-12, atol=0)

    @pytest.mark.parametrize("n", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("sign", [1, -1])
    def test_orthant_constancy(self, n, sign, rng):
        nodes = sign * rng.uniform(0, 3, size=(1000, n + 1))
        nodes[::4, 0] = 0.0
        vals = divided_differences(builtin_a(n), nodes)
        assert np.allclose(vals, sign, rtol=1e-12, atol=0)

    def test_symbolic_oracle_polynomials(self, rng):
        cases = [
            (polynomial([1, -2, 0, 3, 1], 4), 1 - 2 * T + 3 * T**3 + T**4),
            (builtin_b(4), T**4),
        ]
        for f, expr in cases:
            for _ in range(20):
                k = int(rng.integers(1, 5))
                pool = [0.0, 1.0, -0.5, 2.0, -1.5]
                nodes = [pool[int(i)] for i in rng.integers(len(pool), size=k + 1)]
                if k == f.order_n and not any(nodes):
                    continue
                assert divided_difference(f, nodes) == pytest.approx(symbolic_dd(expr, nodes), rel=1e-12, abs=1e-12)

    def test_symbolic_oracle_on_orthant(self):
        # on the positive half-line a is t^3, so lower-order differences are polynomial too
        a = builtin_a(3)
        for nodes in ([0.5, 2.0], [1.0, 1.0, 3.0], [2.0, 2.0], [0.25, 1.0, 1.0]):
            assert divided_difference(a, nodes) == pytest.approx(symbolic_dd(T**3, nodes), rel=1e-12)

    def test_agrees_with_exact_recursion(self, rng):
        for fid in ("a", "b", "smoothed"):
            for n in (1, 2, 3, 4):
                f = function_from_id(fid, n)
                for _ in range(25):
                    pool = rng.uniform(-2, 2, size=3).tolist() + [0.0]
                    nodes = [pool[int(i)] for i in rng.integers(len(pool), size=n + 1)]
                    exact = divided_difference_recursive(f, nodes)
                    assert divided_difference(f, nodes) == pytest.approx(exact, rel=1e-10, abs=1e-10)

    @settings(max_examples=200, deadline=None)
    @given(
        st.sampled_from(["a", "b", "smoothed"]),
        st.integers(1, 4),
        st.lists(st.sampled_from([0.0, 0.5, -0.5, 1.0, -1.3, 2.0, 0.9999, -2.5]), min_size=5, max_size=5),
        st.randoms(use_true_random=False),
    )
    def test_permutation_symmetry(self, fid, n, pool, rnd):
        f = function_from_id(fid, n)
        nodes = pool[: n + 1]
        base = divided_difference(f, nodes)
        for _ in range(5):
            perm = list(nodes)
            rnd.shuffle(perm)
            assert divided_difference(f, perm) == pytest.approx(base, rel=1e-9, abs=1e-9)


class TestChain:
    def test_a2_first_step_is_abs(self):
        g = f_chain(builtin_a(2), 1)
        ts = np.linspace(-3, 3, 61)
        assert np.allclose(g(ts), np.abs(ts))
        assert g.order_n == 1

    def test_b3_first_step(self):
        g = f_chain(builtin_b(3), 1)
        ts = np.linspace(-3, 3, 61)
        assert np.allclose(g(ts), ts**2)

    @pytest.mark.parametrize("n,l", [(3, 2), (3, 1), (4, 2), (4, 3), (2, 0)])
    def test_a_chain_closed_form(self, n, l):
        g = f_chain(builtin_a(n), l)
        ts = np.linspace(-3, 3, 61)
        assert np.allclose(g(ts), np.abs(ts) * ts ** (n - 1 - l))

    def test_smoothed_chain_matches_quotient(self):
        f = builtin_smoothed(3)
        g = f_chain(f, 1)
        ts = np.array([-2.0, -0.7, 0.3, 0.9, 1.5])
        assert np.allclose(g(ts), (f(ts) - f.value(0.0)) / ts)
        assert g.value(0.0) == pytest.approx(f.deriv(1, 0.0))

    def test_chain_index_out_of_range(self):
        with pytest.raises(DomainError):
            f_chain(builtin_a(2), 2)


class TestBivariate:
    def test_rho_values(self):
        assert rho().eval(1.0, 1.0) == 0.5
        assert rho().eval(1.0, -3.0) == 0.25
        assert rho().eval(0.0, 0.0) == 0.0
        assert psi().eval(0.0, 0.0) == 0.0

    def test_complementary(self, rng):
        s = rng.uniform(-5, 5, size=(200, 2))
        total = rho()(s[:, 0], s[:, 1]) + psi()(s[:, 0], s[:, 1])
        assert np.allclose(total, 1.0, rtol=0, atol=1e-15)

    def test_bounded(self, rng):
        s = rng.uniform(-5, 5, size=(200, 2))
        assert np.all(np.abs(rho()(s[:, 0], s[:, 1])) <= 1)
