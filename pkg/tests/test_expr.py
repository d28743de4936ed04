import math

import numpy as np
import pytest

from daekit import expr
from daekit.errors import ExprDomainError, ExprSyntaxError, UndeclaredVariableError
from helpers import usable_tree_and_point


def count_vars(e):
    if isinstance(e, expr.Var):
        return 1
    if isinstance(e, expr.Unary):
        return count_vars(e.a)
    if isinstance(e, expr.Binary):
        return count_vars(e.a) + count_vars(e.b)
    if isinstance(e, expr.Power):
        return count_vars(e.a)
    return 0


class TestParse:
    def test_constraint_formula(self):
        tree = expr.parse("y1^3 + y1 - x1^2", ["x1", "y1"])
        assert count_vars(tree) == 3
        assert expr.variables(tree) == {"x1", "y1"}

    def test_syntax_error_position(self):
        with pytest.raises(ExprSyntaxError) as err:
            expr.parse("x1 +", ["x1"])
        assert err.value.position == 4

    def test_undeclared_variable(self):
        with pytest.raises(UndeclaredVariableError) as err:
            expr.parse("z1", ["x1"])
        assert err.value.name == "z1"

    def test_precedence(self):
        env = {"x1": 2.0}
        assert expr.evaluate(expr.parse("-x1^2", ["x1"]), env) == -4.0
        assert expr.evaluate(expr.parse("2 + 3*4", []), {}) == 14.0
        assert expr.evaluate(expr.parse("2*3^2", []), {}) == 18.0
        assert expr.evaluate(expr.parse("x1^-2", ["x1"]), env) == 0.25

    def test_exponent_must_be_integer(self):
        with pytest.raises(ExprSyntaxError):
            expr.parse("x1^1.5", ["x1"])
        with pytest.raises(ExprSyntaxError):
            expr.parse("x1^y1", ["x1", "y1"])

    def test_function_call(self):
        tree = expr.parse("sin(x1)*cos(x1)", ["x1"])
        assert expr.evaluate(tree, {"x1": 0.3}) == pytest.approx(
            math.sin(0.3) * math.cos(0.3), rel=1e-15
        )


class TestEvaluate:
    def test_polynomial(self):
        tree = expr.parse("y1^3 + y1 - x1^2", ["x1", "y1"])
        assert expr.evaluate(tree, {"x1": 2.0, "y1": 1.0}) == -2.0

    def test_sin_at_zero(self):
        assert expr.evaluate(expr.parse("sin(t)", ["t"]), {"t": 0.0}) == 0.0

    def test_division_by_zero(self):
        tree = expr.parse("x1/y1", ["x1", "y1"])
        with pytest.raises(ExprDomainError) as err:
            expr.evaluate(tree, {"x1": 1.0, "y1": 0.0})
        assert "x1 / y1" in str(err.value)

    def test_log_domain(self):
        tree = expr.parse("ln(x1)", ["x1"])
        with pytest.raises(ExprDomainError):
            expr.evaluate(tree, {"x1": -1.0})
        with pytest.raises(ExprDomainError):
            expr.evaluate(expr.parse("sqrt(x1)", ["x1"]), {"x1": -4.0})


class TestDual:
    def test_cubic_at_origin(self):
        tree = expr.parse("y1^3 + y1", ["y1"])
        d = expr.evaluate_dual(tree, {"y1": 0.0}, {"y1": 1.0})
        assert d.value == 0.0
        assert d.derivative == 1.0

    def test_square(self):
        tree = expr.parse("x1^2", ["x1"])
        d = expr.evaluate_dual(tree, {"x1": 3.0}, {"x1": 1.0})
        assert (d.value, d.derivative) == (9.0, 6.0)

    def test_zero_seed(self):
        tree = expr.parse("sin(x1)*exp(y1) - x1/y1", ["x1", "y1"])
        d = expr.evaluate_dual(tree, {"x1": 0.7, "y1": 1.3}, {})
        assert d.derivative == 0.0

    def test_dual_arithmetic_matches_real(self):
        a = expr.DualValue(2.0, 0.0)
        b = expr.DualValue(-3.5, 0.0)
        for got, want in [
            (a + b, 2.0 - 3.5),
            (a - b, 2.0 + 3.5),
            (a * b, -7.0),
            (a / b, 2.0 / -3.5),
            (a.powi(3), 8.0),
        ]:
            assert got.value == want
            assert got.derivative == 0.0


class TestSymbolicDiff:
    def test_constraint_partials(self):
        tree = expr.parse("y1^3 + y1 - x1^2", ["x1", "y1"])
        dq = expr.symbolic_diff(tree, "y1")
        assert expr.evaluate(dq, {"x1": 0.0, "y1": 0.0}) == 1.0
        dp = expr.symbolic_diff(tree, "x1")
        assert expr.evaluate(dp, {"x1": 1.0, "y1": 0.0}) == -2.0

    def test_time_independent(self):
        tree = expr.parse("x1", ["x1"])
        dt = expr.symbolic_diff(tree, "t")
        assert expr.evaluate(dt, {"x1": 5.0}) == 0.0


class TestProperties:
    def test_dual_matches_central_differences(self):
        rng = np.random.default_rng(101)
        names = ["t", "x1", "y1"]
        h = 1e-6
        for _ in range(1000):
            tree, env, seed = usable_tree_and_point(rng, names, need_dual=True)
            d = expr.evaluate_dual(tree, env, seed).derivative
            try:
                plus = expr.evaluate(
                    tree, {k: v + h * seed.get(k, 0.0) for k, v in env.items()}
                )
                minus = expr.evaluate(
                    tree, {k: v - h * seed.get(k, 0.0) for k, v in env.items()}
                )
            except ExprDomainError:
                continue
            fd = (plus - minus) / (2 * h)
            if not np.isfinite(fd) or abs(fd) > 1e5:
                continue
            assert abs(d - fd) <= 1e-6 * (1.0 + abs(d))

    def test_symbolic_matches_dual(self):
        rng = np.random.default_rng(202)
        names = ["x1", "y1"]
        checked = 0
        while checked < 1000:
            tree, env = usable_tree_and_point(rng, names)
            var = str(rng.choice(names))
            try:
                sym = expr.evaluate(expr.symbolic_diff(tree, var), env)
                dual = expr.evaluate_dual(tree, env, {var: 1.0}).derivative
            except ExprDomainError:
                continue
            if not (np.isfinite(sym) and np.isfinite(dual)) or abs(dual) > 1e8:
                continue
            assert abs(sym - dual) <= 1e-10 * (1.0 + abs(dual))
            checked += 1

    def test_print_parse_roundtrip(self):
        rng = np.random.default_rng(303)
        names = ["x1", "y1", "t"]
        for _ in range(100):
            tree, env = usable_tree_and_point(rng, names)
            back = expr.parse(expr.to_string(tree), names)
            v1 = expr.evaluate(tree, env)
            v2 = expr.evaluate(back, env)
            assert abs(v1 - v2) <= 1e-12 * (1.0 + abs(v1))

    def test_batch_matches_scalar(self):
        rng = np.random.default_rng(404)
        names = ["x1", "y1"]
        for _ in range(50):
            tree, _ = usable_tree_and_point(rng, names)
            pts = {nm: rng.uniform(0.1, 2.0, size=40) for nm in names}
            batch = np.broadcast_to(expr.evaluate_batch(tree, pts), (40,))
            bval, bder = expr.evaluate_dual_batch(tree, pts, {"x1": 1.0})
            bval = np.broadcast_to(bval, (40,))
            bder = np.broadcast_to(bder, (40,))
            for i in range(0, 40, 7):
                env = {nm: float(pts[nm][i]) for nm in names}
                try:
                    v = expr.evaluate(tree, env)
                    d = expr.evaluate_dual(tree, env, {"x1": 1.0})
                except ExprDomainError:
                    continue
                assert batch[i] == pytest.approx(v, rel=1e-12, abs=1e-12)
                assert bval[i] == pytest.approx(v, rel=1e-12, abs=1e-12)
                if np.isfinite(bder[i]) and abs(d.derivative) < 1e8:
                    assert bder[i] == pytest.approx(
                        d.derivative, rel=1e-10, abs=1e-10
                    )

    def test_substitute(self):
        tree = expr.parse("x1^2 + y1", ["x1", "y1"])
        fixed = expr.substitute(tree, {"y1": 0.0})
        assert expr.variables(fixed) == {"x1"}
        assert expr.evaluate(fixed, {"x1": 3.0}) == 9.0
