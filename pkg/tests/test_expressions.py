"""Expression-language tests: parsing, evaluation, and error reporting."""

import math

import pytest

from geodyn.errors import ExpressionError
from geodyn.expressions import parse_expression


class TestEvaluation:
    @pytest.mark.parametrize("text,env,expected", [
        ("1 + 2 * 3", {}, 7.0),
        ("(1 + 2) * 3", {}, 9.0),
        ("2 ^ 3 ^ 2", {}, 512.0),          # right associative
        ("-2 ^ 2", {}, -4.0),              # unary binds looser than power
        ("10 / 4", {}, 2.5),
        ("1 - 2 - 3", {}, -4.0),           # left associative
        ("sqrt(x1 ^ 2 + x2 ^ 2)", {"x1": 3.0, "x2": 4.0}, 5.0),
        ("abs(-7.5)", {}, 7.5),
        ("1.5e2 + 1e-2", {}, 150.01),
        ("+x1", {"x1": 2.0}, 2.0),
        ("-x1 / (x1 ^ 2 + x2 ^ 2) ^ 1.5", {"x1": 1.0, "x2": 0.0}, -1.0),
    ])
    def test_values(self, text, env, expected):
        assert parse_expression(text)(env) == pytest.approx(expected, abs=1e-12)

    def test_variables_are_collected(self):
        expr = parse_expression("v1 * x2 - sqrt(t)")
        assert expr.variables() == {"v1", "x2", "t"}

    def test_unknown_variable_at_evaluation(self):
        expr = parse_expression("x1 + y")
        with pytest.raises(ExpressionError, match="unknown variable"):
            expr({"x1": 1.0})

    def test_pi_free_functions_only(self):
        assert parse_expression("sqrt(2)")({}) == pytest.approx(math.sqrt(2))


class TestErrors:
    def test_unexpected_character_position(self):
        with pytest.raises(ExpressionError) as info:
            parse_expression("1 + $", line=3)
        assert info.value.line == 3
        assert info.value.column == 5

    def test_unbalanced_parenthesis(self):
        with pytest.raises(ExpressionError):
            parse_expression("(1 + 2")

    def test_trailing_input(self):
        with pytest.raises(ExpressionError, match="trailing"):
            parse_expression("1 2")

    def test_unknown_function(self):
        with pytest.raises(ExpressionError, match="unknown function"):
            parse_expression("sin(1)")

    def test_bad_number(self):
        with pytest.raises(ExpressionError):
            parse_expression("1.2.3")

    def test_empty_expression(self):
        with pytest.raises(ExpressionError):
            parse_expression("")
