"""Tests for function descriptors and the expression language."""

import numpy as np
import pytest

from psh_extension_lab.functions import (
    Constant,
    Expression,
    ExpressionError,
    LinearCombination,
    norm_squared_about,
)


class TestExpression:
    def test_polynomial(self):
        f = Expression("x1**2 + 2*y1")
        assert f(np.array([[1.0, 2.0]]))[0] == pytest.approx(5.0)

    def test_r2_is_full_norm(self):
        f = Expression("r2")
        assert f(np.array([[1.0, 2.0, 3.0, 4.0]]))[0] == pytest.approx(30.0)

    def test_min_n_from_highest_variable(self):
        assert Expression("x2 + y1").min_n == 2
        assert Expression("r2").min_n == 1
        assert Expression("3").min_n == 1

    def test_nary_min_max(self):
        points = np.array([[-1.0, -2.0], [3.0, 1.0]])
        assert list(Expression("max(x1, y1, 0)")(points)) == [0.0, 3.0]
        assert list(Expression("min(x1, y1, 0)")(points)) == [-2.0, 0.0]

    def test_constant_expression_broadcasts(self):
        out = Expression("2")(np.zeros((3, 2)))
        assert out.shape == (3,)
        assert np.all(out == 2.0)

    def test_vectorised_shape(self):
        out = Expression("x1 * y1")(np.ones((4, 5, 2)))
        assert out.shape == (4, 5)

    @pytest.mark.parametrize(
        "text, message",
        [
            ("__import__('os')", "unknown function"),
            ("x1.real", "not part of the expression language"),
            ("x0", "unknown name"),
            ("z1", "unknown name"),
            ("1 +", "syntax error"),
            ("True", "unsupported literal"),
            ("abs(x1, y1)", "exactly one argument"),
            ("min(x1)", "at least two arguments"),
            ("x1 % 2", "not allowed"),
        ],
    )
    def test_rejects_outside_language(self, text, message):
        with pytest.raises(ExpressionError, match=message):
            Expression(text)

    def test_error_is_value_error(self):
        with pytest.raises(ValueError):
            Expression("lambda: 0")

    def test_error_carries_expression(self):
        with pytest.raises(ExpressionError) as info:
            Expression("foo(x1)")
        assert info.value.expression == "foo(x1)"
        assert "foo" in info.value.detail

    def test_too_few_coordinates(self):
        with pytest.raises(ExpressionError, match="needs n >= 2"):
            Expression("x2")(np.zeros((1, 2)))


class TestCombinations:
    def test_scale_and_shift(self):
        f = Expression("x1") * 2 + 1
        assert isinstance(f, LinearCombination)
        assert f(np.array([[3.0, 0.0]]))[0] == pytest.approx(7.0)

    def test_reverse_subtraction(self):
        f = 3 - Expression("x1")
        assert f(np.array([[1.0, 0.0]]))[0] == pytest.approx(2.0)

    def test_negation(self):
        f = -Expression("r2")
        assert f(np.array([[1.0, 1.0]]))[0] == pytest.approx(-2.0)

    def test_difference_of_descriptors(self):
        f = Expression("r2") - Expression("x1**2")
        assert f(np.array([[2.0, 3.0]]))[0] == pytest.approx(9.0)

    def test_min_n_of_combination(self):
        assert (Expression("x1") + Expression("y2")).min_n == 2

    def test_describe_mentions_terms(self):
        text = (Expression("x1") * 2 + 1).describe()
        assert "x1" in text

    def test_constant(self):
        out = Constant(1.5)(np.zeros((2, 4)))
        assert list(out) == [1.5, 1.5]


class TestTranslate:
    def test_translate_moves_origin(self):
        f = Expression("x1**2 + 3*y1")
        g = f.translate([1.0, -2.0])
        assert g(np.array([[1.0, -2.0]]))[0] == pytest.approx(f(np.array([[0.0, 0.0]]))[0])

    def test_norm_squared_about(self):
        f = norm_squared_about([1.0, 2.0])
        assert f(np.array([[1.0, 2.0]]))[0] == pytest.approx(0.0)
        assert f(np.array([[0.0, 0.0]]))[0] == pytest.approx(5.0)

    def test_norm_squared_about_origin_is_plain(self):
        assert norm_squared_about([0.0, 0.0]).describe() == "r2"
