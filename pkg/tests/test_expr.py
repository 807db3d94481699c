import numpy as np
import pytest

from qecheck.errors import (
    EvalDomainError,
    ExprSyntaxError,
    JetOrderError,
    UnknownSymbolError,
)
from qecheck.expr import eval_ja, eval_jet, parse_scalar
from qecheck.jets import JA, inverse_matrix, jeinsum


class TestParse:
    def test_grammar_case(self):
        e = parse_scalar("x^2 + sin(y)", ["x", "y"])
        assert e.coords == ("x", "y")
        j = eval_jet(e, (0.3, 0.7), 2)
        assert j.value == pytest.approx(0.09 + np.sin(0.7), abs=1e-14)

    def test_direct_arithmetic(self):
        e = parse_scalar("1/y^2", ["x", "y"])
        assert eval_jet(e, (0.0, 2.0), 0).value == pytest.approx(0.25)

    def test_unknown_symbol_named(self):
        with pytest.raises(UnknownSymbolError) as err:
            parse_scalar("z", ["x", "y"])
        assert "z" in str(err.value)

    def test_unknown_function(self):
        with pytest.raises(UnknownSymbolError):
            parse_scalar("sinc(x)", ["x"])

    def test_syntax_error_position(self):
        with pytest.raises(ExprSyntaxError) as err:
            parse_scalar("x + * y", ["x", "y"])
        assert err.value.pos == 4

    def test_empty(self):
        with pytest.raises(ExprSyntaxError):
            parse_scalar("   ", ["x"])

    def test_unbalanced(self):
        with pytest.raises(ExprSyntaxError):
            parse_scalar("(x + y", ["x", "y"])

    def test_no_implicit_multiplication(self):
        with pytest.raises(ExprSyntaxError):
            parse_scalar("2 x", ["x"])

    def test_precedence_and_unary(self):
        e = parse_scalar("-x^2 + 2*3", ["x"])
        assert eval_jet(e, (2.0,), 0).value == pytest.approx(2.0)
        e = parse_scalar("2^-2", ["x"])
        assert eval_jet(e, (0.0,), 0).value == pytest.approx(0.25)
        e = parse_scalar("2^3^2", ["x"])  # right associative
        assert eval_jet(e, (0.0,), 0).value == pytest.approx(512.0)

    def test_tree_immutable(self):
        e = parse_scalar("x + 1", ["x"])
        with pytest.raises(Exception):
            e.ast.left = None


class TestEvalJet:
    def test_polynomial(self):
        j = eval_jet(parse_scalar("x^2", ["x"]), (3.0,), 2)
        assert j.value == 9.0
        assert j.partial((1,)) == pytest.approx(6.0)
        assert j.partial((2,)) == pytest.approx(2.0)

    def test_sine_taylor(self):
        j = eval_jet(parse_scalar("sin(x)", ["x"]), (0.0,), 3)
        vals = [j.value, j.partial((1,)), j.partial((2,)), j.partial((3,))]
        assert vals == pytest.approx([0.0, 1.0, 0.0, -1.0], abs=1e-15)

    def test_mixed_partial_symmetry(self):
        j = eval_jet(parse_scalar("x*y", ["x", "y"]), (1.0, 2.0), 2)
        assert j.partial((1, 1)) == pytest.approx(1.0)

    def test_order_bounds(self):
        j = eval_jet(parse_scalar("x", ["x"]), (1.0,), 1)
        with pytest.raises(JetOrderError):
            j.partial((2,))
        with pytest.raises(JetOrderError):
            eval_jet(parse_scalar("x", ["x"]), (1.0,), 5)

    @pytest.mark.parametrize("src,bad", [
        ("log(x)", (-1.0,)),
        ("sqrt(x)", (-2.0,)),
        ("1/x", (0.0,)),
        ("x^0.5", (-1.0,)),
    ])
    def test_domain_errors_carry_point(self, src, bad):
        with pytest.raises(EvalDomainError) as err:
            eval_jet(parse_scalar(src, ["x"]), bad, 2)
        assert err.value.point is not None

    def test_general_exponent(self):
        j = eval_jet(parse_scalar("x^y", ["x", "y"]), (2.0, 3.0), 1)
        assert j.value == pytest.approx(8.0)
        assert j.partial((1, 0)) == pytest.approx(12.0)
        assert j.partial((0, 1)) == pytest.approx(8.0 * np.log(2.0))


def _random_tree_text(rng, coords, depth=3):
    if depth == 0 or rng.uniform() < 0.3:
        if rng.uniform() < 0.5:
            return rng.choice(coords)
        return f"{rng.uniform(0.2, 2.0):.4f}"
    op = rng.choice(["+", "-", "*"])
    left = _random_tree_text(rng, coords, depth - 1)
    right = _random_tree_text(rng, coords, depth - 1)
    if rng.uniform() < 0.3:
        fn = rng.choice(["sin", "cos", "exp", "tanh"])
        return f"{fn}(({left}) {op} ({right}))"
    return f"({left}) {op} ({right})"


class TestProperties:
    def test_partials_match_finite_differences(self):
        # first partials of random polynomial/trig trees vs central FD
        rng = np.random.default_rng(7)
        coords = ["x", "y"]
        h = 1e-4
        for trial in range(20):
            text = _random_tree_text(rng, coords)
            e = parse_scalar(text, coords)
            pt = rng.uniform(-0.5, 0.5, size=2)
            j = eval_jet(e, pt, 2)
            for d in range(2):
                step = np.eye(2)[d] * h
                fd = (
                    eval_jet(e, pt + step, 0).value
                    - eval_jet(e, pt - step, 0).value
                ) / (2 * h)
                exact = j.partial(tuple(int(d == k) for k in range(2)))
                assert abs(exact - fd) <= 1e-6 * (1 + abs(exact))

    def test_jet_ring_properties(self):
        rng = np.random.default_rng(11)
        coords = ["x", "y", "z"]
        pt = (0.2, -0.4, 0.7)
        jets = [
            eval_ja(parse_scalar(_random_tree_text(rng, coords), coords), pt, 4)
            for _ in range(3)
        ]
        a, b, c = jets
        assert np.allclose((a + b).c, (b + a).c, atol=1e-13)
        assert np.allclose((a * b).c, (b * a).c, atol=1e-13)
        assert np.allclose(((a * b) * c).c, (a * (b * c)).c, atol=1e-11)
        assert np.allclose((a * (b + c)).c, (a * b + a * c).c, atol=1e-11)

    def test_jet_matrix_inverse(self):
        coords = ["x", "y"]
        pt = (0.3, 0.5)
        texts = [["1+x^2", "x*y/4"], ["x*y/4", "2+sin(y)"]]
        g = JA(
            np.stack([
                np.stack([eval_ja(parse_scalar(s, coords), pt, 4).c for s in row])
                for row in texts
            ]),
            2, 4,
        )
        prod = jeinsum("ij,jk->ik", g, inverse_matrix(g))
        eye = np.zeros_like(prod.c)
        eye[0, 0, 0] = eye[1, 1, 0] = 1.0
        assert np.abs(prod.c - eye).max() < 1e-13
