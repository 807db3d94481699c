import numpy as np
import pytest

from qecheck.errors import EvalDomainError, ExcludedDimensionError, InputError
from qecheck.expr import eval_ja, parse_scalar
from qecheck.riemann import kulkarni_nomizu, ricci_scalar_schouten, tensor_norm
from qecheck.smms import (
    SmmsSpec,
    bakry_emery,
    conformal_change,
    dual_smms,
    evaluate,
    qe_residual,
    verify_identities,
    weighted_bach,
    weighted_curvature,
)

from _corpus import (
    corpus_points,
    diag_metric,
    flat_affine,
    random_smms,
    sphere_smms,
)


class TestBakryEmery:
    def test_flat_affine(self):
        # flat chart, v = 1 + x: Hess v = 0, Lap v = 0, |grad v|^2 = 1
        for n, m in [(3, 2.5), (4, 7.0)]:
            spec = flat_affine(n, m)
            pt = np.full(n, 0.2)
            sj = evaluate(spec, pt)
            ric_be, r_w = bakry_emery(sj)
            assert np.abs(ric_be.value).max() < 1e-14
            assert r_w.value == pytest.approx(-m * (m - 1) / 1.2**2)

    def test_m_zero_reduction(self):
        spec = random_smms(3, 0.0, 0.0, 2)
        sj = evaluate(spec, [0.1, 0.2, -0.1])
        ric_be, r_w = bakry_emery(sj)
        assert np.abs(ric_be.value - sj.ric.value).max() == 0.0
        assert r_w.value == sj.r.value

    def test_gaussian_weight(self):
        # flat chart, m = inf, phi = |x|^2 / 2: Ric_phi = g
        coords = ("x", "y", "z")
        spec = SmmsSpec(
            n=3, coords=coords, g_exprs=diag_metric(["1", "1", "1"], coords),
            m=float("inf"), mu=1.0,
            phi_expr=parse_scalar("(x^2+y^2+z^2)/2", coords),
        )
        sj = evaluate(spec, [0.3, -0.5, 0.2])
        ric_be, _ = bakry_emery(sj)
        assert np.abs(ric_be.value - np.eye(3)).max() < 1e-13

    def test_nonpositive_density_rejected(self):
        spec = flat_affine(3, 2.0)
        with pytest.raises(EvalDomainError):
            evaluate(spec, [-1.5, 0.0, 0.0])


class TestWeightedCurvature:
    def test_m_zero_matches_unweighted(self):
        spec = random_smms(3, 0.0, 0.7, 6)
        sj = evaluate(spec, [0.1, -0.1, 0.2])
        pack = weighted_curvature(sj, 0.7)
        _, _, p, j = ricci_scalar_schouten(
            __import__("qecheck.riemann", fromlist=["riemann_tensor"])
            .riemann_tensor(sj.mj)[0], sj.mj,
        )
        assert np.abs(pack.p_w.value - p.components).max() < 1e-12
        a0 = sj.rm.value - kulkarni_nomizu(p.components, sj.mj.g_val)
        assert np.abs(pack.a_w.value - a0).max() < 1e-12

    def test_flat_affine_pack_vanishes(self):
        spec = flat_affine(3, 2.5)
        sj = evaluate(spec, [0.2, 0.1, -0.2])
        pack = weighted_curvature(sj, spec.mu)
        for arr in (pack.p_w.value, pack.a_w.value, pack.dp_w.value, pack.b_w):
            assert np.abs(arr).max() < 1e-14
        assert abs(pack.j_w.value) < 1e-14
        assert abs(pack.ytilde.value) < 1e-14

    def test_round_s4_conformally_flat(self):
        spec = sphere_smms(4)
        pt = (1.2, 0.9, 1.1, 0.6)
        sj = evaluate(spec, pt)
        pack = weighted_curvature(sj, 0.0)
        assert np.abs(pack.a_w.value).max() < 1e-11
        assert np.abs(pack.b_w).max() < 1e-10

    def test_trace_relation(self):
        spec = random_smms(4, 2.5, 0.4, 9)
        sj = evaluate(spec, [0.1, 0.05, -0.1, 0.2])
        pack = weighted_curvature(sj, 0.4)
        m, n = 2.5, 4
        tr_p = float(np.einsum("ij,ij->", sj.mj.g_inv_val, pack.p_w.value))
        tr_ric = float(np.einsum("ij,ij->", sj.mj.g_inv_val, pack.ric_be.value))
        assert tr_p == pytest.approx(
            (tr_ric - n * pack.j_w.value) / (m + n - 2), abs=1e-10
        )

    def test_dp_cyclic_identity(self):
        spec = random_smms(3, 2.5, 0.4, 10)
        sj = evaluate(spec, [0.15, -0.1, 0.05])
        pack = weighted_curvature(sj, 0.4)
        dp = pack.dp_w.value
        cyc = dp + np.einsum("ijk->jki", dp) + np.einsum("ijk->kij", dp)
        assert np.abs(cyc).max() < 1e-10 * max(np.abs(dp).max(), 1.0)

    def test_excluded_m(self):
        spec = flat_affine(3, 2.5)
        spec.m = -1.0  # m + n - 2 = 0
        sj = evaluate(spec, [0.1, 0.0, 0.0])
        with pytest.raises(ExcludedDimensionError):
            weighted_curvature(sj, 0.0)
        spec.m = float("inf")
        with pytest.raises(InputError):
            SmmsSpec(n=3, coords=spec.coords, g_exprs=spec.g_exprs,
                     m=float("inf"), mu=0.0, v_expr=spec.v_expr)


class TestWeightedBach:
    def test_flat_affine_zero(self):
        spec = flat_affine(4, 1.0)
        sj = evaluate(spec, [0.1, 0.2, 0.0, -0.1])
        assert np.abs(weighted_bach(sj, spec.mu)).max() < 1e-14

    def test_symmetry_on_corpus(self):
        for seed in range(6):
            n = 3 if seed % 2 else 4
            spec = random_smms(n, [1.0, 2.5, 7.0][seed % 3], 0.3, 40 + seed)
            pt = corpus_points(spec, 1, seed)[0]
            pack = weighted_curvature(evaluate(spec, pt), 0.3)
            b = pack.b_w
            assert np.abs(b - b.T).max() < 1e-9 * (1 + np.abs(b).max())


class TestIdentities:
    def test_flat_affine_all_zero(self):
        spec = flat_affine(3, 2.5)
        sj = evaluate(spec, [0.2, -0.1, 0.1])
        res = verify_identities(sj, spec.mu)
        assert all(v < 1e-12 for v in res.values())

    def test_random_corpus(self):
        for seed, (n, m) in enumerate([(3, 1.0), (3, 2.5), (4, 7.0), (4, 2.5)]):
            spec = random_smms(n, m, 0.6, 70 + seed)
            for pt in corpus_points(spec, 3, seed):
                res = verify_identities(evaluate(spec, pt), 0.6)
                assert all(v < 1e-8 for v in res.values()), (seed, res)

    def test_m_zero_sides_vanish(self):
        spec = random_smms(3, 0.0, 0.9, 30)
        sj = evaluate(spec, [0.1, 0.1, -0.2])
        pack = weighted_curvature(sj, 0.9)
        gi = sj.mj.g_inv_val
        # with m = 0 the right sides vanish identically, so the left sides
        # are the classical trace/divergence identities
        tr_dp = np.einsum("ik,ijk->j", gi, pack.dp_w.value)
        tr_a = np.einsum("ik,ijkl->jl", gi, pack.a_w.value)
        assert np.abs(tr_dp).max() < 1e-11
        assert np.abs(tr_a).max() < 1e-11


class TestContinuityAndAsymptotics:
    def test_m_to_zero_continuity(self):
        spec_small = random_smms(3, 1e-8, 0.5, 55)
        spec_zero = random_smms(3, 0.0, 0.5, 55)
        pt = [0.12, -0.02, 0.2]
        p_small = weighted_curvature(evaluate(spec_small, pt), 0.5)
        p_zero = weighted_curvature(evaluate(spec_zero, pt), 0.5)
        for a, b in [
            (p_small.p_w.value, p_zero.p_w.value),
            (p_small.a_w.value, p_zero.a_w.value),
            (p_small.dp_w.value, p_zero.dp_w.value),
            (p_small.b_w, p_zero.b_w),
        ]:
            assert np.abs(a - b).max() < 1e-6

    def test_large_m_decay(self):
        # |A - Rm| and |(m+n-2) dP - dRic| decay like 1/m
        from qecheck.riemann import _cov_deriv_ja
        from qecheck.jets import jeinsum

        base = random_smms(3, 1.0, 0.8, 77, v_one=True)
        pt = [0.1, 0.15, -0.1]
        ms = [1e2, 1e3, 1e4]
        res_a, res_dp = [], []
        for m in ms:
            spec = SmmsSpec(n=3, coords=base.coords, g_exprs=base.g_exprs,
                            m=m, mu=0.8, v_expr=base.v_expr)
            sj = evaluate(spec, pt)
            pack = weighted_curvature(sj, 0.8)
            mj = sj.mj
            res_a.append(tensor_norm(pack.a_w.value - sj.rm.value, mj))
            nabla_ric = _cov_deriv_ja(sj.ric, mj.gamma)
            dric = (nabla_ric - jeinsum("jik->ijk", nabla_ric)).value
            res_dp.append(
                tensor_norm((m + 1) * pack.dp_w.value - dric, mj)
            )
        for series in (res_a, res_dp):
            slope = np.polyfit(np.log(ms), np.log(series), 1)[0]
            assert abs(slope + 1.0) < 0.1, series


class TestConformalChange:
    def test_zero_is_identity(self):
        spec = flat_affine(3, 2.0)
        s = parse_scalar("0", spec.coords)
        new = conformal_change(spec, s)
        pt = [0.2, 0.1, 0.0]
        assert eval_ja(new.v_expr, pt, 0).value == pytest.approx(1.2)
        gv = np.array([[eval_ja(e, pt, 0).value for e in row]
                       for row in new.g_exprs])
        assert np.allclose(gv, np.eye(3))

    def test_round_trip(self):
        spec = random_smms(3, 2.5, 0.3, 13)
        s = parse_scalar("0.2*x - 0.1*y*z", spec.coords)
        minus_s = parse_scalar("0-(0.2*x - 0.1*y*z)", spec.coords)
        back = conformal_change(conformal_change(spec, s), minus_s)
        pt = [0.1, -0.3, 0.2]
        for i in range(3):
            for j in range(3):
                a = eval_ja(back.g_exprs[i][j], pt, 2)
                b = eval_ja(spec.g_exprs[i][j], pt, 2)
                assert np.abs(a.c - b.c).max() < 1e-12
        assert abs(eval_ja(back.v_expr, pt, 0).value
                   - eval_ja(spec.v_expr, pt, 0).value) < 1e-12

    def test_rule_application(self):
        coords = ("x", "y", "z")
        spec = SmmsSpec(
            n=3, coords=coords, g_exprs=diag_metric(["1", "1", "1"], coords),
            m=2.0, mu=0.0, v_expr=parse_scalar("1", coords),
        )
        new = conformal_change(spec, parse_scalar("log(1+x)", coords))
        pt = [0.5, 0.0, 0.0]
        assert eval_ja(new.v_expr, pt, 0).value == pytest.approx(1.5)
        assert eval_ja(new.g_exprs[0][0], pt, 0).value == pytest.approx(1.5**2)

    def test_infinite_m_rejected(self):
        coords = ("x", "y", "z")
        spec = SmmsSpec(
            n=3, coords=coords, g_exprs=diag_metric(["1", "1", "1"], coords),
            m=float("inf"), mu=0.0, phi_expr=parse_scalar("x", coords),
        )
        with pytest.raises(ExcludedDimensionError):
            conformal_change(spec, parse_scalar("x", coords))


class TestQeResidual:
    def test_flat_affine_certificate(self):
        spec = flat_affine(3, 2.5)
        pt = [0.2, -0.1, 0.3]
        sj = evaluate(spec, pt)
        u = eval_ja(parse_scalar("1", spec.coords), pt, 4)
        res = qe_residual(sj, u, lam=0.0, mu=spec.m - 1.0)
        assert all(r < 1e-13 for r in res)

    def test_scaling_law(self):
        # u -> c u with lambda -> c^2 lambda preserves residual-zero status
        spec = flat_affine(3, 2.5)
        pt = [0.2, -0.1, 0.3]
        sj = evaluate(spec, pt)
        c = 1.7
        u = eval_ja(parse_scalar(f"{c}", spec.coords), pt, 4)
        res = qe_residual(sj, u, lam=c**2 * 0.0, mu=spec.m - 1.0)
        assert all(r < 1e-12 for r in res)

    def test_generic_nonvanishing(self):
        spec = random_smms(3, 2.5, 0.4, 19)
        pt = [0.1, 0.2, -0.1]
        sj = evaluate(spec, pt)
        u = eval_ja(parse_scalar("1", spec.coords), pt, 4)
        res = qe_residual(sj, u, lam=0.1, mu=0.7)
        assert max(res) > 1e-3

    def test_sign_changing_scale_accepted(self):
        spec = flat_affine(3, 2.5)
        pt = [0.2, -0.1, 0.3]
        sj = evaluate(spec, pt)
        u = eval_ja(parse_scalar("0-1", spec.coords), pt, 4)
        res = qe_residual(sj, u, lam=0.0, mu=spec.m - 1.0)
        assert all(r < 1e-12 for r in res)


class TestDuality:
    def test_flat_affine_swap(self):
        # (u, v, m, lam, mu) -> (v, u, 2-m-n, mu, lam)
        spec = flat_affine(3, 2.5)
        u_expr = parse_scalar("1", spec.coords)
        dual, new_u = dual_smms(spec, u_expr, lam=0.0)
        assert dual.m == pytest.approx(2.0 - 2.5 - 3)
        assert dual.mu == 0.0
        pt = [0.2, 0.05, -0.1]
        sj = evaluate(dual, pt)
        u_jet = eval_ja(new_u, pt, 4)
        res = qe_residual(sj, u_jet, lam=spec.mu, mu=0.0)
        assert all(r < 1e-12 for r in res), res

    def test_involution(self):
        spec = flat_affine(3, 2.5)
        u_expr = parse_scalar("1", spec.coords)
        dual, new_u = dual_smms(spec, u_expr, lam=0.0)
        back, back_u = dual_smms(dual, new_u, lam=dual.mu)
        assert back.m == pytest.approx(spec.m)
        assert back.v_expr is spec.v_expr
        assert back_u is u_expr

    def test_static_framing(self):
        # (g, v^1, lam, mu=0) pairs with (g, 1^{1-n} dvol) and char const lam
        coords = ("x", "y", "z")
        spec = SmmsSpec(
            n=3, coords=coords, g_exprs=diag_metric(["1", "1", "1"], coords),
            m=1.0, mu=0.0, v_expr=parse_scalar("1+x", coords), lam=0.0,
        )
        dual, new_u = dual_smms(spec, parse_scalar("1", coords), lam=0.0)
        assert dual.m == pytest.approx(1.0 - 3.0)  # 2 - m - n with m = 1
        assert eval_ja(dual.v_expr, [0.0, 0.0, 0.0], 0).value == 1.0
        assert new_u is spec.v_expr
