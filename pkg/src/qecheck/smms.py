"""Weighted curvature of a smooth metric measure space.

A smooth metric measure space is a tuple (M^n, g, v^m dvol, m) with v > 0
and a dimensional parameter m in R u {+-inf}; for finite m the weight
function is phi = -m log v, and for |m| = inf the data is phi itself.  All
weighted objects additionally depend on the characteristic constant mu,
which every operation takes explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import expr as ex
from .errors import EvalDomainError, ExcludedDimensionError, InputError
from .expr import eval_ja
from .jets import JA, jeinsum
from .riemann import (
    hessian,
    kulkarni_nomizu,
    laplacian,
    metric_jet,
    ricci_scalar_schouten,
    riemann_tensor,
    tensor_norm,
    weighted_divergence,
)

EXCLUDED_TOL = 1e-9


def is_finite_m(m):
    return math.isfinite(m)


def check_admissible(m, n, need=("m+n-2", "m+n-1")):
    """Reject the excluded dimensional parameters for tractor-type formulas."""
    if not is_finite_m(m):
        raise ExcludedDimensionError(m, n, "finite m required")
    checks = {"m+n-2": m + n - 2, "m+n-1": m + n - 1, "m+n": m + n}
    for name in need:
        if abs(checks[name]) < EXCLUDED_TOL:
            raise ExcludedDimensionError(m, n, f"{name} = 0")


@dataclass
class SmmsSpec:
    """Chart description of a smooth metric measure space as expressions."""

    n: int
    coords: tuple
    g_exprs: list            # n x n nested list of ScalarExpr
    m: float                 # may be +-inf
    mu: float
    v_expr: object = None    # ScalarExpr, required for finite m
    phi_expr: object = None  # ScalarExpr, required for |m| = inf
    lam: float | None = None
    scale_tag: str = "base"

    def __post_init__(self):
        if is_finite_m(self.m):
            if self.v_expr is None:
                raise InputError("finite m requires a density expression v")
        else:
            if self.phi_expr is None:
                raise InputError("|m| = inf requires a weight expression phi")


class SmmsJet:
    """Full pointwise evaluation of a SmmsSpec: metric, density and
    curvature jets at one chart point."""

    def __init__(self, spec, point, order=4):
        self.spec = spec
        self.point = np.asarray(point, dtype=float)
        self.n = spec.n
        self.m = spec.m
        self.mj = metric_jet(spec.g_exprs, point, order=order)
        if is_finite_m(spec.m):
            self.v = eval_ja(spec.v_expr, point, order)
            if self.v.value <= 0:
                raise EvalDomainError(
                    f"density v must be positive (got {self.v.value})", point
                )
            # v^m = e^{-phi}
            self.phi = self.v.log() * (-spec.m)
        else:
            self.v = None
            self.phi = eval_ja(spec.phi_expr, point, order)
        self._cache = {}

    # unweighted curvature, cached
    def _riemann(self):
        if "rm" not in self._cache:
            rm, nabla_rm = riemann_tensor(self.mj)
            self._cache["rm"] = rm
            self._cache["nabla_rm"] = nabla_rm
        return self._cache["rm"]

    @property
    def rm(self):
        return self._riemann().jets

    @property
    def nabla_rm(self):
        self._riemann()
        return self._cache["nabla_rm"].jets

    def _schouten(self):
        if "ric" not in self._cache:
            ric, r, p, j = ricci_scalar_schouten(self._riemann(), self.mj)
            self._cache.update(ric=ric.jets, r=r.jets, p=p.jets, j=j.jets)

    @property
    def ric(self):
        self._schouten()
        return self._cache["ric"]

    @property
    def r(self):
        self._schouten()
        return self._cache["r"]


def evaluate(spec, point, order=4):
    return SmmsJet(spec, point, order=order)


def bakry_emery(sj):
    """Bakry-Emery Ricci tensor and weighted scalar curvature as jets.

    Finite m uses the v-form Ric - m v^{-1} Hess v; for |m| = inf the
    phi-form with the 1/m terms dropped.
    """
    mj = sj.mj
    ric, r = sj.ric, sj.r
    if is_finite_m(sj.m):
        if sj.m == 0:
            return ric, r
        hv = hessian(sj.v, mj)
        lap_v = laplacian(sj.v, mj)
        dv = sj.v.grad()
        dv2_jet = jeinsum("ij,ij->", mj.g_inv, jeinsum("i,j->ij", dv, dv))
        vinv = sj.v.reciprocal()
        ric_be = ric - hv * (sj.m * vinv)
        r_w = r - lap_v * (2.0 * sj.m * vinv) - dv2_jet * (sj.m * (sj.m - 1)) * vinv * vinv
        return ric_be, r_w
    hphi = hessian(sj.phi, mj)
    lap_phi = laplacian(sj.phi, mj)
    dphi = sj.phi.grad()
    dphi2 = jeinsum("ij,ij->", sj.mj.g_inv, jeinsum("i,j->ij", dphi, dphi))
    ric_be = sj.ric + hphi
    r_w = sj.r + lap_phi * 2.0 - dphi2
    return ric_be, r_w


@dataclass
class CurvaturePack:
    """All weighted curvature tensors at one point (jets where consumers
    need further derivatives, plain values otherwise)."""

    sj: SmmsJet
    mu: float
    ric_be: JA          # (n, n) order >= 2
    r_w: JA             # scalar
    p_w: JA             # weighted Schouten, order >= 2
    j_w: JA             # scalar
    a_w: JA             # (0,4) weighted Weyl-type curvature, order >= 1
    dp_w: JA            # (0,3), order >= 1
    b_w: np.ndarray     # (n, n) weighted Bach values
    ytilde: JA          # scalar, bottom slot of the scale tractor
    nabla_dp_w: JA = field(repr=False, default=None)   # (0,4) values
    nabla_a_w: JA = field(repr=False, default=None)    # (0,5) values

    @property
    def mj(self):
        return self.sj.mj

    @property
    def m(self):
        return self.sj.m


def _ytilde_jet(sj, mu):
    """Bottom slot of the scale tractor in this scale.

    ytilde = rho_J + (m+2n-2)(mu - (m-1)|J|^2) / (2(m+n-1)(m+n-2) v)
    where J = (v, grad v, rho_J) with rho_J = -(Lap v + R v/(2(n-1)))/n and
    |J|^2 = 2 v rho_J + |grad v|^2.
    """
    m, n = sj.m, sj.n
    mj = sj.mj
    lap_v = laplacian(sj.v, mj)
    rho_j = (lap_v + sj.r * sj.v * (1.0 / (2 * (n - 1)))) * (-1.0 / n)
    dv = sj.v.grad()
    dv2 = jeinsum("ij,ij->", mj.g_inv, jeinsum("i,j->ij", dv, dv))
    j_norm2 = sj.v * rho_j * 2.0 + dv2
    corr = (
        (j_norm2 * (-(m - 1)) + mu)
        * ((m + 2 * n - 2) / (2.0 * (m + n - 1) * (m + n - 2)))
        * sj.v.reciprocal()
    )
    return rho_j + corr


def weighted_curvature(sj, mu):
    """Assemble the full weighted curvature pack at the evaluated point."""
    m, n = sj.m, sj.n
    check_admissible(m, n)
    mj = sj.mj
    ric_be, r_w = bakry_emery(sj)
    vinv2 = sj.v.reciprocal().ipow(2) if m != 0 else None
    ru = r_w + vinv2 * (m * mu) if m != 0 else r_w
    j_w = ru * (1.0 / (2.0 * (m + n - 1)))
    p_w = (ric_be - mj.g * j_w) * (1.0 / (m + n - 2))
    a_w = sj.rm - kulkarni_nomizu(p_w, mj.g)
    nabla_p = _cov(p_w, mj)
    # dP(x,y,z) = nabla_x P(y,z) - nabla_y P(x,z)
    dp_w = nabla_p - jeinsum("jik->ijk", nabla_p)
    nabla_dp = _cov(dp_w, mj)
    nabla_a = _cov(a_w, mj)
    ytilde = _ytilde_jet(sj, mu)
    b_w = _bach_from_parts(sj, mu, a_w, dp_w, nabla_dp, p_w, ytilde)
    return CurvaturePack(
        sj=sj,
        mu=mu,
        ric_be=ric_be,
        r_w=r_w,
        p_w=p_w,
        j_w=j_w,
        a_w=a_w,
        dp_w=dp_w,
        b_w=b_w,
        ytilde=ytilde,
        nabla_dp_w=nabla_dp,
        nabla_a_w=nabla_a,
    )


def _cov(t, mj):
    from .riemann import _cov_deriv_ja

    return _cov_deriv_ja(t, mj.gamma)


def _bach_from_parts(sj, mu, a_w, dp_w, nabla_dp, p_w, ytilde):
    """B = delta_phi dP + v^{-1} tr dP (x) dv + <A, P - v^{-1} ytilde g>."""
    mj = sj.mj
    gi = mj.g_inv_val
    # delta_phi dP, contracting the leading form slot of dP[i,j,k]
    div_dp = np.einsum("ia,iajk->jk", gi, nabla_dp.value)
    phi_raised = gi @ sj.phi.grad().value
    div_dp = div_dp - np.einsum("a,ajk->jk", phi_raised, dp_w.value)
    tr_dp = np.einsum("ik,ijk->j", gi, dp_w.value)
    dv = sj.v.grad().value
    vinv = 1.0 / sj.v.value
    pairing_arg = p_w.value - vinv * ytilde.value * mj.g_val
    pairing = np.einsum("ia,kb,ijkl,ab->jl", gi, gi, a_w.value, pairing_arg)
    return div_dp + vinv * np.einsum("j,k->jk", tr_dp, dv) + pairing


def weighted_bach(sj, mu):
    """Weighted Bach tensor (values) at the evaluated point."""
    return weighted_curvature(sj, mu).b_w


def connection_values(spec, mu, point, order=2):
    """(MetricJet, weighted Schouten values) at reduced jet order.

    Cheap entry point for holonomy-style finite-difference oracles that only
    need pointwise connection coefficients.
    """
    sj = evaluate(spec, point, order=order)
    m, n = sj.m, sj.n
    check_admissible(m, n)
    ric_be, r_w = bakry_emery(sj)
    ru_val = r_w.value + (m * mu / sj.v.value**2 if m != 0 else 0.0)
    j_w = ru_val / (2.0 * (m + n - 1))
    p_val = (ric_be.value - j_w * sj.mj.g_val) / (m + n - 2)
    return sj.mj, p_val


def _rel(lhs, rhs, mj):
    num = tensor_norm(lhs - rhs, mj)
    den = max(tensor_norm(lhs, mj), tensor_norm(rhs, mj))
    return num / (den + 1e-12) if den > 1e-8 else num


def verify_identities(sj, mu, pack=None):
    """Residuals of the four trace/divergence identities of the weighted
    curvature, each comparing independently computed sides.

    Returns a dict with keys tr_dp, tr_a, div_a, div_dp (relative norms).
    """
    m = sj.m
    mj = sj.mj
    if pack is None:
        pack = weighted_curvature(sj, mu)
    v = sj.v.value
    dv = sj.v.grad().value
    gi = mj.g_inv_val
    p_val = pack.p_w.value
    ytilde = pack.ytilde
    dytilde = ytilde.grad().value
    hess_v = hessian(sj.v, mj).value

    # (1) tr dP = m v^{-1} (grad ytilde - P(grad v))
    lhs1 = np.einsum("ik,ijk->j", gi, pack.dp_w.value)
    inner1 = dytilde - np.einsum("jk,kl,l->j", p_val, gi, dv)
    rhs1 = (m / v) * inner1

    # (2) tr A = m v^{-1} (v P + Hess v + ytilde g)
    lhs2 = np.einsum("ik,ijkl->jl", gi, pack.a_w.value)
    inner2 = v * p_val + hess_v + ytilde.value * mj.g_val
    rhs2 = (m / v) * inner2

    # (3) delta_phi A = (m+n-3) dP - m v^{-2} dv ^ (v P + Hess v + ytilde g)
    a_perm = jeinsum("ijkl->kijl", pack.a_w)
    lhs3 = weighted_divergence(a_perm, mj, sj.phi).value
    wedge2 = np.einsum("i,jl->ijl", dv, inner2) - np.einsum("j,il->ijl", dv, inner2)
    rhs3 = (m + sj.n - 3) * pack.dp_w.value - (m / v**2) * wedge2

    # (4) delta_phi dP (Lambda^2-valued) = -m v^{-2} dv ^ (grad ytilde - P(grad v))
    dp_perm = jeinsum("ijk->kij", pack.dp_w)
    lhs4 = weighted_divergence(dp_perm, mj, sj.phi).value
    wedge1 = np.einsum("i,j->ij", dv, inner1) - np.einsum("j,i->ij", dv, inner1)
    rhs4 = -(m / v**2) * wedge1

    return {
        "tr_dp": _rel(lhs1, rhs1, mj),
        "tr_a": _rel(lhs2, rhs2, mj),
        "div_a": _rel(lhs3, rhs3, mj),
        "div_dp": _rel(lhs4, rhs4, mj),
    }


def conformal_change(spec, s_expr, new_tag=None):
    """Pointwise conformal change (g, v) -> (e^{2s} g, e^s v)."""
    if not is_finite_m(spec.m):
        raise ExcludedDimensionError(
            spec.m, spec.n, "conformal change undefined for |m| = inf"
        )
    new_g = [
        [ex.scale_metric_entry(e, s_expr) for e in row] for row in spec.g_exprs
    ]
    return SmmsSpec(
        n=spec.n,
        coords=spec.coords,
        g_exprs=new_g,
        m=spec.m,
        mu=spec.mu,
        v_expr=ex.scale_density(spec.v_expr, s_expr),
        lam=spec.lam,
        scale_tag=(new_tag or spec.scale_tag + "*conf"),
    )


def qe_residual(sj, u_jet, lam, mu):
    """Residual norms of the conformally quasi-Einstein system for the
    candidate scale u (a scalar JA of order >= 2).

    Returns (tracefree residual, lambda-equation residual, mu-equation
    residual); all three vanish iff u is a quasi-Einstein scale with these
    constants at the point.
    """
    m, n = sj.m, sj.n
    if not is_finite_m(m):
        raise ExcludedDimensionError(m, n, "qe_residual needs finite m")
    mj = sj.mj
    u = u_jet.value
    v = sj.v.value
    ric = sj.ric.value
    r = sj.r.value
    hu = hessian(u_jet, mj).value
    hv = hessian(sj.v, mj).value
    lap_u = np.einsum("ij,ij->", mj.g_inv_val, hu)
    lap_v = np.einsum("ij,ij->", mj.g_inv_val, hv)
    du = u_jet.grad().value
    dv = sj.v.grad().value
    gi = mj.g_inv_val
    du2 = du @ gi @ du
    dv2 = dv @ gi @ dv
    dudv = du @ gi @ dv

    e1 = u * v * ric + (m + n - 2) * v * hu - m * u * hv
    e1_tf = e1 - (np.einsum("ij,ij->", gi, e1) / n) * mj.g_val
    r_tf = tensor_norm(e1_tf, mj)

    e2 = n * lam * v**2 - (
        (u * v) ** 2 * r
        + (m + 2 * n - 2) * u * v**2 * lap_u
        - m * u**2 * v * lap_v
        - (m + n - 1) * n * v**2 * du2
        + m * n * u * v * dudv
    )
    e3 = n * mu * u**2 - (
        (u * v) ** 2 * r
        + (m + n - 2) * u * v**2 * lap_u
        - (m - n) * u**2 * v * lap_v
        - (m + n - 2) * n * u * v * dudv
        + n * (m - 1) * u**2 * dv2
    )
    return r_tf, abs(float(e2)), abs(float(e3))


def dual_smms(spec, u_expr, lam):
    """Swap the measure density with the quasi-Einstein scale.

    Given (g, v, m, lambda, mu) with quasi-Einstein scale u, returns the
    spec (g, u, 2-m-n, mu') with characteristic constant mu' = lambda, for
    which v is the corresponding quasi-Einstein scale with constant mu.
    """
    if not is_finite_m(spec.m):
        raise ExcludedDimensionError(spec.m, spec.n, "duality needs finite m")
    new_spec = SmmsSpec(
        n=spec.n,
        coords=spec.coords,
        g_exprs=spec.g_exprs,
        m=2.0 - spec.m - spec.n,
        mu=lam,
        v_expr=u_expr,
        lam=spec.mu,
        scale_tag=spec.scale_tag,
    )
    return new_spec, spec.v_expr
