"""Genericity tests, curvature inversion, sharp obstruction tensors for
quasi-Einstein scales, gradient Ricci solitons and static potentials, and
the matrix-Harnack quadratic form.

The inversion machinery treats a curvature-type tensor as a bundle map
TM -> F with F = Lambda^2 T*M (x) TM carrying the product fiber metric
(Lambda^2 summed over i<j).  A point is weakly generic when that map is
injective; there the map A (x) A pulls back to an invertible endomorphism
of TM and the candidate potential one-form is recovered by pairing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotWeaklyGenericError
from .jets import JA, inverse_matrix, jeinsum
from .riemann import _cov_deriv_ja, hessian, tensor_norm, to_onb
from .tractor import (
    Tractor,
    adjoint_slots_act,
    annihilation_check,
    curvature_derivative_slots,
    tractor_curvature,
)

GENERICITY_EPS = 1e-8
COND_LIMIT = 1e16
ZERO_MAP_FLOOR = 1e-13  # below this the map is indistinguishable from zero


# ---------------------------------------------------------------------------
# genericity


@dataclass
class GenericityReport:
    weakly_generic: bool
    sigma_min: float
    sigma_max: float
    generic: bool
    sigma_min_2a: float
    sigma_max_2a: float
    sigma_min_2b: float
    sigma_max_2b: float
    eps: float = GENERICITY_EPS


def _pairs(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def _triples(n):
    return [(i, j, k) for i in range(n) for j in range(i + 1, n)
            for k in range(j + 1, n)]


def genericity(pack_or_a, mj=None, eps=GENERICITY_EPS):
    """Singular-value tests of the three injectivity conditions.

    Accepts a curvature pack (uses its weighted Weyl-type curvature) or a
    plain (0,4) component array together with the metric frame.
    """
    if mj is None:
        a_val = pack_or_a.a_w.value
        mj = pack_or_a.mj
    else:
        a_val = np.asarray(pack_or_a, dtype=float)
    n = mj.n
    e = mj.onb()
    a = to_onb(a_val, e)
    pairs = _pairs(n)

    # map TM -> Lambda^2 (x) TM, insertion in the third slot
    m0 = np.stack([a[p, q, :, :] for (p, q) in pairs])  # [pair, in, out]
    m0 = np.transpose(m0, (0, 2, 1)).reshape(len(pairs) * n, n)
    s0 = np.linalg.svd(m0, compute_uv=False)

    # map Lambda^2 -> Lambda^2 (curvature operator)
    m1 = np.array([[a[p, q, r, s] for (r, s) in pairs] for (p, q) in pairs])
    s1 = np.linalg.svd(m1, compute_uv=False)

    # map End(TM) -> End(TM) (+) Lambda^3 (x) TM
    triples = _triples(n)
    cols = []
    for bi in range(n):
        for bj in range(n):
            t = np.zeros((n, n))
            t[bi, bj] = 1.0
            out1 = np.einsum("ijkl,ik->jl", a, t)
            rows = [out1.reshape(-1)]
            if triples:
                out2 = np.zeros((len(triples), n))
                for ti, (p, q, r) in enumerate(triples):
                    out2[ti] = (
                        np.einsum("is,i->s", a[p, q], t[:, r])
                        + np.einsum("is,i->s", a[q, r], t[:, p])
                        + np.einsum("is,i->s", a[r, p], t[:, q])
                    )
                rows.append(out2.reshape(-1))
            cols.append(np.concatenate(rows))
    m2 = np.stack(cols, axis=1)
    s2 = np.linalg.svd(m2, compute_uv=False)

    def injective(s):
        return bool(s[0] > ZERO_MAP_FLOOR and s[-1] > eps * s[0])

    weakly = injective(s0)
    gen = injective(s1) and injective(s2)
    return GenericityReport(
        weakly_generic=weakly,
        sigma_min=float(s0[-1]),
        sigma_max=float(s0[0]),
        generic=gen,
        sigma_min_2a=float(s1[-1]),
        sigma_max_2a=float(s1[0]),
        sigma_min_2b=float(s2[-1]),
        sigma_max_2b=float(s2[0]),
        eps=eps,
    )


# ---------------------------------------------------------------------------
# curvature inversion


@dataclass
class CurvatureInverse:
    """The inverse data of a map TM -> F built from a curvature tensor.

    ``a_map`` has insertion slot 3 and value slot 4 (lowered), as jets when
    available.  ``lam2`` scales the Lambda^2 fiber inner product; the
    recovered one-form is invariant under this normalization.
    """

    a_map: JA
    acheck: JA          # (0,2) Gram matrix <A(e_a), A(e_b)>_F
    acheck_inv: JA      # inverse endomorphism (raised-lower index)
    mj: object
    lam2: float = 1.0

    def _raised_map(self):
        mj = self.mj
        m = jeinsum("ik,ijas->kjas", mj.g_inv, self.a_map)
        m = jeinsum("jl,kjas->klas", mj.g_inv, m)
        return jeinsum("st,klas->klat", mj.g_inv, m)

    def pair_with(self, source):
        """<source, A(e_a)>_F as a jet covector; source is a (0,3) jet
        tensor with Lambda^2 slots first and lowered value slot."""
        return jeinsum("ijt,ijat->a", source, self._raised_map()) * (
            0.5 * self.lam2
        )

    def recover(self, source):
        """Solve <source - A(K), .>_F = 0: K = <source, D(.)>, raised."""
        ell = self.pair_with(source)
        k_low = jeinsum("ac,a->c", self.acheck_inv, ell)
        return jeinsum("ca,a->c", self.mj.g_inv, k_low), k_low


def build_D(a_map, mj, lam2=1.0):
    """Gram matrix and inverse for a curvature map; raises
    NotWeaklyGenericError when the Gram matrix is numerically singular."""
    inv = CurvatureInverse(a_map=a_map, acheck=None, acheck_inv=None, mj=mj,
                           lam2=lam2)
    gram = jeinsum("ijas,ijbs->ab", inv._raised_map(), a_map) * (0.5 * lam2)
    if np.abs(gram.value).max() < ZERO_MAP_FLOOR**2:
        raise NotWeaklyGenericError("curvature map vanishes at this point")
    cond = np.linalg.cond(gram.value)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise NotWeaklyGenericError(
            f"curvature map Gram matrix condition number {cond:.3e}"
        )
    acheck_end = jeinsum("ac,cb->ab", mj.g_inv, gram)
    inv.acheck = gram
    inv.acheck_inv = inverse_matrix(acheck_end)
    return inv


def vee_identity_residual(inv):
    """Residual of D v A = id on TM."""
    mj = inv.mj
    d_map = jeinsum("ijbs,ba->ijas", inv.a_map, inv.acheck_inv)
    d_inv = CurvatureInverse(a_map=d_map, acheck=None, acheck_inv=None,
                             mj=mj, lam2=inv.lam2)
    w = jeinsum("ijas,ijbs->ab", d_inv._raised_map(), inv.a_map) * (
        0.5 * inv.lam2
    )
    end = jeinsum("ac,cb->ab", mj.g_inv, w).value
    return float(np.abs(end - np.eye(mj.n)).max())


def candidate_K(pack, lam2=1.0, inv=None):
    """Candidate potential one-form (lowered, as jets) from the weighted
    curvature, plus the construction-identity residual."""
    mj = pack.mj
    if inv is None:
        inv = build_D(pack.a_w, mj, lam2=lam2)
    k_raised, k_low = inv.recover(pack.dp_w)
    # pairing residual <dP - A(K), D(x)>_F for all x
    a_k = jeinsum("ijas,a->ijs", pack.a_w, k_raised)
    resid3 = pack.dp_w - a_k
    ell = inv.pair_with(resid3)
    k_resid = jeinsum("ac,a->c", inv.acheck_inv, ell).value
    return k_raised, k_low, float(np.abs(k_resid).max())


# ---------------------------------------------------------------------------
# the quasi-Einstein obstruction tensor


def obstruction_G_point(pack, lam2=1.0):
    """G tensor, candidate K, and exactness residual at one point."""
    from .smms import check_admissible

    sj = pack.sj
    mj = pack.mj
    m, n = pack.m, mj.n
    check_admissible(m, n, need=("m+n-2", "m+n-1", "m+n"))
    k_raised, k_low, k_resid = candidate_K(pack, lam2=lam2)
    nabla_k = _cov_deriv_ja(k_low, mj.gamma)  # [i, j] = nabla_i K_j
    dk = nabla_k.value - nabla_k.value.T
    phi_raised = mj.g_inv_val @ sj.phi.grad().value
    div_phi_k = float(
        np.einsum("ij,ij->", mj.g_inv_val, nabla_k.value)
        - phi_raised @ k_low.value
    )
    k2 = float(k_low.value @ mj.g_inv_val @ k_low.value)
    ru = pack.r_w.value + (m * pack.mu / sj.v.value**2 if m != 0 else 0.0)
    g_val = mj.g_val
    big = (
        nabla_k.value
        + np.outer(k_low.value, k_low.value)
        - ((div_phi_k + k2) / (m + n)) * g_val
    )
    g_tensor = pack.ric_be.value - (ru / (m + n)) * g_val + (m + n - 2) * big
    return {
        "G": g_tensor,
        "G_norm": tensor_norm(g_tensor, mj),
        "K": k_low.value.copy(),
        "K_raised": k_raised.value.copy(),
        "dK_norm": tensor_norm(dk, mj),
        "pairing_residual": k_resid,
    }


# ---------------------------------------------------------------------------
# gradient Ricci soliton obstruction (|m| = inf)


def soliton_point(sj, mu, eps=GENERICITY_EPS, lam2=1.0):
    """Soliton pipeline at one point: invert the full curvature on dRic."""
    mj = sj.mj
    rep = genericity(sj.rm.value, mj, eps=eps)
    if not rep.weakly_generic:
        raise NotWeaklyGenericError(
            "curvature map not injective; supply a potential for residual mode"
        )
    nabla_ric = _cov_deriv_ja(sj.ric, mj.gamma)
    dric = nabla_ric - jeinsum("jik->ijk", nabla_ric)
    inv = build_D(sj.rm, mj, lam2=lam2)
    k_raised, k_low = inv.recover(dric)
    nabla_k = _cov_deriv_ja(k_low, mj.gamma)
    resid = sj.ric.value + nabla_k.value - mu * mj.g_val
    dk = nabla_k.value - nabla_k.value.T
    return {
        "residual": tensor_norm(resid, mj),
        "dK_norm": tensor_norm(dk, mj),
        "K": k_low.value.copy(),
        "genericity": rep,
    }


def soliton_residual_point(sj, mu, f_jet):
    """Residual |Ric + Hess f - mu g| for a supplied potential."""
    mj = sj.mj
    hf = hessian(f_jet, mj).value
    return tensor_norm(sj.ric.value + hf - mu * mj.g_val, mj)


# ---------------------------------------------------------------------------
# static potential obstruction


def static_maps(sj):
    """The trace-modified curvature map used by the static pipeline.

    A = Rm + Ric ^ g;  B(x) = A(x) - (tr A(x) ^ g)/(n-1) with the trace over
    the second form slot and the value slot.
    """
    from .riemann import kulkarni_nomizu

    mj = sj.mj
    n = mj.n
    a_st = sj.rm + kulkarni_nomizu(sj.ric, mj.g)
    tr_map = jeinsum("jk,ijak->ia", mj.g_inv, a_st)
    wedge = jeinsum("ia,jk->ijak", tr_map, mj.g) - jeinsum(
        "ja,ik->ijak", tr_map, mj.g
    )
    b_map = a_st - wedge * (1.0 / (n - 1))
    return a_st, b_map


def static_point(sj, lam, eps=GENERICITY_EPS, lam2=1.0, r_tol=1e-6):
    """Three-step static check at one point."""
    mj = sj.mj
    n = mj.n
    r_val = float(sj.r.value)
    r_resid = abs(r_val - (n - 1) * lam)
    _, b_map = static_maps(sj)
    rep = genericity(b_map.value, mj, eps=eps)
    out = {
        "R": r_val,
        "R_residual": r_resid,
        "genericity": rep,
        "ric_eigen_gap": None,
    }
    ric_end = mj.g_inv_val @ sj.ric.value
    eigs = np.sort(np.linalg.eigvals(ric_end).real)
    if n == 3:
        gaps = [abs(eigs[0] - eigs[1]), abs(eigs[1] - eigs[2]),
                abs(eigs[0] - eigs[2])]
        out["ric_eigen_gap"] = float(min(gaps))
        out["ric_eigenvalues"] = [float(x) for x in eigs]
    if not rep.weakly_generic:
        raise NotWeaklyGenericError(
            "trace-modified curvature map not injective "
            "(repeated Ricci eigenvalues in dimension 3)", )
    nabla_ric = _cov_deriv_ja(sj.ric, mj.gamma)
    dric = nabla_ric - jeinsum("jik->ijk", nabla_ric)
    inv = build_D(b_map, mj, lam2=lam2)
    k_raised, k_low = inv.recover(dric)
    k_low = k_low * (-1.0)
    nabla_k = _cov_deriv_ja(k_low, mj.gamma)
    dk = nabla_k.value - nabla_k.value.T
    g_st = (
        sj.ric.value - nabla_k.value
        - np.outer(k_low.value, k_low.value) - lam * mj.g_val
    )
    out.update(
        K=k_low.value.copy(),
        dK_norm=tensor_norm(dk, mj),
        G_norm=tensor_norm(g_st, mj),
    )
    return out


def static_residual_point(sj, v_jet, lam):
    """(|v Ric - Hess v + (Lap v) g|, |R - (n-1) lam|) at one point."""
    mj = sj.mj
    hv = hessian(v_jet, mj).value
    lap_v = float(np.einsum("ij,ij->", mj.g_inv_val, hv))
    resid = v_jet.value * sj.ric.value - hv + lap_v * mj.g_val
    return tensor_norm(resid, mj), abs(float(sj.r.value) - (mj.n - 1) * lam)


# ---------------------------------------------------------------------------
# rank test on the curvature 1-jet


def rank_test_phi(pack, rel_tol=1e-4):
    """Singular values of I -> (R(I), nabla R(I)) on the orthogonal
    complement of the scale tractor; the top exterior power vanishes iff
    sigma_{n+1} is negligible against sigma_1."""
    from .tractor import scale_tractor

    mj = pack.mj
    n = mj.n
    jt, _ = scale_tractor(pack)
    g_val = mj.g_val
    h = np.zeros((n + 2, n + 2))
    h[0, -1] = h[-1, 0] = 1.0
    h[1 : n + 1, 1 : n + 1] = g_val
    row = (h @ jt.as_vector())[None, :]
    _, _, vh = np.linalg.svd(row)
    basis = vh[1:]  # (n+1) euclidean-orthonormal spanning the complement

    rc = tractor_curvature(pack)
    slots = curvature_derivative_slots(pack)
    pairs = _pairs(n)
    cols = []
    for vec in basis:
        t = Tractor.from_vector(vec, pack.sj.spec.scale_tag)
        blocks = []
        for (i, j) in pairs:
            blocks.append(rc.act(i, j, t, mj.g_inv_val).as_vector())
        s_out, o_out, r_out = adjoint_slots_act(
            slots["alpha"], slots["Phi"], slots["phi"], slots["beta"], t,
            mj.g_inv_val,
        )
        for c in range(n):
            for (i, j) in pairs:
                blocks.append(
                    np.concatenate(
                        ([s_out[c, i, j]], o_out[c, i, j], [r_out[c, i, j]])
                    )
                )
        cols.append(np.concatenate(blocks))
    mat = np.stack(cols, axis=1)
    svals = np.linalg.svd(mat, compute_uv=False)
    sigma_1 = float(svals[0])
    sigma_last = float(svals[n])
    qe_possible = sigma_1 < 1e-12 or sigma_last < rel_tol * sigma_1
    return {
        "max_rank": int(np.sum(svals > rel_tol * max(sigma_1, 1e-300))),
        "sigma_1": sigma_1,
        "sigma_np1": sigma_last,
        "qe_possible": bool(qe_possible),
    }


def check_tractor_conditions(pack, tractor):
    """Residual norms of the annihilation conditions for a supplied tractor
    plus the sign datum of its top slot."""
    mj = pack.mj
    rc = tractor_curvature(pack)
    pairs = _pairs(mj.n)
    r_res = 0.0
    for (i, j) in pairs:
        vec = rc.act(i, j, tractor, mj.g_inv_val).as_vector()
        r_res = max(r_res, float(np.abs(vec).max()))
    slots = curvature_derivative_slots(pack)
    s_out, o_out, r_out = adjoint_slots_act(
        slots["alpha"], slots["Phi"], slots["phi"], slots["beta"], tractor,
        mj.g_inv_val,
    )
    dr_res = max(
        float(np.abs(s_out).max()),
        float(np.abs(o_out).max()),
        float(np.abs(r_out).max()),
    )
    w_res = annihilation_check(pack, tractor)
    return {
        "weyl_residual": w_res,
        "curvature_residual": r_res,
        "curvature_derivative_residual": dr_res,
        "x_inner": float(tractor.sigma),
    }


# ---------------------------------------------------------------------------
# potential reconstruction


def potential_reconstruct(field, path, nsub=64, loops=None):
    """Line-integral reconstruction of f with K = df along a polyline.

    ``field(x)`` returns (K values (n,), dK values (n,n) or None).  Returns
    (f values at the nodes, max |dK| sampled, loop residuals).
    """
    path = [np.asarray(p, dtype=float) for p in path]
    f_vals = [0.0]
    dk_worst = 0.0

    def segment_integral(a, b):
        nonlocal dk_worst
        # composite Simpson with 2*nsub panels
        ts = np.linspace(0.0, 1.0, 2 * nsub + 1)
        integrand = np.empty_like(ts)
        direction = b - a
        for idx, t in enumerate(ts):
            k, dk = field(a + t * direction)
            integrand[idx] = float(np.dot(k, direction))
            if dk is not None:
                dk_worst = max(dk_worst, float(np.abs(dk).max()))
        h = 1.0 / (2 * nsub)
        weights = np.ones_like(ts)
        weights[1:-1:2] = 4.0
        weights[2:-1:2] = 2.0
        return float((h / 3.0) * np.dot(weights, integrand))

    for a, b in zip(path[:-1], path[1:]):
        f_vals.append(f_vals[-1] + segment_integral(a, b))

    loop_resids = []
    for loop in loops or []:
        loop = [np.asarray(p, dtype=float) for p in loop]
        total = 0.0
        for a, b in zip(loop[:-1], loop[1:]):
            total += segment_integral(a, b)
        loop_resids.append(abs(total))
    return np.array(f_vals), dk_worst, loop_resids


# ---------------------------------------------------------------------------
# matrix-Harnack suite


def hamilton_target(sj, mu):
    """Lap Ric - Hess R / 2 + 2 <Rm, Ric> - Ric^2 - mu Ric (values)."""
    mj = sj.mj
    gi = mj.g_inv_val
    nabla_ric = _cov_deriv_ja(sj.ric, mj.gamma)
    nn = _cov_deriv_ja(nabla_ric, mj.gamma)
    lap_ric = np.einsum("ab,abjk->jk", gi, nn.value)
    hess_r = hessian(sj.r, mj).value
    ric = sj.ric.value
    rm = sj.rm.value
    rm_ric = np.einsum("ia,kb,ijkl,ab->jl", gi, gi, rm, ric)
    ric2 = ric @ gi @ ric
    return lap_ric - 0.5 * hess_r + 2.0 * rm_ric - ric2 - mu * ric


def harnack_form_matrix(pack):
    """Quadratic form (alpha, Phi) -> (m+n-4) B(a,a) - 2(m+n-4) <dP, Phi(x)a>
    + A(Phi,Phi) over orthonormal-frame slot coordinates."""
    mj = pack.mj
    n = mj.n
    e = mj.onb()
    mn4 = pack.m + n - 4.0
    a = to_onb(pack.a_w.value, e)
    dp = to_onb(pack.dp_w.value, e)
    b = to_onb(pack.b_w, e)
    pairs = _pairs(n)
    npair = len(pairs)
    dim = n + npair
    q = np.zeros((dim, dim))
    q[:n, :n] = mn4 * b
    blk = np.zeros((npair, npair))
    for ai, (p1, q1) in enumerate(pairs):
        for bi, (p2, q2) in enumerate(pairs):
            blk[ai, bi] = a[p1, q1, p2, q2]
    q[n:, n:] = blk
    cross = np.zeros((n, npair))
    for bi, (p2, q2) in enumerate(pairs):
        cross[:, bi] = -mn4 * dp[p2, q2, :]
    q[:n, n:] = cross
    q[n:, :n] = cross.T
    return q


def harnack_value(pack, alpha, Phi):
    """B-style Harnack quadratic form at a one-form and a two-form given in
    coordinate components (lowered)."""
    mj = pack.mj
    gi = mj.g_inv_val
    mn4 = pack.m + mj.n - 4.0
    ar = gi @ np.asarray(alpha, dtype=float)
    phir = gi @ np.asarray(Phi, dtype=float) @ gi
    return (
        mn4 * float(ar @ pack.b_w @ ar)
        - mn4 * float(np.einsum("ijc,ij,c->", pack.dp_w.value, phir, ar))
        + 0.25 * float(np.einsum("ijkl,ij,kl->", pack.a_w.value, phir, phir))
    )
