"""Tractor calculus layer: standard and k-form tractors in a scale, the
modified connection and splitting operator of a weighted measure, the scale
tractor, tractor curvature, and the curvature-like bilinear form on adjoint
tractors built from the weighted Bach tensor.

Slot conventions.  A standard tractor is written (sigma, omega, rho) with
sigma the weight +1 top slot, omega a *vector* middle slot and rho the
weight -1 bottom slot; the canonical projector is X = (0, 0, 1) and the
scale-dependent injectors are Y = (1, 0, 0), Z(u) = (0, u, 0).  The tractor
metric is <I, I> = 2 sigma rho + |omega|^2.  k-form slots are stored as
lowered antisymmetric arrays.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ScaleMismatchError
from .jets import JA, jeinsum
from .riemann import laplacian
from .smms import check_admissible, weighted_curvature


# ---------------------------------------------------------------------------
# standard tractors


@dataclass
class Tractor:
    sigma: float
    omega: np.ndarray  # raised components, shape (n,)
    rho: float
    scale_tag: str = "base"

    @property
    def n(self):
        return len(self.omega)

    def as_vector(self):
        return np.concatenate(([self.sigma], self.omega, [self.rho]))

    @staticmethod
    def from_vector(vec, scale_tag="base"):
        return Tractor(float(vec[0]), np.asarray(vec[1:-1], dtype=float),
                       float(vec[-1]), scale_tag)


def x_tractor(n, scale_tag="base"):
    return Tractor(0.0, np.zeros(n), 1.0, scale_tag)


def y_tractor(n, scale_tag="base"):
    return Tractor(1.0, np.zeros(n), 0.0, scale_tag)


def z_tractor(u, scale_tag="base"):
    return Tractor(0.0, np.asarray(u, dtype=float), 0.0, scale_tag)


def tractor_inner(a, b, g_val):
    """Tractor metric, polarized: sigma_a rho_b + sigma_b rho_a + g(w_a, w_b)."""
    if a.scale_tag != b.scale_tag:
        raise ScaleMismatchError(a.scale_tag, b.scale_tag)
    return float(a.sigma * b.rho + b.sigma * a.rho + a.omega @ g_val @ b.omega)


def transform(t, s_jet, mj, new_tag=None):
    """Slot transformation under g -> e^{2s} g; gradients taken in the old
    scale.  The top nonvanishing slot only rescales."""
    s0 = float(s_jet.value)
    ds = s_jet.grad().value          # lowered
    grad_s = mj.g_inv_val @ ds       # raised
    ns2 = float(ds @ grad_s)
    sigma = math.exp(s0) * t.sigma
    omega = math.exp(-s0) * (t.omega + t.sigma * grad_s)
    rho = math.exp(-s0) * (t.rho - float(ds @ t.omega) - 0.5 * ns2 * t.sigma)
    return Tractor(sigma, omega, rho, new_tag or t.scale_tag + "*conf")


# ---------------------------------------------------------------------------
# tractor fields as jets


@dataclass
class TractorJet:
    """Tractor field germ: slot jets at a point (omega raised)."""

    sigma: JA
    omega: JA  # shape (n,)
    rho: JA
    scale_tag: str = "base"

    def value(self):
        return Tractor(float(self.sigma.value), self.omega.value.copy(),
                       float(self.rho.value), self.scale_tag)


def constant_tractor_field(t, n, order):
    mkc = lambda val: JA.constant(val, n, order)
    return TractorJet(mkc(t.sigma), mkc(np.asarray(t.omega, float)), mkc(t.rho),
                      t.scale_tag)


def w_connection_jets(pack, tf):
    """Covariant derivative slots of a tractor field under the modified
    connection; leading index is the derivative direction.

    sigma'_i = d_i sigma - g_ia omega^a
    omega'^a_i = nabla_i omega^a + sigma P_i^a + rho delta_i^a
    rho'_i = d_i rho - P_ib omega^b
    """
    mj = pack.mj
    p = pack.p_w
    n = mj.n
    dsig = tf.sigma.grad()
    dom = tf.omega.grad()  # [i, a]
    drho = tf.rho.grad()
    sig_p = jeinsum("ia,ab->ib", p, mj.g_inv) * tf.sigma  # [i, a-raised]
    new_sigma = dsig - jeinsum("ia,a->i", mj.g, tf.omega)
    gamma_corr = jeinsum("aib,b->ia", mj.gamma, tf.omega)
    eye = np.eye(n)
    new_omega = dom + gamma_corr + sig_p + jeinsum("ia,->ia", eye, tf.rho)
    new_rho = drho - jeinsum("ib,b->i", p, tf.omega)
    return TractorJet(new_sigma, new_omega, new_rho, tf.scale_tag)


def w_connection(pack, tf):
    """The n directional covariant derivatives as plain Tractors."""
    d = w_connection_jets(pack, tf)
    return [
        Tractor(float(d.sigma.value[i]), d.omega.value[i].copy(),
                float(d.rho.value[i]), tf.scale_tag)
        for i in range(pack.mj.n)
    ]


def w_laplacian_slots(pack, tf, phi_jet):
    """delta_phi d of a tractor field under the modified connection."""
    mj = pack.mj
    first = w_connection_jets(pack, tf)
    p_val = pack.p_w.value
    p_raised = p_val @ mj.g_inv_val  # P_i^a
    gamma = mj.gamma

    def second(slot_sigma, slot_omega, slot_rho):
        # covariant derivative of the T*M (x) tractor field, direction i
        ds = slot_sigma.grad()  # [i, j]
        do = slot_omega.grad()  # [i, j, a]
        dr = slot_rho.grad()
        corr = lambda t, spec: jeinsum(spec, gamma, t)
        sigma2 = ds - corr(slot_sigma, "kij,k->ij") - jeinsum(
            "ia,ja->ij", mj.g, slot_omega
        )
        omega2 = (
            do
            + corr(slot_omega, "aib,jb->ija")
            - corr(slot_omega, "kij,ka->ija")
            + jeinsum("ia,j->ija", p_raised, slot_sigma)
            + jeinsum("ia,j->ija", np.eye(mj.n), slot_rho)
        )
        rho2 = dr - corr(slot_rho, "kij,k->ij") - jeinsum(
            "ib,jb->ij", p_val, slot_omega
        )
        return sigma2, omega2, rho2

    sigma2, omega2, rho2 = second(first.sigma, first.omega, first.rho)
    gi = mj.g_inv
    phi_raised = mj.g_inv_val @ phi_jet.grad().value
    lap = lambda t2, t1, spec2, spec1: jeinsum(spec2, gi, t2) - jeinsum(
        spec1, phi_raised, t1
    )
    return TractorJet(
        lap(sigma2, first.sigma, "ij,ij->", "i,i->"),
        lap(omega2, first.omega, "ij,ija->a", "i,ia->a"),
        lap(rho2, first.rho, "ij,ij->", "i,i->"),
        tf.scale_tag,
    )


# ---------------------------------------------------------------------------
# scale tractor and splitting operator


def scale_tractor(pack):
    """The measure's scale tractor (v, grad v, ytilde) and the plain
    splitting-operator tractor of the density v."""
    sj = pack.sj
    mj = pack.mj
    n = mj.n
    grad_v = mj.g_inv_val @ sj.v.grad().value
    jt = Tractor(
        float(sj.v.value),
        grad_v,
        float(
            -(laplacian(sj.v, mj).value + sj.r.value * sj.v.value / (2 * (n - 1))) / n
        ),
        sj.spec.scale_tag,
    )
    tilde = Tractor(jt.sigma, jt.omega.copy(), float(pack.ytilde.value),
                    sj.spec.scale_tag)
    return tilde, jt


def scale_tractor_jets(pack):
    """Scale tractor with jet-valued slots (for derivative consumers)."""
    sj = pack.sj
    mj = pack.mj
    grad_v = jeinsum("ab,b->a", mj.g_inv, sj.v.grad())
    return TractorJet(sj.v, grad_v, pack.ytilde, sj.spec.scale_tag)


def w_tractor_D(pack, f_jet, w):
    """Splitting operator on a weight-w density: slot jets
    ( w(m+n+2w-2) f, (m+n+2w-2) grad f, -(Lap_phi f + w J^W f) )."""
    sj = pack.sj
    mj = pack.mj
    m, n = pack.m, mj.n
    c = m + n + 2 * w - 2
    grad_f = jeinsum("ab,b->a", mj.g_inv, f_jet.grad())
    lap_phi = laplacian(f_jet, mj) - jeinsum(
        "a,a->", mj.g_inv_val @ sj.phi.grad().value, f_jet.grad()
    )
    return TractorJet(
        f_jet * (w * c),
        grad_f * c,
        -(lap_phi + pack.j_w * f_jet * w),
        sj.spec.scale_tag,
    )


def w_tractor_D_tractor(pack, tf, w, phi_jet=None):
    """Splitting operator on a standard-tractor field of weight w.

    Returns the three outer slots, each itself a tractor-valued object:
    (top, middle[i], bottom) with middle indexed by direction.
    """
    m, n = pack.m, pack.mj.n
    c = m + n + 2 * w - 2
    phi_jet = phi_jet if phi_jet is not None else pack.sj.phi
    mid = w_connection_jets(pack, tf)
    lap = w_laplacian_slots(pack, tf, phi_jet)
    scale = lambda t, fac: TractorJet(t.sigma * fac, t.omega * fac, t.rho * fac,
                                      t.scale_tag)
    top = scale(tf, w * c)
    middle = scale(mid, c)
    bottom = TractorJet(
        -(lap.sigma + tf.sigma * (pack.j_w * w)),
        -(lap.omega + tf.omega * (pack.j_w * w)),
        -(lap.rho + tf.rho * (pack.j_w * w)),
        tf.scale_tag,
    )
    return top, middle, bottom


def parallel_candidate(pack, u_jet):
    """I = (1/(m+n)) D^W u as a tractor field germ (slots are jets)."""
    check_admissible(pack.m, pack.mj.n, need=("m+n-2", "m+n-1", "m+n"))
    d = w_tractor_D(pack, u_jet, w=1)
    fac = 1.0 / (pack.m + pack.mj.n)
    return TractorJet(d.sigma * fac, d.omega * fac, d.rho * fac, d.scale_tag)


def parallel_residual(pack, u_jet):
    """(|nabla^W I|, |<I, Jtilde>|) for the candidate built from u."""
    mj = pack.mj
    cand = parallel_candidate(pack, u_jet)
    deriv = w_connection_jets(pack, cand)
    g = mj.g_val
    gi = mj.g_inv_val
    norm2 = (
        float(np.einsum("ij,i,j->", gi, deriv.sigma.value, deriv.sigma.value))
        + float(np.einsum("ij,ia,jb,ab->", gi, deriv.omega.value,
                          deriv.omega.value, g))
        + float(np.einsum("ij,i,j->", gi, deriv.rho.value, deriv.rho.value))
    )
    jt, _ = scale_tractor(pack)
    inner = tractor_inner(cand.value(), jt, g)
    return math.sqrt(max(norm2, 0.0)), abs(inner)


def check_parallel_correspondence(spec, mu, u_expr, points):
    """Max parallelism and orthogonality residuals of the candidate tractor
    of the scale u over the sampled points."""
    from .expr import eval_ja
    from .smms import evaluate

    worst_par, worst_orth = 0.0, 0.0
    for pt in points:
        sj = evaluate(spec, pt)
        pack = weighted_curvature(sj, mu)
        u_jet = eval_ja(u_expr, pt, 4)
        par, orth = parallel_residual(pack, u_jet)
        worst_par = max(worst_par, par)
        worst_orth = max(worst_orth, orth)
    return worst_par, worst_orth


# ---------------------------------------------------------------------------
# k-form tractors


@dataclass
class KFormTractor:
    """Degree-k tractor form in slot notation (alpha; Phi | phi; beta):
    alpha, beta are (k-1)-forms, Phi a k-form, phi a (k-2)-form, all stored
    as dense antisymmetric lowered arrays ((k-2)-slot absent for k < 2)."""

    k: int
    alpha: np.ndarray
    Phi: np.ndarray
    phi: object  # ndarray for k >= 2, else None
    beta: np.ndarray
    scale_tag: str = "base"


def _wedge1(a, t):
    """Wedge of a 1-form with a dense antisymmetric j-form."""
    t = np.asarray(t, dtype=float)
    j = t.ndim
    out = np.multiply.outer(a, t)
    if j == 0:
        return out
    letters = "ijklmb"[: j + 1]
    acc = np.einsum(f"{letters}->{letters}", out).copy()
    for s in range(1, j + 1):
        perm = letters[s] + letters[:s] + letters[s + 1 :]
        acc += (-1) ** s * np.einsum(f"{letters}->{perm}", out)
    return acc


def _form_inner(a, b, g_inv):
    """Inner product of dense antisymmetric j-forms, i1<...<ij sum."""
    a, b = np.asarray(a, float), np.asarray(b, float)
    j = a.ndim
    if j == 0:
        return float(a * b)
    raised = b
    letters = "ijklmb"[:j]
    for s in range(j):
        src = letters[:s] + "x" + letters[s + 1 :]
        raised = np.einsum(f"{letters[s]}x,{src}->{letters}", g_inv, raised)
    return float(np.tensordot(a, raised, axes=j) / math.factorial(j))


def _check_kform(a, b):
    if a.k != b.k:
        raise ScaleMismatchError(f"degree {a.k}", f"degree {b.k}")
    if a.scale_tag != b.scale_tag:
        raise ScaleMismatchError(a.scale_tag, b.scale_tag)


def kform_inner(a, b, mj):
    """Polarized degree-k tractor metric: <Phi,Phi'> - <phi,phi'> +
    <alpha,beta'> + <beta,alpha'>."""
    _check_kform(a, b)
    gi = mj.g_inv_val
    out = _form_inner(a.Phi, b.Phi, gi)
    if a.k >= 2:
        out -= _form_inner(a.phi, b.phi, gi)
    out += _form_inner(a.alpha, b.beta, gi) + _form_inner(a.beta, b.alpha, gi)
    return out


def kform_contract(direction, kf, u=None):
    """Contraction with X, Y or Z(u); returns a degree-(k-1) form tractor.

    Implemented for k >= 2 (results of degree >= 1).
    """
    k = kf.k
    if k < 2:
        raise ValueError("contraction implemented for degree >= 2 only")
    n = kf.Phi.shape[0]

    def zl(j):
        if j < 0:
            return None
        return np.zeros((n,) * j) if j >= 1 else 0.0

    def iu(t):
        if t is None or np.ndim(t) == 0:
            return None if t is None else 0.0
        return np.tensordot(np.asarray(u, float), np.asarray(t, float), axes=(0, 0))

    if direction == "X":
        return KFormTractor(k - 1, zl(k - 2), np.asarray(kf.alpha, float),
                            zl(k - 3), kf.phi, kf.scale_tag)
    if direction == "Y":
        return KFormTractor(k - 1, -np.asarray(kf.phi, float),
                            np.asarray(kf.beta, float), zl(k - 3), zl(k - 2),
                            kf.scale_tag)
    if direction == "Z":
        phi_c = iu(kf.phi) if k >= 3 else zl(k - 3)
        return KFormTractor(k - 1, -iu(kf.alpha), iu(kf.Phi), phi_c,
                            -iu(kf.beta), kf.scale_tag)
    raise ValueError(f"unknown contraction direction {direction!r}")


def kform_connection(pack, slots_jets, k):
    """Directional covariant derivatives of a k-form tractor field under the
    modified connection; returns per-direction KFormTractors.

    ``slots_jets`` is a dict with JA entries alpha, Phi, phi, beta (phi may
    be None for k < 2).
    """
    from .riemann import _cov_deriv_ja

    mj = pack.mj
    n = mj.n
    p_val = pack.p_w.value
    alpha, Phi, phi, beta = (slots_jets[s] for s in ("alpha", "Phi", "phi", "beta"))
    cov = lambda t: _cov_deriv_ja(t, mj.gamma).value if t is not None else None
    d_alpha, d_Phi, d_phi, d_beta = cov(alpha), cov(Phi), cov(phi), cov(beta)
    a_v = alpha.value
    F_v = Phi.value
    f_v = phi.value if phi is not None else None
    b_v = beta.value
    p_sharp = p_val @ mj.g_inv_val  # P(y)^a in row y
    def reduction(z_sharp, z_low):
        # iota_z Phi - g(z, .) ^ phi for a vector z (lowered row z_low)
        red = np.tensordot(z_sharp, F_v, axes=(0, 0))
        if f_v is not None:
            red = red - _wedge1(z_low, f_v)
        return red

    out = []
    for y in range(n):
        gy = mj.g_val[y]
        e_y = np.eye(n)[y]
        top = d_alpha[y] - reduction(e_y, gy)
        mid = d_Phi[y] + _wedge1(p_val[y], a_v) + _wedge1(gy, b_v)
        if f_v is not None:
            low_phi = d_phi[y] - np.tensordot(p_sharp[y], a_v, axes=(0, 0)) + b_v[y]
        else:
            low_phi = None
        bot = d_beta[y] - reduction(p_sharp[y], p_val[y])
        out.append(KFormTractor(k, top, mid, low_phi, bot, pack.sj.spec.scale_tag))
    return out


# ---------------------------------------------------------------------------
# adjoint tractors (k = 2) and the weighted Weyl bilinear form


@dataclass
class AdjointTractor:
    """2-form tractor in slots (alpha; Phi | phi; beta), forms lowered."""

    alpha: np.ndarray  # (n,)
    Phi: np.ndarray    # (n, n) antisymmetric
    phi: float
    beta: np.ndarray   # (n,)
    scale_tag: str = "base"

    @property
    def n(self):
        return len(self.alpha)


def wedge(t1, t2, g_val):
    """I ^ J as an adjoint tractor in the common scale."""
    if t1.scale_tag != t2.scale_tag:
        raise ScaleMismatchError(t1.scale_tag, t2.scale_tag)
    w1 = g_val @ t1.omega
    w2 = g_val @ t2.omega
    alpha = t1.sigma * w2 - t2.sigma * w1
    Phi = np.outer(w1, w2) - np.outer(w2, w1)
    phi = t1.sigma * t2.rho - t2.sigma * t1.rho
    beta = t1.rho * w2 - t2.rho * w1
    return AdjointTractor(alpha, Phi, float(phi), beta, t1.scale_tag)


def adjoint_act(a, t, g_inv_val):
    """Contraction of an adjoint tractor with a standard tractor:
    (I1 ^ I2)(I) = <I, I1> I2 - <I, I2> I1 in slot form."""
    alpha_w = float(a.alpha @ t.omega)
    beta_w = float(a.beta @ t.omega)
    sigma = -t.sigma * a.phi - alpha_w
    mid_form = t.sigma * a.beta + np.einsum("ab,a->b", a.Phi, t.omega) + t.rho * a.alpha
    omega = g_inv_val @ mid_form
    rho = t.rho * a.phi - beta_w
    return Tractor(float(sigma), omega, float(rho), t.scale_tag)


def adjoint_inner(a, b, g_inv_val):
    """Adjoint tractor metric <A,B> = <Phi,Phi'> - phi phi' + <alpha,beta'>
    + <beta,alpha'> (Lambda^2 products over i<j)."""
    if a.scale_tag != b.scale_tag:
        raise ScaleMismatchError(a.scale_tag, b.scale_tag)
    phi_term = 0.5 * float(np.einsum("ij,ia,jb,ab->", a.Phi, g_inv_val, g_inv_val,
                                     b.Phi))
    return (
        phi_term
        - a.phi * b.phi
        + float(a.alpha @ g_inv_val @ b.beta)
        + float(a.beta @ g_inv_val @ b.alpha)
    )


def adjoint_pairs(n):
    return [(i, j) for i in range(n) for j in range(i + 1, n)]


def adjoint_dim(n):
    return 2 * n + 1 + n * (n - 1) // 2


def adjoint_vec(a):
    pairs = adjoint_pairs(a.n)
    return np.concatenate(
        [a.alpha, [a.Phi[i, j] for (i, j) in pairs], [a.phi], a.beta]
    )


def adjoint_unvec(vec, n, scale_tag="base"):
    pairs = adjoint_pairs(n)
    alpha = np.asarray(vec[:n], dtype=float)
    Phi = np.zeros((n, n))
    for idx, (i, j) in enumerate(pairs):
        Phi[i, j] = vec[n + idx]
        Phi[j, i] = -vec[n + idx]
    phi = float(vec[n + len(pairs)])
    beta = np.asarray(vec[n + len(pairs) + 1 :], dtype=float)
    return AdjointTractor(alpha, Phi, phi, beta, scale_tag)


def adjoint_basis(n, scale_tag="base"):
    dim = adjoint_dim(n)
    eye = np.eye(dim)
    return [adjoint_unvec(eye[i], n, scale_tag) for i in range(dim)]


def adjoint_transform_matrix(s_jet, mj):
    """Matrix of the induced 2-form-tractor slot change under g -> e^{2s}g
    (old-scale slot coordinates to new-scale slot coordinates)."""
    n = mj.n
    s0 = float(s_jet.value)
    ds = s_jet.grad().value
    grad_s = mj.g_inv_val @ ds
    ns2 = float(ds @ grad_s)
    dim = adjoint_dim(n)
    cols = []
    for e in np.eye(dim):
        a = adjoint_unvec(e, n)
        alpha_h = math.exp(2 * s0) * a.alpha
        Phi_h = math.exp(2 * s0) * (a.Phi + np.outer(ds, a.alpha)
                                    - np.outer(a.alpha, ds))
        phi_h = a.phi - float(a.alpha @ grad_s)
        beta_h = (
            a.beta
            - a.Phi.T @ grad_s
            - phi_h * ds
            - 0.5 * ns2 * a.alpha
        )
        cols.append(adjoint_vec(AdjointTractor(alpha_h, Phi_h, phi_h, beta_h)))
    return np.stack(cols, axis=1)


# ---------------------------------------------------------------------------
# tractor curvature


@dataclass
class TractorCurvature:
    """The two nonzero slots of the modified connection's curvature in
    vector form: R(x,y) = (0; A(x,y) | 0; -dP(x,y))."""

    a_w: np.ndarray   # (n, n, n, n)
    dp_w: np.ndarray  # (n, n, n)
    scale_tag: str = "base"

    def matrix(self, i, j, g_inv_val):
        """(n+2) x (n+2) action of R(e_i, e_j) on slot vectors."""
        n = self.dp_w.shape[-1]
        m = np.zeros((n + 2, n + 2))
        m[1 : n + 1, 0] = -(g_inv_val @ self.dp_w[i, j])
        # omega block: [A(i,j) w]^a = g^{al} A[i,j,b,l] w^b
        m[1 : n + 1, 1 : n + 1] = np.einsum("al,bl->ab", g_inv_val, self.a_w[i, j])
        m[n + 1, 1 : n + 1] = self.dp_w[i, j]
        return m

    def act(self, i, j, t, g_inv_val):
        vec = self.matrix(i, j, g_inv_val) @ t.as_vector()
        return Tractor.from_vector(vec, t.scale_tag)


def tractor_curvature(pack):
    return TractorCurvature(
        a_w=pack.a_w.value.copy(),
        dp_w=pack.dp_w.value.copy(),
        scale_tag=pack.sj.spec.scale_tag,
    )


def connection_matrices(mj, p_w_val):
    """Coefficient matrices C_i with nabla^W_i t = d_i t + C_i t on slot
    vectors (sigma, omega^1..omega^n, rho)."""
    n = mj.n
    p = np.asarray(p_w_val, dtype=float)
    p_raised = p @ mj.g_inv_val
    mats = []
    for i in range(n):
        c = np.zeros((n + 2, n + 2))
        c[0, 1 : n + 1] = -mj.g_val[i]
        c[1 : n + 1, 0] = p_raised[i]
        c[1 : n + 1, 1 : n + 1] = mj.gamma.value[:, i, :]
        c[1 : n + 1, n + 1] = np.eye(n)[i]
        c[n + 1, 1 : n + 1] = -p[i]
        mats.append(c)
    return mats


def curvature_derivative_slots(pack):
    """Adjoint-valued slots of nabla^W R^W: arrays indexed [c, i, j, ...].

    Returns dict with alpha[c,i,j,l], Phi[c,i,j,k,l], phi[c,i,j],
    beta[c,i,j,l] (the covariant derivative of the curvature, in 2-form
    tractor slots, for each direction c and curvature arguments i, j).
    """
    mj = pack.mj
    a_val = pack.a_w.value
    dp_val = pack.dp_w.value
    na = pack.nabla_a_w.value   # [c,i,j,k,l]
    ndp = pack.nabla_dp_w.value  # [c,i,j,l]
    g = mj.g_val
    p_raised = pack.p_w.value @ mj.g_inv_val  # P_c^a
    alpha = -np.einsum("ijcl->cijl", a_val)
    Phi = na - (
        np.einsum("ck,ijl->cijkl", g, dp_val)
        - np.einsum("cl,ijk->cijkl", g, dp_val)
    )
    phi = -np.einsum("ijc->cij", dp_val)
    beta = -ndp - np.einsum("ca,ijal->cijl", p_raised, a_val)
    return {"alpha": alpha, "Phi": Phi, "phi": phi, "beta": beta}


def adjoint_slots_act(alpha, Phi, phi, beta, t, g_inv_val):
    """Contract adjoint slots (given as arrays over extra leading indices)
    with a standard tractor; returns slot arrays of the tractor result."""
    omega = t.omega
    sigma_out = -t.sigma * phi - np.einsum("...a,a->...", alpha, omega)
    mid = (
        t.sigma * beta
        + np.einsum("...ab,a->...b", Phi, omega)
        + t.rho * alpha
    )
    omega_out = np.einsum("...b,ba->...a", mid, g_inv_val)
    rho_out = t.rho * phi - np.einsum("...a,a->...", beta, omega)
    return sigma_out, omega_out, rho_out


# ---------------------------------------------------------------------------
# the weighted Weyl bilinear form


@dataclass
class WeylTractor:
    """Curvature-like bilinear form on adjoint tractors, stored by its two
    independent slot tensors: (m+n-4) * (A, dP) and the weighted Bach B."""

    factor: float       # m + n - 4
    a_w: np.ndarray
    dp_w: np.ndarray
    b_w: np.ndarray
    g_val: np.ndarray
    g_inv_val: np.ndarray
    scale_tag: str = "base"

    def eval(self, t1, t2):
        """W(T1, T2) for adjoint tractors via the slot pairing."""
        gi = self.g_inv_val
        phi1 = np.einsum("ia,jb,ab->ij", gi, gi, t1.Phi)
        phi2 = np.einsum("ia,jb,ab->ij", gi, gi, t2.Phi)
        a1 = gi @ t1.alpha
        a2 = gi @ t2.alpha
        s_a = 0.25 * np.einsum("ijkl,ij,kl->", self.a_w, phi1, phi2)
        s_b = float(a1 @ self.b_w @ a2)
        s_dp = 0.5 * (
            np.einsum("ijc,ij,c->", self.dp_w, phi1, a2)
            + np.einsum("ijc,ij,c->", self.dp_w, phi2, a1)
        )
        return self.factor * s_a + s_b - self.factor * s_dp

    def matrix(self):
        """Gram matrix over the adjoint slot basis [alpha | Phi-pairs | phi
        | beta]; the phi and beta rows and columns vanish identically."""
        n = self.g_val.shape[0]
        gi = self.g_inv_val
        pairs = adjoint_pairs(n)
        # raised components of the unit Phi-slot basis elements
        g2 = np.stack(
            [np.outer(gi[:, p], gi[:, q]) - np.outer(gi[:, q], gi[:, p])
             for (p, q) in pairs]
        )
        dim = adjoint_dim(n)
        w = np.zeros((dim, dim))
        npair = len(pairs)
        sl_a = slice(0, n)
        sl_f = slice(n, n + npair)
        w[sl_a, sl_a] = gi @ self.b_w @ gi
        w[sl_f, sl_f] = 0.25 * self.factor * np.einsum(
            "ijkl,aij,bkl->ab", self.a_w, g2, g2
        )
        cross = -0.5 * self.factor * np.einsum("ijc,aij,cb->ab", self.dp_w, g2, gi)
        w[sl_f, sl_a] = cross
        w[sl_a, sl_f] = cross.T
        return w

    def norm(self):
        return float(np.linalg.norm(self.matrix()))


def weighted_weyl(pack):
    m, n = pack.m, pack.mj.n
    check_admissible(m, n)
    return WeylTractor(
        factor=m + n - 4.0,
        a_w=pack.a_w.value.copy(),
        dp_w=pack.dp_w.value.copy(),
        b_w=pack.b_w.copy(),
        g_val=pack.mj.g_val.copy(),
        g_inv_val=pack.mj.g_inv_val.copy(),
        scale_tag=pack.sj.spec.scale_tag,
    )


def annihilation_check(pack, tractor):
    """Max contraction of the tractor into either argument slot pair of the
    weighted Weyl form.

    Normalized by 1 + |W| |I| so the result reads as an absolute residual
    when the form itself vanishes and as a relative one otherwise.
    """
    w = weighted_weyl(pack)
    n = pack.mj.n
    wmat = w.matrix()
    cols = []
    for e in np.eye(n + 2):
        other = Tractor.from_vector(e, tractor.scale_tag)
        cols.append(adjoint_vec(wedge(tractor, other, pack.mj.g_val)))
    mmat = np.stack(cols, axis=1)
    first = np.abs(mmat.T @ wmat).max()
    second = np.abs(wmat @ mmat).max()
    scale = np.abs(wmat).max() * np.linalg.norm(tractor.as_vector())
    return max(first, second) / (1.0 + scale)
