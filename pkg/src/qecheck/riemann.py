"""Pointwise Riemannian geometry of a coordinate chart.

Everything is computed from order-4 jets of the metric components, so all
curvature quantities and their covariant derivatives are exact to rounding.

Conventions (fixed once, calibrated against the unit round sphere):

* ``Rm[i,j,k,l]`` is the lowered curvature with ``Rm = g_ik g_jl - g_il g_jk``
  on the unit sphere, i.e. ``Rm(x,y,x,y) > 0`` for positive sectional
  curvature.  Equivalently ``[nabla_i, nabla_j] alpha_k = Rm[i,j,k,s] alpha^s``
  on one-forms.
* ``Ric[j,l] = g^{ik} Rm[i,j,k,l]`` (so the unit n-sphere has Ric=(n-1)g),
  ``R = tr_g Ric``.
* Kulkarni-Nomizu: ``(h ^ k)[i,j,a,b] = h_ia k_jb + h_jb k_ia - h_ib k_ja
  - h_ja k_ib``; on the unit sphere ``Rm - P ^ g = 0`` with the Schouten
  tensor ``P = (Ric - R g / (2(n-1))) / (n-2)``.
* Lambda^2 inner product sums over i<j (no double counting); the fiber
  metric on Lambda^2 T*M (x) TM is the product metric.
* The Laplacian is the trace of the Hessian; ``delta_phi`` contracts the
  leading form slot with positive sign, so ``delta_phi(du) = Lap u -
  <grad phi, grad u>``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, JetOrderError, NotPositiveDefiniteError
from .expr import eval_ja
from .jets import JA, inverse_matrix, jeinsum

SPD_RTOL = 1e-12  # smallest eigenvalue must exceed this times the largest


@dataclass
class TensorValue:
    """Dense tensor components at a point with conformal-weight bookkeeping.

    ``components`` holds the pointwise values; ``jets`` optionally carries
    the full JA so the tensor can be differentiated further.
    """

    components: np.ndarray
    valence: tuple  # (p, q) = (contravariant, covariant) slot counts
    weight: int = 0
    scale_tag: str = "base"
    jets: JA | None = field(default=None, repr=False)

    def to_scale(self, s_value, new_tag):
        """Re-express a weight-w density-valued tensor in the scale e^{2s} g."""
        return TensorValue(
            components=self.components * np.exp(self.weight * s_value),
            valence=self.valence,
            weight=self.weight,
            scale_tag=new_tag,
            jets=None,
        )


@dataclass
class MetricJet:
    """Metric, inverse, and Christoffel data as jets at one chart point."""

    n: int
    point: np.ndarray
    g: JA          # (n, n), order 4
    g_inv: JA      # (n, n), order 4
    gamma: JA      # (n, n, n), order 3, gamma[k, i, j] = Gamma^k_{ij}
    g_val: np.ndarray
    g_inv_val: np.ndarray
    sqrt_det: float
    compat_residual: float

    def onb(self):
        """Frame matrix E with E^T g E = I (columns = orthonormal vectors)."""
        chol = np.linalg.cholesky(self.g_val)
        return np.linalg.inv(chol).T


def metric_jet(g_exprs, point, order=4):
    """Evaluate the metric expressions and assemble Christoffel jets.

    ``g_exprs`` is an n x n nested sequence of ScalarExpr.  Raises
    NotPositiveDefiniteError when the smallest eigenvalue at the point is
    below SPD_RTOL times the largest.
    """
    point = np.asarray(point, dtype=float)
    n = len(g_exprs)
    cache = {}

    def entry(e):
        key = id(e)
        if key not in cache:
            cache[key] = eval_ja(e, point, order).c
        return cache[key]

    g = JA(np.stack([np.stack([entry(e) for e in row]) for row in g_exprs]),
           n, order)
    g = (g + g.transpose(1, 0)) * 0.5  # enforce exact symmetry
    g_val = g.value
    eigs = np.linalg.eigvalsh(g_val)
    if eigs[0] <= SPD_RTOL * max(eigs[-1], 0.0):
        raise NotPositiveDefiniteError(point, eigenvalues=eigs)
    g_inv = inverse_matrix(g)

    dg = g.grad()  # dg[c, i, j] = d_c g_ij, order 3
    brace = jeinsum("ijl->ijl", dg) + jeinsum("jil->ijl", dg) - jeinsum("lij->ijl", dg)
    gamma = 0.5 * jeinsum("kl,ijl->kij", g_inv, brace)

    # metric compatibility: nabla_c g_ij should vanish identically
    nabla_g = _cov_deriv_ja(g, gamma)
    compat = float(np.abs(nabla_g.value).max())

    return MetricJet(
        n=n,
        point=point,
        g=g,
        g_inv=g_inv,
        gamma=gamma,
        g_val=g_val,
        g_inv_val=g_inv.value,
        sqrt_det=float(np.sqrt(np.linalg.det(g_val))),
        compat_residual=compat,
    )


def _cov_deriv_ja(t, gamma):
    """Covariant derivative of a fully covariant jet tensor.

    New derivative index comes first: (nabla t)[c, i1..ik].
    """
    k = len(t.shape)
    out = t.grad()
    letters = "ijklmabd"
    idx = letters[:k]
    for s in range(k):
        src = idx[:s] + "e" + idx[s + 1 :]
        out = out - jeinsum(f"ec{idx[s]},{src}->c{idx}", gamma, t)
    return out


def covariant_derivative(t, mj):
    """nabla of a (0,k) TensorValue carrying jets; result is (0,k+1)."""
    if t.jets is None:
        raise JetOrderError("tensor carries no jets; cannot differentiate")
    if t.jets.order < 1:
        raise JetOrderError("insufficient jet order for a covariant derivative")
    out = _cov_deriv_ja(t.jets, mj.gamma)
    return TensorValue(
        components=out.value,
        valence=(0, len(t.components.shape) + 1),
        weight=t.weight,
        scale_tag=t.scale_tag,
        jets=out,
    )


def riemann_tensor(mj):
    """Lowered curvature Rm (with jets) and its covariant derivative."""
    gamma = mj.gamma
    dgamma = gamma.grad()  # [c, a, i, j] = d_c Gamma^a_{ij}
    # standard operator curvature: Rstd^a_{bij} = d_i G^a_{jb} - d_j G^a_{ib}
    #                                + G^a_{ic} G^c_{jb} - G^a_{jc} G^c_{ib}
    rstd = (
        jeinsum("iajb->abij", dgamma)
        - jeinsum("jaib->abij", dgamma)
        + jeinsum("aic,cjb->abij", gamma, gamma)
        - jeinsum("ajc,cib->abij", gamma, gamma)
    )
    rm = -jeinsum("lm,mkij->ijkl", mj.g, rstd)
    rm_t = TensorValue(rm.value, valence=(0, 4), weight=2, jets=rm)
    if rm.order < 1:
        return rm_t, None
    nabla_rm = _cov_deriv_ja(rm, gamma)
    nabla_t = TensorValue(nabla_rm.value, valence=(0, 5), weight=2, jets=nabla_rm)
    return rm_t, nabla_t


def ricci_scalar_schouten(rm, mj):
    """(Ric, R, P, J) from the lowered curvature; P needs n >= 3."""
    rm_ja = rm.jets if isinstance(rm, TensorValue) else rm
    ric = jeinsum("ik,ijkl->jl", mj.g_inv, rm_ja)
    r = jeinsum("jl,jl->", mj.g_inv, ric)
    if mj.n < 3:
        raise DimensionError("Schouten tensor undefined for n < 3")
    p = (ric - mj.g * (r * (1.0 / (2 * (mj.n - 1))))) * (1.0 / (mj.n - 2))
    j = jeinsum("ij,ij->", mj.g_inv, p)
    mk = lambda t, k: TensorValue(t.value, valence=(0, k), weight=0, jets=t)
    return mk(ric, 2), mk(r, 0), mk(p, 2), mk(j, 0)


def kulkarni_nomizu(h, k):
    """Kulkarni-Nomizu product of two symmetric (0,2) tensors (values or JA)."""

    def term(spec, a, b):
        if isinstance(a, JA) or isinstance(b, JA):
            return jeinsum(spec, a, b)
        return np.einsum(spec, a, b)

    return (
        term("ia,jb->ijab", h, k)
        + term("jb,ia->ijab", h, k)
        - term("ib,ja->ijab", h, k)
        - term("ja,ib->ijab", h, k)
    )


def weighted_divergence(t, mj, phi_jet=None):
    """delta_phi of a form-valued tensor: contract the leading slot.

    ``t`` is a JA or a TensorValue with jets, treated as a (0,k) tensor
    whose first index is the form slot being contracted.  ``phi_jet`` is a
    scalar JA (order >= 1) or None for the unweighted divergence.
    """
    ja = t.jets if isinstance(t, TensorValue) else t
    nab = _cov_deriv_ja(ja, mj.gamma)
    k = len(ja.shape)
    idx = "ijklmabd"[: k - 1]
    out = jeinsum(f"ca,ca{idx}->{idx}", mj.g_inv, nab)
    if phi_jet is not None:
        grad_phi_raised = mj.g_inv_val @ phi_jet.grad().value
        out = out - jeinsum(f"a,a{idx}->{idx}", grad_phi_raised, ja)
    return out


def jstack_grad(scalar_jet):
    """Gradient (lowered) of a scalar JA as a plain value vector."""
    return scalar_jet.grad().value


def hessian(scalar_jet, mj):
    """Covariant Hessian of a scalar JA (order >= 2), returned as JA."""
    return _cov_deriv_ja(scalar_jet.grad(), mj.gamma)


def laplacian(scalar_jet, mj):
    """Trace of the Hessian."""
    return jeinsum("ij,ij->", mj.g_inv, hessian(scalar_jet, mj))


def raise_index(t_val, mj, slot):
    """Raise one slot of a plain component array with g^{-1}."""
    t_val = np.asarray(t_val)
    k = t_val.ndim
    letters = "ijklmabd"[:k]
    src = letters[:slot] + "x" + letters[slot + 1 :]
    return np.einsum(f"{letters[slot]}x,{src}->{letters}", mj.g_inv_val, t_val)


def tensor_norm(t_val, mj):
    """g-norm of a fully covariant component array."""
    t_val = np.asarray(t_val)
    raised = t_val
    for s in range(t_val.ndim):
        raised = raise_index(raised, mj, s)
    return float(np.sqrt(abs(np.einsum(raised.reshape(-1), [0], t_val.reshape(-1), [0]))))


def to_onb(t_val, frame):
    """Components of a fully covariant tensor in the orthonormal frame."""
    out = np.asarray(t_val)
    k = out.ndim
    letters = "ijklmabd"[:k]
    for s in range(k):
        src = letters[:s] + "x" + letters[s + 1 :]
        out = np.einsum(f"x{letters[s]},{src}->{letters}", frame, out)
    return out
