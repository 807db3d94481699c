"""Independent numerical oracles used to freeze expected values.

Nothing here touches the jet pipeline: curvature comes from central finite
differences of metric samples, covariant derivatives from numerically
integrated parallel transport, and the rotationally symmetric
quasi-Einstein family from an off-the-shelf ODE integrator.
"""

from __future__ import annotations

import numpy as np

from qecheck.expr import eval_ja


def metric_values(spec, x):
    return np.array(
        [[eval_ja(e, x, 0).value for e in row] for row in spec.g_exprs]
    )


def fd_christoffel(spec, x, h=1e-5):
    """Christoffel symbols from central differences of metric samples."""
    n = spec.n
    x = np.asarray(x, dtype=float)
    dg = np.empty((n, n, n))
    for c in range(n):
        e = np.eye(n)[c] * h
        dg[c] = (metric_values(spec, x + e) - metric_values(spec, x - e)) / (2 * h)
    ginv = np.linalg.inv(metric_values(spec, x))
    brace = (
        np.einsum("ijl->ijl", dg)
        + np.einsum("jil->ijl", dg)
        - np.einsum("lij->ijl", dg)
    )
    return 0.5 * np.einsum("kl,ijl->kij", ginv, brace)


def fd_riemann(spec, x, h=1e-4):
    """Lowered curvature by finite differences, in the same convention as
    the library (positive sectional curvature on the round sphere)."""
    n = spec.n
    x = np.asarray(x, dtype=float)

    def gamma_at(y):
        dg = np.empty((n, n, n))
        for c in range(n):
            e = np.eye(n)[c] * h
            dg[c] = (metric_values(spec, y + e) - metric_values(spec, y - e)) / (
                2 * h
            )
        ginv = np.linalg.inv(metric_values(spec, y))
        brace = (
            np.einsum("ijl->ijl", dg)
            + np.einsum("jil->ijl", dg)
            - np.einsum("lij->ijl", dg)
        )
        return 0.5 * np.einsum("kl,ijl->kij", ginv, brace)

    gamma0 = gamma_at(x)
    dgamma = np.empty((n, n, n, n))
    for c in range(n):
        e = np.eye(n)[c] * h
        dgamma[c] = (gamma_at(x + e) - gamma_at(x - e)) / (2 * h)
    rstd = (
        np.einsum("iajb->abij", dgamma)
        - np.einsum("jaib->abij", dgamma)
        + np.einsum("aic,cjb->abij", gamma0, gamma0)
        - np.einsum("ajc,cib->abij", gamma0, gamma0)
    )
    return -np.einsum("lm,mkij->ijkl", metric_values(spec, x), rstd)


def fd_scalar_curvature(spec, x, h=1e-4):
    g = metric_values(spec, x)
    gi = np.linalg.inv(g)
    rm = fd_riemann(spec, x, h=h)
    ric = np.einsum("ik,ijkl->jl", gi, rm)
    return float(np.einsum("jl,jl->", gi, ric))


def transport_cov_derivative(spec, x, t_field, direction, h=1e-3, steps=8):
    """Covariant derivative of a (0,k) tensor field along a coordinate
    direction via numerically parallel-transported frames.

    ``t_field(y)`` returns dense components at y.  Frames are transported
    with RK4 on the transport equation and the derivative is a central
    difference of the frame-evaluated scalar.
    """
    n = spec.n
    x = np.asarray(x, dtype=float)

    def gamma_at(y, hh=1e-5):
        dg = np.empty((n, n, n))
        for c in range(n):
            e = np.eye(n)[c] * hh
            dg[c] = (metric_values(spec, y + e) - metric_values(spec, y - e)) / (
                2 * hh
            )
        ginv = np.linalg.inv(metric_values(spec, y))
        brace = (
            np.einsum("ijl->ijl", dg)
            + np.einsum("jil->ijl", dg)
            - np.einsum("lij->ijl", dg)
        )
        return 0.5 * np.einsum("kl,ijl->kij", ginv, brace)

    e_dir = np.eye(n)[direction]

    def transport(frames, t0, t1):
        # dX^k/dt = -Gamma^k_{dir b} X^b along the coordinate line
        m = steps
        dt = (t1 - t0) / m
        for s in range(m):
            t = t0 + s * dt

            def rate(tt, f):
                gam = gamma_at(x + (tt) * e_dir)
                return -np.einsum("kb,ab->ak", gam[:, direction, :], f)

            k1 = rate(t, frames)
            k2 = rate(t + dt / 2, frames + dt / 2 * k1)
            k3 = rate(t + dt / 2, frames + dt / 2 * k2)
            k4 = rate(t + dt, frames + dt * k3)
            frames = frames + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
        return frames

    frames0 = np.eye(n)  # rows = coordinate frame vectors at x
    plus = transport(frames0.copy(), 0.0, h)
    minus = transport(frames0.copy(), 0.0, -h)

    def contract(y, frames):
        t = t_field(y)
        k = t.ndim
        out = t
        for s in range(k):
            out = np.tensordot(frames, out, axes=(1, s))
            out = np.moveaxis(out, 0, s)
        return out

    val_plus = contract(x + h * e_dir, plus)
    val_minus = contract(x - h * e_dir, minus)
    return (val_plus - val_minus) / (2 * h)


def integrate_qe_profile(n, m, lam, y0, r_span, mu_check=None):
    """Integrate the radial quasi-Einstein system for a rotationally
    symmetric chart g = dr^2 + psi(r)^2 ghat and density v(r):

        psi'' = -(n-2)(psi'^2 - 1)/psi - lam psi - m psi' v'/v
        v''   = -(v/m)(lam + (n-1) psi''/psi)

    y0 = (psi, psi', v, v').  Returns the endpoint state."""
    from scipy.integrate import solve_ivp

    def rhs(_r, y):
        psi, dpsi, v, dv = y
        ddpsi = -(n - 2) * (dpsi**2 - 1) / psi - lam * psi - m * dpsi * dv / v
        ddv = -(v / m) * (lam + (n - 1) * ddpsi / psi)
        return [dpsi, ddpsi, dv, ddv]

    sol = solve_ivp(rhs, r_span, list(y0), rtol=1e-12, atol=1e-14)
    return sol.y[:, -1]
