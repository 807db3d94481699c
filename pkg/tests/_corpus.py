"""Shared fixtures: random analytic metric-measure corpora, classic chart
files, and independent numerical oracles."""

from __future__ import annotations

import numpy as np

from qecheck.expr import parse_scalar
from qecheck.smms import SmmsSpec

COORD_NAMES = ("x", "y", "z", "w", "p", "q")


def rand_poly(rng, coords, amp, trig=True, cubic=True):
    """Random degree-<=3 polynomial (plus a couple of trig terms)."""
    terms = []
    for c in coords:
        terms.append(f"{rng.normal() * amp:+.6f}*{c}")
    for a in coords:
        for b in coords:
            terms.append(f"{rng.normal() * amp:+.6f}*{a}*{b}")
    if cubic:
        for _ in range(2):
            a, b, c = rng.choice(coords, size=3)
            terms.append(f"{rng.normal() * amp:+.6f}*{a}*{b}*{c}")
    if trig:
        terms.append(f"{rng.normal() * amp:+.6f}*sin({coords[0]})")
        terms.append(f"{rng.normal() * amp:+.6f}*cos({coords[-1]})")
    return "".join(terms)


def random_smms(n, m, mu, seed, amp=0.12, v_amp=None, v_one=False):
    """Random analytic metric-measure chart near the flat metric."""
    rng = np.random.default_rng(seed)
    coords = COORD_NAMES[:n]
    g = [[None] * n for _ in range(n)]
    for i in range(n):
        for j in range(i, n):
            base = "1" if i == j else "0"
            g[i][j] = g[j][i] = parse_scalar(
                base + rand_poly(rng, coords, amp), coords
            )
    if not np.isfinite(m):
        phi_text = "0" if v_one else "0" + rand_poly(rng, coords, amp)
        return SmmsSpec(n=n, coords=tuple(coords), g_exprs=g, m=m, mu=mu,
                        phi_expr=parse_scalar(phi_text, coords))
    if v_one:
        v = parse_scalar("1", coords)
    else:
        v = parse_scalar(
            "1" + rand_poly(rng, coords, amp if v_amp is None else v_amp), coords
        )
    return SmmsSpec(n=n, coords=tuple(coords), g_exprs=g, m=m, mu=mu, v_expr=v)


def corpus(size=20, v_one=False, amp=0.12):
    """The standard random corpus: n in {3,4}, m in {1, 2.5, 7}."""
    dims = [3, 4]
    ms = [1.0, 2.5, 7.0]
    out = []
    for k in range(size):
        n = dims[k % 2]
        m = ms[k % 3]
        mu = float(np.random.default_rng(1000 + k).uniform(-1.0, 1.0))
        out.append(random_smms(n, m, mu, seed=k, amp=amp, v_one=v_one))
    return out


def corpus_points(spec, count, seed, lo=-0.3, hi=0.3):
    rng = np.random.default_rng(seed)
    return [rng.uniform(lo, hi, size=spec.n) for _ in range(count)]


def flat_affine(n=3, m=2.5):
    """Flat chart with density 1 + x1; quasi-Einstein with mu = m - 1."""
    coords = COORD_NAMES[:n]
    g = [
        [parse_scalar("1" if i == j else "0", coords) for j in range(n)]
        for i in range(n)
    ]
    return SmmsSpec(
        n=n, coords=tuple(coords), g_exprs=g, m=m, mu=m - 1.0,
        v_expr=parse_scalar("1+x", coords),
    )


def diag_metric(entries, coords):
    n = len(entries)
    return [
        [parse_scalar(entries[i] if i == j else "0", coords) for j in range(n)]
        for i in range(n)
    ]


def round_sphere_chart(n):
    """Unit round sphere in iterated polar coordinates."""
    coords = COORD_NAMES[:n]
    entries = ["1"]
    factor = []
    for k in range(1, n):
        factor.append(f"sin({coords[k-1]})^2")
        entries.append("*".join(factor))
    return diag_metric(entries, coords), coords


def sphere_smms(n, m=0.0, mu=0.0):
    g, coords = round_sphere_chart(n)
    return SmmsSpec(n=n, coords=tuple(coords), g_exprs=g, m=m, mu=mu,
                    v_expr=parse_scalar("1", coords))


def schwarzschild_smms(mass=0.2, m=1.0):
    """Spatial Schwarzschild slice as a measure space with v = lapse.

    Quasi-Einstein with quasi-Einstein constant 0 and characteristic
    constant 0 when m = 1.
    """
    coords = ("rho", "th", "ph")
    vtext = f"1 - {2 * mass}/rho"
    g = [
        [parse_scalar(f"1/({vtext})", coords), parse_scalar("0", coords),
         parse_scalar("0", coords)],
        [parse_scalar("0", coords), parse_scalar("rho^2", coords),
         parse_scalar("0", coords)],
        [parse_scalar("0", coords), parse_scalar("0", coords),
         parse_scalar("rho^2*sin(th)^2", coords)],
    ]
    return SmmsSpec(
        n=3, coords=coords, g_exprs=g, m=m, mu=0.0,
        v_expr=parse_scalar(f"sqrt({vtext})", coords), lam=0.0,
    )


def kasner_static_spec(exponents=(-2.0 / 7.0, 6.0 / 7.0, 3.0 / 7.0)):
    """Static vacuum chart g = dx^2 + x^{2b} dy^2 + x^{2c} dz^2 with
    potential v = x^a; exponents sum to 1 with unit square sum."""
    a, b, c = exponents
    coords = ("x", "y", "z")
    g = diag_metric(["1", f"x^{2*b:.17g}", f"x^{2*c:.17g}"], coords)
    return SmmsSpec(
        n=3, coords=coords, g_exprs=g, m=1.0, mu=0.0,
        v_expr=parse_scalar(f"x^({a:.17g})", coords), lam=0.0,
    )


SCHWARZSCHILD_FILE = """
# spherically symmetric vacuum slice with its lapse as density
dimension = 3
coords = rho, th, ph
g[1,1] = 1/(1 - 0.4/rho)
g[2,2] = rho^2
g[3,3] = rho^2*sin(th)^2
v = sqrt(1 - 0.4/rho)
m = 1
mu = 0
lambda = 0
u = 1
sample_box = 1.5:2.5:2, 0.6:2.0:2, 0.3:1.2:2
jitter_seed = 3
"""

S3_STATIC_FILE = """
# unit round 3-sphere with the classic static potential
dimension = 3
coords = r, th, ph
g[1,1] = 1
g[2,2] = sin(r)^2
g[3,3] = sin(r)^2*sin(th)^2
v = cos(r)
m = 1
mu = 0
lambda = 3
sample_box = 0.5:1.3:2, 0.7:1.9:2, 0.4:1.3:2
jitter_seed = 1
"""


def random_file(seed=9, n=3, m=2.5, mu=0.4, amp=0.15):
    rng = np.random.default_rng(seed)
    coords = COORD_NAMES[:n]
    lines = [f"dimension = {n}", "coords = " + ", ".join(coords)]
    for i in range(n):
        for j in range(i, n):
            base = "1" if i == j else "0"
            lines.append(f"g[{i+1},{j+1}] = {base}{rand_poly(rng, coords, amp)}")
    lines.append(f"v = 1{rand_poly(rng, coords, amp / 2)}")
    lines.append(f"m = {m}")
    lines.append(f"mu = {mu}")
    box = ", ".join("-0.3:0.3:2" for _ in range(n))
    lines.append(f"sample_box = {box}")
    lines.append("jitter_seed = 5")
    return "\n".join(lines) + "\n"
