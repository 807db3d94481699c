"""Manifold description files: a flat key-value text format.

    # comments start with '#'
    dimension = 3
    coords = rho, th, ph
    g[1,1] = 1/(1 - 0.4/rho)        # 1-based indices, missing entries are 0,
    g[2,2] = rho^2                  # the lower triangle mirrors the upper
    g[3,3] = rho^2*sin(th)^2
    v = sqrt(1 - 0.4/rho)           # exactly one of v / phi, matching m
    m = 1                           # number, or inf / -inf
    mu = 0
    lambda = 0                      # optional
    u = 1                           # optional candidate quasi-Einstein scale
    potential = log(1+x)            # optional candidate potential
    K[1] = -y/(x^2+y^2)             # optional supplied one-form components
    sample_box = 1.5:2.5:3, 0.6:2.2:3, 0.2:1.2:3
    points = (1.6,1.0,0.5); (2.1,0.7,1.2)   # alternative to sample_box
    jitter = 0.25                   # fraction of half cell, default 0.25
    jitter_seed = 7                 # default 0
    tol[identity] = 1e-8            # optional overrides: identity, decision,
    tol[genericity] = 1e-8          #   genericity, scalar

Sampling defaults to a 5-per-axis grid over the box, capped at 2000 points,
with deterministic jitter to stay off symmetry axes.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ExprError, InputError
from .expr import parse_scalar
from .smms import SmmsSpec

MAX_POINTS = 2000
DEFAULT_GRID = 5

_KEY_RE = re.compile(r"^([A-Za-z_]+)(?:\[([^\]]+)\])?$")


@dataclass
class ManifoldFile:
    n: int
    coords: tuple
    g_text: dict                  # (i, j) -> expression text (0-based)
    m: float
    mu: float
    lam: float | None
    v_text: str | None
    phi_text: str | None
    u_text: str | None
    potential_text: str | None
    k_text: dict                  # i -> expression text (0-based)
    points: list | None
    box: list | None              # per-axis (lo, hi, count)
    jitter: float
    jitter_seed: int
    tolerances: dict
    digest: str
    source: str = field(repr=False, default="")


def _parse_number(text, line):
    t = text.strip().lower()
    if t in ("inf", "+inf", "infinity"):
        return float("inf")
    if t == "-inf":
        return float("-inf")
    try:
        return float(text)
    except ValueError:
        raise InputError(f"expected a number, got {text!r}", line)


def _parse_box_axis(text, line):
    parts = text.split(":")
    if len(parts) not in (2, 3):
        raise InputError(f"box axis must be lo:hi[:count], got {text!r}", line)
    lo = _parse_number(parts[0], line)
    hi = _parse_number(parts[1], line)
    count = int(parts[2]) if len(parts) == 3 else DEFAULT_GRID
    if not (hi > lo) or count < 1:
        raise InputError(f"bad box axis {text!r}", line)
    return (lo, hi, count)


def _parse_points(text, line):
    pts = []
    for chunk in text.split(";"):
        chunk = chunk.strip().strip("()")
        if not chunk:
            continue
        pts.append([_parse_number(x, line) for x in chunk.split(",")])
    if not pts:
        raise InputError("empty point list", line)
    return pts


def parse_manifold(text):
    """Parse the key-value document into a ManifoldFile (no expression
    compilation yet)."""
    entries = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise InputError(f"expected key = value, got {line!r}", lineno)
        key, value = line.split("=", 1)
        key, value = key.strip(), value.strip()
        if not value:
            raise InputError(f"empty value for {key!r}", lineno)
        mkey = _KEY_RE.match(key)
        if mkey is None:
            raise InputError(f"bad key {key!r}", lineno)
        entries[(mkey.group(1), mkey.group(2))] = (value, lineno)

    def take(name, sub=None, required=False):
        item = entries.pop((name, sub), None)
        if item is None:
            if required:
                raise InputError(f"missing required key {name!r}")
            return None, None
        return item

    dim_text, dim_line = take("dimension", required=True)
    n = int(_parse_number(dim_text, dim_line))
    if not (2 <= n <= 6):
        raise InputError(f"dimension must be in 2..6, got {n}", dim_line)
    coords_text, coords_line = take("coords", required=True)
    coords = tuple(c.strip() for c in coords_text.split(","))
    if len(coords) != n or len(set(coords)) != n or not all(coords):
        raise InputError(f"coords must list {n} distinct names", coords_line)

    m_text, m_line = take("m", required=True)
    m = _parse_number(m_text, m_line)
    mu_text, mu_line = take("mu", required=True)
    mu = _parse_number(mu_text, mu_line)
    lam_text, lam_line = take("lambda")
    lam = None if lam_text is None else _parse_number(lam_text, lam_line)

    v_text, _ = take("v")
    phi_text, _ = take("phi")
    if (v_text is None) == (phi_text is None):
        raise InputError("exactly one of v / phi must be given")
    if np.isfinite(m) and v_text is None:
        raise InputError("finite m requires v (phi is for m = inf / -inf)")
    if not np.isfinite(m) and phi_text is None:
        raise InputError("m = inf / -inf requires phi")

    u_text, _ = take("u")
    potential_text, _ = take("potential")

    g_text = {}
    k_text = {}
    for (name, sub), (value, lineno) in list(entries.items()):
        if name == "g":
            try:
                i, j = (int(x) for x in sub.split(","))
            except (ValueError, AttributeError):
                raise InputError(f"bad metric index g[{sub}]", lineno)
            if not (1 <= i <= n and 1 <= j <= n):
                raise InputError(f"metric index out of range g[{sub}]", lineno)
            g_text[(i - 1, j - 1)] = value
            entries.pop((name, sub))
        elif name == "K":
            try:
                i = int(sub)
            except (ValueError, TypeError):
                raise InputError(f"bad one-form index K[{sub}]", lineno)
            if not (1 <= i <= n):
                raise InputError(f"one-form index out of range K[{sub}]", lineno)
            k_text[i - 1] = value
            entries.pop((name, sub))

    points_text, points_line = take("points")
    box_text, box_line = take("sample_box")
    points = None if points_text is None else _parse_points(points_text, points_line)
    box = None
    if box_text is not None:
        box = [_parse_box_axis(ax, box_line) for ax in box_text.split(",")]
        if len(box) != n:
            raise InputError(f"sample_box needs {n} axes", box_line)
    if points is None and box is None:
        raise InputError("provide points or sample_box")
    if points is not None:
        for p in points:
            if len(p) != n:
                raise InputError(f"point {p} has wrong dimension", points_line)

    jit_text, jit_line = take("jitter")
    jitter = 0.25 if jit_text is None else _parse_number(jit_text, jit_line)
    seed_text, seed_line = take("jitter_seed")
    jitter_seed = 0 if seed_text is None else int(_parse_number(seed_text, seed_line))

    tolerances = {}
    for (name, sub), (value, lineno) in list(entries.items()):
        if name == "tol":
            if sub not in ("identity", "decision", "genericity", "scalar"):
                raise InputError(f"unknown tolerance tol[{sub}]", lineno)
            tolerances[sub] = _parse_number(value, lineno)
            entries.pop((name, sub))

    if entries:
        (name, sub), (_, lineno) = next(iter(entries.items()))
        key = name if sub is None else f"{name}[{sub}]"
        raise InputError(f"unknown key {key!r}", lineno)

    return ManifoldFile(
        n=n,
        coords=coords,
        g_text=g_text,
        m=m,
        mu=mu,
        lam=lam,
        v_text=v_text,
        phi_text=phi_text,
        u_text=u_text,
        potential_text=potential_text,
        k_text=k_text,
        points=points,
        box=box,
        jitter=jitter,
        jitter_seed=jitter_seed,
        tolerances=tolerances,
        digest=hashlib.sha256(text.encode()).hexdigest(),
        source=text,
    )


def compile_spec(mf):
    """Compile the expression entries into a SmmsSpec, mirroring the metric
    across the diagonal and validating symmetry numerically at a probe
    point when both triangles are given."""
    n = mf.n
    coords = mf.coords

    def compile_expr(text, what):
        try:
            return parse_scalar(text, coords)
        except ExprError as err:
            raise InputError(f"in {what}: {err}")

    zero = compile_expr("0", "metric")
    g_exprs = [[zero for _ in range(n)] for _ in range(n)]
    seen = {}
    for (i, j), text in mf.g_text.items():
        seen[(i, j)] = compile_expr(text, f"g[{i+1},{j+1}]")
    for i in range(n):
        for j in range(n):
            if (i, j) in seen:
                g_exprs[i][j] = seen[(i, j)]
            elif (j, i) in seen:
                g_exprs[i][j] = seen[(j, i)]
    from .expr import eval_ja

    for probe in _symmetry_probes(mf):
        gv = np.array(
            [[eval_ja(g_exprs[i][j], probe, 0).value for j in range(n)]
             for i in range(n)]
        )
        if np.abs(gv - gv.T).max() > 1e-10 * max(1.0, np.abs(gv).max()):
            raise InputError(
                f"metric expressions are not symmetric at probe point "
                f"{tuple(round(float(x), 6) for x in probe)}"
            )

    v_expr = compile_expr(mf.v_text, "v") if mf.v_text else None
    phi_expr = compile_expr(mf.phi_text, "phi") if mf.phi_text else None
    return SmmsSpec(
        n=n,
        coords=coords,
        g_exprs=g_exprs,
        m=mf.m,
        mu=mf.mu,
        v_expr=v_expr,
        phi_expr=phi_expr,
        lam=mf.lam,
    )


def probe_point(mf):
    if mf.points:
        return np.asarray(mf.points[0], dtype=float)
    return np.array([(lo + hi) / 2.0 for (lo, hi, _) in mf.box])


def _symmetry_probes(mf):
    """Probe points for the numeric symmetry check, chosen off coordinate
    coincidences when a box is available."""
    if mf.box is None:
        return [np.asarray(p, dtype=float) for p in mf.points[:3]]
    center = np.array([(lo + hi) / 2.0 for (lo, hi, _) in mf.box])
    half = np.array([(hi - lo) / 2.0 for (lo, hi, _) in mf.box])
    fracs = np.array([0.31, -0.47, 0.23, -0.11, 0.41, -0.37][: mf.n])
    return [center, center + fracs * half]


def sample_points(mf):
    """Deterministic sample set: explicit points, or a jittered grid over
    the box capped at MAX_POINTS."""
    if mf.points is not None:
        return [np.asarray(p, dtype=float) for p in mf.points]
    axes = []
    for (lo, hi, count) in mf.box:
        centers = lo + (hi - lo) * (np.arange(count) + 0.5) / count
        axes.append(centers)
    mesh = np.meshgrid(*axes, indexing="ij")
    pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
    if len(pts) > MAX_POINTS:
        pts = pts[:MAX_POINTS]
    rng = np.random.default_rng(mf.jitter_seed)
    half_cell = np.array([(hi - lo) / (2.0 * count) for (lo, hi, count) in mf.box])
    noise = rng.uniform(-1.0, 1.0, size=pts.shape) * (mf.jitter * half_cell)
    return [p for p in pts + noise]
