"""Independent scalar reference implementations for small meshes.

Everything here is written as plain Python loops over node pairs using only
``math`` and the parsed expressions evaluated one point at a time. The only
thing shared with the package is the mesh geometry (node coordinates, h and
the padding radius).
"""

import math

from choquard.expr import eval_expr

SPHERE = {1: 2.0, 2: 2.0 * math.pi}


def point_env(x, y=None):
    env = {f"x{k + 1}": float(v) for k, v in enumerate(x)}
    if y is not None:
        env.update({f"y{k + 1}": float(v) for k, v in enumerate(y)})
    return env


def sym(expr, x, y):
    """(e(x, y) + e(y, x)) / 2 by scalar evaluation."""
    return 0.5 * (eval_expr(expr, point_env(x, y)) + eval_expr(expr, point_env(y, x)))


def dist(x, y):
    return math.sqrt(sum((a - b) ** 2 for a, b in zip(x, y)))


def spow(t, e):
    if t == 0:
        return 0.0
    return math.copysign(abs(t) ** (e - 1.0), t)


def _nodes(mesh):
    inner = [tuple(x) for x in mesh.interior]
    ring = [tuple(x) for x in mesh.ring]
    return inner, ring


def _tail(mesh, s_e, p_e, x):
    sp = sym(s_e, x, x) * sym(p_e, x, x)
    return SPHERE[mesh.N] * mesh.tail_radius ** (-sp) / sp


def gagliardo_modular(u, s_e, p_e, mesh, divide_by_p=False):
    """Triple loop: Omega x (Omega + ring) in both orders, plus the radial tail."""
    inner, ring = _nodes(mesh)
    N, w = mesh.N, mesh.h ** (2 * mesh.N)
    allnodes = inner + ring
    vals = list(u) + [0.0] * len(ring)
    terms = []
    for i, x in enumerate(allnodes):
        for j, y in enumerate(allnodes):
            if i == j or (i >= len(inner) and j >= len(inner)):
                continue
            s, p = sym(s_e, x, y), sym(p_e, x, y)
            t = abs(vals[i] - vals[j]) ** p * dist(x, y) ** (-N - s * p) * w
            terms.append(t / p if divide_by_p else t)
    for i, x in enumerate(inner):
        pd = sym(p_e, x, x)
        t = 2.0 * abs(u[i]) ** pd * _tail(mesh, s_e, p_e, x) * mesh.h**N
        terms.append(t / pd if divide_by_p else t)
    return math.fsum(terms)


def choquard_1d(u, mu_e, r_e, mesh):
    """Half the Omega x Omega double loop; the diagonal cell is integrated exactly."""
    inner, _ = _nodes(mesh)
    h = mesh.h
    F = [abs(u[i]) ** eval_expr(r_e, point_env(x)) / eval_expr(r_e, point_env(x)) for i, x in enumerate(inner)]
    terms = []
    for i, x in enumerate(inner):
        for j, y in enumerate(inner):
            m = sym(mu_e, x, y)
            if i == j:
                k = 2.0 * h ** (2.0 - m) / ((1.0 - m) * (2.0 - m))
            else:
                k = dist(x, y) ** (-m) * h * h
            terms.append(F[i] * F[j] * k)
    return 0.5 * math.fsum(terms)


def apply_operator(u, i, s_e, p_e, mesh):
    inner, ring = _nodes(mesh)
    N = mesh.N
    x = inner[i]
    vals = list(u) + [0.0] * len(ring)
    terms = []
    for j, y in enumerate(inner + ring):
        if j == i:
            continue
        s, p = sym(s_e, x, y), sym(p_e, x, y)
        terms.append(spow(u[i] - vals[j], p) * dist(x, y) ** (-N - s * p) * mesh.h**N)
    terms.append(spow(u[i], sym(p_e, x, x)) * _tail(mesh, s_e, p_e, x))
    return math.fsum(terms)


def gradient_1d(u, lam, exprs, mesh):
    """Componentwise derivative of the discrete energy, one node at a time."""
    s_e, p_e, mu_e, al_e, r_e = (exprs[k] for k in ("s", "p", "mu", "alpha", "r"))
    inner, _ = _nodes(mesh)
    h = mesh.h
    r = [eval_expr(r_e, point_env(x)) for x in inner]
    F = [abs(u[k]) ** r[k] / r[k] for k in range(len(inner))]
    out = []
    for i, x in enumerate(inner):
        g = 2.0 * h * apply_operator(u, i, s_e, p_e, mesh)
        a = eval_expr(al_e, point_env(x))
        g -= lam * spow(u[i], a) * h
        conv = []
        for j, y in enumerate(inner):
            m = sym(mu_e, x, y)
            k = 2.0 * h ** (2.0 - m) / ((1.0 - m) * (2.0 - m)) if i == j else dist(x, y) ** (-m) * h * h
            conv.append(F[j] * k)
        g -= math.fsum(conv) * spow(u[i], r[i])
        out.append(g)
    return out
