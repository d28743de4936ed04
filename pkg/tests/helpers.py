"""Shared generators for randomized property tests (seeded, reproducible)."""

import numpy as np

from daekit import expr
from daekit.dae import Box, SystemDef, validate
from daekit.degree import VectorField, boundary_margin, find_zeros
from daekit.errors import DaekitError


def monomial(names, powers):
    out = expr.Const(1.0)
    for nm, p in zip(names, powers):
        out = expr.c_mul(out, expr.c_pow(expr.Var(nm), int(p)))
    return out


def random_poly(rng, names, max_degree=2, coeff_scale=1.0, n_terms=4):
    """Random polynomial tree with coefficients in [-coeff_scale, coeff_scale]."""
    n = len(names)
    out = expr.Const(0.0)
    for _ in range(n_terms):
        powers = rng.integers(0, max_degree + 1, size=n)
        while powers.sum() > max_degree:
            powers = rng.integers(0, max_degree + 1, size=n)
        c = float(rng.uniform(-coeff_scale, coeff_scale))
        out = expr.c_add(out, expr.c_mul(expr.Const(c), monomial(names, powers)))
    return out


def random_tree(rng, names, depth=3):
    """Random expression over the full operator set (for AD/printing tests)."""
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.4:
            return expr.Const(float(rng.uniform(-3, 3)))
        return expr.Var(str(rng.choice(names)))
    roll = rng.random()
    if roll < 0.45:
        op = str(rng.choice(["+", "-", "*", "/"]))
        return expr.Binary(op, random_tree(rng, names, depth - 1),
                           random_tree(rng, names, depth - 1))
    if roll < 0.75:
        op = str(rng.choice(["neg", "sin", "cos", "exp", "ln", "sqrt"]))
        return expr.Unary(op, random_tree(rng, names, depth - 1))
    return expr.Power(random_tree(rng, names, depth - 1),
                      int(rng.integers(2, 4)))


def random_point(rng, names, lo=-2.0, hi=2.0):
    return {nm: float(rng.uniform(lo, hi)) for nm in names}


def usable_tree_and_point(rng, names, need_dual=False):
    """Tree plus a point where it (and optionally its derivative) is tame."""
    while True:
        tree = random_tree(rng, names)
        env = random_point(rng, names)
        try:
            v = expr.evaluate(tree, env)
            if not np.isfinite(v) or abs(v) > 1e6:
                continue
            if need_dual:
                seed = {nm: float(rng.uniform(-1, 1)) for nm in names}
                d = expr.evaluate_dual(tree, env, seed).derivative
                if not np.isfinite(d) or abs(d) > 1e5:
                    continue
                return tree, env, seed
            return tree, env
        except DaekitError:
            continue


def random_system(rng, k, s, half_width=1.2):
    """Random polynomial DAE passing validation, all zeros nondegenerate.

    Coefficients stay inside [-2, 2]; each g_j keeps an own-variable linear
    term away from zero so rejection sampling terminates quickly.
    """
    names = [f"x{i + 1}" for i in range(k)] + [f"y{j + 1}" for j in range(s)]
    box = Box.from_pairs([(-half_width, half_width)] * (k + s))
    while True:
        f = [random_poly(rng, names, max_degree=2, coeff_scale=2.0) for _ in range(k)]
        g = []
        for j in range(s):
            a = float(rng.uniform(0.75, 2.0)) * (1 if rng.random() < 0.5 else -1)
            lead = expr.c_mul(expr.Const(a), expr.Var(f"y{j + 1}"))
            g.append(expr.c_add(lead, random_poly(rng, names, 2, 0.4)))
        sysdef = SystemDef(k, s, 2 * np.pi, f, g, None, box)
        try:
            validate(sysdef, samples=256)
        except DaekitError:
            continue
        try:
            zeros = find_zeros(sysdef, box, grid_per_dim=6)
        except DaekitError:
            continue
        if any(z.degenerate or z.near_boundary for z in zeros):
            continue
        return sysdef, zeros


def random_planar_map(rng, half_width=1.5):
    """Random 2-D polynomial map with nondegenerate zeros and safe boundary."""
    names = ["x1", "y1"]
    box = Box.from_pairs([(-half_width, half_width)] * 2)
    while True:
        fld = VectorField(
            [random_poly(rng, names, max_degree=3, coeff_scale=2.0, n_terms=5)
             for _ in range(2)],
            names,
        )
        try:
            if boundary_margin(fld, box) <= 1e-4:
                continue
            zeros = find_zeros(fld, box, grid_per_dim=8)
        except DaekitError:
            continue
        if any(z.degenerate or z.near_boundary for z in zeros):
            continue
        return fld, box, zeros
