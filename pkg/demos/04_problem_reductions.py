"""Two front ends that reduce other problem classes to semi-explicit form.

1. Constraint on x only ("position constraint"): differentiate it once along
   the flow to expose the hidden algebraic equation in y.
2. Implicit equations phi(x, x' + lambda h(t, x)) = 0: introduce y for the
   implicit combination; the degree of the embedded system comes for free
   from the q = 0 slice of phi.
"""

import math

import numpy as np

from daekit import degree_via_slice, expr, find_zeros, validate
from daekit.dae import Box
from daekit.errors import HypothesisViolationError
from daekit.periodic import reduce_hessenberg, reduce_implicit

names3 = ["x1", "x2", "y1"]

print("== constraint on x only ==")
f = [expr.parse("x2 + y1", names3), expr.parse("-x1", names3)]
gamma = [expr.parse("x1", ["x1", "x2"])]
box = Box.from_pairs([(-2, 2), (-2, 2), (-2, 2)])
sysdef = reduce_hessenberg(f, gamma, box)
print("constraint gamma = x1 on x1' = x2 + y1, x2' = -x1")
print(f"induced algebraic equation g = {expr.to_string(sysdef.g[0])}")
print(f"validation: {validate(sysdef).message}")

print("\nif the constraint cannot react to y the reduction must fail:")
f_bad = [expr.parse("x2", names3), expr.parse("-x1 + y1", names3)]
try:
    reduce_hessenberg(f_bad, gamma, box)
except HypothesisViolationError as exc:
    print(f"  rejected: {exc}")

print("\n== implicit equation phi(x, x' + lambda h) = 0 ==")
phi = [expr.parse("y1 + x1^3", ["x1", "y1"])]
h = [expr.parse("cos(t)", ["x1", "t"])]
box2 = Box.from_pairs([(-1, 1), (-1, 1)])
sysdef, deg = reduce_implicit(phi, h, 2 * math.pi, box2)
print("phi(p, q) = q + p^3 with forcing cos t")
print(f"embedded system: x1' = {expr.to_string(sysdef.f[0])} "
      f"+ lambda * ({expr.to_string(sysdef.h[0])}), "
      f"constraint {expr.to_string(sysdef.g[0])} = 0")
print(f"deg(F, box) from the q = 0 slice: {deg}")
zeros = find_zeros(sysdef, sysdef.box)
print(f"check against the flat zeros: {[np.round(z.point, 8).tolist() for z in zeros]}")

print("\nthe slice computation alone (with its planar winding cross-check):")
omega = [expr.parse("x1^3 - y1", ["x1", "y1"])]
print(f"omega = p^3 - q over [-1,1]^2: degree of (q, omega) = "
      f"{degree_via_slice(omega, box2)}")
