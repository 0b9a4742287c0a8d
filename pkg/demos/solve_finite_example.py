"""Solve a small order-4 instance three ways and compare.

    python3 demos/solve_finite_example.py
"""

import numpy as np

from ehtcp import fixtures as fx
from ehtcp.solvers import continuation_solve, semismooth_newton, solve_all


def show(title, sols):
    print(f"{title}: {len(sols)} solution(s)")
    for s in sols:
        print("   ", np.round(s.blocks, 8).tolist(), f"residual {s.residual_inf:.1e}")


inst = fx.finite_instance(q=(1.0, 1.0))

# every complementarity pattern, each one a square polynomial system
full = solve_all(inst)
show("pattern enumeration", full)
print("    branches:", full.stats["status_counts"], "exhaustive:", full.exhaustive)

# one Newton run only finds whatever its start point is attracted to
r = semismooth_newton(inst, [[1.2, 0.1], [0.0, 0.9]])
print(f"semismooth Newton: {r.reason} after {r.iterations} iterations")
if r.success:
    print("   ", np.round(r.solution.blocks, 8).tolist())

show("continuation in t*q", continuation_solve(inst, steps=20))

# an odd order breaks solvability: no pattern has a root
odd = solve_all(fx.odd_m_instance())
print("\nodd-order instance:", len(odd), "solutions;", odd.stats["status_counts"])
