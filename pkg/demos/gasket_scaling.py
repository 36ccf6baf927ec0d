"""Self-similarity of the Sierpinski gasket seen through exact graph solves.

Each refinement multiplies the expected number of walk steps by exactly 5,
so exit times scale like r^(log 5 / log 2) rather than r^2.
"""

import math

import numpy as np

from exitlab.core import GASKET_BETA, SpaceSpec
from exitlab.discrete import build_gasket_graph, dirichlet_lambda, expected_steps, ondiag_decay_fit
from exitlab.estimators import walk_dimension_fit

prev = None
for m in range(1, 8):
    g = build_gasket_graph(m)
    steps = expected_steps(g)[g.nearest_vertex([0.5, 0.0])]
    lam = dirichlet_lambda(g).eigenvalue
    ratio = "" if prev is None else f"  ratio {steps / prev:.6f}"
    print(f"level {m}: {g.n:5d} vertices, steps from midpoint {steps:10.1f}, lambda {lam:.5f}{ratio}")
    prev = steps

fit = walk_dimension_fit(SpaceSpec.gasket(0), [0.5, 0.0], 2.0 ** -np.arange(1, 7))
print(f"walk dimension fit {fit.beta_hat:.4f} (log5/log2 = {GASKET_BETA:.4f})")
od = ondiag_decay_fit([6, 7])
print(f"on-diagonal heat kernel exponent {od['exponent']:.4f} (log3/log5 = {math.log(3) / math.log(5):.4f})")
