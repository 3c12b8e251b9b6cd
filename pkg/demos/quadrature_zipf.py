"""E[U_j^N] for Zipf-like coupons by quadrature, checked two ways."""

import time

from sibling_collector import exact, families as F
from sibling_collector.quadrature import expected_unfilled, expected_unfilled_on_unit_interval

# equal probabilities: quadrature against the exact harmonic number
r = expected_unfilled(F.probabilities(F.equal(), 100), 2)
print(f"equal N=100: {r.value:.12f}  exact {float(exact.harmonic(100)):.12f}")

for N in (10, 100, 1000, 10_000):
    p = F.probabilities(F.zipf(1.0), N)
    start = time.perf_counter()
    a = expected_unfilled(p, 2)
    ms = 1e3 * (time.perf_counter() - start)
    line = f"zipf N={N:>6}: {a.value:.10f} +- {a.error_estimate:.1e}  ({a.nodes_used} nodes, {ms:.0f} ms)"
    if N <= 1000:
        b = expected_unfilled_on_unit_interval(p, 2)
        line += f"  unit interval {b.value:.10f}"
    print(line)

# adding a rare third type can lower the expectation below the two-type value 3/2
v = expected_unfilled(F.normalize([1.0, 1.0, 0.01]), 2).value
print(f"weights (1, 1, 0.01): {v:.6f} < 1.5")
