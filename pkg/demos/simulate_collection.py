"""Monte Carlo estimates next to the quadrature values."""

from sibling_collector import families as F
from sibling_collector.quadrature import expected_unfilled
from sibling_collector.simulator import estimate

for spec in (F.equal(), F.zipf(1.0), F.linear()):
    p = F.probabilities(spec, 30)
    est = estimate(p, 4, 50_000, seed=2024)
    print(spec.label(), f"T: {est.mean_t:.3f} +- {est.se_t:.3f}")
    for j in (2, 3, 4):
        q = expected_unfilled(p, j).value
        z = (est.mean_u[j] - q) / est.se_u[j]
        print(f"   j={j}: sim {est.mean_u[j]:.4f} +- {est.se_u[j]:.4f}   quad {q:.4f}   z={z:+.2f}")

# same seed, same answer, whatever the thread count
a = estimate(F.probabilities(F.zipf(1.0), 30), 2, 5000, seed=1, threads=1)
b = estimate(F.probabilities(F.zipf(1.0), 30), 2, 5000, seed=1, threads=4)
print("reproducible:", a.mean_u == b.mean_u and a.mean_t == b.mean_t)
