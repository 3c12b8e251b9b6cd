"""Three-term large-N expansion for Zipf coupons and its normalized remainder."""

from sibling_collector import asymptotics as A, families as F
from sibling_collector.families import Kind
from sibling_collector.quadrature import expected_unfilled

fam = A.SmoothFamily(Kind.ZIPF, 1.0)
print(f"{'N':>7} {'j':>2} {'quadrature':>12} {'expansion':>12} {'R(N)':>6}")
for j in (2, 3):
    for N in (100, 1000, 10_000):
        t = A.theorem1(fam, N, j)
        q = expected_unfilled(F.probabilities(F.zipf(1.0), N), j).value
        print(f"{N:>7} {j:>2} {q:12.6f} {t.value:12.6f} {A.normalized_remainder(t, q):6.2f}")

# the remainder decays only like delta ln^2 delta, so the relative gap closes slowly
# while R(N) stays flat

se = A.SmoothFamily(Kind.STRETCHED_EXP, 1.0, 0.5)
print("stretched exp, N=1e6, j=2:", A.theorem1(se, 1e6, 2).value)
