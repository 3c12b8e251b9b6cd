"""Equal-probability expectations as exact rationals.

E[U_j^N] is the hyperharmonic number obtained by averaging the (j-1) level
N times; for j = 2 it is the harmonic number H_N.
"""

from sibling_collector import exact

for N in (1, 2, 5, 10):
    row = [exact.hyperharmonic(N, j) for j in (2, 3, 4)]
    print(f"N={N:>2}  " + "  ".join(f"{str(v):>12}" for v in row))

# the recursion and the alternating binomial sum are two independent routes
assert exact.hyperharmonic(20, 4) == exact.alternating_sum(20, 4)

print("E[T_20]        =", float(exact.mean_T_equal(20)))
print("Var U_2 at 20  =", float(exact.variance_u2_equal(20)))
print("two types 0.9  =", exact.two_types(0.9, 2))
print("three types    =", exact.three_types_j2(0.5, 0.3, 0.2))
