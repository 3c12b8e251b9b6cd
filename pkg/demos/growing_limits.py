"""Growing weight sequences: does E[U_j^N] converge as N grows?"""

from sibling_collector import families as F, limits as L
from sibling_collector.quadrature import expected_unfilled

cases = [("linear", F.linear()), ("log", F.log_growth()), ("loglog c=2", F.loglog_growth(2.0))]
for name, spec in cases:
    seq = [expected_unfilled(F.probabilities(spec, N), 2).value for N in (100, 1000, 10_000)]
    diag = L.finiteness_diagnostic(spec, 2)
    print(f"{name:<11} x_alpha={L.x_alpha(spec):.4f}  verdict={diag.verdict.value:<17}",
          "  ".join(f"{v:.5f}" for v in seq))
    try:
        res = L.limit_integral_I(spec, 2)
        print(f"{'':<11} limit I = {res.value:.10f}  (K={res.truncation_k}, quad err {res.quad_error:.1e})")
    except L.DiagnosedDivergent as exc:
        print(f"{'':<11} diverges (diagnosed, not proven); witness tail {exc.witness[-3:]}")

print("S(e^-2) for a_k = ln k:", L.tail_sum_S(F.log_growth(), 0.1353352832366127).value)
print("Lambert coefficients, a_k = k, j=2:", L.lambert_coefficients(lambda d: 1, 12, 2))
