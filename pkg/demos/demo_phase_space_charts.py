"""Tour of the compactified phase space: charts, boundary-defining functions,
and the anisotropy of the parabolic compactification.

Run:  python3 demos/demo_phase_space_charts.py
"""

import numpy as np

from nrlab.geometry import (
    ChartId, ChartTag, ParabolicRay, PhasePoint,
    b_order_fit, bdf_values, from_chart, parabolic_chart, to_chart,
)

print("=" * 70)
print("Boundary-defining functions")
print("=" * 70)

# A point at the rest-energy scale: tau_nat = h^2 tau finite as c -> infinity.
for h in (1.0, 0.3, 0.05, 0.0):
    p = PhasePoint(t=1.0, x=[2.0], tau_nat=1.2, xi_nat=[0.8], h=h)
    b = bdf_values(p)
    print(f"h = {h:4.2f}:  rho_df = {b.rho_df:.4f}  rho_bf = {b.rho_bf:.4f}  "
          f"rho_nf = {b.rho_nf:.4f}  rho_pf = {b.rho_pf:.4f}")
print("-> rho_nf tracks h (the natural face is the h = 0 limit at fixed")
print("   natural frequencies) while rho_nf * rho_pf = h exactly.\n")

print("=" * 70)
print("Chart atlas and round trips")
print("=" * 70)

p = PhasePoint(t=0.5, x=[-1.0], tau_nat=0.04, xi_nat=[0.2], h=0.1)
print(f"interior point: tau = {p.tau}, xi = {p.xi}, h = {p.h}")
for tag in (ChartTag.NAT_INTERIOR, ChartTag.DF_PROJECTIVE,
            ChartTag.PF_STANDARD, ChartTag.PF_NAT_PARABOLIC):
    try:
        cc = to_chart(p, ChartId(tag))
    except Exception as exc:
        print(f"  {tag.value:18s} -> out of chart ({exc})")
        continue
    q = from_chart(cc)
    err = abs(q.tau_nat - p.tau_nat) + np.max(np.abs(q.xi_nat - p.xi_nat))
    print(f"  {tag.value:18s} coords = {np.array2string(cc.coords, precision=3)}"
          f"   round-trip error {err:.1e}")

print()
print("=" * 70)
print("Parabolic compactification: one time order = two space orders")
print("=" * 70)

# Frequency space is compactified along parabolic rays (tau s^2, xi s).  The
# constant coordinate fields become b-degenerate at the boundary with decay
# order 2 for d/dtau and 1 for d/dxi -- the numerical fit recovers both.
ray = ParabolicRay(1.0, [0.0], np.geomspace(3.0, 300.0, 25))
e_tau = b_order_fit("tau", ChartId(ChartTag.PAR_FREQ_TAU), ray)
e_xi = b_order_fit(("xi", 1), ChartId(ChartTag.PAR_FREQ_TAU), ray)
print(f"fitted decay exponents along (tau, xi) = (s^2, 0):")
print(f"  d/dtau : {e_tau:.4f}   (expected 2)")
print(f"  d/dxi  : {e_xi:.4f}   (expected 1)")

cc = parabolic_chart(8.0, [2.0])
print(f"\nchart selection for (tau, xi) = (8, 2): {cc.chart.tag.value}, "
      f"coords {np.array2string(cc.coords, precision=3)}")
