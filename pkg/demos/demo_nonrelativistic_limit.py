"""The non-relativistic limit at work: Klein-Gordon envelopes converge to
Schrodinger solutions at second order in 1/c, and the asymptotic-mass
coefficient acts as the effective Newtonian potential.

Run:  python3 demos/demo_nonrelativistic_limit.py
"""

import math

import numpy as np

from nrlab.quantize import BoxGrid
from nrlab.symbols import ClassicalSymbolProfile, MetricParams, SignBranch, aleph
from nrlab.pde import (
    SchrCoefficients, SchrState, conjugate_compare, kg_branch_data,
    kg_envelope_solve, kg_free_solve, schrodinger_solve, symmetry_defect,
)

MI = SignBranch.MINUS


def bandlimited(grid, K, width=4.0, k0=1.0):
    xx = grid.axis_points(0)
    vals = np.exp(-((xx / width) ** 2)) * np.exp(1j * k0 * xx)
    ch = np.fft.fftn(vals)
    ch[np.abs(grid.axis_freqs(0)) > K] = 0.0
    return np.fft.ifftn(ch)


g = BoxGrid.regular(40 * math.pi, 256, 1)
psi = bandlimited(g, 2.0)
times = np.linspace(0.0, 1.0, 9)

print("=" * 70)
print("Free comparison: sup_t |e^{ic^2 t} u_KG - v_Schr| over a c-ladder")
print("=" * 70)
errs = {}
for c in (8.0, 16.0, 32.0):
    kgs = kg_free_solve(kg_branch_data(g, psi, c, MI), times)
    ss = schrodinger_solve(SchrState(g, psi, 0.0), MI, times, dt=0.02)
    errs[c] = conjugate_compare(kgs, ss, MI, c).sup_error
    print(f"  c = {c:4.0f}:  envelope error {errs[c]:.3e}")
print(f"  ratios: {errs[8.0]/errs[16.0]:.2f}, {errs[16.0]/errs[32.0]:.2f} "
      f"(second order would be 4.00)")
print(f"  leading error is the dispersion gap -|xi|^4 t / (8 c^2)")

print()
print("=" * 70)
print("Swapping branches destroys the comparison (order one error):")
print("=" * 70)
kgs = kg_free_solve(kg_branch_data(g, psi, 8.0, MI), times)
wrong = schrodinger_solve(SchrState(g, psi, 0.0), SignBranch.PLUS, times, dt=0.02)
print(f"  minus-branch data vs plus-branch solver: "
      f"{conjugate_compare(kgs, wrong, SignBranch.PLUS, 8.0).sup_error:.2f}")

print()
print("=" * 70)
print("Gravity as a potential: a lapse perturbation alpha feeds the")
print("asymptotic-mass coefficient into the Schrodinger normal operator")
print("=" * 70)
g2 = BoxGrid.regular(40 * math.pi, 128, 1)
psi2 = bandlimited(g2, 2.0)
M = MetricParams(d=1, alpha=ClassicalSymbolProfile(amplitude=0.3))
print(f"  asymptotic mass at the origin: {aleph(M, [0.0, 0.0]):+.6f} "
      f"(= -alpha(0))")
kg_env = kg_envelope_solve(psi2, MI, M, 8.0, times, g2)
for label, include in (("with potential   ", True), ("without potential", False)):
    coeffs = SchrCoefficients.from_metric(M, include_aleph=include)
    ss = schrodinger_solve(SchrState(g2, psi2, 0.0), MI, times, coeffs, dt=0.01)
    err = conjugate_compare(kg_env, ss, MI, 8.0).sup_error
    print(f"  {label}: envelope error {err:.3e}")
print("  -> omitting the potential degrades the comparison by an order of")
print("     magnitude: the limit genuinely sees the metric's mass term.")

print()
print("=" * 70)
print("Symmetry defect of the conjugated operator")
print("=" * 70)
from nrlab.symbols import OperatorCoefficient
stg = BoxGrid.regular(40.0, 256, 2)
Mi = MetricParams(d=1, W=OperatorCoefficient(
    imag=ClassicalSymbolProfile(amplitude=0.1, order=-2)))
rep = symmetry_defect(Mi, 10.0, stg)
print(f"  Im W = 0.1 <z>^-2 recovered at order "
      f"{rep.fitted_orders['r_0']:.2f} (target -2)")
