"""Normalization constant, Sobolev constant, attainment threshold.

kappa_s is calibrated numerically from one-mode extension profiles and must
come out the same for every frequency; the report records the spread.  The
threshold that decides attainment combines kappa_s with the critical Sobolev
constant and a factor 2^(-2s/N) for concentration at the Neumann part.
Near s = 1 the calibration fit degenerates and the package refuses rather
than return digits it cannot back.
"""
import fraclap as fl

for N in (2, 3):
    params = fl.FracParams(s=0.75, N=N)
    rep = fl.constants_report(params, mus=(1.0, 2.0, 4.0))
    print(f"s = 0.75, N = {N}")
    print(f"  kappa_s              {rep.kappa:.12f}")
    print(f"  calibration spread   {rep.notes['kappa_calibration_spread']:.2e}"
          f"   over mu = {rep.notes['kappa_calibration_mus']}")
    print(f"  closed-form rel diff {rep.notes['kappa_closed_form_rel_diff']:.2e}")
    print(f"  sobolev constant     {rep.sobolev:.12f}")
    print(f"  threshold            {rep.threshold:.12f}")
    print(f"  critical exponent    {fl.critical_exponent(params):.6f}")

print("\ns sweep of kappa (N = 3):")
for s in (0.55, 0.65, 0.75, 0.85, 0.95):
    k = fl.kappa_s(fl.FracParams(s=s, N=3))
    print(f"  s = {s:.2f}   kappa = {k:.10f}")

try:
    fl.kappa_s(fl.FracParams(s=0.99, N=3))
except fl.CalibrationError as e:
    print(f"\ns = 0.99 refused: {e}")
