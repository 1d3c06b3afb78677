"""Shrinking the Dirichlet part until the minimizer can exist.

The Dirichlet portion of the bottom face is shrunk through a family of
fractions alpha.  As it shrinks, lambda_{1,s} decreases, the quotient bound
kappa * lambda_{1,s}^(N/(2s)) * |Omega| (a sufficient condition) eventually
drops below the attainment threshold, and the experiment records the onset.
"""
import fraclap as fl

params = fl.FracParams(s=0.75, N=2)
mesh = fl.build_tensor_mesh(2, [(0.0, 1.0)] * 2, [40, 40])
kap = fl.kappa_s(params)

alphas = [1.0, 0.75, 0.5, 0.25, 0.125]
res = fl.move_boundary_experiment(mesh, params, alphas, kappa=kap)

print("alpha (requested -> snapped), lambda_1, lambda_1^s, sufficient?")
for row in res.rows:
    mark = "  <-- onset" if row["alpha"] == res.onset_alpha and row["sufficient"] else ""
    print(f"  {row['alpha_requested']:.3f} -> {row['alpha']:.4f}   "
          f"lam1 = {row['lam_1_1']:.6f}   lam1^s = {row['lam_1_s']:.6f}   "
          f"bound = {row['bound']:.4f}   "
          f"{'yes' if row['sufficient'] else 'no '}{mark}")

print(f"\nthreshold = {res.threshold:.6f}")
print(f"onset alpha = {res.onset_alpha}")
