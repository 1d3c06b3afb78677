"""Constrained quotient minimization at the critical exponent.

Minimizes (energy - lam * L2) / critical-norm**2 over the constrained space
by projected gradient descent on the critical-norm unit sphere, with a
nodewise absolute value enforcing nonnegativity after every step, followed
by an optional monotone fixed-point polish that drives the discrete
Euler-Lagrange residual to solver precision.  Rescaling the minimizer by
S**(1/(2*-2)) turns it into a candidate solution of the critical equation.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .fractional import (
    Field,
    FracParams,
    QuotientReport,
    TruncatedBasisError,
    attainment_threshold,
    critical_norm,
    mode_field,
)
from .mesh import Mesh
from .spectral import SpectralBasis, assemble_operators, eigendecompose

__all__ = [
    "MinimizeOptions",
    "MinimizerReport",
    "SolutionReport",
    "quotient",
    "minimize_quotient",
    "sobolev_constant_dirichlet",
    "rescale_to_solution",
    "sweep_lambda",
    "move_boundary_experiment",
    "SweepResult",
    "MoveBoundaryResult",
]

NONEXISTENCE = "NONEXISTENCE-REGIME"


def quotient(
    basis: SpectralBasis,
    params: FracParams,
    lam: float,
    u: Field,
) -> QuotientReport:
    """Evaluate the quotient at a field through the spectral route.

    Parameters
    ----------
    basis : SpectralBasis
        Complete basis on the field's partition.
    params : FracParams
    lam : float
        Linear-term weight.
    u : Field
        Nonzero field.

    Returns
    -------
    QuotientReport
    """
    if not basis.complete:
        raise TruncatedBasisError("quotient needs a complete basis")
    ops = basis.ops
    uf = u.free_values(ops)
    if not np.any(uf):
        raise ValueError("quotient undefined at the zero field")
    a = basis.coefficients(uf)
    energy = float(np.sum(basis.lams**params.s * a**2))
    l2_sq = float(uf @ (ops.M @ uf))
    crit_sq = critical_norm(ops, params, uf) ** 2
    return QuotientReport(
        energy=energy, l2_sq=l2_sq, crit_sq=crit_sq, lam=float(lam),
        value=(energy - lam * l2_sq) / crit_sq, route="spectral")


@dataclass(frozen=True)
class MinimizeOptions:
    """Knobs of the projected-gradient minimization.

    Attributes
    ----------
    max_iter : int
        Gradient-iteration cap.
    window : int
        Flat-landing window length for the stopping rule.
    q_rel_tol : float
        Stop once the relative quotient decrease over ``window`` iterations
        falls below this.
    armijo : float
        Sufficient-decrease parameter of the backtracking line search.
    polish : bool
        Run the monotone fixed-point polish after the gradient phase.
    polish_tol : float
        Target relative Euler-Lagrange residual for the polish.
    polish_max : int
        Polish-iteration cap.
    """

    max_iter: int = 20000
    window: int = 25
    q_rel_tol: float = 1e-10
    armijo: float = 1e-4
    polish: bool = True
    polish_tol: float = 1e-8
    polish_max: int = 500


@dataclass(frozen=True)
class MinimizerReport:
    """Outcome of one quotient minimization.

    ``flag`` is "OK" for a genuine minimization and "NONEXISTENCE-REGIME"
    when the first-eigenfunction witness already makes the quotient
    nonpositive, in which case no iteration happens and ``value`` is NaN.
    """

    lam: float
    flag: str
    witness_quotient: float
    value: float
    minimizer: Field | None
    converged: bool
    iterations: int
    trace_q: list[float] = field(repr=False)
    trace_step: list[float] = field(repr=False)
    max_abs: float
    participation: float
    grad_residual: float
    el_residual: float

    def as_dict(self) -> dict:
        return {
            "lam": self.lam, "flag": self.flag,
            "witness_quotient": self.witness_quotient, "value": self.value,
            "converged": self.converged, "iterations": self.iterations,
            "max_abs": self.max_abs, "participation": self.participation,
            "grad_residual": self.grad_residual,
            "el_residual": self.el_residual,
            "trace_q": self.trace_q, "trace_step": self.trace_step,
        }


def _nonlinear_coeffs(basis: SpectralBasis, uf: np.ndarray, p: float) -> np.ndarray:
    # coefficients of M^{-1}(lumped * u^(p-1)); the discrete dual of the
    # nonlinear term under the lumped critical quadrature
    return basis.vecs.T @ (basis.ops.lumped * np.abs(uf) ** (p - 1.0))


def _el_residual_rel(
    basis: SpectralBasis, params: FracParams, lam: float,
    a: np.ndarray, mult: float, b: np.ndarray,
) -> float:
    rho = basis.lams**params.s * a - lam * a - mult * b
    denom = float(np.linalg.norm(basis.lams**params.s * a))
    return float(np.linalg.norm(rho)) / max(denom, 1e-300)


def minimize_quotient(
    basis: SpectralBasis,
    params: FracParams,
    lam: float,
    init: Field | None = None,
    opts: MinimizeOptions | None = None,
) -> MinimizerReport:
    """Minimize the quotient at weight lam over the constrained space.

    Projected gradient descent on the critical-norm unit sphere: step along
    the numerator's M-gradient, take nodewise absolute value, renormalize;
    backtracking line search with halving; stop when the quotient decrease
    over ``opts.window`` accepted steps is below ``opts.q_rel_tol``
    relatively, then polish.  The quotient trace is nonincreasing by
    construction.

    If the first-eigenfunction witness quotient is already nonpositive
    (lam at or above the fractional principal eigenvalue), returns
    immediately with the NONEXISTENCE-REGIME flag.

    Parameters
    ----------
    basis : SpectralBasis
        Complete basis on the target partition.
    params : FracParams
    lam : float
        Nonnegative weight.
    init : Field, optional
        Starting point; default is the first eigenfunction.
    opts : MinimizeOptions, optional

    Returns
    -------
    MinimizerReport
    """
    if not basis.complete:
        raise TruncatedBasisError("minimization needs a complete basis")
    if lam < 0:
        raise ValueError("lam must be nonnegative")
    opts = opts or MinimizeOptions()
    ops = basis.ops
    p = params.two_star
    lam_s = basis.lams**params.s

    phi1 = basis.vecs[:, 0]
    witness = float(
        (lam_s[0] - lam) / critical_norm(ops, params, phi1) ** 2)
    if witness <= 0.0:
        return MinimizerReport(
            lam=float(lam), flag=NONEXISTENCE, witness_quotient=witness,
            value=float("nan"), minimizer=None, converged=False, iterations=0,
            trace_q=[], trace_step=[], max_abs=float("nan"),
            participation=float("nan"), grad_residual=float("nan"),
            el_residual=float("nan"))

    if init is None:
        uf = np.abs(phi1)
    else:
        if init.mesh != ops.mesh or init.partition != ops.partition:
            raise ValueError("init lives on the wrong mesh or partition")
        uf = np.abs(init.free_values(ops))
        if not np.any(uf):
            raise ValueError("init must be nonzero")
    uf = uf / critical_norm(ops, params, uf)
    a = basis.coefficients(uf)

    def q_of(coeffs: np.ndarray) -> float:
        return float(np.sum(lam_s * coeffs**2) - lam * np.sum(coeffs**2))

    Q = q_of(a)
    trace_q = [Q]
    trace_step = [0.0]
    t = 1.0
    converged = False

    for _ in range(opts.max_iter):
        fa = basis.vecs @ (lam_s * a)
        g = 2.0 * (fa - lam * uf)
        gMg = 4.0 * float(
            np.sum(lam_s**2 * a**2) - 2.0 * lam * np.sum(lam_s * a**2)
            + lam**2 * np.sum(a**2))
        if gMg <= 0:
            converged = True
            break
        t = min(t * 2.0, 1e6)
        accepted = False
        while t > 1e-20:
            trial = np.abs(uf - t * g)
            c = critical_norm(ops, params, trial)
            if c > 0:
                trial = trial / c
                a_t = basis.coefficients(trial)
                Q_t = q_of(a_t)
                if Q_t <= Q - opts.armijo * t * gMg:
                    accepted = True
                    break
            t *= 0.5
        if not accepted:
            # the line search cannot make progress; a flat landscape at
            # this scale counts as converged
            converged = True
            break
        uf, a, Q = trial, a_t, Q_t
        trace_q.append(Q)
        trace_step.append(t)
        if len(trace_q) > opts.window:
            drop = trace_q[-opts.window - 1] - Q
            if drop < opts.q_rel_tol * max(abs(Q), 1e-300):
                converged = True
                break

    iterations = len(trace_q) - 1

    b = _nonlinear_coeffs(basis, uf, p)
    el = _el_residual_rel(basis, params, lam, a, Q, b)
    if opts.polish:
        for _ in range(opts.polish_max):
            if el <= opts.polish_tol:
                break
            a_hat = b / (lam_s - lam)
            u_hat = np.abs(basis.vecs @ a_hat)
            c = critical_norm(ops, params, u_hat)
            if c <= 0:
                break
            u_hat = u_hat / c
            a_hat = basis.coefficients(u_hat)
            Q_hat = q_of(a_hat)
            if Q_hat > Q:
                break
            uf, a, Q = u_hat, a_hat, Q_hat
            trace_q.append(Q)
            trace_step.append(0.0)
            b = _nonlinear_coeffs(basis, uf, p)
            el = _el_residual_rel(basis, params, lam, a, Q, b)

    fa = basis.vecs @ (lam_s * a)
    g = 2.0 * (fa - lam * uf)
    a_g = basis.coefficients(g)
    grad_res = float(np.linalg.norm(a_g))

    u_star = Field.from_free(ops, uf)
    l2 = float(np.sum(uf**2))
    participation = float(np.sum(uf**4) / l2**2) if l2 > 0 else float("nan")
    return MinimizerReport(
        lam=float(lam), flag="OK", witness_quotient=witness, value=Q,
        minimizer=u_star, converged=converged, iterations=iterations,
        trace_q=trace_q, trace_step=trace_step,
        max_abs=float(np.max(np.abs(uf))), participation=participation,
        grad_residual=grad_res, el_residual=el)


def sobolev_constant_dirichlet(
    basis: SpectralBasis,
    params: FracParams,
    opts: MinimizeOptions | None = None,
) -> MinimizerReport:
    """Quotient infimum at lam = 0: the domain-constrained Sobolev constant.

    Always at most |Omega|^(2s/N) * lambda_1^s by testing with the first
    eigenfunction and Hoelder; that bound is asserted on every run.
    """
    rep = minimize_quotient(basis, params, lam=0.0, opts=opts)
    vol = basis.ops.mesh.volume
    bound = vol ** (2.0 * params.s / params.N) * basis.lams[0] ** params.s
    if not rep.value <= bound * (1.0 + 1e-10):
        raise AssertionError(
            f"constrained constant {rep.value} exceeds its eigenvalue bound "
            f"{bound}; discretization is inconsistent")
    return rep


@dataclass(frozen=True)
class SolutionReport:
    """Rescaled minimizer as a candidate solution of the critical equation."""

    v: Field
    k: float
    S: float
    residual: Field
    residual_rel: float
    min_interior: float
    positive: bool
    energy_value: float

    def as_dict(self) -> dict:
        return {
            "k": self.k, "S": self.S, "residual_rel": self.residual_rel,
            "min_interior": self.min_interior, "positive": self.positive,
            "energy_value": self.energy_value,
        }


def rescale_to_solution(
    minrep: MinimizerReport,
    basis: SpectralBasis,
    params: FracParams,
) -> SolutionReport:
    """Rescale a minimizer so it solves the critical equation.

    v = k u* with k = S**(1/(2*-2)) satisfies (operator)v = lam v + v^(2*-1)
    in the discrete weak sense; the residual reported here measures exactly
    that optimality system, with the nonlinear term mapped through the
    inverse consistent mass so both sides live in the same duality.

    Raises
    ------
    ValueError
        If the report is flagged NONEXISTENCE-REGIME or did not converge.
    """
    if minrep.flag != "OK" or minrep.minimizer is None:
        raise ValueError("cannot rescale: minimization was in the "
                         "nonexistence regime")
    if minrep.value <= 0:
        raise ValueError("cannot rescale a nonpositive quotient value")
    ops = basis.ops
    p = params.two_star
    lam = minrep.lam
    S = minrep.value
    k = S ** (1.0 / (p - 2.0))

    uf = minrep.minimizer.free_values(ops)
    a = basis.coefficients(uf)
    b = _nonlinear_coeffs(basis, uf, p)
    lam_s = basis.lams**params.s
    rho = k * (lam_s * a - lam * a - S * b)
    res_free = basis.vecs @ rho
    denom = k * float(np.linalg.norm(lam_s * a))
    residual_rel = float(np.linalg.norm(rho)) / max(denom, 1e-300)

    v = Field.from_free(ops, k * uf)
    interior = ops.mesh.interior_node_mask
    min_interior = float(np.min(v.values[interior]))
    energy = (0.5 * k**2 * float(np.sum(lam_s * a**2))
              - 0.5 * lam * k**2 * float(np.sum(a**2))
              - (k**p / p) * 1.0)
    return SolutionReport(
        v=v, k=k, S=S, residual=Field.from_free(ops, res_free),
        residual_rel=residual_rel, min_interior=min_interior,
        positive=bool(min_interior > 0), energy_value=energy)


@dataclass(frozen=True)
class SweepResult:
    """Row-per-lambda table of quotient minimizations."""

    rows: list[dict]
    lam1s: float

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def sweep_lambda(
    basis: SpectralBasis,
    params: FracParams,
    lam_grid,
    opts: MinimizeOptions | None = None,
) -> SweepResult:
    """Minimize the quotient over an ascending grid of lambda values.

    Values must lie in [0, 1.2 * lambda_1^s].  Each minimization warm-starts
    from the previous minimizer, which makes the S_lambda column monotone
    nonincreasing by construction; grid points at or above the fractional
    principal eigenvalue are flagged instead of iterated.

    Returns
    -------
    SweepResult
    """
    lam1s = float(basis.lams[0] ** params.s)
    grid = np.sort(np.asarray(list(lam_grid), dtype=float))
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if grid[0] < 0 or grid[-1] > 1.2 * lam1s * (1 + 1e-12):
        raise ValueError(
            f"lambda grid must lie in [0, {1.2 * lam1s}] to stay within "
            f"the two regimes")

    rows = []
    init = None
    prev_S = None
    for lam in grid:
        rep = minimize_quotient(basis, params, float(lam), init=init, opts=opts)
        if rep.flag == "OK":
            init = rep.minimizer
            if prev_S is not None and rep.value > prev_S * (1 + 1e-12):
                raise AssertionError(
                    "S_lambda failed to decrease along the sweep")
            prev_S = rep.value
        rows.append({
            "lam": float(lam),
            "nonexistence": rep.flag == NONEXISTENCE,
            "witness_quotient": rep.witness_quotient,
            "S_lambda": rep.value,
            "converged": rep.converged,
            "iterations": rep.iterations,
            "max_abs": rep.max_abs,
            "participation": rep.participation,
        })
    return SweepResult(rows=rows, lam1s=lam1s)


@dataclass(frozen=True)
class MoveBoundaryResult:
    """Row-per-alpha table for the shrinking Dirichlet family."""

    rows: list[dict]
    threshold: float
    onset_alpha: float

    def column(self, name: str) -> list:
        return [r[name] for r in self.rows]


def move_boundary_experiment(
    mesh: Mesh,
    params: FracParams,
    alphas,
    faces=None,
    opts: MinimizeOptions | None = None,
    kappa: float | None = None,
) -> MoveBoundaryResult:
    """Shrink the Dirichlet part and track eigenvalues against the threshold.

    For each alpha (snapped down to a facet union) the table records the
    principal eigenvalue, its fractional power, the constrained Sobolev
    constant at lam = 0, and whether |Omega|^(2s/N) lambda_1^s has dropped
    below the attainment threshold; the first alpha where it has is
    ``onset_alpha`` (NaN if none).  Eigenvalue columns are monotone
    nonincreasing as alpha decreases, which is asserted.

    Parameters
    ----------
    mesh : Mesh
    params : FracParams
    alphas : sequence of float
        Strictly decreasing Dirichlet measures.
    faces : sequence, optional
        Fill order restriction passed to :func:`fraclap.mesh.moving_family`.
    opts : MinimizeOptions, optional
    kappa : float, optional
        Extension coupling constant; calibrated if omitted.

    Returns
    -------
    MoveBoundaryResult
    """
    from .mesh import moving_family

    parts = moving_family(mesh, alphas, faces)
    snapped = [p.alpha for p in parts]
    if any(b >= a for a, b in zip(snapped, snapped[1:])):
        raise ValueError(
            f"alphas snap to non-distinct facet unions {snapped}; "
            f"refine the mesh or spread the alphas")
    thr = attainment_threshold(params, kappa)
    vol_pow = mesh.volume ** (2.0 * params.s / params.N)

    rows = []
    onset = float("nan")
    prev = None
    for alpha_req, part in zip(alphas, parts):
        ops = assemble_operators(mesh, part)
        basis = eigendecompose(ops, m="all")
        lam11 = float(basis.lams[0])
        lam1s_val = lam11**params.s
        srep = sobolev_constant_dirichlet(basis, params, opts)
        bound = vol_pow * lam1s_val
        sufficient = bool(bound < thr)
        if sufficient and np.isnan(onset):
            onset = part.alpha
        if prev is not None and lam11 > prev * (1 + 1e-12):
            raise AssertionError("principal eigenvalue increased as the "
                                 "Dirichlet part shrank")
        prev = lam11
        rows.append({
            "alpha_requested": float(alpha_req),
            "alpha": part.alpha,
            "lam_1_1": lam11,
            "lam_1_s": lam1s_val,
            "S_tilde": srep.value,
            "bound": bound,
            "threshold": thr,
            "sufficient": sufficient,
        })
    return MoveBoundaryResult(rows=rows, threshold=thr, onset_alpha=onset)
