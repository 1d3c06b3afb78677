"""Constrained quotient minimization, rescaling, sweeps, moving boundary."""
import numpy as np
import pytest

import fraclap as fl
from fraclap.critical import NONEXISTENCE

from conftest import m_norm


@pytest.fixture(scope="module")
def lam1s(square_basis, params2):
    return float(square_basis.lams[0] ** params2.s)


@pytest.fixture(scope="module")
def minrep(square_basis, params2, lam1s):
    return fl.minimize_quotient(square_basis, params2, 0.5 * lam1s)


def test_quotient_at_principal_eigenfunction(square_basis, params2, lam1s):
    phi1 = fl.mode_field(square_basis, 1)
    rep = fl.quotient(square_basis, params2, lam1s, phi1)
    assert rep.route == "spectral"
    assert rep.energy == pytest.approx(lam1s, rel=1e-12)
    assert rep.l2_sq == pytest.approx(1.0, rel=1e-12)
    assert abs(rep.value) < 1e-12 * lam1s


def test_quotient_scale_invariant(square_basis, params2, lam1s):
    u = fl.Field.from_callable(
        square_basis.ops.mesh, square_basis.ops.partition,
        lambda x: x[:, 0] * (1.0 + x[:, 1]))
    scaled = fl.Field(values=3.7 * u.values, mesh=u.mesh,
                      partition=u.partition)
    q1 = fl.quotient(square_basis, params2, 0.3 * lam1s, u)
    q2 = fl.quotient(square_basis, params2, 0.3 * lam1s, scaled)
    assert q2.value == pytest.approx(q1.value, rel=1e-12)
    assert q2.crit_sq == pytest.approx(3.7**2 * q1.crit_sq, rel=1e-12)


def test_quotient_rejects_zero_field(square_basis, params2):
    zero = fl.Field(values=np.zeros(square_basis.ops.mesh.n_nodes),
                    mesh=square_basis.ops.mesh,
                    partition=square_basis.ops.partition)
    with pytest.raises(ValueError):
        fl.quotient(square_basis, params2, 0.0, zero)


def test_minimize_basic_descent(minrep, square_basis, params2, lam1s):
    assert minrep.flag == "OK"
    assert minrep.converged
    assert 0 < minrep.value < minrep.witness_quotient * (1 + 1e-12)
    assert np.all(np.diff(minrep.trace_q) <= 0)
    assert minrep.el_residual < 1e-6
    assert 0 < minrep.participation <= 1
    vals = minrep.minimizer.values
    assert np.all(vals >= 0)
    assert minrep.max_abs == pytest.approx(np.max(vals), rel=1e-15)


def test_minimize_nonexistence_regime(square_basis, params2, lam1s):
    rep = fl.minimize_quotient(square_basis, params2, 1.1 * lam1s)
    assert rep.flag == NONEXISTENCE
    assert rep.witness_quotient <= 0
    assert np.isnan(rep.value)
    assert rep.iterations == 0
    assert rep.minimizer is None
    # the boundary case lam = lam_1^s is already nonexistence
    edge = fl.minimize_quotient(square_basis, params2, lam1s)
    assert edge.flag == NONEXISTENCE


def test_minimize_warm_start_stability(square_basis, params2, lam1s, minrep):
    # re-minimizing from a converged minimizer stays put: the property the
    # lambda sweep's warm starting relies on
    rep = fl.minimize_quotient(square_basis, params2, 0.5 * lam1s,
                               init=minrep.minimizer)
    assert rep.value <= minrep.value * (1 + 1e-12)
    assert rep.value == pytest.approx(minrep.value, rel=1e-8)


def test_minimize_landscape_has_multiple_basins(square_basis, params2, lam1s,
                                                minrep):
    # a concentrated start can land in a different, lower critical point;
    # both endpoints still satisfy the optimality system
    bump = fl.Field.from_callable(
        square_basis.ops.mesh, square_basis.ops.partition,
        lambda x: 1.0 + 0.5 * np.sin(3 * x[:, 0]) * np.cos(2 * x[:, 1]))
    rep = fl.minimize_quotient(square_basis, params2, 0.5 * lam1s, init=bump)
    assert rep.flag == "OK" and rep.converged
    assert rep.el_residual < 1e-6
    assert 0 < rep.value <= minrep.value * (1 + 1e-12)


def test_minimize_guards(square_basis, params2, square_ops):
    with pytest.raises(ValueError):
        fl.minimize_quotient(square_basis, params2, -1.0)
    other = fl.build_tensor_mesh(2, [(0.0, 1.0), (0.0, 1.0)], [4, 4])
    part = fl.partition_boundary(other, [(0, 0)])
    foreign = fl.Field.from_callable(other, part, lambda x: 1.0 + x[:, 0])
    with pytest.raises(ValueError):
        fl.minimize_quotient(square_basis, params2, 0.1, init=foreign)
    zero = fl.Field(values=np.zeros(square_ops.mesh.n_nodes),
                    mesh=square_ops.mesh, partition=square_ops.partition)
    with pytest.raises(ValueError):
        fl.minimize_quotient(square_basis, params2, 0.1, init=zero)
    trunc = fl.eigendecompose(square_ops, m=4)
    with pytest.raises(fl.TruncatedBasisError):
        fl.minimize_quotient(trunc, params2, 0.1)


def test_sobolev_constant_dirichlet_bound(square_basis, params2):
    rep = fl.sobolev_constant_dirichlet(square_basis, params2)
    assert rep.flag == "OK"
    vol = square_basis.ops.mesh.volume
    bound = vol ** (2 * params2.s / params2.N) * square_basis.lams[0] ** params2.s
    assert rep.value <= bound * (1 + 1e-10)


def test_rescale_to_solution(minrep, square_basis, params2):
    sol = fl.rescale_to_solution(minrep, square_basis, params2)
    p = params2.two_star
    assert sol.k == pytest.approx(minrep.value ** (1.0 / (p - 2)), rel=1e-14)
    assert sol.S == minrep.value
    assert np.allclose(sol.v.values, sol.k * minrep.minimizer.values,
                       rtol=1e-14, atol=0)
    # the relative optimality residual is scale invariant
    assert sol.residual_rel == pytest.approx(minrep.el_residual, rel=1e-10)
    assert sol.positive == (sol.min_interior > 0)
    ops = square_basis.ops
    a = square_basis.coefficients(minrep.minimizer.free_values(ops))
    lam_s = square_basis.lams ** params2.s
    manual = (0.5 * sol.k**2 * float(np.sum(lam_s * a**2))
              - 0.5 * minrep.lam * sol.k**2 * float(np.sum(a**2))
              - sol.k**p / p)
    assert sol.energy_value == pytest.approx(manual, rel=1e-12)


def test_rescale_rejects_nonexistence(square_basis, params2, lam1s):
    rep = fl.minimize_quotient(square_basis, params2, 1.15 * lam1s)
    with pytest.raises(ValueError):
        fl.rescale_to_solution(rep, square_basis, params2)


def test_sweep_lambda_table(square_basis, params2, lam1s):
    grid = [0.8 * lam1s, 0.0, 1.1 * lam1s, 0.4 * lam1s, lam1s]
    res = fl.sweep_lambda(square_basis, params2, grid)
    lams = res.column("lam")
    assert lams == sorted(lams)
    assert res.lam1s == pytest.approx(lam1s, rel=1e-15)
    flags = res.column("nonexistence")
    assert flags == [lam >= lam1s for lam in lams]
    ok_S = [r["S_lambda"] for r in res.rows if not r["nonexistence"]]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(ok_S, ok_S[1:]))
    for row in res.rows:
        if row["nonexistence"]:
            assert np.isnan(row["S_lambda"])
            assert row["iterations"] == 0


def test_sweep_lambda_guards(square_basis, params2, lam1s):
    with pytest.raises(ValueError):
        fl.sweep_lambda(square_basis, params2, [])
    with pytest.raises(ValueError):
        fl.sweep_lambda(square_basis, params2, [-0.1])
    with pytest.raises(ValueError):
        fl.sweep_lambda(square_basis, params2, [1.3 * lam1s])


def test_move_boundary_small_family(params2):
    mesh = fl.build_tensor_mesh(2, [(0.0, 1.0), (0.0, 1.0)], [8, 8])
    kap = fl.kappa_s(params2)
    res = fl.move_boundary_experiment(mesh, params2, [1.0, 0.5, 0.25],
                                      kappa=kap)
    thr = fl.attainment_threshold(params2, kappa=kap)
    assert res.threshold == pytest.approx(thr, rel=1e-15)
    alphas = res.column("alpha")
    assert all(b < a for a, b in zip(alphas, alphas[1:]))
    lam11 = res.column("lam_1_1")
    assert all(b <= a * (1 + 1e-12) for a, b in zip(lam11, lam11[1:]))
    for row in res.rows:
        assert row["lam_1_s"] == pytest.approx(row["lam_1_1"] ** params2.s,
                                               rel=1e-14)
        assert row["sufficient"] == (row["bound"] < thr)
    if not np.isnan(res.onset_alpha):
        hits = [r for r in res.rows if r["sufficient"]]
        assert hits and hits[0]["alpha"] == res.onset_alpha


def test_move_boundary_rejects_non_distinct_alphas(params2):
    # on a 4x4 square both requests snap down to the same 15-facet union
    mesh = fl.build_tensor_mesh(2, [(0.0, 1.0), (0.0, 1.0)], [4, 4])
    with pytest.raises(ValueError):
        fl.move_boundary_experiment(mesh, params2, [0.99, 0.98],
                                    kappa=0.478)
