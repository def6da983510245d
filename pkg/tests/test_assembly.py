import numpy as np
import pytest
import scipy.sparse as sp

from oracles import dense_blocks_1d, loop_assemble, reduce_blocks
from osgs_goal.assembly import (
    AssemblyError, SingularMassError, assemble_dual, assemble_primal, condense_lumped, element_tau,
    lumped_mass, schur_operator, write_coo,
)
from osgs_goal.mesh import build_interval_mesh, build_mesh, build_square_mesh
from osgs_goal.problem import builtin_example


def _blocks(system):
    return [system.K.toarray(), system.P.toarray(), system.D.toarray(), system.M.toarray(),
            system.F_tau, system.F]


def _close(got, want, tol=1e-10):
    scale = max(np.max(np.abs(w)) for w in want)
    for g, w in zip(got, want):
        assert np.max(np.abs(np.asarray(g) - w)) <= tol * scale


@pytest.mark.parametrize("n", [4, 7, 10])
@pytest.mark.parametrize("kind", ["primal", "dual"])
def test_1d_matches_closed_form(n, kind):
    p = builtin_example("ex1")
    mesh = build_interval_mesh(n)
    asm = assemble_primal if kind == "primal" else assemble_dual
    sysm = asm(mesh, p)
    tau = float(sysm.tau[0])
    assert np.allclose(sysm.tau, tau)
    sign = 1.0 if kind == "primal" else -1.0
    f = 0.0 if kind == "primal" else 1.0
    glob = dense_blocks_1d(n, p.k, 1000.0, p.s, tau, f, sign)
    ud = np.array([1.0, 0.0]) if kind == "primal" else np.zeros(2)
    free = np.arange(1, n)
    want = reduce_blocks(*glob, free, np.array([0, n]), free, ud)
    _close(_blocks(sysm), want)


@pytest.mark.parametrize("example,n", [("ex2", 6), ("ex3", 8), ("ex4", 8), ("ex2", 10)])
@pytest.mark.parametrize("kind", ["primal", "dual"])
def test_2d_matches_loop_oracle(example, n, kind):
    p = builtin_example(example)
    mesh = build_mesh(p.domain, n)
    asm = assemble_primal if kind == "primal" else assemble_dual
    sysm = asm(mesh, p)
    sign = 1.0 if kind == "primal" else -1.0
    src = p.forcing if kind == "primal" else p.qoi.q
    glob = loop_assemble(mesh.nodes, mesh.elements, p.k, p.s,
                         lambda x: p.advection(x[None])[0], lambda x: float(src(x[None])[0]),
                         sysm.tau, sign, points=sysm.quad_points)
    dm = sysm.dofmap
    want = reduce_blocks(*glob, dm.free, dm.fixed, sysm.xi_nodes, dm.values[dm.fixed])
    _close(_blocks(sysm), want)


def test_all_node_projection_space():
    p = builtin_example("ex3")
    mesh = build_square_mesh(4)
    s = assemble_primal(mesh, p, xi_space="all")
    assert s.n_xi == mesh.n_nodes and s.n_u == 9
    with pytest.raises(AssemblyError):
        assemble_primal(mesh, p, xi_space="boundary")


@pytest.mark.parametrize("example,n", [("ex1", 12), ("ex3", 8), ("ex4", 8)])
def test_schur_operator_adjoint_transpose(example, n):
    # with uniform tau the dual operator is the transpose of the primal one
    p = builtin_example(example)
    mesh = build_mesh(p.domain, n)
    sp_, sd = assemble_primal(mesh, p), assemble_dual(mesh, p)
    assert np.ptp(sp_.tau) <= 1e-14 * sp_.tau.max()
    S, Sd = schur_operator(sp_), schur_operator(sd)
    assert np.max(np.abs(Sd - S.T)) <= 1e-10 * np.max(np.abs(S))
    # blockwise: K_d = K^T, P_d = tau D^T, D_d = P^T / tau
    tau = sp_.tau[0]
    assert np.allclose(sd.K.toarray(), sp_.K.toarray().T, rtol=0, atol=1e-12 * abs(sp_.K).max())
    assert np.allclose(sd.P.toarray(), tau * sp_.D.toarray().T, rtol=0, atol=1e-12 * abs(sd.P).max())


def test_element_tau_velocity_modes():
    p = builtin_example("ex2")
    mesh = build_square_mesh(8)
    t_el = element_tau(mesh, p, velocity="element")
    t_dom = element_tau(mesh, p, velocity="domain")
    assert np.ptp(t_dom) <= 1e-14 * t_dom.max() and np.ptp(t_el) > 0.0
    assert np.all(t_dom <= t_el + 1e-15)
    assert np.array_equal(element_tau(mesh, p), t_dom)
    with pytest.raises(AssemblyError):
        element_tau(mesh, p, velocity="mean")


def test_dimension_mismatch():
    with pytest.raises(AssemblyError):
        assemble_primal(build_square_mesh(4), builtin_example("ex1"))


def test_condensed_system():
    p = builtin_example("ex2")
    s = assemble_primal(build_square_mesh(6), p)
    c = condense_lumped(s)
    m = lumped_mass(s.M)
    assert np.allclose(m, s.M.toarray().sum(axis=1))
    assert c.A.shape == s.K.shape
    with pytest.raises(SingularMassError):
        lumped_mass(sp.csr_matrix(np.array([[1.0, -1.0], [-1.0, 1.0]])))


def test_write_coo_roundtrip(tmp_path):
    A = sp.random(7, 5, density=0.4, random_state=3, format="csr")
    path = tmp_path / "a.coo"
    write_coo(A, path)
    lines = path.read_text().splitlines()
    assert lines[0] == f"% 7 5 {A.nnz}"
    data = np.loadtxt(lines[1:], ndmin=2)
    B = sp.coo_matrix((data[:, 2], (data[:, 0].astype(int), data[:, 1].astype(int))), shape=(7, 5))
    assert np.array_equal(B.toarray(), A.toarray())
