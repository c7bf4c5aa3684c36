import numpy as np
import pytest

from sbcert.errors import InputError
from sbcert.streams import RandomStreams
from sbcert.system import (
    Edge,
    LinearAgent,
    NetworkTopology,
    NoiseSpec,
    NonlinearAgent,
    RegionSpec,
    build_platoon,
    simulate,
    step,
)

NO_NOISE = NoiseSpec(kind="none", dimension=2)


def _agent(A, b, D, R, dim=2):
    return LinearAgent(A=np.asarray(A, dtype=float), b=np.asarray(b, dtype=float),
                       D=np.asarray(D, dtype=float), R=np.asarray(R, dtype=float),
                       noise=NoiseSpec(kind="none", dimension=dim))


def test_step_identity():
    a = _agent(np.eye(2), np.zeros(2), np.zeros((2, 1)), np.zeros((2, 2)))
    out = step(a, np.array([1.0, 2.0]), np.array([0.0]), RandomStreams(0).stream(0))
    assert np.array_equal(out, [1.0, 2.0])


def test_step_pure_offset():
    a = _agent(np.zeros((2, 2)), [0.1, 0.0], np.zeros((2, 1)), np.zeros((2, 2)))
    out = step(a, np.array([5.0, -3.0]), np.array([0.0]), RandomStreams(0).stream(0))
    assert np.allclose(out, [0.1, 0.0])


def test_step_platoon_closed_loop():
    # closed-loop vehicle matrices with noise off: x=(0.5, 0), w=0
    agents, _, _ = build_platoon(1, noise_kind="none")
    out = step(agents[0], np.array([0.5, 0.0]), np.array([0.0, 0.0]),
               RandomStreams(0).stream(0))
    assert np.allclose(out, [0.8 * 0.5 + 0.1, 0.01 * 0.5], atol=1e-15)


def test_step_dimension_mismatch():
    a = _agent(np.eye(2), np.zeros(2), np.zeros((2, 1)), np.zeros((2, 2)))
    with pytest.raises(InputError):
        step(a, np.array([1.0]), np.array([0.0]), RandomStreams(0).stream(0))
    with pytest.raises(InputError):
        step(a, np.array([1.0, 2.0]), np.array([0.0, 0.0]),
             RandomStreams(0).stream(0))


def test_linear_part_additive():
    rng = np.random.default_rng(11)
    a = _agent(rng.normal(size=(3, 3)), rng.normal(size=3),
               rng.normal(size=(3, 2)), np.zeros((3, 3)), dim=3)
    g = RandomStreams(0).stream(0)
    w = rng.normal(size=2)
    for _ in range(20):
        x1, x2 = rng.normal(size=3), rng.normal(size=3)
        lhs = step(a, x1 + x2, w, g) - a.b
        rhs = (step(a, x1, w, g) - a.b) + (step(a, x2, np.zeros(2), g) - a.b)
        assert np.allclose(lhs, rhs, atol=1e-12)


def test_nonlinear_agent_step():
    a = NonlinearAgent(transition=lambda x, w: x ** 2 + w,
                       R=np.zeros((1, 1)), noise=NoiseSpec("none", 1))
    out = step(a, np.array([3.0]), np.array([1.0]), RandomStreams(0).stream(0))
    assert np.allclose(out, [10.0])


def test_build_platoon_shapes():
    agents, topo, regions = build_platoon(100)
    assert len(agents) == 100 and len(topo.edges) == 99
    for a in agents:
        assert np.array_equal(a.D, [[0.0, 0.01], [0.0, 0.0]])
    # per-column in-degree <= 1 on the chain
    sources = [e.source for e in topo.edges]
    assert len(sources) == len(set(sources))


def test_build_platoon_edges_m3():
    _, topo, _ = build_platoon(3)
    assert {(e.reader, e.source) for e in topo.edges} == {(2, 1), (3, 2)}


def test_build_platoon_single():
    agents, topo, _ = build_platoon(1)
    assert len(agents) == 1 and topo.edges == ()


def test_build_platoon_rejects_zero():
    with pytest.raises(InputError):
        build_platoon(0)


def test_simulate_horizon_zero():
    agents, topo, _ = build_platoon(2, noise_kind="none")
    x0 = np.array([0.5, 0.0, 0.5, 0.0])
    traj = simulate(agents, topo, x0, 0, 3)
    assert traj.shape == (1, 4)
    assert np.array_equal(traj[0], x0)


def test_simulate_scalar_geometric():
    a = LinearAgent(A=np.array([[0.5]]), b=np.zeros(1), D=np.zeros((1, 1)),
                    R=np.zeros((1, 1)), noise=NoiseSpec("none", 1))
    topo = NetworkTopology(M=1, edges=())
    traj = simulate([a], topo, np.array([1.0]), 2, 0)
    assert np.allclose(traj[:, 0], [1.0, 0.5, 0.25])


def test_simulate_chain_coupling():
    agents, topo, _ = build_platoon(2, noise_kind="none")
    x0 = np.array([0.5, 0.1, 0.6, -0.2])
    traj = simulate(agents, topo, x0, 1, 0)
    a = agents[1]
    expected = a.A @ x0[2:] + a.b + a.D @ x0[:2]
    assert np.allclose(traj[1, 2:], expected, atol=1e-14)


def test_simulate_deterministic_given_seed():
    agents, topo, _ = build_platoon(3)
    x0 = np.tile([0.5, 0.0], 3)
    t1 = simulate(agents, topo, x0, 25, 77)
    t2 = simulate(agents, topo, x0, 25, 77)
    assert np.array_equal(t1, t2)
    t3 = simulate(agents, topo, x0, 25, 78)
    assert not np.array_equal(t1, t3)


def test_region_validation():
    with pytest.raises(InputError):   # X0 escapes X
        RegionSpec(X=([0.0], [1.0]), X0=([0.5], [1.5]),
                   Xc=([0.0], [0.1]), W=([0.0], [1.0]))
    with pytest.raises(InputError):   # X0 and Xc overlap
        RegionSpec(X=([0.0], [1.0]), X0=([0.2], [0.6]),
                   Xc=([0.5], [0.9]), W=([0.0], [1.0]))


def test_region_membership():
    r = RegionSpec(X=([0.0, 0.0], [1.0, 1.0]), X0=([0.0, 0.0], [0.2, 0.2]),
                   Xc=([0.8, 0.8], [1.0, 1.0]), W=([0.0], [1.0]))
    pts = np.array([[0.1, 0.1], [0.9, 0.9], [0.5, 0.5]])
    assert r.in_X0(pts).tolist() == [True, False, False]
    assert r.in_Xc(pts).tolist() == [False, True, False]
    assert r.in_X(pts).all()


def test_topology_rejects_self_edge():
    with pytest.raises(InputError):
        NetworkTopology(M=2, edges=(Edge(1, 1),))
