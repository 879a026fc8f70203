import numpy as np
import pytest

from etconsensus import topology
from etconsensus.config import _build_topology, auto_fault_refs
from etconsensus.faults import CommFaultSpec
from etconsensus.presets import paper_config


@pytest.fixture()
def preset_topo():
    return _build_topology(paper_config())


@pytest.fixture()
def preset_channels(preset_topo):
    rng = np.random.default_rng(0)
    _, waveforms = auto_fault_refs(paper_config()["topology"])
    return {
        cid: CommFaultSpec(amplitude=0.25, frequency=rng.uniform(0, 1),
                           waveform=wf)
        for cid, wf in waveforms.items()
    }


def test_preset_passes_all_assumptions(preset_topo):
    bounds = {cid: 0.25 for cid in set(preset_topo.fault_refs.values())}
    report = topology.validate(preset_topo, bounds)
    assert report.passed, report.failures()
    assert preset_topo.n_followers == 8 and preset_topo.m == 3


def test_asymmetric_group_block_fails():
    spec = topology.TopologySpec(
        m=2,
        a11=[[0.0, 1.0], [0.5, 0.0]],  # 1 <-> 2 weights disagree
        a22=[[0.0]], a12=[[0.0], [0.0]], a21=[[1.0, 0.0]],
        g0=[1.0, 1.0], gl=[1.0, 1.0],
    )
    report = topology.validate(spec)
    failed = dict((name, detail) for name, detail in report.failures())
    assert "assumption2_symmetric_groups" in failed


def test_fault_amplitude_exceeding_weight_fails():
    spec = topology.TopologySpec(
        m=2,
        a11=[[0.0, 0.2], [0.2, 0.0]],
        a22=[[0.0]], a12=[[0.0], [0.0]], a21=[[1.0, 0.0]],
        g0=[1.0, 1.0], gl=[1.0, 1.0],
        fault_refs={("a11", 0, 1): "c", ("a11", 1, 0): "c"},
    )
    report = topology.validate(spec, {"c": 0.25})
    assert not report.passed
    assert any(name == "assumption3_positive_weights"
               for name, _ in report.failures())


def test_unreachable_follower_fails():
    spec = topology.TopologySpec(
        m=1, a11=[[0.0]], a22=[[0.0]],
        a12=[[0.0]], a21=[[0.0]],  # no link into group 2
        g0=[1.0], gl=[1.0],
    )
    report = topology.validate(spec)
    assert any(name == "assumption1_path_to_leader"
               for name, _ in report.failures())


def test_effective_weight_at_time_zero():
    spec = topology.TopologySpec(
        m=2, a11=[[0.0, 1.0], [1.0, 0.0]],
        a22=[[0.0]], a12=[[0.0], [0.0]], a21=[[1.0, 0.0]],
        g0=[1.0, 0.0], gl=[1.0, 0.0],
        fault_refs={("a11", 0, 1): "c", ("a11", 1, 0): "c"},
    )
    channels = {"c": CommFaultSpec(amplitude=0.25, frequency=0.5, waveform="cos")}
    snap = topology.effective_weights(spec, channels, 0.0)
    assert snap.a11[0, 1] == pytest.approx(1.25)
    assert snap.a11[1, 0] == pytest.approx(1.25)  # shared channel keeps symmetry


def test_zero_amplitude_matches_nominal(preset_topo):
    for t in (0.0, 1.7, 12.0):
        snap = topology.effective_weights(preset_topo, None, t)
        assert np.array_equal(snap.a11, preset_topo.a11)
        assert np.array_equal(snap.g0, preset_topo.g0)


def test_triangle_laplacian(preset_topo):
    snap = topology.effective_weights(preset_topo, None, 0.0)
    expected = np.array([[2.0, -1.0, -1.0], [-1.0, 2.0, -1.0], [-1.0, -1.0, 2.0]])
    assert np.array_equal(snap.laplacian1, expected)


def test_laplacian_row_sums_zero(preset_topo, preset_channels):
    for t in np.linspace(0.0, 20.0, 41):
        snap = topology.effective_weights(preset_topo, preset_channels, t)
        assert np.abs(snap.laplacian1.sum(axis=1)).max() <= 1e-12
        assert np.abs(snap.laplacian2.sum(axis=1)).max() <= 1e-12
        assert np.array_equal(snap.d1, snap.a11.sum(axis=1))
        assert np.array_equal(snap.d2, snap.a22.sum(axis=1))


def test_single_frequency_periodicity(preset_topo):
    omega = 0.5
    channels = {
        cid: CommFaultSpec(amplitude=0.2, frequency=omega, waveform="sin")
        for cid in set(preset_topo.fault_refs.values())
    }
    t = 1.3
    period = 2 * np.pi / omega
    a = topology.effective_weights(preset_topo, channels, t)
    b = topology.effective_weights(preset_topo, channels, t + period)
    assert np.abs(a.a11 - b.a11).max() <= 1e-10
    assert np.abs(a.g0 - b.g0).max() <= 1e-10


def test_runtime_nonpositive_weight_raises():
    spec = topology.TopologySpec(
        m=2, a11=[[0.0, 0.2], [0.2, 0.0]],
        a22=[[0.0]], a12=[[0.0], [0.0]], a21=[[1.0, 0.0]],
        g0=[1.0, 0.0], gl=[1.0, 0.0],
        fault_refs={("a11", 0, 1): "c", ("a11", 1, 0): "c"},
    )
    channels = {"c": CommFaultSpec(amplitude=0.25, frequency=1.0, waveform="cos")}
    with pytest.raises(topology.AssumptionViolation):
        topology.effective_weights(spec, channels, np.pi)  # cos = -1 there


class TestAdjacencySum:
    @pytest.fixture()
    def snap(self, preset_topo):
        return topology.effective_weights(preset_topo, None, 0.0)

    def test_consensus_fixed_point(self, snap):
        v = np.array([0.3, -0.1])
        values = {j: v for j in range(3)}
        out = topology.adjacency_sum(snap, "a11", 0, v, values)
        assert np.array_equal(out, np.zeros(2))

    def test_hand_sum(self):
        spec = topology.TopologySpec(
            m=3,
            a11=[[0.0, 1.0, 2.0], [1.0, 0.0, 0.0], [2.0, 0.0, 0.0]],
            a22=[[0.0]], a12=[[0.0]] * 3, a21=[[1.0, 0.0, 0.0]],
            g0=[1.0, 0.0, 0.0], gl=[1.0, 0.0, 0.0],
        )
        snap = topology.effective_weights(spec, None, 0.0)
        out = topology.adjacency_sum(
            snap, "a11", 0, np.zeros(2),
            {1: np.array([1.0, 0.0]), 2: np.array([0.0, 1.0])},
        )
        assert np.array_equal(out, [1.0, 2.0])

    def test_isolated_node_empty_sum(self):
        spec = topology.TopologySpec(
            m=2, a11=[[0.0, 0.0], [0.0, 0.0]],  # no in-group edges at all
            a22=[[0.0]], a12=[[1.0], [0.0]], a21=[[1.0, 0.0]],
            g0=[1.0, 1.0], gl=[1.0, 1.0],
        )
        snap = topology.effective_weights(spec, None, 0.0)
        out = topology.adjacency_sum(snap, "a11", 1, np.ones(2), {})
        assert np.array_equal(out, np.zeros(2))

    def test_missing_neighbor_raises(self, snap):
        with pytest.raises(KeyError):
            topology.adjacency_sum(snap, "a11", 0, np.zeros(2), {1: np.zeros(2)})

    def test_linear_in_values(self, snap):
        rng = np.random.default_rng(2)
        v0 = rng.normal(size=2)
        va = {j: rng.normal(size=2) for j in range(3)}
        vb = {j: rng.normal(size=2) for j in range(3)}
        lhs = topology.adjacency_sum(
            snap, "a11", 1, 2.0 * v0,
            {j: va[j] + vb[j] for j in range(3)})
        rhs = (topology.adjacency_sum(snap, "a11", 1, v0, va)
               + topology.adjacency_sum(snap, "a11", 1, v0, vb))
        assert np.abs(lhs - rhs).max() <= 1e-12
