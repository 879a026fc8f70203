import numpy as np
import pytest

from etconsensus import numerics, synthesis, topology
from etconsensus.config import _build_topology
from etconsensus.presets import paper_config


def kron_regulator_oracle(a, b, c, a0, c0):
    """Brute-force dense pseudo-inverse solve of the regulation equations."""
    n, p, n0 = a.shape[0], b.shape[1], a0.shape[0]
    eye = np.eye(n0)
    top = np.hstack([np.kron(a0.T, np.eye(n)) - np.kron(eye, a),
                     -np.kron(eye, b)])
    bot = np.hstack([np.kron(eye, c), np.zeros((c.shape[0] * n0, p * n0))])
    system = np.vstack([top, bot])
    rhs = np.concatenate([np.zeros(n * n0), numerics.vec(c0)])
    z = np.linalg.pinv(system) @ rhs
    return numerics.mat(z[:n * n0], n, n0), numerics.mat(z[n * n0:], p, n0)


@pytest.fixture()
def paper_models():
    cfg = paper_config()
    return [
        synthesis.AgentModel(a=e["a"], b=e["b"], c=e["c"],
                             group=1 if i < 3 else 2)
        for i, e in enumerate(cfg["agents"])
    ]


@pytest.fixture()
def leader(a0):
    return synthesis.LeaderModel(a0=a0, c0=[[1.0, 2.0]], mode="crm", kappa=0.2)


class TestStabilize:
    def test_direct_assignment(self):
        t1 = synthesis.stabilize(np.zeros((2, 2)), np.eye(2), [-2.0, -3.0])
        assert np.allclose(t1, np.diag([-3.0, -2.0])) or \
            np.allclose(t1, np.diag([-2.0, -3.0]))

    def test_agent1_margin_window(self, agent1):
        a, b, _ = agent1
        t1 = synthesis.stabilize(a, b, [-2.0, -3.0])
        margin = numerics.hurwitz_margin(a + b @ t1)
        assert -3.0 - 1e-6 <= margin <= -2.0 + 1e-6

    def test_uncontrollable_rejected(self):
        with pytest.raises(synthesis.SynthesisError):
            synthesis.stabilize(np.eye(2), np.zeros((2, 2)), [-1.0, -2.0])

    def test_positive_pole_rejected(self, agent1):
        a, b, _ = agent1
        with pytest.raises(synthesis.SynthesisError):
            synthesis.stabilize(a, b, [-1.0, 0.5])


class TestRegulator:
    def test_identity_solution_with_square_output(self, a0):
        # square C pins X exactly, so the minimum-norm solution is (I, 0)
        x, y, res = synthesis.solve_regulator(a0, np.eye(2), np.eye(2),
                                              a0, np.eye(2))
        assert np.abs(x - np.eye(2)).max() <= 1e-12
        assert np.abs(y).max() <= 1e-12
        assert res <= 1e-12

    def test_agent1_against_pinv_oracle(self, agent1, a0):
        a, b, c = agent1
        c0 = np.array([[1.0, 2.0]])
        x, y, res = synthesis.solve_regulator(a, b, c, a0, c0)
        assert res <= 1e-10
        xo, yo = kron_regulator_oracle(a, b, c, a0, c0)
        assert np.abs(x - xo).max() <= 1e-9
        assert np.abs(y - yo).max() <= 1e-9
        # defining equations hold
        assert np.linalg.norm(x @ a0 - a @ x - b @ y) <= 1e-9
        assert np.linalg.norm(c @ x - c0) <= 1e-9

    def test_unsolvable_output_constraint(self, a0):
        with pytest.raises(synthesis.SynthesisError, match="unsolvable"):
            synthesis.solve_regulator(
                a0, np.eye(2), np.zeros((1, 2)), a0, np.array([[1.0, 2.0]])
            )


class TestFeedforward:
    def test_zero_y(self):
        t1 = np.array([[1.0, 2.0], [3.0, 4.0]])
        x = np.array([[1.0, 0.0], [1.0, 1.0]])
        assert np.array_equal(
            synthesis.feedforward(t1, x, np.zeros((2, 2))), -t1 @ x)

    def test_zero_t1(self):
        y = np.array([[0.5, -1.0], [2.0, 0.0]])
        assert np.array_equal(
            synthesis.feedforward(np.zeros((2, 2)), np.eye(2), y), y)

    def test_rearrangement_identity(self, agent1, a0):
        a, b, c = agent1
        x, y, _ = synthesis.solve_regulator(a, b, c, a0, np.array([[1.0, 2.0]]))
        t1 = synthesis.stabilize(a, b, [-2.0, -3.0])
        t2 = synthesis.feedforward(t1, x, y)
        assert np.abs(t2 + t1 @ x - y).max() <= 1e-12


class TestFaultObserver:
    def test_leak_inequality_value(self, agent1):
        a, b, _ = agent1
        fo = synthesis.design_fault_observer(a, b, [-5.0, -6.0],
                                             n11_scale=5.0,
                                             alpha2=1.0, alpha3=0.5)
        assert fo.appendix_value == pytest.approx(1.0 + 2.5 - 5.0)
        assert fo.appendix_value < 0

    def test_zero_plant_margin(self):
        fo = synthesis.design_fault_observer(
            np.zeros((2, 2)), np.eye(2), [-5.0, -6.0])
        assert numerics.hurwitz_margin(-fo.w) == pytest.approx(-5.0)

    def test_certificate(self, agent1):
        a, b, _ = agent1
        fo = synthesis.design_fault_observer(a, b, [-5.0, -6.0])
        d = a - fo.w
        assert np.linalg.norm(d.T @ fo.q + fo.q @ d + np.eye(2)) <= 1e-9
        assert np.linalg.eigvalsh(fo.q).min() > 0
        # injection gain ties to the certificate and the input matrix
        assert np.array_equal(fo.n12, b.T @ fo.q)


class TestMatching:
    def test_invertible_input_matrix_exact(self, agent1, a0):
        a, b, c = agent1
        x, _, _ = synthesis.solve_regulator(a, b, c, a0, np.array([[1.0, 2.0]]))
        m11, m12, m1 = np.eye(2), 2 * np.eye(2), 2 * np.eye(2)
        n3, n4, res = synthesis.solve_matching(x, m11, m12, m1, 1.0, b, 1)
        assert max(res) <= 1e-12
        assert np.abs(n3 - np.linalg.solve(b, x @ m11 @ m12)).max() <= 1e-12
        assert np.abs(x @ m11 @ m1 * 1.0 + b @ n4).max() <= 1e-8

    def test_zero_regulation_gain(self, agent1):
        _, b, _ = agent1
        n3, n4, _ = synthesis.solve_matching(
            np.zeros((2, 2)), np.eye(2), np.eye(2), np.eye(2), 1.0, b, 1)
        assert np.abs(n3).max() <= 1e-12 and np.abs(n4).max() <= 1e-12

    def test_group2_single_equation(self, paper_models, a0):
        mdl = paper_models[4]
        x, _, _ = synthesis.solve_regulator(
            mdl.a, mdl.b, mdl.c, a0, np.array([[1.0, 2.0]]))
        n3, n4, res = synthesis.solve_matching(
            x, np.eye(2), 2 * np.eye(2), 2 * np.eye(2), 1.0, mdl.b, 2)
        assert n4 is None and max(res) <= 1e-10
        oracle = np.linalg.pinv(mdl.b) @ (x @ np.eye(2) @ (2 * np.eye(2)))
        assert np.abs(n3 - oracle).max() <= 1e-9


class TestVerifyDecay:
    def test_spectral_abscissa_relation(self, agent1):
        a, b, _ = agent1
        t1 = synthesis.stabilize(a, b, [-2.0, -3.0])
        alpha, p2 = synthesis.verify_decay(a, b, t1, np.zeros((2, 2)))
        assert alpha == pytest.approx(4.0, abs=1e-9)
        assert np.linalg.eigvalsh(p2).min() > 0

    def test_identity_closed_loop(self):
        b = np.eye(2)
        alpha, _ = synthesis.verify_decay(
            np.zeros((2, 2)), b, -np.eye(2), np.zeros((2, 2)))
        assert alpha == pytest.approx(2.0)

    def test_unstable_combination_fails(self, agent1):
        a, b, _ = agent1
        with pytest.raises(synthesis.SynthesisError):
            synthesis.verify_decay(a, b, np.zeros((2, 2)), np.zeros((2, 2)))


class TestObserverNetwork:
    @pytest.fixture()
    def preset(self, paper_models, leader):
        topo = _build_topology(paper_config())
        defaults = synthesis.SynthesisDefaults()
        gains, report = synthesis.synthesize_all(
            paper_models, leader, topo, defaults, horizon=20.0)
        return topo, gains, report

    def test_margin_negative_over_sweep(self, preset):
        topo, gains, report = preset
        assert report.network["passed"]
        assert report.network["samples"] == 100
        assert report.network["margin"] < 0

    def test_unforced_copies_fail(self, preset, a0):
        topo, gains, _ = preset
        g1 = gains.group1()
        zeroed = [
            synthesis.AgentGains(**{**g.__dict__,
                                    "m11": np.zeros((2, 2)),
                                    "m1": np.zeros((2, 2)),
                                    "m12": np.zeros((2, 2)),
                                    "m13": np.zeros((2, 2))})
            for g in g1
        ]
        snaps = [topology.effective_weights(topo, None, 0.0)]
        out = synthesis.verify_observer_network(snaps, zeroed, a0)
        assert not out["passed"]
        assert out["margin"] == pytest.approx(0.0, abs=1e-9)

    def test_block_assembly_matches_kronecker_oracle(self, preset, a0):
        """With identical per-agent gains the stacked matrix has the closed
        Kronecker form  I (x) a0 - (m1*Gbar + m12*L + m13*D12) (x) I."""
        topo, gains, _ = preset
        g1 = gains.group1()
        snap = topology.effective_weights(topo, None, 3.7)
        built = synthesis.observer_network_matrix(snap, g1, a0)
        m1 = g1[0].m1[0, 0]
        m12 = g1[0].m12[0, 0]
        m13 = g1[0].m13[0, 0]
        graph = (m1 * np.diag(snap.g0) + m12 * snap.laplacian1
                 + m13 * np.diag(snap.d12))
        oracle = np.kron(np.eye(3), a0) - np.kron(graph, np.eye(2))
        assert np.abs(built - oracle).max() <= 1e-12

    def test_scaling_observer_gains_does_not_hurt(self, preset, a0):
        topo, gains, report = preset
        doubled = [
            synthesis.AgentGains(**{**g.__dict__, "m12": 2 * g.m12,
                                    "m1": 2 * g.m1, "m13": 2 * g.m13})
            for g in gains.group1()
        ]
        snaps = [topology.effective_weights(topo, None, t)
                 for t in np.linspace(0, 20, 100)]
        out = synthesis.verify_observer_network(snaps, doubled, a0)
        # empirical monotonicity on the preset, recorded as a check
        assert out["margin"] <= report.network["margin"] + 1e-9


class TestLeaderFeedback:
    def test_kappa_zero_gives_open_loop(self):
        k = synthesis.design_leader_feedback(np.eye(2), 0.0)
        assert np.array_equal(k, np.zeros((2, 2)))

    def test_identity_regulation_gain(self):
        k = synthesis.design_leader_feedback(np.eye(2), 0.2)
        assert np.abs(k - 0.2 * np.eye(2)).max() <= 1e-12


class TestSynthesizeAll:
    def test_preset_passes(self, paper_models, leader):
        topo = _build_topology(paper_config())
        gains, report = synthesis.synthesize_all(
            paper_models, leader, topo, synthesis.SynthesisDefaults())
        assert report.passed, report.errors
        for idx, entry in report.agents.items():
            assert entry["regulator_residual"] <= 1e-8
            assert max(entry["matching_residuals"]) <= 1e-8
            assert entry["controller_margin"] <= -1.9
            assert entry["observer_margin"] <= -4.9
            assert entry["appendix_value"] < 0
            assert entry["alpha_tilde"] > 0

    def test_uncontrollable_agent_named(self, paper_models, leader):
        broken = list(paper_models)
        broken[4] = synthesis.AgentModel(
            a=broken[4].a, b=np.zeros((2, 2)), c=broken[4].c, group=2)
        topo = _build_topology(paper_config())
        gains, report = synthesis.synthesize_all(
            broken, leader, topo, synthesis.SynthesisDefaults())
        assert not report.passed
        assert any("agent 5" in err for err in report.errors)

    def test_open_loop_mode_zeroes_leader_gains(self, paper_models, a0):
        topo = _build_topology(paper_config())
        orm = synthesis.LeaderModel(a0=a0, c0=[[1.0, 2.0]], mode="orm",
                                    kappa=0.2)
        gains, report = synthesis.synthesize_all(
            paper_models, orm, topo, synthesis.SynthesisDefaults())
        assert report.passed
        for k in gains.leader_k.values():
            assert np.array_equal(k, np.zeros((2, 2)))

    def test_gain_set_roundtrip(self, paper_models, leader):
        topo = _build_topology(paper_config())
        gains, _ = synthesis.synthesize_all(
            paper_models, leader, topo, synthesis.SynthesisDefaults())
        clone = synthesis.GainSet.from_dict(gains.to_dict())
        assert clone.gain_hash() == gains.gain_hash()


def test_regulation_identities_on_preset(paper_models, leader):
    topo = _build_topology(paper_config())
    gains, _ = synthesis.synthesize_all(
        paper_models, leader, topo, synthesis.SynthesisDefaults())
    for g, mdl in zip(gains.agents, paper_models):
        assert np.linalg.norm(
            g.x @ gains.a0 - mdl.a @ g.x - mdl.b @ g.y, "fro") <= 1e-8
        assert np.linalg.norm(mdl.c @ g.x - gains.c0, "fro") <= 1e-8
        assert numerics.hurwitz_margin(mdl.a + mdl.b @ g.t1) < 0
        assert numerics.hurwitz_margin(mdl.a - g.w) < 0
        assert np.linalg.norm(g.x @ g.m11 @ g.m12 - mdl.b @ g.n3, "fro") <= 1e-8
        if g.group == 1:
            g0_nominal = topo.g0[g.index - 1]
            assert np.linalg.norm(
                g.x @ g.m11 @ g.m1 * g0_nominal + mdl.b @ g.n4, "fro") <= 1e-8
