import numpy as np
import pytest

from iabsim.ascent import (
    AscentConfig,
    assign_channels_and_powers,
    build_relay_tree,
    mean_path_length,
    objective_value,
    power_control_iterate,
    solve,
    supported_set,
)
from iabsim.bounds import capacity_upper_bound
from iabsim.errors import StateError
from iabsim.radio import Assignment, RadioParams, gain_matrix, min_power_closed_form, sinr_vector
from iabsim.topology import ABS_ID, Region, Topology, sample_ppp

from conftest import line_topology


def _tree_ok(tree, params, n):
    """Forest rooted at the ABS, capacity respected, ABS degree within K."""
    for i in tree.parent:
        path = tree.path(i)
        assert path[-1] == ABS_ID and len(set(path)) == len(path)
        assert params.demand * tree.subtree_size(i) <= params.link_capacity + 1e-9
    assert sum(1 for p in tree.parent.values() if p == ABS_ID) <= params.k_channels
    assert set(tree.parent) | tree.unconnected == set(range(1, n + 1))
    assert not set(tree.parent) & tree.unconnected
    for i in tree.parent:
        assert tree.residual_capacity[i] == pytest.approx(params.link_capacity - params.demand * tree.subtree_size(i))
        assert tree.residual_capacity[i] >= -1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        AscentConfig(power_iterations=0)
    with pytest.raises(ValueError):
        AscentConfig(sinr_tol=0.0)


def test_empty_topology():
    t = Topology((0, 0), np.zeros((0, 2)))
    tree = build_relay_tree(t, RadioParams())
    assert tree.parent == {} and tree.unconnected == set()
    rep = solve(t, RadioParams())
    assert rep.supported_count == 0 and rep.power_sum == 0.0 and rep.objective == 0.0
    assert mean_path_length(rep) == 0.0


def test_collinear_chain():
    params = RadioParams(link_capacity=3.0, demand=1.0)
    tree = build_relay_tree(line_topology(10.0, 20.0, 30.0), params)
    assert tree.parent == {1: ABS_ID, 2: 1, 3: 2}
    assert tree.order == [1, 2, 3]
    # the ABS link carries all three demands
    assert tree.subtree_size(1) == 3
    assert tree.residual_capacity[1] == 0.0
    assert tree.residual_capacity[ABS_ID] == params.k_channels * 3.0 - 3.0
    _tree_ok(tree, params, 3)


def test_collinear_without_relay_capacity():
    params = RadioParams(link_capacity=1.0, demand=1.0)
    tree = build_relay_tree(line_topology(10.0, 20.0, 30.0), params)
    assert tree.parent == {1: ABS_ID, 2: ABS_ID, 3: ABS_ID}


def test_abs_link_limit_leaves_far_sbs_unconnected():
    params = RadioParams(link_capacity=1.0, demand=1.0, k_channels=2)
    tree = build_relay_tree(line_topology(10.0, 20.0, 30.0), params)
    assert tree.parent == {1: ABS_ID, 2: ABS_ID}
    assert tree.unconnected == {3}


def test_single_hop_mode():
    params = RadioParams(link_capacity=10.0, k_channels=2)
    tree = build_relay_tree(line_topology(1.0, 2.0, 3.0), params, allow_relaying=False)
    assert tree.parent == {1: ABS_ID, 2: ABS_ID}
    assert tree.unconnected == {3}


def test_nearest_pair_rule_picks_global_minimum():
    # SBS 2 is closer to SBS 1 than SBS 3 is to anything connected
    t = Topology((0, 0), np.array([[5.0, 0.0], [6.0, 0.0], [0.0, -9.0]]))
    tree = build_relay_tree(t, RadioParams(link_capacity=5.0))
    assert tree.order == [1, 2, 3]
    assert tree.parent == {1: 0, 2: 1, 3: 0}


def test_single_sbs_minimum_power():
    params = RadioParams(k_channels=1)
    rep = solve(line_topology(10.0), params)
    assert rep.assignment.channel[1] == 1
    expected = min_power_closed_form(params, 10.0, 0.0)
    assert expected == pytest.approx(3.333e-7, rel=1e-3)
    assert rep.assignment.power[1] == pytest.approx(expected, rel=1e-6)
    assert rep.supported == {1}
    assert objective_value(rep, 0.1) == pytest.approx(1 - 0.1 * expected)


def test_power_control_one_step_jump():
    params = RadioParams()
    t = line_topology(10.0)
    a = Assignment.empty(1)
    a.relay[1], a.channel[1], a.power[1] = 0, 1, params.p_max
    trace = []
    out = power_control_iterate(t, params, a, [1], trace=trace)
    p_min = params.gamma_min * params.noise * 10.0**3 / (params.gain * params.theta)
    assert trace[1][0] == pytest.approx(p_min, rel=1e-12)
    assert out.power[1] == pytest.approx(p_min, rel=1e-12)
    assert len(trace) == 3


def test_power_control_fixed_point_unchanged():
    params = RadioParams()
    t = line_topology(4.0)
    a = Assignment.empty(1)
    a.relay[1], a.channel[1] = 0, 1
    a.power[1] = min_power_closed_form(params, 4.0, 0.0)
    out = power_control_iterate(t, params, a, [1])
    assert out.power[1] == pytest.approx(a.power[1], rel=1e-14)


def test_power_control_infeasible_pair_pinned():
    params = RadioParams(gamma_min=2.0)
    t = Topology((0, 0), np.array([[3.0, 0.0], [-3.0, 0.0]]))
    a = Assignment.empty(2)
    a.relay[1:] = 0
    a.channel[1:] = 1
    a.power[1:] = params.p_max
    H = gain_matrix(params, t)
    # normalised interference matrix of the pair
    A = np.array([[0, params.gamma_min * H[2, 0] / (params.gain * H[1, 0])],
                  [params.gamma_min * H[1, 0] / (params.gain * H[2, 0]), 0]])
    assert max(abs(np.linalg.eigvals(A))) >= 1
    out = power_control_iterate(t, params, a, [1, 2])
    assert out.power[1:].tolist() == [params.p_max, params.p_max]
    assert (sinr_vector(params, H, out) < params.gamma_min).all()


def test_power_control_requires_assignment():
    with pytest.raises(StateError):
        power_control_iterate(line_topology(1.0), RadioParams(), Assignment.empty(1), [1])


def test_two_group_members_split_channels():
    params = RadioParams(k_channels=2, gamma_min=2.0)
    t = Topology((0, 0), np.array([[3.0, 0.0], [-3.0, 0.0]]))
    log = []
    tree = build_relay_tree(t, params)
    a = assign_channels_and_powers(t, params, tree, AscentConfig(), move_log=log)
    assert sorted(a.channel[1:].tolist()) == [1, 2]
    assert log[0][4] and log[0][3] < log[0][2]
    rep = solve(t, params)
    assert rep.supported == {1, 2}


def test_single_channel_is_pure_power_control():
    params = RadioParams(k_channels=1, link_capacity=10.0)
    t = sample_ppp(Region(radius=3.0), 0.5, seed=2)
    log = []
    tree = build_relay_tree(t, params)
    a = assign_channels_and_powers(t, params, tree, AscentConfig(), move_log=log)
    assert log == []
    assert set(a.channel[list(tree.parent)].tolist()) == {1}


def test_accepted_moves_never_raise_power_sum():
    params = RadioParams(k_channels=3, link_capacity=20.0)
    for seed in range(15):
        t = sample_ppp(Region(radius=3.0), 1.0, seed)
        log = []
        assign_channels_and_powers(t, params, build_relay_tree(t, params), AscentConfig(), move_log=log)
        for _, _, before, after, accepted in log:
            assert accepted == (after <= before)


@pytest.mark.parametrize("seed", range(8))
def test_random_instance_invariants(seed):
    params = RadioParams(k_channels=3, link_capacity=3.0)
    region = Region(radius=3.0)
    t = sample_ppp(region, 0.7, seed)
    rep = solve(t, params)
    _tree_ok(rep.tree, params, t.n_sbs)
    assert rep.supported_count <= capacity_upper_bound(params, region)
    rep.assignment.validate(params)
    # released SBSs are silent, supported SBSs meet the target after retuning
    for i in range(1, t.n_sbs + 1):
        if i not in rep.supported:
            assert rep.assignment.power[i] == 0.0
    for i in rep.supported:
        assert rep.final_sinr[i] >= params.gamma_min * (1 - 1e-6)
        assert rep.path_lengths[i] == rep.assignment.hop_count(i)
    assert rep.power_sum == pytest.approx(rep.assignment.power.sum())
    assert rep.objective == pytest.approx(rep.supported_count - 0.1 * rep.power_sum)


def test_twenty_sbs_within_capacity_bound():
    params = RadioParams()
    region = Region(radius=10.0)
    t = Topology((0, 0), np.random.default_rng(1).uniform(-7, 7, size=(20, 2)))
    rep = solve(t, params)
    assert rep.supported_count <= capacity_upper_bound(params, region)


def test_supported_set_requires_supported_route():
    params = RadioParams()
    a = Assignment.empty(3)
    a.relay[1:] = [0, 1, 2]
    a.channel[1:] = [1, 2, 1]
    sinrs = {1: 0.1, 2: 0.5, 3: 0.5}
    assert supported_set(params, a, sinrs, 1e-6) == set()
    sinrs[1] = 0.3 * (1 - 1e-7)
    assert supported_set(params, a, sinrs, 1e-6) == {1, 2, 3}


def test_solver_is_deterministic():
    params = RadioParams(link_capacity=10.0)
    t = sample_ppp(Region(radius=3.0), 1.5, seed=9)
    a, b = solve(t, params), solve(t, params)
    assert a.assignment == b.assignment
    assert a.power_sum == b.power_sum
