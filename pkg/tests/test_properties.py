import numpy as np
import pytest
from hypothesis import HealthCheck, assume, given, settings
from hypothesis import strategies as st

from iabsim.ascent import AscentConfig, build_relay_tree, power_control_iterate, solve
from iabsim.bounds import capacity_upper_bound, k_star, scalability_check
from iabsim.radio import Assignment, RadioParams, gain_matrix, sinr, sinr_vector
from iabsim.topology import ABS_ID, Region, Topology

SETTINGS = settings(max_examples=60, deadline=None, derandomize=True, suppress_health_check=[HealthCheck.too_slow])

coord = st.floats(-5.0, 5.0, allow_nan=False, allow_infinity=False)


@st.composite
def layouts(draw, min_n=1, max_n=8):
    n = draw(st.integers(min_n, max_n))
    pts = np.array(draw(st.lists(st.tuples(coord, coord), min_size=n, max_size=n)))
    t = Topology((0.0, 0.0), pts)
    d = t.distances + np.eye(n + 1)
    assume(d.min() > 1e-3)
    return t


@st.composite
def radio(draw):
    C = draw(st.sampled_from([1.0, 2.0, 3.0, 6.0]))
    return RadioParams(
        k_channels=draw(st.integers(1, 4)),
        link_capacity=C,
        demand=draw(st.sampled_from([1.0, C / 2, C])),
        gamma_min=draw(st.sampled_from([0.3, 1.0, 2.0])),
    )


@st.composite
def assigned(draw):
    t = draw(layouts())
    params = draw(radio())
    tree = build_relay_tree(t, params)
    a = tree.relay_assignment(t.n_sbs)
    for i in tree.parent:
        a.channel[i] = draw(st.integers(1, params.k_channels))
        a.power[i] = draw(st.floats(1e-12, params.p_max))
    return t, params, tree, a


@SETTINGS
@given(layouts())
def test_distance_matrix_is_a_metric(t):
    d = t.distances
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)
    # d[i, j] <= d[i, k] + d[k, j] for all i, k, j
    assert np.all(d[:, None, :] <= d[:, :, None] + d[None, :, :] + 1e-9)


@SETTINGS
@given(layouts(), radio())
def test_relay_tree_invariants(t, params):
    tree = build_relay_tree(t, params)
    assert set(tree.parent) | tree.unconnected == set(range(1, t.n_sbs + 1))
    for i in tree.parent:
        path = tree.path(i)
        assert path[-1] == ABS_ID and len(path) == len(set(path))
        assert params.demand * tree.subtree_size(i) <= params.link_capacity + 1e-9
    assert sum(p == ABS_ID for p in tree.parent.values()) <= params.k_channels
    # something stays out only when the ABS has no free link
    if tree.unconnected:
        assert sum(p == ABS_ID for p in tree.parent.values()) == params.k_channels


@SETTINGS
@given(assigned())
def test_vectorised_sinr_matches_loop(case):
    t, params, _, a = case
    ids = a.assigned()
    assume(len(ids) > 0)
    vec = sinr_vector(params, gain_matrix(params, t), a, ids)
    loop = [sinr(params, t, a, int(i)) for i in ids]
    assert np.allclose(vec, loop, rtol=1e-10, atol=0)


@SETTINGS
@given(assigned())
def test_power_iterates_nonincreasing_from_pmax(case):
    t, params, tree, a = case
    assume(tree.parent)
    a.power[list(tree.parent)] = params.p_max
    trace = []
    power_control_iterate(t, params, a, list(tree.parent), iterations=60, trace=trace)
    steps = np.array(trace)
    assert np.all(np.diff(steps, axis=0) <= 1e-15 * params.p_max)
    assert np.all(steps >= 0) and np.all(steps <= params.p_max)


@SETTINGS
@given(layouts(max_n=10), radio())
def test_solver_respects_capacity_bound(t, params):
    rep = solve(t, params, AscentConfig(power_iterations=60))
    assert rep.supported_count <= capacity_upper_bound(params, Region(radius=10.0))
    assert rep.supported_count <= params.k_channels * params.flows_per_link
    assert 0 <= rep.power_sum <= params.p_max * rep.supported_count


@SETTINGS
@given(
    st.floats(0.01, 50.0), st.floats(1e-3, 5.0), st.floats(0.2, 5.0),
    st.floats(1e-4, 1e4), st.floats(1.0, 1e8),
)
def test_channel_count_density_free(gamma, zeta, gain, lam, m):
    params = RadioParams(gamma_min=gamma, zeta=zeta, gain=gain)
    res = scalability_check(params, lam, m)
    assert res.ok and res.k_star == k_star(params)


@SETTINGS
@given(radio())
def test_radio_section_round_trip(params):
    assert RadioParams.from_section(params.to_section()) == params
