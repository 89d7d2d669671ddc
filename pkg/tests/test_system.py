import math

import numpy as np
import pytest
import sympy

from satiss import Grid, GridMismatchError, \
    ParameterError, StateVector, assemble_closed_loop, build_kdv_operator, \
    check_dissipativity, cosine_disturbance, custom_disturbance, norm_l2, \
    simulate, smooth_initial_data, step, table_disturbance, zero_disturbance
from satiss.saturation import hilbert_norm_map, pointwise_linf_map
from satiss.system import LinearOperator, dissipativity_tolerance

from conftest import L


def test_kdv_matrix_matches_hand_assembly():
    g = Grid(L, 5)
    A = build_kdv_operator(g)
    h = g.spacing_h
    c1, c3 = 1.0 / h, 1.0 / (2.0 * h**3)
    hand = np.array([
        [-c1,        2 * c3,     -c3,        0.0,        0.0],
        [c1 - 2*c3,  -c1,         2 * c3,    -c3,        0.0],
        [c3,         c1 - 2*c3,  -c1,         2 * c3,    -c3],
        [0.0,        c3,          c1 - 2*c3, -c1,         2 * c3],
        [0.0,        0.0,         c3,         c1 - 2*c3, -c1 - c3],
    ])
    np.testing.assert_array_equal(A.matrix, hand)


def test_kdv_needs_five_nodes():
    with pytest.raises(ParameterError):
        build_kdv_operator(Grid(L, 4))


def test_kdv_operator_consistency_first_order():
    # apply the stencil to a profile with flat jets at the walls and
    # compare against symbolic derivatives: sup error halves per doubling
    xs = sympy.symbols("x")
    f = xs**4 * (L - xs) ** 4 * sympy.sin(xs)
    image = -sympy.diff(f, xs) - sympy.diff(f, xs, 3)
    f_np = sympy.lambdify(xs, f, "numpy")
    image_np = sympy.lambdify(xs, image, "numpy")
    errors = []
    for n in (128, 256, 512):
        g = Grid(L, n)
        A = build_kdv_operator(g)
        x = g.interior_nodes()
        errors.append(float(np.max(np.abs(A.matrix @ f_np(x) - image_np(x)))))
    assert errors[0] / errors[1] >= 1.8
    assert errors[1] / errors[2] >= 1.8


def test_dissipativity_gate_passes(kdv127):
    assert kdv127.max_symmetric_eigenvalue <= dissipativity_tolerance(kdv127)
    assert kdv127.max_symmetric_eigenvalue < 0.0


def test_check_dissipativity_examples(grid127, kdv127):
    n = grid127.n_interior
    minus_identity = LinearOperator(grid127, -np.eye(n))
    assert check_dissipativity(minus_identity, 64, 0) == pytest.approx(-1.0, abs=1e-12)

    rng = np.random.default_rng(1)
    raw = rng.standard_normal((n, n))
    skew = LinearOperator(grid127, raw - raw.T)
    assert check_dissipativity(skew, 64, 0) <= 1e-12

    assert check_dissipativity(kdv127, 64, 0) <= 1e-8


def test_operator_apply_and_mismatch(kdv127, grid127):
    z = StateVector(grid127, np.sin(grid127.interior_nodes()))
    np.testing.assert_allclose(kdv127.apply(z).values, kdv127.matrix @ z.values)
    with pytest.raises(GridMismatchError):
        kdv127.apply(StateVector(Grid(L, 64), np.zeros(64)))
    with pytest.raises(GridMismatchError):
        LinearOperator(grid127, np.zeros((3, 3)))


def test_disturbance_kinds(grid127):
    t = 0.7
    zero = zero_disturbance()
    assert zero.norm_at(t, grid127) == 0.0

    cos = cosine_disturbance(0.05, 2.0)
    vals = cos.values_at(t, grid127)
    assert np.all(vals == 0.05 * math.cos(2.0 * t))
    # ||const||_L2 = |const| * sqrt(h n)
    expected = abs(0.05 * math.cos(2.0 * t)) * math.sqrt(
        grid127.spacing_h * grid127.n_interior)
    assert cos.norm_at(t, grid127) == pytest.approx(expected, rel=1e-12)

    rows = [np.zeros(grid127.n_interior), np.ones(grid127.n_interior)]
    table = table_disturbance([0.0, 1.0], rows)
    np.testing.assert_allclose(table.values_at(0.25, grid127),
                               np.full(grid127.n_interior, 0.25))
    np.testing.assert_allclose(table.values_at(5.0, grid127), rows[1])
    np.testing.assert_allclose(table.values_at(-1.0, grid127), rows[0])

    custom = custom_disturbance(lambda s: 0.1 * s)
    assert np.all(custom.values_at(2.0, grid127) == 0.2)


def test_table_disturbance_validation(grid127):
    with pytest.raises(ParameterError):
        table_disturbance([0.0, 0.0], [np.zeros(127), np.zeros(127)])
    with pytest.raises(ParameterError):
        table_disturbance([0.0], [np.zeros(127), np.zeros(127)])


def test_closed_loop_rhs_definitions(kdv127, grid127):
    z = StateVector(grid127, 0.4 * np.sin(grid127.interior_nodes()))

    linear = assemble_closed_loop(kdv127, None, zero_disturbance())
    np.testing.assert_allclose(linear.rhs_values(z.values, 0.0),
                               kdv127.matrix @ z.values - z.values)

    inside = assemble_closed_loop(kdv127, hilbert_norm_map(1.0), zero_disturbance())
    assert norm_l2(z) <= 1.0
    np.testing.assert_allclose(inside.rhs_values(z.values, 0.0),
                               kdv127.matrix @ z.values - z.values)

    disturbed = assemble_closed_loop(kdv127, pointwise_linf_map(1.0, L),
                                     cosine_disturbance(0.05, 1.0))
    big = StateVector(grid127, 2.0 * np.sin(grid127.interior_nodes()))
    expected = kdv127.matrix @ big.values - np.clip(big.values + 0.05, -1.0, 1.0)
    np.testing.assert_allclose(disturbed.rhs_values(big.values, 0.0), expected)


def test_only_identity_control_operator(kdv127):
    from satiss.system import SaturatedSystem
    with pytest.raises(ParameterError):
        SaturatedSystem(A=kdv127, B_is_identity=False)


def test_step_equilibrium_and_contraction(kdv127, grid127):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    zero = StateVector(grid127, np.zeros(grid127.n_interior))
    assert np.all(step(sys_lin, zero, 0.0, 1e-3).values == 0.0)

    z = StateVector(grid127, 1.0 - np.cos(grid127.interior_nodes()))
    dt = 1e-3
    out = step(sys_lin, z, 0.0, dt)
    # strict one-step decay ||z+|| <= ||z|| (1 - c dt) with c > 0
    assert norm_l2(out) <= norm_l2(z) * (1.0 - 0.5 * dt)


def test_step_rejects_large_dt(kdv127, grid127):
    sys_h = assemble_closed_loop(kdv127, hilbert_norm_map(1.0), zero_disturbance())
    z = StateVector(grid127, np.zeros(grid127.n_interior))
    with pytest.raises(ParameterError):
        step(sys_h, z, 0.0, 0.5)  # dt * k = 1.5


def test_step_grid_mismatch(kdv127):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    with pytest.raises(GridMismatchError):
        step(sys_lin, StateVector(Grid(L, 64), np.zeros(64)), 0.0, 1e-3)


def test_step_second_order_self_convergence(kdv127, grid127):
    # unsaturated loop, smooth data: halving dt quarters the error
    rng = np.random.default_rng(17)
    z0 = smooth_initial_data(grid127, kdv127, 2.0, rng)
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    ref = simulate(sys_lin, z0, 1.0, 1e-4).states[-1]
    h = grid127.spacing_h
    errors = []
    for dt in (4e-3, 2e-3, 1e-3):
        zt = simulate(sys_lin, z0, 1.0, dt).states[-1]
        errors.append(math.sqrt(h * float(np.dot(zt - ref, zt - ref))))
    assert 3.0 <= errors[0] / errors[1] <= 5.0
    assert 3.0 <= errors[1] / errors[2] <= 5.0


def test_simulate_zero_initial_state(kdv127, grid127):
    sys_sat = assemble_closed_loop(kdv127, pointwise_linf_map(1.0, L),
                                   zero_disturbance())
    zero = StateVector(grid127, np.zeros(grid127.n_interior))
    traj = simulate(sys_sat, zero, 0.05, 1e-3)
    assert np.all(traj.states == 0.0)
    assert np.all(traj.observables["norm_l2"] == 0.0)


def test_simulate_record_count_and_partial_last_step(kdv127, grid127):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    z = StateVector(grid127, np.sin(grid127.interior_nodes()))
    traj = simulate(sys_lin, z, 0.0105, 1e-3)
    assert len(traj) == math.ceil(0.0105 / 1e-3) + 1
    assert traj.times[-1] == 0.0105
    traj = simulate(sys_lin, z, 0.01, 1e-3)
    assert len(traj) == 11
    assert traj.times[-1] == 0.01


def test_simulate_rejects_bad_horizon(kdv127, grid127):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    z = StateVector(grid127, np.zeros(grid127.n_interior))
    with pytest.raises(ParameterError):
        simulate(sys_lin, z, 0.0, 1e-3)
    with pytest.raises(ParameterError):
        simulate(sys_lin, z, 1.0, 2.0)


def test_contraction_per_step_both_saturations(kdv127, grid127, z0_cosine):
    for sigma in (pointwise_linf_map(1.0, L), hilbert_norm_map(1.0)):
        sys_sat = assemble_closed_loop(kdv127, sigma, zero_disturbance())
        traj = simulate(sys_sat, z0_cosine, 2.0, 1e-3)
        norms = traj.observables["norm_l2"]
        assert np.max(np.diff(norms)) <= 1e-9 * norms[0]


def test_graph_seminorm_monotone_for_smooth_data(kdv127, grid127):
    # ||A_sigma z(t)|| nonincreasing along the undisturbed saturated flow
    rng = np.random.default_rng(5)
    z0 = smooth_initial_data(grid127, kdv127, 4.0, rng)
    sigma = pointwise_linf_map(1.0, L)
    sys_sat = assemble_closed_loop(kdv127, sigma, zero_disturbance())
    traj = simulate(sys_sat, z0, 2.0, 1e-3)
    h = grid127.spacing_h
    seminorms = []
    for i in range(len(traj)):
        w = sys_sat.rhs_values(traj.states[i], 0.0)
        seminorms.append(math.sqrt(h * float(np.dot(w, w))))
    seminorms = np.array(seminorms)
    rel_increase = np.diff(seminorms) / np.maximum(seminorms[:-1], 1e-300)
    assert np.max(rel_increase) <= 1e-6


def test_linear_loop_exponential_decay(kdv127, z0_cosine):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    traj = simulate(sys_lin, z0_cosine, 9.0, 1e-3)
    norms = traj.observables["norm_l2"]
    bound = np.exp(-traj.times) * norms[0] ** 2
    assert np.all(norms**2 <= bound * (1.0 + 1e-6))


def test_simulate_observers_recorded(kdv127, grid127, z0_cosine):
    sys_lin = assemble_closed_loop(kdv127, None, zero_disturbance())
    traj = simulate(sys_lin, z0_cosine, 0.01, 1e-3,
                    observers={"V1": lambda z: 2.0 * norm_l2(z)})
    np.testing.assert_allclose(traj.observables["V1"],
                               2.0 * traj.observables["norm_l2"], rtol=1e-12)
    # defaults: V = ||z||^2, V2 = NaN
    np.testing.assert_allclose(traj.observables["V"],
                               traj.observables["norm_l2"] ** 2, rtol=1e-12)
    assert np.all(np.isnan(traj.observables["V2"]))


def test_trajectory_csv_export(tmp_path, kdv127, grid127, z0_cosine):
    sys_sat = assemble_closed_loop(kdv127, pointwise_linf_map(1.0, L),
                                   cosine_disturbance(0.05, 1.0))
    traj = simulate(sys_sat, z0_cosine, 0.01, 1e-3)
    obs_path = tmp_path / "trajectory.csv"
    traj.write_observables_csv(obs_path)
    lines = obs_path.read_text().splitlines()
    assert lines[0] == "t,norm_l2,norm_linf,norm_graph,V,V1,V2,norm_u,norm_d"
    assert len(lines) == len(traj) + 1

    states_path = tmp_path / "states.csv"
    traj.write_states_csv(states_path)
    head = states_path.read_text().splitlines()[0]
    assert head.startswith("t,z1,") and head.endswith(",z127")

    # determinism: identical bytes on re-export
    again = tmp_path / "again.csv"
    traj.write_observables_csv(again)
    assert again.read_bytes() == obs_path.read_bytes()
