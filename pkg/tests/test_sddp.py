"""Tests for the nested-decomposition training engine."""

import numpy as np
import pytest

from stockpile import lp, model, sddp
from stockpile.errors import DataError, DimensionMismatch
from stockpile.weather import SamplingLattice, WeatherPath, sample_path


def vector(demand, cf=None, hours=1.0):
    """Weather vector with a flat heat profile and optional wind factor."""
    demand = np.asarray(demand, dtype=float)
    factors = {} if cf is None else {
        "wind": np.asarray(cf, dtype=float) + np.zeros_like(demand)}
    return model.WeatherVector(
        capacity_factors=factors,
        demand=demand,
        heat_demand=np.zeros_like(demand),
        heat_pump_cop=np.ones_like(demand),
        period_hours=hours)


def wind_ldes_catalog(wind_capital=5.0, store_capital=(2.0, 1.0, 0.1),
                      eff=0.9, max_energy=100.0):
    gen = model.Generator(name="wind", capital_cost=wind_capital,
                          marginal_cost=0.0, max_capacity=50.0)
    acc = model.Storage(name="acc", capital_cost_out=store_capital[0],
                        capital_cost_in=store_capital[1],
                        capital_cost_energy=store_capital[2],
                        efficiency_out=eff, efficiency_in=eff,
                        max_power_out=20.0, max_power_in=20.0,
                        max_energy=max_energy, long_duration=True)
    return model.TechnologyCatalog(generators=(gen,), storages=(acc,))


def two_stage_lattice():
    """T=2, N=2: wind feast or famine, then repeat or reverse."""
    stage1 = [vector([3.0, 3.0], cf=[1.0, 0.0]),
              vector([3.0, 3.0], cf=[0.0, 1.0])]
    stage2 = [vector([3.0, 3.0], cf=[1.0, 1.0]),
              vector([3.0, 3.0], cf=[0.0, 0.0])]
    return SamplingLattice.from_vectors([stage1, stage2])


def singleton_path(lattice):
    vectors = tuple(lattice.realizations(t)[0]
                    for t in range(1, lattice.n_stages + 1))
    return WeatherPath(vectors=vectors,
                       node_indices=(0,) * lattice.n_stages)


def test_empty_pool_zero_capital_is_myopic():
    """With no cuts and zero capital costs the capacity stage has
    nothing to pay for: its objective is 0 + theta = 0 and dispatch is
    purely myopic."""
    catalog = wind_ldes_catalog(wind_capital=0.0, store_capital=(0, 0, 0))
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    policy = sddp.Policy(catalog, scenario, lattice)
    traj = sddp.forward_pass(policy, singleton_path(lattice))
    assert traj.records[0].stage_cost == 0.0
    assert traj.records[0].theta == 0.0
    assert len(traj.records) == 3


def test_forward_pass_is_deterministic():
    """The same policy on the same path must produce identical
    trajectories, state for state and cost for cost."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    policy = sddp.Policy(catalog, scenario, lattice)
    path = singleton_path(lattice)
    a = sddp.forward_pass(policy, path)
    b = sddp.forward_pass(policy, path)
    for ra, rb in zip(a.records, b.records):
        assert np.array_equal(ra.outgoing, rb.outgoing)
        assert ra.stage_cost == rb.stage_cost
    assert a.total_cost == b.total_cost


def test_forward_pass_rejects_short_path():
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    policy = sddp.Policy(catalog, scenario, lattice)
    short = WeatherPath(vectors=(lattice.realizations(1)[0],),
                        node_indices=(0,))
    with pytest.raises(DimensionMismatch):
        sddp.forward_pass(policy, short)


def test_terminal_cut_matches_analytic_shedding_curve():
    """One terminal stage, one period, demand 1 GWh, no generators and
    a lossless store: the cost-to-go is 100 * max(0, 1 - level) MEUR
    with lost load priced at 100 MEUR per GWh. The backward pass from
    trial level 0.5 must produce a cut worth 50 MEUR at the trial point
    with slope -100 along the level coordinate."""
    acc = model.Storage(name="acc", capital_cost_out=0.0, capital_cost_in=0.0,
                        capital_cost_energy=0.0, efficiency_out=1.0,
                        efficiency_in=1.0, max_power_out=5.0, max_power_in=5.0,
                        max_energy=10.0, long_duration=True)
    catalog = model.TechnologyCatalog(generators=(), storages=(acc,))
    scenario = model.MarketScenario(name="ni", voll=100000.0)
    lattice = SamplingLattice.from_vectors([[vector([1.0])]])
    policy = sddp.Policy(catalog, scenario, lattice)
    layout = policy.layout
    trial = np.zeros(layout.size)
    trial[layout.position("pout:acc")] = 5.0
    trial[layout.position("pin:acc")] = 5.0
    trial[layout.position("energy:acc")] = 10.0
    trial[layout.position("level:acc")] = 0.5
    stub = sddp.StageRecord(stage=0, node=None, incoming=None, outgoing=trial,
                            stage_cost=0.0, theta=0.0, dispatch=None)
    sddp.backward_pass(policy, sddp.Trajectory(records=(stub,)))
    assert len(policy.pools[1]) == 1
    cut = policy.pools[1][0]
    assert cut.value_at(trial) == pytest.approx(50.0, abs=1e-6)
    assert cut.slope[layout.position("level:acc")] == pytest.approx(
        -100.0, abs=1e-6)


def test_single_realization_cut_is_exact():
    """With one realization there is no averaging: the cut evaluated
    at the trial state equals the child objective computed through an
    independent stage solve."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    child_weather = vector([3.0, 3.0], cf=[0.4, 0.2])
    lattice = SamplingLattice.from_vectors([[child_weather]])
    policy = sddp.Policy(catalog, scenario, lattice)
    layout = policy.layout
    trial = np.zeros(layout.size)
    trial[layout.position("gen:wind")] = 4.0
    trial[layout.position("pout:acc")] = 2.0
    trial[layout.position("pin:acc")] = 2.0
    trial[layout.position("energy:acc")] = 8.0
    trial[layout.position("ini:acc")] = 1.0
    trial[layout.position("level:acc")] = 1.0
    stub = sddp.StageRecord(stage=0, node=None, incoming=None, outgoing=trial,
                            stage_cost=0.0, theta=0.0, dispatch=None)
    sddp.backward_pass(policy, sddp.Trajectory(records=(stub,)))
    problem = model.build_dispatch_stage(1, catalog, scenario, child_weather,
                                         total_stages=1)
    sol = lp.solve(model.apply_incoming_state(problem, trial).instance)
    cut = policy.pools[1][0]
    assert cut.value_at(trial) == pytest.approx(sol.objective, rel=1e-9)


def test_average_cut_arithmetic():
    """Two equiprobable children worth 10 and 30 with slopes -1 and -3
    at trial x = 2 collapse into a cut through value 20 with slope -2."""
    cut = sddp.average_cut(stage=1, values=[10.0, 30.0],
                           slopes=[[-1.0], [-3.0]], trial_state=[2.0],
                           iteration=7)
    assert cut.slope == pytest.approx([-2.0])
    assert cut.value_at([2.0]) == pytest.approx(20.0)
    assert cut.intercept == pytest.approx(24.0)
    assert cut.iteration == 7


def test_cut_validation():
    with pytest.raises(DimensionMismatch):
        sddp.Cut(stage=1, intercept=0.0, slope=np.zeros(3), iteration=0,
                 trial_state=np.zeros(2))
    with pytest.raises(ValueError):
        sddp.Cut(stage=1, intercept=np.nan, slope=np.zeros(2), iteration=0,
                 trial_state=np.zeros(2))
    with pytest.raises(ValueError):
        sddp.Cut(stage=1, intercept=0.0, slope=np.array([np.inf, 0.0]),
                 iteration=0, trial_state=np.zeros(2))


def test_lower_bound_zero_with_empty_pools():
    """No cuts and free (zero-cost) capacities leave only the
    nonnegative cost-to-go floor, so the bound is exactly zero."""
    catalog = wind_ldes_catalog(wind_capital=0.0, store_capital=(0, 0, 0))
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.Policy(catalog, scenario, two_stage_lattice())
    assert sddp.lower_bound(policy) == 0.0


def test_lower_bound_weakly_increases_per_cut():
    """The bound sequence logged during training never drops by more
    than 1e-9: pools only grow, so the capacity-stage optimum can only
    move up. Costs are scaled so objectives are order one and the
    absolute slack is meaningful."""
    catalog = wind_ldes_catalog(wind_capital=1e-6,
                                store_capital=(2e-7, 1e-7, 1e-8))
    scenario = model.MarketScenario(name="ni", voll=1e-6)
    policy = sddp.train(catalog, scenario, two_stage_lattice(),
                        sddp.TrainOptions(max_iterations=30, seed=3))
    bounds = [row[1] for row in policy.training_log]
    assert len(bounds) == 30
    assert 0.0 < bounds[-1] < 100.0
    for prev, nxt in zip(bounds, bounds[1:]):
        assert nxt >= prev - 1e-9


def test_train_zero_iterations_returns_initial_policy():
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.train(catalog, scenario, two_stage_lattice(),
                        sddp.TrainOptions(max_iterations=0))
    assert policy.training_log == []
    assert all(not cuts for cuts in policy.pools.values())
    assert policy.stopped_reason == "iteration_limit"


def test_same_seed_reproduces_lb_sequence():
    """Training twice with one seed and config must emit bit-identical
    lower-bound logs."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    opts = sddp.TrainOptions(max_iterations=12, seed=11)
    a = sddp.train(catalog, scenario, two_stage_lattice(), opts)
    b = sddp.train(catalog, scenario, two_stage_lattice(), opts)
    assert a.training_log == b.training_log
    assert np.array_equal(a.capacities, b.capacities)


def test_time_limit_flags_policy():
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.train(catalog, scenario, two_stage_lattice(),
                        sddp.TrainOptions(max_iterations=500, time_limit=0.0))
    assert policy.stopped_reason == "time_limit"
    assert len(policy.training_log) == 1
    assert len(policy.pools[1]) == 1


def test_deterministic_lattice_upper_bound_has_zero_error():
    """A single-node lattice admits exactly one path, so the Monte
    Carlo estimate collapses: zero standard error and a mean equal to
    the forward-pass cost."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    stage1 = [vector([3.0, 3.0], cf=[0.8, 0.1])]
    stage2 = [vector([3.0, 3.0], cf=[0.2, 0.9])]
    lattice = SamplingLattice.from_vectors([stage1, stage2])
    policy = sddp.train(catalog, scenario, lattice,
                        sddp.TrainOptions(max_iterations=25, seed=0))
    ub = sddp.upper_bound_estimate(policy, n_paths=4, rng_seed=1)
    assert ub.std_error == 0.0
    traj = sddp.forward_pass(policy, singleton_path(lattice))
    assert ub.mean == pytest.approx(traj.total_cost, rel=1e-9)
    sim = sddp.simulate(policy, [singleton_path(lattice)])[0]
    assert sim.total_cost == pytest.approx(traj.total_cost, rel=1e-9)
    for rs, rf in zip(sim.records[1:], traj.records[1:]):
        assert np.allclose(rs.outgoing, rf.outgoing, atol=1e-9)


def test_upper_bound_requires_two_paths():
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.Policy(catalog, scenario, two_stage_lattice())
    with pytest.raises(ValueError):
        sddp.upper_bound_estimate(policy, n_paths=1)


def test_standard_error_shrinks_with_sample_size():
    """Doubling the path count should shrink the standard error by
    about 1/sqrt(2); allow 30 percent sampling slack."""
    catalog = wind_ldes_catalog(wind_capital=1.0)
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.train(catalog, scenario, two_stage_lattice(),
                        sddp.TrainOptions(max_iterations=10, seed=5))
    small = sddp.upper_bound_estimate(policy, n_paths=100, rng_seed=21)
    big = sddp.upper_bound_estimate(policy, n_paths=200, rng_seed=22)
    assert small.std_error > 0.0
    ratio = big.std_error / small.std_error
    assert ratio == pytest.approx(1 / np.sqrt(2), rel=0.30)


def test_simulation_shares_capacities_and_handles_empty_list():
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    policy = sddp.train(catalog, scenario, lattice,
                        sddp.TrainOptions(max_iterations=8, seed=2))
    assert sddp.simulate(policy, []) == []
    rng = np.random.default_rng(9)
    paths = [sample_path(lattice, rng) for _ in range(5)]
    out = sddp.simulate(policy, paths)
    assert len(out) == 5
    for traj in out:
        assert np.array_equal(traj.records[0].outgoing, policy.capacities)
        assert traj.capacity_cost == out[0].capacity_cost


def test_training_improves_simulated_cost():
    """Average simulated cost over a fixed path set should be weakly
    lower for the trained policy than after one iteration."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    first = sddp.train(catalog, scenario, lattice,
                       sddp.TrainOptions(max_iterations=1, seed=4))
    final = sddp.train(catalog, scenario, lattice,
                       sddp.TrainOptions(max_iterations=40, seed=4))
    rng = np.random.default_rng(123)
    paths = [sample_path(lattice, rng) for _ in range(50)]
    cost_first = np.mean([t.total_cost for t in sddp.simulate(first, paths)])
    cost_final = np.mean([t.total_cost for t in sddp.simulate(final, paths)])
    assert cost_final <= cost_first * (1 + 1e-9)


def test_threaded_backward_pass_matches_serial():
    """Running the child solves on two threads must yield the same
    cuts as the serial loop; averaging happens in realization order."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    serial = sddp.Policy(catalog, scenario, lattice)
    threaded = sddp.Policy(catalog, scenario, lattice)
    path = singleton_path(lattice)
    traj = sddp.forward_pass(serial, path)
    sddp.backward_pass(serial, traj, iteration=1, threads=1)
    sddp.backward_pass(threaded, traj, iteration=1, threads=2)
    for t in serial.pools:
        assert len(serial.pools[t]) == len(threaded.pools[t])
        for cs, ct in zip(serial.pools[t], threaded.pools[t]):
            assert cs.intercept == ct.intercept
            assert np.array_equal(cs.slope, ct.slope)


def test_fishing_duals_match_finite_differences():
    """Away from kinks, the incoming-state duals are the gradient of
    the stage objective. Central differences must agree within
    max(1e-5 relative, 1e-7 absolute); coordinates where forward and
    backward slopes disagree sit on a kink and are skipped."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    weather = vector([3.0, 2.0], cf=[0.6, 0.3])
    problem = model.build_dispatch_stage(1, catalog, scenario, weather,
                                         total_stages=1)
    layout = model.StateLayout(catalog)
    x = np.zeros(layout.size)
    x[layout.position("gen:wind")] = 3.7
    x[layout.position("pout:acc")] = 2.3
    x[layout.position("pin:acc")] = 2.9
    x[layout.position("energy:acc")] = 7.3
    x[layout.position("ini:acc")] = 0.9
    x[layout.position("level:acc")] = 1.7

    def objective(state):
        sol = lp.solve(model.apply_incoming_state(problem, state).instance)
        return sol.objective

    sol = lp.solve(model.apply_incoming_state(problem, x).instance)
    duals = model.fishing_duals(problem, sol)
    step = 1e-5
    checked = 0
    for p in range(layout.size):
        up = x.copy()
        dn = x.copy()
        up[p] += step
        dn[p] -= step
        f_up, f_mid, f_dn = objective(up), objective(x), objective(dn)
        fwd = (f_up - f_mid) / step
        bwd = (f_mid - f_dn) / step
        if abs(fwd - bwd) > 1e-3 * (1 + abs(fwd)):
            continue
        central = (f_up - f_dn) / (2 * step)
        tol = max(1e-7, 1e-5 * abs(central))
        assert abs(duals[p] - central) <= tol, layout.labels[p]
        checked += 1
    assert checked >= 4


def test_policy_roundtrip(tmp_path):
    """Save and reload must preserve capacities, pools and the bound;
    a different catalog must be rejected."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    lattice = two_stage_lattice()
    policy = sddp.train(catalog, scenario, lattice,
                        sddp.TrainOptions(max_iterations=6, seed=8))
    path = tmp_path / "policy.json"
    sddp.save_policy(policy, path)
    loaded = sddp.load_policy(path, catalog, scenario, lattice)
    assert np.array_equal(loaded.capacities, policy.capacities)
    assert sddp.lower_bound(loaded) == pytest.approx(
        sddp.lower_bound(policy), rel=1e-12)
    for t in policy.pools:
        assert len(loaded.pools[t]) == len(policy.pools[t])
        for a, b in zip(loaded.pools[t], policy.pools[t]):
            assert a.intercept == b.intercept
            assert np.array_equal(a.slope, b.slope)
    other = wind_ldes_catalog(wind_capital=6.0)
    with pytest.raises(DataError):
        sddp.load_policy(path, other, scenario, lattice)


def test_training_log_file(tmp_path):
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    log = tmp_path / "train.csv"
    sddp.train(catalog, scenario, two_stage_lattice(),
               sddp.TrainOptions(max_iterations=5, seed=1,
                                 log_path=str(log)))
    lines = log.read_text().strip().splitlines()
    assert lines[0] == "iteration,seconds,lower_bound,forward_cost"
    assert len(lines) == 6
    first = lines[1].split(",")
    assert int(first[0]) == 1
    assert float(first[1]) >= 0.0
    assert float(first[2]) > 0.0


def test_trust_region_training_still_converges_monotonically():
    """Stabilized training keeps the bound monotone (the bound is read
    off the unboxed problem) and ends with finite capacities."""
    catalog = wind_ldes_catalog()
    scenario = model.MarketScenario(name="ni", voll=1000.0)
    policy = sddp.train(catalog, scenario, two_stage_lattice(),
                        sddp.TrainOptions(max_iterations=30, seed=6,
                                          trust_region=True))
    bounds = [row[1] for row in policy.training_log]
    for prev, nxt in zip(bounds, bounds[1:]):
        assert nxt >= prev - 1e-9 * (1 + abs(prev))
    assert np.all(np.isfinite(policy.capacities))
