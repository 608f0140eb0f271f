"""Nested-decomposition training of a capacity-and-dispatch policy.

Alternates sampled forward passes (producing trial states) with
backward passes (averaging child objectives and incoming-state duals
into cutting planes on each stage's cost-to-go variable). The capacity
stage's optimum over its cut pool is a true lower bound on the policy
value; a Monte Carlo average of simulated path costs estimates the
upper bound.

Cut pools are keyed by the stage they approximate: pool ``t`` holds
cuts on the cost-to-go variable of problem ``t - 1``, which stands in
for the expected cost of stages ``t`` onward. Pools only grow; no
pruning is attempted, which is fine at desk scale.

Determinism: with a fixed seed, training twice yields bit-identical
logs and policies. Threaded backward passes keep determinism because
realization results are reduced in realization order. The training log
kept on the policy stores no wall-clock times; the optional CSV log
file adds a seconds column and is therefore not byte-reproducible.
"""
from __future__ import annotations

import hashlib
import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from . import lp, model
from .errors import DimensionMismatch, SolverFailure
from .weather import SamplingLattice, WeatherPath, sample_path

POLICY_FORMAT_VERSION = 1


@dataclass(frozen=True)
class Cut:
    """One affine lower bound on a stage's expected cost-to-go.

    The cut constrains ``theta_stage``: theta >= intercept + slope @ x,
    where x is the outgoing state of problem ``stage - 1`` and the
    intercept is the cut value at x = 0.
    """

    stage: int
    intercept: float
    slope: np.ndarray
    iteration: int
    trial_state: np.ndarray

    def __post_init__(self):
        slope = np.ascontiguousarray(self.slope, dtype=float)
        trial = np.ascontiguousarray(self.trial_state, dtype=float)
        slope.setflags(write=False)
        trial.setflags(write=False)
        object.__setattr__(self, "slope", slope)
        object.__setattr__(self, "trial_state", trial)
        if not np.isfinite(self.intercept):
            raise ValueError("cut intercept must be finite")
        if not np.all(np.isfinite(slope)):
            raise ValueError("cut slope must be finite")
        if slope.shape != trial.shape:
            raise DimensionMismatch("cut slope and trial state differ in size")

    def value_at(self, x) -> float:
        return self.intercept + float(self.slope @ np.asarray(x, dtype=float))


def average_cut(stage: int, values, slopes, trial_state,
                iteration: int) -> Cut:
    """Collapse equiprobable child solves into one average cut.

    ``values`` are the child objectives and ``slopes`` their
    incoming-state duals, both in realization order; the mean of each
    defines the cut, anchored at the trial state.
    """
    values = np.asarray(values, dtype=float)
    slopes = np.asarray(slopes, dtype=float)
    trial = np.asarray(trial_state, dtype=float)
    mean_value = float(values.mean())
    mean_slope = slopes.mean(axis=0)
    return Cut(stage=stage, intercept=mean_value - float(mean_slope @ trial),
               slope=mean_slope, iteration=iteration, trial_state=trial)


@dataclass(frozen=True)
class StageRecord:
    """One stage of a trajectory."""

    stage: int
    node: int | None
    incoming: np.ndarray | None
    outgoing: np.ndarray
    stage_cost: float
    theta: float | None
    dispatch: model.DispatchSolution | None


@dataclass(frozen=True)
class Trajectory:
    """A full forward pass: one record per stage, capacity stage first."""

    records: tuple

    @property
    def total_cost(self) -> float:
        return float(sum(r.stage_cost for r in self.records))

    @property
    def capacity_cost(self) -> float:
        return self.records[0].stage_cost

    def record(self, t: int) -> StageRecord:
        return self.records[t]


@dataclass
class TrainOptions:
    """Knobs for :func:`train`.

    ``time_limit`` is wall-clock seconds; when exceeded the best policy
    so far is returned with ``stopped_reason`` set to ``"time_limit"``.
    ``trust_region`` boxes the capacity variables around the incumbent
    (best lower bound) decision, halving the radius after every 50
    iterations without lower-bound improvement, never below 1e-6 of
    the capacity scale. The lower bound itself is always computed from
    the unboxed capacity stage. ``stop_on_gap`` enables the classical
    rule that stops once the lower bound reaches the sampled
    upper-bound confidence interval; it is off by default.
    """

    max_iterations: int = 100
    time_limit: float | None = None
    trust_region: bool = False
    seed: int = 0
    threads: int = 1
    forward_batch: int = 1
    stop_on_gap: bool = False
    gap_paths: int = 50
    gap_check_every: int = 10
    log_path: str | None = None


@dataclass
class UpperBound:
    """Monte Carlo estimate of the policy cost."""

    mean: float
    std_error: float
    n_paths: int


class Policy:
    """Capacity decision plus trained cost-to-go approximations.

    Holds everything needed to run forward passes: the catalog and
    scenario (to rebuild stage problems), the lattice (sample spaces),
    the cut pools, and the capacity decision. Training appends to the
    pools and updates the decision in place.
    """

    def __init__(self, catalog: model.TechnologyCatalog,
                 scenario: model.MarketScenario, lattice: SamplingLattice):
        self.catalog = catalog
        self.scenario = scenario
        self.lattice = lattice
        self.layout = model.StateLayout(catalog)
        self.n_stages = lattice.n_stages
        self.pools: dict[int, list[Cut]] = {
            t: [] for t in range(1, self.n_stages + 1)}
        self.training_log: list[tuple[int, float, float]] = []
        self.stopped_reason: str | None = None
        self._templates: dict = {}
        self.capacities = model.extract_state(
            *self._solve_stage0(box=None))

    # -- stage problem materialization ---------------------------------

    def _template(self, t: int, node: int) -> model.StageProblem:
        key = (t, node)
        if key not in self._templates:
            if t == 0:
                self._templates[key] = model.build_capacity_stage(self.catalog)
            else:
                weather = self.lattice.realizations(t)[node]
                self._templates[key] = model.build_dispatch_stage(
                    t, self.catalog, self.scenario, weather,
                    total_stages=self.n_stages)
        return self._templates[key]

    def _cut_rows(self, problem: model.StageProblem):
        pool = self.pools.get(problem.stage + 1, ())
        if not pool or problem.theta_column is None:
            return ()
        theta = problem.theta_column
        cols = problem.state_columns
        rows = []
        for c, cut in enumerate(pool):
            terms = [(theta, 1.0)]
            terms += [(col, -s) for col, s in zip(cols, cut.slope)]
            rows.append((terms, lp.GREATER_EQUAL, cut.intercept, f"cut:{c}"))
        return tuple(rows)

    def _materialize(self, t: int, node: int, x_in=None, box=None):
        problem = self._template(t, node)
        if x_in is not None:
            problem = model.apply_incoming_state(problem, x_in)
        inst = lp.extend_rows(problem.instance, self._cut_rows(problem))
        if box is not None:
            center, radius = box
            idx, lo, hi = [], [], []
            skip = set(self.layout.ini_positions) | set(
                self.layout.level_positions)
            for p, col in enumerate(problem.state_columns):
                if p in skip:
                    continue
                idx.append(col)
                lo.append(max(inst.lower[col], center[p] - radius))
                hi.append(min(inst.upper[col], center[p] + radius))
            inst = lp.with_bounds(inst, idx, lo, hi)
        return problem, inst

    def _solve_stage0(self, box):
        problem, inst = self._materialize(0, 0, box=box)
        sol = _solve(inst, 0, None)
        return problem, sol

    # -- serialization ---------------------------------------------------

    def to_payload(self) -> dict:
        pools = {
            str(t): [{
                "intercept": cut.intercept,
                "slope": cut.slope.tolist(),
                "iteration": cut.iteration,
                "trial_state": cut.trial_state.tolist(),
            } for cut in cuts]
            for t, cuts in self.pools.items()}
        return {
            "format_version": POLICY_FORMAT_VERSION,
            "catalog_hash": catalog_fingerprint(self.catalog, self.scenario),
            "state_labels": list(self.layout.labels),
            "n_stages": self.n_stages,
            "capacities": self.capacities.tolist(),
            "pools": pools,
            "training_log": [list(row) for row in self.training_log],
            "stopped_reason": self.stopped_reason,
        }


def catalog_fingerprint(catalog: model.TechnologyCatalog,
                        scenario: model.MarketScenario) -> str:
    """Stable hash of the catalog and scenario a policy was trained on."""
    blob = json.dumps({"catalog": asdict(catalog),
                       "scenario": asdict(scenario)},
                      sort_keys=True, default=str)
    return hashlib.sha256(blob.encode()).hexdigest()


def save_policy(policy: Policy, path) -> None:
    """Write a policy as versioned JSON (byte-reproducible)."""
    with open(path, "w") as fh:
        json.dump(policy.to_payload(), fh, indent=1, sort_keys=True)
        fh.write("\n")


def load_policy(path, catalog: model.TechnologyCatalog,
                scenario: model.MarketScenario,
                lattice: SamplingLattice) -> Policy:
    """Rebuild a policy from :func:`save_policy` output.

    The stored catalog hash must match the supplied catalog and
    scenario; mismatches raise :class:`~stockpile.errors.DataError`.
    """
    from .errors import DataError

    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format_version") != POLICY_FORMAT_VERSION:
        raise DataError(
            f"unsupported policy format {payload.get('format_version')!r}")
    if payload["catalog_hash"] != catalog_fingerprint(catalog, scenario):
        raise DataError("policy was trained on a different catalog/scenario")
    policy = Policy(catalog, scenario, lattice)
    if list(policy.layout.labels) != payload["state_labels"]:
        raise DataError("policy state layout does not match the catalog")
    if payload["n_stages"] != policy.n_stages:
        raise DataError("policy stage count does not match the lattice")
    policy.capacities = np.asarray(payload["capacities"], dtype=float)
    for t_str, cuts in payload["pools"].items():
        t = int(t_str)
        policy.pools[t] = [
            Cut(stage=t, intercept=c["intercept"],
                slope=np.asarray(c["slope"], dtype=float),
                iteration=c["iteration"],
                trial_state=np.asarray(c["trial_state"], dtype=float))
            for c in cuts]
    policy.training_log = [tuple(row) for row in payload["training_log"]]
    policy.stopped_reason = payload["stopped_reason"]
    return policy


def _solve(inst: lp.LpInstance, stage: int, node: int | None):
    where = f"stage {stage}" + ("" if node is None else f" realization {node}")
    try:
        sol = lp.solve(inst)
    except Exception as exc:
        raise SolverFailure(f"{where}: {exc}") from exc
    if sol.status != lp.OPTIMAL:
        raise SolverFailure(f"{where}: solve ended {sol.status}")
    return sol


def forward_pass(policy: Policy, path: WeatherPath,
                 box=None) -> Trajectory:
    """Chain stage solves along one weather path, collecting states.

    The capacity stage is solved against the current cut pool (inside
    the trust-region box when one is passed); each dispatch stage then
    receives the previous stage's outgoing state.
    """
    if path.n_stages != policy.n_stages:
        raise DimensionMismatch(
            f"path has {path.n_stages} stages, lattice {policy.n_stages}")
    problem, sol = policy._solve_stage0(box)
    x = model.extract_state(problem, sol)
    theta = sol.primal[problem.theta_column]
    records = [StageRecord(stage=0, node=None, incoming=None, outgoing=x,
                           stage_cost=float(sol.objective - theta),
                           theta=float(theta), dispatch=None)]
    for t in range(1, policy.n_stages + 1):
        node = path.node_indices[t - 1]
        problem, inst = policy._materialize(t, node, x_in=x)
        sol = _solve(inst, t, node)
        x_out = model.extract_state(problem, sol)
        dispatch = model.extract_dispatch(problem, sol, policy.catalog)
        theta = (None if problem.theta_column is None
                 else float(sol.primal[problem.theta_column]))
        records.append(StageRecord(
            stage=t, node=node, incoming=x, outgoing=x_out,
            stage_cost=dispatch.stage_cost, theta=theta, dispatch=dispatch))
        x = x_out
    return Trajectory(records=tuple(records))


def _child_solve(policy: Policy, t: int, node: int, x_in):
    problem, inst = policy._materialize(t, node, x_in=x_in)
    sol = _solve(inst, t, node)
    return float(sol.objective), model.fishing_duals(problem, sol)


def backward_pass(policy: Policy, trajectory: Trajectory,
                  iteration: int = 0, threads: int = 1) -> None:
    """Add one cut per stage from the trajectory's trial states.

    Walks stages last to first; at each stage the child problems
    already contain the cuts added deeper in this same pass. Children
    across realizations may solve in parallel; their results are
    averaged in realization order either way.
    """
    for t in range(policy.n_stages - 1, -1, -1):
        child = t + 1
        x_trial = trajectory.record(t).outgoing
        n_real = policy.lattice.branch_count(child)
        if threads > 1 and n_real > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                results = list(pool.map(
                    lambda i: _child_solve(policy, child, i, x_trial),
                    range(n_real)))
        else:
            results = [_child_solve(policy, child, i, x_trial)
                       for i in range(n_real)]
        values = [v for v, _ in results]
        slopes = [s for _, s in results]
        cut = average_cut(child, values, slopes, x_trial, iteration)
        if cut.slope.shape != (policy.layout.size,):
            raise DimensionMismatch("cut slope does not match state size")
        policy.pools[child].append(cut)


def lower_bound(policy: Policy) -> float:
    """Optimum of the unboxed capacity stage under the current pool."""
    _, sol = policy._solve_stage0(box=None)
    return float(sol.objective)


def _capital_cost(policy: Policy, x0) -> float:
    problem = policy._template(0, 0)
    values = np.zeros(problem.instance.n_vars)
    values[list(problem.state_columns)] = x0
    return float(problem.instance.objective @ values)


def simulate(policy: Policy, paths) -> list:
    """Run the trained policy over given paths with frozen capacities.

    Every trajectory shares the policy's capacity decision; dispatch
    follows the learned cost-to-go pools.
    """
    out = []
    x0 = np.asarray(policy.capacities, dtype=float)
    capital = _capital_cost(policy, x0)
    for path in paths:
        records = [StageRecord(stage=0, node=None, incoming=None,
                               outgoing=x0, stage_cost=capital, theta=None,
                               dispatch=None)]
        x = x0
        for t in range(1, policy.n_stages + 1):
            node = path.node_indices[t - 1]
            problem, inst = policy._materialize(t, node, x_in=x)
            sol = _solve(inst, t, node)
            x_out = model.extract_state(problem, sol)
            dispatch = model.extract_dispatch(problem, sol, policy.catalog)
            theta = (None if problem.theta_column is None
                     else float(sol.primal[problem.theta_column]))
            records.append(StageRecord(
                stage=t, node=node, incoming=x, outgoing=x_out,
                stage_cost=dispatch.stage_cost, theta=theta,
                dispatch=dispatch))
            x = x_out
        out.append(Trajectory(records=tuple(records)))
    return out


def upper_bound_estimate(policy: Policy, n_paths: int,
                         rng_seed=0) -> UpperBound:
    """Mean and standard error of simulated total cost over sampled
    paths (capacities frozen at the policy decision)."""
    if n_paths < 2:
        raise ValueError("need at least two paths for a standard error")
    rng = np.random.default_rng(rng_seed)
    paths = [sample_path(policy.lattice, rng) for _ in range(n_paths)]
    costs = np.array([tr.total_cost for tr in simulate(policy, paths)])
    return UpperBound(mean=float(costs.mean()),
                      std_error=float(costs.std(ddof=1) / np.sqrt(n_paths)),
                      n_paths=n_paths)


def train(catalog: model.TechnologyCatalog, scenario: model.MarketScenario,
          lattice: SamplingLattice,
          options: TrainOptions | None = None) -> Policy:
    """Run the full training loop and return the resulting policy.

    Each iteration samples forward paths, adds one cut per stage per
    path in the backward pass, and records the new lower bound. The
    final capacity decision is the unboxed capacity-stage optimum
    under the final pool.
    """
    opt = options or TrainOptions()
    policy = Policy(catalog, scenario, lattice)
    rng = np.random.default_rng(opt.seed)
    start = time.monotonic()
    log_rows = []
    best_lb = -np.inf
    incumbent = policy.capacities.copy()
    stall = 0
    scale = _capacity_scale(policy)
    radius = scale
    policy.stopped_reason = "iteration_limit"
    for k in range(1, opt.max_iterations + 1):
        box = (incumbent, radius) if opt.trust_region else None
        forward_cost = np.nan
        for _ in range(max(1, opt.forward_batch)):
            path = sample_path(lattice, rng)
            trajectory = forward_pass(policy, path, box=box)
            forward_cost = trajectory.total_cost
            backward_pass(policy, trajectory, iteration=k,
                          threads=opt.threads)
        lb = lower_bound(policy)
        policy.training_log.append((k, lb, forward_cost))
        log_rows.append((k, time.monotonic() - start, lb, forward_cost))
        if lb > best_lb + 1e-9 * (1 + abs(best_lb)):
            best_lb = lb
            _, sol0 = policy._solve_stage0(box=None)
            incumbent = model.extract_state(policy._template(0, 0), sol0)
            stall = 0
        else:
            stall += 1
            if opt.trust_region and stall >= 50:
                radius = max(radius * 0.5, 1e-6 * scale)
                stall = 0
        if opt.stop_on_gap and k % opt.gap_check_every == 0:
            _refresh_capacities(policy)
            ub = upper_bound_estimate(policy, opt.gap_paths,
                                      rng_seed=opt.seed + k)
            if lb >= ub.mean - 2 * ub.std_error:
                policy.stopped_reason = "gap"
                break
        if opt.time_limit is not None and (
                time.monotonic() - start) > opt.time_limit:
            policy.stopped_reason = "time_limit"
            break
    _refresh_capacities(policy)
    if opt.log_path:
        with open(opt.log_path, "w") as fh:
            fh.write("iteration,seconds,lower_bound,forward_cost\n")
            for k, secs, lb, fc in log_rows:
                fh.write(f"{k},{secs:.3f},{lb!r},{fc!r}\n")
    return policy


def _refresh_capacities(policy: Policy) -> None:
    problem, sol = policy._solve_stage0(box=None)
    policy.capacities = model.extract_state(problem, sol)


def _capacity_scale(policy: Policy) -> float:
    inst = policy._template(0, 0).instance
    finite = inst.upper[np.isfinite(inst.upper)]
    positive = finite[finite > 0]
    return float(positive.max()) if positive.size else 1.0
