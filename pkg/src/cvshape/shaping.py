"""Homodyne measurement, feedforward, and cluster shaping.

Shaping a cluster means measuring chosen nodes and displacing survivors
by gain-weighted outcomes.  Two execution semantics are provided and both
are exact:

* conditional: sample (or force) outcomes and track the conditioned
  state of the survivors, one trajectory at a time;
* ensemble: average over outcomes analytically.  Each measure-and-displace
  step acts on (mean, cov) as the linear map A = P + G u^T, with P the
  keep-rows projector, u the measured-quadrature selector, and G the
  column of feedforward gains.  The ensemble covariance A V A^T equals
  conditional covariance plus the covariance of the conditional means, so
  it is what a variance measurement over many trajectories converges to.

The ensemble picture is the one in which shaping preserves nullifier
variances exactly, with or without loss.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import (
    GaussianState,
    VACUUM_VARIANCE,
    apply,
    displacement,
    form_vector,
    quadrature_selector,
)
from .graphs import ClusterGraph, Nullifier

__all__ = [
    "MARGINAL_VARIANCE_FLOOR",
    "HomodyneOutcome",
    "FeedforwardRule",
    "MeasurementStep",
    "FeedforwardTarget",
    "ShapingResult",
    "homodyne",
    "feedforward",
    "removal_steps",
    "shorten_steps",
    "execute_ensemble",
    "execute_conditional",
    "remove_node",
    "shorten_wire",
    "TrajectoryPlan",
    "FormStats",
    "TrajectoryStats",
    "run_trajectory",
]

#: Marginal variances below this signal a near-eigenstate quadrature;
#: conditioning on one would divide by ~0 and must fail loudly instead.
MARGINAL_VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class HomodyneOutcome:
    """Record of one homodyne detection.

    Attributes:
        mode: identifier of the measured mode; state-level calls record
            the mode index, shaping calls record the graph node id.
        angle: measured quadrature angle, 0 = x, pi/2 = p.
        value: measured value, or None in outcome-averaged execution.
        marginal_mean: mean of the measured quadrature before detection.
        marginal_var: variance of the measured quadrature before detection.
    """

    mode: int
    angle: float
    value: float | None
    marginal_mean: float
    marginal_var: float


@dataclass(frozen=True)
class FeedforwardRule:
    """Outcome-conditioned displacements: (outcome index, target mode, quadrature, gain)."""

    entries: tuple

    def __init__(self, entries):
        normalized = []
        for outcome_index, target, quad, gain in entries:
            if quad not in ("x", "p"):
                raise ValueError("target quadrature must be 'x' or 'p'")
            normalized.append((int(outcome_index), int(target), str(quad), float(gain)))
        object.__setattr__(self, "entries", tuple(normalized))


@dataclass(frozen=True)
class FeedforwardTarget:
    node: int
    quadrature: str
    gain: float


@dataclass(frozen=True)
class MeasurementStep:
    """One node measurement plus the displacements its outcome drives."""

    node: int
    angle: float
    feedforward: tuple


@dataclass(frozen=True)
class ShapingResult:
    """State, updated graph, and measurement records after shaping."""

    state: GaussianState
    graph: ClusterGraph
    outcomes: tuple
    removed: tuple


def _split_indices(n_modes: int, mode: int):
    keep = [m for m in range(n_modes) if m != mode]
    return keep + [n_modes + m for m in keep]


def homodyne(
    state: GaussianState,
    mode: int,
    angle: float,
    value: float | None = None,
    rng: np.random.Generator | None = None,
    label: int | None = None,
):
    """Measure one rotated quadrature and condition the survivors on it.

    Args:
        state: input state.
        mode: index of the measured mode; it is dropped from the output.
        angle: quadrature angle, 0 measures x, pi/2 measures p.
        value: forced outcome; when None an outcome is sampled from rng.
        rng: random generator, required when value is None.
        label: identifier stored in the outcome record (defaults to mode).

    Returns:
        (conditioned state of the remaining modes, HomodyneOutcome).

    Raises:
        ValueError: if neither value nor rng is given, or the measured
            marginal variance is below MARGINAL_VARIANCE_FLOOR.
    """
    n = state.n_modes
    if not 0 <= mode < n:
        raise ValueError(f"mode index {mode} out of range for {n} modes")
    u = quadrature_selector(n, mode, angle)
    marginal_mean = float(u @ state.mean)
    marginal_var = float(u @ state.cov @ u)
    if marginal_var < MARGINAL_VARIANCE_FLOOR:
        raise ValueError(
            f"measured quadrature variance {marginal_var:.3e} below floor; "
            "near-eigenstate quadratures cannot be conditioned on"
        )
    if value is None:
        if rng is None:
            raise ValueError("provide an outcome value or an rng to sample one")
        value = marginal_mean + np.sqrt(marginal_var) * rng.standard_normal()
    value = float(value)

    idx = _split_indices(n, mode)
    vu = state.cov @ u
    mean_b = state.mean[idx] + vu[idx] * (value - marginal_mean) / marginal_var
    cov_b = state.cov[np.ix_(idx, idx)] - np.outer(vu[idx], vu[idx]) / marginal_var
    outcome = HomodyneOutcome(
        mode=int(mode if label is None else label),
        angle=float(angle),
        value=value,
        marginal_mean=marginal_mean,
        marginal_var=marginal_var,
    )
    return GaussianState(mean_b, cov_b), outcome


def feedforward(state: GaussianState, rule: FeedforwardRule, outcomes: Sequence[HomodyneOutcome]) -> GaussianState:
    """Apply outcome-conditioned displacements to a state.

    Raises:
        ValueError: on a dangling outcome reference or unknown target mode.
    """
    out = state
    for outcome_index, target, quad, gain in rule.entries:
        if not 0 <= outcome_index < len(outcomes):
            raise ValueError(f"feedforward references missing outcome {outcome_index}")
        record = outcomes[outcome_index]
        if record.value is None:
            raise ValueError("cannot feed forward an outcome without a recorded value")
        if gain == 0.0:
            continue
        out = apply(out, displacement(out.n_modes, target, quad, gain * record.value))
    return out


# ---------------------------------------------------------------------------
# shaping step construction
# ---------------------------------------------------------------------------


def removal_steps(graph: ClusterGraph, node: int, gain: float = -1.0) -> list:
    """Measurement plan deleting one node while keeping its neighbors' correlations.

    Measures x of the node; every neighbor i receives the displacement
    p_i += gain * sign(i, node) * outcome.  The default gain -1 makes the
    surviving nullifiers identical to the original ones as operators, so
    their variances are untouched.
    """
    graph.index_of(node)
    targets = tuple(
        FeedforwardTarget(nbr, "p", gain * graph.sign(nbr, node))
        for nbr in graph.neighbors(node)
    )
    return [MeasurementStep(node=node, angle=0.0, feedforward=targets)]


def shorten_steps(graph: ClusterGraph, inner_a: int, inner_b: int, gain: float = -1.0):
    """Measurement plan removing two adjacent inner nodes of a wire segment.

    For the segment o1 - a - b - o2 the plan measures p_a and p_b and
    displaces the outer nodes: p_o2 += gain*s(a,b)*s(b,o2)*outcome(p_a)
    and p_o1 += gain*s(o1,a)*s(a,b)*outcome(p_b).  With the default gain
    -1 the outer nodes end up directly bonded by an edge whose sign is
    -s(o1,a)*s(a,b)*s(b,o2), and the two new nullifiers equal differences
    of original ones.

    Returns:
        (steps, (o1, o2, new_edge_sign)).

    Raises:
        ValueError: if a or b has neighbors beyond the segment, the outer
            nodes coincide, or they are already adjacent.
    """
    if not graph.has_edge(inner_a, inner_b):
        raise ValueError(f"inner nodes {inner_a} and {inner_b} are not adjacent")
    nbrs_a = set(graph.neighbors(inner_a)) - {inner_b}
    nbrs_b = set(graph.neighbors(inner_b)) - {inner_a}
    if len(nbrs_a) != 1:
        raise ValueError(f"inner node {inner_a} must have exactly one neighbor besides {inner_b}")
    if len(nbrs_b) != 1:
        raise ValueError(f"inner node {inner_b} must have exactly one neighbor besides {inner_a}")
    outer_1 = nbrs_a.pop()
    outer_2 = nbrs_b.pop()
    if outer_1 == outer_2:
        raise ValueError(f"outer node {outer_1} closes a loop; shortening needs distinct ends")
    if graph.has_edge(outer_1, outer_2):
        raise ValueError(f"outer nodes {outer_1} and {outer_2} are already adjacent")

    s1 = graph.sign(outer_1, inner_a)
    s2 = graph.sign(inner_a, inner_b)
    s3 = graph.sign(inner_b, outer_2)
    half_pi = np.pi / 2
    steps = [
        MeasurementStep(
            node=inner_a,
            angle=half_pi,
            feedforward=(FeedforwardTarget(outer_2, "p", gain * s2 * s3),),
        ),
        MeasurementStep(
            node=inner_b,
            angle=half_pi,
            feedforward=(FeedforwardTarget(outer_1, "p", gain * s1 * s2),),
        ),
    ]
    new_sign = -s1 * s2 * s3
    return steps, (outer_1, outer_2, new_sign)


# ---------------------------------------------------------------------------
# step execution
# ---------------------------------------------------------------------------


def _step_map(node_order: Sequence[int], step: MeasurementStep) -> np.ndarray:
    """Ensemble matrix A = P + G u^T of one measure-and-displace step."""
    order = list(node_order)
    n = len(order)
    mode = order.index(step.node)
    u = quadrature_selector(n, mode, step.angle)
    keep = [m for m in range(n) if m != mode]
    idx = keep + [n + m for m in keep]
    a = np.zeros((2 * (n - 1), 2 * n))
    for row, col in enumerate(idx):
        a[row, col] = 1.0
    for target in step.feedforward:
        t = keep.index(order.index(target.node))
        row = t if target.quadrature == "x" else (n - 1) + t
        a[row] += target.gain * u
    return a


def execute_ensemble(state: GaussianState, node_order: Sequence[int], steps: Sequence[MeasurementStep]):
    """Outcome-averaged execution of a measurement plan.

    Args:
        state: input state with modes following node_order.
        node_order: node ids in mode order.
        steps: measurement steps; each node must appear in node_order and
            survive until its own step.

    Returns:
        (final state, final node order, outcome records with value None).
    """
    order = list(node_order)
    if len(order) != state.n_modes:
        raise ValueError("node order length must match the state's mode count")
    current = state
    outcomes = []
    for step in steps:
        if step.node not in order:
            raise ValueError(f"node {step.node} already measured or absent")
        n = len(order)
        u = quadrature_selector(n, order.index(step.node), step.angle)
        marginal_var = float(u @ current.cov @ u)
        if marginal_var < MARGINAL_VARIANCE_FLOOR:
            raise ValueError(
                f"measured quadrature variance {marginal_var:.3e} below floor at node {step.node}"
            )
        outcomes.append(
            HomodyneOutcome(
                mode=step.node,
                angle=step.angle,
                value=None,
                marginal_mean=float(u @ current.mean),
                marginal_var=marginal_var,
            )
        )
        a = _step_map(order, step)
        current = GaussianState(a @ current.mean, a @ current.cov @ a.T)
        order.remove(step.node)
    return current, tuple(order), tuple(outcomes)


def execute_conditional(
    state: GaussianState,
    node_order: Sequence[int],
    steps: Sequence[MeasurementStep],
    values: Sequence[float] | None = None,
    rng: np.random.Generator | None = None,
):
    """Single-trajectory execution with sampled or forced outcomes.

    Args:
        state: input state with modes following node_order.
        node_order: node ids in mode order.
        steps: measurement steps.
        values: forced outcome per step; sampled from rng when None.
        rng: random generator for sampling.

    Returns:
        (final state, final node order, outcome records).
    """
    order = list(node_order)
    if len(order) != state.n_modes:
        raise ValueError("node order length must match the state's mode count")
    if values is not None and len(values) != len(steps):
        raise ValueError("need one forced value per step")
    current = state
    outcomes = []
    for k, step in enumerate(steps):
        if step.node not in order:
            raise ValueError(f"node {step.node} already measured or absent")
        mode = order.index(step.node)
        forced = None if values is None else values[k]
        current, outcome = homodyne(current, mode, step.angle, value=forced, rng=rng, label=step.node)
        order.remove(step.node)
        outcomes.append(outcome)
        rule = FeedforwardRule(
            [
                (k, order.index(target.node), target.quadrature, target.gain)
                for target in step.feedforward
            ]
        )
        current = feedforward(current, rule, outcomes)
    return current, tuple(order), tuple(outcomes)


def _execute(state, node_order, steps, outcome_values, rng):
    if outcome_values is None and rng is None:
        return execute_ensemble(state, node_order, steps)
    return execute_conditional(state, node_order, steps, values=outcome_values, rng=rng)


def remove_node(
    state: GaussianState,
    graph: ClusterGraph,
    node: int,
    gain: float = -1.0,
    outcome: float | None = None,
    rng: np.random.Generator | None = None,
) -> ShapingResult:
    """Delete one node by an x measurement plus neighbor displacements.

    With the default gain the variance of every surviving node's nullifier
    (taken over the output graph, which drops the node and its edges) is
    exactly its pre-removal value.  Called with neither outcome nor rng
    the execution is outcome-averaged; otherwise conditional.

    Args:
        state: state whose modes follow graph.nodes.
        graph: current cluster graph.
        node: node to delete.
        gain: feedforward gain multiplier; -1 is the correlation-keeping
            value, 0 disables feedforward.
        outcome: forced measurement value (conditional execution).
        rng: generator to sample the outcome (conditional execution).
    """
    steps = removal_steps(graph, node, gain=gain)
    values = None if outcome is None else [outcome]
    final, _, outcomes = _execute(state, graph.nodes, steps, values, rng)
    return ShapingResult(
        state=final,
        graph=graph.with_node_removed(node),
        outcomes=outcomes,
        removed=(node,),
    )


def shorten_wire(
    state: GaussianState,
    graph: ClusterGraph,
    inner: tuple,
    gain: float = -1.0,
    outcomes: Sequence[float] | None = None,
    rng: np.random.Generator | None = None,
) -> ShapingResult:
    """Remove two adjacent inner nodes and bond their outer neighbors.

    The inner nodes are measured in p and the outer nodes displaced, which
    deletes the pair while the outer nodes inherit a direct edge (sign
    fixed by the segment's signs; -1 on a plain wire).  Each new nullifier
    equals a difference of two original ones, so for the canonical build
    its variance is the sum of the two corresponding input variances.

    Args:
        state: state whose modes follow graph.nodes.
        graph: current cluster graph.
        inner: the two adjacent inner nodes (a, b).
        gain: feedforward gain multiplier; -1 ideal, 0 disables.
        outcomes: forced values for (p_a, p_b) (conditional execution).
        rng: generator to sample outcomes (conditional execution).
    """
    inner_a, inner_b = inner
    steps, (outer_1, outer_2, new_sign) = shorten_steps(graph, inner_a, inner_b, gain=gain)
    final, _, records = _execute(state, graph.nodes, steps, outcomes, rng)
    new_graph = (
        graph.with_node_removed(inner_a)
        .with_node_removed(inner_b)
        .with_edge(outer_1, outer_2, new_sign)
    )
    return ShapingResult(state=final, graph=new_graph, outcomes=records, removed=(inner_a, inner_b))


# ---------------------------------------------------------------------------
# Monte Carlo trajectories
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectoryPlan:
    """Everything needed to sample shaping trajectories.

    Attributes:
        state: initial state, modes following node_order.
        node_order: node ids in mode order.
        steps: measurement steps executed in order.
        record: forms evaluated on the final state (Nullifier objects or
            coefficient vectors over the final node order).
        readout_efficiency: node -> transmission applied at the final
            variance readout (models detection loss); empty means ideal.
    """

    state: GaussianState
    node_order: tuple
    steps: tuple
    record: tuple
    readout_efficiency: tuple

    def __init__(self, state, node_order, steps, record, readout_efficiency=None):
        object.__setattr__(self, "state", state)
        object.__setattr__(self, "node_order", tuple(int(n) for n in node_order))
        object.__setattr__(self, "steps", tuple(steps))
        object.__setattr__(self, "record", tuple(record))
        eff = readout_efficiency or {}
        object.__setattr__(
            self, "readout_efficiency", tuple(sorted((int(k), float(v)) for k, v in dict(eff).items()))
        )

    def final_node_order(self) -> tuple:
        order = list(self.node_order)
        for step in self.steps:
            order.remove(step.node)
        return tuple(order)


@dataclass(frozen=True)
class FormStats:
    """Per-form ensemble statistics from a trajectory run."""

    label: str
    analytic_var: float
    sample_mean: float
    sample_var: float | None
    stderr: float | None


@dataclass(frozen=True)
class TrajectoryStats:
    trials: int
    seed: int
    forms: tuple
    node_order: tuple
    sample_cov: np.ndarray
    analytic_cov: np.ndarray


def _readout_scale(plan: TrajectoryPlan, order: Sequence[int]) -> np.ndarray:
    eff = dict(plan.readout_efficiency)
    n = len(order)
    eta = np.ones(2 * n)
    for k, node in enumerate(order):
        e = eff.get(node, 1.0)
        if not 0.0 < e <= 1.0:
            raise ValueError("readout efficiency must lie in (0, 1]")
        eta[k] = eta[n + k] = e
    return eta


def run_trajectory(plan: TrajectoryPlan, trials: int, seed: int) -> TrajectoryStats:
    """Sample shaping trajectories and accumulate form statistics.

    All trials share one generator seeded with seed, so results are
    deterministic and independent of any internal vectorization.  The
    conditional covariance after each measurement does not depend on the
    outcome, so it is tracked once while the per-trial means fan out.

    Args:
        plan: trajectory plan.
        trials: number of trajectories, at least 1.
        seed: generator seed.

    Returns:
        TrajectoryStats with per-form statistics and the sample covariance
        of the recorded readout values; sample variances are None when
        trials == 1.
    """
    if trials < 1:
        raise ValueError("need at least one trial")
    rng = np.random.default_rng(seed)
    order = list(plan.node_order)
    n = len(order)
    if plan.state.n_modes != n:
        raise ValueError("plan state does not match its node order")

    means = np.tile(plan.state.mean, (trials, 1))
    cov = np.array(plan.state.cov)

    for step in plan.steps:
        if step.node not in order:
            raise ValueError(f"node {step.node} already measured or absent")
        mode = order.index(step.node)
        u = quadrature_selector(len(order), mode, step.angle)
        marginal_var = float(u @ cov @ u)
        if marginal_var < MARGINAL_VARIANCE_FLOOR:
            raise ValueError(f"measured quadrature variance below floor at node {step.node}")
        projections = means @ u
        values = projections + np.sqrt(marginal_var) * rng.standard_normal(trials)

        keep = [m for m in range(len(order)) if m != mode]
        idx = keep + [len(order) + m for m in keep]
        vu = cov @ u
        means = means[:, idx] + np.outer(values - projections, vu[idx] / marginal_var)
        cov = cov[np.ix_(idx, idx)] - np.outer(vu[idx], vu[idx]) / marginal_var
        order.remove(step.node)
        for target in step.feedforward:
            col = len(order) + order.index(target.node)
            if target.quadrature == "x":
                col = order.index(target.node)
            means[:, col] += target.gain * values

    eta = _readout_scale(plan, order)
    means = means * np.sqrt(eta)
    cov_read = cov * np.outer(np.sqrt(eta), np.sqrt(eta)) + np.diag((1.0 - eta) * VACUUM_VARIANCE)

    # Simulated detector record: conditional mean plus conditional noise.
    try:
        noise_shaper = np.linalg.cholesky(cov_read)
    except np.linalg.LinAlgError:
        w, v = np.linalg.eigh(cov_read)
        noise_shaper = v @ np.diag(np.sqrt(np.clip(w, 0.0, None)))
    readout = means + rng.standard_normal(means.shape) @ noise_shaper.T

    # Analytic ensemble target for the same pipeline.
    analytic, final_order, _ = execute_ensemble(plan.state, plan.node_order, plan.steps)
    analytic_cov = analytic.cov * np.outer(np.sqrt(eta), np.sqrt(eta)) + np.diag(
        (1.0 - eta) * VACUUM_VARIANCE
    )

    sample_mean_vec = readout.mean(axis=0)
    if trials > 1:
        centered = readout - sample_mean_vec
        sample_cov = centered.T @ centered / (trials - 1)
    else:
        sample_cov = np.full((2 * len(order), 2 * len(order)), np.nan)

    forms = []
    for form in plan.record:
        c = form_vector(form, len(order), final_order)
        label = form.describe() if isinstance(form, Nullifier) else "form"
        values = readout @ c
        analytic_var = float(c @ analytic_cov @ c)
        if trials > 1:
            sample_var = float(values.var(ddof=1))
            stderr = sample_var * np.sqrt(2.0 / (trials - 1))
        else:
            sample_var = None
            stderr = None
        forms.append(
            FormStats(
                label=label,
                analytic_var=analytic_var,
                sample_mean=float(values.mean()),
                sample_var=sample_var,
                stderr=stderr,
            )
        )

    return TrajectoryStats(
        trials=int(trials),
        seed=int(seed),
        forms=tuple(forms),
        node_order=tuple(final_order),
        sample_cov=sample_cov,
        analytic_cov=analytic_cov,
    )
