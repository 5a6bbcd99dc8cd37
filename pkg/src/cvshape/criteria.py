"""Entanglement criteria and squeezing reports.

The verification unit is the nullifier variance.  A state passes the
cluster criterion when every nullifier variance sits strictly below 1/2,
and the pairwise criterion when the variance sum of each adjacent pair
sits strictly below 1.  Variances are reported both raw and in dB
relative to the vacuum level of the form, k/4 for a k-term form, so the
choice of reference can never hide in a log scale.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .gaussian import GaussianState, VACUUM_VARIANCE, quadrature_variance
from .graphs import ClusterGraph, Nullifier, nullifiers_of

__all__ = [
    "NULLIFIER_BOUND",
    "PAIRWISE_BOUND",
    "NullifierCheck",
    "PairwiseCheck",
    "ResidualSqueezing",
    "CriteriaReport",
    "check_cluster_criteria",
    "residual_squeezing_db",
    "nullifier_db",
]

#: Each nullifier variance must sit strictly below this for the cluster verdict.
NULLIFIER_BOUND = 0.5

#: Adjacent-pair variance sums must sit strictly below this.
PAIRWISE_BOUND = 1.0


def nullifier_db(variance: float, form) -> float:
    """Variance in dB relative to the form's vacuum level k/4.

    Args:
        variance: positive variance value.
        form: Nullifier (term count read off) or the term count itself.
    """
    if variance <= 0:
        raise ValueError("variance must be positive to convert to dB")
    k = form.n_terms if isinstance(form, Nullifier) else int(form)
    if k < 1:
        raise ValueError("form needs at least one term")
    return float(10.0 * np.log10(variance / (k * VACUUM_VARIANCE)))


@dataclass(frozen=True)
class NullifierCheck:
    form: Nullifier
    variance: float
    bound: float
    passed: bool
    db: float


@dataclass(frozen=True)
class PairwiseCheck:
    pair: tuple
    sum_variance: float
    bound: float
    passed: bool


@dataclass(frozen=True)
class ResidualSqueezing:
    """Principal-axis squeezing of one isolated mode."""

    node: int
    squeezed_db: float
    antisqueezed_db: float
    angle: float


@dataclass(frozen=True)
class CriteriaReport:
    """Nullifier, pairwise, and residual-squeezing verdicts for one state."""

    nullifiers: tuple
    pairwise: tuple
    residuals: tuple

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.nullifiers) and all(c.passed for c in self.pairwise)

    def to_dict(self) -> dict:
        return {
            "nullifiers": [
                {
                    "node": c.form.label,
                    "form": c.form.describe(),
                    "variance": c.variance,
                    "bound": c.bound,
                    "pass": c.passed,
                    "db": c.db,
                }
                for c in self.nullifiers
            ],
            "pairwise": [
                {
                    "pair": list(c.pair),
                    "sum_variance": c.sum_variance,
                    "bound": c.bound,
                    "pass": c.passed,
                }
                for c in self.pairwise
            ],
            "residual_squeezing": [
                {
                    "node": r.node,
                    "squeezed_db": r.squeezed_db,
                    "antisqueezed_db": r.antisqueezed_db,
                    "angle": r.angle,
                }
                for r in self.residuals
            ],
            "all_pass": self.all_pass,
        }


def residual_squeezing_db(state: GaussianState, mode: int):
    """Principal-axis analysis of one mode's 2x2 marginal covariance.

    Returns:
        (squeezed_db, antisqueezed_db, angle): min and max variance in dB
        relative to 1/4, and the angle of the minimum-variance direction
        in [0, pi).  A fully symmetric marginal reports angle 0.
    """
    marginal = state.marginal([mode])
    block = np.array([[marginal.cov[0, 0], marginal.cov[0, 1]], [marginal.cov[1, 0], marginal.cov[1, 1]]])
    values, vectors = np.linalg.eigh(block)
    low, high = float(values[0]), float(values[1])
    if low <= 0:
        raise ValueError("marginal covariance is not positive definite")
    direction = vectors[:, 0]
    angle = float(np.arctan2(direction[1], direction[0])) % np.pi
    if abs(high - low) < 1e-14 * max(1.0, high):
        angle = 0.0
    return (
        float(10.0 * np.log10(low / VACUUM_VARIANCE)),
        float(10.0 * np.log10(high / VACUUM_VARIANCE)),
        angle,
    )


def check_cluster_criteria(
    state: GaussianState, graph: ClusterGraph, node_order: Sequence[int] | None = None
) -> CriteriaReport:
    """Evaluate all nullifier and adjacent-pair criteria for a state.

    Args:
        state: state to verify.
        graph: cluster graph; its nullifiers define the forms.
        node_order: node ids in mode order; defaults to graph.nodes.

    Returns:
        CriteriaReport with one check per node, one per adjacent pair,
        and a residual-squeezing entry per isolated node.
    """
    order = tuple(node_order) if node_order is not None else graph.nodes
    if len(order) != state.n_modes:
        raise ValueError("node order length must match the state's mode count")
    forms = nullifiers_of(graph)
    variances = {}
    checks = []
    for form in forms:
        var = quadrature_variance(state, form, order)
        variances[form.label] = var
        checks.append(
            NullifierCheck(
                form=form,
                variance=var,
                bound=NULLIFIER_BOUND,
                passed=bool(var < NULLIFIER_BOUND),
                db=nullifier_db(var, form),
            )
        )

    pairwise = []
    for i, j, _ in graph.edges():
        total = variances[i] + variances[j]
        pairwise.append(
            PairwiseCheck(
                pair=(i, j),
                sum_variance=total,
                bound=PAIRWISE_BOUND,
                passed=bool(total < PAIRWISE_BOUND),
            )
        )

    residuals = []
    for node in graph.nodes:
        if not graph.neighbors(node):
            low_db, high_db, angle = residual_squeezing_db(state, list(order).index(node))
            residuals.append(
                ResidualSqueezing(
                    node=node, squeezed_db=low_db, antisqueezed_db=high_db, angle=angle
                )
            )

    return CriteriaReport(nullifiers=tuple(checks), pairwise=tuple(pairwise), residuals=tuple(residuals))
