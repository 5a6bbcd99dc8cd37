"""Variance-inequality checks and residual squeezing extraction."""

import numpy as np
import pytest

from cvshape import (
    ClusterGraph,
    apply,
    apply_loss,
    build_canonical,
    check_cluster_criteria,
    nullifier_db,
    nullifiers_of,
    phase_shift,
    remove_node,
    residual_squeezing_db,
    squeezed_vacuum,
    tensor,
    vacuum,
)
from cvshape.criteria import NULLIFIER_BOUND, PAIRWISE_BOUND

SQUEEZED_5DB = 0.07905694150420949


def test_bounds_follow_term_count():
    # k-term forms sit against k/4: the separable floor is additive
    assert NULLIFIER_BOUND == 0.5
    assert PAIRWISE_BOUND == 1.0


def test_nullifier_db_arithmetic():
    assert nullifier_db(0.5, 2) == pytest.approx(0.0)
    assert nullifier_db(0.25, 2) == pytest.approx(-3.0102999566398116)
    assert nullifier_db(0.75, 3) == pytest.approx(0.0)
    wire = ClusterGraph.linear_wire(2)
    n1 = nullifiers_of(wire)[0]
    assert nullifier_db(0.25, n1) == pytest.approx(-3.0102999566398116)


def test_wire_criteria_pass_at_5db():
    wire = ClusterGraph.linear_wire(4)
    report = check_cluster_criteria(build_canonical(wire, 5.0), wire)
    assert report.all_pass
    assert len(report.nullifiers) == 4
    for check in report.nullifiers:
        assert check.variance == pytest.approx(SQUEEZED_5DB, abs=1e-12)
        assert check.bound == 0.5
        assert check.passed
    assert len(report.pairwise) == 3  # one per edge
    for check in report.pairwise:
        assert check.sum_variance == pytest.approx(2 * SQUEEZED_5DB, abs=1e-12)
        assert check.passed
    assert report.residuals == ()


def test_canonical_zero_db_still_entangles():
    # the entangling gates act even on vacuum inputs: Var = 0.25 < 1/2
    wire = ClusterGraph.linear_wire(2)
    report = check_cluster_criteria(build_canonical(wire, 0.0), wire)
    for check in report.nullifiers:
        assert check.variance == pytest.approx(0.25, abs=1e-12)
        assert check.passed


def test_product_vacuum_fails_strictly_at_the_bound():
    wire = ClusterGraph.linear_wire(2)
    report = check_cluster_criteria(vacuum(2), wire)
    # uncorrelated vacuum gives exactly 0.5 per two-term form: the
    # inequality is strict, so sitting on the bound does not pass
    for check in report.nullifiers:
        assert check.variance == pytest.approx(0.5, abs=1e-12)
        assert not check.passed
    assert not report.all_pass


def test_pairwise_uses_adjacent_nodes_only():
    graph = ClusterGraph.from_edges([(1, 2), (2, 3)])
    report = check_cluster_criteria(build_canonical(graph, 5.0), graph)
    pairs = {check.pair for check in report.pairwise}
    assert pairs == {(1, 2), (2, 3)}


def test_residual_squeezing_of_a_squeezed_input():
    st = squeezed_vacuum(5.0, "p")
    sq_db, anti_db, angle = residual_squeezing_db(st, 0)
    assert sq_db == pytest.approx(-5.0, abs=1e-12)
    assert anti_db == pytest.approx(5.0, abs=1e-12)
    assert angle == pytest.approx(np.pi / 2, abs=1e-12)


def test_residual_squeezing_follows_rotation():
    st = squeezed_vacuum(5.0, "p")
    st = apply(st, phase_shift(1, 0, np.pi / 3))
    sq_db, anti_db, angle = residual_squeezing_db(st, 0)
    assert sq_db == pytest.approx(-5.0, abs=1e-10)
    # the squeezed direction p (pi/2) rotates by pi/3
    assert angle == pytest.approx(np.pi / 2 + np.pi / 3 - np.pi, abs=1e-10) or angle == pytest.approx(
        np.pi / 2 + np.pi / 3, abs=1e-10
    )


def test_residual_squeezing_vacuum_degenerate():
    sq_db, anti_db, angle = residual_squeezing_db(vacuum(1), 0)
    assert sq_db == pytest.approx(0.0, abs=1e-12)
    assert anti_db == pytest.approx(0.0, abs=1e-12)
    assert angle == 0.0


def test_residual_squeezing_under_loss():
    st = apply_loss(squeezed_vacuum(5.0, "p"), 0, 0.7312376477871323)
    sq_db, _, _ = residual_squeezing_db(st, 0)
    # mixing with vacuum pulls -5 dB toward 0
    assert -5.0 < sq_db < -1.0


def test_isolated_nodes_get_residual_entries():
    wire = ClusterGraph.linear_wire(4)
    st = build_canonical(wire, 5.0)
    result = remove_node(st, wire, 3)  # leaves node 4 isolated
    report = check_cluster_criteria(result.state, result.graph)
    assert [r.node for r in report.residuals] == [4]
    assert report.residuals[0].squeezed_db == pytest.approx(-5.0, abs=1e-9)


def test_report_dict_shape():
    wire = ClusterGraph.linear_wire(2)
    report = check_cluster_criteria(build_canonical(wire, 5.0), wire)
    payload = report.to_dict()
    assert set(payload) == {"nullifiers", "pairwise", "residual_squeezing", "all_pass"}
    row = payload["nullifiers"][0]
    assert set(row) == {"node", "form", "variance", "bound", "pass", "db"}
    assert row["form"] == "p_1 - x_2"
    pair_row = payload["pairwise"][0]
    assert set(pair_row) == {"pair", "sum_variance", "bound", "pass"}


def test_node_order_override():
    wire = ClusterGraph.linear_wire(2)
    st = build_canonical(wire, 5.0)
    swapped = tensor(st.marginal([1]), st.marginal([0]))
    # marginal-swapped state loses correlations; with the right order the
    # forms still evaluate, just at separable values
    report = check_cluster_criteria(swapped, wire, node_order=(2, 1))
    assert len(report.nullifiers) == 2
    assert not report.all_pass
