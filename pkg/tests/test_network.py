import random

import pytest

from gen import (
    brute_force_forbidden_sets,
    closure_relation,
    connect_dummies,
    make_instance,
    random_dag_instance,
    random_selection,
)
from robust_rcpsp.errors import CapExceeded, CyclicGraphError
from robust_rcpsp.network import (
    Selection,
    enumerate_sufficient_selections,
    minimal_forbidden_sets,
    selection_from_schedule,
    transitive_closure,
    verify_selection,
)


def pair_conflict_instance():
    """Two unit-duration activities that both need the full capacity."""
    return make_instance([0, 1, 1, 0], [(0, 1), (0, 2), (1, 3), (2, 3)],
                         [(0,), (2,), (2,), (0,)], (2,))


def k3_instance():
    """Three pairwise-conflicting activities: every pair sums to 4 > 3."""
    return make_instance([0, 1, 1, 1, 0],
                         connect_dummies(3, set()),
                         [(0,), (2,), (2,), (2,), (0,)], (3,))


def catalog_family():
    """Seven activities on one resource of capacity 5 whose minimal
    forbidden sets are exactly {1,5},{2,6},{5,6},{6,7},{3,4,5}."""
    inner = [(1, 2), (5, 2), (2, 7), (1, 6), (3, 2), (1, 4), (4, 6)]
    arcs = connect_dummies(7, inner)
    req = [(0,), (3,), (3,), (2,), (1,), (3,), (3,), (3,), (0,)]
    return make_instance([0, 4, 3, 2, 5, 4, 2, 3, 0], arcs, req, (5,))


# ---------------------------------------------------------------------------
# transitive closure


def test_closure_chain():
    m = transitive_closure(3, [(0, 1), (1, 2)])
    reachable = {(i, j) for i in range(3) for j in range(3) if m[i][j]}
    assert reachable == {(0, 1), (0, 2), (1, 2)}


def test_closure_empty():
    m = transitive_closure(3, [])
    assert not any(any(row) for row in m)


def test_closure_diamond():
    m = transitive_closure(5, [(0, 1), (1, 2), (1, 3), (2, 4), (3, 4)])
    assert all(m[0][v] for v in range(1, 5))
    assert not m[2][3] and not m[3][2]


def test_closure_cycle_error():
    with pytest.raises(CyclicGraphError):
        transitive_closure(3, [(0, 1), (1, 2), (2, 0)])


# ---------------------------------------------------------------------------
# minimal forbidden sets


def test_pair_catalog():
    assert minimal_forbidden_sets(k3_instance()).sets == ((1, 2), (1, 3), (2, 3))


def test_no_conflicts_empty_catalog():
    inst = make_instance([0, 1, 1, 0], [(0, 1), (0, 2), (1, 3), (2, 3)],
                         [(0,), (1,), (1,), (0,)], (2,))
    assert minimal_forbidden_sets(inst).sets == ()


def test_frozen_catalog_family():
    inst = catalog_family()
    catalog = minimal_forbidden_sets(inst)
    assert catalog.sets == ((1, 5), (2, 6), (3, 4, 5), (5, 6), (6, 7))
    assert catalog.sets == brute_force_forbidden_sets(inst)


def test_catalog_matches_brute_force_on_random_instances():
    rng = random.Random(2024)
    for _ in range(40):
        inst = random_dag_instance(rng, rng.randint(1, 8), n_res=rng.randint(1, 2))
        assert minimal_forbidden_sets(inst).sets == brute_force_forbidden_sets(inst)


def test_catalog_cap():
    inst = k3_instance()
    with pytest.raises(CapExceeded):
        minimal_forbidden_sets(inst, max_sets=1)


# ---------------------------------------------------------------------------
# verify_selection


def test_verify_empty_catalog():
    inst = make_instance([0, 1, 1, 0], [(0, 1), (0, 2), (1, 3), (2, 3)],
                         [(0,), (1,), (1,), (0,)], (2,))
    catalog = minimal_forbidden_sets(inst)
    assert verify_selection(inst, Selection(), catalog).sufficient


def test_verify_chain_resolves_pairs():
    inst = k3_instance()
    catalog = minimal_forbidden_sets(inst)
    verdict = verify_selection(inst, Selection.from_pairs([(1, 2), (2, 3)]), catalog)
    assert verdict.sufficient  # closure also relates 1 and 3


def test_verify_reports_first_violated_set():
    inst = k3_instance()
    catalog = minimal_forbidden_sets(inst)
    verdict = verify_selection(inst, Selection.from_pairs([(1, 2)]), catalog)
    assert not verdict.sufficient
    assert verdict.violated_set == (1, 3)
    rel = closure_relation(inst, [(1, 2)])
    assert (1, 3) not in rel and (3, 1) not in rel


def test_verify_reports_cycle():
    inst = k3_instance()
    catalog = minimal_forbidden_sets(inst)
    verdict = verify_selection(inst, Selection.from_pairs([(1, 2), (2, 3), (3, 1)]), catalog)
    assert not verdict.sufficient
    assert verdict.cycle is not None


def test_selection_rejects_duplicates_of_instance_arcs():
    inst = k3_instance()
    catalog = minimal_forbidden_sets(inst)
    with pytest.raises(ValueError, match="duplicates"):
        verify_selection(inst, Selection.from_pairs([(0, 1)]), catalog)


def test_monotonicity_of_sufficiency():
    rng = random.Random(5)
    for _ in range(30):
        inst = random_dag_instance(rng, rng.randint(2, 6), n_res=1)
        catalog = minimal_forbidden_sets(inst)
        small = random_selection(rng, inst, max_arcs=2)
        if not verify_selection(inst, small, catalog).sufficient:
            continue
        bigger = random_selection(rng, inst, max_arcs=5)
        merged = small.added_arcs | bigger.added_arcs
        try:
            verdict = verify_selection(inst, Selection(frozenset(merged)), catalog)
        except Exception:
            continue
        if verdict.cycle is None:
            assert verdict.sufficient


# ---------------------------------------------------------------------------
# selection_from_schedule


def test_serial_schedule_relates_all():
    inst = k3_instance()
    start = (0, 0, 1, 2, 3)
    dur = (0, 1, 1, 1, 0)
    sel = selection_from_schedule(inst, start, dur)
    assert {(1, 2), (2, 3), (1, 3)} <= sel.added_arcs
    catalog = minimal_forbidden_sets(inst)
    assert verify_selection(inst, sel, catalog).sufficient


def test_unconstrained_earliest_schedule_is_vacuously_sufficient():
    inst = make_instance([0, 2, 3, 0], [(0, 1), (0, 2), (1, 3), (2, 3)],
                         [(0,), (1,), (1,), (0,)], (2,))
    start = (0, 0, 0, 3)
    sel = selection_from_schedule(inst, start, inst.nominal_duration)
    catalog = minimal_forbidden_sets(inst)
    assert catalog.sets == ()
    assert verify_selection(inst, sel, catalog).sufficient
    assert (1, 2) not in sel.added_arcs and (2, 1) not in sel.added_arcs


def test_zero_duration_ties_stay_acyclic():
    inst = make_instance([0, 0, 0, 0], [(0, 1), (0, 2), (1, 3), (2, 3)])
    sel = selection_from_schedule(inst, (0, 0, 0, 0), (0, 0, 0, 0))
    # mutual qualifications keep only the small-to-large direction
    assert (1, 2) in sel.added_arcs and (2, 1) not in sel.added_arcs
    closure_relation(inst, sel.added_arcs)  # acyclicity would raise


# ---------------------------------------------------------------------------
# enumerate_sufficient_selections


def test_enumerate_empty_catalog():
    inst = make_instance([0, 1, 0], [(0, 1), (1, 2)])
    sels = list(enumerate_sufficient_selections(inst, minimal_forbidden_sets(inst)))
    assert sels == [Selection()]


def test_enumerate_single_pair():
    inst = pair_conflict_instance()
    sels = list(enumerate_sufficient_selections(inst, minimal_forbidden_sets(inst)))
    assert [s.sorted_arcs() for s in sels] == [((1, 2),), ((2, 1),)]


def test_enumerate_k3_gives_six_orders():
    inst = k3_instance()
    catalog = minimal_forbidden_sets(inst)
    sels = list(enumerate_sufficient_selections(inst, catalog))
    closures = {closure_relation(inst, s.added_arcs) for s in sels}
    assert len(sels) == len(closures) == 6
    for s in sels:
        assert verify_selection(inst, s, catalog).sufficient


def oracle_minimal_closures(inst, catalog):
    """Brute force over all subsets of non-dummy ordered pairs."""
    base = set(inst.precedence)
    cand = [(i, j) for i in range(1, inst.sink) for j in range(1, inst.sink)
            if i != j and (i, j) not in base]
    found = set()
    for bits in range(1 << len(cand)):
        arcs = frozenset(c for idx, c in enumerate(cand) if (bits >> idx) & 1)
        verdict = verify_selection(inst, Selection(arcs), catalog)
        if verdict.sufficient:
            found.add(closure_relation(inst, arcs))
    return {rel for rel in found if not any(other < rel for other in found)}


def test_enumerate_matches_arc_subset_brute_force():
    rng = random.Random(77)
    checked = 0
    while checked < 8:
        inst = random_dag_instance(rng, 3, n_res=1)
        catalog = minimal_forbidden_sets(inst)
        if not catalog.sets:
            continue
        checked += 1
        expected = oracle_minimal_closures(inst, catalog)
        got = {closure_relation(inst, s.added_arcs)
               for s in enumerate_sufficient_selections(inst, catalog)}
        assert got == expected


def test_enumerate_cap():
    rng = random.Random(1)
    inst = random_dag_instance(rng, 9, n_res=1)
    with pytest.raises(CapExceeded):
        list(enumerate_sufficient_selections(inst, minimal_forbidden_sets(inst)))


def test_every_enumerated_selection_is_sufficient():
    rng = random.Random(13)
    for _ in range(15):
        inst = random_dag_instance(rng, rng.randint(2, 5), n_res=1)
        catalog = minimal_forbidden_sets(inst)
        for sel in enumerate_sufficient_selections(inst, catalog):
            assert verify_selection(inst, sel, catalog).sufficient
