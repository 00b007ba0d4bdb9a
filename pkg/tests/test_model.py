import itertools

import numpy as np
import pytest

from gaielicit.model import (
    AttributeSpec,
    FactorScope,
    GaiModel,
    ModelError,
    build_gai_graph,
    compute_canonical_plan,
    evaluate_utility,
    key_outcome_expansion,
    project_config,
    project_outcome,
    signed_projection_matrix,
    validate_model,
    vbar,
)

from util import (
    brute_force_plan,
    derived_local_values,
    fig1_model,
    random_factors,
    random_model,
    random_true_utility,
    true_utility_fn,
)


class TestValidation:
    def test_reference_model_is_valid(self):
        assert validate_model(fig1_model()) == []

    def test_uncovered_attribute_reported(self):
        m = fig1_model()
        # drop attribute 6 from factor 2's scope so nothing covers it
        factors = [FactorScope(2, (0, 1)) if f.id == 2 else f for f in m.factors]
        bad = GaiModel(
            attributes=m.attributes,
            factors=factors,
            default_outcome=m.default_outcome,
            anchors={
                f.id: (tuple(1 for _ in f.attrs), tuple(0 for _ in f.attrs)) for f in factors
            },
        )
        problems = validate_model(bad)
        assert any("uncovered" in p for p in problems)

    def test_equal_anchors_reported(self):
        m = fig1_model()
        m.anchors[2] = ((0, 0, 0), (0, 0, 0))
        problems = validate_model(m)
        assert any("anchors are identical" in p for p in problems)

    def test_infeasible_default_reported(self):
        from gaielicit.model import Constraint

        m = fig1_model()
        m.constraints.append(Constraint(scope=(0, 1), forbidden=frozenset({(0, 0)})))
        problems = validate_model(m)
        assert any("default outcome is infeasible" in p for p in problems)


class TestGaiGraph:
    def test_reference_edges(self):
        g = build_gai_graph(fig1_model().factors)
        expected = {
            (2, 1): {0, 1},
            (3, 1): {1},
            (3, 2): {1},
            (4, 3): {3},
            (5, 1): {5},
            (5, 4): {4},
        }
        assert {e: set(lab) for e, lab in g.edges.items()} == expected

    def test_disjoint_factors_have_no_edges(self):
        factors = [FactorScope(1, (0,)), FactorScope(2, (1,)), FactorScope(3, (2,))]
        assert build_gai_graph(factors).edges == {}

    def test_edges_match_pairwise_intersections(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            factors = random_factors(rng, 8, 6, 4)
            g = build_gai_graph(factors)
            for fi, fj in itertools.combinations(factors, 2):
                hi, lo = max(fi, fj, key=lambda f: f.id), min(fi, fj, key=lambda f: f.id)
                inter = set(hi.attrs) & set(lo.attrs)
                if inter:
                    assert set(g.edges[(hi.id, lo.id)]) == inter
                else:
                    assert (hi.id, lo.id) not in g.edges

    def test_antisymmetry_and_nonempty_labels(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            g = build_gai_graph(random_factors(rng, 7, 5, 4))
            for (i, j), lab in g.edges.items():
                assert i > j
                assert lab


class TestCanonicalPlan:
    def test_reference_factor5_terms(self):
        m = fig1_model()
        plan = compute_canonical_plan(build_gai_graph(m.factors))
        assert plan.factor_terms(5) == {
            frozenset({4, 5}): 1,
            frozenset({4}): -1,
            frozenset({5}): -1,
        }

    def test_single_factor_plan(self):
        factors = [FactorScope(1, (0, 1))]
        plan = compute_canonical_plan(build_gai_graph(factors))
        assert plan.factor_terms(1) == {frozenset({0, 1}): 1}

    def test_matches_direct_enumeration_on_random_structures(self):
        rng = np.random.default_rng(11)
        for _ in range(60):
            factors = random_factors(rng, 8, int(rng.integers(2, 7)), 4)
            plan = compute_canonical_plan(build_gai_graph(factors))
            assert plan.terms == brute_force_plan(factors)

    def test_own_scope_keeps_unit_coefficient_without_nesting(self):
        rng = np.random.default_rng(12)
        checked = 0
        while checked < 25:
            factors = random_factors(rng, 8, 5, 3)
            scopes = [frozenset(f.attrs) for f in factors]
            if any(a < b for a, b in itertools.permutations(scopes, 2)):
                continue  # nested scopes can legitimately cancel the own term
            plan = compute_canonical_plan(build_gai_graph(factors))
            for f in factors:
                assert plan.factor_terms(f.id)[frozenset(f.attrs)] == 1
            checked += 1

    def test_nested_scope_cancels(self):
        # scope of factor 2 contained in factor 1: the direct term cancels
        factors = [FactorScope(1, (0, 1, 2)), FactorScope(2, (0, 1))]
        plan = compute_canonical_plan(build_gai_graph(factors))
        assert plan.factor_terms(2) == {}
        assert plan.factor_terms(2) == brute_force_plan(factors)[2]


class TestProjection:
    def test_reference_projection(self):
        m = fig1_model()
        x = (1, 1, 1, 1, 1, 1, 1)
        assert project_outcome(m, x, {0}) == (1, 0, 0, 0, 0, 0, 0)

    def test_full_scope_is_identity(self):
        m = fig1_model()
        x = (1, 0, 1, 0, 1, 0, 1)
        assert project_outcome(m, x, set(range(7))) == x

    def test_empty_set_gives_defaults(self):
        m = fig1_model()
        assert project_outcome(m, (1,) * 7, set()) == m.default_outcome

    def test_idempotent(self):
        rng = np.random.default_rng(3)
        m = random_model(rng, n_attrs=6, n_factors=3, max_scope=3)
        for _ in range(20):
            x = tuple(int(rng.integers(0, s)) for s in m.domain_sizes)
            keep = {int(a) for a in rng.choice(6, size=2, replace=False)}
            once = project_outcome(m, x, keep)
            assert project_outcome(m, once, keep) == once

    def test_outside_scope_rejected(self):
        m = fig1_model()
        with pytest.raises(ModelError):
            project_config(m, 5, (0, 0), {0})


class TestVbar:
    def test_reference_factor5_formula(self):
        m = fig1_model()
        plan = compute_canonical_plan(build_gai_graph(m.factors))
        rng = np.random.default_rng(5)
        table = rng.uniform(size=m.config_count(5))

        def v(a, b):
            return table[m.encode_config(5, (a, b))]

        for a, b in m.local_configs(5):
            expected = v(a, b) - v(a, 0) - v(0, b)  # defaults are level 0
            assert vbar(m, plan, 5, (a, b), table) == pytest.approx(expected, abs=1e-12)

    def test_matrix_application_matches_vbar(self):
        rng = np.random.default_rng(6)
        for _ in range(10):
            m = random_model(rng, n_attrs=6, n_factors=4, max_scope=3)
            plan = compute_canonical_plan(build_gai_graph(m.factors))
            for f in m.factors:
                table = rng.uniform(size=m.config_count(f.id))
                s = signed_projection_matrix(m, plan, f.id)
                combined = s @ table
                for c in m.local_configs(f.id):
                    idx = m.encode_config(f.id, c)
                    assert combined[idx] == pytest.approx(vbar(m, plan, f.id, c, table), abs=1e-12)


class TestKeyOutcomeExpansion:
    def test_two_factor_example(self):
        attrs = [AttributeSpec(i, f"a{i}", ("0", "1")) for i in range(3)]
        model = GaiModel(
            attributes=attrs,
            factors=[FactorScope(1, (0, 1)), FactorScope(2, (1, 2))],
            default_outcome=(0, 0, 0),
            anchors={1: ((1, 1), (0, 0)), 2: ((1, 1), (0, 0))},
        )
        terms = key_outcome_expansion(model, (1, 1, 1))
        assert sorted(terms) == sorted(
            [(1, (1, 1, 0)), (1, (0, 1, 1)), (-1, (0, 1, 0))]
        )

    def test_three_set_signs(self):
        rng = np.random.default_rng(4)
        m = random_model(rng, n_attrs=5, n_factors=3, max_scope=3)
        terms = key_outcome_expansion(m, tuple(0 for _ in range(5)))
        assert [s for s, _ in terms] == [1, 1, 1, -1, -1, -1, 1]

    def test_single_factor(self):
        attrs = [AttributeSpec(i, f"a{i}", ("0", "1")) for i in range(2)]
        model = GaiModel(
            attributes=attrs,
            factors=[FactorScope(1, (0, 1))],
            default_outcome=(0, 0),
            anchors={1: ((1, 1), (0, 0))},
        )
        assert key_outcome_expansion(model, (1, 0)) == [(1, (1, 0))]

    def test_expansion_reconstructs_factored_utilities(self):
        rng = np.random.default_rng(9)
        for _ in range(20):
            m = random_model(rng, n_attrs=6, n_factors=int(rng.integers(2, 5)), max_scope=3)
            u = true_utility_fn(m, random_true_utility(rng, m))
            for _ in range(5):
                x = tuple(int(rng.integers(0, s)) for s in m.domain_sizes)
                total = sum(sign * u(key) for sign, key in key_outcome_expansion(m, x))
                assert total == pytest.approx(u(x), abs=1e-9)


class TestEvaluateUtility:
    def _assert_constant_shift(self, model, utility, tol=1e-9):
        tables, anchors = derived_local_values(model, utility)
        plan = compute_canonical_plan(build_gai_graph(model.factors))
        diffs = [
            evaluate_utility(model, plan, tables, anchors, x) - utility(x)
            for x in model.all_outcomes()
        ]
        assert max(diffs) - min(diffs) <= tol

    def test_constant_shift_on_random_models(self):
        rng = np.random.default_rng(21)
        for _ in range(25):
            m = random_model(
                rng,
                n_attrs=int(rng.integers(3, 7)),
                n_factors=int(rng.integers(2, 7)),
                max_scope=3,
            )
            u = true_utility_fn(m, random_true_utility(rng, m))
            self._assert_constant_shift(m, u)

    def test_singleton_factors_reduce_to_additive(self):
        attrs = [AttributeSpec(i, f"a{i}", ("0", "1", "2")) for i in range(3)]
        model = GaiModel(
            attributes=attrs,
            factors=[FactorScope(i + 1, (i,)) for i in range(3)],
            default_outcome=(0, 0, 0),
            anchors={i + 1: ((2,), (0,)) for i in range(3)},
        )
        rng = np.random.default_rng(2)
        tables = {f.id: rng.uniform(size=3) for f in model.factors}
        anchors_u = {}
        from gaielicit.model import AnchorUtilities

        anchors = AnchorUtilities(
            top={1: 0.9, 2: 0.7, 3: 0.6}, bottom={1: 0.1, 2: 0.2, 3: 0.0}, default_utility=0.3
        )
        plan = compute_canonical_plan(build_gai_graph(model.factors))
        for x in model.all_outcomes():
            additive = sum(
                (anchors.top[i + 1] - anchors.bottom[i + 1]) * tables[i + 1][x[i]]
                for i in range(3)
            )
            assert evaluate_utility(model, plan, tables, anchors, x) == pytest.approx(additive)

    def test_zero_span_gives_zero(self):
        m = fig1_model()
        plan = compute_canonical_plan(build_gai_graph(m.factors))
        rng = np.random.default_rng(13)
        tables = {f.id: rng.uniform(size=m.config_count(f.id)) for f in m.factors}
        from gaielicit.model import AnchorUtilities

        anchors = AnchorUtilities(
            top={f.id: 0.5 for f in m.factors},
            bottom={f.id: 0.5 for f in m.factors},
            default_utility=0.5,
        )
        for _ in range(10):
            x = tuple(int(rng.integers(0, 2)) for _ in range(7))
            assert evaluate_utility(m, plan, tables, anchors, x) == 0.0

    def test_factor_order_invariance_up_to_constant(self):
        rng = np.random.default_rng(31)
        for _ in range(10):
            m = random_model(rng, n_attrs=5, n_factors=4, max_scope=3)
            u = true_utility_fn(m, random_true_utility(rng, m))
            perm = list(rng.permutation(len(m.factors)))
            permuted = GaiModel(
                attributes=m.attributes,
                factors=[FactorScope(k + 1, m.factors[p].attrs) for k, p in enumerate(perm)],
                default_outcome=m.default_outcome,
                anchors={k + 1: m.anchors[m.factors[p].id] for k, p in enumerate(perm)},
            )
            t1, a1 = derived_local_values(m, u)
            t2, a2 = derived_local_values(permuted, u)
            p1 = compute_canonical_plan(build_gai_graph(m.factors))
            p2 = compute_canonical_plan(build_gai_graph(permuted.factors))
            diffs = [
                evaluate_utility(m, p1, t1, a1, x) - evaluate_utility(permuted, p2, t2, a2, x)
                for x in m.all_outcomes()
            ]
            assert max(diffs) - min(diffs) <= 1e-9
