import pytest

from gaielicit.belief import UniformMixture
from gaielicit.problemfile import (
    ProblemFormatError,
    demo_problem,
    dump_model,
    load_problem,
    parse_problem,
)

from util import fig1_model


class TestParsing:
    def test_demo_parses(self):
        doc = parse_problem(demo_problem())
        assert doc.model.n_attributes == 5
        assert doc.anchor_utilities is not None

    def test_schema_tag_required(self):
        doc = demo_problem()
        doc["schema"] = "gai-model/2"
        with pytest.raises(ProblemFormatError, match="schema"):
            parse_problem(doc)

    def test_unknown_attribute_in_factor(self):
        doc = demo_problem()
        doc["factors"][0]["attributes"] = ["cuisine", "nonexistent"]
        with pytest.raises(ProblemFormatError, match="unknown attribute"):
            parse_problem(doc)

    def test_missing_anchor_block(self):
        doc = demo_problem()
        doc["anchors"] = doc["anchors"][:-1]
        with pytest.raises(ProblemFormatError, match="missing anchors"):
            parse_problem(doc)

    def test_duplicate_attribute_names(self):
        doc = demo_problem()
        doc["attributes"][1]["name"] = doc["attributes"][0]["name"]
        with pytest.raises(ProblemFormatError, match="unique"):
            parse_problem(doc)

    def test_forbidden_tuple_arity(self):
        doc = demo_problem()
        doc["constraints"][0]["forbidden"] = [["garden"]]
        with pytest.raises(ProblemFormatError, match="arity"):
            parse_problem(doc)

    def test_unknown_value_label(self):
        doc = demo_problem()
        doc["default_outcome"]["cuisine"] = "thai"
        with pytest.raises(ProblemFormatError, match="not in domain"):
            parse_problem(doc)


class TestAnchorUtilities:
    def test_default_outside_anchor_range_rejected(self):
        doc = demo_problem()
        doc["anchor_utilities"]["default_utility"] = 0.95  # above factor 1 top
        with pytest.raises(ProblemFormatError, match="outside the anchor utility range"):
            parse_problem(doc)

    def test_bottom_anchor_at_default_must_match_default_utility(self):
        doc = demo_problem()
        # make factor 3's bottom anchor the default pattern with a conflicting utility
        doc["anchors"][2]["bottom"] = {"drinks": "standard", "timing": "early"}
        with pytest.raises(ProblemFormatError, match="differs from default_utility"):
            parse_problem(doc)


class TestPriors:
    def test_default_uniform(self):
        doc = parse_problem(demo_problem())
        mixes = doc.prior_mixtures()
        assert all(m == UniformMixture.uniform() for m in mixes.values())

    def test_mixture_and_gaussian_specs(self):
        raw = demo_problem()
        raw["priors"] = {
            "default": {"kind": "gaussian", "mean": 0.4, "variance": 0.3, "components": 10},
            "overrides": [
                {
                    "factor": 3,
                    "config": {"drinks": "premium", "timing": "early"},
                    "kind": "mixture",
                    "components": [[0.0, 0.5, 0.25], [0.5, 1.0, 0.75]],
                }
            ],
        }
        doc = parse_problem(raw)
        mixes = doc.prior_mixtures()
        m = doc.model
        idx = m.encode_config(3, (m.value_index(3, "premium"), m.value_index(4, "early")))
        override = mixes[(3, idx)]
        assert override.weights == (0.25, 0.75)
        others = [mix for key, mix in mixes.items() if key != (3, idx)]
        assert all(len(mix.lowers) == 10 for mix in others)

    def test_unknown_prior_kind_rejected(self):
        raw = demo_problem()
        raw["priors"] = {"default": {"kind": "beta"}}
        with pytest.raises(ProblemFormatError, match="unknown prior kind"):
            parse_problem(raw)


class TestRoundTrip:
    def test_dump_parse_identity(self):
        m = fig1_model()
        doc = parse_problem(dump_model(m))
        assert doc.model.factors == m.factors
        assert doc.model.anchors == m.anchors
        assert doc.model.default_outcome == m.default_outcome

    def test_load_from_file(self, tmp_path):
        import json

        path = tmp_path / "problem.json"
        path.write_text(json.dumps(demo_problem()))
        doc = load_problem(path)
        assert doc.model.name == "team-dinner"
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        with pytest.raises(ProblemFormatError, match="JSON"):
            load_problem(bad)
