import json

import pytest

from vizcot import vql
from vizcot.cot import run_pipeline
from vizcot.refine import (
    CorrectionRequest, UnknownNode, diff_traces, manual_correct,
    promote_alternative, self_correct,
)

from conftest import CASE1_QUERY, CASE2_QUERY


@pytest.fixture
def case1_trace(allergy_db, case1_client):
    trace, _ = run_pipeline(CASE1_QUERY, allergy_db, case1_client)
    return trace


@pytest.fixture
def case2_trace(allergy_db, case2_client):
    trace, _ = run_pipeline(CASE2_QUERY, allergy_db, case2_client)
    return trace


class TestCorrectionRequest:
    def test_self_mode(self):
        req = CorrectionRequest("S4/SORT_DIRECTION", "self")
        assert req.preference is None

    def test_manual_requires_preference(self):
        with pytest.raises(ValueError):
            CorrectionRequest("S1/CHART_TYPE", "manual", preference="  ")

    def test_self_rejects_preference(self):
        with pytest.raises(ValueError):
            CorrectionRequest("S4/LIMIT", "self", preference="sort it")

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            CorrectionRequest("S4/LIMIT", "auto")


class TestDiffTraces:
    def test_identical_traces_all_unchanged(self, case1_trace):
        diff = diff_traces(case1_trace, case1_trace)
        assert diff.modified == []
        assert diff.reasoning_changed == []
        assert "S5" in diff.unchanged
        assert "S1/CHART_TYPE" in diff.unchanged

    def test_stage_nodes_excluded(self, case1_trace):
        diff = diff_traces(case1_trace, case1_trace)
        for stage_id in ("S1", "S2", "S3", "S4"):
            assert stage_id not in diff.unchanged
            assert stage_id not in diff.modified


class TestSelfCorrect:
    def test_modifies_only_flagged_and_root(self, allergy_db, case1_client, case1_trace):
        _, diff = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        assert sorted(diff.modified) == ["S4/SORT_DIRECTION", "S5"]
        assert diff.changed_slots["S4/SORT_DIRECTION"] == ["order_by", "sort_direction"]
        assert diff.changed_slots["S5"] == ["vql"]

    def test_new_final_vql_sorted(self, allergy_db, case1_client, case1_trace):
        new_trace, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        assert new_trace.final_vql() == (
            "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
            "GROUP BY city_code ORDER BY COUNT(city_code) DESC")

    def test_prefix_stages_copied_verbatim(self, allergy_db, case1_client, case1_trace):
        new_trace, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        for i in range(3):
            old = case1_trace.root.children[i]
            new = new_trace.root.children[i]
            assert json.dumps(old.to_json(), sort_keys=True) == \
                json.dumps(new.to_json(), sort_keys=True)

    def test_original_kept_as_alternative(self, allergy_db, case1_client, case1_trace):
        new_trace, diff = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        assert diff.alternatives == ["S4/SORT_DIRECTION#alt"]
        node = new_trace.node("S4/SORT_DIRECTION")
        alt = node.alternatives[0]
        assert alt.status == "alternative"
        assert alt.slots["order_by"] == ""
        assert node.slots["order_by"] == "COUNT(city_code)"
        assert node.slots["sort_direction"] == "DESC"

    def test_deterministic(self, allergy_db, case1_client, case1_trace):
        a, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        b, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        assert json.dumps(a.to_json(), sort_keys=True) == \
            json.dumps(b.to_json(), sort_keys=True)

    def test_source_trace_untouched(self, allergy_db, case1_client, case1_trace):
        before = json.dumps(case1_trace.to_json(), sort_keys=True)
        self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        assert json.dumps(case1_trace.to_json(), sort_keys=True) == before

    def test_unknown_node(self, allergy_db, case1_client, case1_trace):
        with pytest.raises(UnknownNode):
            self_correct(case1_trace, "S9/NOPE", allergy_db, case1_client)

    def test_root_not_correctable(self, allergy_db, case1_client, case1_trace):
        with pytest.raises(UnknownNode):
            self_correct(case1_trace, "S5", allergy_db, case1_client)


class TestManualCorrect:
    PREFERENCE = "Show the average age of each major"

    def test_final_vql_aggregated(self, allergy_db, case2_client, case2_trace):
        new_trace, _ = manual_correct(
            case2_trace, "S1/CHART_TYPE", self.PREFERENCE, allergy_db, case2_client)
        assert new_trace.final_vql() == \
            "VISUALIZE BAR SELECT major, AVG(age) FROM student GROUP BY major"
        query = vql.parse_vql(new_trace.final_vql())
        assert query.chart is vql.ChartType.BAR
        assert query.y.expression() == "AVG(age)"
        assert query.group_by == ("major",)

    def test_downstream_stages_regenerated(self, allergy_db, case2_client, case2_trace):
        _, diff = manual_correct(
            case2_trace, "S1/CHART_TYPE", self.PREFERENCE, allergy_db, case2_client)
        assert sorted(diff.modified) == \
            ["S1/CHART_TYPE", "S2/SELECT", "S3/GROUP_BY", "S5"]
        assert "S2/FROM" in diff.unchanged
        assert "S4/SORT_DIRECTION" in diff.unchanged

    def test_empty_preference(self, allergy_db, case2_client, case2_trace):
        with pytest.raises(ValueError):
            manual_correct(case2_trace, "S1/CHART_TYPE", "", allergy_db, case2_client)


class TestPromoteAlternative:
    def test_restores_original_slots(self, allergy_db, case1_client, case1_trace):
        corrected, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        promoted = promote_alternative(corrected, "S4/SORT_DIRECTION#alt")
        node = promoted.node("S4/SORT_DIRECTION")
        assert node.slots["order_by"] == ""
        assert node.alternatives == []

    def test_promoted_copy_leaves_input_intact(self, allergy_db, case1_client, case1_trace):
        corrected, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        promote_alternative(corrected, "S4/SORT_DIRECTION#alt")
        assert corrected.node("S4/SORT_DIRECTION").slots["order_by"] == "COUNT(city_code)"

    def test_unknown_alternative(self, allergy_db, case1_client, case1_trace):
        corrected, _ = self_correct(case1_trace, "S4/SORT_DIRECTION", allergy_db, case1_client)
        with pytest.raises(UnknownNode):
            promote_alternative(corrected, "S4/LIMIT#alt")
