import json

import jsonschema
import pytest

from vizcot.chartspec import SpecError, chart_json, emit_chart
from vizcot.executor import execute
from vizcot.vql import parse_vql

from conftest import VQL_SUITE


def _db_for(query, dbs):
    table = query.from_table.lower()
    mapping = {
        "faculty": "faculty", "student": "allergy", "wine": "wine",
        "assessment_notes": "notes",
    }
    return dbs[mapping[table]]


@pytest.fixture(scope="module")
def dbs(faculty_db, allergy_db, wine_db, notes_db):
    return {"faculty": faculty_db, "allergy": allergy_db,
            "wine": wine_db, "notes": notes_db}


class TestEmitChart:
    def test_pie_uses_arc_with_color_and_theta(self, faculty_db):
        q = parse_vql("VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank")
        doc = emit_chart(q, execute(q, faculty_db))
        assert doc["mark"] == "arc"
        assert doc["encoding"]["color"]["field"] == "Rank"
        assert doc["encoding"]["theta"]["field"] == "COUNT(Rank)"
        assert doc["encoding"]["theta"]["type"] == "quantitative"

    def test_sorted_bar_keeps_executed_order(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
                      "GROUP BY city_code ORDER BY COUNT(city_code) DESC")
        doc = emit_chart(q, execute(q, allergy_db))
        assert doc["mark"] == "bar"
        assert doc["encoding"]["x"]["sort"] is None
        assert doc["usermeta"]["sortHint"] == {
            "field": "COUNT(city_code)", "direction": "descending"}

    def test_binned_x_is_temporal(self, notes_db):
        q = parse_vql("VISUALIZE LINE SELECT date_of_notes, COUNT(notes_id) "
                      "FROM Assessment_Notes BIN date_of_notes BY YEAR")
        doc = emit_chart(q, execute(q, notes_db))
        assert doc["encoding"]["x"]["type"] == "temporal"

    def test_scatter_numeric_axes(self, wine_db):
        q = parse_vql("VISUALIZE SCATTER SELECT PRICE, SCORE FROM WINE")
        doc = emit_chart(q, execute(q, wine_db))
        assert doc["mark"] == "point"
        assert doc["encoding"]["x"]["type"] == "quantitative"
        assert doc["encoding"]["y"]["type"] == "quantitative"

    def test_row_count_preserved(self, allergy_db):
        q = parse_vql("VISUALIZE SCATTER SELECT major, age FROM student")
        result = execute(q, allergy_db)
        doc = emit_chart(q, result)
        assert len(doc["data"]["values"]) == len(result.rows)

    def test_mismatched_result_rejected(self, faculty_db, allergy_db):
        q1 = parse_vql("VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank")
        q2 = parse_vql("VISUALIZE SCATTER SELECT major, age FROM student")
        with pytest.raises(SpecError):
            emit_chart(q2, execute(q1, faculty_db))

    def test_byte_identical_output(self, faculty_db):
        q = parse_vql("VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank")
        a = chart_json(emit_chart(q, execute(q, faculty_db)))
        b = chart_json(emit_chart(q, execute(q, faculty_db)))
        assert a == b


class TestSchemaValidation:
    @pytest.mark.parametrize("text", VQL_SUITE)
    def test_suite_docs_validate(self, text, dbs, vega_lite_schema, data_root):
        q = parse_vql(text)
        if q.join is not None:
            from vizcot.datastore import Database, load_database
            db = Database(load_database(data_root / "allergy").tables
                          + load_database(data_root / "faculty").tables)
        else:
            db = _db_for(q, dbs)
        try:
            result = execute(q, db)
        except Exception:
            pytest.skip("query not executable on its fixture database")
        doc = emit_chart(q, result)
        jsonschema.validate(doc, vega_lite_schema)
