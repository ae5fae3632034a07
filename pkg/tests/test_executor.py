import random
from collections import Counter

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vizcot.executor import ExecError, bin_label, execute, execute_stage
from vizcot.vql import BinUnit, parse_vql

import oracle
import randgen


class TestBinLabel:
    def test_weekday(self):
        assert bin_label("2024-03-15", BinUnit.WEEKDAY) == "Friday"

    def test_year(self):
        assert bin_label("2024-03-15", BinUnit.YEAR) == "2024"

    def test_month(self):
        assert bin_label("2024-03-15", BinUnit.MONTH) == "2024-03"

    def test_day_with_time(self):
        assert bin_label("2024-03-15 08:30:00", BinUnit.DAY) == "2024-03-15"

    def test_unparseable(self):
        with pytest.raises(ExecError):
            bin_label("soon", BinUnit.YEAR)


class TestExecute:
    def test_count_by_rank(self, faculty_db):
        q = parse_vql("VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank")
        result = execute(q, faculty_db)
        assert Counter(result.rows) == Counter(
            {("AsstProf", 2): 1, ("Prof", 2): 1, ("AssocProf", 1): 1})
        assert not result.ordered

    def test_in_vs_or_equivalence(self, wine_db):
        q_in = parse_vql("VISUALIZE BAR SELECT YEAR, SUM(PRICE) FROM WINE "
                         "WHERE YEAR IN (1999, 2000) GROUP BY YEAR")
        q_or = parse_vql("VISUALIZE BAR SELECT YEAR, SUM(PRICE) FROM WINE "
                         "WHERE YEAR = 1999 OR YEAR = 2000 GROUP BY YEAR")
        assert Counter(execute(q_in, wine_db).rows) == Counter(execute(q_or, wine_db).rows)

    def test_aggregate_without_grouping_errors(self, wine_db):
        q = parse_vql("VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE ORDER BY YEAR DESC")
        with pytest.raises(ExecError) as exc:
            execute(q, wine_db)
        assert exc.value.kind == "aggregate-without-grouping"

    def test_unknown_table_when_validation_skipped(self, wine_db):
        q = parse_vql("VISUALIZE BAR SELECT a, b FROM nowhere")
        with pytest.raises(ExecError) as exc:
            execute(q, wine_db)
        assert exc.value.kind == "unknown-table"

    def test_order_by_desc(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
                      "GROUP BY city_code ORDER BY COUNT(city_code) DESC")
        result = execute(q, allergy_db)
        counts = [y for _, y in result.rows]
        assert counts == sorted(counts, reverse=True)
        assert result.ordered
        assert result.rows[0] == ("NYC", 3)

    def test_limit_truncates(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT name, age FROM student ORDER BY age DESC LIMIT 3")
        result = execute(q, allergy_db)
        assert len(result.rows) == 3
        assert result.rows[0] == ("Susan", 24)

    def test_bin_weekday(self, notes_db):
        q = parse_vql("Visualize BAR SELECT date_of_notes, COUNT(date_of_notes) "
                      "FROM Assessment_Notes BIN date_of_notes BY WEEKDAY")
        result = execute(q, notes_db)
        # 2015-05-26 (Tue) x2, 2015-05-27 (Wed), 2015-06-01 (Mon), 2015-07-03 (Fri)
        assert Counter(result.rows) == Counter(
            {("Tuesday", 2): 1, ("Wednesday", 1): 1, ("Monday", 1): 1, ("Friday", 1): 1})

    def test_join(self, data_root):
        from vizcot.datastore import load_database
        db_students = load_database(data_root / "allergy")
        db_faculty = load_database(data_root / "faculty")
        from vizcot.datastore import Database
        db = Database(db_students.tables + db_faculty.tables)
        q = parse_vql("VISUALIZE BAR SELECT rank, COUNT(stuid) FROM student "
                      "JOIN Faculty ON advisor = facid GROUP BY rank")
        result = execute(q, db)
        assert Counter(result.rows) == Counter({("AsstProf", 6): 1, ("Prof", 2): 1})

    def test_where_null_fails_comparisons(self, tmp_path):
        from vizcot.datastore import load_database
        (tmp_path / "t.csv").write_text("a,b\n1,2\n,3\n")
        db = load_database(tmp_path)
        q = parse_vql("VISUALIZE BAR SELECT a, b FROM t WHERE a != 99")
        assert execute(q, db).rows == [(1, 2)]

    def test_null_group_key(self, tmp_path):
        from vizcot.datastore import load_database
        (tmp_path / "t.csv").write_text("a,b\nx,1\n,2\n,4\n")
        db = load_database(tmp_path)
        q = parse_vql("VISUALIZE BAR SELECT a, SUM(b) FROM t GROUP BY a")
        assert Counter(execute(q, db).rows) == Counter({("x", 1): 1, ("(null)", 6): 1})

    def test_count_skips_nulls(self, tmp_path):
        from vizcot.datastore import load_database
        (tmp_path / "t.csv").write_text("a,b\nx,1\nx,\nx,3\n")
        db = load_database(tmp_path)
        q = parse_vql("VISUALIZE BAR SELECT a, COUNT(b) FROM t GROUP BY a")
        assert execute(q, db).rows == [("x", 2)]

    def test_result_json_shape(self, faculty_db):
        q = parse_vql("VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank")
        payload = execute(q, faculty_db).to_json()
        assert payload["columns"] == [
            {"label": "Rank", "type": "text"}, {"label": "COUNT(Rank)", "type": "number"}]
        assert payload["ordered"] is False


class TestStageData:
    def test_s1_preview(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code")
        result = execute_stage(q, allergy_db, "S1")
        assert len(result.rows) == 8  # all student rows fit in the preview

    def test_s2_filtered_rows(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
                      "WHERE age > 19 GROUP BY city_code")
        result = execute_stage(q, allergy_db, "S2")
        assert len(result.rows) == 5
        assert result.columns[1][0] == "city_code"

    def test_s3_grouped(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
                      "GROUP BY city_code ORDER BY COUNT(city_code) DESC LIMIT 2")
        result = execute_stage(q, allergy_db, "S3")
        assert len(result.rows) == 5  # no order/limit applied yet

    def test_s5_final(self, allergy_db):
        q = parse_vql("VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
                      "GROUP BY city_code ORDER BY COUNT(city_code) DESC LIMIT 2")
        result = execute_stage(q, allergy_db, "S5")
        assert result.rows == [("NYC", 3), ("BAL", 2)]


class TestOracleEquivalence:
    def test_randomized_against_oracle(self):
        rng = random.Random(20240815)
        for case in range(300):
            table = randgen.random_table(rng)
            query = randgen.random_query(rng, table)
            db = randgen.as_database(table)
            got = execute(query, db)
            want = oracle.run_query(query, randgen.as_dict_rows(table))
            if query.order is not None:
                assert got.rows == want, (case, query)
            else:
                assert Counter(got.rows) == Counter(want), (case, query)

    def test_filter_monotonicity(self):
        rng = random.Random(7)
        from vizcot.vql import BoolOp, VqlQuery
        import dataclasses
        for _ in range(200):
            table = randgen.random_table(rng)
            if not table.rows:
                continue
            base = randgen.random_query(rng, table)
            extra = randgen.random_predicate(rng, table)
            if base.where is None:
                tightened = dataclasses.replace(base, where=extra)
            else:
                tightened = dataclasses.replace(
                    base, where=BoolOp("AND", (base.where, extra)))
            loose = dataclasses.replace(base, group_by=None, order=None, limit=None,
                                        x=dataclasses.replace(base.x, aggregate=None),
                                        y=dataclasses.replace(base.y, aggregate=None))
            tight = dataclasses.replace(tightened, group_by=None, order=None, limit=None,
                                        x=dataclasses.replace(base.x, aggregate=None),
                                        y=dataclasses.replace(base.y, aggregate=None))
            db = randgen.as_database(table)
            assert len(execute(tight, db).rows) <= len(execute(loose, db).rows)


@settings(max_examples=100, deadline=None)
@given(values=st.lists(st.integers(-3, 3), min_size=1, max_size=5, unique=True),
       seed=st.integers(0, 10_000))
def test_in_list_or_chain_equivalence(values, seed):
    rng = random.Random(seed)
    table = randgen.random_table(rng)
    number_cols = [c for c, t in table.schema.columns if t == "number"]
    if not number_cols:
        return
    col = number_cols[0]
    other = table.schema.columns[0][0]
    from vizcot.vql import BoolOp, Comparison, Membership, parse_vql
    in_text = f"VISUALIZE BAR SELECT {other}, {col} FROM t WHERE {col} IN ({', '.join(map(str, values))})"
    or_text = f"VISUALIZE BAR SELECT {other}, {col} FROM t WHERE " + \
        " OR ".join(f"{col} = {v}" for v in values)
    db = randgen.as_database(table)
    assert Counter(execute(parse_vql(in_text), db).rows) == \
        Counter(execute(parse_vql(or_text), db).rows)
