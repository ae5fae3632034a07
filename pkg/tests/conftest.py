import json
from pathlib import Path

import pytest

from vizcot import vql
from vizcot.backend import ScriptedClient, record_script
from vizcot.cot import run_pipeline
from vizcot.datastore import load_database
from vizcot.refine import manual_correct, self_correct

DATA_ROOT = Path(__file__).parent / "data"
FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture(scope="session")
def data_root():
    return DATA_ROOT


@pytest.fixture(scope="session")
def faculty_db():
    return load_database(DATA_ROOT / "faculty")


@pytest.fixture(scope="session")
def allergy_db():
    return load_database(DATA_ROOT / "allergy")


@pytest.fixture(scope="session")
def wine_db():
    return load_database(DATA_ROOT / "wine")


@pytest.fixture(scope="session")
def notes_db():
    return load_database(DATA_ROOT / "notes")


# ---------------------------------------------------------------------------
# VQL suite: every quoted example plus systematic coverage of the grammar

PAPER_VQLS = [
    "VISUALIZE Pie SELECT Rank, COUNT(Rank) FROM Faculty GROUP BY Rank",
    "Visualize BAR SELECT date_of_notes, COUNT(date_of_notes) FROM Assessment_Notes BIN date_of_notes BY WEEKDAY",
    "VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE ORDER BY YEAR DESC",
    "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code",
    "VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code ORDER BY COUNT(city_code) DESC",
    "VISUALIZE SCATTER SELECT major, age FROM student",
    "VISUALIZE BAR SELECT major, AVG(age) FROM student GROUP BY major",
]

_EXTRA_VQLS = [
    "VISUALIZE LINE SELECT YEAR, MAX(SCORE) FROM WINE GROUP BY YEAR ORDER BY YEAR DESC",
    "VISUALIZE BAR SELECT YEAR, SUM(PRICE) FROM WINE WHERE YEAR IN (1999, 2000) GROUP BY YEAR",
    "VISUALIZE BAR SELECT YEAR, SUM(PRICE) FROM WINE WHERE YEAR = 1999 OR YEAR = 2000 GROUP BY YEAR",
    'VISUALIZE PIE SELECT rank, COUNT(rank) FROM Faculty WHERE rank != "Prof" GROUP BY rank',
    "visualize bar select rank, count(facid) from Faculty group by rank",
    "VISUALIZE SCATTER SELECT age, advisor FROM student",
    "VISUALIZE LINE SELECT date_of_notes, COUNT(notes_id) FROM Assessment_Notes BIN date_of_notes BY MONTH",
    "VISUALIZE LINE SELECT date_of_notes, COUNT(notes_id) FROM Assessment_Notes BIN date_of_notes BY YEAR",
    "VISUALIZE BAR SELECT date_of_notes, COUNT(notes_id) FROM Assessment_Notes BIN date_of_notes BY DAY",
    "VISUALIZE BAR SELECT city_code, COUNT(stuid) FROM student WHERE age > 19 GROUP BY city_code",
    "VISUALIZE BAR SELECT city_code, COUNT(stuid) FROM student WHERE age >= 19 AND sex = 'F' GROUP BY city_code",
    "VISUALIZE BAR SELECT major, MIN(age) FROM student GROUP BY major ORDER BY MIN(age) ASC",
    "VISUALIZE BAR SELECT major, MAX(age) FROM student GROUP BY major ORDER BY major DESC LIMIT 2",
    "VISUALIZE PIE SELECT sex, COUNT(sex) FROM student GROUP BY sex",
    "VISUALIZE BAR SELECT name, age FROM student ORDER BY age DESC LIMIT 3",
    "VISUALIZE BAR SELECT major, COUNT(stuid) FROM student WHERE city_code IN ('NYC', 'BAL') GROUP BY major",
    "VISUALIZE BAR SELECT major, COUNT(stuid) FROM student WHERE city_code = 'NYC' OR city_code = 'BAL' GROUP BY major",
    "VISUALIZE LINE SELECT YEAR, AVG(SCORE) FROM WINE GROUP BY YEAR",
    "VISUALIZE LINE SELECT YEAR, AVG(SCORE) FROM WINE WHERE SCORE > 85 GROUP BY YEAR ORDER BY YEAR ASC",
    "VISUALIZE BAR SELECT NAME, SCORE FROM WINE WHERE PRICE <= 30",
    "VISUALIZE BAR SELECT NAME, SCORE FROM WINE WHERE NAME LIKE 'M%'",
    "VISUALIZE SCATTER SELECT PRICE, SCORE FROM WINE",
    "VISUALIZE BAR SELECT rank, COUNT(facid) FROM Faculty WHERE facid < 1004 GROUP BY rank",
    "VISUALIZE PIE SELECT major, COUNT(major) FROM student WHERE (sex = 'F' OR sex = 'M') AND age < 23 GROUP BY major",
    "VISUALIZE BAR SELECT advisor, COUNT(stuid) FROM student GROUP BY advisor ORDER BY COUNT(stuid) DESC LIMIT 5",
    "VISUALIZE BAR SELECT sex, AVG(age) FROM student GROUP BY sex LIMIT 1",
    "VISUALIZE LINE SELECT date_of_notes, COUNT(date_of_notes) FROM Assessment_Notes GROUP BY date_of_notes",
    "VISUALIZE BAR SELECT teacher_id, COUNT(notes_id) FROM Assessment_Notes GROUP BY teacher_id ORDER BY teacher_id ASC",
    "VISUALIZE SCATTER SELECT stuid, age FROM student WHERE major != 'CS'",
    "VISUALIZE BAR SELECT major, SUM(age) FROM student GROUP BY major, sex",
    "VISUALIZE PIE SELECT city_code, COUNT(city_code) FROM student WHERE age IN (18, 19, 20) GROUP BY city_code",
    "VISUALIZE BAR SELECT name, advisor FROM student JOIN Faculty ON advisor = facid",
    "VISUALIZE BAR SELECT rank, COUNT(stuid) FROM student JOIN Faculty ON advisor = facid GROUP BY rank",
    "VISUALIZE LINE SELECT YEAR, MIN(PRICE) FROM WINE GROUP BY YEAR ORDER BY YEAR ASC LIMIT 10",
    "VISUALIZE BAR SELECT NAME, PRICE FROM WINE ORDER BY PRICE DESC",
    "VISUALIZE BAR SELECT major, AVG(advisor) FROM student GROUP BY major",
    "VISUALIZE PIE SELECT rank, COUNT(rank) FROM Faculty WHERE fname LIKE '%a%' GROUP BY rank",
    "VISUALIZE BAR SELECT sex, COUNT(stuid) FROM student WHERE age < 20 OR age > 23 GROUP BY sex",
    "VISUALIZE SCATTER SELECT age, stuid FROM student LIMIT 4",
    "VISUALIZE BAR SELECT city_code, MAX(age) FROM student GROUP BY city_code ORDER BY MAX(age) DESC",
    "VISUALIZE LINE SELECT SCORE, PRICE FROM WINE ORDER BY SCORE ASC",
    "VISUALIZE BAR SELECT date_of_notes, COUNT(teacher_id) FROM Assessment_Notes BIN date_of_notes BY WEEKDAY ORDER BY COUNT(teacher_id) DESC",
    "VISUALIZE PIE SELECT teacher_id, COUNT(notes_id) FROM Assessment_Notes WHERE teacher_id IN (103, 104) GROUP BY teacher_id",
    "VISUALIZE BAR SELECT fname, facid FROM Faculty WHERE rank = \"Prof\"",
    "VISUALIZE BAR SELECT major, COUNT(major) FROM student WHERE advisor IN (1001, 1002) GROUP BY major ORDER BY COUNT(major) ASC",
]

VQL_SUITE = PAPER_VQLS + _EXTRA_VQLS


@pytest.fixture(scope="session")
def vql_suite():
    assert len(VQL_SUITE) >= 50
    return list(VQL_SUITE)


# ---------------------------------------------------------------------------
# Scripted backends reproducing the two walkthrough sessions

def _stage_response(reasoning: str, **slots: str) -> str:
    block = "\n".join(f"{name}: {value}" for name, value in slots.items())
    return f"```\n{block}\n```\n{reasoning}"


CASE1_QUERY = (
    "Please display a bar chart showing all cities and their corresponding "
    "number of students to identify the city with the highest student count."
)

CASE1_RESPONSES = [
    _stage_response(
        "A bar chart (BAR) is a perfect fit as it allows for a clear comparison "
        "of the student counts across different cities.",
        chart_type="BAR"),
    _stage_response(
        "The student table holds one row per student; city_code identifies the "
        "city and counting students per city answers the question. No filter "
        "is needed because every student is relevant.",
        from_table="student", join="", select="city_code, COUNT(city_code)", where=""),
    _stage_response(
        "Counting requires one group per city, so we group by city_code. The "
        "data is not temporal, so no BIN is needed.",
        group_by="city_code", bin=""),
    _stage_response(
        "Since the question doesn't demand result sorting, we omit the ORDER BY "
        "clause. No LIMIT is needed because all cities should be shown.",
        order_by="", sort_direction="", limit=""),
    _stage_response(
        "Combining the previous decisions yields the final query.",
        vql="VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student GROUP BY city_code"),
]

CASE1_CORRECTION_RESPONSES = [
    _stage_response(
        "Sorting the data in descending order based on student count will place "
        "the city with the maximum number of students at the top, making it "
        "straightforward to visually determine which city has the highest "
        "student count.",
        order_by="COUNT(city_code)", sort_direction="DESC", limit=""),
    _stage_response(
        "Combining the previous decisions, now with descending sorting, yields "
        "the final query.",
        vql="VISUALIZE BAR SELECT city_code, COUNT(city_code) FROM student "
            "GROUP BY city_code ORDER BY COUNT(city_code) DESC"),
]

CASE2_QUERY = "Analyze the age distribution of students in different majors"

CASE2_RESPONSES = [
    _stage_response(
        "A scatter plot effectively displays the relationship between two "
        "variables, major and age, revealing patterns like age concentrations "
        "within specific majors.",
        chart_type="SCATTER"),
    _stage_response(
        "Each point needs a student's major and age, both from the student "
        "table. All students are relevant, so no filter is applied.",
        from_table="student", join="", select="major, age", where=""),
    _stage_response(
        "Individual data points are plotted, so no grouping or binning is applied.",
        group_by="", bin=""),
    _stage_response(
        "The scatter plot carries no inherent order, so sorting and limiting "
        "are unnecessary.",
        order_by="", sort_direction="", limit=""),
    _stage_response(
        "Combining the previous decisions yields the final query.",
        vql="VISUALIZE SCATTER SELECT major, age FROM student"),
]

CASE2_CORRECTION_RESPONSES = [
    _stage_response(
        "The user asks for the average age of each major, so a bar chart "
        "comparing one aggregated value per major is the right choice.",
        chart_type="BAR"),
    _stage_response(
        "The average age per major requires selecting major and AVG(age) from "
        "the student table. No filter is needed.",
        from_table="student", join="", select="major, AVG(age)", where=""),
    _stage_response(
        "Averaging per major requires grouping by major.",
        group_by="major", bin=""),
    _stage_response(
        "No sorting or limiting was requested.",
        order_by="", sort_direction="", limit=""),
    _stage_response(
        "Combining the corrected decisions yields the aggregated query.",
        vql="VISUALIZE BAR SELECT major, AVG(age) FROM student GROUP BY major"),
]


def build_case1_fixture(db) -> dict:
    fixture = record_script(
        lambda client: run_pipeline(CASE1_QUERY, db, client), CASE1_RESPONSES)

    def correction_runner(client):
        trace, _ = run_pipeline(CASE1_QUERY, db, client)
        self_correct(trace, "S4/SORT_DIRECTION", db, client)

    return record_script(correction_runner, CASE1_CORRECTION_RESPONSES, fixture)


def build_case2_fixture(db) -> dict:
    fixture = record_script(
        lambda client: run_pipeline(CASE2_QUERY, db, client), CASE2_RESPONSES)

    def correction_runner(client):
        trace, _ = run_pipeline(CASE2_QUERY, db, client)
        manual_correct(trace, "S1/CHART_TYPE", "Show the average age of each major",
                       db, client)

    return record_script(correction_runner, CASE2_CORRECTION_RESPONSES, fixture)


@pytest.fixture(scope="session")
def case1_client(allergy_db):
    return ScriptedClient(build_case1_fixture(allergy_db))


@pytest.fixture(scope="session")
def case2_client(allergy_db):
    return ScriptedClient(build_case2_fixture(allergy_db))


@pytest.fixture(scope="session")
def vega_lite_schema():
    with open(FIXTURES / "vega-lite-v5.23.0.json", encoding="utf-8") as f:
        return json.load(f)
