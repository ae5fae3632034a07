"""Record HTTP API fixtures for the UI tests.

Spins up the backend in-process with a scripted model backend, replays the
bar-chart walkthrough session (query, then self-correction of the sort step),
and captures the raw response payloads the UI consumes.

Run from the repository root:

    python3 frontend/scripts/record_fixtures.py
"""

import json
import sys
from pathlib import Path

ROOT = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(ROOT / "tests"))

from fastapi.testclient import TestClient  # noqa: E402

from vizcot.backend import ScriptedClient  # noqa: E402
from vizcot.datastore import load_database  # noqa: E402
from vizcot.server import create_app  # noqa: E402

from conftest import CASE1_QUERY, build_case1_fixture  # noqa: E402

OUT = Path(__file__).resolve().parents[1] / "tests" / "fixtures"


def main() -> None:
    db = load_database(ROOT / "tests" / "data" / "allergy")
    app = create_app(ROOT / "tests" / "data", ScriptedClient(build_case1_fixture(db)))
    OUT.mkdir(parents=True, exist_ok=True)

    with TestClient(app) as api:
        sid = api.post("/sessions", json={"database": "allergy"}).json()["session_id"]
        api.post(f"/sessions/{sid}/query", json={"query": CASE1_QUERY})
        api.post(f"/sessions/{sid}/correct",
                 json={"node_id": "S4/SORT_DIRECTION", "mode": "self"})

        captures = {
            "case1_trace_v1.json": api.get(f"/sessions/{sid}/trace",
                                           params={"version": 1}),
            "case1_trace_v2.json": api.get(f"/sessions/{sid}/trace"),
            "case1_step_S1.json": api.get(f"/sessions/{sid}/steps/S1/data"),
            "case1_step_S3.json": api.get(f"/sessions/{sid}/steps/S3/data"),
            "case1_step_S5.json": api.get(f"/sessions/{sid}/steps/S5/data"),
        }
        for name, response in captures.items():
            assert response.status_code == 200, (name, response.text)
            (OUT / name).write_bytes(response.content)

        for kind, name in (("vql", "case1_export_vql.txt"),
                           ("chart-spec", "case1_export_chart_spec.json")):
            response = api.get(f"/sessions/{sid}/export", params={"kind": kind})
            assert response.status_code == 200, response.text
            (OUT / name).write_bytes(response.content)

    manifest = {"query": CASE1_QUERY, "session_query_version": 1,
                "correction_version": 2, "corrected_node": "S4/SORT_DIRECTION"}
    (OUT / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    print(f"wrote {len(list(OUT.iterdir()))} fixture files to {OUT}")


if __name__ == "__main__":
    main()
