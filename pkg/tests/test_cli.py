import json
import subprocess
import sys
from pathlib import Path

import pytest

from bivmaps.cli import run
from bivmaps.popchart import VARIANTS
from bivmaps.techniques import TECHNIQUES

DATA = Path(__file__).parent / "data"
G, D, C = (str(DATA / n) for n in ("departements96.geojson", "departements96.csv",
                                   "cities96.csv"))

TRIALS = "participant_id,technique,question,question_set,correct,time_ms\n" + "".join(
    f"p{p},{t},Q{q},S1,{(p + q + i) % 3 != 0:d},{1000 + 137 * p + 71 * q + 400 * i}\n"
    for p in range(8) for i, t in enumerate(("Cartogram", "Juxtaposed", "Bertillon"))
    for q in (1, 2))
RANKS = "participant_id,technique,rank\n" + "".join(
    f"p{p},{t},{(p + i) % 3 + 1}\n"
    for p in range(8) for i, t in enumerate(("Cartogram", "Juxtaposed", "Bertillon")))


@pytest.fixture
def logs(tmp_path):
    (tmp_path / "t.csv").write_text(TRIALS)
    (tmp_path / "r.csv").write_text(RANKS)
    return tmp_path


def test_render_choropleth(tmp_path):
    out = tmp_path / "m.svg"
    assert run(["render", "--technique", "choropleth", "--geometry", G, "--data", D,
                "--out", str(out)]) == 0
    assert out.read_bytes().startswith(b"<?xml")
    meta = json.loads((tmp_path / "m.svg.meta.json").read_text())
    assert meta["command"] == "render" and meta["config"]["palette"].count("#") == 5


def test_missing_geometry_names_flag(tmp_path, capsys):
    code = run(["render", "--technique", "prism3d", "--data", D, "--out",
                str(tmp_path / "x.svg")])
    assert code == 1
    assert "--geometry" in capsys.readouterr().err


def test_bad_input_exits_one(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("id,name,population,statistic\nD01,x,5,250\n")
    code = run(["render", "--technique", "choropleth", "--geometry", G, "--data", str(bad),
                "--out", str(tmp_path / "x.svg")])
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_analyze_twice_identical(logs):
    args = ["analyze", "--trials", str(logs / "t.csv"), "--rankings", str(logs / "r.csv"),
            "--seed", "42", "--resamples", "1000"]
    assert run(args + ["--out", str(logs / "a")]) == 0
    assert run(args + ["--out", str(logs / "b")]) == 0
    for name in ("estimates.csv", "rankings.csv", "chart_time_ratio.svg"):
        assert (logs / "a" / name).read_bytes() == (logs / "b" / name).read_bytes()


def test_analyze_requires_seed(logs):
    assert run(["analyze", "--trials", str(logs / "t.csv"), "--out", str(logs / "a")]) == 1


def test_oracle_and_design(tmp_path):
    out = tmp_path / "ans.json"
    assert run(["oracle", "--task", "neighbor_argmax", "--region", "D05", "--geometry", G,
                "--data", D, "--out", str(out)]) == 0
    ans = json.loads(out.read_text())
    assert ans["task"] == "neighbor_argmax" and ans["answer"] in ans["support"]["values"]
    assert run(["oracle", "--task", "biggest_city", "--geometry", G, "--data", D,
                "--cities", C, "--out", str(out)]) == 0
    assert run(["design", "--techniques", "a,b,c,d", "--question-sets", "s1,s2,s3,s4",
                "--participants", "8", "--out", str(tmp_path / "d.csv")]) == 0
    assert len((tmp_path / "d.csv").read_text().splitlines()) == 33


def test_validate(tmp_path):
    assert run(["validate", "--geometry", G, "--data", D, "--cities", C]) == 0
    bad = tmp_path / "t.csv"
    bad.write_text("participant_id,technique,question,question_set,correct,time_ms\n"
                   "p1,a,Q,S,1,0\n")
    assert run(["validate", "--trials", str(bad)]) == 1


def test_from_meta_replays(tmp_path):
    out = tmp_path / "p.svg"
    assert run(["popchart", "--variant", "heatmap", "--resolution", "64", "--geometry", G,
                "--data", D, "--cities", C, "--out", str(out)]) == 0
    first = out.read_bytes()
    out.unlink()
    assert run(["--from-meta", str(tmp_path / "p.svg.meta.json")]) == 0
    assert out.read_bytes() == first


def test_module_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "bivmaps", "design", "--techniques", "a,b",
                           "--question-sets", "s1,s2", "--participants", "2",
                           "--out", str(tmp_path / "d.csv")], capture_output=True)
    assert proc.returncode == 0, proc.stderr
    proc = subprocess.run([sys.executable, "-m", "bivmaps", "frobnicate"],
                          capture_output=True)
    assert proc.returncode == 1


@pytest.mark.parametrize("technique", TECHNIQUES)
def test_every_technique_renders(technique, tmp_path):
    assert run(["render", "--technique", technique, "--geometry", G, "--data", D,
                "--out", str(tmp_path / "m.svg"), "--diagnostics"]) == 0


@pytest.mark.parametrize("variant", VARIANTS)
def test_every_variant_renders(variant, tmp_path):
    assert run(["popchart", "--variant", variant, "--resolution", "64", "--geometry", G,
                "--data", D, "--cities", C, "--out", str(tmp_path / "m.svg")]) == 0
