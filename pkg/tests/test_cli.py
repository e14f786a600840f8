import json

import pytest

from hybridcad.cad_json import serialize_document
from hybridcad.cli import CONFIG_ENV, main
from hybridcad.shapes import (cube_document, open_patch_document, synthetic_corpus,
                              washer_document)


def write(path, doc):
    path.write_bytes(serialize_document(doc) if not isinstance(doc, bytes) else doc)
    return path


def lines(out):
    return [json.loads(l) for l in out.strip().splitlines()]


@pytest.fixture
def cube_file(tmp_path):
    return write(tmp_path / "cube.json", cube_document())


# --- validate -----------------------------------------------------------------

def test_validate_reports_ir(tmp_path, capsys):
    for i in range(3):
        write(tmp_path / f"ok{i}.json", cube_document(1.0 + i))
    write(tmp_path / "bad.json", b'{"faces": [{"type": "nurbs"}]}')
    assert main(["validate", str(tmp_path)]) == 1
    out = lines(capsys.readouterr().out)
    assert out[-1] == {"summary": {"total": 4, "invalid": 1, "ir": 0.25}}
    bad = [o for o in out[:-1] if not o["valid"]]
    assert len(bad) == 1 and bad[0]["file"].endswith("bad.json")
    assert bad[0]["violations"][0]["face"] == 0


def test_validate_all_valid_and_missing(tmp_path, cube_file, capsys):
    assert main(["validate", str(cube_file)]) == 0
    assert main(["validate", str(tmp_path / "nope.json")]) == 2


# --- tessellate / sample ------------------------------------------------------

def test_tessellate_obj_and_stl(tmp_path, cube_file, capsys):
    obj = tmp_path / "cube.obj"
    assert main(["tessellate", str(cube_file), "-o", str(obj)]) == 0
    faces = [l for l in obj.read_text().splitlines() if l.startswith("f ")]
    assert len(faces) == 12
    stl = tmp_path / "cube.stl"
    assert main(["tessellate", str(cube_file), "--format", "stl", "-o", str(stl)]) == 0
    assert stl.stat().st_size == 684
    assert lines(capsys.readouterr().out)[-1]["triangles"] == 12


def test_tessellate_invalid_document(tmp_path, capsys):
    bad = write(tmp_path / "bad.json", b"{")
    assert main(["tessellate", str(bad)]) == 1
    assert lines(capsys.readouterr().out)[0]["valid"] is False


def test_sample_is_seeded(tmp_path, cube_file, capsys):
    a, b = tmp_path / "a.xyz", tmp_path / "b.xyz"
    assert main(["sample", str(cube_file), "--points", "100", "--seed", "4", "-o", str(a)]) == 0
    assert main(["sample", str(cube_file), "--points", "100", "--seed", "4", "-o", str(b)]) == 0
    assert a.read_bytes() == b.read_bytes()
    assert len(a.read_text().splitlines()) == 100


# --- metrics ------------------------------------------------------------------

def test_metrics_identical_directories(tmp_path, capsys, caplog):
    gen, ref = tmp_path / "gen", tmp_path / "ref"
    gen.mkdir(), ref.mkdir()
    for name, doc in (("a", cube_document()), ("b", washer_document())):
        write(gen / f"{name}.json", doc)
        write(ref / f"{name}.json", doc)
    write(gen / "extra.json", cube_document())
    assert main(["metrics", str(gen), str(ref), "--points", "256"]) == 0
    out = lines(capsys.readouterr().out)[0]
    assert {k: out[k] for k in ("cd", "hd", "jsd", "mmd", "ir")} == dict.fromkeys(
        ("cd", "hd", "jsd", "mmd", "ir"), 0.0)
    assert out["n"] == 256 and out["pairs"] == 2
    assert "unpaired generated file 'extra'" in caplog.text


def test_metrics_pairs_manifest(tmp_path, capsys):
    gen, ref = tmp_path / "gen", tmp_path / "ref"
    gen.mkdir(), ref.mkdir()
    write(gen / "x.json", cube_document())
    write(ref / "y.json", cube_document())
    manifest = tmp_path / "pairs.json"
    manifest.write_text(json.dumps([["x.json", "y.json"]]))
    assert main(["metrics", str(gen), str(ref), "--pairs", str(manifest), "--points", "64"]) == 0
    assert lines(capsys.readouterr().out)[0]["cd"] == 0.0


# --- metadata -----------------------------------------------------------------

def test_metadata_washer_and_open_patch(tmp_path, capsys):
    assert main(["metadata", str(write(tmp_path / "w.json", washer_document()))]) == 0
    meta = lines(capsys.readouterr().out)[0]
    assert meta["through_holes"] == 1 and meta["watertight"] is True
    assert main(["metadata", str(write(tmp_path / "p.json", open_patch_document()))]) == 0
    meta = lines(capsys.readouterr().out)[0]
    assert meta["watertight"] is False and meta["volume"] is None


# --- curate -------------------------------------------------------------------

@pytest.fixture(scope="module")
def corpus_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("corpus")
    for pid, doc in synthetic_corpus(100, 1).items():
        write(d / f"{pid}.json", doc)
    return d


def test_curate_is_reproducible(corpus_dir, tmp_path):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    assert main(["curate", str(corpus_dir), "--target", "20", "-o", str(a)]) == 0
    assert main(["curate", str(corpus_dir), "--target", "20", "-o", str(b),
                 "--stats-in", f"{a}.stats.json"]) == 0
    assert a.read_bytes() == b.read_bytes()
    entries = [json.loads(l) for l in a.read_text().splitlines()]
    assert len(entries) == 100 and sum(e["selected"] for e in entries) == 20
    stats = json.loads((tmp_path / "a.jsonl.stats.json").read_text())
    assert set(stats) == {"token_count", "through_holes", "area_volume_ratio", "bbox_diag"}


def test_curate_target_too_large(corpus_dir, tmp_path):
    assert main(["curate", str(corpus_dir), "--target", "101", "-o", str(tmp_path / "m")]) == 1


def test_curate_bad_ratios(corpus_dir):
    assert main(["curate", str(corpus_dir), "--target", "5", "--ratios", "0.5,0.5,0.5"]) == 1


# --- roundtrip ----------------------------------------------------------------

def test_roundtrip_canonical_and_rounding(tmp_path, cube_file, capsys):
    canon = tmp_path / "canon.json"
    assert main(["roundtrip", str(cube_file), "-o", str(canon)]) == 0
    assert canon.read_bytes() == cube_file.read_bytes()
    assert lines(capsys.readouterr().out)[0]["changes"] == []

    face = {"type": "nurbs", "u_degree": 1, "v_degree": 1, "u_knots": [0, 1], "u_mults": [2, 2],
            "v_knots": [0, 1], "v_mults": [2, 2],
            "poles": [[[0.12345678, 0, 0], [0, 1, 0]], [[1, 0, 0], [1, 1, 0]]]}
    raw = write(tmp_path / "raw.json", json.dumps({"faces": [face]}).encode())
    assert main(["roundtrip", str(raw), "-o", str(tmp_path / "out.json")]) == 0
    changes = lines(capsys.readouterr().out)[0]["changes"]
    assert "faces[0].poles[0][0][0]: 0.12345678 -> 0.123457" in changes


def test_roundtrip_malformed(tmp_path, capsys):
    assert main(["roundtrip", str(write(tmp_path / "b.json", b"[]"))]) == 1


# --- configuration ------------------------------------------------------------

def points_used(argv, capsys):
    assert main(argv) == 0
    return lines(capsys.readouterr().out)[-1]["points"]


def test_config_precedence(tmp_path, cube_file, capsys, monkeypatch):
    env_cfg = tmp_path / "env.json"
    env_cfg.write_text(json.dumps({"n_points": 30}))
    file_cfg = tmp_path / "file.json"
    file_cfg.write_text(json.dumps({"n_points": 20, "unknown": 1}))
    out = str(tmp_path / "p.xyz")
    base = ["sample", str(cube_file), "-o", out]

    monkeypatch.delenv(CONFIG_ENV, raising=False)
    assert points_used(base, capsys) == 8192
    monkeypatch.setenv(CONFIG_ENV, str(env_cfg))
    assert points_used(base, capsys) == 30
    assert points_used(base + ["--config", str(file_cfg)], capsys) == 20
    assert points_used(base + ["--config", str(file_cfg), "--points", "10"], capsys) == 10


def test_bad_config(tmp_path, cube_file):
    cfg = tmp_path / "c.json"
    cfg.write_text("[1]")
    assert main(["sample", str(cube_file), "--config", str(cfg)]) == 1
    assert main(["sample", str(cube_file), "--config", str(tmp_path / "missing.json")]) == 2
    assert main(["sample", str(cube_file), "--points", "0"]) == 1
