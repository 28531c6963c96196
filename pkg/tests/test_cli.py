import json

from src.main import load_document, main


def _config(tmp_path, doc):
    path = tmp_path / "experiment.json"
    path.write_text(json.dumps(doc))
    return str(path)


def test_build_tree(tmp_path):
    out = tmp_path / "out"
    code = main(["build-tree", "--config", _config(tmp_path, {"tree": {"depth": 1}}), "--out", str(out)])
    assert code == 0
    tree = json.loads((out / "tree.json").read_text())
    assert tree["params"]["depth"] == 1
    assert (out / "tree_summary.json").exists()


def test_config_keyed_by_command(tmp_path):
    path = _config(tmp_path, {"build-tree": {"output": "keyed"}, "verify": {"runs": []}})
    assert load_document(path, "build-tree") == {"output": "keyed"}


def test_unknown_key_exits_with_config_code(tmp_path):
    code = main(["build-tree", "--config", _config(tmp_path, {"bogus": 1}), "--out", str(tmp_path / "out")])
    assert code == 2


def test_missing_config_file(tmp_path):
    code = main(["build-tree", "--config", str(tmp_path / "absent.json"), "--out", str(tmp_path / "out")])
    assert code == 2
