import json
import os

import pytest

from core.result_store import dumps_json, fmt, load_json, render_csv, write_csv, write_json, write_text


class TestFormatting:
    def test_floats_read_back_exactly(self):
        assert fmt(0.1) == "0.10000000000000001"
        for value in (1e-300, 2.0 / 3.0, 7.5989, -816.65):
            assert float(fmt(value)) == value

    def test_non_floats(self):
        assert fmt(3) == "3"
        assert fmt("failed:StiffnessError") == "failed:StiffnessError"

    def test_csv_comments_precede_header(self):
        text = render_csv(["a", "b"], [(1, 0.5)], [("config_hash", "abc")])
        assert text == "# config_hash=abc\na,b\n1,0.5\n"

    def test_json_is_sorted_and_indented(self):
        assert dumps_json({"b": 1, "a": 2}) == '{\n  "a": 2,\n  "b": 1\n}\n'


class TestAtomicWrite:
    def test_writes_and_creates_directories(self, tmp_path):
        path = tmp_path / "nested" / "out.csv"
        write_csv(str(path), ["x"], [(1.5,)])
        assert path.read_text() == "x\n1.5\n"

    def test_replaces_existing_file(self, tmp_path):
        path = tmp_path / "out.txt"
        path.write_text("old")
        write_text(str(path), "new")
        assert path.read_text() == "new"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_failed_replace_leaves_no_temp_file(self, tmp_path, monkeypatch):
        path = tmp_path / "out.txt"
        path.write_text("old")

        def refuse(src, dst):
            raise OSError("disk full")

        monkeypatch.setattr(os, "replace", refuse)
        with pytest.raises(OSError, match="disk full"):
            write_text(str(path), "new")
        assert path.read_text() == "old"
        assert os.listdir(tmp_path) == ["out.txt"]

    def test_json_round_trip(self, tmp_path):
        path = str(tmp_path / "result.json")
        write_json(path, {"worst_error": 1.25e-4, "results": {"00": {"error": 0.0}}})
        assert load_json(path) == {"worst_error": 1.25e-4, "results": {"00": {"error": 0.0}}}
        with open(path) as f:
            assert json.load(f)["worst_error"] == 1.25e-4
