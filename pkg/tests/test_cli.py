import json

from click.testing import CliRunner

from conftest import make_table
from oracles import SCENARIO
from vocatree.cli import main


def write_cards(path):
    lines = ["segment_id,accuracy,sensitivity,specificity"]
    lines += [f"{s},{a},{se},{sp}" for s, a, se, sp in SCENARIO]
    path.write_text("\n".join(lines) + "\n")


class TestCli:
    def test_help_shows_defaults(self):
        out = CliRunner().invoke(main, ["run", "--help"]).output
        assert "n_repetitions 50" in out and "top_n 20" in out
        assert "VOCATREE_THREADS" in CliRunner().invoke(main, ["--help"]).output

    def test_fuse_sim(self, tmp_path):
        write_cards(tmp_path / "c.csv")
        (tmp_path / "p.csv").write_text("subject_id,segment_id,prediction\nA,1,1\nA,2,1\nB,1,-1\nB,2,-1\n")
        r = CliRunner().invoke(main, ["fuse-sim", "--predictions", str(tmp_path / "p.csv"), "--cards",
                                      str(tmp_path / "c.csv"), "--strategy", "sens_spec_tree", "--traces",
                                      str(tmp_path / "t.json")])
        assert r.exit_code == 0, r.output
        assert r.output.splitlines() == ["subject_id,label", "A,1", "B,-1"]
        assert len(json.loads((tmp_path / "t.json").read_text())) == 2

    def test_fuse_sim_schema_error(self, tmp_path):
        write_cards(tmp_path / "c.csv")
        (tmp_path / "p.csv").write_text("subject_id,segment_id,prediction\nA,17,1\n")
        r = CliRunner().invoke(main, ["fuse-sim", "--predictions", str(tmp_path / "p.csv"), "--cards",
                                      str(tmp_path / "c.csv")])
        assert r.exit_code == 1 and "no card" in r.output

    def test_export_tree(self, tmp_path):
        write_cards(tmp_path / "c.csv")
        r = CliRunner().invoke(main, ["export-tree", "--cards", str(tmp_path / "c.csv"), "--strategy",
                                      "accuracy_tree", "--out", str(tmp_path / "t.dot")])
        assert r.exit_code == 0
        assert (tmp_path / "t.dot").read_text().startswith("digraph accuracy_tree")

    def test_run_config_error_exit_2(self, tmp_path):
        make_table().to_csv(tmp_path / "f.csv")
        (tmp_path / "cfg.json").write_text(json.dumps({"group": "female", "n_folds": 9}))
        r = CliRunner().invoke(main, ["run", "--features", str(tmp_path / "f.csv"), "--config",
                                      str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")])
        assert r.exit_code == 2
        (tmp_path / "cfg.json").write_text(json.dumps({"bogus": 1}))
        r = CliRunner().invoke(main, ["run", "--features", str(tmp_path / "f.csv"), "--config",
                                      str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")])
        assert r.exit_code == 2

    def test_run_outputs(self, tmp_path):
        make_table().to_csv(tmp_path / "f.csv")
        (tmp_path / "cfg.json").write_text(json.dumps({"n_repetitions": 1, "classifier": "svm"}))
        r = CliRunner().invoke(main, ["run", "--features", str(tmp_path / "f.csv"), "--config",
                                      str(tmp_path / "cfg.json"), "--out", str(tmp_path / "o")])
        assert r.exit_code == 0, r.output
        names = sorted(p.name for p in (tmp_path / "o").iterdir())
        assert names == ["fusion.csv", "paradigm.csv", "per_segment.csv", "report.json", "report.md",
                         "run_log.json"]

    def test_synth_and_extract(self, tmp_path):
        spec = {"n_healthy": 1, "n_depressed": 1, "n_male_healthy": 1, "n_male_depressed": 1,
                "n_female_healthy": 0, "n_female_depressed": 0, "preset": "strong"}
        (tmp_path / "s.json").write_text(json.dumps(spec))
        r = CliRunner().invoke(main, ["synth", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "c")])
        assert r.exit_code == 0, r.output
        assert len(list((tmp_path / "c" / "wavs").iterdir())) == 58
        r = CliRunner().invoke(main, ["extract", "--manifest", str(tmp_path / "c" / "manifest.csv"), "--out",
                                      str(tmp_path / "f.csv")])
        assert r.exit_code == 0, r.output
        assert len((tmp_path / "f.csv").read_text().splitlines()) == 59
        assert json.loads((tmp_path / "f.schema.json").read_text())["dimension"] == 113
