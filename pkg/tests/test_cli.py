from __future__ import annotations

import json
import warnings

import pytest

from socnav_eval.cli import main
from socnav_eval.dataset import load_dataset, load_survey
from socnav_eval.synth import corpus_specs, spec_to_dict


def _run(argv):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return main(argv)


def test_requires_subcommand(capsys):
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2
    assert "command" in capsys.readouterr().err


def test_synth_corpus_with_survey(tmp_path, capsys):
    out = tmp_path / "data"
    assert _run(["synth", "--corpus", "--with-survey", "--out", str(out)]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert len(lines) == 25  # 24 runs + survey.csv
    records = load_dataset(out)
    assert len(records) == 24
    survey = load_survey(out / "survey.csv")
    assert len(survey) == 24


def test_synth_flag_validation(tmp_path, capsys):
    assert main(["synth", "--out", str(tmp_path)]) == 2
    assert "exactly one" in capsys.readouterr().err
    assert main(["synth", "--corpus", "--spec", "x.json", "--out", str(tmp_path)]) == 2
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps([spec_to_dict(corpus_specs()[0])]))
    assert main(["synth", "--spec", str(spec_file), "--with-survey",
                 "--out", str(tmp_path / "d")]) == 2
    assert "--corpus" in capsys.readouterr().err


def test_synth_from_spec_file(tmp_path, capsys):
    spec_file = tmp_path / "specs.json"
    spec_file.write_text(json.dumps([spec_to_dict(s) for s in corpus_specs()[:2]]))
    out = tmp_path / "data"
    assert _run(["synth", "--spec", str(spec_file), "--out", str(out)]) == 0
    capsys.readouterr()
    assert len(load_dataset(out)) == 2


def test_metrics_subcommand_writes_one_file(tmp_path, corpus_dir, capsys):
    out = tmp_path / "out"
    code = _run(["metrics", "--data", str(corpus_dir), "--qm-only",
                 "--out", str(out)])
    assert code == 0
    assert "metrics_raw.csv" in capsys.readouterr().out
    assert (out / "metrics_raw.csv").exists()
    assert not (out / "metrics_norm.csv").exists()


def test_report_subcommand_writes_tables_and_figures(tmp_path, corpus_dir, capsys):
    out = tmp_path / "out"
    code = _run(["report", "--data", str(corpus_dir),
                 "--survey", str(corpus_dir / "survey.csv"),
                 "--k", "2", "--restarts", "2", "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    names = {p.name for p in out.iterdir()}
    assert {"aggregates.csv", "trend_report.csv", "correlations.csv",
            "heatmap.csv", "subset_results.csv", "cumulative_ari.csv",
            "aggregate_scores.svg", "correlation_heatmap.svg",
            "cumulative_ari.svg"} <= names
    assert "metrics_raw.csv" not in names
    assert "run_manifest.json" not in names


def test_pipeline_subcommand_with_config(tmp_path, corpus_dir, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(
        f"[dataset]\ndir = {corpus_dir}\nsurvey = {corpus_dir / 'survey.csv'}\n"
        "\n[cluster]\nsearch_k = 2\nrestarts = 2\n")
    out = tmp_path / "out"
    assert _run(["pipeline", "--config", str(ini), "--out", str(out)]) == 0
    capsys.readouterr()
    manifest = json.loads((out / "run_manifest.json").read_text())
    assert manifest["config"]["restarts"] == 2
    assert manifest["config"]["search_ks"] == [2]


def test_cli_overrides_beat_config(tmp_path, corpus_dir, capsys):
    ini = tmp_path / "run.ini"
    ini.write_text(f"[dataset]\ndir = {tmp_path / 'wrong'}\n\n[cluster]\nseed = 5\n")
    out = tmp_path / "out"
    code = _run(["metrics", "--config", str(ini), "--data", str(corpus_dir),
                 "--qm-only", "--out", str(out)])
    assert code == 0
    capsys.readouterr()
    assert (out / "metrics_raw.csv").exists()


def test_stage_error_exits_one(tmp_path, capsys):
    code = main(["pipeline", "--data", str(tmp_path / "missing"), "--qm-only",
                 "--out", str(tmp_path / "out")])
    assert code == 1
    err = capsys.readouterr().err
    assert err.startswith("error:")
    assert "load" in err


def test_convert_missing_source_exits_one(tmp_path, capsys):
    code = main(["convert", "--src", str(tmp_path / "nope"),
                 "--out", str(tmp_path / "out")])
    assert code == 1
    assert "error:" in capsys.readouterr().err


def test_bad_norm_choice_is_usage_error(tmp_path, capsys):
    with pytest.raises(SystemExit) as exc:
        main(["metrics", "--norm", "zscore", "--out", str(tmp_path)])
    assert exc.value.code == 2
