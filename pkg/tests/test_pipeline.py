import json

import numpy as np
import pytest

from microseg.cli import main
from microseg.pipeline import config_from_dict, demo_config_path, load_config, stage_rng
from microseg.pipeline.synth import action_script, make_cohort, make_demo
from microseg.postprocess import default_grammar
from microseg.timeline import ActionTimeline

FAST = {
    "seed": 3,
    "synth": {"cohort_size": 15, "gaps": [[[40, 60]], []]},
    "segmenter": {"frames_T": 4, "embed_d": 8, "num_heads": 2},
    "training": {"epochs": 1},
    "segment": {"train_clips": 28},
    "classifier": {"folds": 2, "rounds_grid": [3], "depth_grid": [1], "default_rounds": 3,
                   "default_depth": 1},
}


@pytest.fixture
def fast_config(tmp_path):
    p = tmp_path / "fast.json"
    p.write_text(json.dumps(FAST))
    return p


def test_demo_config_loads():
    cfg = load_config(demo_config_path())
    assert cfg.seed == 7 and cfg.segmenter.frame_H == 8
    assert cfg.classifier.rounds_grid == (50, 100, 200)


def test_sections_override_only_given_fields():
    cfg = config_from_dict({"segmenter": {"frames_T": 4}, "classifier": {"folds": 3}})
    assert (cfg.segmenter.frame_H, cfg.segmenter.embed_d) == (8, 32)
    assert cfg.segmenter.local_windows == [2, 1]
    assert cfg.classifier.folds == 3 and cfg.classifier.test_size == 0.2


def test_config_errors(tmp_path):
    with pytest.raises(ValueError, match="unknown keys"):
        config_from_dict({"training": {"epoch": 3}})
    with pytest.raises(ValueError, match="top-level"):
        config_from_dict({"trainng": {}})
    with pytest.raises(ValueError):
        config_from_dict({"fps": 0})
    with pytest.raises(ValueError, match="segmenter"):
        config_from_dict({"segmenter": {"frame_H": 9}})
    bad = tmp_path / "bad.toml"
    bad.write_text("seed = = 1\n")
    with pytest.raises(ValueError):
        load_config(bad)
    with pytest.raises(FileNotFoundError):
        load_config(tmp_path / "none.toml")


def test_stage_generators_are_independent_and_seeded():
    a = stage_rng(1, "synth").random(3)
    assert np.array_equal(a, stage_rng(1, "synth").random(3))
    assert not np.array_equal(a, stage_rng(1, "segment").random(3))
    assert not np.array_equal(a, stage_rng(2, "synth").random(3))


@pytest.mark.parametrize("skill", [0.0, 0.5, 1.0])
def test_action_scripts_obey_grammar(skill):
    t = ActionTimeline(action_script(skill, np.random.default_rng(0)))
    assert default_grammar().violations(t) == []
    assert min(s.length for s in t.segments()) >= 6


def test_synthetic_data_is_seeded():
    a = make_cohort(4, np.random.default_rng(5))
    b = make_cohort(4, np.random.default_rng(5))
    assert [p.scores for p in a] == [p.scores for p in b]
    assert all(np.array_equal(p.tips["driver"], q.tips["driver"]) for p, q in zip(a, b))
    demo = make_demo(np.random.default_rng(1))
    assert len(demo.frames) == len(demo.procedure.timeline)


def test_cli_reports_missing_stage_input(tmp_path, fast_config, capsys):
    (tmp_path / "out").mkdir()
    code = main(["track", "--config", str(fast_config), "--out", str(tmp_path / "out")])
    assert code == 2
    err = capsys.readouterr().err
    assert "microseg: error:" in err and "'synth'" in err


def test_cli_rejects_unknown_command():
    with pytest.raises(SystemExit):
        main(["dance"])


@pytest.mark.slow
def test_full_pipeline_is_byte_identical(tmp_path, fast_config, capsys):
    outs = []
    for run in ("a", "b"):
        out = tmp_path / run
        assert main(["all", "--config", str(fast_config), "--out", str(out)]) == 0
        outs.append(out)
    files = sorted(p.relative_to(outs[0]) for p in outs[0].rglob("*") if p.is_file())
    assert (outs[0] / "reports" / "classifier.json").exists()
    assert (outs[0] / "assessment.json").exists()
    for rel in files:
        assert (outs[0] / rel).read_bytes() == (outs[1] / rel).read_bytes(), rel
    report = json.loads((outs[0] / "reports" / "tracking.json").read_text())
    assert report  # non-empty
    assert "evaluate: ok" in capsys.readouterr().out


def test_seed_override_changes_output(tmp_path, fast_config):
    main(["synth", "--config", str(fast_config), "--out", str(tmp_path / "a")])
    main(["synth", "--config", str(fast_config), "--seed", "4", "--out", str(tmp_path / "b")])
    assert (tmp_path / "a" / "gt_timeline.csv").read_bytes() != (tmp_path / "b" / "gt_timeline.csv").read_bytes()
