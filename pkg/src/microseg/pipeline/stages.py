"""One function per pipeline stage; stages talk only through files in the output directory."""
from __future__ import annotations

import dataclasses
import json
import logging
from pathlib import Path

import numpy as np

from ..kinematics import (
    ROLE_OF_CLASS,
    action_stats,
    build_feature_vector,
    differentiate,
    read_feature_csv,
    relative_features,
    write_feature_csv,
)
from ..labels import ASPECTS, SKILL_NAMES
from ..postprocess import ActionGrammar, default_grammar, postprocess, segment_metrics
from ..segmenter import load_checkpoint, save_checkpoint, segment_video, train
from ..segmenter.synthetic import action_clip_dataset
from ..skill import GBCModel, discretize, evaluate, gbc_fit, gbc_predict, summary_report
from ..timeline import ActionTimeline
from ..tips import TipTrajectory, load_references, localize_tip, read_silhouettes, write_silhouettes
from ..tracking import (
    iou,
    read_detections,
    read_ground_truth,
    read_tracks,
    run_tracker,
    score_against,
    write_detections,
    write_ground_truth,
    write_tracks,
)
from .config import PipelineConfig, stage_rng
from .synth import make_cohort, make_demo

log = logging.getLogger(__name__)

# file names inside the output directory
FRAMES = "frames.npy"
GT_TIMELINE = "gt_timeline.csv"
DETECTIONS = "detections.jsonl"
GT_BOXES = "gt_boxes.jsonl"
SILHOUETTES = "silhouettes.jsonl"
GT_TIPS = "gt_tips.csv"
COHORT = "cohort"
SCORES = "cohort/scores.json"
CHECKPOINT = "segmenter.json"
RAW_TIMELINE = "pred_timeline_raw.csv"
TIMELINE = "pred_timeline.csv"
TRACKS = "tracks.jsonl"
TIPS = "tips.csv"
FEATURES = "features.csv"
MODELS = "models"
ASSESSMENT = "assessment.json"
REPORTS = "reports"


class MissingInput(FileNotFoundError):
    pass


def _need(out: Path, name: str, stage: str) -> Path:
    p = out / name
    if not p.exists():
        raise MissingInput(f"{p} is missing; run the '{stage}' stage first")
    return p


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n")


def run_synth(cfg: PipelineConfig, out: Path) -> None:
    out.mkdir(parents=True, exist_ok=True)
    rng = stage_rng(cfg.seed, "synth")
    gaps = [[tuple(g) for g in obj] for obj in cfg.synth.gaps]
    demo = make_demo(rng, cfg.synth.demo_skill, tuple(cfg.synth.frame_hw), cfg.fps,
                     cfg.noise_model(), gaps)
    np.save(out / FRAMES, demo.frames)
    demo.procedure.timeline.to_csv(out / GT_TIMELINE)
    write_detections(out / DETECTIONS, demo.scenario.detections())
    write_ground_truth(out / GT_BOXES, demo.scenario)
    write_silhouettes(out / SILHOUETTES, demo.silhouettes())
    demo.procedure.tip_trajectory().to_csv(out / GT_TIPS)

    (out / COHORT).mkdir(exist_ok=True)
    cohort = make_cohort(cfg.synth.cohort_size, rng, cfg.fps)
    scores = {}
    for p in cohort:
        p.timeline.to_csv(out / COHORT / f"{p.procedure_id}_timeline.csv")
        p.tip_trajectory().to_csv(out / COHORT / f"{p.procedure_id}_tips.csv")
        scores[p.procedure_id] = p.scores
    _write_json(out / SCORES, scores)


def run_segment(cfg: PipelineConfig, out: Path) -> None:
    frames = np.load(_need(out, FRAMES, "synth"))
    sc = cfg.segmenter
    if frames.shape[1:3] != (sc.frame_H, sc.frame_W):
        raise ValueError(f"frames are {frames.shape[1:3]}, segmenter expects {(sc.frame_H, sc.frame_W)}")
    if cfg.segment.checkpoint:
        sc, W = load_checkpoint(cfg.segment.checkpoint)
    else:
        rng = stage_rng(cfg.seed, "segment")
        clips, labels = action_clip_dataset(cfg.segment.train_clips, sc.frames_T, sc.frame_H, sc.frame_W,
                                            sc.num_classes, seed=int(rng.integers(2**31)))
        schedule = dataclasses.replace(cfg.training, seed=int(rng.integers(2**31)))
        W, _ = train(clips, labels, sc, schedule)
        save_checkpoint(out / CHECKPOINT, sc, W)
    raw = segment_video(frames, sc, W, cfg.segment.batch_size)
    raw = ActionTimeline(raw.labels, cfg.fps)
    raw.to_csv(out / RAW_TIMELINE)
    grammar = ActionGrammar.load(cfg.segment.grammar) if cfg.segment.grammar else default_grammar()
    postprocess(raw, grammar, cfg.segment.min_len).to_csv(out / TIMELINE)


def assign_silhouettes(tracks, silhouettes, min_iou: float = 0.3):
    """Pair each track output with the silhouette whose box overlaps it most (greedy, per frame)."""
    by_frame: dict[int, list] = {}
    for frame, _, sil in silhouettes:
        h, w = sil.mask.shape
        by_frame.setdefault(frame, []).append((sil, (sil.origin[0], sil.origin[1], w, h)))
    pairs = []
    outs_by_frame: dict[int, list] = {}
    for o in tracks:
        outs_by_frame.setdefault(o.frame, []).append(o)
    for frame in sorted(outs_by_frame):
        cands = sorted(
            ((-iou(o.bbox, box), o.track_id, i) for o in outs_by_frame[frame]
             for i, (_, box) in enumerate(by_frame.get(frame, []))),
        )
        used_t, used_s = set(), set()
        lookup = {o.track_id: o for o in outs_by_frame[frame]}
        for neg, tid, i in cands:
            if -neg < min_iou or tid in used_t or i in used_s:
                continue
            used_t.add(tid)
            used_s.add(i)
            pairs.append((lookup[tid], by_frame[frame][i][0]))
    return pairs


def run_track(cfg: PipelineConfig, out: Path) -> None:
    dets = read_detections(_need(out, DETECTIONS, "synth"))
    frames = np.load(_need(out, FRAMES, "synth"), mmap_mode="r")
    tracks = run_tracker(dets, cfg.tracking, frames=range(len(frames)))
    write_tracks(out / TRACKS, tracks)
    refs = load_references()
    traj = TipTrajectory()
    for o, sil in assign_silhouettes(tracks, read_silhouettes(_need(out, SILHOUETTES, "synth"))):
        if o.class_id in refs:
            traj.add(o.frame, o.track_id, localize_tip(sil, refs[o.class_id]), o.class_id)
    traj.to_csv(out / TIPS)


def role_series(traj: TipTrajectory, fps: float) -> dict:
    """Kinematics per instrument role, using the longest track of each role."""
    best: dict[str, tuple] = {}
    for tid in traj.track_ids():
        role = ROLE_OF_CLASS.get(traj.track_class(tid))
        if role is None:
            continue
        frames, xy = traj.track(tid)
        if role not in best or len(frames) > len(best[role][0]):
            best[role] = (frames, xy)
    return best


def procedure_features(traj: TipTrajectory, timeline: ActionTimeline):
    paths = role_series(traj, timeline.fps)
    kin = {role: differentiate(f, xy, timeline.fps) for role, (f, xy) in paths.items()}
    rel = None
    if "driver" in paths and "scissors" in paths:
        rel = relative_features(*paths["driver"], *paths["scissors"], timeline.fps)
    stats = action_stats(timeline)
    return [build_feature_vector(kin, rel, stats, timeline, a) for a in ASPECTS]


def run_features(cfg: PipelineConfig, out: Path) -> None:
    rows = []
    scores = json.loads(_need(out, SCORES, "synth").read_text())
    for pid in sorted(scores):
        tl = ActionTimeline.from_csv(out / COHORT / f"{pid}_timeline.csv", cfg.fps)
        traj = TipTrajectory.from_csv(out / COHORT / f"{pid}_tips.csv")
        rows += [(pid, v) for v in procedure_features(traj, tl)]
    timeline = ActionTimeline.from_csv(_need(out, TIMELINE, "segment"), cfg.fps)
    traj = TipTrajectory.from_csv(_need(out, TIPS, "track"))
    rows += [("demo", v) for v in procedure_features(traj, timeline)]
    write_feature_csv(out / FEATURES, rows)


def _aspect_dataset(out: Path, aspect: str):
    scores = json.loads(_need(out, SCORES, "synth").read_text())
    rows = [(pid, v) for pid, v in read_feature_csv(_need(out, FEATURES, "features")) if v.aspect == aspect]
    cohort = [(pid, v) for pid, v in rows if pid in scores]
    X = np.array([v.values for _, v in cohort])
    y = np.array([int(discretize(scores[pid][aspect])) for pid, _ in cohort])
    demo = [v for pid, v in rows if pid == "demo"]
    return X, y, demo[0] if demo else None


def run_assess(cfg: PipelineConfig, out: Path) -> None:
    (out / MODELS).mkdir(exist_ok=True)
    p = cfg.classifier
    result = {}
    for aspect in ASPECTS:
        X, y, demo = _aspect_dataset(out, aspect)
        model = gbc_fit(X, y, p.default_rounds, p.learning_rate, p.default_depth, p.min_samples,
                        seed=cfg.seed, schema=demo.schema if demo else None)
        model.save(out / MODELS / f"{aspect}.json")
        if demo is not None:
            probs, label = gbc_predict(GBCModel.load(out / MODELS / f"{aspect}.json"), demo.values, demo.schema)
            result[aspect] = {"level": SKILL_NAMES[label],
                              "probabilities": dict(zip(SKILL_NAMES, map(float, probs)))}
    _write_json(out / ASSESSMENT, {"procedure_id": "demo", "aspects": result})


def _tip_errors(gt: TipTrajectory, pred: TipTrajectory) -> dict:
    """Distance from each predicted tip to the nearest ground-truth tip of the same frame."""
    gt_pts: dict[int, list] = {}
    for tid in gt.track_ids():
        for f, p in zip(*gt.track(tid)):
            gt_pts.setdefault(int(f), []).append(p)
    errs = []
    for tid in pred.track_ids():
        for f, p in zip(*pred.track(tid)):
            if int(f) in gt_pts:
                errs.append(min(np.hypot(*(p - q)) for q in gt_pts[int(f)]))
    errs = np.asarray(errs)
    if errs.size == 0:
        return {"n": 0}
    return {"n": int(errs.size), "mean_px": float(errs.mean()), "max_px": float(errs.max()),
            "within_2px": float(np.mean(errs <= 2.0))}


def run_evaluate(cfg: PipelineConfig, out: Path) -> None:
    rep = out / REPORTS
    rep.mkdir(exist_ok=True)
    gt = ActionTimeline.from_csv(_need(out, GT_TIMELINE, "synth"), cfg.fps)
    seg = {}
    for name, fname in (("raw", RAW_TIMELINE), ("postprocessed", TIMELINE)):
        pred = ActionTimeline.from_csv(_need(out, fname, "segment"), cfg.fps)
        seg[name] = segment_metrics(pred, gt)
    _write_json(rep / "segmentation.json", seg)

    boxes, hidden = read_ground_truth(_need(out, GT_BOXES, "synth"))
    score = score_against(read_tracks(_need(out, TRACKS, "track")), boxes, hidden)
    _write_json(rep / "tracking.json", {
        "label_errors": score.label_errors, "label_error_rate": score.label_error_rate,
        "matched_outputs": score.matched_outputs, "id_switches": score.id_switches,
        "missed": score.missed, "fragmentation": {str(k): v for k, v in score.fragmentation.items()},
    })
    _write_json(rep / "tips.json", _tip_errors(TipTrajectory.from_csv(_need(out, GT_TIPS, "synth")),
                                                TipTrajectory.from_csv(_need(out, TIPS, "track"))))

    reports = []
    for aspect in ASPECTS:
        X, y, _ = _aspect_dataset(out, aspect)
        reports.append(evaluate(X, y, cfg.classifier, aspect))
    _write_json(rep / "classifier.json", summary_report(reports))


STAGE_FUNCS = {
    "synth": run_synth,
    "segment": run_segment,
    "track": run_track,
    "features": run_features,
    "assess": run_assess,
    "evaluate": run_evaluate,
}

