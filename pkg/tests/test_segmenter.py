import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from microseg.core import Tensor, cross_entropy, finite_diff_gradient, max_relative_error
from microseg.segmenter import (
    SegmenterConfig,
    TokenSequence,
    TrainSchedule,
    aggregate_temporal,
    forward,
    global_temporal_attention,
    init_weights,
    load_checkpoint,
    local_temporal_attention,
    predict_logits,
    save_checkpoint,
    segment_video,
    tokenize_clip,
    train,
    trailing_windows,
    variance_weights,
)
from microseg.segmenter.synthetic import moving_patch_dataset, render_action_video
from oracles import two_pass_weights


def tiny_cfg(**kw):
    base = dict(frames_T=2, patch_P=2, frame_H=4, frame_W=4, embed_d=8, num_blocks=1, num_heads=2,
                num_classes=3, dropout=0.0)
    base.update(kw)
    return SegmenterConfig(**base)


def test_config_defaults_and_validation():
    cfg = SegmenterConfig()
    assert cfg.local_windows == [8, 4]
    assert cfg.num_patches == 4
    with pytest.raises(ValueError):
        SegmenterConfig(frame_H=30)
    with pytest.raises(ValueError):
        SegmenterConfig(local_windows=[17])
    with pytest.raises(ValueError):
        SegmenterConfig(embed_d=10, num_heads=4)


@pytest.mark.parametrize("T,P,H,W", [(2, 2, 4, 4), (4, 2, 4, 6), (3, 4, 8, 8)])
def test_token_count(T, P, H, W):
    cfg = tiny_cfg(frames_T=T, patch_P=P, frame_H=H, frame_W=W, local_windows=[1])
    seq = tokenize_clip(np.zeros((T, H, W, 1)), cfg, init_weights(cfg))
    assert seq.tokens.shape == (1, 1 + T * (H * W) // (P * P), cfg.embed_d)


def test_tokens_round_trip():
    rng = np.random.default_rng(0)
    flat = rng.normal(size=(2, 1 + 3 * 4, 5))
    seq = TokenSequence.from_tokens(flat, 3, 4)
    assert np.array_equal(seq.tokens.data, flat)
    with pytest.raises(ValueError):
        TokenSequence.from_tokens(flat, 3, 5)


def test_variance_weights_match_two_pass_reference(rng):
    x = rng.normal(size=(3, 4, 5, 6))
    vw = variance_weights(TokenSequence(Tensor(np.zeros((3, 6))), Tensor(x)))
    assert np.allclose(vw.weights.data, two_pass_weights(x), atol=1e-12, rtol=0)


def test_constant_in_time_gives_uniform_weights(rng):
    frame = rng.normal(size=(1, 1, 5, 4))
    x = np.repeat(frame, 6, axis=1)
    w = variance_weights(TokenSequence(Tensor(np.zeros((1, 4))), Tensor(x))).weights.data
    assert np.array_equal(w, np.full((1, 5), 0.2))


@given(st.integers(0, 3), st.floats(1.1, 5.0))
def test_scaling_deviations_raises_weight(loc, c):
    rng = np.random.default_rng(loc)
    x = rng.normal(size=(1, 4, 4, 3))
    w0 = variance_weights(TokenSequence(Tensor(np.zeros((1, 3))), Tensor(x))).weights.data[0, loc]
    mean = x[:, :, loc].mean(axis=1, keepdims=True)
    y = x.copy()
    y[:, :, loc] = mean + c * (x[:, :, loc] - mean)
    w1 = variance_weights(TokenSequence(Tensor(np.zeros((1, 3))), Tensor(y))).weights.data[0, loc]
    assert w1 > w0


def test_local_attention_leaves_frames_outside_window(rng):
    cfg = tiny_cfg(frames_T=4, local_windows=[2])
    W = init_weights(cfg)
    seq = TokenSequence(Tensor(rng.normal(size=(1, 8))), Tensor(rng.normal(size=(1, 4, 4, 8))))
    out = local_temporal_attention(seq, 2, 3, cfg, W)
    assert np.array_equal(out.patches.data[:, :2], seq.patches.data[:, :2])
    assert not np.allclose(out.patches.data[:, 2:], seq.patches.data[:, 2:])
    with pytest.raises(ValueError):
        local_temporal_attention(seq, 3, 1, cfg, W)


def test_full_window_local_equals_global(rng):
    cfg = tiny_cfg(frames_T=3, local_windows=[3])
    W = init_weights(cfg)
    seq = TokenSequence(Tensor(rng.normal(size=(2, 8))), Tensor(rng.normal(size=(2, 3, 4, 8))))
    a = global_temporal_attention(seq, cfg, W)
    b = local_temporal_attention(seq, 3, 2, cfg, W)
    assert np.allclose(a.patches.data, b.patches.data)


def test_temporal_attention_is_permutation_equivariant(rng):
    cfg = tiny_cfg(frames_T=4)
    W = init_weights(cfg)
    seq = TokenSequence(Tensor(rng.normal(size=(1, 8))), Tensor(rng.normal(size=(1, 4, 4, 8))))
    perm = np.array([2, 0, 3, 1])
    out = global_temporal_attention(seq, cfg, W).patches.data
    permuted = TokenSequence(seq.cls, Tensor(seq.patches.data[:, perm]))
    assert np.allclose(global_temporal_attention(permuted, cfg, W).patches.data, out[:, perm])


def test_aggregate_is_mean_and_checks_shapes(rng):
    a = TokenSequence(Tensor(rng.normal(size=(1, 3))), Tensor(rng.normal(size=(1, 2, 2, 3))))
    b = TokenSequence(Tensor(rng.normal(size=(1, 3))), Tensor(rng.normal(size=(1, 2, 2, 3))))
    m = aggregate_temporal([a, b])
    assert np.allclose(m.patches.data, (a.patches.data + b.patches.data) / 2)
    with pytest.raises(ValueError):
        aggregate_temporal([])
    bad = TokenSequence(b.cls, Tensor(np.zeros((1, 3, 2, 3))))
    with pytest.raises(ValueError):
        aggregate_temporal([a, bad])


def test_forward_shapes_and_purity(rng):
    cfg = tiny_cfg()
    W = init_weights(cfg, seed=3)
    clip = rng.normal(size=(2, 4, 4, 1))
    single = forward(clip, cfg, W).data
    assert single.shape == (3,)
    batch = forward(np.stack([clip, clip]), cfg, W).data
    assert batch.shape == (2, 3)
    assert np.array_equal(forward(clip, cfg, W).data, single)
    assert np.allclose(batch[0], single)
    with pytest.raises(ValueError):
        forward(rng.normal(size=(3, 4, 4, 1)), cfg, W)
    with pytest.raises(ValueError):
        forward(np.full((2, 4, 4, 1), np.nan), cfg, W)


def test_parameter_gradients_on_small_model(rng):
    cfg = tiny_cfg()
    W = init_weights(cfg, seed=1)
    clips = rng.normal(size=(2, 2, 4, 4, 1))
    y = np.array([0, 2])
    for p in W.parameters():
        p.grad = None
    cross_entropy(forward(clips, cfg, W), y).backward()
    for name in ("embed.w", "blocks.0.spatial.q.w", "blocks.0.temporal.k.w", "head.fc2.b", "pos.temporal"):
        p = W[name]
        num = finite_diff_gradient(lambda _: cross_entropy(forward(clips, cfg, W), y).data, p.data)
        assert max_relative_error(p.gradient, num, floor=1e-6) < 1e-4, name


def test_trailing_windows_pad_with_first_frame():
    idx = trailing_windows(4, 3)
    assert idx.tolist() == [[0, 0, 0], [0, 0, 1], [0, 1, 2], [1, 2, 3]]


def test_segment_video_returns_one_label_per_frame(rng):
    cfg = tiny_cfg(frame_H=8, frame_W=8, patch_P=4, frames_T=4, num_classes=7)
    W = init_weights(cfg)
    frames = render_action_video([1, 1, 2, 2, 0, 3, 3], 8, 8)
    t = segment_video(frames, cfg, W, batch_size=3)
    assert len(t) == 7
    with pytest.raises(ValueError):
        segment_video(np.zeros((0, 8, 8, 1)), cfg, W)


def test_checkpoint_round_trip(tmp_path, rng):
    cfg = tiny_cfg()
    W = init_weights(cfg, seed=5)
    save_checkpoint(tmp_path / "m.json", cfg, W)
    cfg2, W2 = load_checkpoint(tmp_path / "m.json")
    assert cfg2 == cfg
    clip = rng.normal(size=(2, 4, 4, 1))
    assert np.array_equal(forward(clip, cfg, W).data, forward(clip, cfg2, W2).data)
    (tmp_path / "bad.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_checkpoint(tmp_path / "bad.json")


def test_training_lowers_loss_and_is_seeded():
    X, Y = moving_patch_dataset(24, 3, T=4, H=8, W=8, seed=0)
    cfg = tiny_cfg(frames_T=4, frame_H=8, frame_W=8, patch_P=4, embed_d=16)
    sched = TrainSchedule(epochs=6, batch_size=8, lr=3e-3, layer_decay=1.0, seed=2)
    W1, h1 = train(X, Y, cfg, sched)
    W2, _ = train(X, Y, cfg, sched)
    assert h1.train_loss[-1] < h1.train_loss[0]
    assert np.array_equal(predict_logits(X, cfg, W1), predict_logits(X, cfg, W2))


def test_train_validates_inputs():
    cfg = tiny_cfg()
    with pytest.raises(ValueError):
        train(np.zeros((0, 2, 4, 4, 1)), np.zeros(0, int), cfg)
    with pytest.raises(ValueError):
        train(np.zeros((1, 2, 4, 4, 1)), np.array([5]), cfg)
