import json

import numpy as np
import pytest

import reinforce_tts as rt


def tone(hz, seconds=0.5):
    t = np.arange(int(seconds * rt.SAMPLE_RATE)) / rt.SAMPLE_RATE
    return (0.4 * np.sin(2 * np.pi * hz * t)).astype(np.float32)


def test_mel_frame_count():
    mel = rt.mel_spectrogram(np.zeros(rt.HOP * 12, dtype=np.float32))
    assert mel.shape == (12, 80)
    assert np.allclose(mel, np.log(1e-5))


def test_alignment_rows_sum_to_one():
    w = rt.alignment_weights([1.0, 2.0, 3.0], 17)
    assert w.shape == (17, 3)
    assert np.allclose(w.sum(axis=1), 1.0)


def test_shift_and_rewards():
    shifted, clamped = rt.shift_durations([4.0, 4.0, 4.0, 4.0], 2.0)
    assert shifted.tolist() == [6.0, 2.0, 6.0, 2.0]
    assert clamped == 0
    keep, shift = rt.compute_reward([1.0, 0.0], [0.0, 1.0], "phoneme_wise", 2)
    assert keep == [0, 1] and shift == [1, 0]


def test_soft_dtw_identity_and_errors():
    assert rt.soft_dtw(np.zeros((3, 3)), omega=0.0, tau=1e-3) == pytest.approx(0.0, abs=1e-2)
    with pytest.raises(ValueError):
        rt.soft_dtw(np.zeros((2, 2)), tau=0.0)


def test_metrics():
    x = tone(200.0)
    assert rt.mcd13(x, x) == 0.0
    assert rt.rmse_f0(x, x) == 0.0
    assert rt.rmse_f0(x, tone(210.0)) == pytest.approx(10.0, abs=2.0)
    assert rt.duration_error([3.0, 1.0], [3, 1]) == 0.0
    assert rt.round_durations([0.4, 0.4, 0.4]) == [0, 1, 0]


def test_wav_round_trip(tmp_path):
    x = tone(300.0, 0.1)
    rt.write_wav(tmp_path / "x.wav", x)
    y = rt.read_wav(tmp_path / "x.wav")
    assert np.abs(x - y).max() < 1e-4


def test_train_and_synthesize(tmp_path):
    rt.write_toy_corpus(tmp_path / "corpus", utterances=6, seed=3)
    cfg = {
        "metadata": "corpus/metadata.csv",
        "wav_dir": "corpus/wavs",
        "val_size": 1,
        "test_size": 1,
        "preset": "small",
        "encoder_blocks": 1,
        "batch_size": 2,
        "segment_frames": 8,
        "max_steps": 2,
        "checkpoint_interval": 2,
        "validation_interval": 2,
        "validation_utterances": 1,
    }
    ckpt, log = rt.train(json.dumps(cfg), tmp_path / "run", tmp_path)
    assert len(open(log).read().splitlines()) == 2
    synth = rt.Synthesizer.load(ckpt)
    audio = synth.synthesize("ai ou")
    assert audio.size == sum(synth.durations("ai ou")) * rt.HOP
    assert np.array_equal(audio, synth.synthesize("ai ou"))
    with pytest.raises(rt.DataError):
        synth.synthesize("!!!")


def test_config_errors_name_the_key(tmp_path):
    with pytest.raises(rt.ConfigError, match="segment_frame"):
        rt.train(json.dumps({"segment_frame": 8}), tmp_path / "run")
