"""Reinforce-aligner text-to-waveform toolkit."""

from ._rtts import (
    HOP,
    SAMPLE_RATE,
    AlignmentError,
    AudioError,
    CheckpointError,
    ConfigError,
    DataError,
    EvaluationError,
    ObjectiveError,
    SignalError,
    Synthesizer,
    alignment_weights,
    compute_reward,
    duration_error,
    mcd13,
    mel_spectrogram,
    read_wav,
    rmse_f0,
    round_durations,
    shift_durations,
    soft_dtw,
    train,
    write_toy_corpus,
    write_wav,
)

__all__ = [name for name in dir() if not name.startswith("_")]
