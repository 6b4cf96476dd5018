"""Frame-level multi-instrument recognition toolkit.

Thin python surface over the C++ core: constant-Q features, harmonic
series features, label rasterization, model inference and the frame-level
evaluation protocol. Heavy lifting (training, the CLI pipeline) lives in
the `fir` executable.
"""

from firkit._core import (
    FRAMES_PER_SEGMENT,
    HOP,
    NUM_INSTRUMENTS,
    PITCH_BINS,
    SAMPLE_RATE,
    SEGMENT_SAMPLES,
    Model,
    ModelSpec,
    build_hsf,
    compute_class_weights,
    compute_cqt,
    compute_norm_stats,
    frame_f1,
    harmonic_map,
    harmonic_shift_bins,
    instrument_names,
    normalize_features,
    rasterize_labels,
    rasterize_pitch,
    tune_thresholds,
    weighted_bce,
)

__all__ = [
    "FRAMES_PER_SEGMENT",
    "HOP",
    "NUM_INSTRUMENTS",
    "PITCH_BINS",
    "SAMPLE_RATE",
    "SEGMENT_SAMPLES",
    "Model",
    "ModelSpec",
    "build_hsf",
    "compute_class_weights",
    "compute_cqt",
    "compute_norm_stats",
    "frame_f1",
    "harmonic_map",
    "harmonic_shift_bins",
    "instrument_names",
    "normalize_features",
    "rasterize_labels",
    "rasterize_pitch",
    "tune_thresholds",
    "weighted_bce",
]
