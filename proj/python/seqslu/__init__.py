"""Sequential end-to-end spoken language understanding."""

from ._core import (
    DataError,
    NumericalError,
    cer,
    collapse,
    count_params,
    ctc_loss,
    edit_stats,
    extract_concepts,
    generate_corpus,
    gold_feedback_index,
    greedy_decode,
    log_spectrogram,
    lr_at_epoch,
    parse_annotation,
    read_corpus,
    read_wav,
    run_cli,
    serialize_annotation,
    wer,
)

__all__ = [
    "DataError",
    "NumericalError",
    "cer",
    "collapse",
    "count_params",
    "ctc_loss",
    "edit_stats",
    "extract_concepts",
    "generate_corpus",
    "gold_feedback_index",
    "greedy_decode",
    "log_spectrogram",
    "lr_at_epoch",
    "parse_annotation",
    "read_corpus",
    "read_wav",
    "run_cli",
    "serialize_annotation",
    "wer",
]
