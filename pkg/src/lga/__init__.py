"""Layer-aggregated CTC decoding toolkit."""

from lga.container import (
    DumpError,
    DumpFormatError,
    DumpMeta,
    DumpValidationError,
    ModelDump,
    ProjectionHead,
    Vocabulary,
    load_dump,
    read_dump,
    save_dump,
    write_dump,
)
from lga.decoder import (
    DecodeParams,
    Transcript,
    beam_search_decode,
    ctc_collapse,
    greedy_decode,
)
from lga.lm import ArpaFormatError, LMState, NGramLM, load_ngram_lm, parse_arpa
from lga.metrics import ErrorRateReport, cer, edit_distance, wer
from lga.projection import (
    LogitsMatrix,
    LogProbsMatrix,
    Provenance,
    aggregate_logits,
    interpolate,
    log_softmax,
    project,
    temperature_scale,
)

__version__ = "0.1.0"

__all__ = [
    "ArpaFormatError",
    "DecodeParams",
    "DumpError",
    "DumpFormatError",
    "DumpMeta",
    "DumpValidationError",
    "ErrorRateReport",
    "LMState",
    "LogProbsMatrix",
    "LogitsMatrix",
    "ModelDump",
    "NGramLM",
    "ProjectionHead",
    "Provenance",
    "Transcript",
    "Vocabulary",
    "aggregate_logits",
    "beam_search_decode",
    "cer",
    "ctc_collapse",
    "edit_distance",
    "greedy_decode",
    "interpolate",
    "load_dump",
    "load_ngram_lm",
    "log_softmax",
    "parse_arpa",
    "project",
    "read_dump",
    "save_dump",
    "temperature_scale",
    "wer",
    "write_dump",
]
