"""LGA1 dump exporter for pretrained CTC speech checkpoints."""

from lga_exporter.audio import AudioError, load_waveform
from lga_exporter.export import (
    CheckpointExporter,
    ExportError,
    ExportSpec,
    read_transcripts,
    run_export,
)
from lga_exporter.tiny import build_tiny_model
from lga_exporter.writer import DumpPayload, save_lga, write_lga

__version__ = "0.1.0"

__all__ = [
    "AudioError",
    "CheckpointExporter",
    "DumpPayload",
    "ExportError",
    "ExportSpec",
    "build_tiny_model",
    "load_waveform",
    "read_transcripts",
    "run_export",
    "save_lga",
    "write_lga",
]
