"""Console entry points: lga-export and lga-make-tiny-model."""

from __future__ import annotations

import logging
import os
import sys
from pathlib import Path

import click

from lga_exporter.audio import AudioError
from lga_exporter.export import ExportError, ExportSpec, read_transcripts, run_export
from lga_exporter.tiny import build_tiny_model


def _configure_logging() -> None:
    level = os.environ.get("LGA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _collect_audio(audio: str) -> list[Path]:
    path = Path(audio)
    if path.is_dir():
        files = sorted(path.glob("*.wav"), key=lambda p: p.name)
        if not files:
            raise click.UsageError(f"no .wav files in {path}")
        return files
    return [path]


@click.command()
@click.option("--model", required=True, help="Checkpoint id or local path.")
@click.option("--audio", required=True, help="WAV file or directory of WAVs.")
@click.option("--transcripts", default=None,
              help="TSV sample_id<TAB>text providing reference_text.")
@click.option("--out", required=True, help="Output directory for .lga dumps.")
@click.option("--attentions", is_flag=True, help="Also capture attention maps.")
@click.option("--device", default="cpu", show_default=True)
def export(model, audio, transcripts, out, attentions, device):
    """Export per-layer states of a CTC checkpoint to LGA1 dumps."""
    spec = ExportSpec(
        model_id=model,
        audio_paths=_collect_audio(audio),
        output_dir=Path(out),
        include_attentions=attentions,
        device=device,
        transcripts=read_transcripts(transcripts) if transcripts else {},
    )
    written = run_export(spec)
    for path in written:
        click.echo(str(path))


@click.command()
@click.option("--out", required=True, help="Directory for the fixture checkpoint.")
@click.option("--seed", type=int, default=0, show_default=True)
def make_tiny(out, seed):
    """Build the tiny random CTC fixture checkpoint (no downloads)."""
    path = build_tiny_model(out, seed=seed)
    click.echo(str(path))


def _run(command, argv) -> int:
    _configure_logging()
    try:
        command.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (ExportError, AudioError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2


def main_export(argv: list[str] | None = None) -> int:
    return _run(export, argv)


def main_make_tiny(argv: list[str] | None = None) -> int:
    return _run(make_tiny, argv)


if __name__ == "__main__":
    sys.exit(main_export())
