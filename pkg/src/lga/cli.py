"""Command-line surface: decode, greedy, analyze, score and tune.

Machine outputs are JSONL (decode results) and CSV (tables); analyze and
tune additionally render matplotlib figures next to the data files unless
``--no-figures`` is given.  Every command writes a ``*.manifest.json``
recording the exact parameters and wall time next to its output.  No
command consumes randomness; reruns are byte-identical on the data files
regardless of ``--workers``.

Exit codes: 0 success, 1 bad arguments, 2 I/O failure, 3 malformed dump
or language model.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Callable, Iterable, Sequence

import click

from lga.analysis import (
    average_attention,
    confidence_profile,
    diagonality_score,
    token_evolution,
    write_diagonality_csv,
)
from lga.container import DumpError, ModelDump, load_dump
from lga.decoder import (
    NEG_INF,
    DecodeParams,
    Transcript,
    beam_search_decode,
    greedy_decode,
)
from lga.lm import ArpaFormatError, NGramLM, load_ngram_lm
from lga.metrics import cer, corpus_rate, wer
from lga.projection import aggregate_logits, interpolate, log_softmax, project
from lga.tuning import TuneGrid, default_grid, tune_grid

log = logging.getLogger("lga")


def _configure_logging() -> None:
    level = os.environ.get("LGA_LOG", "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING))


def _collect_dump_paths(dump: str | None, dump_dir: str | None) -> list[Path]:
    if (dump is None) == (dump_dir is None):
        raise click.UsageError("exactly one of --dump or --dump-dir is required")
    if dump is not None:
        return [Path(dump)]
    directory = Path(dump_dir)
    paths = sorted(directory.glob("*.lga"), key=lambda p: p.name)
    if not paths:
        raise click.UsageError(f"no .lga files in {directory}")
    return paths


def _load_lm(lm_path: str | None, no_lm: bool) -> NGramLM | None:
    if no_lm and lm_path is not None:
        raise click.UsageError("--lm and --no-lm are mutually exclusive")
    if lm_path is None:
        return None
    return load_ngram_lm(lm_path)


def _map_ordered(fn: Callable, items: Sequence, workers: int) -> list:
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(fn, items))
    return [fn(item) for item in items]


def _write_lines(out: str, lines: Iterable[str]) -> None:
    if out == "-":
        for line in lines:
            sys.stdout.write(line + "\n")
    else:
        with open(out, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")


def _write_manifest(
    out: str, command: str, params: dict, inputs: Sequence[Path], started: float
) -> None:
    if out == "-":
        return
    target = Path(out)
    path = target / "manifest.json" if target.is_dir() else Path(str(target) + ".manifest.json")
    manifest = {
        "command": command,
        "params": params,
        "inputs": [str(p) for p in inputs],
        "out": str(out),
        "wall_time_s": time.perf_counter() - started,
    }
    path.write_text(json.dumps(manifest, indent=2) + "\n", encoding="utf-8")


def _parse_layers(expr: str, num_layers: int) -> list[int]:
    expr = expr.strip()
    if expr == "all":
        return list(range(1, num_layers + 1))
    for sep in ("-", ":"):
        if sep in expr and "," not in expr:
            lo, hi = expr.split(sep, 1)
            try:
                return list(range(int(lo), int(hi) + 1))
            except ValueError:
                raise click.UsageError(f"bad layer range {expr!r}")
    try:
        return [int(part) for part in expr.split(",") if part.strip()]
    except ValueError:
        raise click.UsageError(f"bad layer list {expr!r}")


def _parse_float_list(expr: str, flag: str) -> tuple[float, ...]:
    try:
        values = tuple(float(part) for part in expr.split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"bad float list for {flag}: {expr!r}")
    if not values:
        raise click.UsageError(f"{flag} must name at least one value")
    return values


def _parse_int_list(expr: str, flag: str) -> tuple[int, ...]:
    try:
        values = tuple(int(part) for part in expr.split(",") if part.strip())
    except ValueError:
        raise click.UsageError(f"bad integer list for {flag}: {expr!r}")
    if not values:
        raise click.UsageError(f"{flag} must name at least one value")
    return values


def _transcript_line(
    dump: ModelDump, transcript: Transcript, beta: float, agg_layers: int
) -> str:
    record = {
        "sample_id": dump.meta.sample_id,
        "text": transcript.text,
        "am_logp": transcript.am_logp,
        "lm_log10": transcript.lm_log10,
        "combined_score": transcript.combined_score,
        "beta": beta,
        "m": agg_layers,
    }
    return json.dumps(record, ensure_ascii=False)


_decode_path_options = [
    click.option("--dump", type=str, default=None, help="Single .lga dump file."),
    click.option(
        "--dump-dir",
        type=str,
        default=None,
        help="Directory of .lga files, processed in lexicographic order.",
    ),
    click.option("--out", type=str, default="-", help="Output path, - for stdout."),
    click.option("--workers", type=int, default=1, show_default=True),
]


def _add_options(options):
    def wrap(fn):
        for option in reversed(options):
            fn = option(fn)
        return fn

    return wrap


@click.group()
def cli() -> None:
    """Layer-aggregated CTC decoding toolkit."""


@cli.command()
@_add_options(_decode_path_options)
@click.option("--lm", "lm_path", type=str, default=None, help="ARPA LM (optionally gzipped).")
@click.option("--no-lm", is_flag=True, help="Decode without a language model.")
@click.option("--beam-width", type=int, default=100, show_default=True)
@click.option("--alpha1", type=float, default=0.5, show_default=True, help="LM weight.")
@click.option("--alpha2", type=float, default=0.0, show_default=True, help="Word insertion bonus.")
@click.option("--beta", type=click.FloatRange(0.0, 1.0), default=1.0, show_default=True,
              help="Interpolation weight; 1.0 keeps the baseline logits.")
@click.option("--agg-layers", type=int, default=1, show_default=True,
              help="Number of top transformer layers to aggregate.")
@click.option("--token-min-logp", type=float, default=-5.0, show_default=True)
@click.option("--beam-prune-logp", type=float, default=-10.0, show_default=True)
@click.option("--no-pruning", is_flag=True, help="Disable both pruning thresholds.")
def decode(
    dump, dump_dir, out, workers, lm_path, no_lm, beam_width, alpha1, alpha2,
    beta, agg_layers, token_min_logp, beam_prune_logp, no_pruning,
):
    """Beam-search decode dumps with interpolated layer-aggregated logits."""
    started = time.perf_counter()
    paths = _collect_dump_paths(dump, dump_dir)
    lm = _load_lm(lm_path, no_lm)
    if no_pruning:
        token_min_logp = NEG_INF
        beam_prune_logp = NEG_INF
    params = DecodeParams(
        beam_width=beam_width,
        alpha1=alpha1,
        alpha2=alpha2,
        token_min_logp=token_min_logp,
        beam_prune_logp=beam_prune_logp,
    )
    params.validate()

    def run(path: Path) -> str:
        loaded = load_dump(path)
        base = project(loaded, loaded.meta.num_layers)
        agg = aggregate_logits(loaded, agg_layers)
        logits = interpolate(base, agg, beta)
        ranked = beam_search_decode(log_softmax(logits), loaded.vocab, lm, params)
        return _transcript_line(loaded, ranked[0], beta, agg_layers)

    _write_lines(out, _map_ordered(run, paths, workers))
    _write_manifest(
        out,
        "decode",
        {
            "beam_width": beam_width,
            "alpha1": alpha1,
            "alpha2": alpha2,
            "beta": beta,
            "agg_layers": agg_layers,
            "token_min_logp": token_min_logp,
            "beam_prune_logp": beam_prune_logp,
            "lm": lm_path,
            "workers": workers,
        },
        paths,
        started,
    )


@cli.command()
@_add_options(_decode_path_options)
def greedy(dump, dump_dir, out, workers):
    """Greedy decode from the top layer's logits."""
    started = time.perf_counter()
    paths = _collect_dump_paths(dump, dump_dir)

    def run(path: Path) -> str:
        loaded = load_dump(path)
        logprobs = log_softmax(project(loaded, loaded.meta.num_layers))
        transcript = greedy_decode(logprobs, loaded.vocab)
        return _transcript_line(loaded, transcript, 1.0, 1)

    _write_lines(out, _map_ordered(run, paths, workers))
    _write_manifest(out, "greedy", {"workers": workers}, paths, started)


@cli.group()
def analyze() -> None:
    """Layer diagnostics: confidence, token evolution, attention."""


def _analysis_out_dir(out: str) -> Path:
    directory = Path(out)
    directory.mkdir(parents=True, exist_ok=True)
    return directory


_analyze_options = [
    click.option("--dump", type=str, default=None),
    click.option("--dump-dir", type=str, default=None),
    click.option("--out", type=str, required=True, help="Output directory."),
    click.option("--workers", type=int, default=1, show_default=True),
    click.option("--layers", type=str, default="all", show_default=True,
                 help='Layer selection: "all", "2-8", or "1,4,12".'),
    click.option("--no-figures", is_flag=True, help="Skip matplotlib rendering."),
]


@analyze.command()
@_add_options(_analyze_options)
@click.option("--exclude-blank-frames", is_flag=True,
              help="Drop frames whose top-layer argmax is blank.")
def confidence(dump, dump_dir, out, workers, layers, no_figures, exclude_blank_frames):
    """Per-layer softmax confidence statistics (CSV, plus figure)."""
    started = time.perf_counter()
    paths = _collect_dump_paths(dump, dump_dir)
    directory = _analysis_out_dir(out)

    def run(path: Path) -> None:
        loaded = load_dump(path)
        layer_list = _parse_layers(layers, loaded.meta.num_layers)
        profile = confidence_profile(
            loaded, layer_list, exclude_blank_frames=exclude_blank_frames
        )
        target = directory / f"{loaded.meta.sample_id}.confidence.csv"
        with open(target, "w", encoding="utf-8") as fh:
            profile.to_csv(fh)
        if not no_figures:
            from lga.figures import save_confidence_figure

            save_confidence_figure(
                profile, directory / f"{loaded.meta.sample_id}.confidence.png"
            )

    _map_ordered(run, paths, workers)
    _write_manifest(
        out,
        "analyze confidence",
        {"layers": layers, "exclude_blank_frames": exclude_blank_frames,
         "workers": workers},
        paths,
        started,
    )


@analyze.command()
@_add_options(_analyze_options)
def tokens(dump, dump_dir, out, workers, layers, no_figures):
    """Argmax token grid per layer and timestep (JSON, plus figure)."""
    started = time.perf_counter()
    paths = _collect_dump_paths(dump, dump_dir)
    directory = _analysis_out_dir(out)

    def run(path: Path) -> None:
        loaded = load_dump(path)
        layer_list = _parse_layers(layers, loaded.meta.num_layers)
        table = token_evolution(loaded, layer_list)
        target = directory / f"{loaded.meta.sample_id}.tokens.json"
        target.write_text(
            json.dumps(table.to_json_obj(), ensure_ascii=False) + "\n",
            encoding="utf-8",
        )
        if not no_figures:
            from lga.figures import save_token_evolution_figure

            save_token_evolution_figure(
                table, loaded.vocab, directory / f"{loaded.meta.sample_id}.tokens.png"
            )

    _map_ordered(run, paths, workers)
    _write_manifest(
        out, "analyze tokens", {"layers": layers, "workers": workers}, paths, started
    )


@analyze.command()
@_add_options(_analyze_options)
@click.option("--window", type=int, default=1, show_default=True,
              help="Half-width of the diagonal band for the locality score.")
def attention(dump, dump_dir, out, workers, layers, no_figures, window):
    """Head-averaged attention maps and their diagonality (CSV, figures)."""
    started = time.perf_counter()
    paths = _collect_dump_paths(dump, dump_dir)
    directory = _analysis_out_dir(out)

    def run(path: Path) -> None:
        loaded = load_dump(path)
        layer_list = _parse_layers(layers, loaded.meta.num_layers)
        rows = []
        for layer in layer_list:
            amap = average_attention(loaded, layer)
            rows.append((layer, window, diagonality_score(amap, window)))
            matrix_path = directory / f"{loaded.meta.sample_id}.attention_layer{layer}.csv"
            with open(matrix_path, "w", encoding="utf-8") as fh:
                writer = csv.writer(fh, lineterminator="\n")
                for row in amap.values:
                    writer.writerow([repr(v) for v in row])
            if not no_figures:
                from lga.figures import save_attention_figure

                save_attention_figure(
                    amap,
                    directory / f"{loaded.meta.sample_id}.attention_layer{layer}.png",
                )
        target = directory / f"{loaded.meta.sample_id}.diagonality.csv"
        with open(target, "w", encoding="utf-8") as fh:
            write_diagonality_csv(fh, rows)

    _map_ordered(run, paths, workers)
    _write_manifest(
        out,
        "analyze attention",
        {"layers": layers, "window": window, "workers": workers},
        paths,
        started,
    )


def _read_hyp_file(path: Path) -> list[tuple[str | None, str]]:
    """Hypotheses as (sample_id, text); id is None for plain line files."""
    entries: list[tuple[str | None, str]] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if line.lstrip().startswith("{"):
                try:
                    obj = json.loads(line)
                    entries.append((obj["sample_id"], obj["text"]))
                    continue
                except (json.JSONDecodeError, KeyError) as exc:
                    raise click.UsageError(f"bad JSONL line in {path}: {exc}")
            entries.append((None, line))
    return entries


def _read_ref_file(path: Path) -> list[tuple[str | None, str]]:
    """References as (sample_id, text); TSV lines carry ids."""
    entries: list[tuple[str | None, str]] = []
    with open(path, encoding="utf-8") as fh:
        for raw in fh:
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            if "\t" in line:
                sample_id, text = line.split("\t", 1)
                entries.append((sample_id, text))
            else:
                entries.append((None, line))
    return entries


@cli.command()
@click.option("--ref", "ref_path", type=str, required=True,
              help="Reference text: plain lines or TSV sample_id<TAB>text.")
@click.option("--hyp", "hyp_path", type=str, required=True,
              help="Hypotheses: plain lines or decode JSONL.")
@click.option("--out", type=str, default="-", help="CSV output, - for stdout.")
def score(ref_path, hyp_path, out):
    """Per-utterance and corpus WER/CER."""
    started = time.perf_counter()
    hyps = _read_hyp_file(Path(hyp_path))
    refs = _read_ref_file(Path(ref_path))

    if all(h[0] is not None for h in hyps) and all(r[0] is not None for r in refs):
        ref_by_id = dict(refs)
        pairs = []
        for sample_id, text in hyps:
            if sample_id not in ref_by_id:
                raise click.UsageError(f"no reference for sample {sample_id!r}")
            pairs.append((sample_id, ref_by_id[sample_id], text))
    else:
        if len(hyps) != len(refs):
            raise click.UsageError(
                f"line-aligned scoring needs equal counts, got "
                f"{len(refs)} references and {len(hyps)} hypotheses"
            )
        pairs = [
            (h[0] or r[0] or f"line{i}", r[1], h[1])
            for i, (r, h) in enumerate(zip(refs, hyps))
        ]

    header = [
        "sample_id", "wer", "cer",
        "word_sub", "word_ins", "word_del", "ref_words",
        "char_sub", "char_ins", "char_del", "ref_chars",
    ]
    lines = [",".join(header)]
    word_reports = []
    char_reports = []
    for sample_id, reference, hypothesis in pairs:
        w = wer(reference, hypothesis)
        c = cer(reference, hypothesis)
        word_reports.append(w)
        char_reports.append(c)
        lines.append(
            ",".join(
                [
                    sample_id, repr(w.rate), repr(c.rate),
                    str(w.substitutions), str(w.insertions), str(w.deletions),
                    str(w.reference_len),
                    str(c.substitutions), str(c.insertions), str(c.deletions),
                    str(c.reference_len),
                ]
            )
        )
    cw = corpus_rate(word_reports)
    cc = corpus_rate(char_reports)
    lines.append(
        ",".join(
            [
                "CORPUS", repr(cw.rate), repr(cc.rate),
                str(cw.substitutions), str(cw.insertions), str(cw.deletions),
                str(cw.reference_len),
                str(cc.substitutions), str(cc.insertions), str(cc.deletions),
                str(cc.reference_len),
            ]
        )
    )
    _write_lines(out, lines)
    _write_manifest(
        out, "score", {"ref": ref_path, "hyp": hyp_path},
        [Path(ref_path), Path(hyp_path)], started,
    )


@cli.command()
@click.option("--dump-dir", type=str, required=True)
@click.option("--lm", "lm_path", type=str, default=None)
@click.option("--no-lm", is_flag=True)
@click.option("--betas", type=str, default=None,
              help="Comma list; defaults to the published values plus 1.0.")
@click.option("--layer-counts", type=str, default=None,
              help="Comma list; defaults to the published counts clipped to L.")
@click.option("--alpha1s", type=str, default=None, help="Optional comma list.")
@click.option("--alpha2s", type=str, default=None, help="Optional comma list.")
@click.option("--beam-width", type=int, default=100, show_default=True)
@click.option("--alpha1", type=float, default=0.5, show_default=True)
@click.option("--alpha2", type=float, default=0.0, show_default=True)
@click.option("--token-min-logp", type=float, default=-5.0, show_default=True)
@click.option("--beam-prune-logp", type=float, default=-10.0, show_default=True)
@click.option("--workers", type=int, default=1, show_default=True)
@click.option("--out", type=str, required=True, help="Output directory.")
@click.option("--no-figures", is_flag=True)
def tune(
    dump_dir, lm_path, no_lm, betas, layer_counts, alpha1s, alpha2s,
    beam_width, alpha1, alpha2, token_min_logp, beam_prune_logp,
    workers, out, no_figures,
):
    """Grid-search (beta, m) and optionally (alpha1, alpha2) on dev dumps."""
    started = time.perf_counter()
    paths = _collect_dump_paths(None, dump_dir)
    lm = _load_lm(lm_path, no_lm)
    dumps = [load_dump(path) for path in paths]
    num_layers = dumps[0].meta.num_layers

    base_grid = default_grid(num_layers)
    grid = TuneGrid(
        betas=_parse_float_list(betas, "--betas") if betas else base_grid.betas,
        layer_counts=(
            _parse_int_list(layer_counts, "--layer-counts")
            if layer_counts
            else base_grid.layer_counts
        ),
        alpha1s=_parse_float_list(alpha1s, "--alpha1s") if alpha1s else None,
        alpha2s=_parse_float_list(alpha2s, "--alpha2s") if alpha2s else None,
    )
    params = DecodeParams(
        beam_width=beam_width,
        alpha1=alpha1,
        alpha2=alpha2,
        token_min_logp=token_min_logp,
        beam_prune_logp=beam_prune_logp,
    )
    params.validate()

    result = tune_grid(dumps, lm, grid, params, workers=workers)

    directory = _analysis_out_dir(out)
    with open(directory / "tune.csv", "w", encoding="utf-8") as fh:
        result.to_csv(fh)
    best = {
        "beta": result.best.beta,
        "m": result.best.m,
        "alpha1": result.best.alpha1,
        "alpha2": result.best.alpha2,
    }
    (directory / "best.json").write_text(
        json.dumps(best, indent=2) + "\n", encoding="utf-8"
    )
    if not no_figures:
        from lga.figures import save_tune_heatmap

        save_tune_heatmap(result, directory / "tune_wer.png")
    _write_manifest(
        out,
        "tune",
        {
            "betas": list(grid.betas),
            "layer_counts": list(grid.layer_counts),
            "alpha1s": None if grid.alpha1s is None else list(grid.alpha1s),
            "alpha2s": None if grid.alpha2s is None else list(grid.alpha2s),
            "decode": dataclasses.asdict(params),
            "lm": lm_path,
            "workers": workers,
        },
        paths,
        started,
    )


def main(argv: list[str] | None = None) -> int:
    """Entry point with the documented exit-code mapping."""
    _configure_logging()
    try:
        cli.main(args=argv, standalone_mode=False)
        return 0
    except click.exceptions.Exit as exc:
        return exc.exit_code
    except click.UsageError as exc:
        exc.show(file=sys.stderr)
        return 1
    except click.ClickException as exc:
        exc.show(file=sys.stderr)
        return 1
    except (DumpError, ArpaFormatError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
