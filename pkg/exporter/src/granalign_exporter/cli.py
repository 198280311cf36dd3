"""granalign-export command line.

One invocation exports everything for one audio file: CTC emissions
with their symbol table, plus per-layer features, pooled over aligned
unit spans when --units is given and raw per frame otherwise. A
manifest.json in the output directory records what was written.

Exit codes: 0 success, 1 validation error, 2 audio or file error,
3 model unavailable, 64 usage error.
"""

import argparse
import json
import sys
from pathlib import Path

from granalign import DataError

from .backends import DEFAULT_MODEL, get_backend
from .errors import AudioError, ModelUnavailableError, ValidationError
from .export import (
    DEFAULT_LAYERS,
    ExportJob,
    export_emissions,
    export_frame_features,
    export_unit_features,
)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_DATA = 2
EXIT_MODEL = 3
EXIT_USAGE = 64


class _Parser(argparse.ArgumentParser):
    """argparse exits with 2 on bad usage; we reserve 2 for data errors."""

    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser():
    parser = _Parser(
        prog="granalign-export",
        description="Export acoustic-model emissions and features as FMAT/NDJSON.",
    )
    parser.add_argument("--audio", required=True, help="input WAV file")
    parser.add_argument("--out", required=True, help="output directory")
    parser.add_argument(
        "--model",
        default=DEFAULT_MODEL,
        help="checkpoint id, or 'synthetic' for the deterministic local backend",
    )
    parser.add_argument(
        "--layers",
        default=",".join(str(l) for l in DEFAULT_LAYERS),
        help="comma-separated hidden layer indices to export",
    )
    parser.add_argument(
        "--units",
        default=None,
        help="aligned units NDJSON; when given, features are pooled per unit",
    )
    return parser


def _parse_layers(text):
    try:
        layers = tuple(int(part) for part in text.split(",") if part.strip() != "")
    except ValueError as exc:
        raise ValidationError(f"bad --layers {text!r}: {exc}") from exc
    if not layers:
        raise ValidationError(f"bad --layers {text!r}: no layer indices")
    return layers


def run(argv):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)

    try:
        job = ExportJob(
            audio=args.audio,
            out_dir=args.out,
            model=args.model,
            layers=_parse_layers(args.layers),
        )
        backend = get_backend(job.model)
        artifacts = {"emissions": export_emissions(job, backend), "layers": {}}
        for layer in job.layers:
            if args.units:
                result = export_unit_features(job, args.units, layer, backend)
            else:
                result = export_frame_features(job, layer, backend)
            artifacts["layers"][str(layer)] = result
    except ModelUnavailableError as exc:
        print(f"granalign-export: model unavailable: {exc}", file=sys.stderr)
        return EXIT_MODEL
    except ValidationError as exc:
        print(f"granalign-export: validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (AudioError, DataError, OSError) as exc:
        print(f"granalign-export: data error: {exc}", file=sys.stderr)
        return EXIT_DATA

    manifest = {
        "artifacts": artifacts,
        "audio": args.audio,
        "layers": list(job.layers),
        "model": job.model,
        "units": args.units,
    }
    manifest_path = Path(args.out) / "manifest.json"
    manifest_path.write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )
    print(f"granalign-export: wrote {len(job.layers)} layer(s) to {args.out}")
    return EXIT_OK


def main():
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":
    main()
