"""Minimal CLI: load a model callable by dotted path, a dataset from an
npz file (arrays ``inputs`` and ``labels``), and export predictions."""

from __future__ import annotations

import argparse
import importlib
import sys

import numpy as np

from .export import ExportError, export_predictions


def load_callable(spec: str):
    if ":" not in spec:
        raise ExportError(f"--model expects module:callable, got {spec!r}")
    module_name, attr = spec.split(":", 1)
    return getattr(importlib.import_module(module_name), attr)


def main(argv=None) -> None:
    p = argparse.ArgumentParser(
        prog="smx-export",
        description="Export classifier softmax predictions to the smx/csv format.",
    )
    p.add_argument("--model", required=True, help="dotted path module:callable")
    p.add_argument("--data", required=True, help="npz file with 'inputs' and 'labels'")
    p.add_argument("--out", required=True)
    p.add_argument("--format", choices=["smx", "csv"], default="smx")
    p.add_argument("--model-id", default=None)
    p.add_argument("--split", default="unspecified")
    p.add_argument("--batch-size", type=int, default=64)
    p.add_argument("--outputs", choices=["auto", "probs", "log_probs"], default="auto")
    args = p.parse_args(argv)

    try:
        model = load_callable(args.model)
        data = np.load(args.data)
        dataset = list(zip(data["inputs"], data["labels"]))
        manifest = export_predictions(
            model, dataset, args.out,
            format=args.format,
            model_id=args.model_id or args.model,
            dataset_split=args.split,
            batch_size=args.batch_size,
            outputs=args.outputs,
        )
    except (ExportError, OSError, KeyError, ModuleNotFoundError, AttributeError) as e:
        print(f"error: {e}", file=sys.stderr)
        sys.exit(1)
    print(f"wrote {manifest.n} rows (k={manifest.k}) to {args.out}")
    print(f"manifest: {args.out}.manifest.json")


if __name__ == "__main__":
    main()
