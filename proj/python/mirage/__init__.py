"""Python bindings for the mirage regional editing engine."""

import json
import os

from ._mirage import (
    MirageError,
    background_metrics,
    overall_score,
    patch_token_count,
    psnr_from_mse,
    read_png,
    region_step_count,
    sample_noise,
    square_scene,
    stub_decompose,
    write_png,
)
from ._mirage import edit_json as _edit_json

__all__ = [
    "MirageError",
    "background_metrics",
    "edit",
    "overall_score",
    "patch_token_count",
    "psnr_from_mse",
    "read_png",
    "region_step_count",
    "sample_noise",
    "square_scene",
    "stub_decompose",
    "write_png",
]


def edit(image, instruction, **config):
    """Edit the PNG at `image`. Keyword arguments are config keys (steps, rho,
    strategy, seed, mock, out, ...). Returns the parsed report."""
    for key in ("mock", "out", "image"):
        if isinstance(config.get(key), os.PathLike):
            config[key] = os.fspath(config[key])
    return json.loads(_edit_json(os.fspath(image), instruction, json.dumps(config)))
