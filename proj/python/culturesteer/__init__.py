# Copyright 2026 The culturesteer Authors
# SPDX-License-Identifier: Apache-2.0
"""Deterministic cultural-value probing and activation steering.

Thin re-export of the compiled core. The heavy lifting (model, probing,
steering, artifact pipeline) lives in C++; this package exposes the handful
of operations a notebook or script composes.
"""

from culturesteer._core import (
    CultureSteerError,
    Model,
    emit_generation_prompt,
    hash64,
    persona_text,
    run,
    synthetic_dataset_json,
    validate_json,
)

__version__ = "0.1.0"

__all__ = [
    "CultureSteerError",
    "Model",
    "emit_generation_prompt",
    "hash64",
    "persona_text",
    "run",
    "synthetic_dataset_json",
    "validate_json",
    "__version__",
]
