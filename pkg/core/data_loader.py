"""Data loader for NovCalc static JSON data files.

Loads all JSON data at import time and exposes as module-level variables.
Missing or empty files return sensible defaults (empty dict or list).
"""

import json
from pathlib import Path
from typing import Any

DATA_DIR = Path(__file__).parent.parent / "data"
EXAMPLES_DIR = DATA_DIR / "examples"


def _load(relative_path: str, default: Any = None) -> Any:
    """Load a JSON file relative to DATA_DIR with graceful fallback.

    Args:
        relative_path: Path relative to the data directory.
        default: Value to return if file is missing or empty.
                 If None, returns {} for objects, [] for arrays.

    Returns:
        Parsed JSON data, or default value on failure.
    """
    path = DATA_DIR / relative_path
    try:
        with open(path, encoding="utf-8") as f:
            data = json.load(f)
            if data is None:
                return default if default is not None else {}
            return data
    except (FileNotFoundError, json.JSONDecodeError):
        if default is not None:
            return default
        return {}


def example_path(name: str) -> Path:
    """Return the path of a bundled example document.

    Args:
        name: File stem under ``data/examples`` (with or without ``.json``).

    Raises:
        ValueError: If no such example is bundled.
    """
    stem = name[:-5] if name.endswith(".json") else name
    path = EXAMPLES_DIR / f"{stem}.json"
    if not path.exists():
        available = ", ".join(sorted(p.stem for p in EXAMPLES_DIR.glob("*.json")))
        raise ValueError(
            f"No bundled example named '{stem}'. Available examples: {available}."
        )
    return path


_FALLBACK_DEFAULTS = {
    "fmt": 1,
    "truncation": "5",
    "seed": 0,
    "newton_residual": 1e-12,
    "newton_max_steps": 40,
    "merge_radius": 1e-8,
    "rank_tol": 1e-8,
    "subdivision_depth": 22,
    "box_budget": 200000,
    "curve_step": 0.01,
    "curve_max_steps": 20000,
    "diagonalize_step_cap": 5000,
    "caps": {"corner_dim": 2, "total_dim": 4, "degree": 4, "group_order": 8},
}

# Numeric defaults, overridable by CLI flags
DEFAULTS = {**_FALLBACK_DEFAULTS, **_load("defaults.json")}

# Bundled triangulations keyed by name
TRIANGULATIONS = _load("triangulations.json")
