import os
from typing import Any, Callable, Dict

import dotenv

from errors import InvalidArgumentError

# --- Configuration & Initialization ---
dotenv.load_dotenv()


def _read(name: str, default: Any, cast: Callable[[str], Any]) -> Any:
    raw = os.environ.get(name)
    if raw is None or raw.strip() == "":
        return default
    try:
        return cast(raw.strip())
    except ValueError:
        raise InvalidArgumentError(f"{name}={raw!r} is not a valid {cast.__name__}")


THREADS = _read("BCSGAP_THREADS", 1, int)
TOL = _read("BCSGAP_TOL", 1e-10, float)
MAX_ITER = _read("BCSGAP_MAX_ITER", 20000, int)
DAMPING = _read("BCSGAP_DAMPING", 0.5, float)
GOLDEN = _read("BCSGAP_GOLDEN", os.path.join(os.path.dirname(os.path.abspath(__file__)), "golden", "quick.json"), str)
LOG_LEVEL = _read("BCSGAP_LOG_LEVEL", "INFO", str)


def configure(**overrides: Any):
    """Override settings at runtime, e.g. configure(threads=4, tol=1e-9)."""
    global THREADS, TOL, MAX_ITER, DAMPING, GOLDEN, LOG_LEVEL
    known: Dict[str, str] = {
        "threads": "THREADS",
        "tol": "TOL",
        "max_iter": "MAX_ITER",
        "damping": "DAMPING",
        "golden": "GOLDEN",
        "log_level": "LOG_LEVEL",
    }
    for key, value in overrides.items():
        if key not in known:
            raise InvalidArgumentError(f"unknown setting '{key}'")
        if value is None:
            continue
        globals()[known[key]] = value


def threads() -> int:
    if THREADS < 1:
        raise InvalidArgumentError(f"BCSGAP_THREADS must be >= 1, got {THREADS}")
    return THREADS
