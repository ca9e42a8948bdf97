import json
import math
from pathlib import Path
from typing import Any

import numpy as np


def bump(z: float) -> float:
    """
    Smooth compactly supported test function exp(−1/(1 − z²)) on (−1, 1).
    """
    if abs(z) >= 1.0:
        return 0.0
    return math.exp(-1.0 / (1.0 - z * z))


def bump_derivative(z: float) -> float:
    if abs(z) >= 1.0:
        return 0.0
    return bump(z) * (-2.0 * z / (1.0 - z * z) ** 2)


def poisson_survival(t: float | np.ndarray, jumps: int, omega: float = 1.0) -> float | np.ndarray:
    """
    P(Poisson(Ωt) < jumps): survival when the path leaves on its ``jumps``-th jump.
    """
    t = np.asarray(t, dtype=float)
    total = sum((omega * t) ** k / math.factorial(k) for k in range(jumps))
    return np.exp(-omega * t) * total


def relative(a: float, b: float) -> float:
    return abs(a - b) / abs(b)


def write_config(directory: Path, **overrides: Any) -> Path:
    """
    Write a small bilateral p=1, Δ=[0, π] scenario, updated with ``overrides``, and return its path.
    """
    document: dict[str, Any] = {
        "measure": {"type": "bilateral_exp", "p": 1.0},
        "domain": [[0.0, math.pi]],
        "start": 0.0,
        "grid": {"n": 120},
        "mc": {"paths": 20000, "horizon": 10.0, "seed": 7},
        "run": ["spectral"],
        "output_dir": "out",
    }
    document.update(overrides)
    path = Path(directory) / "scenario.json"
    path.write_text(json.dumps(document), encoding="utf-8")
    return path
