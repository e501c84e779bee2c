"""Python front end for the twinpeaks solver.

Configs are plain dicts with the same keys as the JSON config files; missing keys
take the baseline calibration.
"""

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from . import _core

__all__ = ["Solution", "default_config", "solve", "simulate", "deterministic_steady_state", "cli_solve", "cli_sweep"]


def _dump(config: Optional[dict]) -> str:
    return json.dumps(config or {})


def default_config() -> dict:
    return json.loads(_core.default_config())


@dataclass
class Solution:
    k: np.ndarray
    V: dict
    c: dict
    mu: dict
    signal_flag: np.ndarray
    D: np.ndarray
    converged: bool
    iterations: int
    g: Optional[dict]
    report: dict

    @property
    def kstar(self) -> float:
        # report.json writes an absent threshold as null
        v = self.report.get("kstar")
        return float("inf") if v is None else float(v)

    def shares(self) -> dict:
        if self.g is None:
            return {}
        dk = self.k[1] - self.k[0]
        return {r: float(g.sum() * dk) for r, g in self.g.items()}


def solve(config: Optional[dict] = None) -> Solution:
    raw = _core.solve(_dump(config))
    raw["report"] = json.loads(raw.pop("report_json"))
    raw["signal_flag"] = raw["signal_flag"].astype(bool)
    return Solution(**raw)


def simulate(config: Optional[dict] = None, *, paths=1, horizon=2e5, dt=0.05, burn_in=2e4, seed=20240611,
             mode="single-long-path", sample_interval=1.0, workers=1) -> dict:
    """Solve, simulate with the solved policies and return the KFE-vs-simulation comparison."""
    raw = _core.simulate(_dump(config), paths, horizon, dt, burn_in, seed, mode, sample_interval, workers)
    return json.loads(raw["compare_json"])


def deterministic_steady_state(regime: str, config: Optional[dict] = None) -> float:
    return _core.deterministic_steady_state(_dump(config), regime)


def cli_solve(config, out) -> int:
    return _core.cli_solve(Path(config), Path(out))


def cli_sweep(config, param: str, values, out, workers: int = 1) -> int:
    return _core.cli_sweep(Path(config), param, [float(v) for v in values], Path(out), workers)
