"""Stored optimal MBK settings for GHZ states, used by the ``mbk:optimal`` operator spec.

The presets were produced by :func:`generate` (multi-start optimization on
``|GHZ_N>``) and are checked in so that ``mbk:optimal`` is instant and
reproducible.  Regenerate with ``python -m belldistill.presets``.
"""

from __future__ import annotations

import json
from functools import lru_cache
from importlib import resources

from .bell import MBK, MeasurementSettings
from .optimize import OptimizeOptions, optimize_settings
from .qlinalg import ContractViolation
from .states import ghz

PRESET_FILE = "mbk_optimal.json"
MAX_PRESET_QUBITS = 6


def generate(max_qubits: int = MAX_PRESET_QUBITS, seed: int = 0) -> dict:
    options = OptimizeOptions(restarts=16, seed=seed, planar=True)
    presets = {}
    for n in range(2, max_qubits + 1):
        res = optimize_settings(ghz(n), MBK, options)
        presets[str(n)] = {
            "alpha": res.settings.alpha.tolist(),
            "alpha_prime": res.settings.alpha_prime.tolist(),
            "beta": res.beta,
        }
    return {
        "provenance": {
            "generator": "belldistill.optimize.optimize_settings",
            "state": "ghz:N",
            "family": MBK,
            "options": {"restarts": options.restarts, "seed": seed, "planar": True, "grid_points": options.grid_points, "tol": options.tol},
        },
        "settings": presets,
    }


@lru_cache(maxsize=1)
def _load() -> dict:
    return json.loads(resources.files(__package__).joinpath("data", PRESET_FILE).read_text(encoding="utf-8"))


def mbk_optimal(n_qubits: int) -> MeasurementSettings:
    entry = _load()["settings"].get(str(n_qubits))
    if entry is None:
        raise ContractViolation(f"no stored optimal MBK settings for N = {n_qubits} (available: 2..{MAX_PRESET_QUBITS})")
    return MeasurementSettings.from_angles(entry["alpha"], entry["alpha_prime"])


if __name__ == "__main__":
    from pathlib import Path

    from .serialize import canonical_dumps

    target = Path(__file__).with_name("data") / PRESET_FILE
    target.write_text(canonical_dumps(generate()), encoding="utf-8")
    print(f"wrote {target}")
