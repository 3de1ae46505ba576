"""State files, canonical JSON, reports and falsification certificates."""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from .bell import MeasurementSettings
from .qlinalg import ContractViolation, DensityMatrix, QubitSubset
from .states import (
    GhzWeights,
    ghz,
    make_ghz_diagonal,
    make_noisy_ghz,
    make_padded_ghz,
    make_rho_r,
    make_w_mixture,
    maximally_mixed,
    random_density,
)

SCHEMA_VERSION = 1
ENCODINGS = ("dense", "ghz-weights", "constructor")
CONSTRUCTORS = ("ghz", "mixed", "rho-r", "w-mixture", "padded-ghz", "noisy-ghz", "random")


class StateFileError(ValueError):
    """Malformed state or settings input; ``offset`` is a byte offset into the input."""

    def __init__(self, message: str, offset: int = 0):
        super().__init__(f"{message} (at byte {offset})")
        self.offset = offset


# --- canonical JSON ----------------------------------------------------------


def _format_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x}")
    s = "%.17g" % x
    if not any(c in s for c in ".en"):
        s += ".0"
    return s


def _emit(obj: Any, indent: int, level: int, out: list[str]) -> None:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    if isinstance(obj, (complex, np.complexfloating)):
        obj = {"re": float(obj.real), "im": float(obj.imag)}
    if obj is None or isinstance(obj, (bool, np.bool_)):
        out.append(json.dumps(None if obj is None else bool(obj)))
    elif isinstance(obj, (int, np.integer)):
        out.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        out.append(_format_float(float(obj)))
    elif isinstance(obj, str):
        out.append(json.dumps(obj))
    elif isinstance(obj, dict):
        if not obj:
            out.append("{}")
            return
        out.append("{\n")
        items = sorted((str(k), v) for k, v in obj.items())
        for i, (k, v) in enumerate(items):
            out.append(f"{pad}{json.dumps(k)}: ")
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(items) - 1 else "\n")
        out.append(end + "}")
    elif isinstance(obj, (list, tuple)):
        if not obj:
            out.append("[]")
            return
        out.append("[\n")
        for i, v in enumerate(obj):
            out.append(pad)
            _emit(v, indent, level + 1, out)
            out.append(",\n" if i < len(obj) - 1 else "\n")
        out.append(end + "]")
    elif isinstance(obj, QubitSubset):
        _emit(obj.sorted(), indent, level, out)
    elif isinstance(obj, MeasurementSettings):
        _emit(obj.to_dict(), indent, level, out)
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def canonical_dumps(obj: Any, indent: int = 2) -> str:
    """Deterministic JSON: sorted keys, floats as ``%.17g``, complex as ``{re, im}``."""
    out: list[str] = []
    _emit(obj, indent, 0, out)
    return "".join(out) + "\n"


def digest(obj: Any) -> str:
    return hashlib.sha256(canonical_dumps(obj).encode()).hexdigest()


def loads_with_offset(data: bytes | str) -> Any:
    """``json.loads`` whose errors carry a byte offset."""
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise StateFileError(f"invalid JSON: {exc.msg}", len(text[: exc.pos].encode("utf-8"))) from None


# --- state files ---------------------------------------------------------------


@dataclass(frozen=True)
class StateFile:
    n_qubits: int
    encoding: str
    payload: Any
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> dict:
        return {
            "schema_version": self.schema_version,
            "n_qubits": self.n_qubits,
            "encoding": self.encoding,
            "payload": self.payload,
        }

    def encode(self) -> bytes:
        return canonical_dumps(self.to_json()).encode("utf-8")

    def to_density(self) -> DensityMatrix:
        try:
            if self.encoding == "dense":
                m = np.array([[complex(e["re"], e["im"]) for e in row] for row in self.payload], dtype=complex)
                return DensityMatrix(self.n_qubits, m)
            if self.encoding == "ghz-weights":
                w = GhzWeights(self.n_qubits, self.payload["plus"], self.payload["minus"])
                return make_ghz_diagonal(w)
            rho = construct(self.payload["name"], self.payload.get("params", {}))
        except (KeyError, TypeError) as exc:
            raise StateFileError(f"malformed {self.encoding} payload: {exc}") from None
        if rho.n_qubits != self.n_qubits:
            raise StateFileError(f"constructor yields {rho.n_qubits} qubits, header says {self.n_qubits}")
        return rho

    @classmethod
    def from_density(cls, rho: DensityMatrix) -> "StateFile":
        rows = [[{"re": float(z.real), "im": float(z.imag)} for z in row] for row in rho.matrix]
        return cls(rho.n_qubits, "dense", rows)


def _key_offset(text: str, key: str) -> int:
    pos = text.find(f'"{key}"')
    return len(text[: max(pos, 0)].encode("utf-8"))


def decode_state_file(data: bytes | str) -> StateFile:
    text = data.decode("utf-8") if isinstance(data, bytes) else data
    obj = loads_with_offset(text)
    if not isinstance(obj, dict):
        raise StateFileError("state file must be a JSON object", 0)
    for key in ("schema_version", "n_qubits", "encoding", "payload"):
        if key not in obj:
            raise StateFileError(f"missing field {key!r}", 0)
    if obj["schema_version"] != SCHEMA_VERSION:
        raise StateFileError(f"unsupported schema_version {obj['schema_version']!r}", _key_offset(text, "schema_version"))
    if obj["encoding"] not in ENCODINGS:
        raise StateFileError(f"unknown encoding {obj['encoding']!r}", _key_offset(text, "encoding"))
    n = obj["n_qubits"]
    if not isinstance(n, int) or isinstance(n, bool) or n < 1:
        raise StateFileError("n_qubits must be a positive integer", _key_offset(text, "n_qubits"))
    return StateFile(n, obj["encoding"], obj["payload"], obj["schema_version"])


# --- named constructors -------------------------------------------------------


def construct(name: str, params: dict) -> DensityMatrix:
    """Build a state from a constructor name and keyword parameters."""
    if name == "ghz":
        return ghz(int(params["n"]))
    if name == "mixed":
        return maximally_mixed(int(params["n"]))
    if name == "rho-r":
        return make_rho_r(int(params["n"]), float(params["r"]))
    if name == "w-mixture":
        return make_w_mixture(float(params["alpha"]))
    if name == "padded-ghz":
        return make_padded_ghz(int(params["n"]))
    if name == "noisy-ghz":
        return make_noisy_ghz(int(params["n"]), float(params["visibility"]))
    if name == "random":
        rank = params.get("rank")
        return random_density(int(params["seed"]), int(params["n"]), None if rank is None else int(rank))
    raise StateFileError(f"unknown constructor {name!r}")


_POSITIONAL = {
    "ghz": ("n",),
    "mixed": ("n",),
    "rho-r": ("n", "r"),
    "w-mixture": ("alpha",),
    "padded-ghz": ("n",),
    "noisy-ghz": ("n", "visibility"),
    "random": ("n", "seed", "rank"),
}


def parse_constructor(spec: str) -> StateFile:
    """``name:arg1:arg2`` shorthand, e.g. ``ghz:3``, ``rho-r:3:0.7``, ``random:3:42:2``."""
    name, *args = spec.split(":")
    if name not in _POSITIONAL:
        raise StateFileError(f"unknown constructor {name!r}", 0)
    keys = _POSITIONAL[name]
    required = len(keys) - (1 if name == "random" else 0)
    if not required <= len(args) <= len(keys):
        raise StateFileError(f"{name} takes {'/'.join(keys)}", len(name) + 1)
    params: dict[str, Any] = {}
    for key, raw in zip(keys, args):
        offset = spec.find(raw)
        try:
            params[key] = float(raw) if key in ("r", "alpha", "visibility") else int(raw)
        except ValueError:
            raise StateFileError(f"bad value {raw!r} for {key}", offset) from None
    try:
        rho = construct(name, params)
    except ContractViolation as exc:
        raise StateFileError(str(exc), 0) from None
    return StateFile(rho.n_qubits, "constructor", {"name": name, "params": params})


# --- certificates --------------------------------------------------------------


def certificate_document(cert: dict) -> dict:
    """Self-contained record of a failed invariant: state, operator settings, details."""
    state = cert["state"]
    rho = DensityMatrix.from_matrix(np.asarray(state))
    return {
        "kind": "falsification-certificate",
        "invariant": cert["invariant"],
        "state": StateFile.from_density(rho).to_json(),
        "operator": cert.get("operator"),
        "details": cert.get("details", {}),
    }


def write_certificate(cert: dict, path) -> str:
    text = canonical_dumps(certificate_document(cert))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(text)
    return text
