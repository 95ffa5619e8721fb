"""JSON formats for systems, maps and reports."""
from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Union

import numpy as np

from .core import Field, FiniteNormedSpace, LinearMap, MeasureSpace, OrthonormalSystem, validate_system, ORTHO_TOL


def encode_array(a) -> Any:
    a = np.asarray(a)
    if np.iscomplexobj(a):
        return {"real": np.real(a).tolist(), "imag": np.imag(a).tolist()}
    return {"real": a.tolist()}


def decode_array(d) -> np.ndarray:
    re = np.asarray(d["real"], dtype=float)
    if "imag" in d and d["imag"] is not None:
        return re + 1j * np.asarray(d["imag"], dtype=float)
    return re


def _matrix_fields(M: np.ndarray) -> dict:
    out = {"matrix_real": np.real(M).tolist()}
    if np.iscomplexobj(M):
        out["matrix_imag"] = np.imag(M).tolist()
    return out


def _matrix_from(d: dict) -> np.ndarray:
    M = np.asarray(d["matrix_real"], dtype=float)
    if d.get("matrix_imag") is not None:
        M = M + 1j * np.asarray(d["matrix_imag"], dtype=float)
    return M


def system_to_dict(phi: OrthonormalSystem) -> dict:
    out = {"weights": phi.weights.tolist(), "field": phi.field.value}
    out.update(_matrix_fields(phi.values))
    if phi.label:
        out["label"] = phi.label
    return out


def system_from_dict(d: dict, ortho_tol: float = ORTHO_TOL) -> OrthonormalSystem:
    return validate_system(_matrix_from(d), MeasureSpace(d["weights"]), ortho_tol,
                           Field(d.get("field", "real")), d.get("label", ""))


def _p_to_json(p: float):
    return "inf" if np.isinf(p) else p


def space_to_dict(X: FiniteNormedSpace) -> dict:
    out = {"dim": X.dim, "p": _p_to_json(X.p)}
    if X.weights is not None:
        out["weights"] = X.weights.tolist()
    return out


def space_from_dict(d: dict, field: Field = Field.REAL) -> FiniteNormedSpace:
    return FiniteNormedSpace(int(d["dim"]), d.get("p", 2), d.get("weights"), field)


def map_to_dict(u: LinearMap) -> dict:
    out = {"domain": space_to_dict(u.domain), "codomain": space_to_dict(u.codomain), "field": u.field.value}
    out.update(_matrix_fields(u.matrix))
    return out


def map_from_dict(d: dict) -> LinearMap:
    field = Field(d.get("field", "real"))
    M = _matrix_from(d)
    if np.iscomplexobj(M):
        field = Field.COMPLEX
    return LinearMap(space_from_dict(d["domain"], field), space_from_dict(d["codomain"], field), M)


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return encode_array(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        v = float(obj)
        return v if np.isfinite(v) else str(v)
    if isinstance(obj, float) and not np.isfinite(obj):
        return str(obj)
    if isinstance(obj, complex):
        return {"real": obj.real, "imag": obj.imag}
    if hasattr(obj, "to_dict"):
        return to_jsonable(obj.to_dict())
    return obj


def dumps(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True)


def save_json(obj, path: Union[str, Path]) -> None:
    Path(path).write_text(dumps(obj) + "\n")


def load_json(path: Union[str, Path]) -> dict:
    return json.loads(Path(path).read_text())
