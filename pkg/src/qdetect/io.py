"""JSON scenario and report formats.

Complex matrices are nested row-major lists whose entries are [re, im]
pairs; a bare real number is accepted as an entry with zero imaginary part.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .ensemble import EnsembleError, StateEnsemble
from .povm import NoiseModel, Povm, PovmError


class ScenarioError(ValueError):
    """Malformed input document; ``path`` locates the offending value."""

    def __init__(self, message: str, path: str = "$"):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass
class Scenario:
    ensemble: StateEnsemble
    noise: NoiseModel | None = None
    inconclusive: bool = False
    solver: dict = field(default_factory=dict)

    @property
    def dim(self) -> int:
        return self.ensemble.dim


def _entry(v, path):
    if isinstance(v, bool):
        raise ScenarioError("expected a number or [re, im] pair", path)
    if isinstance(v, (int, float)):
        return complex(float(v), 0.0)
    if isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v):
        return complex(float(v[0]), float(v[1]))
    raise ScenarioError("expected a number or [re, im] pair", path)


def matrix_from_json(obj, path: str = "$", dim: int | None = None) -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ScenarioError("expected a non-empty list of rows", path)
    rows = []
    for a, row in enumerate(obj):
        if not isinstance(row, list):
            raise ScenarioError("expected a row list", f"{path}[{a}]")
        rows.append([_entry(v, f"{path}[{a}][{b}]") for b, v in enumerate(row)])
    n = len(rows)
    for a, row in enumerate(rows):
        if len(row) != n:
            raise ScenarioError(f"row has {len(row)} entries, expected {n}", f"{path}[{a}]")
    if dim is not None and n != dim:
        raise ScenarioError(f"matrix is {n}x{n}, expected {dim}x{dim}", path)
    m = np.array(rows, dtype=complex)
    if not np.all(np.isfinite(m)):
        raise ScenarioError("non-finite entry", path)
    return m


def vector_from_json(obj, path: str = "$") -> np.ndarray:
    if not isinstance(obj, list) or not obj:
        raise ScenarioError("expected a non-empty list", path)
    return np.array([_entry(v, f"{path}[{i}]") for i, v in enumerate(obj)], dtype=complex)


def matrix_to_json(m) -> list:
    m = np.asarray(m, dtype=complex)
    return [[[float(z.real), float(z.imag)] for z in row] for row in m]


def _reals(obj, path, length=None):
    if not isinstance(obj, list) or any(isinstance(x, bool) or not isinstance(x, (int, float)) for x in obj):
        raise ScenarioError("expected a list of numbers", path)
    if length is not None and len(obj) != length:
        raise ScenarioError(f"expected {length} numbers, got {len(obj)}", path)
    return np.array(obj, dtype=float)


def parse_scenario(doc) -> Scenario:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    for key in ("dim", "states", "priors"):
        if key not in doc:
            raise ScenarioError(f"missing required field '{key}'")
    dim = doc["dim"]
    if isinstance(dim, bool) or not isinstance(dim, int) or dim < 1:
        raise ScenarioError("dim must be a positive integer", "$.dim")
    states_doc = doc["states"]
    if not isinstance(states_doc, list) or not states_doc:
        raise ScenarioError("states must be a non-empty list", "$.states")
    states = tuple(matrix_from_json(s, f"$.states[{i}]", dim) for i, s in enumerate(states_doc))
    m = len(states)
    priors = _reals(doc["priors"], "$.priors", m)
    weights = None
    if doc.get("weights") is not None:
        weights = _reals(doc["weights"], "$.weights", m)
    inconclusive = doc.get("inconclusive", False)
    if not isinstance(inconclusive, bool):
        raise ScenarioError("inconclusive must be true or false", "$.inconclusive")
    solver = doc.get("solver", {}) or {}
    if not isinstance(solver, dict):
        raise ScenarioError("solver must be an object", "$.solver")
    try:
        e = StateEnsemble(states, priors, weights)
    except EnsembleError as exc:
        raise ScenarioError(str(exc), f"$.{exc.field}" if exc.field else "$") from exc
    except ValueError as exc:
        raise ScenarioError(str(exc), "$.states") from exc
    noise = None
    if doc.get("noise") is not None:
        noise = noise_from_json(doc["noise"], "$.noise")
    return Scenario(e, noise, inconclusive, solver)


def noise_from_json(obj, path="$") -> NoiseModel:
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ScenarioError("noise must be a matrix of reals", path)
    rows = [_reals(r, f"{path}[{i}]") for i, r in enumerate(obj)]
    if len({len(r) for r in rows}) != 1:
        raise ScenarioError("noise rows must have equal length", path)
    try:
        return NoiseModel(np.array(rows))
    except PovmError as exc:
        raise ScenarioError(str(exc), path) from exc


def scenario_to_dict(s: Scenario) -> dict:
    e = s.ensemble
    out = {
        "dim": e.dim,
        "states": [matrix_to_json(r) for r in e.states],
        "priors": [float(p) for p in e.priors],
        "weights": [float(w) for w in e.weights],
        "inconclusive": s.inconclusive,
    }
    if s.noise is not None:
        out["noise"] = [[float(v) for v in row] for row in s.noise.matrix]
    if s.solver:
        out["solver"] = dict(s.solver)
    return out


def read_json(path):
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ScenarioError(f"cannot read file: {exc.strerror}", str(path)) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}", str(path)) from exc


def load_scenario(path) -> Scenario:
    return parse_scenario(read_json(path))


def povm_to_dict(povm: Povm) -> dict:
    return {"dim": povm.dim, "inconclusive": povm.has_inconclusive,
            "elements": [matrix_to_json(o) for o in povm.elements]}


def parse_povm(doc, path="$", check: bool = False) -> Povm:
    """POVM document, or any report containing one under ``povm``."""
    if isinstance(doc, dict) and "povm" in doc and "elements" not in doc:
        return parse_povm(doc["povm"], f"{path}.povm", check)
    if not isinstance(doc, dict) or "elements" not in doc:
        raise ScenarioError("expected an object with 'elements'", path)
    els = doc["elements"]
    if not isinstance(els, list) or not els:
        raise ScenarioError("elements must be a non-empty list", f"{path}.elements")
    mats = tuple(matrix_from_json(o, f"{path}.elements[{i}]") for i, o in enumerate(els))
    inc = doc.get("inconclusive", False)
    try:
        return Povm(mats, bool(inc), check=check)
    except (PovmError, ValueError) as exc:
        raise ScenarioError(str(exc), f"{path}.elements") from exc


def round_sig(x, digits: int):
    """Round to ``digits`` significant digits; NaN and None pass through as None."""
    if x is None:
        return None
    x = float(x)
    if math.isnan(x):
        return None
    if x == 0 or math.isinf(x):
        return x
    return round(x, digits - 1 - int(math.floor(math.log10(abs(x)))))


def clean(obj):
    """Make numpy containers JSON-safe: arrays to lists, NaN to None, complex to [re, im]."""
    if isinstance(obj, dict):
        return {str(k): clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        if np.iscomplexobj(obj):
            if obj.ndim == 2:
                return matrix_to_json(obj)
            return [clean(v) for v in obj]
        return clean(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def report_to_dict(design, digits: int = 2) -> dict:
    """Serialize a DesignReport with full-precision body and a rounded summary."""
    r = design.report
    diag = {k: v for k, v in design.diagnostics.items() if k != "Y"}
    body = {
        "criterion": design.criterion,
        "status": "optimal",
        "objective": design.objective,
        "gamma": design.gamma,
        "weights": design.weights,
        "povm": povm_to_dict(design.povm),
        "probabilities": {
            "conditional": r.conditional,
            "output_dist": r.output_dist,
            "joint": r.joint,
            "posterior": r.posterior,
            "e_joint": r.e_joint,
            "e_cond": r.e_cond,
            "e_post": r.e_post,
            "norms": r.norms,
            "degenerate_outcomes": list(r.degenerate),
            "p_incl": design.p_incl,
            "p_incl_observed": r.p_incl,
        },
        "multipliers": design.multipliers,
        "certificate": design.certificate.summary() if design.certificate else None,
        "bisection": design.trace,
        "diagnostics": diag,
        "noise": None if design.noise is None else design.noise.matrix,
    }
    body["summary"] = {
        "objective": round_sig(design.objective, digits),
        "posterior_diagonal": [round_sig(v, digits) for v in r.posterior_diagonal()],
        "p_incl": round_sig(design.p_incl, digits),
        "certificate_passed": design.certificate.passed if design.certificate else None,
    }
    return clean(body)


def write_json(obj, path=None) -> str:
    text = json.dumps(clean(obj), indent=2, sort_keys=False) + "\n"
    if path is not None:
        Path(path).write_text(text, encoding="utf-8")
    return text


def random_scenario(seed: int, dim: int = 2, count: int = 2, rank: int | None = None) -> Scenario:
    """Seeded random ensemble: Wishart density matrices and Dirichlet priors."""
    if dim < 1 or count < 1:
        raise ScenarioError("dim and count must be positive")
    rng = np.random.default_rng(seed)
    k = rank or dim
    states = []
    for _ in range(count):
        g = rng.normal(size=(dim, k)) + 1j * rng.normal(size=(dim, k))
        s = g @ g.conj().T
        states.append(s / np.trace(s).real)
    priors = rng.dirichlet(np.ones(count))
    return Scenario(StateEnsemble(tuple(states), priors))


def bundled_path(name: str) -> Path:
    return Path(__file__).resolve().parent / "data" / name
