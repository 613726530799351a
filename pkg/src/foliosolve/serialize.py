"""Instance, solution, and panel files.

Instances and solutions are JSON with explicit shape headers and
row-major number arrays; floats serialize via repr and therefore
round-trip bit for bit. Panels are npz archives (dense daily matrices)
with the generator config embedded, also byte-deterministic. Formats are
documented in docs/formats.md.
"""

import io
import json
from dataclasses import asdict

import numpy as np

from .errors import ParseError, SchemaVersionError, ValidationError
from .generate import GeneratorConfig, MarketPanel
from .model import (
    ExposureConstraints,
    FactorRiskModel,
    MultiPeriodProblem,
    SinglePeriodProblem,
)
from .solver import SolveOutcome

__all__ = [
    "SCHEMA_VERSION",
    "save_instance",
    "load_instance",
    "save_solution",
    "load_solution",
    "save_panel",
    "load_panel",
]

SCHEMA_VERSION = 1


def _matrix(arr):
    arr = np.asarray(arr, dtype=np.float64)
    return {"shape": list(arr.shape), "data": [float(x) for x in arr.ravel()]}


def _vector(arr):
    return [float(x) for x in np.asarray(arr, dtype=np.float64)]


def _dump(doc, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _parse_json(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc


def _require(doc, key, path):
    if key not in doc:
        raise ParseError(f"{path}: missing required field '{key}'")
    return doc[key]


def _check_version(doc, path):
    version = _require(doc, "schema_version", path)
    if version != SCHEMA_VERSION:
        raise SchemaVersionError(
            f"{path}: schema_version {version} is not supported (expected {SCHEMA_VERSION})")


def _read_matrix(obj, path, key):
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise ParseError(f"{path}: field '{key}' must carry 'shape' and 'data'")
    shape = tuple(int(s) for s in obj["shape"])
    data = np.asarray(obj["data"], dtype=np.float64)
    expected = int(np.prod(shape)) if shape else 1
    if data.size != expected:
        raise ParseError(
            f"{path}: field '{key}' has {data.size} values for shape {list(shape)}")
    return data.reshape(shape)


def save_instance(problem, path):
    """Write a problem to JSON; lossless for binary64 values."""
    doc = {
        "schema_version": SCHEMA_VERSION,
        "gmv": float(problem.gmv),
        "n": int(problem.n),
        "exponent": float(problem.exponent),
        "lambda1": float(problem.lambda1),
        "lambda2": float(problem.lambda2),
        "lambda3": float(problem.lambda3),
        "risk": {
            "beta": _matrix(problem.risk.beta),
            "factor_cov": _matrix(problem.risk.factor_cov),
            "specific_var": _vector(problem.risk.specific_var),
        },
        "exposures": {
            "a": _matrix(problem.exposures.a),
            "lower": _vector(problem.exposures.lower),
            "upper": _vector(problem.exposures.upper),
        },
        "w0": _vector(problem.w0),
    }
    if isinstance(problem, MultiPeriodProblem):
        doc["kind"] = "multi"
        doc["horizon"] = int(problem.horizon)
        doc["alpha_t"] = _matrix(problem.alpha_t)
        doc["spread_t"] = _matrix(problem.spread_t)
        doc["impact_t"] = _matrix(problem.impact_t)
        doc["w_terminal"] = _vector(problem.w_terminal)
    elif isinstance(problem, SinglePeriodProblem):
        doc["kind"] = "single"
        doc["alpha"] = _vector(problem.alpha)
        doc["spread"] = _vector(problem.spread)
        doc["impact"] = _vector(problem.impact)
    else:
        raise ValidationError(f"cannot serialize {type(problem).__name__}")
    _dump(doc, path)


def load_instance(path):
    """Parse an instance file back into a validated problem."""
    doc = _parse_json(path)
    _check_version(doc, path)
    kind = _require(doc, "kind", path)
    try:
        risk_doc = _require(doc, "risk", path)
        expo_doc = _require(doc, "exposures", path)
        risk = FactorRiskModel(
            beta=_read_matrix(_require(risk_doc, "beta", path), path, "beta"),
            factor_cov=_read_matrix(_require(risk_doc, "factor_cov", path), path, "factor_cov"),
            specific_var=np.asarray(_require(risk_doc, "specific_var", path), dtype=np.float64),
        )
        exposures = ExposureConstraints(
            a=_read_matrix(_require(expo_doc, "a", path), path, "a"),
            lower=np.asarray(_require(expo_doc, "lower", path), dtype=np.float64),
            upper=np.asarray(_require(expo_doc, "upper", path), dtype=np.float64),
        )
        common = dict(
            gmv=_require(doc, "gmv", path),
            exponent=_require(doc, "exponent", path),
            lambda1=_require(doc, "lambda1", path),
            lambda2=_require(doc, "lambda2", path),
            lambda3=_require(doc, "lambda3", path),
            risk=risk,
            exposures=exposures,
            w0=np.asarray(_require(doc, "w0", path), dtype=np.float64),
        )
        if kind == "single":
            return SinglePeriodProblem(
                alpha=np.asarray(_require(doc, "alpha", path), dtype=np.float64),
                spread=np.asarray(_require(doc, "spread", path), dtype=np.float64),
                impact=np.asarray(_require(doc, "impact", path), dtype=np.float64),
                **common)
        if kind == "multi":
            return MultiPeriodProblem(
                horizon=_require(doc, "horizon", path),
                alpha_t=_read_matrix(_require(doc, "alpha_t", path), path, "alpha_t"),
                spread_t=_read_matrix(_require(doc, "spread_t", path), path, "spread_t"),
                impact_t=_read_matrix(_require(doc, "impact_t", path), path, "impact_t"),
                w_terminal=np.asarray(_require(doc, "w_terminal", path), dtype=np.float64),
                **common)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, (ParseError, SchemaVersionError)):
            raise
        raise ParseError(f"{path}: {exc}") from exc
    raise ParseError(f"{path}: unknown instance kind {kind!r}")


def save_solution(outcome: SolveOutcome, path):
    """Write a solve outcome (without the residual trace) to JSON."""
    weights = np.asarray(outcome.weights)
    doc = {
        "schema_version": SCHEMA_VERSION,
        "objective": float(outcome.objective),
        "residual": float(outcome.residual),
        "iterations": int(outcome.iterations),
        "elapsed": float(outcome.elapsed),
        "status": str(outcome.status),
    }
    if weights.ndim == 2:
        doc["kind"] = "multi"
        doc["trajectory"] = _matrix(weights)
    else:
        doc["kind"] = "single"
        doc["weights"] = _vector(weights)
    _dump(doc, path)


def load_solution(path) -> SolveOutcome:
    doc = _parse_json(path)
    _check_version(doc, path)
    kind = _require(doc, "kind", path)
    if kind == "multi":
        weights = _read_matrix(_require(doc, "trajectory", path), path, "trajectory")
    elif kind == "single":
        weights = np.asarray(_require(doc, "weights", path), dtype=np.float64)
    else:
        raise ParseError(f"{path}: unknown solution kind {kind!r}")
    return SolveOutcome(
        weights=weights,
        objective=float(_require(doc, "objective", path)),
        residual=float(_require(doc, "residual", path)),
        residual_trace=np.empty(0),
        iterations=int(_require(doc, "iterations", path)),
        elapsed=float(_require(doc, "elapsed", path)),
        status=str(_require(doc, "status", path)),
    )


def save_panel(panel: MarketPanel, config: GeneratorConfig, path):
    """Write a panel plus its generator config as an npz archive."""
    buf = io.BytesIO()
    np.savez(
        buf,
        schema_version=np.int64(SCHEMA_VERSION),
        dates=panel.dates,
        prices=panel.prices,
        volumes=panel.volumes,
        bid=panel.bid,
        ask=panel.ask,
        implied_vol=panel.implied_vol,
        factor_returns=panel.factor_returns,
        config_json=np.frombuffer(
            json.dumps(asdict(config), sort_keys=True).encode(), dtype=np.uint8),
    )
    with open(path, "wb") as fh:
        fh.write(buf.getvalue())


def load_panel(path):
    """Read a panel archive back into (MarketPanel, GeneratorConfig)."""
    try:
        with np.load(path) as data:
            version = int(data["schema_version"])
            if version != SCHEMA_VERSION:
                raise SchemaVersionError(
                    f"{path}: schema_version {version} is not supported")
            cfg_doc = json.loads(bytes(data["config_json"]).decode())
            panel = MarketPanel(
                dates=data["dates"], prices=data["prices"], volumes=data["volumes"],
                bid=data["bid"], ask=data["ask"], implied_vol=data["implied_vol"],
                factor_returns=data["factor_returns"])
    except (OSError, KeyError, ValueError) as exc:
        if isinstance(exc, (SchemaVersionError, ParseError)):
            raise
        raise ParseError(f"{path}: not a readable panel archive ({exc})") from exc
    return panel, GeneratorConfig(**cfg_doc)
