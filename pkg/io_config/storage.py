"""
Model, global-factor and beta-schedule files.

Model file layout (little-endian):
    magic "MDES", u32 format version
    u32 num_layers, experts_per_layer, top_k, hidden_dim, ffn_dim, vocab_size
    u64 seed, f64 text_router_temperature, f64 vision_router_temperature
    f64 row-major blocks: embedding, mixing, router, w_in, w_out, head

Factors and beta schedules are JSON documents with a format tag and version.
"""

import hashlib
import json
import struct
from pathlib import Path

import numpy as np

from io_config.errors import ModelFormatError
from moe_engine.errors import InvalidInputError
from moe_engine.model import ModelSpec, ModelWeights, SyntheticMoEModel
from skipping.baselines import BetaSchedule
from skipping.gmlg import GlobalFactors

MODEL_MAGIC = b"MDES"
MODEL_VERSION = 1
HEADER = struct.Struct("<4sI6IQdd")
ARTIFACT_VERSION = 1


def file_hash(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def model_to_bytes(model: SyntheticMoEModel) -> bytes:
    s = model.spec
    parts = [HEADER.pack(
        MODEL_MAGIC, MODEL_VERSION,
        s.num_layers, s.experts_per_layer, s.top_k, s.hidden_dim, s.ffn_dim, s.vocab_size,
        s.seed, s.text_router_temperature, s.vision_router_temperature,
    )]
    for _, block in model.weights.blocks():
        parts.append(np.ascontiguousarray(block, dtype="<f8").tobytes())
    return b"".join(parts)


def model_from_bytes(data: bytes) -> SyntheticMoEModel:
    if len(data) < HEADER.size:
        raise ModelFormatError(f"model file truncated: {len(data)} bytes, header needs {HEADER.size}")
    magic, version, L, M, k, d, f, V, seed, t_temp, v_temp = HEADER.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"bad magic {magic!r}, expected {MODEL_MAGIC!r}")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"unsupported model format version {version}")
    try:
        spec = ModelSpec(L, M, k, d, f, V, seed, t_temp, v_temp)
    except ValueError as e:
        raise ModelFormatError(f"invalid model header: {e}") from e

    offset = HEADER.size
    blocks = {}
    for name, shape in spec.weight_shapes().items():
        nbytes = int(np.prod(shape)) * 8
        if offset + nbytes > len(data):
            raise ModelFormatError(f"model file truncated in block {name!r}")
        blocks[name] = np.frombuffer(data, dtype="<f8", count=nbytes // 8, offset=offset).reshape(shape).astype(np.float64)
        offset += nbytes
    if offset != len(data):
        raise ModelFormatError(f"{len(data) - offset} trailing bytes after the last block")
    return SyntheticMoEModel(spec, ModelWeights(**blocks))


def save_model(model: SyntheticMoEModel, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(model_to_bytes(model))


def load_model(path: str | Path) -> SyntheticMoEModel:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"model file not found: {path}")
    return model_from_bytes(path.read_bytes())


def _write_json(document: dict, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        json.dump(document, fh, indent=2)
        fh.write("\n")


def _read_json(path: str | Path, kind: str) -> dict:
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"{kind} file not found: {path}")
    try:
        document = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ModelFormatError(f"{path}: not valid JSON ({e})") from e
    if document.get("format") != kind:
        raise ModelFormatError(f"{path}: expected format {kind!r}, got {document.get('format')!r}")
    if document.get("version") != ARTIFACT_VERSION:
        raise ModelFormatError(f"{path}: unsupported version {document.get('version')!r}")
    return document


def _layer_records(path, doc: dict, fields: tuple[str, ...]) -> dict[str, list]:
    """Per-layer columns from ``doc["layers"]``; indices must cover 0..L-1 once each."""
    records = doc.get("layers")
    if not isinstance(records, list) or not records:
        raise ModelFormatError(f"{path}: no per-layer records")
    try:
        by_index = {int(r["layer_index"]): r for r in records}
        if sorted(by_index) != list(range(len(records))):
            raise ModelFormatError(
                f"{path}: layer_index values {sorted(r['layer_index'] for r in records)} "
                f"do not cover 0..{len(records) - 1}"
            )
        return {name: [by_index[i][name] for i in range(len(records))] for name in fields}
    except (KeyError, TypeError) as e:
        raise ModelFormatError(f"{path}: malformed layer record ({e})") from None


def save_factors(factors: GlobalFactors, path: str | Path) -> None:
    _write_json({
        "format": "global-factors",
        "version": ARTIFACT_VERSION,
        "model_hash": factors.model_hash,
        "N": factors.num_samples,
        "seed": factors.seed,
        "layers": [
            {"layer_index": i, "alpha": float(a), "alpha_norm": float(a_norm)}
            for i, (a, a_norm) in enumerate(zip(factors.alpha, factors.alpha_norm))
        ],
    }, path)


def load_factors(path: str | Path) -> GlobalFactors:
    doc = _read_json(path, "global-factors")
    layers = _layer_records(path, doc, ("alpha", "alpha_norm"))
    try:
        return GlobalFactors(
            alpha=layers["alpha"],
            alpha_norm=layers["alpha_norm"],
            model_hash=doc["model_hash"],
            num_samples=doc["N"],
            seed=doc["seed"],
        )
    except KeyError as e:
        raise ModelFormatError(f"{path}: missing field {e.args[0]!r}") from None
    except InvalidInputError as e:
        raise ModelFormatError(f"{path}: {e}") from None


def save_beta(schedule: BetaSchedule, path: str | Path) -> None:
    _write_json({
        "format": "beta-schedule",
        "version": ARTIFACT_VERSION,
        "model_hash": schedule.model_hash,
        "N": schedule.num_samples,
        "seed": schedule.seed,
        "rho": schedule.rho,
        "layers": [{"layer_index": i, "beta": float(b)} for i, b in enumerate(schedule.beta)],
    }, path)


def load_beta(path: str | Path) -> BetaSchedule:
    doc = _read_json(path, "beta-schedule")
    layers = _layer_records(path, doc, ("beta",))
    try:
        return BetaSchedule(
            beta=layers["beta"],
            model_hash=doc["model_hash"],
            num_samples=doc["N"],
            seed=doc["seed"],
            rho=doc["rho"],
        )
    except KeyError as e:
        raise ModelFormatError(f"{path}: missing field {e.args[0]!r}") from None
    except InvalidInputError as e:
        raise ModelFormatError(f"{path}: {e}") from None
