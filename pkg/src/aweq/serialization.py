"""File formats: the AWQT tensor container, model/stat/qmodel documents, JSON reports.

Container layout (all integers little-endian)::

    b"AWQT" | u32 version=1 | u32 entry count
    per entry: u32 name length | UTF-8 name | u8 dtype (0=f32, 1=i8, 2=i32)
               | u8 ndim | ndim x u64 dims | row-major data

Models are a JSON document whose tensors live in a sibling container with
the same stem and the ``.awqt`` suffix.
"""

from __future__ import annotations

import json
import math
import struct
from pathlib import Path

import numpy as np

from .errors import (
    AWEQError,
    CorruptionError,
    FormatError,
    MissingTensorError,
    ValidationError,
)
from .layers import LinearLayer, ModelSpec
from .pipeline import QuantConfig, QuantizedLayer, QuantizedModel
from .quantizer import QuantizedMatrix, QuantParams, dequantize
from .tensor import ChannelStats

MAGIC = b"AWQT"
VERSION = 1
DTYPES = {0: np.dtype("<f4"), 1: np.dtype("i1"), 2: np.dtype("<i4")}
DTYPE_NAMES = {0: "f32", 1: "i8", 2: "i32"}
TENSOR_SUFFIX = ".awqt"


# --- tensor container -------------------------------------------------------


def _dtype_code(arr: np.ndarray) -> tuple[int, np.ndarray]:
    if arr.dtype == np.uint8:
        # unsigned codes travel as their raw bytes under the i8 tag
        return 1, arr.view(np.int8)
    if arr.dtype == np.int8:
        return 1, arr
    if np.issubdtype(arr.dtype, np.floating):
        return 0, arr.astype("<f4")
    if np.issubdtype(arr.dtype, np.integer) or arr.dtype == np.bool_:
        info = np.iinfo(np.int32)
        if arr.size and (arr.min() < info.min or arr.max() > info.max):
            raise ValidationError("integer tensor does not fit in i32")
        return 2, arr.astype("<i4")
    raise ValidationError(f"unsupported dtype {arr.dtype}")


def _entry_items(entries):
    items = entries.items() if hasattr(entries, "items") else entries
    seen = set()
    out = []
    for name, arr in items:
        if not isinstance(name, str):
            raise ValidationError(f"tensor name must be str, got {type(name).__name__}")
        if name in seen:
            raise ValidationError(f"duplicate tensor name {name!r}")
        seen.add(name)
        out.append((name, np.asarray(arr)))
    return out


def encode_container(entries) -> bytes:
    items = _entry_items(entries)
    parts = [MAGIC, struct.pack("<II", VERSION, len(items))]
    for name, arr in items:
        code, data = _dtype_code(arr)
        raw = name.encode("utf-8")
        if data.ndim > 255:
            raise ValidationError(f"{name!r}: too many dimensions")
        parts.append(struct.pack("<I", len(raw)))
        parts.append(raw)
        parts.append(struct.pack("<BB", code, data.ndim))
        parts.append(struct.pack(f"<{data.ndim}Q", *data.shape))
        parts.append(np.ascontiguousarray(data).tobytes())
    return b"".join(parts)


def decode_container(buf: bytes) -> dict[str, np.ndarray]:
    view = memoryview(buf)
    pos = 0

    def take(n: int) -> memoryview:
        nonlocal pos
        if pos + n > len(view):
            raise CorruptionError(f"container truncated at byte {pos} (needed {n} more)")
        chunk = view[pos:pos + n]
        pos += n
        return chunk

    if bytes(take(4)) != MAGIC:
        raise FormatError("bad magic, not an AWQT container")
    version, count = struct.unpack("<II", take(8))
    if version != VERSION:
        raise FormatError(f"unsupported container version {version}")
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (nlen,) = struct.unpack("<I", take(4))
        try:
            name = bytes(take(nlen)).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise FormatError("tensor name is not valid UTF-8") from exc
        code, ndim = struct.unpack("<BB", take(2))
        if code not in DTYPES:
            raise FormatError(f"{name!r}: unknown dtype code {code}")
        shape = struct.unpack(f"<{ndim}Q", take(8 * ndim))
        dt = DTYPES[code]
        nbytes = int(np.prod(shape, dtype=np.uint64)) * dt.itemsize
        data = np.frombuffer(take(nbytes), dtype=dt).reshape(shape).copy()
        if name in out:
            raise ValidationError(f"duplicate tensor name {name!r}")
        out[name] = data
    if pos != len(view):
        raise CorruptionError(f"{len(view) - pos} trailing bytes after the last entry")
    return out


def write_container(path, entries) -> None:
    Path(path).write_bytes(encode_container(entries))


def read_container(path) -> dict[str, np.ndarray]:
    return decode_container(Path(path).read_bytes())


def read_matrix(path, name: str | None = None) -> np.ndarray:
    """One 2-D tensor from a container: ``name`` or else the first entry."""
    entries = read_container(path)
    if not entries:
        raise ValidationError(f"{path}: container is empty")
    if name is None:
        name = next(iter(entries))
    if name not in entries:
        raise MissingTensorError(f"{path}: no tensor named {name!r}")
    arr = entries[name]
    if arr.ndim != 2:
        raise ValidationError(f"{path}: tensor {name!r} must be 2-D, got shape {arr.shape}")
    return arr.astype(np.float64)


# --- deterministic JSON -----------------------------------------------------


def _fmt_float(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = format(x, ".17g")
    if not any(c in s for c in ".eEn"):
        s += ".0"
    return s


def _encode(obj, indent: int, level: int) -> str:
    if obj is None:
        return "null"
    if isinstance(obj, (bool, np.bool_)):
        return "true" if obj else "false"
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return _fmt_float(float(obj))
    if isinstance(obj, str):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, np.ndarray):
        obj = obj.tolist()
    pad = "\n" + " " * (indent * (level + 1))
    end = "\n" + " " * (indent * level)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [
            f"{json.dumps(str(k), ensure_ascii=False)}: {_encode(obj[k], indent, level + 1)}"
            for k in sorted(obj, key=str)
        ]
        return "{" + pad + ("," + pad).join(items) + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list, tuple, np.ndarray)) for v in obj):
            return "[" + ", ".join(_encode(v, indent, level + 1) for v in obj) + "]"
        return "[" + pad + ("," + pad).join(_encode(v, indent, level + 1) for v in obj) + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__} as JSON")


def dumps_json(obj, indent: int = 2) -> str:
    """JSON with sorted keys and every float written with 17 significant digits."""
    return _encode(obj, indent, 0) + "\n"


def write_json(path, obj) -> None:
    Path(path).write_text(dumps_json(obj), encoding="utf-8")


def read_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: invalid JSON: {exc}") from exc


# --- models -----------------------------------------------------------------


def tensor_path(path) -> Path:
    return Path(path).with_suffix(TENSOR_SUFFIX)


def _check_keys(doc: dict, allowed: set, where: str) -> None:
    if not isinstance(doc, dict):
        raise ValidationError(f"{where}: expected a JSON object")
    extra = sorted(set(doc) - allowed)
    if extra:
        raise ValidationError(f"{where}: unknown keys {extra}")


def _lookup(tensors: dict, name, where: str) -> np.ndarray:
    if not isinstance(name, str):
        raise ValidationError(f"{where}: tensor reference must be a string")
    if name not in tensors:
        raise MissingTensorError(f"{where}: tensor {name!r} not found in container")
    return tensors[name]


_LAYER_KEYS = {"weight", "bias", "activation", "input_scale"}


def write_model_spec(path, model: ModelSpec, extra_tensors: dict | None = None) -> None:
    tensors: dict[str, np.ndarray] = {}
    layers = []
    for k, layer in enumerate(model.layers):
        doc = {"weight": f"layer{k}.weight", "bias": f"layer{k}.bias", "activation": layer.activation}
        tensors[doc["weight"]] = layer.weight
        tensors[doc["bias"]] = layer.bias
        if layer.input_scale is not None:
            doc["input_scale"] = f"layer{k}.input_scale"
            tensors[doc["input_scale"]] = layer.input_scale
        layers.append(doc)
    tensors.update(extra_tensors or {})
    write_container(tensor_path(path), tensors)
    write_json(path, {"input_dim": model.input_dim, "layers": layers})


def read_model_spec(path, tensors_path=None) -> ModelSpec:
    doc = read_json(path)
    _check_keys(doc, {"input_dim", "layers"}, str(path))
    if "input_dim" not in doc or "layers" not in doc:
        raise ValidationError(f"{path}: model needs 'input_dim' and 'layers'")
    tensors = read_container(tensors_path or tensor_path(path))
    layers = []
    for k, ld in enumerate(doc["layers"]):
        where = f"{path}: layer {k}"
        _check_keys(ld, _LAYER_KEYS, where)
        scale = ld.get("input_scale")
        try:
            layers.append(
                LinearLayer(
                    _lookup(tensors, ld.get("weight"), where).astype(np.float64),
                    _lookup(tensors, ld.get("bias"), where).astype(np.float64),
                    ld.get("activation", "none"),
                    None if scale is None else _lookup(tensors, scale, where).astype(np.float64),
                )
            )
        except AWEQError as exc:
            if isinstance(exc, ValidationError):
                raise
            raise ValidationError(f"{where}: {exc}") from exc
    return ModelSpec(int(doc["input_dim"]), layers)


# --- calibration statistics -------------------------------------------------


def write_stats(path, stats: list[ChannelStats]) -> None:
    tensors = {}
    for k, st in enumerate(stats):
        tensors[f"layer{k}.min"] = st.min
        tensors[f"layer{k}.max"] = st.max
        tensors[f"layer{k}.mean"] = st.mean
        tensors[f"layer{k}.count"] = np.array([st.count], dtype=np.int32)
    write_container(path, tensors)


def read_stats(path) -> list[ChannelStats]:
    tensors = read_container(path)
    stats = []
    k = 0
    while f"layer{k}.min" in tensors:
        where = f"{path}: layer {k}"
        lo, hi, mean = (
            _lookup(tensors, f"layer{k}.{part}", where).astype(np.float64) for part in ("min", "max", "mean")
        )
        count = int(_lookup(tensors, f"layer{k}.count", where)[0])
        if not lo.shape == hi.shape == mean.shape or np.any(lo > hi):
            raise ValidationError(f"{where}: inconsistent statistics")
        stats.append(ChannelStats(lo, hi, mean, count))
        k += 1
    if not stats:
        raise ValidationError(f"{path}: no layer statistics found")
    return stats


# --- quantized models -------------------------------------------------------

QMODEL_FORMAT = "aweq-qmodel/1"
_QLAYER_VECTORS = {
    "bias": "bias",
    "correction": "bc",
    "input_scale": "input_scale",
    "output_scale": "output_scale",
    "eq_scale": "eq_scale",
}


def write_qmodel(path, qmodel: QuantizedModel) -> None:
    tensors: dict[str, np.ndarray] = {}
    layers = []
    for k, ql in enumerate(qmodel.layers):
        doc: dict = {"activation": ql.activation}
        if ql.codes is not None:
            doc["weight_codes"] = f"layer{k}.weight.codes"
            tensors[doc["weight_codes"]] = ql.codes.astype(np.uint8)
            doc["weight_params"] = ql.weight_params.to_dict()
        else:
            doc["weight"] = f"layer{k}.weight"
            tensors[doc["weight"]] = ql.weight
        doc["act_params"] = None if ql.act_params is None else ql.act_params.to_dict()
        for attr, suffix in _QLAYER_VECTORS.items():
            vec = getattr(ql, attr)
            if vec is not None:
                doc[attr] = f"layer{k}.{suffix}"
                tensors[doc[attr]] = vec
        layers.append(doc)
    write_container(tensor_path(path), tensors)
    write_json(
        path,
        {
            "format": QMODEL_FORMAT,
            "input_dim": qmodel.input_dim,
            "config": qmodel.config.to_dict(),
            "info": qmodel.info,
            "layers": layers,
        },
    )


def read_qmodel(path) -> QuantizedModel:
    doc = read_json(path)
    _check_keys(doc, {"format", "input_dim", "config", "info", "layers"}, str(path))
    if doc.get("format") != QMODEL_FORMAT:
        raise FormatError(f"{path}: not a quantized model document")
    tensors = read_container(tensor_path(path))
    layers = []
    allowed = {"activation", "weight", "weight_codes", "weight_params", "act_params", *_QLAYER_VECTORS}
    for k, ld in enumerate(doc["layers"]):
        where = f"{path}: layer {k}"
        _check_keys(ld, allowed, where)
        kw: dict = {"activation": ld.get("activation", "none")}
        if "weight_codes" in ld:
            params = QuantParams.from_dict(ld["weight_params"])
            codes = _lookup(tensors, ld["weight_codes"], where).view(np.uint8).astype(np.int32)
            kw.update(codes=codes, weight_params=params, weight=dequantize(QuantizedMatrix(codes, params)))
        else:
            kw["weight"] = _lookup(tensors, ld.get("weight"), where).astype(np.float64)
        if ld.get("act_params") is not None:
            kw["act_params"] = QuantParams.from_dict(ld["act_params"])
        for attr in _QLAYER_VECTORS:
            if ld.get(attr) is not None:
                kw[attr] = _lookup(tensors, ld[attr], where).astype(np.float64)
        layers.append(QuantizedLayer(**kw))
    return QuantizedModel(int(doc["input_dim"]), layers, QuantConfig.from_dict(doc["config"]), doc.get("info", {}))


# --- run configuration ------------------------------------------------------

RUN_PATH_KEYS = {"model", "stats", "data", "calib", "out"}


def load_run_config(path) -> tuple[QuantConfig, dict]:
    """Quantization settings plus optional file paths from a JSON document.

    Unknown keys are rejected so a typo cannot silently fall back to a default.
    """
    doc = read_json(path)
    if not isinstance(doc, dict):
        raise ValidationError(f"{path}: expected a JSON object")
    paths = {k: doc[k] for k in RUN_PATH_KEYS if k in doc}
    settings = {k: v for k, v in doc.items() if k not in RUN_PATH_KEYS}
    try:
        cfg = QuantConfig.from_dict(settings)
    except (TypeError, AWEQError) as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    return cfg, paths
