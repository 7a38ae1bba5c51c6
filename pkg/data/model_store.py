"""
Model file persistence

Layout (all integers little-endian):
    7 bytes   magic b"SPIXNN1"
    uint32    header length in bytes
    header    UTF-8 JSON: input_shape, num_classes, layers (descriptors), meta
    payload   parameters as float32, declaration order, row-major
"""

import json
import struct
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from config.constants import MODEL_MAGIC
from core.layers import expected_param_shapes, layer_from_descriptor
from core.network import Network
from utils.exceptions import ModelFormatError, ModelNotFoundError

_LENGTH = struct.Struct("<I")


def encode_model(net: Network, meta: Optional[dict] = None) -> bytes:
    """Serialize a network (parameters rounded to float32)"""
    header = {
        'input_shape': list(net.input_shape),
        'num_classes': net.num_classes,
        'layers': net.descriptors(),
        'meta': meta or {},
    }
    header_bytes = json.dumps(header, sort_keys=True).encode('utf-8')
    payload = b"".join(np.ascontiguousarray(p, dtype='<f4').tobytes() for p in net.parameters)
    return MODEL_MAGIC + _LENGTH.pack(len(header_bytes)) + header_bytes + payload


def decode_model(blob: bytes) -> Tuple[Network, dict]:
    """
    Rebuild a network from encode_model() bytes

    Returns:
        Tuple of (frozen network, meta dict)

    Raises:
        ModelFormatError: Bad magic, malformed header, shapes that do not
            compose, or a payload of the wrong length
    """
    if not blob.startswith(MODEL_MAGIC):
        raise ModelFormatError(f"Bad magic bytes: expected {MODEL_MAGIC!r}")

    offset = len(MODEL_MAGIC)
    if len(blob) < offset + _LENGTH.size:
        raise ModelFormatError("Truncated model header")
    (header_length,) = _LENGTH.unpack_from(blob, offset)
    offset += _LENGTH.size

    try:
        header = json.loads(blob[offset:offset + header_length].decode('utf-8'))
        layers = [layer_from_descriptor(d) for d in header['layers']]
        input_shape = tuple(header['input_shape'])
        num_classes = int(header['num_classes'])
    except (UnicodeDecodeError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise ModelFormatError(f"Malformed model header: {e}")
    offset += header_length

    net = Network(layers, input_shape, num_classes)
    shapes = expected_param_shapes(layers, input_shape)
    expected_bytes = 4 * sum(int(np.prod(s)) for s in shapes)
    if len(blob) - offset != expected_bytes:
        raise ModelFormatError(
            f"Parameter payload is {len(blob) - offset} bytes, expected {expected_bytes}"
        )

    params = []
    for shape in shapes:
        count = int(np.prod(shape))
        values = np.frombuffer(blob, dtype='<f4', count=count, offset=offset)
        params.append(values.astype(np.float64).reshape(shape))
        offset += 4 * count

    for layer, layer_input in zip(net.layers, net.shapes):
        layer_count = len(layer.param_shapes(layer_input))
        layer.params, params = params[:layer_count], params[layer_count:]
    return net.freeze(), header.get('meta', {})


def save_model(net: Network, path: str, meta: Optional[dict] = None) -> Path:
    """
    Write a model file

    Args:
        net: Network to save
        path: Destination file
        meta: Extra JSON-serializable data (e.g. the resolved training config)

    Returns:
        Path written
    """
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(net, meta))
    return path


def load_model(path: str) -> Tuple[Network, dict]:
    """
    Read a model file

    Raises:
        ModelNotFoundError: If the file does not exist
        ModelFormatError: If the file is malformed
    """
    path = Path(path)
    if not path.is_file():
        raise ModelNotFoundError(f"Model file not found: {path}")
    return decode_model(path.read_bytes())
