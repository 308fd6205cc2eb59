"""
Field File Module

This module provides functionality to store and load fine P1 states in the
binary field format and to sample their modulus on a uniform grid.

Layout (little-endian):
    magic b"GLF1" | version u32 | mesh level u32 | vertex count u64 | metadata length u32
    metadata: UTF-8 JSON of the given length
    payload: vertex count float64 real parts, then vertex count float64 imaginary parts
"""
import json
import logging
import os
import struct
from dataclasses import dataclass, field
from typing import Any, Dict, Optional, Tuple

import numpy as np

from ..assembly.fields import ComplexField
from ..assembly.forms import p1_space_id
from ..mesh.hierarchy import TriMesh, interpolation_matrix
from ..utils.errors import FieldFileError

logger = logging.getLogger(__name__)

MAGIC = b"GLF1"
VERSION = 1
HEADER = struct.Struct("<4sIIQI")


@dataclass
class FieldFile:
    """
    Contents of a field file.

    Attributes:
        level (int): Level exponent of the mesh carrying the field
        field (ComplexField): Nodal values on that mesh
        metadata (Dict[str, Any]): kappa, beta, ell, space, seed, energy and similar run data
    """

    level: int
    field: ComplexField
    metadata: Dict[str, Any] = field(default_factory=dict)


def write_field(path: str, u: ComplexField, level: int, metadata: Optional[Dict[str, Any]] = None) -> str:
    """
    Write a fine P1 state to a field file.

    Args:
        path (str): Output path
        u (ComplexField): State on the P1 space of the given level
        level (int): Mesh level exponent
        metadata (Dict[str, Any], optional): JSON-serializable run data

    Returns:
        str: The path written

    Raises:
        FieldFileError: If the field does not match the mesh level
    """
    vertex_count = (2 ** level + 1) ** 2
    if len(u) != vertex_count:
        raise FieldFileError(f"Field has {len(u)} values, level {level} mesh has {vertex_count} vertices")

    payload = json.dumps(metadata or {}, sort_keys=True).encode("utf-8")
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)

    try:
        with open(path, "wb") as f:
            f.write(HEADER.pack(MAGIC, VERSION, level, vertex_count, len(payload)))
            f.write(payload)
            f.write(np.ascontiguousarray(u.re, dtype="<f8").tobytes())
            f.write(np.ascontiguousarray(u.im, dtype="<f8").tobytes())
    except Exception as e:
        logger.error(f"Error writing field file {path}: {str(e)}")
        raise

    logger.info(f"Wrote field file {path} (level {level}, {vertex_count} vertices)")
    return path


def read_field(path: str) -> FieldFile:
    """
    Read a field file.

    Args:
        path (str): Input path

    Returns:
        FieldFile: Level, field and metadata

    Raises:
        FieldFileError: On a bad magic number, version or payload length
    """
    with open(path, "rb") as f:
        data = f.read()

    if len(data) < HEADER.size:
        raise FieldFileError(f"{path} is too short for a field file header")
    magic, version, level, vertex_count, meta_length = HEADER.unpack_from(data, 0)
    if magic != MAGIC:
        raise FieldFileError(f"{path} has bad magic {magic!r}")
    if version != VERSION:
        raise FieldFileError(f"{path} has unsupported version {version}")
    if vertex_count != (2 ** level + 1) ** 2:
        raise FieldFileError(f"{path} declares {vertex_count} vertices for a level {level} mesh")

    offset = HEADER.size
    expected = offset + meta_length + 2 * vertex_count * 8
    if len(data) != expected:
        raise FieldFileError(f"{path} has {len(data)} bytes, expected {expected}")

    try:
        metadata = json.loads(data[offset:offset + meta_length].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FieldFileError(f"{path} has corrupt metadata: {str(e)}") from e

    values = np.frombuffer(data, dtype="<f8", count=2 * vertex_count, offset=offset + meta_length)
    u = ComplexField(p1_space_id(level), values[:vertex_count].astype(float), values[vertex_count:].astype(float))
    logger.debug(f"Read field file {path} (level {level})")
    return FieldFile(level=level, field=u, metadata=metadata)


def sample_modulus_grid(field_file: FieldFile, n: int = 256) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Evaluate |u| on an n x n uniform grid of [0, 1]^2 including the boundary.

    Args:
        field_file (FieldFile): Stored state
        n (int): Grid points per direction, at least 2

    Returns:
        Tuple[np.ndarray, np.ndarray, np.ndarray]: Containing x and y coordinates
        and |u|, each of shape (n, n) indexed [row y, column x]
    """
    if n < 2:
        raise ValueError(f"Grid needs at least 2 points per direction, got {n}")
    mesh = TriMesh(field_file.level)
    coords = np.linspace(0.0, 1.0, n)
    xx, yy = np.meshgrid(coords, coords)
    evaluation = interpolation_matrix(mesh, np.column_stack([xx.ravel(), yy.ravel()]))
    values = evaluation @ field_file.field.values
    return xx, yy, np.abs(values).reshape(n, n)
