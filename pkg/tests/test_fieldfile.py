from pathlib import Path

import numpy as np
import pytest

from ginzburg_lod.assembly.fields import ComplexField
from ginzburg_lod.assembly.forms import p1_space_id
from ginzburg_lod.field_utils.fieldfile import HEADER, FieldFile, read_field, sample_modulus_grid, write_field
from ginzburg_lod.mesh.hierarchy import TriMesh
from ginzburg_lod.utils.errors import FieldFileError


def _random_state(rng, level):
    n = (2 ** level + 1) ** 2
    return ComplexField(p1_space_id(level), rng.normal(size=n), rng.normal(size=n))


def test_roundtrip_is_bitwise(tmp_path, rng):
    u = _random_state(rng, 3)
    metadata = {"kappa": 8.0, "space": "fine_fem", "seed": 1, "energy": 0.12853}
    path = write_field(str(tmp_path / "out" / "ref.glf"), u, 3, metadata)

    loaded = read_field(path)
    assert loaded.level == 3
    assert loaded.metadata == metadata
    assert loaded.field.space_id == "p1:3"
    np.testing.assert_array_equal(loaded.field.re, u.re)
    np.testing.assert_array_equal(loaded.field.im, u.im)


def test_write_rejects_wrong_length(tmp_path, rng):
    with pytest.raises(FieldFileError):
        write_field(str(tmp_path / "bad.glf"), _random_state(rng, 2), 3)


def test_bad_magic(tmp_path, rng):
    path = write_field(str(tmp_path / "u.glf"), _random_state(rng, 1), 1)
    data = bytearray(Path(path).read_bytes())
    data[:4] = b"XXXX"
    Path(path).write_bytes(bytes(data))
    with pytest.raises(FieldFileError):
        read_field(path)


def test_unsupported_version(tmp_path, rng):
    path = write_field(str(tmp_path / "u.glf"), _random_state(rng, 1), 1)
    data = bytearray(Path(path).read_bytes())
    data[4:8] = (2).to_bytes(4, "little")
    Path(path).write_bytes(bytes(data))
    with pytest.raises(FieldFileError):
        read_field(path)


def test_truncated_payload(tmp_path, rng):
    path = write_field(str(tmp_path / "u.glf"), _random_state(rng, 1), 1)
    data = Path(path).read_bytes()
    Path(path).write_bytes(data[:-8])
    with pytest.raises(FieldFileError):
        read_field(path)
    Path(path).write_bytes(data[: HEADER.size - 1])
    with pytest.raises(FieldFileError):
        read_field(path)


def test_modulus_grid_of_constant_state():
    level = 2
    n = (2 ** level + 1) ** 2
    state = FieldFile(level, ComplexField.constant(p1_space_id(level), n, 0.6 + 0.8j))
    xx, yy, modulus = sample_modulus_grid(state, n=17)
    assert modulus.shape == xx.shape == yy.shape == (17, 17)
    np.testing.assert_allclose(modulus, 1.0, atol=1e-14)
    assert xx[0, -1] == 1.0
    assert yy[-1, 0] == 1.0


def test_modulus_grid_at_vertices(rng):
    level = 2
    mesh = TriMesh(level)
    state = FieldFile(level, _random_state(rng, level))
    _, _, modulus = sample_modulus_grid(state, n=5)
    cols = np.rint(mesh.vertices[:, 0] * 4).astype(int)
    rows = np.rint(mesh.vertices[:, 1] * 4).astype(int)
    np.testing.assert_allclose(modulus[rows, cols], state.field.modulus(), atol=1e-12)


def test_modulus_grid_needs_two_points(rng):
    with pytest.raises(ValueError):
        sample_modulus_grid(FieldFile(1, _random_state(rng, 1)), n=1)
