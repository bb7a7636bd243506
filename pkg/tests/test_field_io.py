#!/usr/bin/env python3
# -*- coding: utf-8 -*-
"""格子データ入出力のテスト"""

import numpy as np
import pytest
from numpy.testing import assert_array_equal

from zeromode.errors import DivergenceError, FieldError
from zeromode.field_io import load_grid_data, save_grid_data
from zeromode.fields import GridData, RandomDivFree, sample
from zeromode.grid import VectorField


@pytest.fixture
def solenoidal(tiny_grid) -> VectorField:
    return sample(RandomDivFree(seed=3, amplitude=1.0, correlation_length=1.0), tiny_grid)


@pytest.mark.parametrize("fmt", ["binary", "text"])
def test_saved_field_loads_bit_for_bit(tmp_path, solenoidal, fmt):
    path = save_grid_data(solenoidal, tmp_path / f"field.{fmt}", fmt)
    loaded = load_grid_data(path, fmt)
    assert loaded.grid == solenoidal.grid
    assert_array_equal(loaded.values.real, solenoidal.values.real)


def test_binary_layout_is_header_then_component_blocks(tmp_path, tiny_grid):
    values = np.zeros((3,) + tiny_grid.shape)
    values[0, 1, 0, 0] = 1.0
    values[0, 0, 1, 0] = 2.0
    values[1, 0, 0, 0] = 3.0
    values[2, 0, 0, 1] = 4.0
    path = save_grid_data(VectorField(tiny_grid, values), tmp_path / "layout.bin")
    raw = path.read_bytes()
    assert np.frombuffer(raw[:8], dtype="<i8")[0] == 8
    assert np.frombuffer(raw[8:16], dtype="<f8")[0] == 4.0
    data = np.frombuffer(raw[16:], dtype="<f8")
    assert data.size == 3 * 8 ** 3
    block = 8 ** 3
    assert data[1] == 1.0
    assert data[8] == 2.0
    assert data[block] == 3.0
    assert data[2 * block + 64] == 4.0
    assert np.count_nonzero(data) == 4


def test_grid_data_source_reads_from_path(tmp_path, solenoidal):
    path = save_grid_data(solenoidal, tmp_path / "field.txt", "text")
    B = sample(GridData(path=str(path), format="text"), solenoidal.grid)
    assert_array_equal(B.values.real, solenoidal.values.real)


def test_missing_file(tmp_path):
    with pytest.raises(FieldError):
        load_grid_data(tmp_path / "absent.bin")


@pytest.mark.parametrize("payload", [b"", b"\x01\x02", b"x" * 100])
def test_corrupt_binary(tmp_path, payload):
    path = tmp_path / "corrupt.bin"
    path.write_bytes(payload)
    with pytest.raises(FieldError):
        load_grid_data(path)


def test_truncated_binary(tmp_path, solenoidal):
    path = save_grid_data(solenoidal, tmp_path / "field.bin")
    path.write_bytes(path.read_bytes()[:-8])
    with pytest.raises(FieldError):
        load_grid_data(path)


def test_odd_grid_header_is_rejected(tmp_path):
    path = tmp_path / "odd.txt"
    path.write_text("7 4.0\n" + "0 0 0\n" * 7 ** 3, encoding="utf-8")
    with pytest.raises(FieldError):
        load_grid_data(path, "text")


def test_unknown_format(tmp_path, solenoidal):
    with pytest.raises(FieldError):
        save_grid_data(solenoidal, tmp_path / "field.h5", "hdf5")


def test_non_solenoidal_data_is_rejected(tmp_path, tiny_grid, rng):
    noise = VectorField(tiny_grid, rng.standard_normal((3,) + tiny_grid.shape))
    path = save_grid_data(noise, tmp_path / "noise.bin")
    with pytest.raises(DivergenceError) as excinfo:
        load_grid_data(path)
    assert excinfo.value.residual > 1e-6
