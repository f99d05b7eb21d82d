"""Grid-sampled scalar fields.

A :class:`Field` is the unit of data exchanged between forward models,
priors and the harness: a 2-D array of complex double-precision samples
together with its physical extent and a tag saying whether the imaginary
part carries information.  Values are immutable after construction.
"""
from __future__ import annotations

from dataclasses import dataclass, field as _dc_field

import numpy as np

VALID_TAGS = ("real", "complex")


@dataclass(frozen=True)
class Field:
    """2-D sampled field with physical extent.

    Parameters
    ----------
    data : array_like, shape (ny, nx)
        Row-major samples, stored as complex128.
    extent : (float, float)
        Physical width and height in problem-specific units.
    tag : str
        Either ``"real"`` or ``"complex"``.  A real field must have
        exactly zero imaginary part.
    """

    data: np.ndarray
    extent: tuple[float, float] = (1.0, 1.0)
    tag: str = "real"

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.complex128)
        if arr.ndim != 2:
            raise ValueError(f"field data must be 2-D, got shape {arr.shape}")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)
        if self.tag not in VALID_TAGS:
            raise ValueError(f"unknown field tag {self.tag!r}")
        ex, ey = self.extent
        if not (ex > 0 and ey > 0):
            raise ValueError("field extent components must be positive")
        object.__setattr__(self, "extent", (float(ex), float(ey)))
        if self.tag == "real" and np.any(arr.imag != 0.0):
            raise ValueError("field tagged 'real' has nonzero imaginary part")

    @property
    def nx(self) -> int:
        return self.data.shape[1]

    @property
    def ny(self) -> int:
        return self.data.shape[0]

    @property
    def values(self) -> np.ndarray:
        """The samples, as float64 for real fields, complex128 otherwise."""
        if self.tag == "real":
            return self.data.real
        return self.data

    def with_data(self, data: np.ndarray, tag: str | None = None) -> "Field":
        """Same geometry, new samples."""
        return Field(data, extent=self.extent, tag=self.tag if tag is None else tag)


def real_field(values: np.ndarray, extent=(1.0, 1.0)) -> Field:
    values = np.asarray(values, dtype=np.float64)
    return Field(values.astype(np.complex128), extent=extent, tag="real")


def complex_field(values: np.ndarray, extent=(1.0, 1.0)) -> Field:
    return Field(np.asarray(values, dtype=np.complex128), extent=extent, tag="complex")
