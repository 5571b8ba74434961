"""Per-step run records and their column layout."""

from dataclasses import dataclass, field

import numpy as np

AXES = ("x", "y", "z")


def _vec(name: str, unit: str) -> list[tuple[str, str]]:
    return [(f"{name}_{a}", unit) for a in AXES]


def _mat(name: str) -> list[tuple[str, str]]:
    return [(f"{name}_{i}{j}", "-") for i in "123" for j in "123"]


def record_columns(baselines: bool) -> list[tuple[str, str]]:
    """Column names and units of a run record, in order."""
    cols = [("t", "s")]
    cols += _vec("b", "m") + _vec("v", "m/s") + _mat("R") + _vec("Omega", "rad/s")
    cols += _vec("b_hat", "m") + _vec("v_hat", "m/s") + _vec("phi_hat", "N")
    cols += _mat("R_hat") + _vec("Omega_hat", "rad/s") + _vec("tau_hat", "N m")
    cols += _vec("phi_D", "N") + _vec("tau_D", "N m")
    cols += [("f", "N")] + _vec("tau", "N m")
    cols += _vec("e_b", "m") + _vec("e_v", "m/s") + _vec("e_phi", "N")
    cols += _mat("E_R") + _vec("e_Omega", "rad/s") + _vec("e_tau", "N m")
    cols += [("attitude_error", "rad"), ("position_tracking_error", "m")]
    cols += [("attitude_tracking_error", "rad"), ("V_t", "-"), ("V_a", "-")]
    if baselines:
        cols += _vec("leso_e_phi", "N") + _vec("leso_e_tau", "N m")
        cols += _vec("fxtsdo_e_phi", "N") + _vec("fxtsdo_e_tau", "N m")
        cols += [("leso_singular", "-"), ("leso_diverged", "-"), ("fxtsdo_diverged", "-")]
    cols += [("diverged", "-")]
    return cols


@dataclass
class SimRecord:
    """Per-step samples of one run.

    ``data`` has one row per sample and one column per entry of ``columns``.
    Indexing with a column name returns that column; indexing with a vector
    or matrix prefix such as ``"e_phi"`` or ``"R"`` returns its 3 or 9
    columns.
    """

    name: str
    columns: list[str]
    units: list[str]
    data: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.columns) != len(self.units):
            raise ValueError("columns and units differ in length")
        if self.data.ndim != 2 or self.data.shape[1] != len(self.columns):
            raise ValueError(
                f"data shape {self.data.shape} does not match {len(self.columns)} columns"
            )
        self._index = {c: i for i, c in enumerate(self.columns)}

    @property
    def headers(self) -> list[str]:
        return [f"{c} [{u}]" for c, u in zip(self.columns, self.units)]

    @property
    def rows(self) -> int:
        return self.data.shape[0]

    def __contains__(self, key: str) -> bool:
        return key in self._index or f"{key}_x" in self._index or f"{key}_11" in self._index

    def __getitem__(self, key: str) -> np.ndarray:
        if key in self._index:
            return self.data[:, self._index[key]]
        for first, width in ((f"{key}_x", 3), (f"{key}_11", 9)):
            if first in self._index:
                i = self._index[first]
                return self.data[:, i : i + width]
        raise KeyError(key)

    def norm(self, key: str) -> np.ndarray:
        """Row-wise Euclidean norm of a vector group."""
        return np.linalg.norm(self[key], axis=1)

