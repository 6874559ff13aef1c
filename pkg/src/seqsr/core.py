"""Grid geometry, sequence containers, solver configuration and small vector helpers.

Array layout conventions used throughout the package:

* a frame is an array of shape ``(H, W)`` or ``(C, H, W)`` for multichannel data,
  pixels are indexed row-major so that pixel ``s`` sits at
  ``(s // W, s % W)``;
* a motion field is an array of shape ``(2, H, W)``; component 0 is the
  horizontal (column) displacement, component 1 the vertical (row) one.
  Flattening a field therefore yields the ``2n`` vector with the horizontal
  block first;
* sequences stack frames / fields along a leading time axis.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Any, Mapping

import numpy as np

__all__ = [
    "Grid",
    "ImageSeq",
    "MotionSeq",
    "NoiseSeq",
    "CoefVec",
    "SolverConfig",
    "ConfigError",
    "dot",
    "norm",
]


class ConfigError(ValueError):
    """Raised for malformed or inconsistent solver configuration."""


@dataclass(frozen=True)
class Grid:
    """Pixel grid of ``height`` rows and ``width`` columns."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 4 or self.height < 4:
            raise ValueError(
                f"grid must be at least 4x4 for cubic splines, got {self.height}x{self.width}"
            )

    @property
    def n(self) -> int:
        return self.width * self.height

    @property
    def shape(self) -> tuple[int, int]:
        return (self.height, self.width)

    def chi(self, s: int) -> tuple[int, int]:
        """(row, col) of pixel index ``s``."""
        if not 0 <= s < self.n:
            raise IndexError(s)
        return divmod(s, self.width)

    def index(self, row: int, col: int) -> int:
        return row * self.width + col

    @classmethod
    def of(cls, array: np.ndarray) -> "Grid":
        """Grid of the trailing two axes of ``array``."""
        h, w = np.shape(array)[-2:]
        return cls(width=int(w), height=int(h))


def _finite(name: str, a: np.ndarray):
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")


@dataclass(frozen=True)
class ImageSeq:
    """High-resolution sequence ``x_0 .. x_T``; ``frames`` has shape (T+1, [C,] H, W)."""

    frames: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.frames, dtype=np.float64)
        if a.ndim not in (3, 4):
            raise ValueError("frames must have shape (T+1, H, W) or (T+1, C, H, W)")
        _finite("frames", a)
        Grid.of(a)
        object.__setattr__(self, "frames", a)

    @property
    def grid(self) -> Grid:
        return Grid.of(self.frames)

    @property
    def T(self) -> int:
        return self.frames.shape[0] - 1

    def __len__(self):
        return self.frames.shape[0]

    def __getitem__(self, t):
        return self.frames[t]


@dataclass(frozen=True)
class MotionSeq:
    """Displacements ``d_1 .. d_T``; ``fields`` has shape (T, 2, H, W).

    ``fields[t - 1]`` holds ``d_t``, the motion relating ``x_{t-1}`` to ``x_t``.
    """

    fields: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.fields, dtype=np.float64)
        if a.ndim != 4 or a.shape[1] != 2:
            raise ValueError("motion fields must have shape (T, 2, H, W)")
        _finite("motion", a)
        Grid.of(a)
        object.__setattr__(self, "fields", a)

    @property
    def grid(self) -> Grid:
        return Grid.of(self.fields)

    @property
    def T(self) -> int:
        return self.fields.shape[0]

    @classmethod
    def zeros(cls, grid: Grid, T: int) -> "MotionSeq":
        return cls(np.zeros((T, 2) + grid.shape))

    def vector(self, t: int) -> np.ndarray:
        """``d_t`` as the 2n vector (horizontal block first), 1 <= t <= T."""
        return self.fields[t - 1].reshape(-1)


@dataclass(frozen=True)
class NoiseSeq:
    """Sequential-model residuals ``eps_1 .. eps_T``; shape (T, [C,] H, W)."""

    residuals: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.residuals, dtype=np.float64)
        if a.ndim not in (3, 4):
            raise ValueError("residuals must have shape (T, H, W) or (T, C, H, W)")
        _finite("residuals", a)
        object.__setattr__(self, "residuals", a)

    @property
    def T(self) -> int:
        return self.residuals.shape[0]

    @property
    def grid(self) -> Grid:
        return Grid.of(self.residuals)


@dataclass(frozen=True)
class CoefVec:
    """Dictionary coefficients of the final frame, stored in the frame layout."""

    coeffs: np.ndarray
    dictionary: str = "haar"

    def __post_init__(self):
        a = np.asarray(self.coeffs, dtype=np.float64)
        _finite("coefficients", a)
        object.__setattr__(self, "coeffs", a)

    @property
    def q(self) -> int:
        return int(self.coeffs.size)


_KERNELS = ("gaussian", "burt5")
_DICTS = ("haar", "db4")
_WEIGHTS = ("uniform", "edge")


@dataclass(frozen=True)
class SolverConfig:
    """All scalar knobs of the reconstruction.

    Defaults reproduce the published parameter table; ``xi`` is chosen so that
    the first backtracking candidate ``2 * xi`` equals ``alpha0``.
    """

    alpha1: float = 5e-1
    rho1: float = 1e2
    alpha2: float = 8e3
    rho2: float = 1e1
    alpha3: float = 1e1
    rho3: float = 1e-2
    gamma: float = 1e0
    rho: float = 1e0
    alpha0: float = 2e2
    xi: float = 1e2
    p: int = 1
    admm_iters: int = 20
    outer_iters: int = 20
    lbfgs_iters: int = 20
    lbfgs_memory: int = 10
    lbfgs_gtol: float = 1e-6
    boundary: str = "periodic"
    kernel: str = "gaussian"
    sigma: float = 1.12
    dictionary: str = "haar"
    levels: int | None = None
    weights_mode: str = "uniform"
    kappa: float = 0.1
    fd_step: float = 1e-4
    psnr_standard: bool = False

    def __post_init__(self):
        for name in ("alpha1", "alpha2", "alpha3"):
            if not getattr(self, name) >= 0:
                raise ConfigError(f"{name} must be >= 0")
        for name in ("rho1", "rho2", "rho3", "rho", "xi", "alpha0"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be > 0")
        if self.gamma < 0:
            raise ConfigError("gamma must be >= 0")
        if self.p not in (1, 2):
            raise ConfigError("p must be 1 or 2")
        for name in ("admm_iters", "outer_iters", "lbfgs_iters", "lbfgs_memory"):
            if int(getattr(self, name)) < 0:
                raise ConfigError(f"{name} must be >= 0")
        if self.boundary != "periodic":
            raise ConfigError("only periodic boundaries are supported")
        if self.kernel not in _KERNELS:
            raise ConfigError(f"kernel must be one of {_KERNELS}")
        if self.dictionary not in _DICTS:
            raise ConfigError(f"dictionary must be one of {_DICTS}")
        if self.weights_mode not in _WEIGHTS:
            raise ConfigError(f"weights_mode must be one of {_WEIGHTS}")
        if self.levels is not None and self.levels < 0:
            raise ConfigError("levels must be >= 0")
        if not self.lbfgs_gtol > 0:
            raise ConfigError("lbfgs_gtol must be > 0")
        if not self.fd_step > 0:
            raise ConfigError("fd_step must be > 0")

    def replace(self, **changes) -> "SolverConfig":
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, values: Mapping[str, Any], base: "SolverConfig | None" = None) -> "SolverConfig":
        """Build a config from a flat mapping; unknown keys are rejected."""
        names = {f.name: f for f in dataclasses.fields(cls)}
        unknown = sorted(set(values) - set(names))
        if unknown:
            raise ConfigError(f"unknown configuration keys: {', '.join(unknown)}")
        merged = (base or cls()).to_dict()
        for key, value in values.items():
            default = merged[key]
            if isinstance(default, bool):
                if not isinstance(value, bool):
                    raise ConfigError(f"{key} must be a boolean")
            elif isinstance(default, int) and key != "levels":
                if isinstance(value, bool) or not float(value).is_integer():
                    raise ConfigError(f"{key} must be an integer")
                value = int(value)
            elif isinstance(default, float):
                if isinstance(value, bool) or not isinstance(value, (int, float)):
                    raise ConfigError(f"{key} must be a number")
                value = float(value)
            merged[key] = value
        try:
            return cls(**merged)
        except TypeError as exc:  # pragma: no cover - defensive
            raise ConfigError(str(exc)) from exc


def dot(a, b) -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    b = np.asarray(b, dtype=np.float64).ravel()
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return float(np.dot(a, b))


def norm(a, kind: str = "l2") -> float:
    a = np.asarray(a, dtype=np.float64).ravel()
    if kind == "l2":
        return float(np.sqrt(np.dot(a, a)))
    if kind == "l1":
        return float(np.abs(a).sum())
    if kind == "linf":
        return float(np.abs(a).max()) if a.size else 0.0
    raise ValueError(f"unknown norm {kind!r}")
