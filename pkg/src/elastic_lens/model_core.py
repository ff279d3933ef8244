"""Speed fields, elastic materials, domains and grids.

Conventions used throughout the package:

* the medium with speed c(x) carries the conformal metric c^-2 dx^2;
  a vector v at x is unit in that metric iff its Euclidean norm is c(x),
  and the metric length of a curve is the Euclidean line integral of 1/c;
* all models are dimensionless (length unit = domain scale, time =
  length / speed);
* fields are immutable after construction and safe to share between
  workers.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline

from .errors import DomainError, ModelError, PreconditionError

# Width of the evaluation collar outside the nominal bounding box.
# Models are defined on the closed domain plus this collar only.
COLLAR = 0.1


def _point(x):
    p = np.asarray(x, dtype=float)
    if p.ndim != 1 or p.size not in (2, 3):
        raise PreconditionError(f"expected a 2- or 3-vector, got shape {p.shape}")
    return p


@dataclass(frozen=True)
class BoundingBox:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        lo, hi = np.asarray(self.lo, float), np.asarray(self.hi, float)
        if lo.shape != hi.shape or np.any(hi <= lo):
            raise ModelError(f"invalid bounding box {self.lo}..{self.hi}")

    @property
    def dim(self):
        return len(self.lo)

    def contains(self, x, pad=COLLAR):
        lo = np.asarray(self.lo) - pad
        hi = np.asarray(self.hi) + pad
        return bool(np.all(x >= lo) and np.all(x <= hi))

    @staticmethod
    def cube(half_width, dim=2):
        return BoundingBox((-half_width,) * dim, (half_width,) * dim)


class SpeedField:
    """Scalar positive field c(x) with gradient access.

    Subclasses implement ``_value`` and ``_gradient``; this base class owns
    the bounding-box check and the positivity contract.
    """

    bounds: BoundingBox

    def value(self, x) -> float:
        x = _point(x)
        self._check(x)
        c = float(self._value(x))
        if not c > 0.0:
            raise ModelError(f"non-positive speed {c} at {tuple(x)}")
        return c

    def gradient(self, x) -> np.ndarray:
        x = _point(x)
        self._check(x)
        return np.asarray(self._gradient(x), dtype=float)

    def value_and_grad(self, x):
        """(c, grad c) in one call; subclasses override to share work."""
        x = _point(x)
        self._check(x)
        c = float(self._value(x))
        if not c > 0.0:
            raise ModelError(f"non-positive speed {c} at {tuple(x)}")
        return c, np.asarray(self._gradient(x), dtype=float)

    def _check(self, x):
        if not self.bounds.contains(x):
            raise DomainError(f"point {tuple(x)} outside field bounds {self.bounds.lo}..{self.bounds.hi}")

    def _value(self, x):  # pragma: no cover - abstract
        raise NotImplementedError

    def _gradient(self, x):  # pragma: no cover - abstract
        raise NotImplementedError


class ConstantField(SpeedField):
    def __init__(self, c, bounds=None, dim=2):
        if not c > 0:
            raise ModelError(f"constant field must be positive, got {c}")
        self.c = float(c)
        self.bounds = bounds or BoundingBox.cube(1.0, dim)

    def _value(self, x):
        return self.c

    def _gradient(self, x):
        return np.zeros(len(x))


class LinearField(SpeedField):
    """c(x) = a + b . x  (affine)."""

    def __init__(self, a, b, bounds=None):
        self.a = float(a)
        self.b = np.asarray(b, dtype=float)
        self.bounds = bounds or BoundingBox.cube(1.0, self.b.size)
        for corner in _box_corners(self.bounds):
            if self._value(np.asarray(corner)) <= 0:
                raise ModelError(f"affine field non-positive at corner {corner}")

    def _value(self, x):
        return self.a + float(self.b @ x)

    def _gradient(self, x):
        return self.b.copy()


class RadialField(SpeedField):
    """c(r), r = |x|, from a tabulated profile or explicit callables."""

    def __init__(self, profile=None, func=None, dfunc=None, r_max=None, dim=2):
        if profile is not None:
            prof = np.asarray(profile, dtype=float)
            if prof.ndim != 2 or prof.shape[1] != 2 or prof.shape[0] < 2:
                raise ModelError("radial profile must be [[r, c], ...] with >= 2 rows")
            r, c = prof[:, 0], prof[:, 1]
            if np.any(np.diff(r) <= 0):
                raise ModelError("radial profile radii must increase")
            if np.any(c <= 0):
                bad = int(np.argmax(c <= 0))
                raise ModelError(f"radial profile node {bad} (r={r[bad]}) has non-positive speed {c[bad]}")
            spline = CubicSpline(r, c, bc_type="natural")
            self._f = lambda s: float(spline(s))
            self._df = lambda s: float(spline(s, 1))
            r_max = r_max if r_max is not None else float(r[-1])
        else:
            if func is None or dfunc is None or r_max is None:
                raise ModelError("callable radial field needs func, dfunc and r_max")
            self._f, self._df = func, dfunc
        self.r_max = float(r_max)
        self.bounds = BoundingBox.cube(self.r_max, dim)

    def _value(self, x):
        return self._f(float(np.linalg.norm(x)))

    def _gradient(self, x):
        r = float(np.linalg.norm(x))
        if r < 1e-14:
            return np.zeros(len(x))
        return self._df(r) * x / r

    def value_and_grad(self, x):
        x = _point(x)
        self._check(x)
        r = float(np.sqrt(x @ x))
        c = self._f(r)
        if not c > 0.0:
            raise ModelError(f"non-positive speed {c} at {tuple(x)}")
        if r < 1e-14:
            return c, np.zeros(len(x))
        return c, (self._df(r) / r) * x

    def radial_derivative(self, r) -> float:
        return float(self._df(float(r)))

    def profile_value(self, r) -> float:
        return float(self._f(float(r)))


class DepthField(SpeedField):
    """c depending on the last coordinate only (depth profile)."""

    def __init__(self, profile, bounds=None, dim=2):
        prof = np.asarray(profile, dtype=float)
        if prof.ndim != 2 or prof.shape[1] != 2 or prof.shape[0] < 2:
            raise ModelError("depth profile must be [[depth, c], ...] with >= 2 rows")
        if np.any(np.diff(prof[:, 0]) <= 0):
            raise ModelError("depth profile depths must increase")
        if np.any(prof[:, 1] <= 0):
            raise ModelError("depth profile speeds must be positive")
        self._spline = CubicSpline(prof[:, 0], prof[:, 1], bc_type="natural")
        self.dim = dim
        if bounds is None:
            z0, z1 = prof[0, 0], prof[-1, 0]
            w = max(abs(z0), abs(z1), 1.0)
            lo = (-w,) * (dim - 1) + (float(z0),)
            hi = (w,) * (dim - 1) + (float(z1),)
            bounds = BoundingBox(lo, hi)
        self.bounds = bounds

    def _value(self, x):
        return float(self._spline(x[-1]))

    def _gradient(self, x):
        g = np.zeros(len(x))
        g[-1] = float(self._spline(x[-1], 1))
        return g


class GridField(SpeedField):
    """2D grid-sampled field with bicubic interpolation (C^1 for the ray ODE)."""

    def __init__(self, grid: "Grid2D", values):
        vals = np.asarray(values, dtype=float)
        if vals.shape != (grid.nx, grid.ny):
            raise ModelError(f"grid values shape {vals.shape} != ({grid.nx}, {grid.ny})")
        if np.any(vals <= 0):
            i, j = np.unravel_index(int(np.argmax(vals <= 0)), vals.shape)
            raise ModelError(f"non-positive speed {vals[i, j]} at grid node ({i}, {j})")
        self.grid = grid
        self.values = vals.copy()
        self.values.setflags(write=False)
        xs = grid.origin[0] + grid.h * np.arange(grid.nx)
        ys = grid.origin[1] + grid.h * np.arange(grid.ny)
        self._spline = RectBivariateSpline(xs, ys, vals, kx=3, ky=3)
        self.bounds = BoundingBox((xs[0], ys[0]), (xs[-1], ys[-1]))

    def _check(self, x):
        # nodal data does not extend into a collar; stay inside the grid
        if not self.bounds.contains(x, pad=0.0):
            raise DomainError(f"point {tuple(x)} outside grid {self.bounds.lo}..{self.bounds.hi}")

    def _value(self, x):
        c = float(self._spline(x[0], x[1], grid=False))
        if c <= 0.0:
            i = int(round((x[0] - self.grid.origin[0]) / self.grid.h))
            j = int(round((x[1] - self.grid.origin[1]) / self.grid.h))
            raise ModelError(f"interpolated speed {c} <= 0 near grid node ({i}, {j})")
        return c

    def _gradient(self, x):
        return np.array([
            float(self._spline(x[0], x[1], dx=1, grid=False)),
            float(self._spline(x[0], x[1], dy=1, grid=False)),
        ])


@dataclass(frozen=True)
class Grid2D:
    origin: tuple
    h: float
    nx: int
    ny: int

    def __post_init__(self):
        if not self.h > 0:
            raise ModelError(f"grid spacing must be positive, got {self.h}")
        if self.nx < 8 or self.ny < 8:
            raise ModelError(f"need >= 8 nodes per axis, got ({self.nx}, {self.ny})")

    def nodes(self):
        xs = self.origin[0] + self.h * np.arange(self.nx)
        ys = self.origin[1] + self.h * np.arange(self.ny)
        return xs, ys


@dataclass(frozen=True)
class ElasticMaterial:
    """Lame parameter fields and density; speeds are derived."""

    lam: SpeedField
    mu: SpeedField
    rho: SpeedField

    def wave_speeds(self, x):
        lam, mu, rho = self.lam.value(x), self.mu.value(x), self.rho.value(x)
        return float(np.sqrt((lam + 2.0 * mu) / rho)), float(np.sqrt(mu / rho))

    def cp_field(self) -> SpeedField:
        return DerivedSpeed(self, "p")

    def cs_field(self) -> SpeedField:
        return DerivedSpeed(self, "s")


class DerivedSpeed(SpeedField):
    """c_p or c_s of a material as a SpeedField (gradient by central FD)."""

    _FD_H = 1e-6

    def __init__(self, material: ElasticMaterial, mode: str):
        if mode not in ("p", "s"):
            raise PreconditionError(f"mode must be 'p' or 's', got {mode!r}")
        self.material = material
        self.mode = mode
        self.bounds = material.mu.bounds

    def _value(self, x):
        cp, cs = self.material.wave_speeds(x)
        return cp if self.mode == "p" else cs

    def _gradient(self, x):
        g = np.zeros(len(x))
        for i in range(len(x)):
            e = np.zeros(len(x))
            e[i] = self._FD_H
            g[i] = (self._value(x + e) - self._value(x - e)) / (2 * self._FD_H)
        return g


def wave_speeds(material: ElasticMaterial, x):
    """(c_p, c_s) = (sqrt((lam+2 mu)/rho), sqrt(mu/rho)) at x."""
    return material.wave_speeds(_point(x))


def eval_speed(fld: SpeedField, x) -> float:
    return fld.value(x)


def eval_speed_grad(fld: SpeedField, x) -> np.ndarray:
    return fld.gradient(x)


# ---------------------------------------------------------------------------
# domains


class Domain:
    """Region with signed boundary function b (negative inside) and
    outward unit normal on the boundary."""

    dim: int

    def signed(self, x) -> float:  # pragma: no cover - abstract
        raise NotImplementedError

    def normal(self, x) -> np.ndarray:
        x = _point(x)
        if abs(self.signed(x)) > 1e-9:
            raise PreconditionError(f"point {tuple(x)} not on the boundary (b = {self.signed(x):.3g})")
        return self._normal(x)

    def contains(self, x) -> bool:
        return self.signed(x) < 0.0


class DiskDomain(Domain):
    """Ball/disk of radius R centered at the origin."""

    def __init__(self, radius, dim=2):
        if not radius > 0:
            raise ModelError(f"radius must be positive, got {radius}")
        self.radius = float(radius)
        self.dim = dim

    def signed(self, x):
        return float(np.linalg.norm(_point(x)) - self.radius)

    def _normal(self, x):
        return np.asarray(x) / np.linalg.norm(x)

    @property
    def perimeter(self):
        return 2 * np.pi * self.radius

    @property
    def diameter(self):
        return 2 * self.radius

    def boundary_point(self, s):
        """Boundary point at arclength s from (R, 0), counterclockwise (2D)."""
        a = s / self.radius
        return np.array([self.radius * np.cos(a), self.radius * np.sin(a)])

    def boundary_param(self, x):
        a = np.arctan2(x[1], x[0]) % (2 * np.pi)
        return float(a * self.radius)


class BoxDomain(Domain):
    """Axis-aligned box."""

    def __init__(self, lo, hi):
        self.lo = np.asarray(lo, dtype=float)
        self.hi = np.asarray(hi, dtype=float)
        if self.lo.shape != self.hi.shape or np.any(self.hi <= self.lo):
            raise ModelError(f"invalid box {lo}..{hi}")
        self.dim = self.lo.size

    def signed(self, x):
        x = _point(x)
        d = np.maximum(self.lo - x, x - self.hi)
        if np.all(d <= 0):
            return float(np.max(d))       # -distance to nearest face
        return float(np.linalg.norm(np.maximum(d, 0.0)))

    def _normal(self, x):
        d = np.maximum(self.lo - x, x - self.hi)
        i = int(np.argmax(d))
        n = np.zeros(self.dim)
        n[i] = -1.0 if (self.lo[i] - x[i]) >= (x[i] - self.hi[i]) else 1.0
        return n

    @property
    def widths(self):
        return self.hi - self.lo

    @property
    def diameter(self):
        return float(np.linalg.norm(self.widths))

    @property
    def perimeter(self):
        if self.dim != 2:
            raise UnsupportedOperation2D()
        w, h = self.widths
        return 2 * (w + h)

    def boundary_point(self, s):
        """Counterclockwise walk from lo corner: bottom, right, top, left (2D)."""
        w, h = self.widths
        s = s % self.perimeter
        if s < w:
            return np.array([self.lo[0] + s, self.lo[1]])
        s -= w
        if s < h:
            return np.array([self.hi[0], self.lo[1] + s])
        s -= h
        if s < w:
            return np.array([self.hi[0] - s, self.hi[1]])
        s -= w
        return np.array([self.lo[0], self.hi[1] - s])

    def boundary_param(self, x):
        w, h = self.widths
        eps = 1e-9
        if abs(x[1] - self.lo[1]) < eps:
            return float(x[0] - self.lo[0])
        if abs(x[0] - self.hi[0]) < eps:
            return float(w + x[1] - self.lo[1])
        if abs(x[1] - self.hi[1]) < eps:
            return float(w + h + self.hi[0] - x[0])
        if abs(x[0] - self.lo[0]) < eps:
            return float(2 * w + h + self.hi[1] - x[1])
        raise PreconditionError(f"point {tuple(x)} not on the box boundary")


class UnsupportedOperation2D(ModelError):
    def __init__(self):
        super().__init__("operation defined for 2D domains only")


def signed_distance(domain: Domain, x) -> float:
    return domain.signed(x)


def boundary_normal(domain: Domain, x) -> np.ndarray:
    return domain.normal(x)


# ---------------------------------------------------------------------------
# model files (JSON, "format": 1)

MODEL_FORMAT = 1


def _box_corners(bounds: BoundingBox):
    lo, hi = bounds.lo, bounds.hi
    if bounds.dim == 2:
        return [(lo[0], lo[1]), (lo[0], hi[1]), (hi[0], lo[1]), (hi[0], hi[1])]
    return [(a, b, c) for a in (lo[0], hi[0]) for b in (lo[1], hi[1]) for c in (lo[2], hi[2])]


def field_from_spec(spec, dim=2, extent=1.0) -> SpeedField:
    """Build a field from its JSON fragment (a bare number means constant)."""
    if isinstance(spec, (int, float)):
        spec = {"kind": "constant", "c": spec}
    kind = spec.get("kind")
    box = BoundingBox.cube(extent, dim)
    if kind == "constant":
        return ConstantField(spec["c"], bounds=box, dim=dim)
    if kind == "linear":
        return LinearField(spec["a"], spec["b"], bounds=box)
    if kind == "radial":
        return RadialField(profile=spec["profile"], dim=dim)
    if kind == "depth":
        return DepthField(profile=spec["profile"], dim=dim)
    if kind == "grid":
        origin = tuple(spec["origin"])
        values = np.asarray(spec["values"], dtype=float)
        grid = Grid2D(origin, float(spec["h"]), values.shape[0], values.shape[1])
        return GridField(grid, values)
    raise ModelError(f"unknown field kind {kind!r}")


def field_to_spec(fld: SpeedField):
    if isinstance(fld, ConstantField):
        return {"kind": "constant", "c": fld.c}
    if isinstance(fld, LinearField):
        return {"kind": "linear", "a": fld.a, "b": list(fld.b)}
    if isinstance(fld, GridField):
        return {"kind": "grid", "origin": list(fld.grid.origin), "h": fld.grid.h,
                "values": fld.values.tolist()}
    raise ModelError(f"cannot serialize field of type {type(fld).__name__}")


@dataclass(frozen=True)
class Model:
    """Deserialized model file: optional speed, material, and domain."""

    speed: SpeedField | None = None
    material: ElasticMaterial | None = None
    domain: Domain | None = None
    raw: dict = field(default_factory=dict, repr=False)

    def lens_speed(self) -> SpeedField:
        """The field lens/ray operations run on: explicit speed, else c_p."""
        if self.speed is not None:
            return self.speed
        if self.material is not None:
            return self.material.cp_field()
        raise ModelError("model defines neither a speed nor a material")


def domain_from_spec(spec) -> Domain:
    shape = spec.get("shape")
    if shape in ("disk", "ball"):
        return DiskDomain(spec["radius"], dim=3 if shape == "ball" else 2)
    if shape == "box":
        return BoxDomain(spec["lo"], spec["hi"])
    raise ModelError(f"unknown domain shape {shape!r}")


def load_model(source) -> Model:
    """Load a model from a path, JSON string, or already-parsed dict."""
    if isinstance(source, dict):
        doc = source
    else:
        text = source if str(source).lstrip().startswith("{") else open(source).read()
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ModelError(f"malformed model JSON: {exc}") from exc
    fmt = doc.get("format", MODEL_FORMAT)
    if fmt != MODEL_FORMAT:
        raise ModelError(f"unsupported model format {fmt}")

    domain = domain_from_spec(doc["domain"]) if "domain" in doc else None
    dim = domain.dim if domain is not None else 2
    extent = 1.0
    if isinstance(domain, DiskDomain):
        extent = domain.radius + COLLAR
    elif isinstance(domain, BoxDomain):
        extent = float(np.max(np.abs(np.concatenate([domain.lo, domain.hi])))) + COLLAR

    speed = field_from_spec(doc["speed"], dim=dim, extent=extent) if "speed" in doc else None
    material = None
    if "material" in doc:
        m = doc["material"]
        material = ElasticMaterial(
            lam=field_from_spec(m["lambda"], dim=dim, extent=extent),
            mu=field_from_spec(m["mu"], dim=dim, extent=extent),
            rho=field_from_spec(m["rho"], dim=dim, extent=extent),
        )
    return Model(speed=speed, material=material, domain=domain, raw=doc)
