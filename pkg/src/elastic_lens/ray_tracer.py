"""Bicharacteristics of H = c^2 |xi|^2 / 2 and the scattering relation.

The flow is

    dx/dt  =  c^2 xi,        dxi/dt = -c |xi|^2 grad c,

integrated with classical fixed-step RK4.  On trajectories normalized to
H = 1/2 the parameter t is the metric length in c^-2 dx^2, i.e. the travel
time, and |dx/dt| = c.  Works in 2 and 3 dimensions.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import PreconditionError, ResourceError
from .model_core import Domain, SpeedField

DEFAULT_THETA_MIN = math.radians(2.0)   # tangential entries are refused
HARD_STEP_CAP = 5_000_000


@dataclass(frozen=True)
class PhasePoint:
    x: tuple
    xi: tuple
    t: float = 0.0


@dataclass(frozen=True)
class BoundaryDirection:
    """Boundary point with Euclidean-unit direction; the g-unit vector is c(x) v."""

    x: tuple
    v: tuple

    def __post_init__(self):
        n = np.linalg.norm(self.v)
        if abs(n - 1.0) > 1e-9:
            raise PreconditionError(f"direction must be Euclidean-unit, |v| = {n}")


class RayStatus(enum.Enum):
    EXITED = "Exited"
    TRAPPED = "Trapped"
    TANGENT_ENTRY = "TangentEntry"


@dataclass(frozen=True)
class LensRecord:
    entry: BoundaryDirection
    exit: BoundaryDirection | None
    ell: float
    status: RayStatus


def hamiltonian(speed: SpeedField, x, xi) -> float:
    c = speed.value(x)
    return 0.5 * c * c * float(np.dot(xi, xi))


def unit_phase(speed: SpeedField, x, v) -> PhasePoint:
    """Phase point with covector c^-1 v-hat: g-unit, H = 1/2."""
    v = np.asarray(v, dtype=float)
    v = v / np.linalg.norm(v)
    c = speed.value(x)
    return PhasePoint(tuple(np.asarray(x, float)), tuple(v / c), 0.0)


def _rhs(speed, x, xi):
    c, g = speed.value_and_grad(x)
    return (c * c) * xi, (-c * float(np.dot(xi, xi))) * g


def _rk4_step(speed, x, xi, dt):
    k1x, k1p = _rhs(speed, x, xi)
    k2x, k2p = _rhs(speed, x + 0.5 * dt * k1x, xi + 0.5 * dt * k1p)
    k3x, k3p = _rhs(speed, x + 0.5 * dt * k2x, xi + 0.5 * dt * k2p)
    k4x, k4p = _rhs(speed, x + dt * k3x, xi + dt * k3p)
    return (x + (dt / 6.0) * (k1x + 2 * k2x + 2 * k3x + k4x),
            xi + (dt / 6.0) * (k1p + 2 * k2p + 2 * k3p + k4p))


def integrate_bicharacteristic(speed: SpeedField, start: PhasePoint,
                               t_max: float, dt: float) -> list[PhasePoint]:
    """Sample the flow at steps dt up to t_max; start must satisfy H = 1/2."""
    if dt <= 0 or t_max <= 0:
        raise PreconditionError(f"dt and t_max must be positive, got {dt}, {t_max}")
    h0 = hamiltonian(speed, np.asarray(start.x), np.asarray(start.xi))
    if abs(h0 - 0.5) > 1e-10:
        raise PreconditionError(f"start must be g-unit (H = 1/2), got H = {h0}")
    n_steps = int(math.floor(t_max / dt + 1e-12))
    if n_steps > HARD_STEP_CAP:
        raise ResourceError(f"{n_steps} steps exceed the cap of {HARD_STEP_CAP}")
    x = np.asarray(start.x, dtype=float)
    xi = np.asarray(start.xi, dtype=float)
    out = [start]
    t = start.t
    for _ in range(n_steps):
        x, xi = _rk4_step(speed, x, xi, dt)
        t += dt
        out.append(PhasePoint(tuple(x), tuple(xi), t))
    return out


def scattering_relation(speed: SpeedField, domain: Domain,
                        entry: BoundaryDirection, t_max: float, dt: float,
                        theta_min: float = DEFAULT_THETA_MIN) -> LensRecord:
    """Trace one ray from a strictly inward boundary direction to its exit.

    The boundary crossing is located by bisection in the step parameter
    (to 1e-12 relative) and the covector re-evaluated at the crossing, so
    exit directions are as accurate as the flow itself.
    """
    x0 = np.asarray(entry.x, dtype=float)
    v0 = np.asarray(entry.v, dtype=float)
    nu = domain.normal(x0)
    if float(v0 @ nu) > -math.sin(theta_min):
        return LensRecord(entry, None, math.nan, RayStatus.TANGENT_ENTRY)
    if dt <= 0 or t_max <= 0:
        raise PreconditionError(f"dt and t_max must be positive, got {dt}, {t_max}")

    c0 = speed.value(x0)
    x, xi = x0, v0 / c0
    t = 0.0
    been_inside = False
    n_steps = int(math.ceil(t_max / dt))
    if n_steps > HARD_STEP_CAP:
        raise ResourceError(f"{n_steps} steps exceed the cap of {HARD_STEP_CAP}")
    for _ in range(n_steps):
        step = min(dt, t_max - t)
        if step <= 0:
            break
        x_new, xi_new = _rk4_step(speed, x, xi, step)
        b_new = domain.signed(x_new)
        if been_inside and b_new > 0.0:
            x_e, xi_e, f = _bisect_crossing(speed, domain, x, xi, step)
            ell = t + f * step
            v_out = xi_e / np.linalg.norm(xi_e)
            exit_dir = BoundaryDirection(tuple(x_e), tuple(v_out))
            return LensRecord(entry, exit_dir, ell, RayStatus.EXITED)
        if b_new < 0.0:
            been_inside = True
        x, xi, t = x_new, xi_new, t + step
    return LensRecord(entry, None, math.nan, RayStatus.TRAPPED)


def _bisect_crossing(speed, domain, x, xi, dt):
    """Fraction f of the last step where b changes sign, to 1e-12."""
    lo, hi = 0.0, 1.0
    x_hi, xi_hi = _rk4_step(speed, x, xi, dt)
    while hi - lo > 1e-12:
        mid = 0.5 * (lo + hi)
        xm, xim = _rk4_step(speed, x, xi, mid * dt)
        if domain.signed(xm) > 0.0:
            hi, x_hi, xi_hi = mid, xm, xim
        else:
            lo = mid
    # snap the exit point onto the boundary along the outward normal
    f = hi
    x_e, xi_e = x_hi, xi_hi
    b = domain.signed(x_e)
    if b != 0.0:
        n = _boundary_normal_near(domain, x_e)
        x_e = x_e - b * n
    return x_e, xi_e, f


def _boundary_normal_near(domain, x):
    """Outward normal of the boundary point nearest to x (x may be off by ~1e-12)."""
    eps = 1e-7
    n = np.zeros(len(x))
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = eps
        n[i] = (domain.signed(x + e) - domain.signed(x - e)) / (2 * eps)
    return n / np.linalg.norm(n)


@dataclass(frozen=True)
class LensTableRow:
    entry_s: float
    entry_angle: float
    record: LensRecord


def fan_angles(count: int, theta_min: float = DEFAULT_THETA_MIN):
    """count inward angles (from the inward normal), symmetric, tangent-free."""
    lim = math.pi / 2 - theta_min
    if count == 1:
        return [0.0]
    return [-lim + (k + 0.5) * 2 * lim / count for k in range(count)]


def entry_at(domain, s: float, angle: float) -> BoundaryDirection:
    """Inward boundary direction at arclength s, at `angle` from the inward normal."""
    x = domain.boundary_point(s)
    nu = domain.normal(x)
    tang = np.array([-nu[1], nu[0]])
    v = -math.cos(angle) * nu + math.sin(angle) * tang
    return BoundaryDirection(tuple(x), tuple(v / np.linalg.norm(v)))


def lens_table(speed: SpeedField, domain: Domain, n_points: int, angles,
               t_max: float, dt: float,
               theta_min: float = DEFAULT_THETA_MIN) -> list[LensTableRow]:
    """Scattering relation sampled on n_points boundary points x a fan of angles.

    `angles` is either a count (symmetric fan) or an explicit sequence of
    angles measured from the inward normal.  Rows are ordered boundary
    parameter major, angle minor.  2D domains only.
    """
    if n_points < 1:
        raise PreconditionError("need at least one boundary point")
    if isinstance(angles, int):
        if angles < 1:
            raise PreconditionError("need at least one angle")
        angles = fan_angles(angles, theta_min)
    per = domain.perimeter
    rows = []
    for i in range(n_points):
        s = per * i / n_points
        for a in angles:
            rec = scattering_relation(speed, domain, entry_at(domain, s, a),
                                      t_max, dt, theta_min)
            rows.append(LensTableRow(s, a, rec))
    return rows


def exit_angle(domain, rec: LensRecord) -> float:
    """Signed angle of the exit direction from the outward normal."""
    x = np.asarray(rec.exit.x)
    v = np.asarray(rec.exit.v)
    nu = _boundary_normal_near(domain, x)
    tang = np.array([-nu[1], nu[0]])
    return math.atan2(float(v @ tang), float(v @ nu))


def write_lens_csv(path, domain, rows: list[LensTableRow]):
    """CSV: entry_s, entry_angle, exit_s, exit_angle, ell, status."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["entry_s", "entry_angle", "exit_s", "exit_angle", "ell", "status"])
        for row in rows:
            rec = row.record
            if rec.status is RayStatus.EXITED:
                w.writerow([f"{row.entry_s:.12g}", f"{row.entry_angle:.12g}",
                            f"{domain.boundary_param(np.asarray(rec.exit.x)):.12g}",
                            f"{exit_angle(domain, rec):.12g}",
                            f"{rec.ell:.12g}", rec.status.value])
            else:
                w.writerow([f"{row.entry_s:.12g}", f"{row.entry_angle:.12g}",
                            "", "", "", rec.status.value])


def read_lens_csv(path):
    """Rows of the lens CSV as dicts with floats (empty fields -> None)."""
    out = []
    with open(path, newline="") as fh:
        for rec in csv.DictReader(fh):
            out.append({k: (float(v) if v not in ("", None) and k != "status" else v)
                        for k, v in rec.items()})
    return out
