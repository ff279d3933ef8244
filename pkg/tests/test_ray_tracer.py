import math

import numpy as np
import pytest

from elastic_lens.errors import PreconditionError
from elastic_lens.model_core import ConstantField, DiskDomain
from elastic_lens.ray_tracer import (BoundaryDirection, PhasePoint, RayStatus,
                                     entry_at, fan_angles, hamiltonian,
                                     integrate_bicharacteristic, lens_table,
                                     read_lens_csv, scattering_relation,
                                     unit_phase, write_lens_csv)


def chord_exit(entry_x, v, R=1.0):
    """Exit point of the straight chord from entry_x along v on the circle."""
    x = np.asarray(entry_x, float)
    v = np.asarray(v, float)
    # solve |x + t v| = R for the positive root
    b = float(x @ v)
    c = float(x @ x) - R * R
    t = -b + math.sqrt(b * b - c)
    return x + t * v, t


def test_constant_disk_rays_are_chords(unit_disk):
    speed = ConstantField(1.3, dim=2)
    for s in np.linspace(0.0, 6.0, 8):
        for a in fan_angles(6):
            bd = entry_at(unit_disk, s, a)
            rec = scattering_relation(speed, unit_disk, bd, t_max=5.0, dt=1e-3)
            assert rec.status is RayStatus.EXITED
            x_exit, chord = chord_exit(bd.x, bd.v)
            assert np.allclose(rec.exit.x, x_exit, atol=1e-9)
            assert np.allclose(rec.exit.v, bd.v, atol=1e-9)
            assert rec.ell == pytest.approx(chord / 1.3, abs=1e-9)


def test_hamiltonian_conserved_along_flow(linear_radial_speed):
    start = unit_phase(linear_radial_speed, (0.9, 0.0), (-0.8, 0.6))
    path = integrate_bicharacteristic(linear_radial_speed, start,
                                      t_max=1.0, dt=1e-3)
    hs = [hamiltonian(linear_radial_speed, p.x, p.xi) for p in path]
    drift = max(abs(h - 0.5) / 0.5 for h in hs)
    assert drift <= 1e-10


def test_tangent_entry_refused(unit_disk):
    speed = ConstantField(1.0, dim=2)
    x = (1.0, 0.0)
    v = (math.sin(math.radians(1.0)), math.cos(math.radians(1.0)))
    rec = scattering_relation(speed, unit_disk, BoundaryDirection(x, v),
                              t_max=5.0, dt=1e-3)
    assert rec.status is RayStatus.TANGENT_ENTRY
    assert math.isnan(rec.ell)


def test_entry_at_points_inward(unit_disk):
    bd = entry_at(unit_disk, 1.7, 0.4)
    nu = unit_disk.normal(bd.x)
    assert float(np.dot(bd.v, nu)) < 0.0


def test_integrator_requires_unit_hamiltonian(linear_radial_speed):
    with pytest.raises(PreconditionError, match="g-unit"):
        integrate_bicharacteristic(linear_radial_speed,
                                   PhasePoint((0.5, 0.0), (1.0, 0.0)),
                                   t_max=1.0, dt=1e-3)


def test_lens_table_row_count_and_order(unit_disk):
    speed = ConstantField(1.0, dim=2)
    rows = lens_table(speed, unit_disk, n_points=4, angles=3,
                      t_max=5.0, dt=1e-2)
    assert len(rows) == 12
    ss = [r.entry_s for r in rows]
    assert ss == sorted(ss)


def test_lens_csv_roundtrip(tmp_path, unit_disk):
    speed = ConstantField(1.0, dim=2)
    rows = lens_table(speed, unit_disk, n_points=3, angles=2,
                      t_max=5.0, dt=1e-2)
    path = tmp_path / "table.csv"
    write_lens_csv(path, unit_disk, rows)
    back = read_lens_csv(path)
    assert len(back) == len(rows)
    assert back[0]["status"] == "Exited"
    assert back[0]["ell"] == pytest.approx(rows[0].record.ell, rel=1e-10)


def test_radial_ray_in_linear_profile_turns_and_exits(linear_radial_speed,
                                                      unit_disk):
    # steep entry: the ray dives, turns at r_t where p = r/c(r), and returns
    bd = entry_at(unit_disk, 0.0, 1.2)
    rec = scattering_relation(linear_radial_speed, unit_disk, bd,
                              t_max=20.0, dt=5e-4)
    assert rec.status is RayStatus.EXITED
    # exit lies on the boundary and the exit direction points outward
    assert np.linalg.norm(rec.exit.x) == pytest.approx(1.0, abs=1e-9)
    nu = unit_disk.normal(rec.exit.x)
    assert float(np.dot(rec.exit.v, nu)) > 0.0
