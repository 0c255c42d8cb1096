import numpy as np
import pytest

from tdks1d import io
from tdks1d.dynamics import gaussian_packet
from tdks1d.dynamics import (ConstantField, DipoleRecorder, DriveState, KickExcitation, LaserPulse,
                             NoDrive, NormMonitor, NumericalError, PropagationConfig, Propagator,
                             cn_step, run)
from tdks1d.grid import AbsorberSpec, SpatialGrid
from tdks1d.potentials import IonicLattice

NO_ABSORBER = None


def total_dipole(ground, drive, dt, t_end, frozen=False):
    rec = DipoleRecorder()
    run(ground, drive, PropagationConfig(dt, t_end, frozen, NO_ABSORBER), [rec])
    return np.array(rec.times), np.array(rec.values).sum(axis=1)


def test_pulse_shape():
    p = LaserPulse(0.004, 0.052, 20)
    assert p.duration == pytest.approx(20 * 2 * np.pi / 0.052)
    assert p.vector_potential(0.0) == 0.0
    assert p.vector_potential(p.duration + 10.0) == 0.0
    t = np.linspace(0, p.duration, 20001)
    assert np.max(np.abs(p.vector_potential(t))) == pytest.approx(0.004, rel=1e-4)
    # E = -dA/dt
    h = 1e-4
    tt = np.array([100.0, 1234.5, 3000.0])
    fd = -(p.vector_potential(tt + h) - p.vector_potential(tt - h)) / (2 * h)
    np.testing.assert_allclose(p.electric_field(tt), fd, atol=1e-10)
    assert p.intensity() == pytest.approx((0.004 * 0.052) ** 2)


def test_drive_state_integrals():
    A0 = 0.3
    s = DriveState(0.0, A0)
    for _ in range(40):
        s = s.advance(ConstantField(A0), 0.25)
    assert s.t == pytest.approx(10.0)
    assert s.alpha == pytest.approx(A0 * 10.0)
    assert s.quiver_phase == pytest.approx(0.5 * A0 ** 2 * 10.0)


def test_ground_state_is_stationary(small_ground):
    prop = Propagator.from_ground_state(small_ground, NoDrive(), PropagationConfig(0.25, 25.0))
    n0 = prop.density
    prop.run()
    np.testing.assert_allclose(prop.density, n0, atol=1e-7)


def test_norm_conserved_per_step(small_ground):
    mon = NormMonitor()
    run(small_ground, LaserPulse(0.05, 0.15, 2), PropagationConfig(0.25, 200.0, False, NO_ABSORBER),
        [mon])
    norms = np.array(mon.norms)
    assert np.max(np.abs(np.diff(norms, axis=0))) < 1e-10


def test_absorber_only_removes_norm(small_ground):
    mon = NormMonitor(every=10)
    run(small_ground, LaserPulse(0.05, 0.15, 2), PropagationConfig(0.25, 300.0), [mon])
    total = np.array(mon.norms).sum(axis=1)
    assert np.all(np.diff(total) <= 1e-12)


def test_frozen_kick_linearity(small_ground):
    _, d1 = total_dipole(small_ground, KickExcitation(1e-4), 0.25, 300.0, frozen=True)
    _, d2 = total_dipole(small_ground, KickExcitation(2e-4), 0.25, 300.0, frozen=True)
    r1, r2 = d1 - d1[0], d2 - d2[0]
    assert np.max(np.abs(r2 - 2 * r1)) < 0.02 * np.max(np.abs(r2))


def test_dt_halving_second_order(small_ground):
    pulse = LaserPulse(0.01, 0.15, 2)
    errs = []
    for dt in (0.2, 0.1, 0.05):
        _, a = total_dipole(small_ground, pulse, dt, 90.0)
        _, b = total_dipole(small_ground, pulse, dt / 2, 90.0)
        errs.append(np.max(np.abs(a - b[::2])) / np.max(np.abs(b)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(orders > 1.8)


def test_checkpoint_resume_is_exact(small_ground, tmp_path):
    drive = LaserPulse(0.05, 0.15, 2)
    cfg = PropagationConfig(0.25, 100.0)
    ref = Propagator.from_ground_state(small_ground, drive, cfg)
    ref.run()

    first = Propagator.from_ground_state(small_ground, drive, cfg)
    first.run(n_steps=173)
    io.save_checkpoint(tmp_path / "c.ckpt", first.checkpoint())
    ckpt, _, _ = io.load_checkpoint(tmp_path / "c.ckpt")
    second = Propagator.from_ground_state(small_ground, drive, cfg)
    second.restore(ckpt)
    second.run()
    assert second.step_index == ref.step_index
    assert np.max(np.abs(second.orbitals - ref.orbitals)) < 1e-12
    assert second.t == ref.t


def test_nan_raises_numerical_error(small_ground):
    v = small_ground.potential.total.copy()
    v[10] = np.nan
    prop = Propagator(small_ground.grid, small_ground.lattice, small_ground.orbitals, NoDrive(),
                      PropagationConfig(0.25, 1.0, frozen=True), v)
    with pytest.raises(NumericalError):
        prop.run()


def test_observer_failure_has_context(small_ground):
    def broken(prop):
        raise KeyError("boom")

    prop = Propagator.from_ground_state(small_ground, NoDrive(), PropagationConfig(0.25, 1.0))
    with pytest.raises(RuntimeError, match="observer"):
        prop.run([broken])


def test_pulse_must_fit_in_run(small_ground):
    with pytest.raises(ValueError):
        run(small_ground, LaserPulse(0.01, 0.15, 2), PropagationConfig(0.25, 10.0))


def _free_moments(A, k0=0.0, t_end=40.0):
    g = SpatialGrid(4000, 0.05)
    w = 2.0
    psi = gaussian_packet(g, 0.0, w, k0)
    cfg = PropagationConfig(0.01, t_end, True, None)
    prop = Propagator(g, IonicLattice(1), psi, ConstantField(A), cfg, np.zeros(g.n_points))
    prop.run()
    rho = np.abs(prop.orbitals[0]) ** 2 * g.dx
    mean = np.sum(g.x * rho)
    var = np.sum((g.x - mean) ** 2 * rho)
    return g, w, mean, var


def test_free_packet_drift_and_spreading():
    # H = (p + A)^2 / 2: a packet at rest drifts with velocity A and spreads freely
    A, t = -0.1, 40.0
    g, w, mean, var = _free_moments(A, t_end=t)
    assert mean == pytest.approx(A * t, abs=2e-3)
    assert var == pytest.approx(0.5 * w ** 2 * (1 + t ** 2 / w ** 4), rel=1e-3)


def test_cn_step_matches_propagator_frozen(small_ground):
    v = small_ground.potential.total
    prop = Propagator.from_ground_state(small_ground, ConstantField(0.02),
                                        PropagationConfig(0.25, 0.25, True, None))
    prop.step()
    ref = cn_step(small_ground.orbitals, v, 0.02, small_ground.grid, 0.25)
    np.testing.assert_allclose(prop.orbitals, ref, atol=1e-14)


def test_absorber_leakage_over_photoelectron_band():
    # outgoing packets with k in [0.2, 2] leave < 1e-4 of their norm inside the absorber edge
    g = SpatialGrid(2000, 0.5)
    inner = np.abs(g.x) < AbsorberSpec().start(g)
    for k0 in (0.2, 0.5, 1.0, 2.0):
        w = 10.0 if k0 >= 0.5 else 30.0
        psi = gaussian_packet(g, 250.0, w, k0)
        cfg = PropagationConfig(0.25, 600.0 / k0 + 100.0, True, AbsorberSpec())
        prop = Propagator(g, IonicLattice(1), psi, NoDrive(), cfg, np.zeros(g.n_points))
        prop.run()
        left = np.sum(np.abs(prop.orbitals[0][inner]) ** 2) * g.dx
        assert left < 1e-4, (k0, left)
