import numpy as np
import pytest

from tdks1d.dynamics import (LaserPulse, NoDrive, PropagationConfig, Propagator, gaussian_packet,
                             run)
from tdks1d.grid import AbsorberSpec, SpatialGrid
from tdks1d.potentials import IonicLattice
from tdks1d.tsurff import (MomentumGrid, SpectrumSeries, SurfacePair, SurfaceRecorder, TimeWindow,
                           accumulate, packet_momentum_density, spectrum, windowed_spectrum)

# fine grid: the three-point dispersion error at k ~ 1 stays below 1e-4
PACKET_GRID = SpatialGrid(4000, 0.05)
PACKET = dict(x0=0.0, width=5.0, k0=0.8)


def packet_record(t_end=500.0):
    g = PACKET_GRID
    psi = gaussian_packet(g, **PACKET)
    cfg = PropagationConfig(0.05, t_end, True, AbsorberSpec(0.15, 1.0, 4))
    rec = SurfaceRecorder(SurfacePair.default(g))
    prop = Propagator(g, IonicLattice(1), psi, NoDrive(), cfg, np.zeros(g.n_points))
    prop.run([rec])
    return rec.record(cfg.dt)


@pytest.fixture(scope="module")
def packet():
    return packet_record()


@pytest.fixture(scope="module")
def driven(small_ground):
    g = small_ground.grid
    pulse = LaserPulse(0.05, 0.15, 2)
    rec = SurfaceRecorder(SurfacePair.default(g))
    run(small_ground, pulse, PropagationConfig(0.25, pulse.duration + 200.0), [rec])
    return rec.record(0.25)


def test_surface_positions():
    g = SpatialGrid(2000, 0.5)
    s = SurfacePair.default(g)
    assert s.positions == (-250.0, 250.0)
    with pytest.raises(ValueError):
        SurfacePair(g, 10.0, -10.0)


def test_free_packet_matches_analytic_gaussian(packet):
    spec = spectrum(accumulate(packet, MomentumGrid(2.0, 2e-3)))
    exact = packet_momentum_density(spec.k, PACKET["width"], PACKET["k0"])
    err = np.max(np.abs(spec.total - exact))
    assert err < 1e-3 * exact.max()
    assert np.trapezoid(spec.total, spec.k) == pytest.approx(1.0, abs=1e-3)


def test_undriven_ground_state_emits_nothing(small_ground, driven):
    g = small_ground.grid
    rec = SurfaceRecorder(SurfacePair.default(g))
    run(small_ground, NoDrive(), PropagationConfig(0.25, driven.t[-1]), [rec])
    kg = MomentumGrid(1.0, 5e-3)
    quiet = accumulate(rec.record(0.25), kg)
    loud = accumulate(driven, kg)
    scale = np.max(np.abs(loud.b_right))
    assert np.max(np.abs(quiet.b_right)) < 1e-8 * scale
    assert np.max(np.abs(quiet.b_left)) < 1e-8 * scale


def test_ledger_is_linear_in_record(driven):
    kg = MomentumGrid(1.0, 5e-3)
    c = 0.37 - 1.2j
    a = accumulate(driven, kg)
    b = accumulate(driven.scaled(c), kg)
    np.testing.assert_allclose(b.b_right, c * a.b_right, rtol=1e-12, atol=1e-18)
    np.testing.assert_allclose(b.b_left, c * a.b_left, rtol=1e-12, atol=1e-18)


def test_orbital_selection_is_consistent(driven):
    kg = MomentumGrid(1.0, 5e-3)
    full = spectrum(accumulate(driven, kg))
    part = spectrum(accumulate(driven.select([1, 3]), kg))
    np.testing.assert_allclose(part.per_orbital, full.per_orbital[[1, 3]])


def test_wide_window_recovers_full_spectrum(driven):
    kg = MomentumGrid(1.0, 5e-3)
    full = spectrum(accumulate(driven, kg))
    E, Y, _ = full.energy()
    wide = windowed_spectrum(driven, kg, [driven.t[-1] / 2], sigma=1e7)
    np.testing.assert_allclose(wide.yields[0], Y, rtol=1e-8, atol=1e-12 * Y.max())


def test_window_centers_validated(driven):
    with pytest.raises(ValueError):
        windowed_spectrum(driven, MomentumGrid(0.5, 1e-2), [driven.t[-1] + 10], 20.0)
    with pytest.raises(ValueError):
        windowed_spectrum(driven, MomentumGrid(0.5, 1e-2), [10.0], 0.0)


def test_truncated_record_equals_shorter_run():
    short = packet_record(100.0)
    cut = packet_record(150.0).truncated(100.0)
    assert len(cut.t) == len(short.t)
    np.testing.assert_array_equal(cut.phi_right, short.phi_right)
    np.testing.assert_array_equal(cut.quiver_phase, short.quiver_phase)


def test_time_of_flight(packet):
    # a packet starting at x0 reaches the right surface at t = (x_R - x0) / k
    kg = MomentumGrid(1.5, 1e-2)
    centers = np.arange(0.0, 300.0, 2.0)
    wmap = windowed_spectrum(packet, kg, centers, sigma=10.0)
    x_r = packet.x_right
    for k in (0.7, 0.8, 0.9):
        j = np.argmin(np.abs(wmap.energy - 0.5 * k * k))
        t_peak = centers[np.argmax(wmap.yields[:, j])]
        assert t_peak == pytest.approx((x_r - PACKET["x0"]) / k, abs=6.0)


def test_energy_fold_needs_symmetric_grid():
    s = SpectrumSeries(np.linspace(-1, 2, 31), np.ones((1, 31)))
    with pytest.raises(ValueError):
        s.energy()
    s = SpectrumSeries(np.linspace(-1, 1, 21), np.arange(21.0)[None, :])
    E, Y, _ = s.energy()
    assert E[0] == 0.0 and Y[0] == 10.0
    assert Y[-1] == 20.0 + 0.0


def test_time_window_peak_is_one():
    w = TimeWindow(50.0, 10.0)
    assert w(50.0) == 1.0
    assert w(60.0) == pytest.approx(np.exp(-0.5))
