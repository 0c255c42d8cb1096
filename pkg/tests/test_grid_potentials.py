import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from tdks1d.grid import (AbsorberSpec, SpatialGrid, current, density, derivative, dipole,
                         orbital_dipoles)
from tdks1d.potentials import (IonicLattice, hartree_potential, ionic_potential, ks_potential,
                               xc_potential)


def direct_hartree(n, grid, s=1.0):
    x = grid.x
    return (n[None, :] / np.sqrt((x[:, None] - x[None, :]) ** 2 + s)).sum(axis=1) * grid.dx


def test_grid_layout():
    g = SpatialGrid(2000, 0.5)
    assert g.x[0] == -500.0 and g.x[-1] == 499.5
    assert g.x[1000] == 0.0
    assert g.index_of(250.0) == 1500
    with pytest.raises(ValueError):
        SpatialGrid(7, 0.5)
    with pytest.raises(ValueError):
        SpatialGrid(8, 0.0)


def test_mirror_is_reflection_about_origin():
    g = SpatialGrid(16, 0.5)
    f = g.x ** 3 + 2.0
    m = g.mirror(f)
    np.testing.assert_allclose(m, (-g.x[1:]) ** 3 + 2.0)


def test_lattice_centers_symmetric():
    lat = IonicLattice()
    c = lat.centers
    assert len(c) == 40
    np.testing.assert_allclose(c, -c[::-1], atol=1e-14)
    assert c[1] - c[0] == pytest.approx(1.125)


def test_ionic_potential_single_ion():
    g = SpatialGrid(64, 0.5)
    v = ionic_potential(IonicLattice(1, 1.0, 1.0), g)
    np.testing.assert_allclose(v, -1.0 / np.sqrt(g.x ** 2 + 1.0))


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, 128, elements=st.floats(0.0, 2.0)))
def test_hartree_fft_matches_direct_sum(n):
    g = SpatialGrid(128, 0.5)
    fast = hartree_potential(n, g)
    slow = direct_hartree(n, g)
    assert np.max(np.abs(fast - slow)) <= 1e-10 * max(1.0, np.max(np.abs(slow)))


def test_hartree_softening_parameter():
    g = SpatialGrid(128, 0.25)
    n = np.exp(-g.x ** 2)
    np.testing.assert_allclose(hartree_potential(n, g, 2.0), direct_hartree(n, g, 2.0), atol=1e-12)


def test_xc_values():
    n = np.array([0.0, 1.0, np.pi / 3, 0.1])
    expected = [0.0, -(3 / np.pi) ** (1 / 3), -1.0, -(0.3 / np.pi) ** (1 / 3)]
    np.testing.assert_allclose(xc_potential(n), expected)
    with pytest.raises(ValueError):
        xc_potential(np.array([0.1, -1e-3]))


def test_ks_potential_parts_add_up():
    g = SpatialGrid(200, 0.5)
    lat = IonicLattice(4, 1.125, 1.0)
    n = 0.1 * np.exp(-g.x ** 2 / 10)
    v = ks_potential(lat, n, g)
    np.testing.assert_allclose(v.total, v.ionic + v.hartree + v.xc)
    np.testing.assert_allclose(v.hartree, hartree_potential(n, g))


def test_density_dipole_and_parity():
    g = SpatialGrid(400, 0.5)
    phi = np.exp(-(g.x - 3.0) ** 2 / 4)
    phi /= np.sqrt(np.sum(phi ** 2) * g.dx)
    n = density(phi[None], g)
    assert np.sum(n) * g.dx == pytest.approx(2.0)
    assert dipole(n, g) == pytest.approx(6.0, rel=1e-10)
    np.testing.assert_allclose(orbital_dipoles(phi[None], g), [6.0], rtol=1e-10)
    assert abs(dipole(np.exp(-g.x ** 2), g)) < 1e-12


def test_derivative_and_plane_wave_current():
    g = SpatialGrid(800, 0.1)
    k, A = 0.7, 0.05
    f = np.exp(1j * k * g.x)
    d = derivative(f, g.dx)
    inner = slice(1, -1)
    np.testing.assert_allclose(d[inner], 1j * np.sin(k * g.dx) / g.dx * f[inner], atol=1e-12)
    j = current(f[None], A, g)
    expected = 2 * np.sin(k * g.dx) / g.dx + A * 2.0
    np.testing.assert_allclose(j[inner], expected, rtol=1e-12)


def test_absorber_profile_and_surfaces():
    g = SpatialGrid(2000, 0.5)
    ab = AbsorberSpec()
    assert ab.start(g) == pytest.approx(350.0)
    w = ab.potential(g)
    assert np.all(w[np.abs(g.x) <= 350] == 0)
    assert w[0] == pytest.approx(ab.strength)
    assert np.all(np.diff(w[:300]) <= 0)
    mask = ab.mask(g, 0.25)
    assert np.all((mask > 0) & (mask <= 1))
    ab.check_surfaces(g, -250.0, 250.0)
    with pytest.raises(ValueError):
        ab.check_surfaces(g, 400.0)
    with pytest.raises(ValueError):
        AbsorberSpec(width_fraction=0.6)
