"""Unit tests for the spectral field layer (app/phasefield/spectral.py)."""
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from app.phasefield.errors import InvalidGridError
from app.phasefield.spectral import (
    NEUMANN,
    PERIODIC,
    Grid,
    SpectralField,
    inner,
    integrate_product,
    inverse_laplacian_zero_mean,
    laplacian,
    moments,
    norm_l2,
    partial_derivative,
    plancherel_quadratic,
    pointwise,
    random_field,
    transform,
    translation_aligned_distance,
)

PI = math.pi


@pytest.mark.parametrize(
    "shape, kinds",
    [
        ((15,), ()),
        ((16, 16, 16, 16), ()),
        ((2,), ()),
        ((8, 8), (NEUMANN, PERIODIC)),
        ((8, 8), ("dirichlet", PERIODIC)),
        ((8, 8), (PERIODIC,)),
    ],
)
def test_grid_rejects_invalid_layouts(shape, kinds):
    with pytest.raises(InvalidGridError):
        Grid(shape, kinds)


def test_grid_defaults_and_padding():
    assert Grid.default(2).shape == (64, 64)
    assert Grid.default(3).shape == (32, 32, 16)
    film = Grid.film(8, 4)
    assert film.axis_kinds == (PERIODIC, PERIODIC, NEUMANN)
    assert film.padded.shape == (18, 18, 8)
    assert Grid((16, 16)).padded.shape == (34, 34)


def test_weights_follow_the_half_weight_convention():
    grid = Grid((8,))
    assert grid.weights[4] == 0.5
    assert grid.weights[0] == 1.0
    film = Grid.film(4, 4)
    assert film.weights[0, 0, 0] == 1.0
    assert film.weights[0, 0, 1] == 0.5


def test_constant_field_has_only_the_mean_coefficient():
    field = SpectralField.from_values(Grid((8, 8)), np.full((8, 8), 2.0))
    expected = np.zeros((8, 8))
    expected[0, 0] = 2.0
    np.testing.assert_allclose(field.spectrum, expected, atol=1e-15)
    assert field.mean == pytest.approx(2.0)


def test_single_mode_coefficient(square, cosine):
    field = cosine(square)
    a, b = field.coefficient((1, 0))
    assert a == pytest.approx(1.0, abs=1e-14)
    assert b == pytest.approx(0.0, abs=1e-14)
    others = np.array(field.spectrum)
    others[1, 0] = others[-1, 0] = 0.0
    assert np.max(np.abs(others)) < 1e-15


def test_sine_mode_lands_in_b(square):
    field = SpectralField.from_function(square, lambda x, y: np.sin(2 * PI * 2 * y))
    a, b = field.coefficient((0, 2))
    assert a == pytest.approx(0.0, abs=1e-14)
    assert b == pytest.approx(1.0, abs=1e-14)


def test_coefficient_rejects_the_nyquist_index(square):
    with pytest.raises(InvalidGridError):
        SpectralField.constant(square, 1.0).coefficient((8, 0))


@pytest.mark.parametrize("grid", [Grid((16,)), Grid((8, 12)), Grid((8, 8, 4)), Grid.film(8, 6)])
def test_round_trip_is_the_identity(grid, rng):
    samples = rng.standard_normal(grid.shape)
    there = SpectralField.from_values(grid, samples)
    back = SpectralField.from_spectrum(grid, there.spectrum)
    np.testing.assert_allclose(back.values, samples, atol=1e-12)


def test_transform_populates_views(square, rng):
    field = SpectralField.from_values(square, rng.standard_normal(square.shape))
    assert transform(field, "to-spectrum") is field
    with pytest.raises(InvalidGridError):
        transform(field, "sideways")


def test_wrong_sample_count_is_rejected(square):
    with pytest.raises(InvalidGridError):
        SpectralField.from_values(square, np.zeros(10))


def test_odd_parity_needs_a_neumann_axis(square):
    with pytest.raises(InvalidGridError):
        SpectralField(square, values=np.zeros(square.shape), parity="odd")


def test_laplacian_of_eigenfunctions(square, cosine):
    np.testing.assert_allclose(laplacian(cosine(square)).values, -4 * PI**2 * cosine(square).values, atol=1e-10)
    assert np.max(np.abs(laplacian(SpectralField.constant(square, 3.0)).values)) == 0.0


def test_laplacian_is_linear(square):
    field = SpectralField.from_function(square, lambda x, y: np.cos(2 * PI * x) + np.sin(4 * PI * y))
    expected = SpectralField.from_function(
        square, lambda x, y: -4 * PI**2 * np.cos(2 * PI * x) - 16 * PI**2 * np.sin(4 * PI * y)
    )
    np.testing.assert_allclose(laplacian(field).values, expected.values, atol=1e-10)


def test_laplacian_on_the_neumann_axis(film):
    field = SpectralField.from_function(film, lambda x, y, z: np.cos(PI * z))
    np.testing.assert_allclose(laplacian(field).values, -PI**2 * field.values, atol=1e-12)


def test_inverse_laplacian_of_a_cosine(square, cosine):
    psi = inverse_laplacian_zero_mean(cosine(square))
    np.testing.assert_allclose(psi.values, cosine(square).values / (4 * PI**2), atol=1e-14)


def test_inverse_laplacian_residual(square, rng):
    phi = random_field(square, rng, 6, mean=0.7, rms=1.0)
    psi = inverse_laplacian_zero_mean(phi)
    residual = -laplacian(psi) - phi.zero_mean()
    assert norm_l2(residual) <= 1e-10 * norm_l2(phi.zero_mean())
    assert abs(psi.mean) < 1e-15
    assert norm_l2(inverse_laplacian_zero_mean(SpectralField.constant(square, 0.0))) == 0.0


def test_moments_of_a_cosine(line, cosine):
    m2, m3, m4 = moments(cosine(line))
    assert m2 == pytest.approx(0.5, abs=1e-14)
    assert m3 == pytest.approx(0.0, abs=1e-14)
    assert m4 == pytest.approx(0.375, abs=1e-14)


def test_moments_of_a_two_mode_sum(line):
    u = SpectralField.from_function(line, lambda x: np.cos(2 * PI * x) + np.cos(4 * PI * x))
    assert moments(u)[1] == pytest.approx(0.75, abs=1e-13)
    assert moments(SpectralField.constant(line, 0.0)) == (0.0, 0.0, 0.0)


def test_moments_include_nyquist_content():
    grid = Grid((8,))
    u = SpectralField.from_function(grid, lambda x: np.cos(2 * PI * 4 * x))
    # the stored Nyquist coefficient interpolates to cos(8 pi x) exactly
    assert moments(u)[0] == pytest.approx(0.5, abs=1e-14)
    assert moments(u)[2] == pytest.approx(0.375, abs=1e-14)


def test_plancherel_quadratic_examples(line, square):
    assert plancherel_quadratic(SpectralField.constant(square, 2.0), 1.0) == pytest.approx(4.0)
    alpha, m = 3.0, 0.4
    phi = SpectralField.from_function(square, lambda x, y: m + np.cos(2 * PI * x))
    expected = alpha**2 * m**2 + 0.5 * (alpha - 4 * PI**2) ** 2
    assert plancherel_quadratic(phi, alpha) == pytest.approx(expected, rel=1e-12)
    two = SpectralField.from_function(line, lambda x: np.cos(2 * PI * x) + np.cos(4 * PI * x))
    assert plancherel_quadratic(two, 10 * PI**2) == pytest.approx(36 * PI**4, rel=1e-12)


def test_plancherel_refuses_films(film):
    with pytest.raises(InvalidGridError):
        plancherel_quadratic(SpectralField.constant(film, 1.0), 1.0)


def test_vertical_derivative_flips_parity(film):
    phi = SpectralField.from_function(film, lambda x, y, z: np.cos(PI * z))
    d3 = partial_derivative(phi, 2)
    assert d3.parity == "odd"
    assert inner(d3, d3) == pytest.approx(PI**2 / 2, rel=1e-12)
    np.testing.assert_allclose(d3.values, -PI * np.sin(PI * film.coordinates()[2]), atol=1e-12)
    d33 = partial_derivative(d3, 2)
    assert d33.parity == "even"
    np.testing.assert_allclose(d33.values, -PI**2 * phi.values, atol=1e-12)


def test_derivatives_that_vanish(square, cosine):
    assert norm_l2(partial_derivative(SpectralField.constant(square, 4.0), 0)) == 0.0
    assert norm_l2(partial_derivative(cosine(square), 1)) < 1e-14
    with pytest.raises(InvalidGridError):
        partial_derivative(cosine(square), 2)


def test_odd_field_mean_uses_the_sine_integral(film):
    # integral of sin(pi z) over (0, 1) is 2/pi
    d3 = partial_derivative(SpectralField.from_function(film, lambda x, y, z: -np.cos(PI * z) / PI), 2)
    assert d3.mean == pytest.approx(2 / PI, rel=1e-12)


def test_parseval_matches_padded_quadrature(square, rng):
    f = random_field(square, rng, 7, mean=0.3, rms=1.0)
    g = random_field(square, rng, 7, mean=-0.2, rms=2.0)
    assert inner(f, g) == pytest.approx(integrate_product(f, g), rel=1e-12, abs=1e-12)


def test_pointwise_identity_preserves_band_limited_fields(square, rng):
    f = random_field(square, rng, 7, mean=0.5, rms=1.0)
    np.testing.assert_allclose(pointwise(f, lambda v: v).spectrum, f.spectrum, atol=1e-14)


def test_arithmetic_and_numpy_scalars(square, rng):
    f = random_field(square, rng, 4, rms=1.0)
    doubled = np.float64(2.0) * f
    assert isinstance(doubled, SpectralField)
    np.testing.assert_allclose((doubled - f).values, f.values, atol=1e-14)
    assert (-f).mean == pytest.approx(-f.mean)
    assert f.shifted(1.5).mean == pytest.approx(1.5)


def test_mismatched_grids_do_not_mix(rng):
    a = random_field(Grid((8, 8)), rng, 2)
    b = random_field(Grid((16, 16)), rng, 2)
    with pytest.raises(InvalidGridError):
        a + b


def test_random_field_mean_and_rms(square, rng):
    field = random_field(square, rng, 5, mean=0.25, rms=0.5)
    assert field.mean == pytest.approx(0.25, abs=1e-15)
    assert norm_l2(field.zero_mean()) == pytest.approx(0.5, rel=1e-12)


def test_translation_aligned_distance_ignores_shifts(square, rng):
    f = random_field(square, rng, 5, rms=1.0)
    shifted = SpectralField.from_values(square, np.roll(f.values, (3, 5), axis=(0, 1)))
    assert translation_aligned_distance(f, shifted) < 1e-6
    assert translation_aligned_distance(f, -f) > 0.1


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32 - 1), band=st.integers(min_value=1, max_value=7))
def test_inner_product_is_a_norm(seed, band):
    grid = Grid((16, 16))
    f = random_field(grid, np.random.default_rng(seed), band, mean=0.1, rms=1.0)
    assert inner(f, f) >= 0.0
    assert inner(f, f) == pytest.approx(integrate_product(f, f), rel=1e-12)
