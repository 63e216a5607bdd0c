import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.optimize import brentq

from ratbones.atlas import (
    BAND_COLORS,
    BAND_EDGES,
    CSV_HEADER,
    EntropyGrid,
    GridSpec,
    band_classify,
    band_connectivity,
    contour_extract,
    entropy_grid,
    to_svg,
)
from ratbones.entropy import normal_form_model

LOG2 = math.log(2)
SMALL = GridSpec((-3.5, -0.5), (-1.8, -0.2), (12, 10))


def synthetic_grid(h):
    """EntropyGrid carrying an arbitrary entropy field, for connectivity tests."""
    h = np.asarray(h, dtype=float)
    ny, nx = h.shape
    spec = GridSpec((0.0, 1.0), (0.0, 1.0), (nx, ny))
    mu, t = spec.axes()
    band = np.full(h.shape, -1)
    finite = np.isfinite(h)
    band[finite] = [band_classify(x) for x in h[finite]]
    nan = np.full(h.shape, np.nan)
    method = np.full(h.shape, "lap", dtype=object)
    return EntropyGrid(spec, mu, t, finite, nan, nan, h, h, band, method)


def kneading_entropy(mu, t, length=3000, digits=650):
    """-log of the smallest root in (0, 1) of the truncated kneading series.

    The critical orbit is iterated in high precision so the itinerary is exact
    over the whole prefix; the long prefix keeps spurious roots near 1 away.
    """
    with mp.workdps(digits):
        m = normal_form_model(mu, t)
        M, T = mp.mpf(mu), mp.mpf(t)

        def g(x):
            return 2 * M * x * (T * x + 2) / (M**2 * x**2 + (T * x + 2) ** 2)

        c = mp.findroot(lambda x: mp.diff(g, x), mp.mpf(m.turning_points[0]))
        peak = g(c) > g(mp.mpf(m.domain[0]))
        coeffs, theta, x = [1.0], 1.0, g(c)
        for _ in range(length):
            if abs(x - c) < mp.mpf(10) ** (20 - digits):
                break
            theta *= 1.0 if (x < c) == peak else -1.0
            coeffs.append(theta)
            x = g(x)
    D = np.polynomial.Polynomial(coeffs)
    s = np.linspace(0.5, 1.0, 200001)[:-1]
    idx = np.nonzero(np.diff(np.sign(D(s))))[0]
    return 0.0 if len(idx) == 0 else -math.log(brentq(D, s[idx[0]], s[idx[0] + 1], xtol=1e-14))


@pytest.fixture(scope="module")
def small_grid():
    return entropy_grid(SMALL)


class TestBands:
    @pytest.mark.parametrize(
        "h, band",
        [(0.0, 0), (0.05, 0), (0.1, 1), (0.3, 2), (0.4, 3), (0.4812, 4), (0.6, 5), (0.68, 6), (LOG2, 6)],
    )
    def test_examples(self, h, band):
        assert band_classify(h) == band

    @pytest.mark.parametrize("h", [-0.01, 0.7, math.nan])
    def test_out_of_range(self, h):
        with pytest.raises(ValueError):
            band_classify(h)

    @given(st.floats(0.0, LOG2))
    def test_band_contains_value(self, h):
        k = band_classify(h)
        assert BAND_EDGES[k] <= h
        assert h < BAND_EDGES[k + 1] or (k == 6 and h <= LOG2)

    def test_colour_order(self):
        assert BAND_COLORS == ("black", "blue", "magenta", "green", "cyan", "yellow", "red")


class TestConnectivity:
    def test_constant_grid_is_one_component(self):
        report = band_connectivity(synthetic_grid(np.full((20, 30), 0.3)))
        assert report["2"] == {"components": 1, "pixels": 600, "excluded": 0}
        assert all(report[str(k)]["components"] == 0 for k in range(7) if k != 2)

    def test_two_blobs(self):
        h = np.zeros((20, 30))
        h[2:6, 2:6] = 0.3
        h[12:18, 20:28] = 0.3
        assert band_connectivity(synthetic_grid(h))["2"]["components"] == 2

    def test_diagonal_touch_is_connected(self):
        h = np.zeros((10, 10))
        h[2, 2] = h[3, 3] = 0.3
        assert band_connectivity(synthetic_grid(h))["2"]["components"] == 1

    def test_pixels_near_edges_excluded(self):
        h = np.full((10, 10), 0.3)
        h[5, 5] = 0.4 + 1e-4
        report = band_connectivity(synthetic_grid(h))
        assert report["3"] == {"components": 0, "pixels": 0, "excluded": 1}


class TestContours:
    def test_constant_field_has_no_contour(self):
        x = np.linspace(0, 1, 10)
        assert contour_extract(x, x, np.ones((10, 10)), 0.5) == []

    def test_linear_field_gives_vertical_line(self):
        x = np.linspace(0, 1, 11)
        Z = np.tile(x, (11, 1))
        lines = contour_extract(x, x, Z, 0.35)
        assert len(lines) == 1
        assert lines[0][:, 0] == pytest.approx(np.full(len(lines[0]), 0.35))
        assert sorted([lines[0][0, 1], lines[0][-1, 1]]) == pytest.approx([0.0, 1.0])

    def test_radial_field_gives_closed_circle(self):
        x = np.linspace(-1, 1, 81)
        X, Y = np.meshgrid(x, x)
        lines = contour_extract(x, x, np.hypot(X, Y), 0.5)
        assert len(lines) == 1
        ring = lines[0]
        assert ring[0] == pytest.approx(ring[-1])
        assert np.hypot(ring[:, 0], ring[:, 1]) == pytest.approx(np.full(len(ring), 0.5), abs=2e-3)

    def test_nan_cells_skipped(self):
        x = np.linspace(0, 1, 11)
        Z = np.tile(x, (11, 1))
        Z[:, 3:5] = np.nan
        assert contour_extract(x, x, Z, 0.35) == []


class TestGrid:
    def test_spec_validation(self):
        with pytest.raises(ValueError):
            GridSpec((0.0, -1.0), (0.0, 1.0))
        with pytest.raises(ValueError):
            GridSpec(shape=(0, 4))

    def test_cell_centres(self):
        mu, t = GridSpec((-4.0, 0.0), (-2.0, 0.0), (4, 2)).axes()
        assert mu.tolist() == [-3.5, -2.5, -1.5, -0.5]
        assert t.tolist() == [-1.5, -0.5]

    def test_disjoint_window(self):
        spec = GridSpec((0.5, 1.0), (0.5, 1.0), (3, 3))
        assert not spec.intersects_strip()
        g = entropy_grid(spec)
        assert not g.admissible.any() and np.isnan(g.entropy).all()

    def test_values_and_bands(self, small_grid):
        g = small_grid
        assert g.admissible.any() and not g.admissible.all()
        h = g.entropy[g.admissible]
        assert np.all((h >= 0) & (h <= LOG2 + 1e-3))
        for j, i in zip(*np.nonzero(g.admissible)):
            assert g.band[j, i] == band_classify(g.entropy[j, i])
            assert g.entropy[j, i] <= g.upper_bound[j, i] + 1e-3
        assert np.all(g.band[~g.admissible] == -1)

    def test_row_entropy_largest_at_left_wedge_edge(self, small_grid):
        # in each admissible row entropy is larger near the left wedge edge
        g = small_grid
        for j in range(g.admissible.shape[0]):
            row = g.entropy[j][g.admissible[j]]
            if len(row) > 2:
                assert row[0] >= row[-1] - 1e-3

    @pytest.mark.slow
    def test_converged_cells_match_kneading_oracle(self, small_grid):
        g = small_grid
        J, I = np.nonzero(g.method == "lap")
        assert len(J) > 20
        for j, i in list(zip(J, I))[:: len(J) // 5][:5]:
            h = kneading_entropy(float(g.mu[i]), float(g.t[j]))
            assert g.entropy[j, i] == pytest.approx(h, abs=1e-3)

    def test_csv(self, small_grid):
        lines = small_grid.to_csv().splitlines()
        assert lines[0] == CSV_HEADER
        assert len(lines) == 1 + 12 * 10
        fields = [l.split(",") for l in lines[1:]]
        assert all(len(f) == 9 for f in fields)
        for f in fields:
            if f[2] == "0":
                assert f[5] == "nan" and f[7] == "-1" and f[8] == "inadmissible"
            else:
                assert int(f[7]) == band_classify(float(f[5]))

    def test_csv_round_trips_floats(self, small_grid):
        row = small_grid.to_csv().splitlines()[1].split(",")
        assert float(row[0]) == small_grid.mu[0]
        assert float(row[1]) == small_grid.t[0]

    def test_workers_do_not_change_output(self, small_grid):
        assert entropy_grid(SMALL, workers=2).to_csv() == small_grid.to_csv()

    def test_svg(self, small_grid):
        svg = to_svg(small_grid)
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        used = {BAND_COLORS[b] for b in small_grid.band.ravel() if b >= 0}
        assert all(f'fill="{c}"' in svg for c in used)
