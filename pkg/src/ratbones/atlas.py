"""Entropy atlas over the (mu, t) normal-form parameters.

Cells are evaluated at their centres, independently, so the grid is the
same whatever the number of worker processes.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from ratbones.entropy import TOL, entropy_lap, normal_form_model
from ratbones.family import NormalFormParams, admissible_mask, normal_form_to_map, sigma_coords

LOG2 = math.log(2.0)
BAND_EDGES = (0.0, 0.1, 0.25, 0.4, 0.48, 0.55, 0.65, LOG2)
BAND_COLORS = ("black", "blue", "magenta", "green", "cyan", "yellow", "red")
BOUNDARY_TOL = 2e-3
CSV_HEADER = "mu,t,admissible,sigma1,sigma2,entropy,upper_bound,band,method"


def fmt(x: float) -> str:
    """Float as decimal with 17 significant digits."""
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "nan"
    return f"{x:.17g}"


@dataclass(frozen=True)
class GridSpec:
    mu_range: tuple = (-4.0, 0.0)
    t_range: tuple = (-4.0, 0.0)
    shape: tuple = (400, 400)  # (nx, ny)
    tol: float = TOL

    def __post_init__(self):
        (m0, m1), (t0, t1) = self.mu_range, self.t_range
        if not (m0 < m1 and t0 < t1):
            raise ValueError("grid window must be well ordered")
        if min(self.shape) < 1:
            raise ValueError("grid needs at least one cell per axis")
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")

    def axes(self):
        nx, ny = self.shape
        (m0, m1), (t0, t1) = self.mu_range, self.t_range
        mu = m0 + (np.arange(nx) + 0.5) * (m1 - m0) / nx
        t = t0 + (np.arange(ny) + 0.5) * (t1 - t0) / ny
        return mu, t

    def intersects_strip(self) -> bool:
        mu, t = self.axes()
        M, T = np.meshgrid(mu, t)
        return bool(admissible_mask(M, T).any())


@dataclass
class EntropyGrid:
    spec: GridSpec
    mu: np.ndarray
    t: np.ndarray
    admissible: np.ndarray  # (ny, nx) bool
    sigma1: np.ndarray
    sigma2: np.ndarray
    entropy: np.ndarray
    upper_bound: np.ndarray
    band: np.ndarray  # -1 where not admissible
    method: np.ndarray  # object array of strings
    meta: dict = field(default_factory=dict)

    def to_csv(self) -> str:
        out = io.StringIO()
        out.write(CSV_HEADER + "\n")
        ny, nx = self.admissible.shape
        for j in range(ny):
            for i in range(nx):
                adm = bool(self.admissible[j, i])
                row = [
                    fmt(float(self.mu[i])),
                    fmt(float(self.t[j])),
                    "1" if adm else "0",
                    fmt(float(self.sigma1[j, i])),
                    fmt(float(self.sigma2[j, i])),
                    fmt(float(self.entropy[j, i])),
                    fmt(float(self.upper_bound[j, i])),
                    str(int(self.band[j, i])),
                    str(self.method[j, i]),
                ]
                out.write(",".join(row) + "\n")
        return out.getvalue()


def band_classify(h: float, tol: float = TOL) -> int:
    """Band index of an entropy value; the last band is closed at log 2."""
    if not (-tol <= h <= LOG2 + tol):
        raise ValueError(f"entropy {h} outside [0, log 2 + {tol}]")
    for k in range(1, 7):
        if h < BAND_EDGES[k]:
            return k - 1
    return 6


def _cell(mu: float, t: float, tol: float):
    """(sigma1, sigma2, value, upper, method) for one admissible cell."""
    try:
        f = normal_form_to_map(NormalFormParams(mu, t)).map
        s = sigma_coords(f)
        est = entropy_lap(normal_form_model(mu, t), tol)
        method = est.method if est.converged else est.method + ":unconverged"
        return s.sigma1, s.sigma2, est.value, est.upper_bound, method
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return math.nan, math.nan, math.nan, math.nan, "error:" + type(exc).__name__


def _rows(args):
    mu, t_rows, adm_rows, tol = args
    out = []
    for t, adm in zip(t_rows, adm_rows):
        out.append([_cell(float(m), float(t), tol) if a else None for m, a in zip(mu, adm)])
    return out


def entropy_grid(spec: GridSpec, workers: int = 1) -> EntropyGrid:
    mu, t = spec.axes()
    M, T = np.meshgrid(mu, t)
    adm = admissible_mask(M, T)
    ny, nx = adm.shape
    chunk = max(1, ny // (4 * max(workers, 1)))
    tasks = [(mu, t[j : j + chunk], adm[j : j + chunk], spec.tol) for j in range(0, ny, chunk)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_rows, tasks))
    else:
        parts = [_rows(task) for task in tasks]
    rows = [r for part in parts for r in part]

    s1 = np.full((ny, nx), np.nan)
    s2 = np.full((ny, nx), np.nan)
    h = np.full((ny, nx), np.nan)
    ub = np.full((ny, nx), np.nan)
    band = np.full((ny, nx), -1, dtype=int)
    method = np.full((ny, nx), "inadmissible", dtype=object)
    for j, row in enumerate(rows):
        for i, cell in enumerate(row):
            if cell is None:
                continue
            s1[j, i], s2[j, i], h[j, i], ub[j, i], method[j, i] = cell
            if math.isfinite(h[j, i]):
                band[j, i] = band_classify(h[j, i], spec.tol)
    return EntropyGrid(spec, mu, t, adm, s1, s2, h, ub, band, method)


def band_connectivity(grid: EntropyGrid, tol: float = BOUNDARY_TOL) -> dict:
    """8-connected component count per band, ignoring pixels near interior band edges."""
    from scipy import ndimage

    h = grid.entropy
    near = np.zeros(h.shape, dtype=bool)
    finite = np.isfinite(h)
    for edge in BAND_EDGES[1:-1]:
        near |= finite & (np.abs(np.where(finite, h, 0.0) - edge) < tol)
    report = {}
    structure = np.ones((3, 3), dtype=int)
    for k in range(7):
        mask = (grid.band == k) & ~near
        _, count = ndimage.label(mask, structure=structure)
        report[str(k)] = {
            "components": int(count),
            "pixels": int(mask.sum()),
            "excluded": int(((grid.band == k) & near).sum()),
        }
    return report


def connectivity_json(report: dict) -> str:
    return json.dumps({"bands": report}, indent=2, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# Marching squares


def contour_extract(x: np.ndarray, y: np.ndarray, Z: np.ndarray, level: float) -> list:
    """Isolines of Z (shape (ny, nx)) at `level` as a list of (k, 2) arrays.

    Cells touching a NaN are skipped.  Saddles are split according to the
    average of the four corners.  Closed polylines repeat their first point.
    """
    Z = np.asarray(Z, dtype=float)
    ny, nx = Z.shape
    segments = []

    def point(edge):
        # edge = (j, i, "h") joins (j,i)-(j,i+1); (j, i, "v") joins (j,i)-(j+1,i)
        j, i, d = edge
        j2, i2 = (j, i + 1) if d == "h" else (j + 1, i)
        z0, z1 = Z[j, i], Z[j2, i2]
        s = (level - z0) / (z1 - z0)
        return (x[i] + s * (x[i2] - x[i]), y[j] + s * (y[j2] - y[j]))

    for j in range(ny - 1):
        for i in range(nx - 1):
            c = (Z[j, i], Z[j, i + 1], Z[j + 1, i + 1], Z[j + 1, i])
            if any(math.isnan(v) for v in c):
                continue
            above = [v > level for v in c]
            if all(above) or not any(above):
                continue
            # edges in corner order: bottom, right, top, left
            edges = [(j, i, "h"), (j, i + 1, "v"), (j + 1, i, "h"), (j, i, "v")]
            cut = [above[k] != above[(k + 1) % 4] for k in range(4)]
            idx = [k for k in range(4) if cut[k]]
            if len(idx) == 2:
                segments.append((edges[idx[0]], edges[idx[1]]))
            else:
                centre_above = sum(c) / 4.0 > level
                # corners 0 and 2 share a side; pair edges so the centre joins like corners
                if centre_above == above[0]:
                    segments.append((edges[0], edges[1]))
                    segments.append((edges[2], edges[3]))
                else:
                    segments.append((edges[3], edges[0]))
                    segments.append((edges[1], edges[2]))

    adjacency: dict = {}
    for k, (a, b) in enumerate(segments):
        adjacency.setdefault(a, []).append(k)
        adjacency.setdefault(b, []).append(k)
    used = [False] * len(segments)
    lines = []

    def walk(start_edge, k):
        chain = [start_edge]
        edge = start_edge
        while k is not None:
            used[k] = True
            a, b = segments[k]
            edge = b if a == edge else a
            chain.append(edge)
            k = next((q for q in adjacency[edge] if not used[q]), None)
        return chain

    # open chains start at edges with a single segment
    for edge in sorted(adjacency):
        if len(adjacency[edge]) == 1 and not used[adjacency[edge][0]]:
            lines.append(walk(edge, adjacency[edge][0]))
    for k in range(len(segments)):
        if not used[k]:
            lines.append(walk(segments[k][0], k))
    return [np.array([point(e) for e in chain]) for chain in lines]


# ---------------------------------------------------------------------------
# SVG


def to_svg(grid: EntropyGrid, contours: bool = True, size: int = 600) -> str:
    """Static band map; inadmissible cells stay white."""
    ny, nx = grid.admissible.shape
    cw, ch = size / nx, size / ny
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
    ]
    for j in range(ny):
        y = size - (j + 1) * ch
        for i in range(nx):
            b = grid.band[j, i]
            if b >= 0:
                out.append(
                    f'<rect x="{i * cw:.3f}" y="{y:.3f}" width="{cw:.3f}" height="{ch:.3f}" '
                    f'fill="{BAND_COLORS[b]}"/>'
                )
    if contours:
        (m0, m1), (t0, t1) = grid.spec.mu_range, grid.spec.t_range
        for level in BAND_EDGES[1:-1]:
            for line in contour_extract(grid.mu, grid.t, grid.entropy, level):
                px = (line[:, 0] - m0) / (m1 - m0) * size
                py = size - (line[:, 1] - t0) / (t1 - t0) * size
                pts = " ".join(f"{a:.2f},{b:.2f}" for a, b in zip(px, py))
                out.append(f'<polyline points="{pts}" fill="none" stroke="gray" stroke-width="0.6"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
