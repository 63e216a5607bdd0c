"""The acceptance battery, shared by the test suite and the `check` command."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np

from ratbones import atlas, bones
from ratbones.entropy import (
    IntervalModel,
    critical_cycle,
    entropy_lap,
    entropy_markov,
    lap_sequence,
    markov_partition,
    real_entropy,
)
from ratbones.family import (
    MobiusFrame,
    NormalFormParams,
    QuadraticMap,
    classify_region,
    fixed_point_formula_residual,
    map_from_critical_values,
    normal_form_to_map,
    sigma_coords,
)
from ratbones.serialize import dumps

GOLDEN = math.log((1 + math.sqrt(5)) / 2)
SEED = 20240607


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    seconds: float
    limit: float | None = None

    def line(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        budget = f" / {self.limit:g}s" if self.limit else ""
        return f"[{status}] criterion {self.number} {self.name}: {self.detail} ({self.seconds:.1f}s{budget})"


def _timed(number, name, limit, fn):
    t0 = time.perf_counter()
    ok, detail = fn()
    dt = time.perf_counter() - t0
    if limit is not None and dt > limit:
        ok, detail = False, detail + f"; over time budget {limit:g}s"
    return CriterionResult(number, name, bool(ok), detail, dt, limit)


# ---------------------------------------------------------------------------
# Independent oracles


def logistic_model(r: float = 4.0) -> IntervalModel:
    return IntervalModel((0.0, 1.0), lambda x: r * x * (1.0 - x), (0.5,))


def superstable_logistic(period: int, lo: float, hi: float) -> float:
    """r with x = 1/2 periodic of exact period `period`, by bisection."""

    def g(r):
        x = 0.5
        for _ in range(period):
            x = r * x * (1 - x)
        return x - 0.5

    a, b = lo, hi
    ga = g(a)
    for _ in range(200):
        mid = 0.5 * (a + b)
        gm = g(mid)
        if (gm > 0) == (ga > 0):
            a, ga = mid, gm
        else:
            b = mid
    return 0.5 * (a + b)


def superstable_polynomial_parameters(n: int, samples: int = 20001) -> list:
    """Real c in [-2, 1/4] where 0 has exact period n under x^2 + c.

    Sign changes of c -> f_c^n(0) on a fine grid, refined by bisection, and
    rejected when 0 already returns at a proper divisor of n.
    """

    def orbit(c, k):
        x = 0.0
        for _ in range(k):
            x = x * x + c
        return x

    cs = np.linspace(-2.0, 0.25, samples)
    vals = np.array([orbit(c, n) for c in cs])
    roots = []
    for i in np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]:
        a, b = cs[i], cs[i + 1]
        fa = orbit(a, n)
        for _ in range(200):
            mid = 0.5 * (a + b)
            fm = orbit(mid, n)
            if (fm > 0) == (fa > 0):
                a, fa = mid, fm
            else:
                b = mid
        c = 0.5 * (a + b)
        if all(abs(orbit(c, k)) > 1e-9 for k in range(1, n) if n % k == 0):
            roots.append(c)
    return roots


def polynomial_endpoint_v1(c: float) -> float:
    """v1 where x^2 + c sits on the boundary v2 = 1 of the a < 0 sheet."""
    mu = 1.0 - math.sqrt(1.0 - 4.0 * c)
    return 1.0 - 4.0 / mu


# ---------------------------------------------------------------------------
# Shared computations


@dataclass
class Battery:
    workers: int = 1
    grid_shape: tuple = (200, 200)
    scan_shape: tuple = (200, 200)
    _cache: dict = field(default_factory=dict)

    def pcf_points(self, workers=None):
        w = self.workers if workers is None else workers
        key = ("pcf", w)
        if key not in self._cache:
            self._cache[key] = bones.scan_pcf(bones.DEFAULT_WINDOW, 4, 6, self.scan_shape, workers=w)
        return self._cache[key]

    def pcf_bones(self, workers=None):
        """One bone per distinct curve through the PCF points."""
        key = ("pcf_bones", self.workers if workers is None else workers)
        if key not in self._cache:
            traced = []
            for p in self.pcf_points(workers):
                if any(b.n == p.n and bones.on_bone(b, p.array, p.essential) for b in traced):
                    continue
                traced.append(bones.trace_bone(p.array, p.n, essential=p.essential))
            self._cache[key] = traced
        return self._cache[key]

    def all_bones(self, n: int, workers=None) -> list:
        """Bones of period n from PCF points plus grid-line seeds, deduplicated."""
        key = ("bones", n, self.workers if workers is None else workers)
        if key not in self._cache:
            found = [b for b in self.pcf_bones(workers) if b.n == n]
            for s in bones.grid_line_seeds(bones.DEFAULT_WINDOW, n):
                if bones.period_of_essential(s) != n:
                    continue
                if any(bones.on_bone(b, s) for b in found):
                    continue
                found.append(bones.trace_bone(s, n, essential=-1.0))
            self._cache[key] = sorted(found, key=lambda b: tuple(b.points[0]) + tuple(b.points[-1]))
        return self._cache[key]

    def grid(self, workers=None):
        w = self.workers if workers is None else workers
        key = ("grid", w)
        if key not in self._cache:
            spec = atlas.GridSpec(shape=self.grid_shape)
            self._cache[key] = atlas.entropy_grid(spec, workers=w)
        return self._cache[key]

    # -- artefacts compared by the determinism criterion

    def artefacts(self, workers) -> dict:
        pts = self.pcf_points(workers)
        g = self.grid(workers)
        return {
            "pcf": dumps([p.to_dict() for p in pts]),
            "bones": dumps([b.to_dict() for n in (2, 3, 4) for b in self.all_bones(n, workers)]),
            "grid_csv": g.to_csv(),
            "connectivity": atlas.connectivity_json(atlas.band_connectivity(g)),
        }

    # -- criteria

    def criterion_1(self):
        def run():
            laps = lap_sequence(logistic_model(), 19)
            exact = all(l == 2 ** (k + 1) for k, l in enumerate(laps))
            h_log = entropy_lap(logistic_model()).value
            checks = [("log2 laps", exact, 0.0), ("logistic", abs(h_log - math.log(2)) <= 1e-3, h_log)]
            # period-3 superattracting maps: one in the family, one logistic
            p = bones.newton_pcf((2.17, 0.46), 3, 3)
            e = real_entropy(map_from_critical_values(p.v))
            checks.append(("family lap", abs(e.value - GOLDEN) <= 1e-3, e.value))
            checks.append(("family markov", e.markov_value is not None and abs(e.markov_value - GOLDEN) <= 1e-3, e.markov_value))
            r3 = superstable_logistic(3, 3.8, 3.86)
            m = logistic_model(r3)
            h_lap = entropy_lap(m).value
            cyc = critical_cycle(m, 0.5)
            h_mk = entropy_markov(markov_partition(m, cyc)).value if cyc else math.nan
            checks.append(("logistic p3 lap", abs(h_lap - GOLDEN) <= 1e-3, h_lap))
            checks.append(("logistic p3 markov", abs(h_mk - GOLDEN) <= 1e-3, h_mk))
            bad = [c[0] for c in checks if not c[1]]
            vals = ", ".join(f"{c[0]}={c[2]:.6f}" for c in checks[1:])
            return not bad, ("laps 2^n exact; " if exact else "laps not 2^n; ") + vals + (f"; failed {bad}" if bad else "")

        return _timed(1, "entropy oracles", 5, run)

    def criterion_2(self):
        def run():
            rng = np.random.default_rng(SEED)
            worst_fp, worst_sigma, skipped = 0.0, 0.0, 0
            count = 0
            while count < 1000:
                a = rng.choice([-1, 1]) * rng.uniform(0.1, 3.0)
                b = rng.uniform(-3.0, 3.0)
                f = QuadraticMap(a, b)
                M = rng.normal(size=(2, 2))
                if abs(np.linalg.det(M)) < 0.1 or np.linalg.cond(M) > 50:
                    continue
                try:
                    r = fixed_point_formula_residual(f)
                except ArithmeticError:
                    skipped += 1
                    continue
                s = sigma_coords(f)
                g = f.rational().conjugate(MobiusFrame(M))
                sg = sigma_coords(g)
                err = max(abs(s.sigma1 - sg.sigma1) / max(1, abs(s.sigma1)), abs(s.sigma2 - sg.sigma2) / max(1, abs(s.sigma2)))
                worst_fp = max(worst_fp, r)
                worst_sigma = max(worst_sigma, err)
                count += 1
            ok = worst_fp < 1e-9 and worst_sigma < 1e-8
            return ok, f"1000 maps, max fixed-point residual {worst_fp:.2e}, max sigma drift {worst_sigma:.2e} (rel), near-parabolic skipped {skipped}"

        return _timed(2, "algebraic identities", 5, run)

    def criterion_3(self):
        def run():
            rng = np.random.default_rng(SEED + 3)
            bad_class, lo, hi = 0, math.inf, -math.inf
            for _ in range(10_000):
                t = rng.uniform(-10.0, 0.0)
                mu = rng.uniform(t - 2.0, -abs(t + 2.0))
                if not NormalFormParams(mu, t).is_admissible(0.0):
                    continue
                f = normal_form_to_map(NormalFormParams(mu, t)).map
                if classify_region(f).tag != "unimodal":
                    bad_class += 1
                s1 = sigma_coords(f).sigma1
                lo, hi = min(lo, s1), max(hi, s1)
            ok = bad_class == 0 and lo >= -6 - 1e-6 and hi <= 2 + 1e-6
            return ok, f"10^4 samples, non-unimodal {bad_class}, sigma1 in [{lo:.6f}, {hi:.6f}]"

        return _timed(3, "region geometry", 30, run)

    def criterion_4(self):
        def run():
            pts = self.pcf_points()
            q_bad = [p for p in pts if not p.quotient > 0]
            d_bad = [p for p in pts if not bones.check_positive_direction(p)["positive"]]
            qmin = min((p.quotient for p in pts), default=math.nan)
            ok = len(pts) >= 5 and not q_bad and not d_bad
            return ok, f"{len(pts)} PCF points, min quotient {qmin:.4g}, non-positive quotient {len(q_bad)}, non-positive direction {len(d_bad)}"

        return _timed(4, "transversality", 300, run)

    def criterion_5(self):
        def run():
            traced = self.pcf_bones()
            boundary = ("sigma1=2", "sigma1=-6")
            bad = [b for b in traced if b.kind != "arc" or any(e not in boundary for e in b.endpoint_info)]
            circle = bones._Curve(
                lambda v: v[0] ** 2 + v[1] ** 2 - 1.0,
                lambda v: 1.0,
                lambda v: True,
            )
            c = bones.trace_curve(circle, (1.0, 0.0))
            circle_ok = c.kind == "loop" and abs(c.arclength - 2 * math.pi) <= 1e-3
            ok = bool(traced) and not bad and circle_ok
            return ok, (
                f"{len(traced)} bones from PCF points, all arcs ending on the boundary: {not bad}; "
                f"circle -> {c.kind}, arclength error {abs(c.arclength - 2 * math.pi):.1e}"
            )

        return _timed(5, "no bone-loops", 600, run)

    def criterion_6(self):
        def run():
            parts, ok = [], True
            for n, expected_count in ((2, 1), (3, 1), (4, 2)):
                oracle = superstable_polynomial_parameters(n)
                reach = [b for b in self.all_bones(n) if "sigma1=2" in b.endpoint_info]
                ends = sorted(
                    (b.points[0] if b.endpoint_info[0] == "sigma1=2" else b.points[-1])[0] for b in reach
                )
                target = sorted(polynomial_endpoint_v1(c) for c in oracle)
                match = len(ends) == len(target) and all(abs(x - y) < 1e-2 for x, y in zip(ends, target))
                ok &= len(reach) == len(oracle) == expected_count and match
                parts.append(f"n={n}: bones {len(reach)}, oracle {len(oracle)}")
            return ok, "; ".join(parts)

        return _timed(6, "bone/polynomial correspondence", 300, run)

    def criterion_7(self):
        def run():
            g = self.grid()
            rep = atlas.band_connectivity(g)
            h = g.entropy[g.admissible]
            finite = h[np.isfinite(h)]
            in_range = finite.size == h.size and finite.min() >= 0 and finite.max() <= math.log(2) + 1e-3
            comps = [rep[str(k)]["components"] for k in range(7)]
            ok = all(c == 1 for c in comps) and in_range
            return ok, f"components per band {comps}, entropy in [{finite.min():.6f}, {finite.max():.6f}], non-finite {h.size - finite.size}"

        return _timed(7, "isentrope connectivity", 900, run)

    def criterion_8(self, other_workers: int = 2):
        def run():
            first = self.artefacts(self.workers)
            fresh = Battery(other_workers, self.grid_shape, self.scan_shape)
            second = fresh.artefacts(other_workers)
            diff = [k for k in first if first[k] != second[k]]
            return not diff, f"workers {self.workers} vs {other_workers}, fresh run: " + ("identical" if not diff else f"differ in {diff}")

        return _timed(8, "determinism", None, run)

    def run(self, numbers=range(1, 9), report=print) -> list:
        results = []
        for k in numbers:
            r = getattr(self, f"criterion_{k}")()
            report(r.line())
            results.append(r)
        return results
