import math

import numpy as np
import pytest
import sympy as sp
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from ratbones.errors import (
    AdmissibilityError,
    CoincidentPointsError,
    DegenerateParameterError,
    NearParabolicError,
    PoleEncounterError,
)
from ratbones.family import (
    BIMODAL_PMP,
    MONOTONIC,
    UNIMODAL,
    CirclePoint,
    CriticalValuePair,
    MobiusFrame,
    NormalFormParams,
    QuadraticMap,
    classify_region,
    critical_values,
    eval_on_circle,
    fixed_point_formula_residual,
    fixed_points_with_multipliers,
    interval_critical_points,
    iterate,
    map_from_critical_values,
    mobius_frame,
    normal_form_derivative,
    normal_form_eval,
    normal_form_to_map,
    orbit_derivative,
    sigma_coords,
)

coef = st.floats(min_value=0.05, max_value=5.0).flatmap(lambda x: st.sampled_from([x, -x]))
real = st.floats(min_value=-5.0, max_value=5.0)


def admissible_params():
    # uniform in t, then uniform across the wedge at that t
    return st.tuples(st.floats(-8.0, -0.01), st.floats(0.001, 0.999)).map(
        lambda p: (p[0] - 2.0 + p[1] * (-abs(p[0] + 2.0) - p[0] + 2.0), p[0])
    )


def unimodal_values():
    # one critical value strictly inside (-1, 1), the other outside [-1, 1]
    inner = st.floats(-0.999, 0.999)
    outer = st.floats(1.001, 20.0).flatmap(lambda x: st.sampled_from([x, -x]))
    return st.tuples(inner, outer, st.booleans()).map(lambda p: (p[0], p[1]) if p[2] else (p[1], p[0]))


def sympy_sigma(a, b):
    """Multiplier symmetric functions from exact rational arithmetic."""
    a, b = sp.Rational(a), sp.Rational(b)
    z = sp.symbols("z")
    roots = sp.roots((a - 1) * z**2 + b * z + a, z, multiple=True)
    mults = [1 / a] + [a * (1 - 1 / r**2) for r in roots]
    s1 = sp.nsimplify(sp.expand(sum(mults)))
    s2 = sp.expand(mults[0] * mults[1] + mults[1] * mults[2] + mults[2] * mults[0])
    return float(sp.re(sp.N(s1, 30))), float(sp.re(sp.N(s2, 30)))


class TestCriticalValues:
    def test_inverse_formula(self):
        f = map_from_critical_values(CriticalValuePair(-1.0, 3.0))
        assert (f.a, f.b) == (1.0, 1.0)

    def test_equal_values_degenerate(self):
        with pytest.raises(DegenerateParameterError):
            map_from_critical_values(CriticalValuePair(2.0, 2.0))

    @pytest.mark.parametrize("v", [(-3.0, 1.0), (0.5, 4.5)])
    def test_round_trip_examples(self, v):
        assert critical_values(map_from_critical_values(CriticalValuePair(*v))).as_array() == pytest.approx(v, abs=1e-15)

    @pytest.mark.parametrize("ab, v", [((1.0, 1.0), (-1.0, 3.0)), ((1.0, 0.0), (-2.0, 2.0))])
    def test_forward_formula(self, ab, v):
        assert critical_values(QuadraticMap(*ab)).as_array() == pytest.approx(v)

    @given(real, real)
    def test_round_trip(self, v1, v2):
        assume(abs(v1 - v2) > 1e-3)
        back = critical_values(map_from_critical_values(CriticalValuePair(v1, v2)))
        assert back.as_array() == pytest.approx([v1, v2], abs=1e-12)

    @given(coef, real)
    def test_critical_points_are_plus_minus_one(self, a, b):
        f = QuadraticMap(a, b)
        assert f.derivative(1.0) == 0.0 and f.derivative(-1.0) == 0.0


class TestCircle:
    def test_normalisation(self):
        z = CirclePoint(-3.0, -4.0)
        assert (z.p, z.q) == pytest.approx((0.6, 0.8))

    @pytest.mark.parametrize("z, expected", [(1.0, 3.0), (0.0, math.inf), (math.inf, math.inf)])
    def test_eval_examples(self, z, expected):
        w = eval_on_circle(QuadraticMap(1.0, 1.0), z)
        assert w.value == expected

    @given(coef, real, st.floats(1e-6, 1e6), st.booleans())
    def test_chart_consistency(self, a, b, r, neg):
        z = -r if neg else r
        f = QuadraticMap(a, b)
        w = eval_on_circle(f, z)
        affine = f(z)
        assert w.value == pytest.approx(affine, rel=1e-12, abs=1e-12 * max(1.0, abs(a) * (abs(z) + 1 / abs(z))))


class TestMobius:
    def test_standard_triple_is_identity(self):
        assert mobius_frame(1.0, 0.0, math.inf).is_identity()

    def test_proof_chart_triple(self):
        beta = mobius_frame(math.inf, 0.0, 1.0)
        assert beta(math.inf) == pytest.approx(1.0)
        assert beta(0.0) == 0.0
        assert beta(CirclePoint.of(1.0)).is_infinity

    def test_coincident(self):
        with pytest.raises(CoincidentPointsError):
            mobius_frame(1.0, 1.0, 2.0)

    def test_inverse_on_random_points(self):
        rng = np.random.default_rng(7)
        beta = MobiusFrame(rng.normal(size=(2, 2)))
        ident = beta.inverse() @ beta
        for x in rng.normal(scale=10, size=100):
            assert ident(CirclePoint.of(x)).distance(CirclePoint.of(x)) < 1e-12


class TestFixedPoints:
    def test_multiplier_at_infinity(self):
        pts = fixed_points_with_multipliers(QuadraticMap(2.0, 1.0))
        assert pts[0][0] == math.inf and pts[0][1] == pytest.approx(0.5)

    def test_complex_pair(self):
        pts = fixed_points_with_multipliers(QuadraticMap(2.0, 1.0))
        finite = sorted((p for p, _ in pts[1:]), key=lambda z: z.imag)
        expected = np.sort_complex(np.roots([1, 1, 2]))
        assert finite == pytest.approx(list(expected))
        m1, m2 = pts[1][1], pts[2][1]
        assert m1 == pytest.approx(m2.conjugate())

    def test_degenerate_a_equals_one(self):
        pts = fixed_points_with_multipliers(QuadraticMap(1.0, 3.0))
        finite = [p for p, _ in pts if p != math.inf]
        assert finite == [pytest.approx(-1 / 3)]
        with pytest.raises(NearParabolicError):
            fixed_point_formula_residual(QuadraticMap(1.0, 3.0))

    @pytest.mark.parametrize("ab", [(2.0, 1.0), (0.3, 5.0)])
    def test_formula_examples(self, ab):
        assert fixed_point_formula_residual(QuadraticMap(*ab)) < 1e-9

    @given(coef, real)
    def test_formula(self, a, b):
        try:
            r = fixed_point_formula_residual(QuadraticMap(a, b))
        except NearParabolicError:
            assume(False)
        assert r < 1e-9


class TestSigma:
    @pytest.mark.parametrize("ab", [(2.0, 1.0), (0.3, 5.0), (-0.5, 1.25), (3.0, -2.0)])
    def test_against_exact_oracle(self, ab):
        s = sigma_coords(QuadraticMap(*ab))
        assert (s.sigma1, s.sigma2) == pytest.approx(sympy_sigma(*ab), rel=1e-12, abs=1e-12)

    def test_closed_form_sigma1(self):
        # sigma1 = 1/a + 4a - 2 - b^2/a for this family
        for a, b in [(0.7, 0.2), (-1.3, 2.0), (2.5, -1.0)]:
            assert sigma_coords(QuadraticMap(a, b)).sigma1 == pytest.approx(1 / a + 4 * a - 2 - b * b / a)

    @settings(max_examples=100)
    @given(coef, real, st.lists(st.floats(-3, 3), min_size=4, max_size=4))
    def test_mobius_invariance(self, a, b, entries):
        M = np.array(entries).reshape(2, 2)
        assume(abs(np.linalg.det(M)) > 0.2 and np.linalg.cond(M) < 30)
        f = QuadraticMap(a, b)
        s, g = sigma_coords(f), sigma_coords(f.rational().conjugate(MobiusFrame(M)))
        assert g.sigma1 == pytest.approx(s.sigma1, abs=1e-8 * max(1, abs(s.sigma1)))
        assert g.sigma2 == pytest.approx(s.sigma2, abs=1e-8 * max(1, abs(s.sigma2)))

    @given(unimodal_values())
    def test_unimodal_sigma1_range(self, v):
        f = map_from_critical_values(CriticalValuePair(*v))
        assert classify_region(f).tag == UNIMODAL
        assert -6 - 1e-6 <= sigma_coords(f).sigma1 <= 2 + 1e-6

    def test_symmetry_locus_flag(self):
        assert sigma_coords(QuadraticMap(1.5, 0.0)).near_symmetry_locus
        assert not sigma_coords(QuadraticMap(1.5, 1.0)).near_symmetry_locus


class TestOrbitDerivative:
    def test_empty_product(self):
        assert orbit_derivative(QuadraticMap(1.0, 1.0), 0.3, 0) == 1.0

    def test_single_step(self):
        assert orbit_derivative(QuadraticMap(1.0, 1.0), 2.0, 1) == pytest.approx(0.75)

    def test_pole(self):
        with pytest.raises(PoleEncounterError):
            orbit_derivative(QuadraticMap(1.0, 0.0), 0.0, 2)

    @given(coef, real, st.floats(0.2, 4.0), st.integers(1, 3))
    def test_matches_finite_difference(self, a, b, x, k):
        f = QuadraticMap(a, b)
        try:
            orbit = [iterate(f, x, i) for i in range(k + 1)]
            h = 1e-6 * max(1.0, abs(x))
            fd = (iterate(f, x + h, k) - iterate(f, x - h, k)) / (2 * h)
        except PoleEncounterError:
            assume(False)
        # stay away from poles and critical points along the orbit
        assume(all(0.1 < abs(z) < 1e3 and abs(abs(z) - 1) > 0.05 for z in orbit[:-1]))
        d = orbit_derivative(f, x, k)
        assume(abs(d) < 1e4)
        assert d == pytest.approx(fd, rel=1e-6, abs=1e-8)


class TestClassification:
    def test_normal_form_example_is_unimodal(self):
        f = normal_form_to_map(NormalFormParams(-1.0, -1.0)).map
        assert classify_region(f).tag == UNIMODAL

    def test_image_is_the_arc_through_infinity(self):
        # v = (4.8, 5.2): the image is the complement of (4.8, 5.2), which holds both +-1
        r = classify_region(QuadraticMap(0.1, 5.0))
        assert r.tag == BIMODAL_PMP
        assert r.image_interval == pytest.approx((4.8, 5.2))
        assert r.contains(1.0) and r.contains(-1.0) and not r.contains(5.0)

    def test_monotonic(self):
        # v = (-0.5, 0.5) straddles neither +-1 from outside: both critical points excluded
        assert classify_region(map_from_critical_values(CriticalValuePair(-2.0, 2.0))).tag == MONOTONIC

    def test_boundary_flag(self):
        r = classify_region(map_from_critical_values(CriticalValuePair(3.0, 1.0)))
        assert r.boundary_ambiguous

    @given(admissible_params())
    def test_admissible_parameters_are_unimodal(self, p):
        mu, t = p
        sys = normal_form_to_map(NormalFormParams(mu, t))
        r = classify_region(sys.map)
        assert r.tag == UNIMODAL and r.essential_critical_point == -1.0
        assert -6 - 1e-6 <= sys.sigma.sigma1 <= 2 + 1e-6


class TestNormalForm:
    @pytest.mark.parametrize("x, expected", [(0.0, 0.0), (2.0, 0.0), (1.0, -1.0)])
    def test_values(self, x, expected):
        # t = -1 puts the zero of tx + 2 at x = 2
        assert normal_form_eval(NormalFormParams(-1.0, -1.0), x) == pytest.approx(expected)

    def test_origin_fixed_with_multiplier_mu(self):
        sys = normal_form_to_map(NormalFormParams(-1.0, -1.0))
        zero = [m for x, m in sys.fixed_points if abs(x) < 1e-14]
        assert zero == [pytest.approx(-1.0)]

    def test_inadmissible(self):
        with pytest.raises(AdmissibilityError):
            normal_form_to_map(NormalFormParams(1.0, -1.0))

    @given(admissible_params())
    def test_bounded_on_line(self, p):
        P = NormalFormParams(*p)
        x = np.concatenate([np.linspace(-50, 50, 10_000), [-2.0 / P.t]])
        assert np.all(np.abs(normal_form_eval(P, x)) <= 1 + 1e-15)

    @given(admissible_params())
    def test_turning_points_are_roots_of_derivative(self, p):
        P = NormalFormParams(*p)
        for c in interval_critical_points(P.mu, P.t):
            if not -1.0 <= c <= 1.0:
                continue
            assert abs(normal_form_derivative(P, c)) < 1e-9
            assert abs(normal_form_eval(P, c)) == pytest.approx(1.0)

    @given(admissible_params())
    def test_conjugacy_to_family(self, p):
        P = NormalFormParams(*p)
        f = normal_form_to_map(P).map
        for x in np.linspace(-0.9, 0.9, 7):
            if abs(x) < 1e-3:
                continue
            z = f.from_interval(x)
            assert f.to_interval(f(z)) == pytest.approx(normal_form_eval(P, x), abs=1e-9)
