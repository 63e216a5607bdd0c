"""The critical-value family a(z + 1/z) + b and its moduli coordinates.

Every map here has critical points -1 and +1, a fixed point at infinity and
f(0) = infinity.  On the real circle the image f(R^) is the closed arc that
runs from max(v1, v2) through infinity to min(v1, v2); the open interval
between the two critical values is never hit.

The change of coordinate x = 2a / (z - b) sends that arc onto [-1, 1] and
conjugates f to the interval normal form

    x -> 2 mu x (t x + 2) / (mu^2 x^2 + (t x + 2)^2),   mu = 1/a, t = b/a,

which has no poles on the real line.  All interval dynamics (entropy, lap
counts) run in that chart; parameter-space work (residuals, Jacobians) runs
in the z chart where the critical points are constant.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from ratbones.errors import (
    AdmissibilityError,
    CoincidentPointsError,
    DegenerateParameterError,
    NearParabolicError,
    PoleEncounterError,
)

POLE_TOL = 1e-9
BOUNDARY_TOL = 1e-10
PARABOLIC_DELTA = 1e-6
IMAG_TOL = 1e-9
SNAP = 1e-15

MONOTONIC = "monotonic"
UNIMODAL = "unimodal"
BIMODAL_PMP = "bimodal_plus_minus_plus"
BIMODAL_MPM = "bimodal_minus_plus_minus"


@dataclass(frozen=True)
class CriticalValuePair:
    """Critical values v1 = f(-1), v2 = f(+1)."""

    v1: float
    v2: float

    def __post_init__(self):
        if self.v1 == self.v2:
            raise DegenerateParameterError(f"v1 == v2 == {self.v1}: map has degree < 2")

    def as_array(self) -> np.ndarray:
        return np.array([self.v1, self.v2], dtype=float)

    @classmethod
    def from_array(cls, v: Sequence[float]) -> "CriticalValuePair":
        return cls(float(v[0]), float(v[1]))


@dataclass(frozen=True)
class QuadraticMap:
    """z -> a (z + 1/z) + b with real a != 0."""

    a: float
    b: float

    def __post_init__(self):
        if self.a == 0 or not math.isfinite(self.a) or not math.isfinite(self.b):
            raise DegenerateParameterError(f"invalid coefficients a={self.a}, b={self.b}")

    def __call__(self, z):
        return self.a * (z + 1.0 / z) + self.b

    def derivative(self, z):
        return self.a * (1.0 - 1.0 / (z * z))

    @property
    def mu(self) -> float:
        """Multiplier of the fixed point at infinity; normal-form mu."""
        return 1.0 / self.a

    @property
    def t(self) -> float:
        return self.b / self.a

    @property
    def symmetry_adjacent(self) -> bool:
        # b <= 0 lies outside the normalised family Re(b) > 0.
        return self.b <= 0

    def to_interval(self, z):
        """z chart -> normal-form chart x = 2a/(z - b)."""
        return 2.0 * self.a / (z - self.b)

    def from_interval(self, x):
        return self.b + 2.0 * self.a / x

    def rational(self) -> "RationalMap":
        return RationalMap((self.a, self.b, self.a), (0.0, 1.0, 0.0))


def map_from_critical_values(v: CriticalValuePair) -> QuadraticMap:
    if v.v1 == v.v2:
        raise DegenerateParameterError("v1 == v2")
    return QuadraticMap((v.v2 - v.v1) / 4.0, (v.v1 + v.v2) / 2.0)


def critical_values(f: QuadraticMap) -> CriticalValuePair:
    return CriticalValuePair(-2.0 * f.a + f.b, 2.0 * f.a + f.b)


def iterate(f: QuadraticMap, x: float, k: int, pole_tol: float = POLE_TOL) -> float:
    """k-th affine iterate of x, refusing to pass through the pole."""
    for _ in range(k):
        if abs(x) <= pole_tol:
            raise PoleEncounterError(f"iterate {x!r} within {pole_tol} of the pole")
        x = f(x)
    return x


def orbit_derivative(f: QuadraticMap, x: float, k: int, pole_tol: float = POLE_TOL) -> float:
    """(f^k)'(x) as the chain-rule product over the first k orbit points."""
    d = 1.0
    for _ in range(k):
        if abs(x) <= pole_tol:
            raise PoleEncounterError(f"orbit point {x!r} within {pole_tol} of the pole")
        d *= f.derivative(x)
        x = f(x)
    return d


# ---------------------------------------------------------------------------
# Real projective line


@dataclass(frozen=True)
class CirclePoint:
    """Homogeneous point (p : q) of the real circle, stored normalised."""

    p: float
    q: float

    def __post_init__(self):
        p, q = float(self.p), float(self.q)
        r = math.hypot(p, q)
        if r == 0 or not math.isfinite(r):
            raise ValueError(f"invalid homogeneous pair ({self.p}, {self.q})")
        p, q = p / r, q / r
        # snap rounding residue so exact projective identities survive
        if abs(q) <= SNAP:
            q = 0.0
        elif abs(p) <= SNAP:
            p = 0.0
        if p < 0 or (p == 0 and q < 0):
            p, q = -p, -q
        object.__setattr__(self, "p", p + 0.0)
        object.__setattr__(self, "q", q + 0.0)

    @classmethod
    def of(cls, x: float) -> "CirclePoint":
        if math.isinf(x):
            return cls(1.0, 0.0)
        return cls(x, 1.0)

    @classmethod
    def infinity(cls) -> "CirclePoint":
        return cls(1.0, 0.0)

    @property
    def is_infinity(self) -> bool:
        return self.q == 0.0

    @property
    def value(self) -> float:
        return math.inf if self.q == 0.0 else self.p / self.q

    def distance(self, other: "CirclePoint") -> float:
        """|sin| of the angle between the two lines; 0 iff equal."""
        return abs(self.p * other.q - self.q * other.p)

    def as_vector(self) -> np.ndarray:
        return np.array([self.p, self.q])


def _as_circle(z) -> CirclePoint:
    return z if isinstance(z, CirclePoint) else CirclePoint.of(float(z))


def eval_on_circle(f: QuadraticMap, z) -> CirclePoint:
    """f on the real circle via [a p^2 + b p q + a q^2 : p q]."""
    z = _as_circle(z)
    p, q = z.p, z.q
    num = f.a * p * p + f.b * p * q + f.a * q * q
    den = p * q
    if num == 0 and den == 0:  # cannot happen for a != 0, kept as a guard
        raise DegenerateParameterError("0/0 in projective evaluation")
    return CirclePoint(num, den)


@dataclass(frozen=True, eq=False)
class MobiusFrame:
    """Real Möbius map acting linearly on homogeneous pairs."""

    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=float).reshape(2, 2)
        if abs(np.linalg.det(m)) <= 1e-300:
            raise DegenerateParameterError("singular Möbius matrix")
        # scale to unit Frobenius norm; the action is projective
        m = m / np.linalg.norm(m)
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    def __call__(self, z):
        if isinstance(z, CirclePoint):
            w = self.matrix @ z.as_vector()
            return CirclePoint(w[0], w[1])
        w = self.matrix @ CirclePoint.of(float(z)).as_vector()
        return CirclePoint(w[0], w[1]).value

    def __matmul__(self, other: "MobiusFrame") -> "MobiusFrame":
        return MobiusFrame(self.matrix @ other.matrix)

    def inverse(self) -> "MobiusFrame":
        (a, b), (c, d) = self.matrix
        return MobiusFrame(np.array([[d, -b], [-c, a]]))

    @property
    def det(self) -> float:
        return float(np.linalg.det(self.matrix))

    def is_identity(self, tol: float = 1e-12) -> bool:
        m = self.matrix / self.matrix[np.unravel_index(np.argmax(np.abs(self.matrix)), (2, 2))]
        return bool(np.allclose(m, np.eye(2), atol=tol))


def _bracket(u: CirclePoint, w: CirclePoint) -> float:
    return u.p * w.q - u.q * w.p


def mobius_frame(z1, z2, z3, tol: float = 1e-14) -> MobiusFrame:
    """The Möbius map sending (z1, z2, z3) to (1, 0, inf)."""
    z1, z2, z3 = (_as_circle(z) for z in (z1, z2, z3))
    for u, w in ((z1, z2), (z1, z3), (z2, z3)):
        if abs(_bracket(u, w)) <= tol:
            raise CoincidentPointsError(f"points {u.value} and {w.value} coincide")
    k13 = _bracket(z1, z3)
    k12 = _bracket(z1, z2)
    # beta(Z) = [Z,Z2][Z1,Z3] : [Z,Z3][Z1,Z2], with [Z,W] = p_Z q_W - q_Z p_W
    return MobiusFrame(np.array([[k13 * z2.q, -k13 * z2.p], [k12 * z3.q, -k12 * z3.p]]))


# ---------------------------------------------------------------------------
# General degree-2 maps, fixed points and moduli coordinates


def _qform(c, p, q):
    return c[0] * p * p + c[1] * p * q + c[2] * q * q


@dataclass(frozen=True)
class RationalMap:
    """(n0 z^2 + n1 z + n2) / (d0 z^2 + d1 z + d2) written as homogeneous forms.

    Coefficients are listed from the p^2 term down to the q^2 term.
    """

    num: tuple
    den: tuple

    def __call__(self, z):
        z = _as_circle(z)
        return CirclePoint(_qform(self.num, z.p, z.q), _qform(self.den, z.p, z.q))

    def homogeneous(self, p, q):
        return _qform(self.num, p, q), _qform(self.den, p, q)

    def conjugate(self, frame: MobiusFrame) -> "RationalMap":
        """beta o f o beta^-1 for beta = frame."""
        B = frame.matrix
        Binv = np.linalg.inv(B)

        def g(p, q):
            u, w = Binv @ np.array([p, q])
            n, d = self.homogeneous(u, w)
            return B @ np.array([n, d])

        g10, g01, g11 = g(1.0, 0.0), g(0.0, 1.0), g(1.0, 1.0)
        coeffs = [(g10[i], g11[i] - g10[i] - g01[i], g01[i]) for i in range(2)]
        return RationalMap(tuple(coeffs[0]), tuple(coeffs[1]))

    def fixed_points_with_multipliers(self) -> list:
        """Three (point, multiplier) pairs; point is complex or inf."""
        n2, n1, n0 = self.num
        d2, d1, d0 = self.den
        # C(p, q) = N q - D p
        cubic = np.array([-d2, n2 - d1, n1 - d0, n0], dtype=float)
        scale = np.max(np.abs(cubic))
        k = 0
        while k < 3 and abs(cubic[k]) <= 1e-14 * scale:
            k += 1
        out = [(math.inf, self._multiplier(1.0 + 0j, 0.0 + 0j))] * k if k else []
        for r in np.roots(cubic[k:]):
            out.append((complex(r), self._multiplier(complex(r), 1.0 + 0j)))
        return out

    def _multiplier(self, p: complex, q: complex) -> complex:
        n2, n1, n0 = self.num
        d2, d1, d0 = self.den
        N = n2 * p * p + n1 * p * q + n0 * q * q
        D = d2 * p * p + d1 * p * q + d0 * q * q
        lam = N / p if abs(p) >= abs(q) else D / q
        jac = np.array(
            [
                [2 * n2 * p + n1 * q, n1 * p + 2 * n0 * q],
                [2 * d2 * p + d1 * q, d1 * p + 2 * d0 * q],
            ]
        )
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        return complex(det / (2.0 * lam * lam))


def fixed_points_with_multipliers(f: QuadraticMap) -> list:
    """Three (point, multiplier) pairs of f, points complex or inf.

    Infinity has multiplier 1/a (chart w = 1/z).  The finite fixed points solve
    (a - 1) z^2 + b z + a = 0.
    """
    a, b = f.a, f.b
    inf_pair = (math.inf, complex(1.0 / a))
    if a == 1.0:
        if b == 0.0:
            return [inf_pair] * 3
        z = -a / b
        return [inf_pair, inf_pair, (complex(z), complex(f.derivative(z)))]
    disc = complex(b * b - 4.0 * (a - 1.0) * a)
    s = np.sqrt(disc)
    # numerically stable pair of roots
    qq = -0.5 * (b + (s if b >= 0 else -s))
    if qq == 0:
        roots = [complex(0.0), complex(0.0)]
    else:
        roots = [qq / (a - 1.0), a / qq]
    return [inf_pair] + [(r, complex(a * (1.0 - 1.0 / (r * r)))) for r in roots]


def _one_minus_multipliers(f: QuadraticMap) -> list:
    """1 - mu_i for the three fixed points without cancellation.

    At a finite fixed point (a-1) + b/z + a/z^2 = 0, so
    1 - a(1 - 1/z^2) = 2(1 - a) - b/z; at infinity 1 - 1/a = (a - 1)/a.
    """
    a, b = f.a, f.b
    out = [complex((a - 1.0) / a)]
    for z, m in fixed_points_with_multipliers(f)[1:]:
        out.append(complex(1.0 - m) if z == math.inf or z == 0 else 2.0 * (1.0 - a) - b / z)
    return out


def fixed_point_formula_residual(f, delta: float = PARABOLIC_DELTA) -> float:
    """|sum 1/(1 - mu_i) - 1|; raises near a parabolic fixed point."""
    if isinstance(f, RationalMap):
        gaps = [1.0 - m for _, m in f.fixed_points_with_multipliers()]
    else:
        gaps = _one_minus_multipliers(f)
    total = 0j
    for g in gaps:
        if abs(g) <= delta:
            raise NearParabolicError(f"multiplier {1.0 - g} within {delta} of 1")
        total += 1.0 / g
    return abs(total - 1.0)


@dataclass(frozen=True)
class SigmaPoint:
    sigma1: float
    sigma2: float
    near_symmetry_locus: bool = field(default=False, compare=False)

    def __post_init__(self):
        if not (math.isfinite(self.sigma1) and math.isfinite(self.sigma2)):
            raise ValueError(f"non-finite sigma ({self.sigma1}, {self.sigma2})")


def sigma_from_multipliers(mults: Iterable[complex], near_symmetry_locus: bool = False) -> SigmaPoint:
    m1, m2, m3 = mults
    s1 = m1 + m2 + m3
    s2 = m1 * m2 + m2 * m3 + m3 * m1
    for s in (s1, s2):
        assert abs(s.imag) <= IMAG_TOL * max(1.0, abs(s.real)), f"non-real symmetric function {s}"
    return SigmaPoint(s1.real, s2.real, near_symmetry_locus)


def sigma_coords(f) -> SigmaPoint:
    if isinstance(f, RationalMap):
        return sigma_from_multipliers(m for _, m in f.fixed_points_with_multipliers())
    mults = [m for _, m in fixed_points_with_multipliers(f)]
    return sigma_from_multipliers(mults, near_symmetry_locus=abs(f.b) < 1e-6 * max(1.0, abs(f.a)))


# ---------------------------------------------------------------------------
# Interval normal form


def normal_form_eval(p: "NormalFormParams", x):
    mu, t = p.mu, p.t
    A = mu * x
    B = t * x + 2.0
    return 2.0 * A * B / (A * A + B * B)


def normal_form_derivative(p: "NormalFormParams", x):
    mu, t = p.mu, p.t
    A = mu * x
    B = t * x + 2.0
    S = A * A + B * B
    return 4.0 * mu * (B * B - A * A) / (S * S)


def interval_critical_points(mu: float, t: float) -> tuple:
    """Critical points of the normal form, images of z = -1 and z = +1.

    x_minus maps to -1 and corresponds to z = -1; x_plus maps to +1 and
    corresponds to z = +1.  inf is returned when the point is at infinity.
    """
    x_minus = -2.0 / (mu + t) if mu + t != 0 else math.inf
    x_plus = 2.0 / (mu - t) if mu != t else math.inf
    return x_minus, x_plus


@dataclass(frozen=True)
class NormalFormParams:
    """(mu, t) of the unimodal normal form.

    The unimodal maps fill the wedge t - 2 < mu < -|t + 2| (which forces
    mu, t < 0).  Its three sides are the polynomial line mu = t + 2 and the
    two halves of the sigma1 = -6 line, mu = t - 2 and mu + t = -2.
    """

    mu: float
    t: float

    def margin(self) -> float:
        """Signed distance-like margin; > 0 strictly inside the wedge."""
        return min(self.mu - (self.t - 2.0), -abs(self.t + 2.0) - self.mu)

    def is_admissible(self, tol: float = BOUNDARY_TOL) -> bool:
        return self.mu < 0 and self.t < 0 and self.margin() >= -tol

    def check(self, tol: float = BOUNDARY_TOL) -> "NormalFormParams":
        if not self.is_admissible(tol):
            raise AdmissibilityError(f"(mu, t) = ({self.mu}, {self.t}) outside t-2 < mu < -|t+2|")
        return self


def admissible_mask(mu: np.ndarray, t: np.ndarray) -> np.ndarray:
    """Vectorised strict-interior test for the unimodal wedge."""
    return (mu > t - 2.0) & (mu < -np.abs(t + 2.0))


@dataclass(frozen=True)
class NormalFormSystem:
    """The normal form packaged as a self-map of [-1, 1]."""

    params: NormalFormParams
    map: QuadraticMap
    turning_points: tuple
    fixed_points: tuple
    sigma: SigmaPoint

    def __call__(self, x):
        return normal_form_eval(self.params, x)


def normal_form_fixed_points(p: NormalFormParams) -> list:
    """(x, multiplier) for the normal form's own three fixed points."""
    mu, t = p.mu, p.t
    out = [(0j, complex(mu))]
    # remaining fixed points: (mu^2 + t^2) x^2 + (4t - 2 mu t) x + 4 - 4 mu = 0
    for r in np.roots([mu * mu + t * t, 4.0 * t - 2.0 * mu * t, 4.0 - 4.0 * mu]):
        r = complex(r)
        A = mu * r
        B = t * r + 2.0
        S = A * A + B * B
        out.append((r, 4.0 * mu * (B * B - A * A) / (S * S)))
    return out


def normal_form_to_map(p: NormalFormParams) -> NormalFormSystem:
    p.check()
    f = QuadraticMap(1.0 / p.mu, p.t / p.mu)
    turning = tuple(x for x in interval_critical_points(p.mu, p.t) if -1.0 < x < 1.0)
    fixed = normal_form_fixed_points(p)
    sigma = sigma_from_multipliers(m for _, m in fixed)
    return NormalFormSystem(p, f, turning, tuple(fixed), sigma)


def interval_params(f: QuadraticMap) -> NormalFormParams:
    """Normal-form coordinates of any map, without the admissibility check."""
    return NormalFormParams(f.mu, f.t)


# ---------------------------------------------------------------------------
# Region classification


@dataclass(frozen=True)
class RegionClass:
    """Topological type of f on its image arc.

    image_interval = (lo, hi) are the two critical values; the image f(R^)
    is the closed arc from hi through infinity to lo, i.e. the complement of
    the open interval (lo, hi).
    """

    tag: str
    essential_critical_point: int | None
    image_interval: tuple
    boundary_ambiguous: bool = False

    @property
    def is_unimodal(self) -> bool:
        return self.tag == UNIMODAL

    def contains(self, z: float) -> bool:
        lo, hi = self.image_interval
        return not (lo < z < hi)


def classify_region(f: QuadraticMap, tol: float = BOUNDARY_TOL) -> RegionClass:
    v = critical_values(f)
    lo, hi = min(v.v1, v.v2), max(v.v1, v.v2)
    inside = [c for c in (-1, 1) if not (lo < c < hi)]
    ambiguous = any(abs(c - e) <= tol for c in (-1, 1) for e in (lo, hi))
    if len(inside) == 0:
        return RegionClass(MONOTONIC, None, (lo, hi), ambiguous)
    if len(inside) == 1:
        return RegionClass(UNIMODAL, inside[0], (lo, hi), ambiguous)
    # bimodal: read the lap pattern in the interval chart
    turning = sorted(x for x in interval_critical_points(f.mu, f.t) if math.isfinite(x))
    probe = 0.5 * (-1.0 + max(turning[0], -1.0))
    slope = normal_form_derivative(NormalFormParams(f.mu, f.t), probe)
    tag = BIMODAL_PMP if slope > 0 else BIMODAL_MPM
    return RegionClass(tag, None, (lo, hi), ambiguous)


def essential_and_trivial(f: QuadraticMap) -> tuple:
    """(c_ess, v_ess, c_triv, v_triv) for a unimodal map."""
    r = classify_region(f)
    if not r.is_unimodal:
        raise ValueError(f"map is {r.tag}, not unimodal")
    v = critical_values(f)
    if r.essential_critical_point == -1:
        return -1.0, v.v1, 1.0, v.v2
    return 1.0, v.v2, -1.0, v.v1
