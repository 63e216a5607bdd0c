"""Critical relations, PCF parameters and bone tracing in the (v1, v2) plane.

Parameters are critical values v = (v1, v2) of f = a(z + 1/z) + b.  In the
unimodal region the essential critical point c1 lies in the image arc and
the trivial one c2 does not.  With b > 0 (the normalised family) c1 = -1
and the pair (v1, v2) is already ordered (essential, trivial); when b < 0
the roles swap and every matrix below is expressed in the ordered pair
(v_ess, v_triv) so that signs keep their meaning.

Relations:
    R1(v) = f^(n-1)(v_ess) - c1      (c1 periodic with period n; a bone)
    R2(v) = f^(m-1)(v_triv) - c1     (c2 lands on c1 after m steps)
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ratbones.errors import (
    ConvergenceError,
    InconsistentJacobianError,
    MinimalityError,
    PoleEncounterError,
    RatbonesError,
    RankDropError,
    RegionMismatchError,
    VanishingDerivativeError,
)
from ratbones.family import (
    POLE_TOL,
    CriticalValuePair,
    QuadraticMap,
    classify_region,
    map_from_critical_values,
    orbit_derivative,
    sigma_coords,
)

log = logging.getLogger(__name__)

NEWTON_TOL = 1e-12
NEWTON_MAXITER = 60
MINIMALITY_TOL = 1e-8
DEDUP_TOL = 1e-8
FD_REL_STEP = 1e-6
FD_RTOL = 1e-4
CHART = "F_Z*: a(z+1/z)+b, critical points -1, +1"

# the a < 0 sheet {v1 > 1, -1 < v2 < 1} meets every unimodal class exactly once
DEFAULT_WINDOW = (1.02, 6.0, -0.98, 0.98)


@dataclass(frozen=True)
class CriticalRelation:
    """One critical orbit relation.

    kind "lands_on_critical": f^q(c_j) = c_target.
    kind "preperiodic": f^q(c_j) = f^target(c_j) with 1 <= target < q.
    """

    kind: str
    j: int
    q: int
    target: int

    def __post_init__(self):
        if self.kind not in ("lands_on_critical", "preperiodic"):
            raise ValueError(f"unknown relation kind {self.kind!r}")
        if self.q < 1:
            raise ValueError("q must be >= 1")
        if self.kind == "preperiodic" and not 1 <= self.target < self.q:
            raise ValueError("preperiodic relation needs 1 <= ell < q")


def _as_v(v) -> np.ndarray:
    if isinstance(v, CriticalValuePair):
        return v.as_array()
    return np.asarray(v, dtype=float)


def _map(v: np.ndarray) -> QuadraticMap:
    return QuadraticMap((v[1] - v[0]) / 4.0, (v[0] + v[1]) / 2.0)


def essential_point(v) -> float:
    """Essential critical point of a unimodal parameter."""
    v = _as_v(v)
    r = classify_region(_map(v))
    if not r.is_unimodal:
        raise RegionMismatchError(f"v = {tuple(v)} is {r.tag}, not unimodal")
    return float(r.essential_critical_point)


def _orbit_from(f: QuadraticMap, x: float, k: int) -> float:
    for _ in range(k):
        if abs(x) <= POLE_TOL:
            raise PoleEncounterError(f"orbit point {x!r} at the pole")
        x = f(x)
    return x


def residual_R1(v, n: int, essential: float | None = None) -> float:
    """f^(n-1)(v_ess) - c_ess."""
    v = _as_v(v)
    c = essential_point(v) if essential is None else essential
    f = _map(v)
    return _orbit_from(f, f(c), n - 1) - c


def residual_R2(v, m: int, essential: float | None = None) -> float:
    """f^(m-1)(v_triv) - c_ess."""
    v = _as_v(v)
    c = essential_point(v) if essential is None else essential
    f = _map(v)
    return _orbit_from(f, f(-c), m - 1) - c


def residual_preperiodic(v, j: int, q: int, ell: int) -> float:
    """f^(q-1)(v_j) - f^(ell-1)(v_j) for critical value v_j = f(c_j), c_1 = -1, c_2 = +1."""
    if not 1 <= ell < q:
        raise ValueError(f"need 1 <= ell < q, got ell={ell}, q={q}")
    v = _as_v(v)
    f = _map(v)
    x = v[j - 1]
    early = _orbit_from(f, x, ell - 1)
    late = _orbit_from(f, early, q - ell)
    return late - early


def relation_system(n: int, m: int, essential: float = -1.0) -> Callable:
    """v -> (R1, R2) with the essential point held fixed."""

    def F(v):
        return np.array([residual_R1(v, n, essential), residual_R2(v, m, essential)])

    return F


def ordered(v, essential: float) -> np.ndarray:
    """Permutation taking (v1, v2) to (v_ess, v_triv)."""
    v = _as_v(v)
    return v if essential == -1.0 else v[::-1]


# ---------------------------------------------------------------------------
# Finite-difference Jacobians


@dataclass(frozen=True)
class FDJacobian:
    matrix: np.ndarray
    consistency: float


def jacobian_fd(F: Callable, v, rel_step: float = FD_REL_STEP, rtol: float = FD_RTOL) -> FDJacobian:
    """Central differences with one Richardson level.

    `consistency` is the largest gap between the Richardson value and the
    finer central difference, relative to the largest entry.
    """
    v = _as_v(v)
    h = rel_step * max(1.0, float(np.max(np.abs(v))))
    F0 = np.atleast_1d(F(v))
    coarse = np.empty((F0.size, v.size))
    fine = np.empty_like(coarse)
    for j in range(v.size):
        e = np.zeros(v.size)
        e[j] = 1.0
        coarse[:, j] = (np.atleast_1d(F(v + h * e)) - np.atleast_1d(F(v - h * e))) / (2 * h)
        fine[:, j] = (np.atleast_1d(F(v + 0.5 * h * e)) - np.atleast_1d(F(v - 0.5 * h * e))) / h
    rich = (4.0 * fine - coarse) / 3.0
    scale = max(float(np.max(np.abs(rich))), 1e-300)
    consistency = float(np.max(np.abs(rich - fine))) / scale
    if consistency > rtol:
        raise InconsistentJacobianError(f"Richardson levels differ by {consistency:.2e} (rel)")
    return FDJacobian(rich, consistency)


# ---------------------------------------------------------------------------
# PCF points


@dataclass(frozen=True)
class PCFPoint:
    """A hyperbolic PCF parameter: c1 has period n, f^m(c2) = c1."""

    v: CriticalValuePair
    n: int
    m: int
    jacobian: tuple
    quotient: float
    derivative_sign: int
    essential: float = -1.0
    orbit_derivatives: tuple = (1.0, 1.0)
    residuals: tuple = (0.0, 0.0)
    jacobian_consistency: float = 0.0
    residual_history: tuple = field(default=(), compare=False)

    @property
    def array(self) -> np.ndarray:
        return self.v.as_array()

    def to_dict(self) -> dict:
        return {
            "v1": self.v.v1,
            "v2": self.v.v2,
            "n": self.n,
            "m": self.m,
            "jacobian": [list(r) for r in self.jacobian],
            "quotient": self.quotient,
            "derivative_sign": self.derivative_sign,
            "essential": self.essential,
            "orbit_derivatives": list(self.orbit_derivatives),
            "residuals": list(self.residuals),
        }


def quadratic_constant(history: Sequence[float], floor: float = 1e-9) -> float:
    """max r_{k+1} / r_k^2 over the last three steps above the noise floor."""
    pairs = [(a, b) for a, b in zip(history[:-1], history[1:]) if b > floor and a > 0]
    pairs = pairs[-3:]
    if not pairs:
        return 0.0
    return max(b / (a * a) for a, b in pairs)


def _newton(F: Callable, v0: np.ndarray, tol: float, maxiter: int):
    v = np.array(v0, dtype=float)
    r = F(v)
    hist = [float(np.max(np.abs(r)))]
    for _ in range(maxiter):
        if hist[-1] < tol:
            return v, hist
        J = jacobian_fd(F, v, rtol=np.inf).matrix
        try:
            step = np.linalg.solve(J, -r)
        except np.linalg.LinAlgError as exc:
            raise ConvergenceError("singular Jacobian in Newton") from exc
        phi = 0.5 * float(r @ r)
        lam = 1.0
        while True:
            trial = v + lam * step
            try:
                rt = F(trial)
                ok = np.all(np.isfinite(rt)) and 0.5 * float(rt @ rt) <= (1.0 - 1e-4 * lam) * phi
            except (RatbonesError, ArithmeticError):
                ok = False
            if ok:
                break
            lam *= 0.5
            if lam < 1e-10:
                if hist[-1] < 1e3 * tol:  # stuck at rounding level just above tol
                    return v, hist
                raise ConvergenceError(f"line search failed at residual {hist[-1]:.3e}")
        v, r = trial, rt
        hist.append(float(np.max(np.abs(r))))
    if hist[-1] < tol:
        return v, hist
    raise ConvergenceError(f"no convergence after {maxiter} iterations (residual {hist[-1]:.3e})")


def critical_orbit(f: QuadraticMap, c: float, k: int) -> list:
    """[f(c), f^2(c), ..., f^k(c)]."""
    out = []
    x = c
    for _ in range(k):
        x = f(x)
        out.append(x)
    return out


def check_minimality(v, n: int, m: int, essential: float = -1.0, tol: float = MINIMALITY_TOL) -> None:
    """Reject (n, m) when a shorter relation already holds at v.

    Once c2 lands on the n-cycle of c1, landing again happens only at steps
    m - kn, and c1 can only return early at divisors of n.  Those shorter
    relations make the (n, m) system singular, so Newton stalls a little
    away from the true point; they are re-solved to see whether they give
    the same parameter.
    """
    v = _as_v(v)
    f = _map(v)
    c = essential
    for label, start, k in (("c1 returns", c, n), ("c2 lands on c1", -c, m)):
        for i, x in enumerate(critical_orbit(f, start, k)[:-1], start=1):
            if abs(x - c) <= tol:
                raise MinimalityError(f"{label} at step {i} < {k}")
    shorter = [(i, m) for i in range(1, n) if n % i == 0]
    shorter += [(n, i) for i in range(m - n, 0, -n)]
    for nn, mm in shorter:
        try:
            w, _ = _newton(relation_system(nn, mm, essential), v, NEWTON_TOL, NEWTON_MAXITER)
        except (RatbonesError, ArithmeticError):
            continue
        if np.max(np.abs(w - v)) < 1e-3:
            raise MinimalityError(f"relation ({nn}, {mm}) already holds near v")


def newton_pcf(v0, n: int, m: int, essential: float = -1.0, tol: float = NEWTON_TOL, maxiter: int = NEWTON_MAXITER) -> PCFPoint:
    """Locate the PCF parameter with relations (n, m) near v0."""
    F = relation_system(n, m, essential)
    v, hist = _newton(F, _as_v(v0), tol, maxiter)
    check_minimality(v, n, m, essential)
    return _pcf_from(v, n, m, essential, hist)


def _pcf_from(v, n, m, essential, hist=()):
    F = relation_system(n, m, essential)
    fd = jacobian_fd(F, v)
    perm = [0, 1] if essential == -1.0 else [1, 0]
    J = fd.matrix[:, perm]
    f = _map(v)
    d1 = orbit_derivative(f, f(essential), n - 1)
    d2 = orbit_derivative(f, f(-essential), m - 1)
    q = _quotient(J, d1, d2)
    r = F(v)
    return PCFPoint(
        v=CriticalValuePair(float(v[0]), float(v[1])),
        n=n,
        m=m,
        jacobian=tuple(tuple(float(x) for x in row) for row in J),
        quotient=q,
        derivative_sign=int(np.sign(d2)),
        essential=essential,
        orbit_derivatives=(d1, d2),
        residuals=(float(r[0]), float(r[1])),
        jacobian_consistency=fd.consistency,
        residual_history=tuple(hist),
    )


def det2(J) -> float:
    (a, b), (c, d) = J
    return a * d - b * c


def _quotient(J, d1: float, d2: float) -> float:
    for d in (d1, d2):
        if abs(d) <= 1e-12:
            raise VanishingDerivativeError(f"orbit derivative {d} vanishes")
    return det2(J) / (d1 * d2)


def transversality_quotient(p: PCFPoint) -> float:
    """det(DR) / ((f^(n-1))'(v_ess) (f^(m-1))'(v_triv))."""
    d1, d2 = p.orbit_derivatives
    return _quotient(p.jacobian, d1, d2)


# ---------------------------------------------------------------------------
# Tangent frames


@dataclass(frozen=True)
class TangentFrame:
    """Unit tangent E and normalised gradient column A = grad R1 / D.

    Both vectors are expressed in the ordered coordinates (v_ess, v_triv).
    """

    E: np.ndarray
    gradient_column: np.ndarray
    orbit_derivative: float

    @property
    def det(self) -> float:
        A, E = self.gradient_column, self.E
        return float(A[0] * E[1] - A[1] * E[0])


def frame_from_gradient(grad: np.ndarray, d: float, tol: float = 1e-10) -> TangentFrame:
    norm = float(np.hypot(*grad))
    if norm < tol:
        raise RankDropError(f"|grad R1| = {norm:.3e}")
    raw = d * np.array([-grad[1], grad[0]])
    E = raw / np.hypot(*raw)
    A = grad / d
    frame = TangentFrame(E, A, d)
    assert frame.det > 0, "orientation det(A|E) must be positive"
    return frame


def tangent_E(v, n: int, essential: float | None = None) -> TangentFrame:
    """Positive direction along the bone through v."""
    v = _as_v(v)
    c = essential_point(v) if essential is None else essential
    grad = jacobian_fd(lambda w: residual_R1(w, n, c), v, rtol=np.inf).matrix[0]
    if c != -1.0:
        grad = grad[::-1]
    f = _map(v)
    d = orbit_derivative(f, f(c), n - 1)
    if abs(d) <= 1e-12:
        raise VanishingDerivativeError(f"(f^(n-1))'(v_ess) = {d}")
    return frame_from_gradient(grad, d)


# ---------------------------------------------------------------------------
# Curve tracing


@dataclass
class _Curve:
    """What the tracer needs: a scalar residual, orientation, region test."""

    residual: Callable
    orientation: Callable  # v -> +1/-1 multiplying (-dR/dv2, dR/dv1)
    inside: Callable  # v -> bool
    label: Callable = lambda v: "boundary"


@dataclass(frozen=True, eq=False)
class Bone:
    n: int
    points: np.ndarray
    kind: str
    endpoint_info: tuple
    arclength: float
    max_residual: float = 0.0
    max_turn: float = 0.0
    steps: int = 0

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "kind": self.kind,
            "endpoint_info": list(self.endpoint_info),
            "arclength": self.arclength,
            "max_residual": self.max_residual,
            "points": [[float(a), float(b)] for a, b in self.points],
        }

    def is_simple(self) -> bool:
        from shapely.geometry import LineString

        pts = self.points
        if self.kind == "loop":
            pts = np.vstack([pts, pts[:1]])
        return LineString(pts).is_simple

    def distance_to(self, v) -> float:
        from shapely.geometry import LineString, Point

        return LineString(self.points).distance(Point(*_as_v(v)))


def _grad(R: Callable, v: np.ndarray, h: float = 1e-7) -> np.ndarray:
    g = np.empty(2)
    for j in range(2):
        e = np.zeros(2)
        e[j] = h * max(1.0, abs(v[j]))
        g[j] = (R(v + e) - R(v - e)) / (2 * e[j])
    return g


def _tangent(curve: _Curve, v: np.ndarray, direction: int) -> np.ndarray:
    g = _grad(curve.residual, v)
    norm = np.hypot(*g)
    if norm < 1e-10:
        raise RankDropError(f"|grad| = {norm:.3e} at {v}")
    return direction * curve.orientation(v) * np.array([-g[1], g[0]]) / norm


def _correct(curve: _Curve, pred: np.ndarray, E: np.ndarray, tol: float, maxiter: int = 8):
    """Newton on R(q) = 0, E.(q - pred) = 0."""
    q = pred.copy()
    for _ in range(maxiter):
        r = curve.residual(q)
        if not math.isfinite(r):
            return None
        if abs(r) < tol:
            return q
        g = _grad(curve.residual, q)
        M = np.array([g, E])
        try:
            dq = np.linalg.solve(M, [-r, -float(E @ (q - pred))])
        except np.linalg.LinAlgError:
            return None
        q = q + dq
    r = curve.residual(q)
    return q if math.isfinite(r) and abs(r) < tol else None


@dataclass(frozen=True)
class TraceOptions:
    h0: float = 2e-3
    h_min: float = 1e-5
    h_max: float = 1e-2
    grow: float = 1.3
    grow_after: int = 3
    budget: int = 100_000
    closure_tol: float = 1e-6
    align: float = 0.9
    max_turn: float = 0.2
    residual_tol: float = 1e-11
    window: tuple | None = None


def _in_window(v, window) -> bool:
    if window is None:
        return True
    x0, x1, y0, y1 = window
    return x0 <= v[0] <= x1 and y0 <= v[1] <= y1


def _trace_one_way(curve: _Curve, seed: np.ndarray, direction: int, opts: TraceOptions, check_loop: bool):
    pts = [seed]
    v = seed
    E = _tangent(curve, v, direction)
    E0 = E
    h = opts.h0
    length = 0.0
    successes = 0
    max_turn = 0.0
    steps = 0
    while True:
        if steps >= opts.budget:
            return pts, "budget", length, max_turn
        steps += 1
        # try closing the loop exactly onto the seed
        if check_loop and length > 10 * opts.h_max:
            d = seed - v
            ahead = float(E @ d)
            if np.hypot(*d) < 2 * h and ahead > 0 and float(E @ E0) > opts.align:
                q = _correct(curve, v + ahead * E, E, opts.residual_tol)
                if q is not None and np.hypot(*(q - seed)) < opts.closure_tol:
                    length += float(np.hypot(*(q - v)))
                    return pts, "loop", length, max_turn
        q = _correct(curve, v + h * E, E, opts.residual_tol)
        reason = None
        if q is None:
            reason = "corrector"
        elif not _in_window(q, opts.window):
            reason = "window"
        elif not curve.inside(q):
            reason = "boundary"
        else:
            try:
                Eq = _tangent(curve, q, direction)
            except (RankDropError, ArithmeticError, RegionMismatchError):
                reason = "corrector"
            else:
                turn = math.acos(max(-1.0, min(1.0, float(Eq @ E))))
                if turn > opts.max_turn or np.hypot(*(q - v)) > 2 * opts.h_max:
                    reason = "corrector"
        if reason is not None:
            h *= 0.5
            successes = 0
            if h < opts.h_min:
                if reason == "corrector":
                    raise ConvergenceError(f"corrector stagnated below h_min at {v}")
                return pts, reason, length, max_turn
            continue
        max_turn = max(max_turn, turn)
        length += float(np.hypot(*(q - v)))
        pts.append(q)
        v, E = q, Eq
        successes += 1
        if successes >= opts.grow_after:
            h = min(h * opts.grow, opts.h_max)
            successes = 0


def trace_curve(curve: _Curve, seed, opts: TraceOptions = TraceOptions(), n: int = 0) -> Bone:
    """Pseudo-arclength trace of curve.residual = 0 in both directions."""
    seed = _as_v(seed)
    fwd, why_f, len_f, turn_f = _trace_one_way(curve, seed, +1, opts, check_loop=True)
    res = max(abs(curve.residual(p)) for p in fwd)
    if why_f == "loop":
        return Bone(n, np.array(fwd), "loop", ("closed", "closed"), len_f, res, turn_f, len(fwd))
    back, why_b, len_b, turn_b = _trace_one_way(curve, seed, -1, opts, check_loop=False)
    pts = np.array(back[::-1] + fwd[1:])
    res = max(res, max(abs(curve.residual(p)) for p in back))
    ends = (_end_label(curve, why_b, pts[0]), _end_label(curve, why_f, pts[-1]))
    kind = "truncated" if "budget" in (why_f, why_b) else "arc"
    return Bone(n, pts, kind, ends, len_f + len_b, res, max(turn_f, turn_b), len(pts))


def _end_label(curve: _Curve, why: str, v) -> str:
    if why == "boundary":
        return curve.label(v)
    return why


def sigma1_at(v) -> float:
    return sigma_coords(_map(_as_v(v))).sigma1


def boundary_label(v) -> str:
    """Which side of the unimodal region a boundary point sits on."""
    s1 = sigma1_at(v)
    return "sigma1=2" if abs(s1 - 2.0) <= abs(s1 + 6.0) else "sigma1=-6"


def bone_curve(n: int, essential: float = -1.0) -> _Curve:
    def R(v):
        try:
            return residual_R1(v, n, essential)
        except PoleEncounterError:
            return math.nan

    def orientation(v):
        f = _map(v)
        d = orbit_derivative(f, f(essential), n - 1)
        s = 1.0 if d > 0 else -1.0
        # the (v_ess, v_triv) ordering is a reflection when essential = +1
        return s if essential == -1.0 else -s

    def inside(v):
        try:
            r = classify_region(_map(v))
        except Exception:
            return False
        return r.is_unimodal and r.essential_critical_point == essential and not r.boundary_ambiguous

    return _Curve(R, orientation, inside, boundary_label)


def trace_bone(seed, n: int, opts: TraceOptions = TraceOptions(), essential: float | None = None) -> Bone:
    """Trace the component of R1 = 0 (period-n bone) through seed."""
    seed = _as_v(seed)
    c = essential_point(seed) if essential is None else essential
    r = residual_R1(seed, n, c)
    if abs(r) >= 1e-8:
        raise ValueError(f"seed is not on the bone: |R1| = {abs(r):.3e}")
    return trace_curve(bone_curve(n, c), seed, opts, n)


def _nearest_on_polyline(points: np.ndarray, v: np.ndarray, closed: bool):
    P = np.vstack([points, points[:1]]) if closed else points
    A, B = P[:-1], P[1:]
    d = B - A
    L2 = np.einsum("ij,ij->i", d, d)
    s = np.clip(np.einsum("ij,ij->i", v - A, d) / np.where(L2 > 0, L2, 1.0), 0.0, 1.0)
    proj = A + s[:, None] * d
    k = int(np.argmin(np.hypot(*(proj - v).T)))
    return proj[k], d[k], float(np.hypot(*(proj[k] - v)))


def on_bone(bone: Bone, v, essential: float = -1.0, tol: float = 1e-7) -> bool:
    """Whether v lies on the traced curve itself, not merely close to the polyline.

    The orthogonal projection of v onto the nearest segment is corrected back
    onto R1 = 0 along the normal line through it.  That line passes through
    v, so the corrector lands on v exactly when v belongs to this bone; a
    nearby distinct bone is never reached first.
    """
    v = _as_v(v)
    if len(bone.points) < 2:
        return bool(np.max(np.abs(bone.points[0] - v)) < tol)
    proj, direction, dist = _nearest_on_polyline(bone.points, v, bone.kind == "loop")
    if dist > 1e-2:
        return False
    if dist < tol:
        return True
    norm = np.hypot(*direction)
    if norm == 0:
        return False
    q = _correct(bone_curve(bone.n, essential), proj, direction / norm, 1e-13, maxiter=20)
    return q is not None and float(np.hypot(*(q - v))) < tol


# ---------------------------------------------------------------------------
# Positive direction


def directional_R2(v, m: int, E: np.ndarray, essential: float, h: float = 1e-6) -> float:
    """Central difference of R2 along E, E given in (v_ess, v_triv) order."""
    v = _as_v(v)
    e = E if essential == -1.0 else E[::-1]
    return (residual_R2(v + h * e, m, essential) - residual_R2(v - h * e, m, essential)) / (2 * h)


def check_positive_direction(p: PCFPoint, bone: Bone | None = None) -> dict:
    """Sign data behind the no-loop argument at a PCF point."""
    v = p.array
    if bone is not None and not on_bone(bone, v, p.essential):
        raise ValueError("PCF point does not lie on the given bone")
    frame = tangent_E(v, p.n, p.essential)
    raw = directional_R2(v, p.m, frame.E, p.essential)
    d2 = p.orbit_derivatives[1]
    if abs(d2) <= 1e-12:
        raise VanishingDerivativeError(f"(f^(m-1))'(v_triv) = {d2}")
    normalized = raw / d2
    return {
        "v": [p.v.v1, p.v.v2],
        "n": p.n,
        "m": p.m,
        "chart": CHART,
        "E": [float(x) for x in frame.E],
        "orbit_derivative_sign": int(np.sign(d2)),
        "directional_derivative": raw,
        "directional_sign": int(np.sign(raw)),
        "normalized": normalized,
        "positive": bool(normalized > 0),
    }


# ---------------------------------------------------------------------------
# Scanning


def interval_residuals(V1: np.ndarray, V2: np.ndarray, k: int, which: int) -> np.ndarray:
    """Vectorised residual with the same zero set as R1 (which=1) or R2 (which=2).

    Evaluated in the pole-free interval chart x = 2a/(z - b), where the
    critical values sit at x = -1 (z = -1's value) and x = +1, and the
    essential point -1 sits at x = -2/(mu + t).  Used only to find sign
    changes; assumes essential = -1.
    """
    a = (V2 - V1) / 4.0
    b = (V1 + V2) / 2.0
    with np.errstate(divide="ignore", invalid="ignore"):
        mu = 1.0 / a
        t = b / a
        x = np.full_like(V1, -1.0 if which == 1 else 1.0)
        for _ in range(k - 1):
            A = mu * x
            B = t * x + 2.0
            x = 2.0 * A * B / (A * A + B * B)
        return x + 2.0 / (mu + t)


def unimodal_mask(V1: np.ndarray, V2: np.ndarray, essential: float = -1.0) -> np.ndarray:
    lo = np.minimum(V1, V2)
    hi = np.maximum(V1, V2)
    c = essential
    return ~((lo < c) & (c < hi)) & ((lo < -c) & (-c < hi))


def _grid(window, shape):
    x0, x1, y0, y1 = window
    nx, ny = shape
    v1 = np.linspace(x0, x1, nx)
    v2 = np.linspace(y0, y1, ny)
    return np.meshgrid(v1, v2)


def _sign_change_cells(Z: np.ndarray) -> np.ndarray:
    s = np.sign(Z)
    corners = np.stack([s[:-1, :-1], s[1:, :-1], s[:-1, 1:], s[1:, 1:]])
    return (corners.max(axis=0) > 0) & (corners.min(axis=0) < 0)


def scan_pair(window, n: int, m: int, shape=(200, 200)) -> list:
    """PCF points with relations (n, m) found from grid sign changes."""
    V1, V2 = _grid(window, shape)
    inside = unimodal_mask(V1, V2)
    R1 = np.where(inside, interval_residuals(V1, V2, n, 1), np.nan)
    R2 = np.where(inside, interval_residuals(V1, V2, m, 2), np.nan)
    cells = _sign_change_cells(R1) & _sign_change_cells(R2)
    iy, ix = np.nonzero(cells)
    found = []
    for j, i in sorted(zip(iy, ix)):
        seed = np.array([0.5 * (V1[j, i] + V1[j, i + 1]), 0.5 * (V2[j, i] + V2[j + 1, i])])
        try:
            p = newton_pcf(seed, n, m)
        except (RatbonesError, ArithmeticError):
            continue
        if not _inside_open(p.array) or not _in_window(p.array, window):
            continue
        if any(np.max(np.abs(p.array - q.array)) < DEDUP_TOL for q in found):
            continue
        found.append(p)
    return found


def _inside_open(v, margin: float = 1e-8) -> bool:
    r = classify_region(_map(_as_v(v)), tol=margin)
    return r.is_unimodal and not r.boundary_ambiguous and r.essential_critical_point == -1


def _scan_task(args):
    window, n, m, shape = args
    return scan_pair(window, n, m, shape)


def sort_key(p: PCFPoint):
    return (p.n, p.m, p.v.v1, p.v.v2)


def scan_pcf(window=DEFAULT_WINDOW, n_max: int = 4, m_max: int = 6, shape=(200, 200), workers: int = 1) -> list:
    """All PCF points with n <= n_max, m <= m_max found in the window.

    Output order is lexicographic in (n, m, v1, v2) whatever the worker count.
    """
    window = tuple(float(x) for x in window)
    tasks = [(window, n, m, tuple(shape)) for n in range(1, n_max + 1) for m in range(1, m_max + 1)]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as pool:
            chunks = list(pool.map(_scan_task, tasks))
    else:
        chunks = [_scan_task(t) for t in tasks]
    return sorted((p for chunk in chunks for p in chunk), key=sort_key)


def period_of_essential(v, n_max: int = 64, tol: float = MINIMALITY_TOL) -> int | None:
    v = _as_v(v)
    c = essential_point(v)
    f = _map(v)
    x = c
    for k in range(1, n_max + 1):
        x = f(x)
        if abs(x - c) <= tol:
            return k
    return None


def grid_line_seeds(window, n: int, lines: int = 41, samples: int = 2001) -> list:
    """Points of R1 = 0 found by bisection along horizontal and vertical grid lines."""
    from scipy.optimize import brentq

    x0, x1, y0, y1 = window
    seeds = []
    for horizontal in (True, False):
        for c in np.linspace(y0, y1, lines) if horizontal else np.linspace(x0, x1, lines):
            s = np.linspace(x0, x1, samples) if horizontal else np.linspace(y0, y1, samples)
            V1, V2 = (s, np.full_like(s, c)) if horizontal else (np.full_like(s, c), s)
            inside = unimodal_mask(V1, V2)
            R = np.where(inside, interval_residuals(V1, V2, n, 1), np.nan)
            idx = np.nonzero((np.sign(R[:-1]) * np.sign(R[1:])) < 0)[0]
            for i in idx:
                g = (lambda u: residual_R1((u, c), n, -1.0)) if horizontal else (lambda u: residual_R1((c, u), n, -1.0))
                try:
                    ga, gb = g(s[i]), g(s[i + 1])
                    if ga * gb >= 0:
                        continue
                    u = brentq(g, s[i], s[i + 1], xtol=1e-15, rtol=1e-15)
                except (ValueError, ArithmeticError):
                    continue
                pt = np.array([u, c]) if horizontal else np.array([c, u])
                if abs(residual_R1(pt, n, -1.0)) < 1e-10 and _inside_open(pt):
                    seeds.append(pt)
    return seeds
