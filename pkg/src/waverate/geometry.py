"""Rays, billiards and foliations for the model geometries.

Three geometries are supported: a flat torus (straight lines with wraparound),
a disk with circular holes (exact billiard), and a surface of revolution
``dy^2 + rho(y)^2 dtheta^2`` (geodesic ODE, RK4, Clairaut renormalization).
The peanut is the revolution surface with rho = cosh.
"""

from __future__ import annotations

import csv
import itertools
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
import sympy as sp
from scipy.optimize import minimize, minimize_scalar

from .report import CheckReport

GRAZING_TOL = 1e-9


# ---------------------------------------------------------------- geometries

@dataclass(frozen=True)
class FlatTorus:
    l1: float = 2 * math.pi
    l2: float = 2 * math.pi
    kind: str = field(default="flat_torus", init=False)

    @property
    def diameter(self) -> float:
        return 0.5 * math.hypot(self.l1, self.l2)

    def wrap(self, x1, x2):
        """Signed fundamental-cell coordinates in [-L/2, L/2); points already in
        the cell are returned unchanged (no modular round-off)."""
        def one(x, L):
            x = np.asarray(x, float)
            inside = (x >= -L / 2) & (x < L / 2)
            return np.where(inside, x, (x + L / 2) % L - L / 2)
        return one(x1, self.l1), one(x2, self.l2)


@dataclass(frozen=True)
class Disk:
    center: tuple[float, float]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        if not self.radius > 0:
            raise ValueError("disk radius must be positive")


@dataclass(frozen=True)
class ObstacleConfig:
    disks: tuple[Disk, ...]

    def __post_init__(self):
        disks = tuple(d if isinstance(d, Disk) else Disk(d[:2], d[2]) for d in self.disks)
        object.__setattr__(self, "disks", disks)
        for (i, a), (j, b) in itertools.combinations(enumerate(disks), 2):
            if _gap(a, b) <= 0:
                raise ValueError(f"obstacles {i} and {j} overlap or touch")

    @classmethod
    def preset(cls, name: str) -> "ObstacleConfig":
        if name == "equilateral":
            centers = [(math.cos(a) / math.sqrt(3), math.sin(a) / math.sqrt(3))
                       for a in (math.pi / 2, math.pi / 2 + 2 * math.pi / 3, math.pi / 2 + 4 * math.pi / 3)]
            return cls(tuple(Disk(c, 0.1) for c in centers))
        if name == "collinear":
            return cls(tuple(Disk((x, 0.0), 0.1) for x in (-0.6, 0.0, 0.6)))
        if name == "two_disk":
            return cls((Disk((-0.5, 0.0), 0.2), Disk((0.5, 0.0), 0.2)))
        raise ValueError(f"unknown obstacle preset {name!r}")


def _gap(a: Disk, b: Disk) -> float:
    return math.dist(a.center, b.center) - a.radius - b.radius


@dataclass(frozen=True)
class DiskWithHoles:
    outer_radius: float
    obstacles: ObstacleConfig
    center: tuple[float, float] = (0.0, 0.0)
    kind: str = field(default="disk_with_holes", init=False)

    def __post_init__(self):
        for i, d in enumerate(self.obstacles.disks):
            if math.dist(d.center, self.center) + d.radius >= self.outer_radius:
                raise ValueError(f"obstacle {i} is not strictly inside the outer disk")

    @property
    def diameter(self) -> float:
        return 2 * self.outer_radius

    def contains(self, x, y) -> np.ndarray:
        x, y = np.asarray(x, float), np.asarray(y, float)
        inside = np.hypot(x - self.center[0], y - self.center[1]) < self.outer_radius
        for d in self.obstacles.disks:
            inside &= np.hypot(x - d.center[0], y - d.center[1]) > d.radius
        return inside


@dataclass(frozen=True)
class SurfaceOfRevolution:
    """Metric dy^2 + rho(y)^2 dtheta^2 on y_range x circle.

    ``profile`` is "cosh" or a pair (y samples, rho samples) interpolated by a
    cubic spline.
    """

    profile: object = "cosh"
    y_range: tuple[float, float] = (-3.0, 3.0)
    kind: str = field(default="surface_of_revolution", init=False)

    def __post_init__(self):
        lo, hi = self.y_range
        if not lo < hi:
            raise ValueError("empty y range")
        if not isinstance(self.profile, str):
            ys, rs = (np.asarray(a, float) for a in self.profile)
            if np.any(rs <= 0):
                raise ValueError("rho must be positive on the range")
            from scipy.interpolate import CubicSpline

            object.__setattr__(self, "_spline", CubicSpline(ys, rs))
        elif self.profile != "cosh":
            raise ValueError(f"unknown profile {self.profile!r}")
        yy = np.linspace(lo, hi, 401)
        if np.any(self.rho(yy) <= 0):
            raise ValueError("rho must be positive on the range")

    @classmethod
    def peanut(cls, y_max: float = 3.0) -> "SurfaceOfRevolution":
        return cls("cosh", (-y_max, y_max))

    @property
    def diameter(self) -> float:
        lo, hi = self.y_range
        return (hi - lo) + math.pi * float(np.max(self.rho(np.linspace(lo, hi, 401))))

    def rho(self, y):
        if isinstance(self.profile, str):
            return np.cosh(y)
        return self._spline(y)

    def drho(self, y):
        if isinstance(self.profile, str):
            return np.sinh(y)
        return self._spline(y, 1)


# ----------------------------------------------------------------------- rays

@dataclass(frozen=True)
class Ray:
    """Start point and unit direction in chart coordinates.

    On a surface of revolution the chart is (y, theta) and the direction is
    (y', theta') with y'^2 + rho^2 theta'^2 = 1.
    """

    position: tuple[float, float]
    direction: tuple[float, float]

    def __post_init__(self):
        object.__setattr__(self, "position", tuple(float(v) for v in self.position))
        object.__setattr__(self, "direction", tuple(float(v) for v in self.direction))

    @classmethod
    def planar(cls, x, y, angle) -> "Ray":
        c, s = _unit(angle)
        return cls((x, y), (c, s))

    @classmethod
    def on_surface(cls, surface: SurfaceOfRevolution, y, theta, angle) -> "Ray":
        """Angle measured from the y axis in an orthonormal frame."""
        r = float(surface.rho(y))
        c, s = _unit(angle)
        return cls((y, theta), (c, s / r))

    def clairaut(self, surface: SurfaceOfRevolution) -> float:
        return float(surface.rho(self.position[0])) ** 2 * self.direction[1]


def _unit(angle):
    # snap trig round-off so that axis-aligned rays stay exactly on unstable orbits
    c, s = math.cos(angle), math.sin(angle)
    return (0.0 if abs(c) < 1e-15 else c), (0.0 if abs(s) < 1e-15 else s)


def metric_norm(geometry, ray: Ray) -> float:
    dy, dt = ray.direction
    if isinstance(geometry, SurfaceOfRevolution):
        return math.sqrt(dy * dy + float(geometry.rho(ray.position[0])) ** 2 * dt * dt)
    return math.hypot(dy, dt)


@dataclass
class RayPath:
    times: np.ndarray
    positions: np.ndarray
    directions: np.ndarray
    flag: str = "ok"
    bounces: int = 0
    clairaut: np.ndarray | None = None
    normals: np.ndarray | None = None


def trace_ray(geometry, ray: Ray, t_max: float, dt: float = 0.01, max_bounces: int = 10**6) -> RayPath:
    """Follow a ray up to time ``t_max``.

    Torus: exact line sampled every ``dt``. Billiard: exact bounce events
    (positions and directions right after each reflection, plus the end point).
    Revolution surface: RK4 with step ``dt``.
    """
    if t_max < 0:
        raise ValueError("t_max must be nonnegative")
    if abs(metric_norm(geometry, ray) - 1) > 1e-10:
        raise ValueError("direction must have unit metric norm")
    if isinstance(geometry, FlatTorus):
        t = np.arange(0.0, t_max + 0.5 * dt, dt) if t_max > 0 else np.zeros(1)
        x1, x2 = geometry.wrap(ray.position[0] + t * ray.direction[0],
                               ray.position[1] + t * ray.direction[1])
        dirs = np.tile(ray.direction, (len(t), 1))
        return RayPath(t, np.column_stack([x1, x2]), dirs)
    if isinstance(geometry, DiskWithHoles):
        return _trace_billiard(geometry, ray, t_max, max_bounces)
    if isinstance(geometry, SurfaceOfRevolution):
        return _trace_geodesic(geometry, ray, t_max, dt)
    raise TypeError("unknown geometry")


def _circle_hit(p, d, c, r, inside):
    """Smallest s > 0 with |p + s d - c| = r (d unit)."""
    w = (p[0] - c[0], p[1] - c[1])
    b = d[0] * w[0] + d[1] * w[1]
    q = w[0] * w[0] + w[1] * w[1] - r * r
    disc = b * b - q
    if disc < 0:
        return math.inf
    sq = math.sqrt(disc)
    if inside:
        return -b + sq
    # exterior: the near root, computed without cancellation
    s = q / (-b + sq) if b < 0 else -b - sq
    return s if s > 1e-12 else math.inf


def _trace_billiard(g: DiskWithHoles, ray: Ray, t_max, max_bounces):
    p = ray.position
    if not g.contains(*p):
        raise ValueError("billiard rays must start in the domain interior")
    d = ray.direction
    times, pts, dirs, normals = [0.0], [p], [d], [(0.0, 0.0)]
    t, flag, n_b = 0.0, "ok", 0
    circles = [(g.center, g.outer_radius, True)] + [(o.center, o.radius, False) for o in g.obstacles.disks]
    while n_b < max_bounces:
        hits = [_circle_hit(p, d, c, r, inside) for c, r, inside in circles]
        k = int(np.argmin(hits))
        s = hits[k]
        if t + s > t_max:
            p = (p[0] + (t_max - t) * d[0], p[1] + (t_max - t) * d[1])
            times.append(t_max)
            pts.append(p)
            dirs.append(d)
            normals.append((0.0, 0.0))
            break
        c, r, inside = circles[k]
        p = (p[0] + s * d[0], p[1] + s * d[1])
        t += s
        n = ((p[0] - c[0]) / r, (p[1] - c[1]) / r)
        dn = d[0] * n[0] + d[1] * n[1]
        if abs(dn) < GRAZING_TOL:
            flag = "grazing"
            times.append(t)
            pts.append(p)
            dirs.append(d)
            normals.append(n)
            break
        d = (d[0] - 2 * dn * n[0], d[1] - 2 * dn * n[1])
        nd = math.hypot(*d)
        d = (d[0] / nd, d[1] / nd)
        n_b += 1
        times.append(t)
        pts.append(p)
        dirs.append(d)
        normals.append(n)
    return RayPath(np.array(times), np.array(pts), np.array(dirs), flag, n_b,
                   normals=np.array(normals))


def _geodesic_rhs(surface, y, yp, tp):
    r, dr = surface.rho(y), surface.drho(y)
    return yp, tp, r * dr * tp * tp, -2 * dr / r * yp * tp


def geodesic_steps(surface: SurfaceOfRevolution, y, th, yp, tp, dt, n_steps, observer=None):
    """Vectorized RK4 for geodesics of dy^2 + rho^2 dtheta^2 with Clairaut renormalization.

    After each step theta' is reset to c / rho^2 and |y'| to sqrt(1 - c^2/rho^2)
    wherever that quantity exceeds 1e-8 (near turning points and on the
    equator y' is left as integrated). ``observer(k, y, th, yp, tp)`` is called
    after every step; returning True stops the loop.
    """
    y, th, yp, tp = (np.array(a, float, copy=True) for a in (y, th, yp, tp))
    c = surface.rho(y) ** 2 * tp
    for k in range(1, n_steps + 1):
        k1 = _geodesic_rhs(surface, y, yp, tp)
        k2 = _geodesic_rhs(surface, y + 0.5 * dt * k1[0], yp + 0.5 * dt * k1[2], tp + 0.5 * dt * k1[3])
        k3 = _geodesic_rhs(surface, y + 0.5 * dt * k2[0], yp + 0.5 * dt * k2[2], tp + 0.5 * dt * k2[3])
        k4 = _geodesic_rhs(surface, y + dt * k3[0], yp + dt * k3[2], tp + dt * k3[3])
        y = y + dt / 6 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        th = th + dt / 6 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        yp = yp + dt / 6 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
        r2 = surface.rho(y) ** 2
        tp = c / r2
        rest = 1 - c * c / r2
        fix = rest > 1e-8
        yp = np.where(fix, np.copysign(np.sqrt(np.where(fix, rest, 0)), yp), yp)
        if observer is not None and observer(k, y, th, yp, tp):
            break
    return y, th, yp, tp


def _trace_geodesic(s: SurfaceOfRevolution, ray: Ray, t_max, dt):
    n = int(round(t_max / dt)) if t_max > 0 else 0
    out = np.empty((n + 1, 4))
    out[0] = (*ray.position, *ray.direction)
    lo, hi = s.y_range
    state = {"last": n, "flag": "ok"}

    def obs(k, y, th, yp, tp):
        out[k] = (y[0], th[0], yp[0], tp[0])
        if not lo <= y[0] <= hi:
            state["last"], state["flag"] = k, "left_chart"
            return True
        return False

    geodesic_steps(s, *([v] for v in out[0]), dt, n, obs)
    m = state["last"] + 1
    out = out[:m]
    clair = s.rho(out[:, 0]) ** 2 * out[:, 3]
    return RayPath(np.arange(m) * dt, out[:, :2], out[:, 2:], state["flag"], clairaut=clair)


# ------------------------------------------------------------------ GCC

@dataclass
class GCCResult:
    fraction_controlled: float
    n_rays: int
    hit_times: np.ndarray
    trapped: list
    refined: list = field(default_factory=list)
    worst: list = field(default_factory=list)
    T: float = 0.0
    epsilon: float = 0.0


def _damping_function(damping):
    if callable(damping) and not hasattr(damping, "evaluate"):
        return damping
    return lambda x1, x2: damping.evaluate(x1)


def _sample_rays(geometry, n, seed):
    from scipy.stats import qmc

    sob = qmc.Sobol(3, scramble=True, seed=seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        if isinstance(geometry, DiskWithHoles):
            rays = []
            while len(rays) < n:
                u = sob.random(max(n, 256))
                R = geometry.outer_radius
                x = geometry.center[0] + R * (2 * u[:, 0] - 1)
                y = geometry.center[1] + R * (2 * u[:, 1] - 1)
                ok = geometry.contains(x, y)
                rays += [Ray.planar(a, b, 2 * math.pi * w) for a, b, w in zip(x[ok], y[ok], u[ok, 2])]
            return rays[:n]
        u = sob.random(n)
    if isinstance(geometry, FlatTorus):
        return [Ray.planar((a - 0.5) * geometry.l1, (b - 0.5) * geometry.l2, 2 * math.pi * w)
                for a, b, w in u]
    lo, hi = geometry.y_range
    return [Ray.on_surface(geometry, lo + (hi - lo) * a, 2 * math.pi * b, 2 * math.pi * w) for a, b, w in u]


def _path_samples(geometry, rays, T, n_steps):
    """Positions (n_rays, n_steps + 1, 2) along each ray at uniform times."""
    t = np.linspace(0.0, T, n_steps + 1)
    if isinstance(geometry, FlatTorus):
        p = np.array([r.position for r in rays])
        d = np.array([r.direction for r in rays])
        x1, x2 = geometry.wrap(p[:, :1] + d[:, :1] * t, p[:, 1:] + d[:, 1:] * t)
        return t, np.stack([x1, x2], axis=-1)
    if isinstance(geometry, SurfaceOfRevolution):
        st = np.array([(*r.position, *r.direction) for r in rays]).T
        out = np.empty((len(rays), n_steps + 1, 2))
        out[:, 0] = st[:2].T

        def obs(k, y, th, yp, tp):
            out[:, k, 0], out[:, k, 1] = y, th
            return False

        geodesic_steps(geometry, *st, T / n_steps, n_steps, obs)
        return t, out
    out = np.empty((len(rays), n_steps + 1, 2))
    for i, r in enumerate(rays):
        path = trace_ray(geometry, r, T)
        seg = np.searchsorted(path.times, t, side="right") - 1
        seg = np.clip(seg, 0, len(path.times) - 1)
        dt = t - path.times[seg]
        out[i] = path.positions[seg] + dt[:, None] * path.directions[seg]
    return t, out


def _ray_damping(geometry, gfun, rays, T, n_steps):
    t, pos = _path_samples(geometry, rays, T, n_steps)
    return t, gfun(pos[..., 0], pos[..., 1])


def gcc_diagnostic(geometry, damping, epsilon: float, T: float | None = None, n_rays: int = 10_000,
                   seed: int = 0, refine: bool = False, refine_starts: int = 5,
                   extra_rays=(), n_steps: int = 2000, chunk: int = 1000,
                   relaxed_margin: float | None = None) -> GCCResult:
    """Fraction of quasi-random rays meeting {gamma >= epsilon} before time T.

    Rays come from a scrambled Sobol sequence over position x direction, plus
    any ``extra_rays``. With ``refine`` the rays with the least accumulated
    damping are used as starting points of a Nelder-Mead search minimizing
    int_0^T gamma along the ray; minimizers that stay below epsilon are reported
    in ``refined`` (and in ``trapped``).

    ``relaxed_margin`` (disk with holes only) switches to the weaker test: K is
    the set of points within that margin of an obstacle, rays start outside K,
    and a ray is controlled if its forward or its backward flow reaches
    {gamma >= epsilon} before entering K.
    """
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    if n_rays < 100:
        raise ValueError("at least 100 rays are required")
    T = 3 * geometry.diameter if T is None else T
    gfun = _damping_function(damping)
    rays = _sample_rays(geometry, n_rays, seed) + list(extra_rays)
    if relaxed_margin is not None:
        if not isinstance(geometry, DiskWithHoles):
            raise ValueError("the relaxed test is defined for the disk with holes")
        rays = [r for r in rays if not _in_k(geometry, relaxed_margin, *r.position)]
    hit = np.full(len(rays), math.inf)
    accum = np.empty(len(rays))
    for lo in range(0, len(rays), chunk):
        part = rays[lo:lo + chunk]
        t, pos = _path_samples(geometry, part, T, n_steps)
        g = gfun(pos[..., 0], pos[..., 1])
        h = _first_hit(t, g, epsilon)
        if relaxed_margin is not None:
            h = np.where(h < _first_hit(t, _in_k(geometry, relaxed_margin, pos[..., 0], pos[..., 1]), 0.5),
                         h, math.inf)
            back = [Ray(r.position, (-r.direction[0], -r.direction[1])) for r in part]
            tb, pb = _path_samples(geometry, back, T, n_steps)
            hb = _first_hit(tb, gfun(pb[..., 0], pb[..., 1]), epsilon)
            hb = np.where(hb < _first_hit(tb, _in_k(geometry, relaxed_margin, pb[..., 0], pb[..., 1]), 0.5),
                          hb, math.inf)
            h = np.minimum(h, hb)
        hit[lo:lo + len(part)] = h
        accum[lo:lo + len(part)] = np.trapezoid(g, t, axis=1)
    trapped_idx = np.flatnonzero(~np.isfinite(hit))
    trapped = [rays[i] for i in trapped_idx]
    worst = [rays[i] for i in np.argsort(accum)[:refine_starts]]
    refined = []
    if refine and not isinstance(geometry, DiskWithHoles):
        refined = _refine_rays(geometry, gfun, worst, T, n_steps, epsilon)
    controlled = float(np.mean(np.isfinite(hit)))
    return GCCResult(controlled, len(rays), hit, trapped + refined, refined, worst, T, epsilon)


def _first_hit(t, values, level):
    above = values >= level
    return np.where(above.any(axis=1), t[np.argmax(above, axis=1)], math.inf)


def _in_k(g: DiskWithHoles, margin, x, y):
    x, y = np.asarray(x, float), np.asarray(y, float)
    out = np.zeros(np.broadcast(x, y).shape, dtype=float)
    for d in g.obstacles.disks:
        out = np.maximum(out, np.hypot(x - d.center[0], y - d.center[1]) < d.radius + margin)
    return out


def _refine_rays(geometry, gfun, starts, T, n_steps, epsilon):
    def make(x):
        if isinstance(geometry, FlatTorus):
            return Ray.planar(x[0], x[1], x[2])
        return Ray.on_surface(geometry, x[0], x[1], x[2])

    def cost(x):
        t, g = _ray_damping(geometry, gfun, [make(x)], T, n_steps)
        return float(np.trapezoid(g[0], t))

    found = []
    for r in starts:
        if isinstance(geometry, FlatTorus):
            x0 = [r.position[0], r.position[1], math.atan2(r.direction[1], r.direction[0])]
        else:
            rho = float(geometry.rho(r.position[0]))
            x0 = [r.position[0], r.position[1], math.atan2(r.direction[1] * rho, r.direction[0])]
        res = minimize(cost, x0, method="Nelder-Mead",
                       options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 4000})
        ray = make(res.x)
        t, g = _ray_damping(geometry, gfun, [ray], T, n_steps)
        if g.max() < epsilon:
            found.append(ray)
    return found


def write_rays_csv(path, result: GCCResult):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["ray_id", "t_hit", "trapped_flag"])
        for i, t in enumerate(result.hit_times):
            w.writerow([i, "inf" if not np.isfinite(t) else repr(float(t)), int(not np.isfinite(t))])


# ------------------------------------------------------------------ Ikawa

def ikawa_check(config: ObstacleConfig, outer_radius: float,
                outer_center=(0.0, 0.0)) -> dict[str, CheckReport]:
    """Conditions (a) disjoint, (b) hull inside the outer disk, (c) no disk meets the
    hull of two others, (d) kappa L > p for p > 2, each with its margin."""
    disks = config.disks
    p = len(disks)
    out = {}
    gaps = [_gap(a, b) for a, b in itertools.combinations(disks, 2)]
    L = min(gaps) if gaps else math.inf
    out["a"] = CheckReport("ikawa_a_disjoint", L > 0, {"margin": L})
    # support function of the hull: h(u) = max_i (c_i.u + r_i); inside the disk iff
    # h(u) <= c0.u + R for all u, i.e. |c_i - c0| + r_i <= R for every i
    reach = max(math.dist(d.center, outer_center) + d.radius for d in disks)
    out["b"] = CheckReport("ikawa_b_hull_inside", reach < outer_radius,
                           {"margin": outer_radius - reach})
    worst = math.inf
    worst_triple = None
    for k, dk in enumerate(disks):
        for i, j in itertools.combinations([m for m in range(p) if m != k], 2):
            m = _capsule_gap(disks[i], disks[j], dk)
            if m < worst:
                worst, worst_triple = m, (k, i, j)
    if p < 3:
        out["c"] = CheckReport("ikawa_c_hull_separation", True, {"status": "not applicable", "margin": None})
    else:
        out["c"] = CheckReport("ikawa_c_hull_separation", worst > 0,
                               {"margin": worst, "worst_triple": worst_triple})
    kappa = 1.0 / max(d.radius for d in disks)
    if p > 2:
        out["d"] = CheckReport("ikawa_d_kappa_L", kappa * L > p,
                               {"kappa": kappa, "L": L, "kappa_L": kappa * L, "p": p,
                                "margin": kappa * L - p})
    else:
        out["d"] = CheckReport("ikawa_d_kappa_L", True,
                               {"status": "not applicable", "kappa": kappa, "L": L, "p": p})
    return out


def _capsule_gap(a: Disk, b: Disk, k: Disk) -> float:
    """Distance from disk k to the convex hull of disks a and b (negative if they meet).

    The hull is the union of the disks centred at (1-s) c_a + s c_b with radius
    (1-s) r_a + s r_b, so the gap is min_s |c_k - c(s)| - r(s) - r_k, a convex
    function of s.
    """
    ca, cb, ck = (np.array(d.center) for d in (a, b, k))

    def g(s):
        return float(np.linalg.norm(ck - ((1 - s) * ca + s * cb)) - ((1 - s) * a.radius + s * b.radius))

    res = minimize_scalar(g, bounds=(0.0, 1.0), method="bounded", options={"xatol": 1e-12})
    return min(g(0.0), g(1.0), float(res.fun)) - k.radius


# ------------------------------------------------------------ foliations

@dataclass
class FoliationSpec:
    """Level sets psi_lambda(x) = 0 in a 2D chart with cometric A(x).

    ``point(lam, u)`` returns the chart point of Sigma_lambda at parameter
    u in [0, 1). The principal symbol is p = xi^T A(x) xi - tau^2.
    """

    name: str
    coords: tuple
    A: sp.Matrix
    psi: sp.Expr
    lam: sp.Symbol
    point: object
    closed_form: object = None
    boundary: object = None  # (boundary points(lam), outward normal(x)) for foliations with boundary
    lambdas: np.ndarray = field(default_factory=lambda: 0.05 * np.arange(20))

    def __post_init__(self):
        x = self.coords
        self.xi = sp.symbols(f"xi0:{len(x)}", real=True)
        xi = sp.Matrix(self.xi)
        p = (xi.T * self.A * xi)[0, 0]
        self.symbol = p
        # cancel() is enough for lambdify and far cheaper than simplify()
        self.h1 = sp.cancel(self.bracket(p, self.psi))
        self.h2 = sp.cancel(self.bracket(p, self.h1))
        args = (*x, *self.xi, self.lam)
        self._h1 = sp.lambdify(args, self.h1, "numpy")
        self._h2 = sp.lambdify(args, self.h2, "numpy")
        self._grad = sp.lambdify(args, [sp.diff(self.psi, v) for v in x], "numpy")
        self._A = sp.lambdify(x, self.A, "numpy")

    def bracket(self, p, q):
        """Poisson bracket {p, q} = sum dp/dxi dq/dx - dp/dx dq/dxi."""
        return sum(sp.diff(p, k) * sp.diff(q, x) - sp.diff(p, x) * sp.diff(q, k)
                   for x, k in zip(self.coords, self.xi))

    def cometric(self, x):
        return np.array(self._A(*x), dtype=float)

    @classmethod
    def peanut(cls, mirror: bool = False) -> "FoliationSpec":
        y, th, lam = sp.symbols("y theta lambda", real=True)
        A = sp.diag(1, 1 / sp.cosh(y) ** 2)
        s = -1 if mirror else 1
        psi = s * y - (1 - lam)
        return cls("peanut_mirror" if mirror else "peanut", (y, th), A, psi, lam,
                   point=lambda l, u: (s * (1 - l), 2 * math.pi * u),
                   closed_form=lambda x, xi: 4 * s * np.sinh(x[0]) / np.cosh(x[0]) ** 3 * xi[1] ** 2)

    @classmethod
    def torus_planes(cls, l1: float = 2 * math.pi, l2: float = 2 * math.pi) -> "FoliationSpec":
        x1, x2, lam = sp.symbols("x1 x2 lambda", real=True)
        return cls("torus_planes", (x1, x2), sp.eye(2), x1 - (lam - sp.Rational(1, 2)) * l1, lam,
                   point=lambda l, u: ((l - 0.5) * l1, (u - 0.5) * l2),
                   closed_form=lambda x, xi: 0.0 * xi[0])

    @classmethod
    def sphere(cls) -> "FoliationSpec":
        """Circles phi = phi_lambda around a pole inside a hemisphere (small caps inside)."""
        ph, th, lam = sp.symbols("phi theta lambda", real=True)
        A = sp.diag(1, 1 / sp.sin(ph) ** 2)
        scale = 0.49 * math.pi
        return cls("sphere", (ph, th), A, ph - scale * (1 - lam), lam,
                   point=lambda l, u: (scale * (1 - l), 2 * math.pi * u),
                   closed_form=lambda x, xi: 4 * np.cos(x[0]) / np.sin(x[0]) ** 3 * xi[1] ** 2)

    @classmethod
    def disk(cls, center_offset: float = 1.5) -> "FoliationSpec":
        """Circles |x - c| = r_lambda around c = (center_offset, 0) cut by the unit disk."""
        x1, x2, lam = sp.symbols("x1 x2 lambda", real=True)
        c = center_offset
        r_lo, r_hi = c - 1 + 0.05, math.sqrt(c * c - 1) - 0.05
        r = r_lo + (r_hi - r_lo) * lam
        psi = (x1 - c) ** 2 + x2**2 - r**2

        def radius(l):
            return r_lo + (r_hi - r_lo) * l

        def point(l, u):
            # arc of the circle inside the unit disk
            rr = radius(l)
            half = math.acos((c * c + rr * rr - 1) / (2 * c * rr))
            a = math.pi + (2 * u - 1) * half * 0.999
            return (c + rr * math.cos(a), rr * math.sin(a))

        def boundary_points(l):
            rr = radius(l)
            bx = (1 + c * c - rr * rr) / (2 * c)
            by = math.sqrt(max(1 - bx * bx, 0.0))
            return [(bx, by), (bx, -by)]

        return cls("disk", (x1, x2), sp.eye(2), psi, lam, point=point,
                   closed_form=lambda x, xi: 8 * (xi[0] ** 2 + xi[1] ** 2),
                   boundary=(boundary_points, lambda x: np.asarray(x) / np.linalg.norm(x)))


@dataclass
class PseudoconvexityReport:
    name: str
    pass_fraction: float
    min_value: float
    n_samples: int
    n_vacuous: int
    noncharacteristic_ok: bool
    closed_form_error: float | None
    boundary_ok: bool | None
    samples: np.ndarray

    @property
    def strictly_pseudoconvex(self) -> bool:
        return bool(self.pass_fraction == 1.0 and self.min_value > 0 and self.noncharacteristic_ok)


def pseudoconvexity_check(fol: FoliationSpec, sample_count: int = 1000, seed: int = 0,
                          tol: float = 1e-12) -> PseudoconvexityReport:
    """Sample characteristic points and evaluate H_p^2 psi there.

    With tau = 1 the characteristic set is the cometric unit circle; the
    condition H_p psi = 0 is linear in xi and leaves two opposite covectors,
    one of which is drawn at random.
    """
    rng = np.random.default_rng(seed)
    rows = []
    vacuous = 0
    nonchar = True
    for i in range(sample_count):
        lam = float(fol.lambdas[i % len(fol.lambdas)])
        x = fol.point(lam, rng.random())
        A = fol.cometric(x)
        grad = np.array(fol._grad(*x, 0.0, 0.0, lam), float)
        if float(grad @ A @ grad) <= tol:
            nonchar = False
        # H_p psi = 2 (A xi) . grad psi  =>  xi must be A-orthogonal to grad psi
        g = np.array([fol._h1(*x, *e, lam) for e in np.eye(2)], float)
        if np.linalg.norm(g) == 0:
            vacuous += 1
            continue
        w, V = np.linalg.eigh(A)
        S = (V / np.sqrt(w)) @ V.T  # A^{-1/2}: xi = S e maps unit e onto p = 0
        h = S.T @ g
        e = np.array([-h[1], h[0]]) / np.linalg.norm(h)
        xi = S @ e * (1 if rng.random() < 0.5 else -1)
        val = float(fol._h2(*x, *xi, lam))
        rows.append((lam, *x, *xi, val))
    samples = np.array(rows)
    vals = samples[:, -1] if len(rows) else np.zeros(0)
    passed = (vals > tol).sum() + vacuous
    err = None
    if fol.closed_form is not None and len(rows):
        ref = fol.closed_form(samples[:, 1:3].T, samples[:, 3:5].T)
        err = float(np.max(np.abs(vals - ref)))
    boundary_ok = None
    if fol.boundary is not None:
        pts_fn, normal = fol.boundary
        boundary_ok = all(
            float(np.array(fol._grad(*b, 0.0, 0.0, lam), float) @ normal(b)) < 0
            for lam in fol.lambdas for b in pts_fn(float(lam)))
    return PseudoconvexityReport(fol.name, passed / sample_count,
                                 float(vals.min()) if len(vals) else math.inf,
                                 sample_count, vacuous, nonchar, err, boundary_ok, samples)


# ------------------------------------------------------------ escape profile

@dataclass
class EscapeProfile:
    epsilons: np.ndarray
    times: np.ndarray
    flags: list
    slope: float
    intercept: float
    r_squared: float


def escape_time(surface: SurfaceOfRevolution, eps: float, edge: float, dt: float = 0.005,
                t_cap: float = 200.0) -> tuple[float, str]:
    """Time for the ray from y = eps with purely angular direction to reach |y| >= edge."""
    if abs(eps) >= edge:
        return 0.0, "ok"
    ray = Ray.on_surface(surface, eps, 0.0, math.pi / 2)
    n = int(round(t_cap / dt))
    state = {"t": math.inf, "prev": abs(eps)}

    def obs(k, y, th, yp, tp):
        ay = abs(float(y[0]))
        if ay >= edge:
            # linear interpolation inside the last step
            frac = (edge - state["prev"]) / (ay - state["prev"])
            state["t"] = (k - 1 + frac) * dt
            return True
        state["prev"] = ay
        return False

    geodesic_steps(surface, [eps], [0.0], [ray.direction[0]], [ray.direction[1]], dt, n, obs)
    if not np.isfinite(state["t"]):
        return math.inf, "trapped" if eps == 0 else "no_escape"
    return state["t"], "ok"


def escape_profile(surface: SurfaceOfRevolution, edge: float = 0.8, epsilons=None,
                   dt: float = 0.005, t_cap: float = 200.0) -> EscapeProfile:
    """Escape times for near-equatorial rays and a linear fit against log(1/eps).

    The fit uses the escaping rays with 0 < eps <= edge / 2.
    """
    if epsilons is None:
        epsilons = 10.0 ** -np.arange(2, 9)
    epsilons = np.asarray(epsilons, float)
    if np.any(epsilons < 0) or np.any(epsilons > edge):
        raise ValueError("epsilon values must lie in [0, edge]")
    times, flags = [], []
    for e in epsilons:
        t, f = escape_time(surface, float(e), edge, dt, t_cap)
        times.append(t)
        flags.append(f)
    times = np.array(times)
    use = (epsilons > 0) & (epsilons <= edge / 2) & np.isfinite(times)
    slope = intercept = r2 = math.nan
    if use.sum() >= 2:
        x = np.log(1 / epsilons[use])
        slope, intercept = np.polyfit(x, times[use], 1)
        pred = slope * x + intercept
        ss = np.sum((times[use] - times[use].mean()) ** 2)
        r2 = 1 - np.sum((times[use] - pred) ** 2) / ss if ss > 0 else 1.0
    return EscapeProfile(epsilons, times, flags, float(slope), float(intercept), float(r2))
