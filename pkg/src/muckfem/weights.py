"""Weight functions, weighted measures of balls, and Muckenhoupt A_p probes.

Only a handful of weight families are supported; each knows its singular
locus and, where possible, a closed-form radial antiderivative so that ball
integrals reduce to (at most) a one dimensional angular quadrature.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterator, Sequence

import numpy as np
from scipy import integrate, special

from .errors import NonIntegrable

KINDS = ("constant", "power", "extension", "dirac_log", "product")

#: ratios above this are reported as divergence rather than a large constant
DIVERGENCE_CAP = 1.0e6


def ball_volume(dim: int, radius: float) -> float:
    if dim == 1:
        return 2.0 * radius
    if dim == 2:
        return math.pi * radius**2
    raise ValueError(f"unsupported dimension {dim}")


def as_points(x, dim: int) -> np.ndarray:
    """Coerce ``x`` to a float array of shape (P, dim)."""
    x = np.asarray(x, dtype=float)
    if dim == 1 and (x.ndim == 0 or x.ndim == 1):
        return x.reshape(-1, 1)
    return x.reshape(-1, dim)


@dataclass(frozen=True)
class Ball:
    center: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(
            self, "center", tuple(float(c) for c in np.atleast_1d(self.center))
        )
        if not self.radius > 0:
            raise ValueError("ball radius must be positive")

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def volume(self) -> float:
        return ball_volume(self.dim, self.radius)

    def contains_ball(self, other: "Ball", slack: float = 1e-12) -> bool:
        gap = np.linalg.norm(np.subtract(self.center, other.center))
        return gap + other.radius <= self.radius * (1.0 + slack)


@dataclass(frozen=True)
class Weight:
    """A weight ``scale * base(x) ** exponent``.

    ``base`` is 1 (constant), ``|x - center|`` (power), ``|x_n - center_n|``
    (extension), the Dirac weight varpi (dirac_log) or a product of factors.
    Raising to a power and taking reciprocals stay inside the family.
    """

    kind: str
    dim: int = 1
    center: tuple[float, ...] = ()
    exponent: float = 1.0
    diameter: float = 1.0
    scale: float = 1.0
    factors: tuple["Weight", ...] = field(default=())

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if self.dim not in (1, 2, 3):
            raise ValueError("dimension must be 1, 2 or 3")
        c = tuple(float(v) for v in np.atleast_1d(self.center)) if len(np.atleast_1d(self.center)) else ()
        if not c:
            c = (0.0,) * self.dim
        if len(c) != self.dim:
            raise ValueError("center does not match dimension")
        object.__setattr__(self, "center", c)
        if self.kind == "dirac_log" and not self.diameter > 0:
            raise ValueError("dirac_log weight needs a positive diameter")

    # -- constructors -------------------------------------------------
    @classmethod
    def constant(cls, dim: int = 1) -> "Weight":
        return cls("constant", dim)

    @classmethod
    def power(cls, center, gamma: float) -> "Weight":
        center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
        return cls("power", len(center), center, float(gamma))

    @classmethod
    def extension(cls, alpha: float, dim: int = 2, level: float = 0.0) -> "Weight":
        center = (0.0,) * (dim - 1) + (float(level),)
        return cls("extension", dim, center, float(alpha))

    @classmethod
    def dirac_log(cls, center, diameter: float) -> "Weight":
        center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
        return cls("dirac_log", len(center), center, 1.0, float(diameter))

    @classmethod
    def product(cls, *ws: "Weight") -> "Weight":
        dims = {w.dim for w in ws}
        if len(dims) != 1:
            raise ValueError("factors must share a dimension")
        return cls("product", dims.pop(), factors=tuple(ws))

    # -- algebra --------------------------------------------------------
    def raised(self, t: float) -> "Weight":
        """The weight ``w ** t``."""
        if self.kind == "constant":
            return replace(self, scale=self.scale**t)
        if self.kind == "product":
            return replace(
                self, scale=self.scale**t, factors=tuple(f.raised(t) for f in self.factors)
            )
        return replace(self, exponent=self.exponent * t, scale=self.scale**t)

    def reciprocal(self) -> "Weight":
        if self.kind == "constant":
            return replace(self, scale=1.0 / self.scale)
        if self.kind == "product":
            return replace(
                self, scale=1.0 / self.scale, factors=tuple(f.reciprocal() for f in self.factors)
            )
        return replace(self, exponent=-self.exponent, scale=1.0 / self.scale)

    def compose_affine(self, a: float, b) -> "Weight":
        """The weight ``x -> w(a x + b)`` for a nonzero scalar ``a``."""
        if a == 0:
            raise ValueError("dilation factor must be nonzero")
        b = np.broadcast_to(np.asarray(b, dtype=float), (self.dim,))
        new_center = tuple((np.asarray(self.center) - b) / a)
        if self.kind == "constant":
            return self
        if self.kind == "product":
            return replace(self, factors=tuple(f.compose_affine(a, b) for f in self.factors))
        if self.kind == "dirac_log":
            return replace(self, center=new_center, diameter=self.diameter / abs(a))
        return replace(self, center=new_center, scale=self.scale * abs(a) ** self.exponent)

    # -- evaluation -----------------------------------------------------
    def __call__(self, x) -> np.ndarray:
        x = as_points(x, self.dim)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == "constant":
                return np.full(len(x), self.scale)
            if self.kind == "product":
                out = np.full(len(x), self.scale)
                for f in self.factors:
                    out = out * f(x)
                return out
            if self.kind == "extension":
                r = np.abs(x[:, -1] - self.center[-1])
            else:
                r = np.linalg.norm(x - np.asarray(self.center), axis=1)
            return self.scale * self.radial_profile(r)

    def radial_profile(self, r) -> np.ndarray:
        """Weight value as a function of the distance to the singular set."""
        r = np.asarray(r, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            if self.kind == "constant":
                return np.ones_like(r)
            if self.kind in ("power", "extension"):
                if self.exponent == 0:
                    return np.ones_like(r)
                return r**self.exponent
            if self.kind == "dirac_log":
                return _varpi(r, self.dim, self.diameter) ** self.exponent
        raise TypeError(f"{self.kind} weight has no radial profile")

    # -- metadata -------------------------------------------------------
    @property
    def is_radial(self) -> bool:
        return self.kind in ("constant", "power", "dirac_log")

    def singular_points(self) -> list[np.ndarray]:
        if self.kind == "power":
            return [np.asarray(self.center)] if self.exponent != 0 else []
        if self.kind == "dirac_log":
            return [np.asarray(self.center)]
        if self.kind == "product":
            pts: list[np.ndarray] = []
            for f in self.factors:
                for p in f.singular_points():
                    if not any(np.array_equal(p, q) for q in pts):
                        pts.append(p)
            return pts
        return []

    def singular_levels(self) -> list[float]:
        """Levels ``c`` of singular hyperplanes ``{x_n = c}``."""
        if self.kind == "extension" and self.exponent != 0:
            return [self.center[-1]]
        if self.kind == "product":
            return sorted({lv for f in self.factors for lv in f.singular_levels()})
        return []

    def anchors(self) -> list[np.ndarray]:
        """Points at which A_p sup-probes should concentrate."""
        pts = self.singular_points()
        for lv in self.singular_levels():
            pts.append(np.array((0.0,) * (self.dim - 1) + (lv,)))
        if not pts:
            pts = [np.asarray(self.center)]
        return pts

    def radially_integrable(self) -> bool:
        """Whether the weight is integrable near its singular locus."""
        n = 1 if self.kind == "extension" else self.dim
        t = self.exponent
        if self.kind == "constant":
            return True
        if self.kind in ("power", "extension"):
            return t > -n
        if self.kind == "dirac_log":
            lead = n + (n - 2) * t
            return lead > 0 or (lead == 0 and 2 * t > 1)
        if self.kind == "product":
            # factors sharing a singular point multiply their local behaviour
            groups: dict[tuple, float] = {}
            for f in self.factors:
                if f.kind == "power":
                    groups[f.center] = groups.get(f.center, 0.0) + f.exponent
                elif not f.radially_integrable():
                    return False
            return all(g > -self.dim for g in groups.values())
        return True

    # -- serialization --------------------------------------------------
    def to_config(self) -> dict:
        d = {"kind": self.kind, "dimension": self.dim}
        if self.kind in ("power", "dirac_log"):
            d["center"] = list(self.center)
        if self.kind in ("power", "extension", "dirac_log"):
            d["exponent"] = self.exponent
        if self.kind == "extension":
            d["level"] = self.center[-1]
        if self.kind == "dirac_log":
            d["diameter"] = self.diameter
        if self.scale != 1.0:
            d["scale"] = self.scale
        if self.kind == "product":
            d["factors"] = [f.to_config() for f in self.factors]
        return d

    @classmethod
    def from_config(cls, cfg: dict) -> "Weight":
        kind = cfg.get("kind", "constant")
        dim = int(cfg.get("dimension", len(np.atleast_1d(cfg.get("center", [0.0])))))
        scale = float(cfg.get("scale", 1.0))
        if kind == "constant":
            w = cls.constant(dim)
        elif kind == "power":
            w = cls.power(cfg.get("center", [0.0] * dim), float(cfg["exponent"]))
        elif kind == "extension":
            w = cls.extension(float(cfg["exponent"]), dim, float(cfg.get("level", 0.0)))
        elif kind == "dirac_log":
            w = cls.dirac_log(cfg.get("center", [0.0] * dim), float(cfg.get("diameter", 1.0)))
            if "exponent" in cfg:
                w = w.raised(float(cfg["exponent"]))
        elif kind == "product":
            w = cls.product(*(cls.from_config(f) for f in cfg["factors"]))
        else:
            raise ValueError(f"unknown weight kind {kind!r}")
        return replace(w, scale=scale) if scale != 1.0 else w


def _varpi(r, n: int, d: float) -> np.ndarray:
    s = np.asarray(r, dtype=float) / (2.0 * d)
    far = 2.0 ** (2 - n) / math.log(2.0) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        near = s ** (n - 2) / np.log(s) ** 2
    near = np.where(s == 0, 0.0 if n == 2 else np.inf, near)
    return np.where(s < 0.5, near, far)


# ----------------------------------------------------------------------
# radial antiderivatives F(rho) = int_0^rho g(t) t^(n-1) dt
# ----------------------------------------------------------------------


def radial_antiderivative(w: Weight, rho) -> np.ndarray:
    """Antiderivative of ``g(t) t^(n-1)`` for a radial weight ``w = scale*g(|x-c|)``.

    Normalized so that F(0) = 0 whenever the weight is integrable at its
    center; otherwise any antiderivative valid for t > 0 is returned (only
    differences are meaningful then). The scale factor is not included.
    """
    rho = np.asarray(rho, dtype=float)
    n = w.dim
    if w.kind == "constant":
        return rho**n / n
    if w.kind == "power":
        a = w.exponent + n
        if a == 0:
            with np.errstate(divide="ignore"):
                return np.log(rho)
        with np.errstate(divide="ignore"):
            return rho**a / a
    if w.kind == "dirac_log":
        return _varpi_antiderivative(rho, n, w.diameter, w.exponent)
    raise TypeError(f"{w.kind} weight is not radial")


def _varpi_antiderivative(rho, n: int, d: float, tau: float) -> np.ndarray:
    rho = np.atleast_1d(np.asarray(rho, dtype=float))
    out = np.empty_like(rho)
    inner = np.minimum(rho, d)
    for i, r in enumerate(inner):
        out[i] = _varpi_inner(r, n, d, tau)
    far_value = (2.0 ** (2 - n) / math.log(2.0) ** 2) ** tau
    out += far_value * (np.maximum(rho, d) ** n - d**n) / n
    return out


def _varpi_inner(r: float, n: int, d: float, tau: float) -> float:
    """int_0^r varpi(t)^tau t^(n-1) dt for r <= d (the logarithmic branch)."""
    if r <= 0:
        return 0.0
    L = 2.0 * d
    sigma = r / L
    u0 = -math.log(sigma)
    if tau == 1.0 and n == 2:
        return L**2 * (sigma**2 / u0 - 2.0 * special.exp1(2.0 * u0))
    if tau == 1.0 and n == 1:
        return L / u0
    if tau == -1.0:
        lg = math.log(sigma)
        return L**n * sigma**2 / 2.0 * (lg * lg - lg + 0.5)
    return varpi_inner_quadrature(r, n, d, tau)


def varpi_inner_quadrature(r: float, n: int, d: float, tau: float) -> float:
    """Numerical route for ``_varpi_inner`` (any exponent), used as an oracle too."""
    L = 2.0 * d
    sigma = r / L
    lead = n + (n - 2) * tau
    if not (lead > 0 or (lead == 0 and 2 * tau > 1)):
        raise NonIntegrable("varpi power not integrable at its center")
    u0 = -math.log(sigma)

    def f(u):
        return math.exp(-lead * u) * u ** (-2.0 * tau)

    val, _ = integrate.quad(f, u0, np.inf, epsabs=0.0, epsrel=1e-13, limit=400)
    return L**n * val


# ----------------------------------------------------------------------
# weighted measures
# ----------------------------------------------------------------------


def weighted_measure(w: Weight, region, tol: float = 1e-10) -> float:
    """``int_region w dx`` for a :class:`Ball` or a mesh element.

    Elements are given by their vertex array: an interval ``(a, b)``, a
    triangle (3x2) or an axis-aligned rectangle (4x2).
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if isinstance(region, Ball):
        if region.dim != w.dim:
            raise ValueError("ball and weight dimensions differ")
        return _ball_mass(w, region, tol)
    from .quadrature import region_rule

    rule_x, rule_w = region_rule(np.asarray(region, dtype=float), w, 2, tol)
    return float(rule_w.sum())


def _check_ball_integrable(w: Weight, ball: Ball) -> None:
    c = np.asarray(ball.center)
    if w.radially_integrable():
        return
    for p in w.singular_points():
        if np.linalg.norm(c - p) <= ball.radius:
            raise NonIntegrable(f"{w.kind} weight diverges on {ball}")
    for lv in w.singular_levels():
        if abs(c[-1] - lv) <= ball.radius:
            raise NonIntegrable(f"{w.kind} weight diverges on {ball}")


def _ball_mass(w: Weight, ball: Ball, tol: float) -> float:
    _check_ball_integrable(w, ball)
    if w.kind == "constant":
        return w.scale * ball.volume
    if w.kind == "extension" and w.dim == 1:
        return _ball_mass(Weight("power", 1, w.center, w.exponent, scale=w.scale), ball, tol)
    if w.kind == "extension" and w.dim == 2:
        return w.scale * _extension_ball_2d(w, ball, tol)
    if w.is_radial and w.dim in (1, 2):
        return w.scale * _radial_ball(w, ball, tol)
    return _generic_ball(w, ball, tol)


def _radial_ball(w: Weight, ball: Ball, tol: float) -> float:
    x0 = np.asarray(w.center)
    c = np.asarray(ball.center)
    R = ball.radius
    F = lambda t: np.asarray(radial_antiderivative(w, t)).item()  # noqa: E731
    integrable = w.radially_integrable()
    if w.dim == 1:
        a, b = c[0] - R - x0[0], c[0] + R - x0[0]
        if a >= 0:
            return F(b) - F(a)
        if b <= 0:
            return F(-a) - F(-b)
        return F(-a) + F(b)
    delta = float(np.linalg.norm(c - x0))
    eps = min(tol, 1e-10)
    if delta == 0.0:
        return 2.0 * math.pi * F(R)
    if delta <= R:
        if not integrable:
            raise NonIntegrable("ball contains the weight singularity")

        def outer(theta):
            s = math.sin(theta)
            tmax = delta * math.cos(theta) + math.sqrt(max(R * R - delta * delta * s * s, 0.0))
            return F(tmax)

        pts = [math.pi / 2] if delta == R else None
        val, _ = integrate.quad(outer, 0.0, math.pi, epsabs=0.0, epsrel=eps, limit=400, points=pts)
        return 2.0 * val
    # singular point outside: sin(theta) = (R/delta) sin(phi), phi in [0, pi/2]
    k = R / delta

    def outer_far(phi):
        sp, cp = math.sin(phi), math.cos(phi)
        st = k * sp
        ct = math.sqrt(1.0 - st * st)
        mid = delta * ct
        half = R * cp
        jac = k * cp / ct
        return (F(mid + half) - F(max(mid - half, 0.0))) * jac

    val, _ = integrate.quad(outer_far, 0.0, math.pi / 2, epsabs=0.0, epsrel=eps, limit=400)
    return 2.0 * val


def _extension_ball_2d(w: Weight, ball: Ball, tol: float) -> float:
    c2 = ball.center[-1]
    R = ball.radius
    lv = w.center[-1]
    alpha = w.exponent

    def f(phi):
        y = c2 + R * math.sin(phi)
        return 2.0 * R * R * math.cos(phi) ** 2 * abs(y - lv) ** alpha

    eps = min(tol, 1e-10)
    lo, hi = -math.pi / 2, math.pi / 2
    if abs(lv - c2) < R:
        star = math.asin((lv - c2) / R)
        v1, _ = integrate.quad(f, lo, star, epsabs=0.0, epsrel=eps, limit=400)
        v2, _ = integrate.quad(f, star, hi, epsabs=0.0, epsrel=eps, limit=400)
        return v1 + v2
    val, _ = integrate.quad(f, lo, hi, epsabs=0.0, epsrel=eps, limit=400)
    return val


def _generic_ball(w: Weight, ball: Ball, tol: float) -> float:
    """Nested adaptive quadrature fallback (products, 3D...)."""
    c = np.asarray(ball.center)
    R = ball.radius
    eps = max(tol, 1e-12)
    if w.dim == 1:
        pts = [float(p[0]) for p in w.singular_points() if abs(p[0] - c[0]) < R]
        val, _ = integrate.quad(
            lambda t: float(w(np.array([t]))[0]), c[0] - R, c[0] + R,
            epsabs=0.0, epsrel=eps, limit=400, points=pts or None,
        )
        return val
    if w.dim != 2:
        raise NotImplementedError("balls in 3D are not supported")
    levels = [lv for lv in w.singular_levels() if abs(lv - c[1]) < R]
    if levels:
        # cartesian sweep with breakpoints on the singular lines
        xs_sing = [float(p[0]) for p in w.singular_points()]

        def row(y):
            half = math.sqrt(max(R * R - (y - c[1]) ** 2, 0.0))
            lo, hi = c[0] - half, c[0] + half
            pts = [x for x in xs_sing if lo < x < hi]
            val, _ = integrate.quad(
                lambda x: float(w(np.array([x, y]))[0]), lo, hi,
                epsabs=0.0, epsrel=eps, limit=200, points=pts or None,
            )
            return val

        val, _ = integrate.quad(
            row, c[1] - R, c[1] + R, epsabs=0.0, epsrel=eps, limit=200, points=levels
        )
        return val
    sing = [p for p in w.singular_points() if np.linalg.norm(p - c) < R]
    origin = sing[0] if sing else c
    delta = float(np.linalg.norm(c - origin))

    def radial(theta):
        e = np.array([math.cos(theta), math.sin(theta)])
        proj = float(e @ (c - origin))
        tmax = proj + math.sqrt(max(R * R - (delta * delta - proj * proj), 0.0))
        val, _ = integrate.quad(
            lambda t: float(w(origin + t * e)[0]) * t, 0.0, tmax,
            epsabs=0.0, epsrel=eps, limit=200,
        )
        return val

    val, _ = integrate.quad(radial, 0.0, 2 * math.pi, epsabs=0.0, epsrel=eps, limit=200)
    return val


# ----------------------------------------------------------------------
# Muckenhoupt probes
# ----------------------------------------------------------------------


def muckenhoupt_ratio(w: Weight, p: float, ball: Ball, tol: float = 1e-10) -> float:
    """Per-ball A_p quotient ``avg(w) * avg(w^(1/(1-p)))^(p-1)``."""
    if not 1 < p < math.inf:
        raise ValueError("p must lie in (1, inf)")
    vol = ball.volume
    avg = weighted_measure(w, ball, tol) / vol
    avg_dual = weighted_measure(w.raised(1.0 / (1.0 - p)), ball, tol) / vol
    return avg * avg_dual ** (p - 1.0)


@dataclass(frozen=True)
class BallFamily:
    """Deterministic dyadic ball family around each singular anchor.

    Centered balls ``B(x0, R 2^-j)`` for ``j = 0..levels`` plus, at each
    scale, off-center balls ``B(x0 + delta e, r)`` with ``delta/r`` taken
    from ``offsets``; ``e`` is the last coordinate axis (the normal of an
    extension weight's singular hyperplane).
    """

    radius: float = 1.0
    levels: int = 20
    offsets: tuple[float, ...] = (0.5, 2.0, 8.0)

    def balls(self, w: Weight) -> Iterator[Ball]:
        e = np.zeros(w.dim)
        e[-1] = 1.0
        for x0 in w.anchors():
            for j in range(self.levels + 1):
                r = self.radius * 2.0**-j
                yield Ball(tuple(x0), r)
                for k in self.offsets:
                    yield Ball(tuple(x0 + k * r * e), r)


@dataclass
class ApEstimate:
    p: float
    sampled_max: float
    balls_sampled: int
    per_ball_ratios: list[tuple[Ball, float]]
    divergent: bool
    cap: float = DIVERGENCE_CAP

    def summary(self) -> dict:
        return {
            "p": self.p,
            "sampled_max": self.sampled_max,
            "balls_sampled": self.balls_sampled,
            "divergent": self.divergent,
            "note": "sampled lower bound for the A_p constant",
        }


def estimate_ap_constant(
    w: Weight,
    p: float,
    sampler: BallFamily | None = None,
    tol: float = 1e-10,
    cap: float = DIVERGENCE_CAP,
) -> ApEstimate:
    """Lower bound for the A_p constant over a finite ball family.

    Balls on which either average diverges count as ratio ``inf``; the
    estimate is flagged divergent as soon as a ratio exceeds ``cap``.
    """
    sampler = sampler or BallFamily()
    rows: list[tuple[Ball, float]] = []
    for b in sampler.balls(w):
        try:
            r = muckenhoupt_ratio(w, p, b, tol)
        except NonIntegrable:
            r = math.inf
        rows.append((b, r))
    best = max(r for _, r in rows)
    return ApEstimate(p, best, len(rows), rows, bool(best > cap), cap)


def check_strong_doubling(
    w: Weight,
    p: float,
    E: Ball,
    B: Ball,
    constant: float | ApEstimate | None = None,
    tol: float = 1e-10,
) -> tuple[float, float]:
    """Return ``(w(B), C (|B|/|E|)^p w(E))``; callers assert lhs <= rhs."""
    if not B.contains_ball(E):
        raise ValueError("E must be contained in B")
    if constant is None:
        constant = estimate_ap_constant(w, p, tol=tol)
    if isinstance(constant, ApEstimate):
        constant = constant.sampled_max
    lhs = weighted_measure(w, B, tol)
    rhs = constant * (B.volume / E.volume) ** p * weighted_measure(w, E, tol)
    return lhs, rhs


def dual_weight_identity(w: Weight, p: float, ball: Ball, tol: float = 1e-10) -> tuple[float, float]:
    """Both sides of ``C_{p', w^(-1/(p-1))} = C_{p,w}^(1/(p-1))`` on one ball."""
    pd = p / (p - 1.0)
    r1 = muckenhoupt_ratio(w.raised(-1.0 / (p - 1.0)), pd, ball, tol)
    r2 = muckenhoupt_ratio(w, p, ball, tol) ** (1.0 / (p - 1.0))
    return r1, r2


def sample_balls(dim: int, count: int, seed: int = 0, spread: float = 1.0,
                 anchors: Sequence[np.ndarray] = ()) -> list[Ball]:
    """Reproducible random balls, half of them near the given anchors."""
    rng = np.random.default_rng(seed)
    out = []
    for i in range(count):
        r = spread * 10.0 ** rng.uniform(-4, 0)
        if anchors and i % 2 == 0:
            a = np.asarray(anchors[(i // 2) % len(anchors)])
            c = a + r * rng.uniform(-3, 3, size=dim)
        else:
            c = rng.uniform(-spread, spread, size=dim)
        out.append(Ball(tuple(c), r))
    return out
