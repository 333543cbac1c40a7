"""Robot models, fixed-step RK4 integration, and tube-sizing constants.

Models are control-affine, ``xdot = f(x) + g(x) u + delta``, with ``f`` and
``g`` vectorised over a leading batch axis so the shooting solver can roll
out many perturbed control sequences at once.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    AssumptionViolated,
    DimensionMismatch,
    InvalidParam,
    NonFiniteError,
)
from .geometry import Box

DISTURBANCE_POLICIES = (
    "zero",
    "worst-case-radial",
    "uniform-in-ball",
    "random-hold",
)


@dataclass(frozen=True)
class DynamicsModel:
    """Control-affine model.

    ``f`` maps states of shape ``(..., n)`` to drifts of the same shape;
    ``g`` maps them to input gains of shape ``(..., n, n)``.
    ``position_projection`` selects the workspace coordinates (the ones the
    geometric constraints talk about).
    """

    name: str
    n: int
    f: Callable[[np.ndarray], np.ndarray]
    g: Callable[[np.ndarray], np.ndarray]
    position_projection: tuple = (0, 1)

    def position(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x)[..., list(self.position_projection)]

    def embed_position(self, pos) -> np.ndarray:
        """Full state whose workspace coordinates equal ``pos``, zeros elsewhere."""
        x = np.zeros(self.n)
        x[list(self.position_projection)] = np.asarray(pos, dtype=float)
        return x

    def derivative(self, x: np.ndarray, u: np.ndarray, delta=None) -> np.ndarray:
        gu = np.einsum("...ij,...j->...i", self.g(x), u)
        out = self.f(x) + gu
        if delta is not None:
            out = out + delta
        return out


def single_integrator(n: int = 3) -> DynamicsModel:
    """Omnidirectional single integrator ``xdot = u + delta``."""

    eye = np.eye(n)

    def f(x):
        return np.zeros_like(x)

    def g(x):
        return np.broadcast_to(eye, np.shape(x)[:-1] + (n, n))

    return DynamicsModel("single_integrator", n, f, g)


def demo_nonlinear(n: int = 3) -> DynamicsModel:
    """State-dependent drift and gain, for exercising the general machinery.

    ``f(x) = -0.1 * x * |x|``, ``g(x) = (1 + 0.1 |x|) I``.
    """

    def f(x):
        x = np.asarray(x, dtype=float)
        return -0.1 * x * np.linalg.norm(x, axis=-1, keepdims=True)

    eye = np.eye(n)

    def g(x):
        x = np.asarray(x, dtype=float)
        scale = 1.0 + 0.1 * np.linalg.norm(x, axis=-1)
        return scale[..., None, None] * eye

    return DynamicsModel("demo_nonlinear", n, f, g)


MODEL_FACTORIES = {
    "single_integrator": single_integrator,
    "demo_nonlinear": demo_nonlinear,
}


def eval_dynamics(model: DynamicsModel, x, u, delta) -> np.ndarray:
    """Evaluate ``f(x) + g(x) u + delta`` with dimension checks."""
    x = np.asarray(x, dtype=float)
    u = np.asarray(u, dtype=float)
    d = np.asarray(delta, dtype=float)
    for name, v in (("x", x), ("u", u), ("delta", d)):
        if v.shape != (model.n,):
            raise DimensionMismatch(
                f"{name} has shape {v.shape}, expected ({model.n},)"
            )
    return model.derivative(x, u, d)


@dataclass(frozen=True)
class Trajectory:
    """Uniformly sampled trajectory record."""

    ts: np.ndarray
    xs: np.ndarray
    us: np.ndarray
    deltas: np.ndarray

    def __len__(self) -> int:
        return self.ts.shape[0]


def integrate(model, x0, control, disturbance, t0, T, dt) -> Trajectory:
    """Fixed-step RK4 integration of the disturbed dynamics.

    ``control(t, x)`` is evaluated at every RK4 stage; ``disturbance(t, x)``
    is sampled once per step and held constant through the stages (a
    piecewise-constant realisation, which keeps runs bit-reproducible).
    """
    if T <= 0 or dt <= 0:
        raise InvalidParam("T and dt must be > 0")
    steps = round(T / dt)
    if abs(steps * dt - T) > 1e-9:
        raise InvalidParam(f"dt={dt} does not divide T={T}")
    x = np.asarray(x0, dtype=float).copy()
    ts = t0 + dt * np.arange(steps + 1)
    xs = np.empty((steps + 1, model.n))
    us = np.empty((steps + 1, model.n))
    ds = np.empty((steps + 1, model.n))
    xs[0] = x
    for k in range(steps):
        t = ts[k]
        d = np.asarray(disturbance(t, x), dtype=float)
        u0 = np.asarray(control(t, x), dtype=float)
        us[k] = u0
        ds[k] = d
        x = rk4_step(model, x, t, dt, control, d)
        if not np.all(np.isfinite(x)):
            raise NonFiniteError(f"state became non-finite at t={t + dt}")
        xs[k + 1] = x
    us[steps] = control(ts[steps], x)
    ds[steps] = disturbance(ts[steps], x)
    return Trajectory(ts, xs, us, ds)


def rk4_step(model, x, t, dt, control, delta):
    """One classical RK4 step with stage-evaluated control and held delta."""

    def deriv(ti, xi):
        return model.derivative(xi, np.asarray(control(ti, xi), dtype=float), delta)

    k1 = deriv(t, x)
    k2 = deriv(t + dt / 2, x + dt / 2 * k1)
    k3 = deriv(t + dt / 2, x + dt / 2 * k2)
    k4 = deriv(t + dt, x + dt * k3)
    return x + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)


LIPSCHITZ_SAFETY = 1.2
MIN_EIG_SAFETY = 0.9


def estimate_lipschitz(model: DynamicsModel, domain: Box, samples: int, seed) -> float:
    """Sampled Lipschitz bound for f and g over ``domain``, inflated by 1.2.

    Uses random point pairs plus tight pairs (x, x + 1e-4 * direction) so the
    local slope of smooth maps is captured.  The domain box lives in the
    position coordinates; remaining state coordinates are sampled in the
    same numeric range.
    """
    if samples < 2:
        raise InvalidParam("need at least 2 samples")
    rng = np.random.default_rng(seed)
    dim = model.n
    lo = np.resize(domain.lower, dim)
    hi = np.resize(domain.upper, dim)
    pts_a = rng.uniform(lo, hi, size=(samples, dim))
    pts_b = rng.uniform(lo, hi, size=(samples, dim))
    dirs = rng.normal(size=(samples, dim))
    dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    near_b = pts_a + 1e-4 * dirs
    best = 0.0
    for a, b in ((pts_a, pts_b), (pts_a, near_b)):
        dx = np.linalg.norm(a - b, axis=1)
        ok = dx > 1e-12
        a, b, dx = a[ok], b[ok], dx[ok]
        df = np.linalg.norm(model.f(a) - model.f(b), axis=1)
        dg = np.linalg.norm(model.g(a) - model.g(b), axis=(1, 2))
        if dx.size:
            best = max(best, float(np.max(df / dx)), float(np.max(dg / dx)))
    return LIPSCHITZ_SAFETY * best


def min_eig_g(model: DynamicsModel, domain: Box, samples: int, seed) -> float:
    """Sampled lower bound on the symmetric part of g, deflated by 0.9."""
    if samples < 1:
        raise InvalidParam("need at least 1 sample")
    rng = np.random.default_rng(seed)
    dim = model.n
    lo = np.resize(domain.lower, dim)
    hi = np.resize(domain.upper, dim)
    pts = rng.uniform(lo, hi, size=(samples, dim))
    pts[0] = np.clip(np.zeros(dim), lo, hi)  # include the origin-most point
    gs = model.g(pts)
    sym = 0.5 * (gs + np.swapaxes(gs, -1, -2))
    eigs = np.linalg.eigvalsh(sym)
    worst = float(np.min(eigs))
    if worst <= 0:
        raise AssumptionViolated(
            f"symmetric part of g has eigenvalue {worst} <= 0 in the domain"
        )
    return MIN_EIG_SAFETY * worst


@dataclass(frozen=True)
class DisturbanceSpec:
    """Bound and generator policy for the disturbance signal."""

    bound: float
    policy: str = "zero"
    hold_time: float = 0.1
    target: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.bound < 0:
            raise InvalidParam(f"disturbance bound must be >= 0, got {self.bound}")
        if self.policy not in DISTURBANCE_POLICIES:
            raise InvalidParam(
                f"unknown policy {self.policy!r}; choose from {DISTURBANCE_POLICIES}"
            )
        if self.hold_time <= 0:
            raise InvalidParam("hold_time must be > 0")

    def generator(self, n: int, seed) -> Callable[[float, np.ndarray], np.ndarray]:
        """Deterministic ``delta(t, x)`` whose norm never exceeds the bound."""
        bound = self.bound
        if self.policy == "zero" or bound == 0.0:
            zero = np.zeros(n)
            return lambda t, x: zero
        if self.policy == "worst-case-radial":
            target = np.asarray(self.target, dtype=float)
            if target is None or target.shape != (n,):
                raise InvalidParam("worst-case-radial needs a full-state target")

            def radial(t, x):
                v = np.asarray(x, dtype=float) - target
                nrm = np.linalg.norm(v)
                if nrm < 1e-12:
                    d = np.zeros(n)
                    d[0] = bound
                    return d
                return bound / nrm * v

            return radial

        rng = np.random.default_rng(seed)
        hold = self.hold_time if self.policy == "random-hold" else None
        state = {"next_t": -np.inf, "value": np.zeros(n)}

        def draw():
            v = rng.normal(size=n)
            v /= np.linalg.norm(v)
            r = bound * rng.uniform() ** (1.0 / n)
            d = r * v
            assert np.linalg.norm(d) <= bound
            return d

        def gen(t, x):
            if hold is None:
                return draw()
            if t >= state["next_t"] - 1e-12:
                state["value"] = draw()
                state["next_t"] = t + hold
            return state["value"]

        return gen


def derive_seed(seed: int, *parts) -> int:
    """Stable sub-seed derivation for independent generator streams."""
    h = hashlib.sha256(repr((int(seed),) + tuple(parts)).encode()).digest()
    return int.from_bytes(h[:8], "big")
