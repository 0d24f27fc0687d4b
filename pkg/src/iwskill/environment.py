"""Obstacle scenes, signed-distance queries, and per-state importance weights.

Weights discount demonstration states near obstacles: a hinge cost is active
inside the influence zone (distance <= epsilon) and is squashed through a
Gaussian so the weight decays from 1 toward 0 as the state approaches an
obstacle.
"""

import json
from dataclasses import dataclass, field

import numpy as np

# Signed distance reported when a scene has no obstacles (>= 1e6 by contract).
NO_OBSTACLE_DISTANCE = 1.0e9


@dataclass(frozen=True)
class Sphere:
    center: np.ndarray
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", np.asarray(self.center, dtype=float))
        if not self.radius > 0:
            raise ValueError("sphere radius must be positive")

    @property
    def dim(self) -> int:
        return self.center.shape[0]

    def signed_distance(self, p: np.ndarray) -> float:
        return float(np.linalg.norm(p - self.center) - self.radius)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.center - self.radius, self.center + self.radius


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        lo = np.asarray(self.lo, dtype=float)
        hi = np.asarray(self.hi, dtype=float)
        if lo.shape != hi.shape or np.any(lo >= hi):
            raise ValueError("box min must be strictly below max in every dimension")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def dim(self) -> int:
        return self.lo.shape[0]

    def signed_distance(self, p: np.ndarray) -> float:
        # exact closed form: positive outside, negative inside
        center = (self.lo + self.hi) / 2.0
        half = (self.hi - self.lo) / 2.0
        q = np.abs(p - center) - half
        outside = np.linalg.norm(np.maximum(q, 0.0))
        inside = min(float(np.max(q)), 0.0)
        return float(outside + inside)

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        return self.lo.copy(), self.hi.copy()


@dataclass(frozen=True)
class Environment:
    """A static obstacle scene in 2 or 3 dimensions."""

    dimension: int
    obstacles: list = field(default_factory=list)

    def __post_init__(self):
        if self.dimension not in (2, 3):
            raise ValueError("environment dimension must be 2 or 3")
        for obs in self.obstacles:
            if obs.dim != self.dimension:
                raise ValueError(f"obstacle dimension {obs.dim} != environment dimension {self.dimension}")

    def signed_distance(self, p: np.ndarray) -> float:
        return signed_distance(self, p)


def signed_distance(env: Environment, p: np.ndarray) -> float:
    """Exact signed distance from point p to the nearest obstacle surface
    (negative inside). Obstacle-free scenes return a large sentinel."""
    p = np.asarray(p, dtype=float)
    if p.shape != (env.dimension,):
        raise ValueError(f"query point has dimension {p.shape}, environment is {env.dimension}-D")
    if not env.obstacles:
        return NO_OBSTACLE_DISTANCE
    return min(obs.signed_distance(p) for obs in env.obstacles)


class SignedDistanceField:
    """Dense grid of signed distances with multilinear interpolation.

    Off-node queries interpolate the surrounding cell; gradients differentiate
    the interpolant itself (axis differences of the bracketing grid values),
    so they are the exact spatial derivative of `query` inside each cell.
    """

    def __init__(self, origin: np.ndarray, resolution: float, values: np.ndarray):
        if not resolution > 0:
            raise ValueError("resolution must be positive")
        self.origin = np.asarray(origin, dtype=float)
        self.resolution = float(resolution)
        self.values = np.asarray(values, dtype=float)
        if self.values.ndim != self.origin.shape[0]:
            raise ValueError("grid rank must match origin dimension")
        self.dim = self.values.ndim
        self.upper = self.origin + self.resolution * (np.array(self.values.shape) - 1)
        # corner offsets of one cell, shape (2**dim, dim)
        self._corners = np.stack(np.meshgrid(*([np.array([0, 1])] * self.dim), indexing="ij"),
                                 axis=-1).reshape(-1, self.dim)

    def _locate(self, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        p = np.asarray(p, dtype=float)
        if p.shape != (self.dim,):
            raise ValueError(f"query point has dimension {p.shape}, field is {self.dim}-D")
        eps = 1e-9 * self.resolution
        if np.any(p < self.origin - eps) or np.any(p > self.upper + eps):
            raise ValueError(f"query {p.tolist()} outside SDF bounds "
                             f"[{self.origin.tolist()}, {self.upper.tolist()}]")
        rel = (p - self.origin) / self.resolution
        cell = np.clip(np.floor(rel).astype(int), 0, np.array(self.values.shape) - 2)
        frac = np.clip(rel - cell, 0.0, 1.0)
        return cell, frac

    def query(self, p: np.ndarray) -> float:
        cell, frac = self._locate(p)
        value = 0.0
        for corner in self._corners:
            weight = np.prod(np.where(corner == 1, frac, 1.0 - frac))
            value += weight * self.values[tuple(cell + corner)]
        return float(value)

    def gradient(self, p: np.ndarray) -> np.ndarray:
        cell, frac = self._locate(p)
        grad = np.zeros(self.dim)
        for corner in self._corners:
            v = self.values[tuple(cell + corner)]
            w = np.where(corner == 1, frac, 1.0 - frac)
            sign = np.where(corner == 1, 1.0, -1.0)
            for k in range(self.dim):
                others = np.prod(np.delete(w, k))
                grad[k] += v * sign[k] * others
        return grad / self.resolution


def build_sdf(env: Environment, lo, hi, resolution: float) -> SignedDistanceField:
    """Sample `signed_distance` on a uniform grid covering [lo, hi]."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    if not resolution > 0:
        raise ValueError("resolution must be positive")
    if lo.shape != (env.dimension,) or hi.shape != (env.dimension,) or np.any(lo >= hi):
        raise ValueError("degenerate bounds: need lo < hi matching the environment dimension")
    shape = tuple(int(np.ceil((hi[k] - lo[k]) / resolution)) + 1 for k in range(env.dimension))
    axes = [lo[k] + resolution * np.arange(shape[k]) for k in range(env.dimension)]
    grids = np.meshgrid(*axes, indexing="ij")
    points = np.stack([g.ravel() for g in grids], axis=-1)
    values = np.array([signed_distance(env, p) for p in points]).reshape(shape)
    return SignedDistanceField(origin=lo, resolution=resolution, values=values)


@dataclass(frozen=True)
class WeightParams:
    """Danger-area radius epsilon (m) and weight decay scale sigma_obs (m)."""

    epsilon: float = 0.3
    sigma_obs: float = 0.01

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("epsilon must be >= 0")
        if not self.sigma_obs > 0:
            raise ValueError("sigma_obs must be positive")


def hinge_cost(d: float, params: WeightParams) -> float:
    """-d + epsilon inside the influence zone (d <= epsilon), 0 outside."""
    return max(params.epsilon - d, 0.0)


def _distance_at(source, p: np.ndarray) -> float:
    if isinstance(source, SignedDistanceField):
        return source.query(p)
    return signed_distance(source, p)


def importance_weight(x: np.ndarray, source, params: WeightParams) -> float:
    """exp(-c(x)^2 / (2 sigma_obs^2)) in (0, 1], with the distance taken on
    the position components of the state only."""
    x = np.asarray(x, dtype=float)
    dim = source.dim if isinstance(source, SignedDistanceField) else source.dimension
    if x.shape == (dim,):
        pos = x
    elif x.shape == (2 * dim,):
        pos = x[:dim]
    else:
        raise ValueError(f"state of length {x.shape} incompatible with {dim}-D scene")
    c = hinge_cost(_distance_at(source, pos), params)
    return float(np.exp(-c * c / (2.0 * params.sigma_obs ** 2)))


def weight_trajectory(traj, source, params: WeightParams) -> np.ndarray:
    """Per-node importance weights w(x_i), length N+1. `source` may be an
    Environment, a SignedDistanceField, or None (all weights 1)."""
    n_nodes = traj.states.shape[0]
    if source is None:
        return np.ones(n_nodes)
    return np.array([importance_weight(traj.states[i], source, params) for i in range(n_nodes)])


def load_environment(path: str) -> Environment:
    with open(path) as fh:
        data = json.load(fh)
    return environment_from_dict(data)


def environment_from_dict(data: dict) -> Environment:
    obstacles = []
    for spec in data.get("obstacles", []):
        kind = spec.get("type")
        if kind == "sphere":
            obstacles.append(Sphere(center=np.asarray(spec["center"], dtype=float),
                                    radius=float(spec["radius"])))
        elif kind == "box":
            obstacles.append(Box(lo=np.asarray(spec["min"], dtype=float),
                                 hi=np.asarray(spec["max"], dtype=float)))
        else:
            raise ValueError(f"unknown obstacle type: {kind!r}")
    return Environment(dimension=int(data["dimension"]), obstacles=obstacles)


def environment_to_dict(env: Environment) -> dict:
    obstacles = []
    for obs in env.obstacles:
        if isinstance(obs, Sphere):
            obstacles.append({"type": "sphere", "center": obs.center.tolist(), "radius": obs.radius})
        else:
            obstacles.append({"type": "box", "min": obs.lo.tolist(), "max": obs.hi.tolist()})
    return {"dimension": env.dimension, "obstacles": obstacles}


def scene_bounds(env: Environment, margin: float) -> tuple[np.ndarray, np.ndarray]:
    """Axis-aligned bounds enclosing all obstacles plus a margin; the margin
    alone around the origin if the scene is empty."""
    if not env.obstacles:
        return (np.full(env.dimension, -margin), np.full(env.dimension, margin))
    los, his = zip(*[obs.bounds() for obs in env.obstacles])
    return np.min(los, axis=0) - margin, np.max(his, axis=0) + margin
