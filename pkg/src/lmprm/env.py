"""Obstacle environments: exact collision queries, Poisson forests, clutter calibration.

Obstacles are closed sets and the free region is open, so touching an
obstacle boundary (or the boundary of the free box) counts as a collision.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from functools import cached_property
from pathlib import Path
from typing import Union

import numpy as np

from . import _kernels
from .errors import CalibrationError, SamplingError

DEFAULT_REJECTION_BUDGET = 10_000
DEFAULT_MU_SAMPLES = 100_000


@dataclass(frozen=True)
class Box:
    lo: tuple
    hi: tuple

    def __post_init__(self):
        object.__setattr__(self, "lo", tuple(float(v) for v in self.lo))
        object.__setattr__(self, "hi", tuple(float(v) for v in self.hi))
        if len(self.lo) != len(self.hi):
            raise ValueError("box corners differ in dimension")
        if any(a >= b for a, b in zip(self.lo, self.hi)):
            raise ValueError(f"degenerate box {self.lo} -> {self.hi}")

    @property
    def dim(self) -> int:
        return len(self.lo)

    @property
    def volume(self) -> float:
        return float(np.prod(np.subtract(self.hi, self.lo)))

    def contains_box(self, other: "Box") -> bool:
        return all(a <= c for a, c in zip(self.lo, other.lo)) and all(
            b >= d for b, d in zip(self.hi, other.hi)
        )

    @classmethod
    def cube(cls, half: float, dim: int) -> "Box":
        return cls((-half,) * dim, (half,) * dim)


@dataclass(frozen=True)
class Circle:
    """Closed ball (a disk in 2-D)."""

    center: tuple
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", tuple(float(v) for v in self.center))
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")


@dataclass(frozen=True)
class Rect:
    """Closed axis-aligned box obstacle."""

    min: tuple
    max: tuple

    def __post_init__(self):
        object.__setattr__(self, "min", tuple(float(v) for v in self.min))
        object.__setattr__(self, "max", tuple(float(v) for v in self.max))
        if len(self.min) != len(self.max) or any(a >= b for a, b in zip(self.min, self.max)):
            raise ValueError("degenerate rectangle")


Obstacle = Union[Circle, Rect]


@dataclass(frozen=True)
class Environment:
    dim: int
    free_bounds: Box
    sample_window: Box
    obstacles: tuple = ()
    mu_free_estimate: float | None = None
    mu_free_samples: int = 0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "obstacles", tuple(self.obstacles))
        if self.dim < 1:
            raise ValueError("dim must be positive")
        if self.free_bounds.dim != self.dim or self.sample_window.dim != self.dim:
            raise ValueError("box dimension does not match env.dim")
        if not self.sample_window.contains_box(self.free_bounds):
            raise ValueError("free_bounds must lie inside sample_window")
        for ob in self.obstacles:
            pts = ob.center if isinstance(ob, Circle) else ob.min
            if len(pts) != self.dim:
                raise ValueError("obstacle dimension does not match env.dim")
        if self.mu_free_estimate is not None and not (
            0.0 <= self.mu_free_estimate <= self.free_bounds.volume
        ):
            raise ValueError("mu_free_estimate outside [0, volume(free_bounds)]")

    @property
    def circles(self) -> list:
        return [o for o in self.obstacles if isinstance(o, Circle)]

    @property
    def rects(self) -> list:
        return [o for o in self.obstacles if isinstance(o, Rect)]

    @property
    def mu_free(self) -> float:
        """Free measure used by the roadmap radius (box volume when no estimate exists)."""
        if self.mu_free_estimate is None:
            return self.free_bounds.volume
        return self.mu_free_estimate

    @cached_property
    def _arrays(self):
        d = self.dim
        lo = np.array(self.free_bounds.lo)
        hi = np.array(self.free_bounds.hi)
        circles = self.circles
        centers = np.array([c.center for c in circles], dtype=np.float64).reshape(-1, d)
        radii = np.array([c.radius for c in circles], dtype=np.float64)
        # circles that cannot touch the free box never matter
        if len(radii):
            gap = np.maximum(lo - centers, 0.0) + np.maximum(centers - hi, 0.0)
            keep = np.einsum("ij,ij->i", gap, gap) <= radii**2
            centers, radii = np.ascontiguousarray(centers[keep]), radii[keep]
        rects = self.rects
        rlo = np.array([r.min for r in rects], dtype=np.float64).reshape(-1, d)
        rhi = np.array([r.max for r in rects], dtype=np.float64).reshape(-1, d)
        grid = _build_grid(centers, radii, lo, hi)
        return lo, hi, centers, radii, grid, rlo, rhi


def _build_grid(centers, radii, lo, hi, max_cells=1 << 20):
    d = lo.shape[0]
    if len(radii) == 0:
        return (np.zeros(2, np.int64), np.zeros(0, np.int64), lo.copy(), 1.0,
                np.ones(d, np.int64))
    rmax = float(radii.max())
    glo = lo - rmax
    extent = (hi - lo) + 2 * rmax
    cell = 2 * rmax
    while np.prod(np.ceil(extent / cell)) > max_cells:
        cell *= 1.5
    dims = np.maximum(np.ceil(extent / cell).astype(np.int64), 1)
    strides = np.ones(d, np.int64)
    for i in range(d - 2, -1, -1):
        strides[i] = strides[i + 1] * dims[i + 1]
    buckets: dict[int, list[int]] = {}
    for c in range(len(radii)):
        a = np.clip(np.floor((centers[c] - radii[c] - glo) / cell).astype(np.int64), 0, dims - 1)
        b = np.clip(np.floor((centers[c] + radii[c] - glo) / cell).astype(np.int64), 0, dims - 1)
        for idx in np.ndindex(*(b - a + 1)):
            flat = int(np.dot(a + np.array(idx), strides))
            buckets.setdefault(flat, []).append(c)
    ncell = int(np.prod(dims))
    counts = np.zeros(ncell, np.int64)
    for k, v in buckets.items():
        counts[k] = len(v)
    start = np.zeros(ncell + 1, np.int64)
    np.cumsum(counts, out=start[1:])
    items = np.empty(start[-1], np.int64)
    for k, v in buckets.items():
        items[start[k]: start[k + 1]] = v
    return start, items, glo, float(cell), dims


def _check_points(env: Environment, X) -> np.ndarray:
    X = np.ascontiguousarray(np.asarray(X, dtype=np.float64))
    if X.ndim == 1:
        X = X.reshape(1, -1)
    if X.shape[1] != env.dim:
        raise ValueError(f"expected points of dimension {env.dim}, got {X.shape[1]}")
    return X


def segments_clear(env: Environment, P, Q, threads: int = 1) -> np.ndarray:
    """Vectorised ``segment_clear`` over rows of P and Q."""
    P = _check_points(env, P)
    Q = _check_points(env, Q)
    if P.shape != Q.shape:
        raise ValueError("P and Q must have the same shape")
    lo, hi, centers, radii, (start, items, glo, cell, dims), rlo, rhi = env._arrays
    out = np.empty(len(P), dtype=np.bool_)

    def run(a, b):
        _kernels.segments_clear_kernel(P[a:b], Q[a:b], lo, hi, centers, radii, start, items,
                                       glo, cell, dims, rlo, rhi, out[a:b])

    m = len(P)
    if threads <= 1 or m < 20_000:
        run(0, m)
    else:
        bounds = np.linspace(0, m, threads * 4 + 1).astype(int)
        with ThreadPoolExecutor(threads) as pool:
            list(pool.map(run, bounds[:-1], bounds[1:]))
    return out


def points_free(env: Environment, X) -> np.ndarray:
    X = _check_points(env, X)
    return segments_clear(env, X, X)


def point_free(env: Environment, x) -> bool:
    return bool(points_free(env, x)[0])


def segment_clear(env: Environment, p, q) -> bool:
    """Exact test that the closed segment [p, q] misses every obstacle and stays in the free box."""
    return bool(segments_clear(env, p, q)[0])


def sample_free_batch(env: Environment, n: int, rng: np.random.Generator,
                      budget: int = DEFAULT_REJECTION_BUDGET,
                      unique: bool = False) -> np.ndarray:
    """Draw ``n`` points uniformly on the free space by rejection from the free box.

    Points come out in the order a sequential rejection sampler would accept
    them. Raises SamplingError after ``budget`` consecutive rejections.
    With ``unique=True`` exact duplicates of earlier points are rejected too.
    """
    lo = np.array(env.free_bounds.lo)
    hi = np.array(env.free_bounds.hi)
    out = np.empty((n, env.dim))
    seen = set() if unique else None
    filled = 0
    streak = 0
    while filled < n:
        want = n - filled
        chunk = max(64, int(want * 1.2) + 16)
        cand = rng.uniform(lo, hi, size=(chunk, env.dim))
        ok = points_free(env, cand)
        for i in range(chunk):
            if ok[i] and seen is not None:
                key = cand[i].tobytes()
                if key in seen:
                    ok[i] = False
                else:
                    seen.add(key)
            if ok[i]:
                out[filled] = cand[i]
                filled += 1
                streak = 0
                if filled == n:
                    break
            else:
                streak += 1
                if streak >= budget:
                    raise SamplingError(
                        f"{budget} consecutive rejections; free space looks empty"
                    )
    return out


def sample_free(env: Environment, rng: np.random.Generator,
                budget: int = DEFAULT_REJECTION_BUDGET) -> np.ndarray:
    return sample_free_batch(env, 1, rng, budget)[0]


def estimate_free_measure(env: Environment, rng: np.random.Generator,
                          samples: int = DEFAULT_MU_SAMPLES) -> Environment:
    """Return a copy of ``env`` with a Monte-Carlo estimate of the free measure."""
    lo = np.array(env.free_bounds.lo)
    hi = np.array(env.free_bounds.hi)
    pts = rng.uniform(lo, hi, size=(samples, env.dim))
    frac = float(np.count_nonzero(points_free(env, pts))) / samples
    return replace(env, mu_free_estimate=frac * env.free_bounds.volume, mu_free_samples=samples)


# --------------------------------------------------------------------------
# Poisson forest and clutter calibration


def ball_volume(d: int, r: float = 1.0) -> float:
    return math.pi ** (d / 2) / math.gamma(d / 2 + 1) * r**d


def swept_measure(obstacle_radius: float, length, dim: int = 2):
    """Measure of the set of centres whose ball touches a segment of the given length.

    In 2-D this is pi r^2 + 2 r l.
    """
    r = obstacle_radius
    return ball_volume(dim, r) + ball_volume(dim - 1, r) * np.asarray(length)


def poisson_forest(intensity: float, obstacle_radius: float, rng: np.random.Generator,
                   window: Box | None = None, dim: int = 2,
                   mu_samples: int = DEFAULT_MU_SAMPLES, seed: int | None = None) -> Environment:
    """Sample N ~ Poisson(intensity * |window|) balls with centres uniform on the window.

    The free region is the box [-0.5, 0.5]^dim minus the balls.
    """
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    if not obstacle_radius > 0:
        raise ValueError("obstacle_radius must be positive")
    window = window or Box.cube(1.0, dim)
    count = int(rng.poisson(intensity * window.volume))
    centers = rng.uniform(window.lo, window.hi, size=(count, dim))
    env = Environment(
        dim=dim,
        free_bounds=Box.cube(0.5, dim),
        sample_window=window,
        obstacles=tuple(Circle(tuple(c), obstacle_radius) for c in centers),
        seed=seed,
    )
    if mu_samples <= 0:
        return env
    return estimate_free_measure(env, rng, mu_samples)


def _pair_lengths(mc_pairs: int, rng: np.random.Generator, dim: int) -> np.ndarray:
    z1 = rng.uniform(-0.5, 0.5, size=(mc_pairs, dim))
    z2 = rng.uniform(-0.5, 0.5, size=(mc_pairs, dim))
    return np.linalg.norm(z1 - z2, axis=1)


def clear_given_length(intensity: float, obstacle_radius: float, length, dim: int = 2):
    """P(clear | segment length), with the obstacle count already integrated out.

    For N ~ Poisson(lam |S|) and a per-obstacle miss probability
    q = 1 - swept/|S|, E[q^N] = exp(-lam |S| (1 - q)) = exp(-lam * swept).
    The window size cancels as long as the swept region stays inside it.
    """
    return np.exp(-intensity * swept_measure(obstacle_radius, length, dim))


def clear_probability(intensity: float, obstacle_radius: float, mc_pairs: int,
                      rng: np.random.Generator, dim: int = 2,
                      lengths: np.ndarray | None = None) -> float:
    """Monte-Carlo estimate of the probability that a random segment in [-0.5,0.5]^d is clear.

    Endpoints are uniform on the obstacle-free box. Pass ``lengths`` to reuse
    a fixed set of pair lengths (common random numbers).
    """
    if intensity < 0:
        raise ValueError("intensity must be >= 0")
    if intensity == 0:
        return 1.0
    if lengths is None:
        lengths = _pair_lengths(mc_pairs, rng, dim)
    return float(np.mean(clear_given_length(intensity, obstacle_radius, lengths, dim)))


@dataclass(frozen=True)
class ClutterSpec:
    target_clear: float
    obstacle_radius: float = 0.05
    mc_pairs: int = 100_000
    tolerance: float = 0.005

    def __post_init__(self):
        if not 0.0 < self.target_clear <= 1.0:
            raise ValueError("target_clear must be in (0, 1]")
        if not self.tolerance > 0:
            raise ValueError("tolerance must be positive")
        if not self.obstacle_radius > 0:
            raise ValueError("obstacle_radius must be positive")


def calibrate_intensity(spec: ClutterSpec, rng: np.random.Generator, dim: int = 2,
                        lam_max: float = 1e4) -> float:
    """Bisection on intensity so the clear probability hits ``spec.target_clear``.

    One set of pair lengths is drawn up front and reused, which makes the
    estimate exactly monotone in the intensity.
    """
    if spec.target_clear >= 1.0:
        return 0.0
    lengths = _pair_lengths(spec.mc_pairs, rng, dim)

    def p(lam):
        return clear_probability(lam, spec.obstacle_radius, spec.mc_pairs, rng, dim, lengths)

    lo, hi = 0.0, 1.0
    while p(hi) > spec.target_clear:
        lo, hi = hi, hi * 2
        if hi > lam_max:
            if p(lam_max) > spec.target_clear:
                raise CalibrationError(
                    f"P(clear) stays above {spec.target_clear} up to intensity {lam_max}"
                )
            hi = lam_max
            break
    mid = 0.5 * (lo + hi)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        pm = p(mid)
        if abs(pm - spec.target_clear) <= 0.1 * spec.tolerance or hi - lo < 1e-12 * hi:
            break
        if pm > spec.target_clear:
            lo = mid
        else:
            hi = mid
    return mid


# --------------------------------------------------------------------------
# JSON files


def env_to_dict(env: Environment) -> dict:
    obs = []
    for ob in env.obstacles:
        if isinstance(ob, Circle):
            obs.append({"kind": "circle", "center": list(ob.center), "radius": ob.radius})
        else:
            obs.append({"kind": "rect", "min": list(ob.min), "max": list(ob.max)})
    return {
        "dim": env.dim,
        "free_bounds": {"min": list(env.free_bounds.lo), "max": list(env.free_bounds.hi)},
        "sample_window": {"min": list(env.sample_window.lo), "max": list(env.sample_window.hi)},
        "obstacles": obs,
        "mu_free_estimate": env.mu_free_estimate,
        "mu_free_samples": env.mu_free_samples,
        "seed": env.seed,
    }


def env_from_dict(data: dict) -> Environment:
    obs = []
    for o in data.get("obstacles", []):
        if o["kind"] == "circle":
            obs.append(Circle(tuple(o["center"]), o["radius"]))
        elif o["kind"] == "rect":
            obs.append(Rect(tuple(o["min"]), tuple(o["max"])))
        else:
            raise ValueError(f"unknown obstacle kind {o['kind']!r}")
    fb, sw = data["free_bounds"], data["sample_window"]
    return Environment(
        dim=int(data["dim"]),
        free_bounds=Box(fb["min"], fb["max"]),
        sample_window=Box(sw["min"], sw["max"]),
        obstacles=tuple(obs),
        mu_free_estimate=data.get("mu_free_estimate"),
        mu_free_samples=int(data.get("mu_free_samples", 0)),
        seed=data.get("seed"),
    )


def save_env(env: Environment, path) -> None:
    Path(path).write_text(json.dumps(env_to_dict(env), indent=1) + "\n")


def load_env(path) -> Environment:
    return env_from_dict(json.loads(Path(path).read_text()))
