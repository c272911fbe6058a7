"""Synthetic short-axis slices with exact ground truth.

A phantom is a dark background, a myocardial annulus of intermediate
intensity and a bright blood pool, optionally with papillary muscles
(wall-intensity blobs attached to the inside of the wall) and a right
ventricle crescent (pool intensity) hugging the outside of the wall.
Additive Gaussian noise is folded back into [0, 255] the way a magnitude
image reflects negative values, so the darkest and brightest classes pile
up against the ends of the intensity range instead of forming clipped spikes.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .morphology import convex_hull_mask


class PhantomError(ValueError):
    pass


@dataclass(frozen=True)
class Papillary:
    angle: float  # radians, measured from +x towards +y (image rows)
    radius_offset: float  # blob centre sits this far inside the pool edge
    blob_radius: float


@dataclass(frozen=True)
class RightVentricle:
    angle: float
    span: float  # angular extent in radians
    thickness: float
    gap: float = 0.0  # dark tissue between the LV wall and the RV cavity


@dataclass(frozen=True)
class PhantomSpec:
    image_size: int = 160
    lv_center: tuple = (80.0, 80.0)  # (x, y)
    pool_radius: float = 20.0
    wall_thickness: float = 8.0
    intensities: tuple = (0.0, 110.0, 255.0)  # background, wall, pool
    papillary: tuple = ()
    rv: RightVentricle | None = None
    noise_sigma: float = 0.0
    seed: int = 0

    def validate(self, clean: bool = True):
        bg, wall, pool = self.intensities
        outer = self.pool_radius + self.wall_thickness
        if self.pool_radius <= 0 or self.wall_thickness <= 0:
            raise PhantomError("pool_radius and wall_thickness must be positive")
        if not outer < self.image_size / 2:
            raise PhantomError("pool_radius + wall_thickness must be below image_size / 2")
        reach = outer + (self.rv.gap + self.rv.thickness if self.rv else 0.0)
        cx, cy = self.lv_center
        if min(cx, cy) - reach < 0 or max(cx, cy) + reach > self.image_size - 1:
            raise PhantomError("heart does not fit inside the image")
        if not bg < pool:
            raise PhantomError("background must be darker than the pool")
        if not (wall < min(bg, pool) or bg < wall < pool):
            raise PhantomError("wall intensity must be separated from background and pool")
        if not all(0 <= v <= 255 for v in self.intensities):
            raise PhantomError("intensities must lie in [0, 255]")
        if self.noise_sigma < 0:
            raise PhantomError("noise_sigma must be >= 0")
        if clean:
            gaps = np.diff(sorted(self.intensities))
            if np.any(gaps < 4 * self.noise_sigma):
                raise PhantomError("intensity means must be at least 4 sigma apart")


@dataclass
class Phantom:
    image: np.ndarray
    pool: np.ndarray
    wall: np.ndarray
    pool_with_papillary_hull: np.ndarray
    rv: np.ndarray
    spec: PhantomSpec = field(repr=False)

    def truths(self) -> dict:
        return {
            "pool": self.pool,
            "wall": self.wall,
            "pool_with_papillary_hull": self.pool_with_papillary_hull,
            "rv": self.rv,
        }


def fold_into_range(img, lo=0.0, hi=255.0):
    """Reflect values back into ``[lo, hi]`` at both ends; in-range values are untouched."""
    img = np.asarray(img, dtype=float)
    span = hi - lo
    t = np.mod(img - lo, 2 * span)
    folded = lo + np.where(t > span, 2 * span - t, t)
    return np.where((img >= lo) & (img <= hi), img, folded)


def generate_phantom(spec: PhantomSpec, clean: bool = True) -> Phantom:
    spec.validate(clean)
    n = spec.image_size
    yy, xx = np.mgrid[:n, :n].astype(float)
    cx, cy = spec.lv_center
    dist = np.hypot(xx - cx, yy - cy)
    r, outer = spec.pool_radius, spec.pool_radius + spec.wall_thickness

    disk = dist <= r
    wall = (dist > r) & (dist <= outer)
    blobs = np.zeros_like(disk)
    for p in spec.papillary:
        d = r - p.radius_offset
        bx, by = cx + d * np.cos(p.angle), cy + d * np.sin(p.angle)
        blobs |= np.hypot(xx - bx, yy - by) <= p.blob_radius
    pool = disk & ~blobs

    rv = np.zeros_like(disk)
    if spec.rv is not None:
        theta = np.arctan2(yy - cy, xx - cx)
        dtheta = np.angle(np.exp(1j * (theta - spec.rv.angle)))
        inner = outer + spec.rv.gap
        rv = (dist > inner) & (dist <= inner + spec.rv.thickness) & (np.abs(dtheta) <= spec.rv.span / 2)

    bg, wall_i, pool_i = map(float, spec.intensities)
    img = np.full((n, n), bg)
    img[wall | (blobs & disk)] = wall_i
    img[pool | rv] = pool_i
    if spec.noise_sigma > 0:
        rng = np.random.default_rng(spec.seed)
        img = fold_into_range(img + rng.normal(0.0, spec.noise_sigma, img.shape))

    hull = convex_hull_mask(pool) if pool.any() else pool.copy()
    return Phantom(img, pool, wall, hull, rv, spec)


@dataclass(frozen=True)
class SuiteRanges:
    """Uniform sampling ranges for :func:`generate_suite`."""

    pool_radius: tuple = (12.0, 30.0)
    wall_thickness: tuple = (5.0, 12.0)
    noise_sigma: tuple = (0.0, 10.0)
    center_jitter: float = 10.0
    background: tuple = (0.0, 5.0)
    wall: tuple = (80.0, 140.0)
    pool: tuple = (240.0, 255.0)
    papillary_count: tuple = (0, 3)
    papillary_radius_frac: tuple = (0.1, 0.2)


def random_spec(rng: np.random.Generator, base: PhantomSpec, ranges: SuiteRanges) -> PhantomSpec:
    u = lambda lo_hi: float(rng.uniform(*lo_hi))  # noqa: E731
    r = u(ranges.pool_radius)
    t = u(ranges.wall_thickness)
    c = base.image_size / 2 + rng.uniform(-ranges.center_jitter, ranges.center_jitter, 2)
    pap = []
    for _ in range(int(rng.integers(ranges.papillary_count[0], ranges.papillary_count[1] + 1))):
        b = r * u(ranges.papillary_radius_frac)
        pap.append(Papillary(u((0, 2 * np.pi)), b * u((0.3, 0.8)), b))
    return replace(
        base,
        lv_center=(float(c[0]), float(c[1])),
        pool_radius=r,
        wall_thickness=t,
        intensities=(u(ranges.background), u(ranges.wall), u(ranges.pool)),
        papillary=tuple(pap),
        noise_sigma=u(ranges.noise_sigma),
        seed=int(rng.integers(2**31)),
    )


def generate_suite(n: int, base: PhantomSpec | None = None, ranges: SuiteRanges | None = None,
                   master_seed: int = 0) -> list[Phantom]:
    if n < 1:
        raise PhantomError("suite size must be >= 1")
    base = base or PhantomSpec()
    ranges = ranges or SuiteRanges()
    rng = np.random.default_rng(master_seed)
    return [generate_phantom(random_spec(rng, base, ranges)) for _ in range(n)]


@dataclass(frozen=True)
class TrimodalRanges:
    """Three Gaussian intensity classes; the middle one is the narrow, heavy mode."""

    means: tuple = (40.0, 128.0, 215.0)
    middle_sigma: tuple = (8.0, 12.0)
    side_sigma: tuple = (20.0, 30.0)
    middle_weight: tuple = (0.4, 0.6)
    n_samples: int = 20000


def trimodal_samples(rng: np.random.Generator, ranges: TrimodalRanges | None = None) -> list[np.ndarray]:
    """Integer intensities in 0..255, one array per mixture component (low, middle, high)."""
    ranges = ranges or TrimodalRanges()
    sm = rng.uniform(*ranges.middle_sigma)
    s1, s3 = rng.uniform(*ranges.side_sigma, 2)
    w = rng.uniform(*ranges.middle_weight)
    n = ranges.n_samples
    nm = int(n * w)
    n1 = (n - nm) // 2
    sizes = (n1, nm, n - nm - n1)
    out = []
    for mean, sigma, size in zip(ranges.means, (s1, sm, s3), sizes):
        x = rng.normal(mean, sigma, size)
        out.append(np.clip(np.floor(x), 0, 255).astype(np.int64))
    return out
