"""Procedural 3D (x, y, t) noise volumes with exact amplitude bounding.

Two noise families are provided:

* Perlin-family ("perlin"): a multi-octave classic gradient-lattice noise
  passed through a sine color map, parameterized by per-axis wavelengths,
  an octave count, and a sine frequency multiplier.
* Gabor-family ("gabor"): sparse convolution of a 3D Gabor kernel against
  per-frame Poisson impulse fields, summed over a set of random
  orientations.

A volume is a (T, H, W) float32 array rescaled so that its largest
absolute value equals the requested bound `epsilon` exactly.  Volumes are
treated as circular in time: frame indices wrap modulo T everywhere
downstream.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import ValidationError

# Optimizer search ranges.  Values outside these are legal for manual
# construction but produce a warning, since results are uncalibrated there.
LAMBDA_RANGE = (2.0, 180.0)
OCTAVES_RANGE = (1, 5)
PHI_RANGE = (1.0, 60.0)
K_RANGE = (1.0, 5.0)
SIGMA_RANGE = (1.0, 20.0)
F_RANGE = (0.25, 20.0)

DEFAULT_IMPULSE_DENSITY = 0.05
DEFAULT_NUM_ORIENTATIONS = 8

# Gaussian envelope exp(-pi*sigma^2*r^2) drops below 1e-9 past r = 2.6/sigma;
# the frame scatter path truncates kernels there.
_TRUNCATION = 2.6


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise ValidationError(msg)


def _flag(value: float, rng: tuple, name: str) -> None:
    if not rng[0] <= value <= rng[1]:
        warnings.warn(
            f"{name}={value} outside search range [{rng[0]}, {rng[1]}]",
            UserWarning,
            stacklevel=3,
        )


@dataclass(frozen=True)
class PerlinParams:
    """Perlin-family parameters.

    Attributes
    ----------
    lambda_x, lambda_y, lambda_t : float
        Wavelengths along each axis; pixel/frame coordinates are divided
        by these before lattice lookup.
    num_octaves : int
        Highest octave index; the octave sum runs 0..num_octaves inclusive.
    phi : float
        Sine color-map frequency multiplier.
    """

    lambda_x: float
    lambda_y: float
    lambda_t: float
    num_octaves: int
    phi: float

    def __post_init__(self):
        for name in ("lambda_x", "lambda_y", "lambda_t"):
            v = getattr(self, name)
            _require(math.isfinite(v) and v > 0, f"{name} must be positive, got {v}")
            _flag(v, LAMBDA_RANGE, name)
        _require(
            isinstance(self.num_octaves, (int, np.integer)) and self.num_octaves >= 0,
            f"num_octaves must be a non-negative integer, got {self.num_octaves!r}",
        )
        object.__setattr__(self, "num_octaves", int(self.num_octaves))
        _flag(self.num_octaves, OCTAVES_RANGE, "num_octaves")
        _require(
            math.isfinite(self.phi) and self.phi > 0,
            f"phi must be positive, got {self.phi}",
        )
        _flag(self.phi, PHI_RANGE, "phi")


@dataclass(frozen=True)
class GaborParams:
    """Gabor-family parameters.

    Attributes
    ----------
    K : float
        Kernel magnitude.
    sigma : float
        Inverse width of the Gaussian envelope (support radius ~ 1/sigma).
    F : float
        Harmonic frequency magnitude.
    impulse_density : float
        Expected impulses per kernel-support area per frame.
    num_orientations : int
        Number of (theta, omega) orientation samples summed per volume.
    seed : int
        Seed for impulse positions and orientations.
    """

    K: float
    sigma: float
    F: float
    impulse_density: float = DEFAULT_IMPULSE_DENSITY
    num_orientations: int = DEFAULT_NUM_ORIENTATIONS
    seed: int = 0

    def __post_init__(self):
        _require(math.isfinite(self.K), f"K must be finite, got {self.K}")
        _flag(self.K, K_RANGE, "K")
        _require(
            math.isfinite(self.sigma) and self.sigma > 0,
            f"sigma must be positive, got {self.sigma}",
        )
        _flag(self.sigma, SIGMA_RANGE, "sigma")
        _require(
            math.isfinite(self.F) and self.F >= 0,
            f"F must be non-negative, got {self.F}",
        )
        _flag(self.F, F_RANGE, "F")
        _require(
            math.isfinite(self.impulse_density) and self.impulse_density > 0,
            f"impulse_density must be positive, got {self.impulse_density}",
        )
        _require(
            isinstance(self.num_orientations, (int, np.integer))
            and self.num_orientations >= 1,
            f"num_orientations must be a positive integer, got {self.num_orientations!r}",
        )
        object.__setattr__(self, "num_orientations", int(self.num_orientations))
        _require(
            isinstance(self.seed, (int, np.integer)) and self.seed >= 0,
            f"seed must be a non-negative integer, got {self.seed!r}",
        )
        object.__setattr__(self, "seed", int(self.seed))


VARIANTS = ("perlin", "gabor")
_PARAM_TYPES = {"perlin": PerlinParams, "gabor": GaborParams}


@dataclass(frozen=True)
class NoiseSpec:
    """A complete recipe for one perturbation volume.

    `seed` is the generation seed (drives the Perlin lattice permutation;
    the Gabor variant draws its randomness from params.seed instead, so
    that pointwise evaluation needs only the params).
    """

    variant: str
    params: object
    T: int
    epsilon: float
    seed: int = 0

    def __post_init__(self):
        _require(self.variant in VARIANTS, f"variant must be one of {VARIANTS}")
        expected = _PARAM_TYPES[self.variant]
        _require(
            isinstance(self.params, expected),
            f"params for variant {self.variant!r} must be {expected.__name__}",
        )
        _require(
            isinstance(self.T, (int, np.integer)) and self.T >= 1,
            f"T must be a positive integer, got {self.T!r}",
        )
        object.__setattr__(self, "T", int(self.T))
        _require(
            math.isfinite(self.epsilon) and self.epsilon > 0,
            f"epsilon must be positive, got {self.epsilon}",
        )
        _require(
            isinstance(self.seed, (int, np.integer)) and self.seed >= 0,
            f"seed must be a non-negative integer, got {self.seed!r}",
        )
        object.__setattr__(self, "seed", int(self.seed))

    def to_dict(self) -> dict:
        params = {k: getattr(self.params, k) for k in type(self.params).__dataclass_fields__}
        return {
            "variant": self.variant,
            "T": self.T,
            "epsilon": self.epsilon,
            "seed": self.seed,
            "params": params,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "NoiseSpec":
        try:
            variant = d["variant"]
            _require(variant in VARIANTS, f"variant must be one of {VARIANTS}")
            params = _PARAM_TYPES[variant](**d["params"])
            return cls(
                variant=variant,
                params=params,
                T=d["T"],
                epsilon=d["epsilon"],
                seed=d.get("seed", 0),
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed noise spec: {exc}") from exc


def save_spec(spec: NoiseSpec, path) -> None:
    with open(path, "w") as f:
        json.dump(spec.to_dict(), f, indent=2)
        f.write("\n")


def load_spec(path) -> NoiseSpec:
    with open(path) as f:
        try:
            d = json.load(f)
        except json.JSONDecodeError as exc:
            raise ValidationError(f"spec file is not valid JSON: {exc}") from exc
    return NoiseSpec.from_dict(d)


@dataclass(frozen=True)
class PerturbationVolume:
    """A bounded (T, H, W) float32 noise volume plus its provenance."""

    volume: np.ndarray
    epsilon: float
    spec: NoiseSpec

    def __post_init__(self):
        vol = np.ascontiguousarray(self.volume, dtype=np.float32)
        _require(vol.ndim == 3, f"volume must be 3-d (T,H,W), got shape {vol.shape}")
        _require(bool(np.all(np.isfinite(vol))), "volume contains non-finite values")
        peak = float(np.max(np.abs(vol))) if vol.size else 0.0
        _require(peak <= self.epsilon, f"volume peak {peak} exceeds bound {self.epsilon}")
        object.__setattr__(self, "volume", vol)

    @property
    def T(self) -> int:
        return self.volume.shape[0]

    @property
    def shape(self) -> tuple:
        return self.volume.shape


# ---------------------------------------------------------------------------
# Perlin family


# 12 edge-gradient vectors of the cube; corner hashes index these mod 12.
_GRADS = np.array(
    [
        (1, 1, 0), (-1, 1, 0), (1, -1, 0), (-1, -1, 0),
        (1, 0, 1), (-1, 0, 1), (1, 0, -1), (-1, 0, -1),
        (0, 1, 1), (0, -1, 1), (0, 1, -1), (0, -1, -1),
    ],
    dtype=np.float64,
)


@lru_cache(maxsize=128)
def _perm_table(seed: int) -> np.ndarray:
    """Seeded 256-entry permutation, doubled so hash sums never wrap."""
    perm = np.random.default_rng(seed).permutation(256)
    table = np.concatenate([perm, perm]).astype(np.int64)
    table.setflags(write=False)
    return table


def _fade(u):
    # quintic smoothstep 6u^5 - 15u^4 + 10u^3; zero slope at lattice points
    return u * u * u * (u * (u * 6.0 - 15.0) + 10.0)


def _lerp(a, b, w):
    return a + w * (b - a)


def _grad_dot(h, dx, dy, dz):
    g = _GRADS[h % 12]
    return g[..., 0] * dx + g[..., 1] * dy + g[..., 2] * dz


def _perlin(x, y, z, table: np.ndarray):
    """Classic 3D gradient noise over broadcastable coordinate arrays."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    z = np.asarray(z, dtype=np.float64)
    xi = np.floor(x)
    yi = np.floor(y)
    zi = np.floor(z)
    xf = x - xi
    yf = y - yi
    zf = z - zi
    X = xi.astype(np.int64) & 255
    Y = yi.astype(np.int64) & 255
    Z = zi.astype(np.int64) & 255

    A = table[X] + Y
    B = table[X + 1] + Y
    AA = table[A] + Z
    AB = table[A + 1] + Z
    BA = table[B] + Z
    BB = table[B + 1] + Z

    c000 = _grad_dot(table[AA], xf, yf, zf)
    c100 = _grad_dot(table[BA], xf - 1.0, yf, zf)
    c010 = _grad_dot(table[AB], xf, yf - 1.0, zf)
    c110 = _grad_dot(table[BB], xf - 1.0, yf - 1.0, zf)
    c001 = _grad_dot(table[AA + 1], xf, yf, zf - 1.0)
    c101 = _grad_dot(table[BA + 1], xf - 1.0, yf, zf - 1.0)
    c011 = _grad_dot(table[AB + 1], xf, yf - 1.0, zf - 1.0)
    c111 = _grad_dot(table[BB + 1], xf - 1.0, yf - 1.0, zf - 1.0)

    u = _fade(xf)
    v = _fade(yf)
    w = _fade(zf)
    x00 = _lerp(c000, c100, u)
    x10 = _lerp(c010, c110, u)
    x01 = _lerp(c001, c101, u)
    x11 = _lerp(c011, c111, u)
    y0 = _lerp(x00, x10, v)
    y1 = _lerp(x01, x11, v)
    return _lerp(y0, y1, w)


def perlin_base(x, y, t, seed: int):
    """Classic 3D Perlin noise at (x, y, t); scalar or broadcastable arrays.

    Deterministic in (coordinates, seed); exactly zero at integer lattice
    points; values lie inside [-1, 1].
    """
    out = _perlin(x, y, t, _perm_table(int(seed)))
    if np.isscalar(x) and np.isscalar(y) and np.isscalar(t):
        return float(out)
    return out


def _octave_sum(x, y, t, p: PerlinParams, table: np.ndarray):
    total = 0.0
    for level in range(p.num_octaves + 1):  # inclusive upper bound
        s = 2.0**level
        total = total + _perlin(
            np.asarray(x) * (s / p.lambda_x),
            np.asarray(y) * (s / p.lambda_y),
            np.asarray(t) * (s / p.lambda_t),
            table,
        )
    return total


def u3dp_value(x, y, t, p: PerlinParams, seed: int):
    """Perlin-family noise value: sin(2*pi*phi * octave_sum(x, y, t))."""
    n = _octave_sum(x, y, t, p, _perm_table(int(seed)))
    out = np.sin(2.0 * np.pi * p.phi * n)
    if np.isscalar(x) and np.isscalar(y) and np.isscalar(t):
        return float(out)
    return out


# ---------------------------------------------------------------------------
# Gabor family


def gabor_kernel(x, y, t, K, sigma, F, theta, omega):
    """3D Gabor kernel: Gaussian envelope times an oriented harmonic.

    K * exp(-pi*sigma^2*(x^2+y^2+t^2)) * cos(2*pi*F*(x' + y' + t')) with
    x' = x sin(theta) cos(omega), y' = y sin(theta) sin(omega),
    t' = t cos(theta).
    """
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t = np.asarray(t, dtype=np.float64)
    envelope = np.exp(-np.pi * sigma**2 * (x * x + y * y + t * t))
    phase = (
        x * (math.sin(theta) * math.cos(omega))
        + y * (math.sin(theta) * math.sin(omega))
        + t * math.cos(theta)
    )
    out = K * envelope * np.cos(2.0 * np.pi * F * phase)
    if out.ndim == 0:
        return float(out)
    return out


def kernel_support_area(sigma: float) -> float:
    """Area of one kernel support disk (radius 1/sigma)."""
    return math.pi / (sigma * sigma)


def gabor_orientations(g: GaborParams) -> tuple:
    """The volume's (theta_i, omega_i) samples, uniform on [0, 2*pi]^2."""
    rng = np.random.default_rng([g.seed, 1])
    thetas = rng.uniform(0.0, 2.0 * np.pi, g.num_orientations)
    omegas = rng.uniform(0.0, 2.0 * np.pi, g.num_orientations)
    return thetas, omegas


def gabor_impulses(g: GaborParams, t: int, height: int, width: int) -> tuple:
    """Frame t's Poisson impulse field: (xs, ys) continuous positions.

    Count ~ Poisson(impulse_density * H * W / kernel_support_area),
    positions uniform over the frame; deterministic in (g.seed, t).
    """
    rng = np.random.default_rng([g.seed, 2, int(t)])
    mean = g.impulse_density * height * width / kernel_support_area(g.sigma)
    count = int(rng.poisson(mean))
    xs = rng.uniform(0.0, float(width), count)
    ys = rng.uniform(0.0, float(height), count)
    return xs, ys


def u3dg_raw(x, y, t, g: GaborParams, height: int, width: int) -> float:
    """Exact Gabor-family noise at pixel (x, y) of frame t.

    Sums the untruncated kernel over frame t's impulses and over all
    orientation samples; impulses act within their own frame, so the
    kernel's temporal argument is zero.
    """
    xs, ys = gabor_impulses(g, t, height, width)
    if xs.size == 0:
        return 0.0
    thetas, omegas = gabor_orientations(g)
    total = 0.0
    for theta, omega in zip(thetas, omegas):
        total += float(
            np.sum(gabor_kernel(x - xs, y - ys, 0.0, g.K, g.sigma, g.F, theta, omega))
        )
    return total


def _gabor_frame(g: GaborParams, t: int, height: int, width: int) -> np.ndarray:
    """One (H, W) frame via truncated kernel scatter (fast path).

    Kernels are cut off past the _TRUNCATION support radius where the
    envelope is ~1e-9, so this agrees with u3dg_raw to that accuracy.
    """
    out = np.zeros(height * width, dtype=np.float64)
    xs, ys = gabor_impulses(g, t, height, width)
    if xs.size == 0:
        return out.reshape(height, width)
    thetas, omegas = gabor_orientations(g)

    half = int(math.ceil(_TRUNCATION / g.sigma)) + 1
    offs = np.arange(-half, half + 1)
    cx = np.floor(xs)[:, None, None] + offs[None, None, :]
    cy = np.floor(ys)[:, None, None] + offs[None, :, None]
    dx = cx - xs[:, None, None]
    dy = cy - ys[:, None, None]
    valid = (cx >= 0) & (cx < width) & (cy >= 0) & (cy < height)

    envelope = g.K * np.exp(-np.pi * g.sigma**2 * (dx * dx + dy * dy))
    cos_sum = np.zeros_like(envelope)
    for theta, omega in zip(thetas, omegas):
        a = math.sin(theta) * math.cos(omega)
        b = math.sin(theta) * math.sin(omega)
        cos_sum += np.cos(2.0 * np.pi * g.F * (dx * a + dy * b))
    contrib = envelope * cos_sum

    flat = (cy * width + cx)[valid].astype(np.int64)
    out = np.bincount(flat, weights=contrib[valid], minlength=height * width)
    return out.reshape(height, width)


# ---------------------------------------------------------------------------
# Volume assembly


def _raw_volume(spec: NoiseSpec, height: int, width: int, seed: int) -> np.ndarray:
    if spec.variant == "perlin":
        table = _perm_table(int(seed))
        ts = np.arange(spec.T, dtype=np.float64).reshape(-1, 1, 1)
        ys = np.arange(height, dtype=np.float64).reshape(1, -1, 1)
        xs = np.arange(width, dtype=np.float64).reshape(1, 1, -1)
        n = _octave_sum(xs, ys, ts, spec.params, table)
        return np.sin(2.0 * np.pi * spec.params.phi * n)
    frames = [_gabor_frame(spec.params, t, height, width) for t in range(spec.T)]
    return np.stack(frames)


def representable_bound(epsilon: float) -> float:
    """Largest float32 value not exceeding epsilon."""
    e32 = np.float32(epsilon)
    if float(e32) > epsilon:
        e32 = np.nextafter(e32, np.float32(0.0))
    return float(e32)


def generate_volume(
    spec: NoiseSpec, height: int, width: int, seed: int | None = None
) -> PerturbationVolume:
    """Evaluate the spec's noise over a (T, H, W) grid and bound it.

    The raw field is rescaled so its largest absolute value equals the
    bound exactly (the largest float32 <= spec.epsilon); an identically
    zero field stays zero.  Bit-identical for the same (spec, dims, seed);
    `seed` defaults to spec.seed.
    """
    _require(height >= 1 and width >= 1, f"dims must be >= 1, got {height}x{width}")
    if seed is None:
        seed = spec.seed
    raw = _raw_volume(spec, height, width, int(seed))
    peak = float(np.max(np.abs(raw)))
    bound = representable_bound(spec.epsilon)
    if peak == 0.0:
        vol = np.zeros(raw.shape, dtype=np.float32)
    else:
        # divide by the peak first: the extreme element becomes exactly 1.0,
        # so after multiplying it lands on the bound with no rounding excess
        vol = ((raw / peak) * bound).astype(np.float32)
    return PerturbationVolume(volume=vol, epsilon=bound, spec=spec)


def temporal_shift(vol: PerturbationVolume, tau: int) -> PerturbationVolume:
    """Circularly advance a volume: output frame t = input frame (t+tau) mod T."""
    shift = int(tau) % vol.T
    rolled = np.roll(vol.volume, -shift, axis=0)
    return PerturbationVolume(volume=rolled, epsilon=vol.epsilon, spec=vol.spec)
