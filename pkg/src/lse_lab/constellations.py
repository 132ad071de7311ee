"""Per-antenna transmit sets and their Euclidean projections.

Each set provides

* ``project(w)``: the closest point of the set to each entry of ``w``,
* ``sample(rng, size)``: random points of the set, used to seed searches,
* ``radial_breaks(scale)`` / ``angular_breaks()``: where ``project(scale * z)``
  is not smooth, so quadrature panels can be aligned with the kinks.

Constant-modulus sets (:class:`Circle`, :class:`Mpsk`) have a fixed per-entry
power, which makes a Tikhonov penalty a constant; precoders and replica
solvers ignore the regulariser for them.
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FullComplex:
    """The whole complex plane (no constraint)."""

    name = "full"
    constant_modulus = False
    discrete = False

    def project(self, w):
        return np.asarray(w, dtype=complex)

    def sample(self, rng, size):
        return (rng.standard_normal(size) + 1j * rng.standard_normal(size)) / np.sqrt(2.0)

    def radial_breaks(self, scale):
        return ()

    def angular_breaks(self):
        return ()


@dataclass(frozen=True)
class Disk:
    """Disk ``|x|^2 <= P`` (per-antenna peak power constraint)."""

    P: float
    name = "disk"
    constant_modulus = False
    discrete = False

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("peak power P must be positive")

    def project(self, w):
        w = np.asarray(w, dtype=complex)
        a = np.abs(w)
        rp = np.sqrt(self.P)
        fac = np.ones_like(a)
        np.divide(rp, a, out=fac, where=a > rp)
        return w * fac

    def sample(self, rng, size):
        r = np.sqrt(self.P * rng.uniform(size=size))
        return r * np.exp(2j * np.pi * rng.uniform(size=size))

    def radial_breaks(self, scale):
        return (np.sqrt(self.P) / scale,)

    def angular_breaks(self):
        return ()


@dataclass(frozen=True)
class Circle:
    """Circle ``|x|^2 = P`` (constant envelope)."""

    P: float = 1.0
    name = "circle"
    constant_modulus = True
    discrete = False

    def __post_init__(self):
        if not self.P > 0:
            raise ValueError("power P must be positive")

    @property
    def power(self):
        return self.P

    def project(self, w):
        w = np.asarray(w, dtype=complex)
        # the origin is equidistant from the whole circle; angle(0) = 0 picks phase zero.
        # going through the angle avoids overflow in w / |w| for subnormal w
        return np.sqrt(self.P) * np.exp(1j * np.angle(w))

    def sample(self, rng, size):
        return np.sqrt(self.P) * np.exp(2j * np.pi * rng.uniform(size=size))

    def radial_breaks(self, scale):
        return ()

    def angular_breaks(self):
        return ()


@dataclass(frozen=True)
class Mpsk:
    """``M``-ary phase shift keying ``{sqrt(p) exp(j 2 pi m / M), m = 1..M}``.

    ``points[i]`` is the symbol with ``m = i + 1``; the last entry is the
    symbol on the positive real axis.
    """

    M: int
    p: float = 1.0
    name = "mpsk"
    constant_modulus = True
    discrete = True

    def __post_init__(self):
        if int(self.M) != self.M or self.M < 2:
            raise ValueError("M must be an integer >= 2")
        if not self.p > 0:
            raise ValueError("symbol power p must be positive")

    @property
    def power(self):
        return self.p

    @property
    def points(self):
        m = np.arange(1, self.M + 1)
        z = np.exp(2j * np.pi * m / self.M)
        # make the symbols on the axes exact
        re, im = z.real, z.imag
        re[np.abs(re) < 1e-12] = 0.0
        im[np.abs(im) < 1e-12] = 0.0
        return np.sqrt(self.p) * (re + 1j * im)

    def nearest_index(self, w):
        """Index into :attr:`points` of the closest symbol; ties go to the lower index."""
        w = np.asarray(w, dtype=complex)
        pts = self.points
        if self.M <= 64:
            dist = np.abs(w[..., None] - pts) ** 2
            return np.argmin(dist, axis=-1)
        # large alphabets: round the phase (ties are measure zero here)
        k = np.rint(np.angle(w) * self.M / (2.0 * np.pi)).astype(np.int64)
        return np.mod(k - 1, self.M)

    def project(self, w):
        return self.points[self.nearest_index(w)]

    def sample(self, rng, size):
        return self.points[rng.integers(0, self.M, size=size)]

    def radial_breaks(self, scale):
        return ()

    def angular_breaks(self):
        if self.M > 64:
            return ()
        return tuple(2.0 * np.pi * (np.arange(self.M) + 0.5) / self.M)


def constellation_from_dict(d):
    """Build a transmit set from a mapping such as ``{"set": "mpsk", "M": 4}``."""
    kind = d.get("set", "full")
    if kind == "full":
        return FullComplex()
    if kind == "disk":
        return Disk(float(d["P"]))
    if kind == "circle":
        return Circle(float(d.get("P", 1.0)))
    if kind == "mpsk":
        return Mpsk(int(d["M"]), float(d.get("p", 1.0)))
    raise ValueError(f"unknown transmit set {kind!r}")


def constellation_to_dict(c):
    if isinstance(c, FullComplex):
        return {"set": "full"}
    if isinstance(c, Disk):
        return {"set": "disk", "P": c.P}
    if isinstance(c, Circle):
        return {"set": "circle", "P": c.P}
    if isinstance(c, Mpsk):
        return {"set": "mpsk", "M": c.M, "p": c.p}
    raise TypeError(f"not a transmit set: {c!r}")
