"""Asymptotic eigenvalue models for the channel Gramian ``R = H^H H``.

Every model exposes the R-transform ``R(x)`` of the limiting eigenvalue
distribution of the ``N x N`` Gramian together with its derivative and
integral.  The replica solvers only ever evaluate ``R`` at non-positive
arguments ``x = -w`` with ``w >= 0``.

Two models are provided:

* :class:`MarchenkoPasturIid` for i.i.d. channels with entry variance ``1/N``
  (closed form).
* :class:`PathLossNumeric` for channels ``H = sqrt(D) H_iid`` where the
  diagonal of ``D`` collects per-user path losses.  Its R-transform is
  obtained by numerically inverting the Stieltjes transform.
"""

from abc import ABC, abstractmethod

import numpy as np
from scipy import integrate, interpolate, optimize

from .errors import BracketError, ConvergenceError, DomainError


def mp_r_transform(x, alpha):
    """R-transform of the i.i.d. Gramian, ``R(x) = 1 / (alpha (1 - x))``.

    Parameters
    ----------
    x : float or array_like
        Argument, must satisfy ``x < 1``.
    alpha : float
        Load ratio ``N / K``.
    """
    x = np.asarray(x, dtype=float)
    if np.any(x >= 1.0):
        raise DomainError("R-transform of the i.i.d. Gramian has a pole at x = 1")
    out = 1.0 / (alpha * (1.0 - x))
    return out if out.ndim else float(out)


def mp_r_transform_derivative(x, alpha):
    """Derivative ``R'(x) = 1 / (alpha (1 - x)^2)`` of :func:`mp_r_transform`."""
    x = np.asarray(x, dtype=float)
    if np.any(x >= 1.0):
        raise DomainError("R-transform of the i.i.d. Gramian has a pole at x = 1")
    out = 1.0 / (alpha * (1.0 - x) ** 2)
    return out if out.ndim else float(out)


class SpectrumModel(ABC):
    """Limiting eigenvalue law of the ``N x N`` Gramian at load ``alpha = N/K``."""

    alpha: float

    @abstractmethod
    def r_transform(self, x):
        """R-transform evaluated at ``x`` (``x <= 0`` is always supported)."""

    @abstractmethod
    def r_transform_derivative(self, x):
        """First derivative of the R-transform."""

    def r_integral(self, a, b):
        """``int_a^b R(-w) dw`` for ``0 <= a, b``."""
        val, _ = integrate.quad(lambda w: self.r_transform(-w), a, b,
                                epsabs=1e-13, epsrel=1e-12, limit=200)
        return val

    @property
    @abstractmethod
    def mean_eigenvalue(self):
        """Mean of the limiting eigenvalue law, equal to ``R(0)``."""

    @property
    def is_iid(self):
        return False


class MarchenkoPasturIid(SpectrumModel):
    """i.i.d. Gaussian channel with entry variance ``1/N``.

    Parameters
    ----------
    alpha : float
        Load ratio ``N / K``, strictly positive.
    """

    def __init__(self, alpha):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)

    def __repr__(self):
        return f"MarchenkoPasturIid(alpha={self.alpha!r})"

    def r_transform(self, x):
        return mp_r_transform(x, self.alpha)

    def r_transform_derivative(self, x):
        return mp_r_transform_derivative(x, self.alpha)

    def r_integral(self, a, b):
        return (np.log1p(b) - np.log1p(a)) / self.alpha

    @property
    def mean_eigenvalue(self):
        return 1.0 / self.alpha

    @property
    def is_iid(self):
        return True


def path_loss_rule(nu, kappa_dist, order=64):
    """Quadrature rule for the user path-loss distribution.

    Users are uniform in an annulus with radii ``r_min`` and
    ``kappa_dist * r_min``; the normalised path loss of a user at distance
    ``r`` is ``(r / r_min)^(-nu)``.  The rule integrates over the normalised
    radius ``rho`` in ``[1, kappa_dist]`` whose density is
    ``2 rho / (kappa_dist^2 - 1)``, which avoids the integrable endpoint
    behaviour of the path-loss density itself.

    Returns
    -------
    d, w : ndarray
        Path-loss nodes in ``[kappa_dist^-nu, 1]`` and weights summing to one.
    """
    if not nu > 0:
        raise ValueError("path-loss exponent must be positive")
    if kappa_dist < 1:
        raise ValueError("kappa_dist must be >= 1")
    if kappa_dist == 1:
        # degenerate annulus: every user sits at r_min
        return np.ones(1), np.ones(1)
    x, w = np.polynomial.legendre.leggauss(order)
    rho = 1.0 + 0.5 * (x + 1.0) * (kappa_dist - 1.0)
    wr = 0.5 * (kappa_dist - 1.0) * w * 2.0 * rho / (kappa_dist ** 2 - 1.0)
    return rho ** (-nu), wr


def _positive_root(F, upper):
    """Unique positive root of a function that is +inf at 0+ and negative at ``upper``."""
    lo = upper
    while F(lo) <= 0:
        lo *= 0.5
        if lo < 1e-300:
            raise BracketError("no positive root below the starting point", (0.0, upper))
    return optimize.brentq(F, lo, upper, xtol=1e-300, rtol=1e-15, maxiter=500)


def pathloss_stieltjes(s, alpha, d, w, tol=1e-10):
    """Stieltjes transform of the ``K x K`` matrix ``H H^H`` at real ``s < 0``.

    Solves the scalar recursion ``1/G + s = alpha * E[d / (alpha + d G)]``,
    where the expectation runs over the path-loss law given by the
    quadrature rule ``(d, w)``.  For unit path loss this is the
    Marchenko-Pastur relation of the ``K x K`` Wishart matrix.

    Parameters
    ----------
    s : float
        Evaluation point, strictly negative.
    alpha : float
        Load ratio ``N / K``.
    d, w : ndarray
        Path-loss quadrature nodes and weights (see :func:`path_loss_rule`).
    tol : float
        Maximum accepted residual of the recursion.

    Returns
    -------
    float
        ``G(s) = E[(lambda - s)^-1]`` over the eigenvalues of ``H H^H``.
    """
    if not s < 0:
        raise DomainError("Stieltjes transform is evaluated on the negative axis only")

    def F(G):
        return 1.0 / G + s - alpha * np.dot(w, d / (alpha + d * G))

    # F > 0 near zero and F < 0 for G >= 1/|s| since the right-hand side is positive
    G = _positive_root(F, 1.0 / abs(s))
    resid = abs(F(G)) * G
    if resid > tol:
        raise ConvergenceError("Stieltjes recursion did not reach its tolerance",
                               {"s": s, "G": G, "residual": resid})
    return G


def gramian_stieltjes_recursion(s, alpha, d, w, tol=1e-10):
    """Stieltjes transform of the ``N x N`` Gramian ``H^H H`` at real ``s < 0``.

    Solves ``1/G + s = E[d / (1 + d G)] / alpha``, the fixed point for a sum of
    ``K`` independent rank-one terms ``d_k h_k h_k^H`` with ``h_k`` of
    variance ``1/N``.
    """
    if not s < 0:
        raise DomainError("Stieltjes transform is evaluated on the negative axis only")

    def F(G):
        return 1.0 / G + s - np.dot(w, d / (1.0 + d * G)) / alpha

    G = _positive_root(F, 1.0 / abs(s))
    resid = abs(F(G)) * G
    if resid > tol:
        raise ConvergenceError("Stieltjes recursion did not reach its tolerance",
                               {"s": s, "G": G, "residual": resid})
    return G


class PathLossNumeric(SpectrumModel):
    """Channel with i.i.d. fading and distance-dependent path loss.

    The R-transform at ``-w`` is obtained by solving ``G_R(s) = w`` for
    ``s < 0``, where ``G_R`` is the Stieltjes transform of the ``N x N``
    Gramian, and returning ``s + 1/w``.  Values are tabulated on a
    logarithmic grid and interpolated with a monotone cubic; arguments beyond
    the grid are solved directly.

    Parameters
    ----------
    alpha : float
        Load ratio ``N / K``.
    nu : float
        Path-loss exponent.
    kappa_dist : float
        Ratio of outer to inner cell radius, ``>= 1``.
    order : int
        Number of quadrature nodes for the path-loss expectation.
    w_max : float
        Upper end of the tabulated range.
    grid_size : int
        Number of tabulation points.
    w_min : float
        Smallest positive tabulation point; ``w = 0`` uses the mean eigenvalue.
    recursion : {"gramian", "user"}
        ``"gramian"`` solves the ``N x N`` recursion of
        :func:`gramian_stieltjes_recursion` directly.  ``"user"`` solves the
        ``K x K`` recursion of :func:`pathloss_stieltjes` and converts it to
        the ``N x N`` Gramian.  Both agree for unit path loss; for spread path
        losses only the ``"gramian"`` route matches simulated spectra.
    """

    def __init__(self, alpha, nu=3.0, kappa_dist=1.0, order=64, w_max=50.0,
                 grid_size=1600, w_min=1e-4, recursion="gramian"):
        if not alpha > 0:
            raise ValueError("alpha must be positive")
        self.alpha = float(alpha)
        self.nu = float(nu)
        self.kappa_dist = float(kappa_dist)
        self._d, self._w = path_loss_rule(self.nu, self.kappa_dist, order)
        self.w_max = float(w_max)
        self.w_min = float(w_min)
        self.grid_size = int(grid_size)
        if recursion not in ("gramian", "user"):
            raise ValueError("recursion must be 'gramian' or 'user'")
        self.recursion = recursion
        self._interp = None

    def __repr__(self):
        return (f"PathLossNumeric(alpha={self.alpha!r}, nu={self.nu!r}, "
                f"kappa_dist={self.kappa_dist!r})")

    @property
    def mean_eigenvalue(self):
        # tr(R)/N = (K/N) * mean path loss
        return float(np.dot(self._w, self._d)) / self.alpha

    def stieltjes(self, s):
        """Stieltjes transform of the ``K x K`` matrix ``H H^H``."""
        return pathloss_stieltjes(s, self.alpha, self._d, self._w)

    def gramian_stieltjes(self, s):
        """Stieltjes transform of the ``N x N`` Gramian ``H^H H``."""
        if self.recursion == "gramian":
            return gramian_stieltjes_recursion(s, self.alpha, self._d, self._w)
        # the two Gramians share their non-zero eigenvalues; the N x N one
        # carries N - K extra zeros
        return self.stieltjes(s) / self.alpha - (1.0 - 1.0 / self.alpha) / s

    def r_direct(self, w):
        """R-transform at ``-w`` by direct inversion (no interpolation)."""
        if w < 0:
            raise DomainError("numeric R-transform is only available for x <= 0")
        if w == 0:
            return self.mean_eigenvalue
        # G_R increases from 0 (s -> -inf) to +inf (s -> 0-) when alpha >= 1.
        # For alpha < 1 the Gramian has no zero eigenvalues, so G_R stays
        # bounded on s < 0 and large w have no root there.
        hi = -1e-9
        lo = -1.0 / w - 2.0 * self.mean_eigenvalue - 1.0
        f = lambda s: self.gramian_stieltjes(s) - w
        flo = f(lo)
        tries = 0
        while flo > 0:
            lo *= 4.0
            flo = f(lo)
            tries += 1
            if tries > 60:
                raise BracketError("could not bracket G_R(s) = w from below",
                                   (lo, hi), [(lo, flo)])
        fhi = f(hi)
        if fhi < 0:
            # target exceeds the transform's range on s < 0
            raise BracketError("G_R(s) = w has no root on the negative axis",
                               (lo, hi), [(lo, flo), (hi, fhi)])
        s = optimize.brentq(f, lo, hi, xtol=1e-300, rtol=1e-15, maxiter=500)
        return s + 1.0 / w

    def r_direct_derivative(self, w):
        """Derivative of ``w -> R(-w)`` by finite differences of :meth:`r_direct`."""
        # R = s + 1/w is known to about 1e-15 / w in absolute terms, so small
        # arguments use a fourth-order forward difference with a fixed step and
        # larger ones a central difference whose step balances round-off
        # against truncation
        if w < 0.05:
            h = 5e-3
            f = [self.r_direct(w + k * h) for k in range(5)]
            return (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * h)
        h = w * min(1e-3, (1e-15 / w ** 2) ** (1.0 / 3.0))
        return (self.r_direct(w + h) - self.r_direct(w - h)) / (2.0 * h)

    def _build(self):
        ws = np.concatenate([[0.0], np.geomspace(self.w_min, self.w_max, self.grid_size)])
        vals, slopes = [], []
        for w in ws:
            try:
                vals.append(self.r_direct(w))
                slopes.append(self.r_direct_derivative(w))
            except BracketError:
                # alpha < 1: the branch on s < 0 ends below w_max
                vals = vals[:len(slopes)]
                break
        ws = ws[:len(vals)]
        self.w_max = float(ws[-1])
        # Hermite interpolation with slopes taken from the direct solver
        self._interp = interpolate.CubicHermiteSpline(ws, vals, slopes, extrapolate=False)
        self._dinterp = self._interp.derivative()

    def _r_of_w(self, w):
        w = np.asarray(w, dtype=float)
        if np.any(w < 0):
            raise DomainError("numeric R-transform is only available for x <= 0")
        if self._interp is None:
            self._build()
        flat = np.atleast_1d(w).ravel()
        out = np.empty_like(flat)
        inside = flat <= self.w_max
        out[inside] = self._interp(flat[inside])
        for i in np.flatnonzero(~inside):
            out[i] = self.r_direct(flat[i])
        out = out.reshape(w.shape)
        return out if out.ndim else float(out)

    def r_transform(self, x):
        return self._r_of_w(-np.asarray(x, dtype=float))

    def r_transform_derivative(self, x):
        w = -np.asarray(x, dtype=float)
        if np.any(w < 0):
            raise DomainError("numeric R-transform is only available for x <= 0")
        if self._interp is None:
            self._build()
        flat = np.atleast_1d(w).ravel()
        out = np.empty_like(flat)
        for i, wi in enumerate(flat):
            if wi <= self.w_max:
                out[i] = -self._dinterp(wi)
            else:
                h = 1e-5 * wi
                out[i] = -(self.r_direct(wi + h) - self.r_direct(wi - h)) / (2 * h)
        out = out.reshape(w.shape)
        return out if out.ndim else float(out)

    def r_integral(self, a, b):
        if self._interp is None:
            self._build()
        if max(a, b) <= self.w_max:
            return float(self._interp.integrate(a, b))
        return super().r_integral(a, b)
