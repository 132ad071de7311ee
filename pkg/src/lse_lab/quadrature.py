"""Quadrature rules for expectations over a standard complex Gaussian.

Expectations of the form ``E[phi(z)]`` with ``z ~ CN(0, 1)`` appear in
every replica equation.  The integrands are projections onto transmit sets,
which are continuous but have kinks (disk boundary, PSK decision borders).
Tensor Gauss-Hermite rules converge only algebraically on such integrands,
so the rule here works in polar coordinates ``z = r exp(j theta)`` and places
Gauss-Legendre panels between the kinks: radially between user supplied
break radii, angularly between user supplied break angles.
"""

import numpy as np

#: radius beyond which the Rayleigh tail mass exp(-r^2) is below 1e-43
R_MAX = 10.0


def gauss_legendre(a, b, n):
    """Gauss-Legendre nodes and weights on ``[a, b]``."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return a + half * (x + 1.0), half * w


def complex_gaussian_rule(order=64, radial_breaks=(), angular_breaks=(), r_max=R_MAX):
    """Nodes and weights for ``E[phi(z)]``, ``z ~ CN(0, 1)``.

    The density of ``z`` in polar form is ``2 r exp(-r^2) dr dtheta / (2 pi)``.

    Parameters
    ----------
    order : int
        Gauss-Legendre nodes per radial and per angular panel.
    radial_breaks : sequence of float
        Radii where the integrand has a kink.  Breaks outside ``(0, r_max)``
        are ignored.
    angular_breaks : sequence of float
        Angles where the integrand has a kink.  With ``m`` breaks the circle is
        split into ``m`` panels (one panel when empty).
    r_max : float
        Radial truncation.

    Returns
    -------
    z : ndarray of complex
        Nodes.
    w : ndarray of float
        Weights, summing to one up to the truncated tail mass.
    """
    edges = [0.0] + sorted(b for b in radial_breaks if 0.0 < b < r_max) + [r_max]
    rs, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r, w = gauss_legendre(a, b, order)
        rs.append(r)
        wr.append(w * 2.0 * r * np.exp(-r * r))
    r = np.concatenate(rs)
    wr = np.concatenate(wr)

    if len(angular_breaks) == 0:
        th, wt = gauss_legendre(0.0, 2.0 * np.pi, order)
    else:
        br = np.sort(np.mod(np.asarray(angular_breaks, dtype=float), 2.0 * np.pi))
        br = np.append(br, br[0] + 2.0 * np.pi)
        ths, wts = [], []
        for a, b in zip(br[:-1], br[1:]):
            t, w = gauss_legendre(a, b, order)
            ths.append(t)
            wts.append(w)
        th = np.concatenate(ths)
        wt = np.concatenate(wts)
    wt = wt / (2.0 * np.pi)

    z = (r[:, None] * np.exp(1j * th[None, :])).ravel()
    w = (wr[:, None] * wt[None, :]).ravel()
    return z, w


def gauss_hermite_real(order):
    """Nodes and weights for ``E[phi(t)]`` with ``t ~ N(0, 1/2)``.

    This is the real or imaginary part of a standard complex Gaussian.
    """
    x, w = np.polynomial.hermite.hermgauss(order)
    return x, w / np.sqrt(np.pi)


def gauss_hermite_complex(order):
    """Tensor Gauss-Hermite rule for ``z ~ CN(0, 1)``.

    Suitable for smooth integrands only.
    """
    x, w = gauss_hermite_real(order)
    z = (x[:, None] + 1j * x[None, :]).ravel()
    ww = (w[:, None] * w[None, :]).ravel()
    return z, ww
