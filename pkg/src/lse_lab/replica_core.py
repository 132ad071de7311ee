"""Replica-symmetric (RS) analysis of least-square-error precoding.

For the precoder ``v = argmin_{x in X^N} ||H x - sqrt(gamma) u||^2 + lam ||x||^2``
the RS ansatz reduces the large-system distortion to two scalars ``(q, chi)``
solving

    e   = R(-chi) + lam
    f^2 = (q - chi g) R'(-chi) + g R(-chi),          g = gamma * sigma_u2
    chi = E[Re(conj(z) xhat(z))] / f,   q = E[|xhat(z)|^2],   z ~ CN(0, 1)

with ``xhat(z) = argmin_{x in X} |z - (e/f) x|``, the projection of
``(f/e) z`` onto the transmit set.  The predicted per-user distortion is

    D = g + alpha * d/dchi [ (q - chi g) chi R(-chi) ]        (q held fixed)

which for i.i.d. channels simplifies to ``(q + g) / (1 + chi)^2``.

Closed forms are provided for the unconstrained (RZF), peak-power (disk),
constant-envelope and M-PSK sets under i.i.d. channels.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from .constellations import Circle, Mpsk
from .errors import ConvergenceError, DivergedRSError, DomainError
from .quadrature import complex_gaussian_rule
from .spectra import SpectrumModel

DEFAULT_INITS = ((0.1, 0.1), (1.0, 1.0), (1.0, 10.0))

# chi beyond this is treated as runaway growth of the RS branch
CHI_BLOWUP = 1e7


@dataclass
class RsConfig:
    """System and solver parameters shared by the replica solvers.

    Parameters
    ----------
    spectrum : SpectrumModel
        Eigenvalue law of the channel Gramian (carries ``alpha``).
    gamma : float
        Receive gain applied to the data vector.
    sigma_u2 : float
        Variance of the data symbols.
    lam : float
        Tikhonov regulariser; ignored for constant-modulus sets.
    quad_order : int
        Gauss-Legendre nodes per quadrature panel.
    damping : float
        Initial Picard damping ``omega`` in ``x <- (1-omega) x + omega T(x)``.
    tol : float
        Fixed-point residual tolerance.
    max_iter : int
        Iteration cap per initialisation.
    inits : sequence of (q, chi)
        Starting points of the multi-start search.
    """

    spectrum: SpectrumModel
    gamma: float = 1.0
    sigma_u2: float = 1.0
    lam: float = 0.0
    quad_order: int = 80
    damping: float = 0.5
    tol: float = 1e-9
    max_iter: int = 10000
    inits: tuple = DEFAULT_INITS

    def __post_init__(self):
        if self.quad_order < 8:
            raise ValueError("quad_order must be at least 8")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.gamma < 0 or not self.sigma_u2 > 0:
            raise ValueError("need gamma >= 0 and sigma_u2 > 0")
        if self.lam < 0:
            raise ValueError("lam must be non-negative")
        if not 0 < self.damping <= 1:
            raise ValueError("damping must lie in (0, 1]")

    @property
    def alpha(self):
        return self.spectrum.alpha

    @property
    def gs(self):
        """The product ``gamma * sigma_u2``; the only way the solvers see them."""
        return self.gamma * self.sigma_u2


@dataclass
class RsSolution:
    """Fixed point of the RS equations."""

    q: float
    chi: float
    f: float
    e: float
    distortion: float
    residual: float
    entropy0: float
    iterations: int = 0
    diagnostics: dict = field(default_factory=dict)


def conjugates(q, chi, cfg, lam=None):
    """Conjugate parameters ``(e, f)`` for given ``(q, chi)``.

    Raises
    ------
    DomainError
        If the squared scale ``f^2`` is negative.
    """
    lam = cfg.lam if lam is None else lam
    R = cfg.spectrum.r_transform(-chi)
    Rp = cfg.spectrum.r_transform_derivative(-chi)
    e = R + lam
    f2 = (q - chi * cfg.gs) * Rp + cfg.gs * R
    if f2 < 0:
        raise DomainError(f"f^2 = {f2:.3e} < 0 at q={q:.6g}, chi={chi:.6g}")
    return e, np.sqrt(f2)


def rs_distortion(q, chi, cfg):
    """Predicted per-user distortion at an RS point.

    Evaluates ``g + alpha * d/dchi[(q - chi g) chi R(-chi)]`` with ``q`` fixed.
    The derivative is analytic for i.i.d. channels and a central difference
    otherwise.
    """
    if chi < 0:
        raise ValueError("chi must be non-negative")
    sp = cfg.spectrum
    g = cfg.gs
    if np.isinf(chi):
        return 0.0
    if sp.is_iid:
        deriv = ((q - 2 * g * chi) * sp.r_transform(-chi)
                 - (q - g * chi) * chi * sp.r_transform_derivative(-chi))
    else:
        phi = lambda c: (q - c * g) * c * sp.r_transform(-c)
        h = 1e-6 * max(1.0, chi)
        if chi >= h:
            deriv = (phi(chi + h) - phi(chi - h)) / (2 * h)
        else:
            deriv = (-3 * phi(chi) + 4 * phi(chi + h) - phi(chi + 2 * h)) / (2 * h)
    return g + sp.alpha * deriv


def zero_temperature_entropy(zeta, spectrum):
    """Zero-temperature entropy ``zeta R(-zeta) - int_0^zeta R(-w) dw``.

    Zero when the replica ansatz is exact and negative otherwise.  ``spectrum``
    may be a :class:`SpectrumModel` or anything with a ``spectrum`` attribute
    (such as :class:`RsConfig`).
    """
    sp = getattr(spectrum, "spectrum", spectrum)
    if zeta < 0:
        raise ValueError("zeta must be non-negative")
    if np.isinf(zeta):
        return -np.inf
    if sp.is_iid:
        return (zeta / (1.0 + zeta) - np.log1p(zeta)) / sp.alpha
    return zeta * sp.r_transform(-zeta) - sp.r_integral(0.0, zeta)


# --------------------------------------------------------------------------
# closed forms (i.i.d. channels)

def _psk_factor(M):
    # 2 / (M sin(pi/M)); tends to 2/pi as M grows
    return 2.0 / (M * np.sin(np.pi / M))


def alpha_star_mpsk(M, p, gs):
    """Load beyond which the M-PSK RS solution has no finite ``chi``."""
    return np.pi * (p + gs) / p * _psk_factor(M) ** 2


def alpha_star_constant_envelope(p, gs):
    """Load beyond which the constant-envelope RS solution has no finite ``chi``."""
    return 4.0 * (p + gs) / (np.pi * p)


def rs_chi_mpsk(M, p, gs, alpha):
    """RS ``chi`` for M-PSK with symbol power ``p`` under i.i.d. channels.

    Raises
    ------
    DivergedRSError
        When ``alpha >= alpha*`` (the bracket is not positive).
    """
    bracket = _psk_factor(M) * np.sqrt(np.pi * (p + gs) / (p * alpha)) - 1.0
    if not bracket > 0:
        a_star = alpha_star_mpsk(M, p, gs)
        raise DivergedRSError(f"RS branch divergent, alpha* = {a_star:.4f}", a_star)
    return 1.0 / bracket


def rs_chi_constant_envelope(p, gs, alpha):
    """RS ``chi`` for the constant-envelope set ``|x|^2 = p`` under i.i.d. channels."""
    bracket = 2.0 * np.sqrt((p + gs) / (np.pi * p * alpha)) - 1.0
    if not bracket > 0:
        a_star = alpha_star_constant_envelope(p, gs)
        raise DivergedRSError(f"RS branch divergent, alpha* = {a_star:.4f}", a_star)
    return 1.0 / bracket


def _require_iid(cfg):
    if not cfg.spectrum.is_iid:
        raise ValueError("closed-form RS solutions assume an i.i.d. channel spectrum")


def _finish(q, chi, cfg, residual, iterations=0, diagnostics=None, lam=None):
    e, f = conjugates(q, chi, cfg, lam=lam)
    return RsSolution(q=q, chi=chi, f=f, e=e,
                      distortion=rs_distortion(q, chi, cfg),
                      residual=residual,
                      entropy0=zero_temperature_entropy(chi, cfg.spectrum),
                      iterations=iterations,
                      diagnostics=diagnostics or {})


def solve_rs_rzf(cfg):
    """RS point of the unconstrained (RZF) precoder in closed form.

    With ``t = 1 + chi`` the susceptibility solves
    ``alpha lam t^2 + (1 - alpha - alpha lam) t - 1 = 0`` and
    ``q = g chi^2 / (alpha t^2 - chi^2)``.  At ``lam = 0`` and ``alpha > 1`` the
    precoder is zero forcing: ``chi`` is infinite, ``q = g / (alpha - 1)`` and
    the distortion vanishes.
    """
    _require_iid(cfg)
    a, lam, g = cfg.alpha, cfg.lam, cfg.gs
    A = a * lam
    B = 1.0 - a - A
    if A == 0:
        if a >= 1:
            q = g / (a - 1.0) if a > 1 else np.inf
            return RsSolution(q=q, chi=np.inf, f=0.0, e=0.0, distortion=0.0,
                              residual=0.0, entropy0=-np.inf,
                              diagnostics={"zero_forcing": True})
        t = -1.0 / B
    else:
        t = (-B + np.sqrt(B * B + 4 * A)) / (2 * A)
    chi = t - 1.0
    q = g * chi ** 2 / (a * t ** 2 - chi ** 2)
    return _finish(q, chi, cfg, 0.0)


def solve_rs_mpsk(M, p, cfg):
    """RS point of M-PSK from the closed-form ``chi`` (``q = p``)."""
    _require_iid(cfg)
    chi = rs_chi_mpsk(M, p, cfg.gs, cfg.alpha)
    return _finish(p, chi, cfg, 0.0, lam=0.0)


def solve_rs_constant_envelope(p, cfg):
    """RS point of the constant-envelope set from the closed-form ``chi``."""
    _require_iid(cfg)
    chi = rs_chi_constant_envelope(p, cfg.gs, cfg.alpha)
    return _finish(p, chi, cfg, 0.0, lam=0.0)


# --------------------------------------------------------------------------
# damped Picard iteration

class _Runaway(Exception):
    pass


def _scaled_residual(Tx, x):
    # absolute for order-one values, relative for large ones
    return float(np.max(np.abs(Tx - x) / np.maximum(1.0, np.abs(x))))


def _picard(T, x0, damping, tol, max_iter):
    """Damped fixed-point iteration with step halving when the residual grows.

    Returns ``(x, residual, iterations, converged)``.
    """
    x = np.asarray(x0, dtype=float)
    omega = damping
    prev = np.inf
    res = np.inf
    for it in range(1, max_iter + 1):
        Tx = T(x)
        res = _scaled_residual(Tx, x)
        if res < tol:
            return Tx, res, it, True
        if res > prev:
            omega = max(0.5 * omega, 0.05)
        prev = res
        x = (1.0 - omega) * x + omega * Tx
    return x, res, max_iter, False


def _multistart(T, cfg, finish, runaway_error):
    """Run the Picard map from every initialisation and keep the best point.

    Each start retries with quartered damping when ``f^2`` turns negative.
    The lowest-distortion converged point wins, ties going to smaller ``chi``.
    """
    trace = []
    found = []
    runaways = 0
    for init in cfg.inits:
        omega = cfg.damping
        for attempt in range(3):
            try:
                x, res, its, ok = _picard(T, init, omega, cfg.tol, cfg.max_iter)
            except DomainError as exc:
                trace.append({"init": init, "damping": omega, "error": str(exc)})
                omega *= 0.25
                continue
            except _Runaway:
                trace.append({"init": init, "damping": omega, "error": "chi runaway"})
                runaways += 1
                break
            trace.append({"init": init, "damping": omega, "residual": res,
                          "iterations": its, "converged": ok})
            if ok:
                found.append(finish(x, res, its, init))
            break
    if not found:
        if runaways == len(cfg.inits) and runaway_error is not None:
            raise runaway_error
        raise ConvergenceError("RS iteration did not converge from any initialisation",
                               {"starts": trace})
    found.sort(key=lambda s: (round(s.distortion, 12), s.chi))
    best = found[0]
    best.diagnostics["starts"] = trace
    return best


def _runaway_error(constellation, cfg):
    if not cfg.spectrum.is_iid:
        return DivergedRSError("RS branch divergent (chi grows without bound)")
    if isinstance(constellation, Mpsk):
        a = alpha_star_mpsk(constellation.M, constellation.p, cfg.gs)
    elif isinstance(constellation, Circle):
        a = alpha_star_constant_envelope(constellation.P, cfg.gs)
    else:
        return DivergedRSError("RS branch divergent (chi grows without bound)")
    return DivergedRSError(f"RS branch divergent, alpha* = {a:.4f}", a)


def solve_rs_generic(constellation, cfg):
    """Solve the RS equations for any transmit set by quadrature.

    Expectations over ``z ~ CN(0, 1)`` use the polar rule of
    :func:`lse_lab.quadrature.complex_gaussian_rule` with panels aligned to
    the kinks of the projection.  Several initialisations are iterated and
    the converged point of smallest distortion is returned.

    Parameters
    ----------
    constellation : FullComplex, Disk, Circle or Mpsk
        Per-antenna transmit set.
    cfg : RsConfig
        System and solver parameters.

    Returns
    -------
    RsSolution

    Raises
    ------
    DivergedRSError
        If every start shows ``chi`` growing without bound.
    ConvergenceError
        If no start converges.
    """
    lam = 0.0 if constellation.constant_modulus else cfg.lam
    ang = constellation.angular_breaks()
    if constellation.constant_modulus:
        # projection onto a constant-modulus set ignores the scale of its
        # argument, so both moments are fixed numbers
        z, w = complex_gaussian_rule(cfg.quad_order, (), ang)
        xh = constellation.project(z)
        fixed = (np.dot(w, (np.conj(z) * xh).real), np.dot(w, np.abs(xh) ** 2))

    def T(x):
        q, chi = x
        q = max(q, 0.0)
        chi = max(chi, 0.0)
        e, f = conjugates(q, chi, cfg, lam=lam)
        if f == 0:
            raise DomainError("f vanished")
        if constellation.constant_modulus:
            corr, q_new = fixed
        else:
            c = f / e
            z, w = complex_gaussian_rule(cfg.quad_order, constellation.radial_breaks(c), ang)
            xh = constellation.project(c * z)
            corr = np.dot(w, (np.conj(z) * xh).real)
            q_new = np.dot(w, np.abs(xh) ** 2)
        chi_new = corr / f
        if chi_new > CHI_BLOWUP:
            raise _Runaway()
        return np.array([q_new, chi_new])

    def finish(x, res, its, init):
        q, chi = float(x[0]), float(x[1])
        sol = _finish(q, chi, cfg, res, its, {"init": init}, lam=lam)
        sol.diagnostics["c"] = sol.f / sol.e
        return sol

    return _multistart(T, cfg, finish, _runaway_error(constellation, cfg))


def _gauss_tail(x):
    return special.ndtr(-x)


def _peak_scalars(q, chi, P, a, lam, g):
    c = math.sqrt(a * (q + g)) / (a * lam * (1.0 + chi) + 1.0)
    one_m = -math.expm1(-P / (c * c))
    h = c * one_m + math.sqrt(math.pi * P) * float(_gauss_tail(math.sqrt(2.0 * P) / c))
    return c, one_m, h


def solve_rs_peak(P, cfg, method="picard", x0=None):
    """RS point for the peak-power (disk) set ``|x|^2 <= P`` in closed form.

    Solves

        c   = sqrt(alpha (q + g)) / (alpha lam (1 + chi) + 1)
        q   = c^2 (1 - exp(-P / c^2))
        h   = c (1 - exp(-P / c^2)) + sqrt(pi P) Q(sqrt(2 P) / c)
        chi = h (1 + chi) sqrt(alpha / (q + g))

    where ``Q`` is the standard normal tail.  ``(c, h)`` are stored in the
    diagnostics and the distortion is ``(q + g) / (1 + chi)^2``.

    Parameters
    ----------
    P : float
        Peak power.
    cfg : RsConfig
    method : {"picard", "newton"}
        ``"picard"`` runs the damped multi-start iteration.  ``"newton"``
        applies a hybrid Powell root finder to the equations in logarithmic
        variables, starting from ``x0`` (or the configured starts), and falls
        back to Picard when it fails.  It is much faster when ``chi`` is large
        (small ``lam``), where Picard contracts slowly.
    x0 : (q, chi), optional
        Starting point for ``method="newton"``.
    """
    _require_iid(cfg)
    if not P > 0:
        raise ValueError("peak power must be positive")
    a, lam, g = cfg.alpha, cfg.lam, cfg.gs

    def T(x):
        q, chi = max(x[0], 0.0), max(x[1], 0.0)
        c, one_m, h = _peak_scalars(q, chi, P, a, lam, g)
        q_new = c * c * one_m
        chi_new = h * (1.0 + chi) * math.sqrt(a / (q + g))
        if chi_new > CHI_BLOWUP:
            raise _Runaway()
        return np.array([q_new, chi_new])

    def finish(x, res, its, init):
        q, chi = float(x[0]), float(x[1])
        c, _, h = _peak_scalars(q, chi, P, a, lam, g)
        return _finish(q, chi, cfg, res, its, {"init": init, "c": c, "h": h})

    if method == "newton":
        def F(y):
            q, chi = math.exp(y[0]), math.exp(y[1])
            c, one_m, h = _peak_scalars(q, chi, P, a, lam, g)
            return [math.log(c * c * one_m / q),
                    math.log(h * (1.0 + chi) * math.sqrt(a / (q + g)) / chi)]

        starts = ([tuple(x0)] if x0 is not None else []) + list(cfg.inits)
        for st in starts:
            try:
                with np.errstate(all="ignore"):
                    sol = optimize.root(F, np.log(np.maximum(st, 1e-300)), method="hybr",
                                        options={"xtol": 1e-14})
            except (ValueError, OverflowError, ZeroDivisionError):
                continue
            if not np.all(np.isfinite(sol.x)):
                continue
            x = np.exp(sol.x)
            try:
                res = _scaled_residual(T(x), x)
            except _Runaway:
                continue
            if res < cfg.tol:
                return finish(x, res, int(sol.nfev), st)
    elif method != "picard":
        raise ValueError("method must be 'picard' or 'newton'")

    err = DivergedRSError("RS branch divergent (chi grows without bound)")
    return _multistart(T, cfg, finish, err)
