"""One-step replica symmetry breaking (1-RSB) for constant-modulus sets.

The 1-RSB ansatz describes the precoder with four scalars
``(q1, p1, chi1, mu1)``.  With ``eta = chi1 + mu1 p1`` and ``g = gamma sigma_u2``
the conjugate parameters are

    e1   = R(-chi1) + lam
    f1^2 = g R(-eta) + (q1 - g eta) R'(-eta)
    g1^2 = [R(-chi1) - R(-eta)] / mu1

and for ``y, z ~ CN(0, 1)`` define

    Y(y, z) = exp(-mu1 min_x [e1 |x|^2 - 2 Re{x conj(f1 z + g1 y)}])

with the tilted measure ``Ytilde = Y / int Y Dy``.  The scalars solve

    eta          = E_z E_Ytilde[Re{conj(z) xhat}] / f1
    eta + mu1 q1 = E_z E_Ytilde[Re{conj(y) xhat}] / g1
    q1 + p1      = E_z E_Ytilde[|xhat|^2]
    int_chi1^eta R(-w) dw = Psi + (mu1 q1 + 2 eta - 2 mu1 eta g) R(-eta)
                            - 2 chi1 R(-chi1) - 2 mu1 eta (q1 - g eta) R'(-eta)
                            + lam mu1 (q1 + p1)

where ``Psi = E_z log E_y Y`` and ``xhat`` is the minimiser inside ``Y``.  The
last equation is stationarity of the 1-RSB free energy in ``mu1``.

For constant-modulus sets ``q1 + p1`` equals the symbol power, so the third
equation fixes ``q1`` given ``p1`` and three unknowns ``(p1, chi1, mu1)``
remain.  BPSK and QPSK factorise over real dimensions, which turns the
four-dimensional Gaussian integrals into one-dimensional ones with a
closed-form inner integral.  Other alphabets use piecewise Gauss-Legendre
rules in polar coordinates, with panels graded towards the decision
boundaries where the minimiser jumps.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import optimize
from scipy.special import log_ndtr, logsumexp

from .constellations import Circle, Mpsk
from .errors import ConvergenceError, DomainError
from .quadrature import gauss_legendre
from .replica_core import RsConfig, zero_temperature_entropy
from .spectra import MarchenkoPasturIid


@dataclass
class RsbSolution:
    """Fixed point of the 1-RSB equations."""

    q1: float
    p1: float
    chi1: float
    mu1: float
    eta1: float
    e1: float
    f1: float
    g1: float
    distortion: float
    entropy0: float
    residual: float
    diagnostics: dict = field(default_factory=dict)


def rsb_conjugates(q1, p1, chi1, mu1, cfg, lam=0.0):
    """Conjugate parameters ``(eta, e1, f1, g1)``.

    Raises
    ------
    DomainError
        If ``f1^2`` or ``g1^2`` is negative.
    """
    sp = cfg.spectrum
    g = cfg.gs
    eta = chi1 + mu1 * p1
    R_chi = sp.r_transform(-chi1)
    R_eta = sp.r_transform(-eta)
    e1 = R_chi + lam
    f2 = g * R_eta + (q1 - g * eta) * sp.r_transform_derivative(-eta)
    g2 = (R_chi - R_eta) / mu1
    if f2 < 0 or g2 < 0:
        raise DomainError(f"negative squared scale (f1^2={f2:.3e}, g1^2={g2:.3e}) at "
                          f"q1={q1:.6g}, p1={p1:.6g}, chi1={chi1:.6g}, mu1={mu1:.6g}")
    return eta, e1, np.sqrt(f2), np.sqrt(g2)


def rsb_distortion(sol, cfg):
    """1-RSB distortion

        g - (alpha chi1 / mu1) R(-chi1) + alpha [q1 + eta/mu1 - 2 g eta] R(-eta)
          - alpha eta (q1 - g eta) R'(-eta)
    """
    return _rsb_distortion(sol.q1, sol.chi1, sol.mu1, sol.eta1, cfg)


def _rsb_distortion(q1, chi1, mu1, eta, cfg):
    if not mu1 > 0:
        raise ValueError("mu1 must be positive; use the RS solution instead")
    sp, g, a = cfg.spectrum, cfg.gs, cfg.alpha
    return (g - a * chi1 / mu1 * sp.r_transform(-chi1)
            + a * (q1 + eta / mu1 - 2 * g * eta) * sp.r_transform(-eta)
            - a * eta * (q1 - g * eta) * sp.r_transform_derivative(-eta))


# --------------------------------------------------------------------------
# moments of the tilted measure

def _graded_line_rule(width, order, t_max=6.5):
    """Gauss-Legendre panels on ``[-t_max, t_max]`` for ``t ~ N(0, 1/2)``.

    Panel edges are geometrically graded towards ``t = 0`` starting at
    ``width``, the scale of the transition there.
    """
    pos = [0.0]
    e = min(width, t_max / 2.0)
    while e < t_max:
        pos.append(e)
        e *= 3.0
    pos.append(t_max)
    pos = np.array(pos)
    edges = np.concatenate([-pos[:0:-1], pos])
    ts, ws = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        t, w = gauss_legendre(a, b, order)
        ts.append(t)
        ws.append(w * np.exp(-t * t) / np.sqrt(np.pi))
    return np.concatenate(ts), np.concatenate(ws)


def binary_moments(f1, g1, mu1, amplitude, order=32):
    """Moments for a binary alphabet ``{-a, +a}`` on one real dimension.

    With ``t, s ~ N(0, 1/2)`` the real parts of ``z`` and ``y``, the minimiser
    is ``a sign(f1 t + g1 s)`` and ``Y = exp(2 mu1 a |f1 t + g1 s|)`` up to a
    constant.  The inner ``s`` integral has the closed form

        I0(t) = exp(k^2 sg^2 / 2) [exp(k A) Phi((A + k sg^2)/sg) + exp(-k A) Phi((-A + k sg^2)/sg)]

    with ``k = 2 mu1 a``, ``sg = g1 / sqrt(2)`` and ``A = f1 t``.  The tilted sign
    switches over ``|A| ~ 1/k`` around ``t = 0``, so the outer integral uses
    Gauss-Legendre panels graded towards the origin (``order`` nodes each).

    Returns
    -------
    Mz, My, L : float
        ``E_t E_tilted[t xhat]``, ``E_t E_tilted[s xhat]`` and ``E_t log I0`` for
        this real dimension.
    """
    kap = 2.0 * mu1 * amplitude
    sg = g1 / np.sqrt(2.0)
    t, w = _graded_line_rule(min(1.0 / kap, sg) / f1, order)
    A = f1 * t
    l1 = kap * A + log_ndtr((A + kap * sg * sg) / sg)
    l2 = -kap * A + log_ndtr((-A + kap * sg * sg) / sg)
    log_i0 = 0.5 * kap ** 2 * sg ** 2 + np.logaddexp(l1, l2)
    tilt = np.tanh(0.5 * (l1 - l2))
    Mz = amplitude * np.dot(w, t * tilt)
    # Stein's lemma on s: E[s a sign(A + g1 s) e^{k|A + g1 s|}] / I0
    phi = np.exp(-(A / g1) ** 2 - log_i0) / np.sqrt(np.pi)
    My = amplitude * (g1 * kap / 2.0 + np.dot(w, phi))
    L = np.dot(w, log_i0)
    return Mz, My, L


def _angular_rule(constellation, order):
    br = constellation.angular_breaks()
    if len(br) == 0:
        # periodic smooth integrand: the trapezoid rule converges geometrically
        n = 4 * order
        th = 2.0 * np.pi * np.arange(n) / n
        return th, np.full(n, 2.0 * np.pi / n)
    br = np.sort(np.mod(np.asarray(br, dtype=float), 2.0 * np.pi))
    br = np.append(br, br[0] + 2.0 * np.pi)
    ths, wts = [], []
    for a, b in zip(br[:-1], br[1:]):
        t, w = gauss_legendre(a, b, order)
        ths.append(t)
        wts.append(w)
    return np.concatenate(ths), np.concatenate(wts)


_RADIAL_BREAKS = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0, 5.5)
_GRADING = (0.01, 0.03, 0.1, 0.3)


def _outer_rule(constellation, order, r_max=8.0):
    edges = (0.0,) + _RADIAL_BREAKS + (r_max,)
    rs, wr = [], []
    for a, b in zip(edges[:-1], edges[1:]):
        r, w = gauss_legendre(a, b, order)
        rs.append(r)
        wr.append(w * 2.0 * r * np.exp(-r * r))
    r, wr = np.concatenate(rs), np.concatenate(wr)
    if len(constellation.angular_breaks()) == 0:
        return r.astype(complex), wr
    # M-PSK moments are invariant under z -> conj(z) and z -> z exp(2 pi j / M), so the
    # half sector [0, pi/M] carries the whole expectation; its edge pi/M is a boundary ray
    top = np.pi / constellation.M
    cuts = sorted({0.0, top} | {top - d for d in _GRADING if d < top})
    ths, wts = [], []
    for a, b in zip(cuts[:-1], cuts[1:]):
        t, w = gauss_legendre(a, b, order)
        ths.append(t)
        wts.append(w / top)
    th, wt = np.concatenate(ths), np.concatenate(wts)
    z = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
    return z, (wr[:, None] * wt[None, :]).ravel()


def generic_moments(constellation, e1, f1, g1, mu1, order=32, chunk=64):
    """Moments of the tilted measure for any constant-modulus set.

    Given ``z``, the argument ``u = f1 z + g1 y`` is ``CN(f1 z, g1^2)``.  The inner
    expectation is taken over ``u`` in polar coordinates, with angular panels
    at the decision boundaries of the set (where the minimiser jumps) and a
    radial window that contains the tilted Gaussian.  The integrand is
    smooth on every panel, so the rule converges quickly.

    As a function of ``z`` the inner result changes steeply across the
    boundary rays, so the outer rule is polar as well, with angular panels
    graded towards the ray.  Symmetry reduces the angular range: M-PSK
    needs only the half sector ``[0, pi/M]`` and sets without boundaries
    only a radial rule.  The outer rule uses
    ``max(6, order // 4)`` nodes per panel.

    Returns
    -------
    Ez, Ey, Eq, Psi : float
        ``E Re{conj(z) xhat}``, ``E Re{conj(y) xhat}``, ``E |xhat|^2`` under the
        tilted measure and ``E_z log E_y Y``.
    """
    zs, wz = _outer_rule(constellation, max(6, order // 4))
    th, wth = _angular_rule(constellation, order)
    phase = np.exp(1j * th)
    xr, wr = np.polynomial.legendre.leggauss(2 * order)
    amp = np.sqrt(constellation.power)
    # the tilt exp(2 mu1 amp |u|) shifts the Gaussian outwards by at most this
    shift = mu1 * g1 * g1 * amp
    Ez = Ey = Eq = Psi = 0.0
    for start in range(0, zs.size, chunk):
        z = zs[start:start + chunk]
        m = f1 * z
        lo = np.maximum(np.abs(m) - shift - 8.0 * g1, 0.0)
        hi = np.abs(m) + shift + 8.0 * g1
        half = 0.5 * (hi - lo)
        r = lo[:, None] + half[:, None] * (xr[None, :] + 1.0)
        logw_r = np.log(half[:, None] * wr[None, :] * r)
        u = r[:, :, None] * phase[None, None, :]
        xh = constellation.project(u)
        logphi = -np.abs(u - m[:, None, None]) ** 2 / (g1 * g1) - np.log(np.pi * g1 * g1)
        logw = logphi + logw_r[:, :, None] + np.log(wth)[None, None, :]
        logY = -mu1 * (e1 * np.abs(xh) ** 2 - 2.0 * (xh * np.conj(u)).real)
        la = (logw + logY).reshape(z.size, -1)
        lse = logsumexp(la, axis=1)
        wt = np.exp(la - lse[:, None]).reshape(u.shape)
        y = (u - m[:, None, None]) / g1
        wzc = wz[start:start + chunk]
        Ez += np.dot(wzc, np.sum(wt * (np.conj(z)[:, None, None] * xh).real, axis=(1, 2)))
        Ey += np.dot(wzc, np.sum(wt * (np.conj(y) * xh).real, axis=(1, 2)))
        Eq += np.dot(wzc, np.sum(wt * np.abs(xh) ** 2, axis=(1, 2)))
        # log E_y Y: normalise by the Gaussian mass captured in the window
        mass = logsumexp(logw.reshape(z.size, -1), axis=1)
        Psi += np.dot(wzc, lse - mass)
    return Ez, Ey, Eq, Psi


def _path_for(constellation, method):
    if method != "auto":
        return method
    if isinstance(constellation, Mpsk) and constellation.M in (2, 4):
        return "separable"
    return "generic"


def rsb_residuals(p1, chi1, mu1, constellation, cfg, order=32, method="auto"):
    """Residuals of the 1-RSB equations at ``(p1, chi1, mu1)``.

    Returns
    -------
    res : ndarray, shape (3,)
        Residuals of the ``eta`` equation, the ``eta + mu1 q1`` equation and the
        ``mu1`` stationarity equation.
    info : dict
        Conjugates, ``Psi``, distortion and the residual of the alternative
        grouping of the ``mu1`` equation that carries an additional
        ``-2 chi1 mu1 g R(-eta)`` term.
    """
    power = constellation.power
    q1 = power - p1
    eta, e1, f1, g1 = rsb_conjugates(q1, p1, chi1, mu1, cfg, lam=0.0)
    if f1 == 0 or g1 == 0:
        raise DomainError("vanishing scale in the 1-RSB measure")
    path = _path_for(constellation, method)
    if path == "separable":
        if isinstance(constellation, Mpsk) and constellation.M == 2:
            d, amp = 1, np.sqrt(power)
        elif isinstance(constellation, Mpsk) and constellation.M == 4:
            # QPSK rotated by 45 degrees is a pair of independent binary
            # alphabets; the Gaussian measures are rotation invariant
            d, amp = 2, np.sqrt(power / 2.0)
        else:
            raise ValueError("the separable path needs BPSK or QPSK")
        Mz, My, L = binary_moments(f1, g1, mu1, amp, order=order)
        Ez, Ey, Eq = d * Mz, d * My, power
        Psi = -mu1 * e1 * power + d * L
    else:
        Ez, Ey, Eq, Psi = generic_moments(constellation, e1, f1, g1, mu1, order=order)
    sp, g = cfg.spectrum, cfg.gs
    R_eta = sp.r_transform(-eta)
    R_chi = sp.r_transform(-chi1)
    Rp_eta = sp.r_transform_derivative(-eta)
    lhs = sp.r_integral(chi1, eta)
    rhs = (Psi + (mu1 * q1 + 2 * eta - 2 * mu1 * eta * g) * R_eta - 2 * chi1 * R_chi
           - 2 * mu1 * eta * (q1 - g * eta) * Rp_eta)
    res = np.array([eta - Ez / f1, eta + mu1 * q1 - Ey / g1, lhs - rhs])
    info = {"q1": q1, "eta": eta, "e1": e1, "f1": f1, "g1": g1, "Psi": Psi,
            "power_residual": Eq - power,
            "alt_mu_residual": lhs - (rhs - 2 * chi1 * mu1 * g * R_eta),
            "distortion": _rsb_distortion(q1, chi1, mu1, eta, cfg)}
    return res, info


def _to_params(x, power):
    # p1 in (0, power), chi1 > 0, mu1 > 0
    p1 = power / (1.0 + np.exp(-x[0]))
    return p1, np.exp(x[1]), np.exp(x[2])


def _from_params(p1, chi1, mu1, power):
    return np.array([np.log(p1 / (power - p1)), np.log(chi1), np.log(mu1)])


def _root(x0, constellation, cfg, order, method, tol):
    power = constellation.power

    def F(x):
        try:
            res, _ = rsb_residuals(*_to_params(x, power), constellation, cfg, order, method)
        except (DomainError, FloatingPointError, ZeroDivisionError):
            return np.full(3, 1e3)
        return res if np.all(np.isfinite(res)) else np.full(3, 1e3)

    with np.errstate(all="ignore"):
        sol = optimize.root(F, x0, method="hybr", options={"xtol": 1e-13})
    res = F(sol.x)
    return sol.x, float(np.max(np.abs(res)))


def _default_starts(alpha, power, gs):
    # scale-free guesses: mu1 grows roughly linearly with the load and the
    # ratio of symbol power to data power
    s = gs / power
    base = [(0.22, 0.09, 2.9 * alpha * s), (0.2, 0.1, 3.0 * alpha * s),
            (0.3, 0.05, 4.0 * alpha * s), (0.1, 0.5, alpha * s), (0.5, 0.02, 10 * alpha * s)]
    return [(power * a, b, c) for a, b, c in base]


def _nontrivial(p1, chi1, mu1, power):
    return 1e-6 * power < p1 < (1 - 1e-9) * power and mu1 > 1e-3


def solve_rsb1(constellation, cfg, rsb_quad_order=32, init=None, method="auto",
               tol=1e-8, continuation=True):
    """Solve the 1-RSB equations for M-PSK or the constant-envelope circle.

    The three unknowns ``(p1, chi1, mu1)`` are mapped to an unconstrained
    space (logit of ``p1 / power``, logs of ``chi1`` and ``mu1``) and the
    residual vector is driven to zero by a hybrid Powell root finder from
    several starting points.  Only non-trivial branches (``p1 > 0``,
    ``mu1 > 0``) are kept and the one of smallest distortion is returned.
    If no start converges and the channel is i.i.d., the solution is
    continued in the load from ``alpha = 2`` where the default starts are
    reliable.

    Parameters
    ----------
    constellation : Mpsk or Circle
    cfg : RsConfig
        ``cfg.lam`` is ignored (constant-modulus set).
    rsb_quad_order : int
        Quadrature order (per real dimension on the generic path).
    init : (p1, chi1, mu1), optional
        Starting point tried first; when it converges to a non-trivial
        branch the default starts are skipped.
    method : {"auto", "separable", "generic"}
        Integration path; ``"auto"`` uses the separable path for BPSK/QPSK.
    tol : float
        Maximum accepted absolute residual.

    Returns
    -------
    RsbSolution
    """
    if not isinstance(constellation, (Mpsk, Circle)):
        raise ValueError("1-RSB is implemented for M-PSK and the circle only")
    power = constellation.power
    starts = ([tuple(init)] if init is not None else []) + _default_starts(cfg.alpha, power, cfg.gs)
    trace = []
    found = []
    for i, st in enumerate(starts):
        x, r = _root(_from_params(*st, power), constellation, cfg, rsb_quad_order, method, tol)
        p1, chi1, mu1 = _to_params(x, power)
        trace.append({"start": st, "residual": r, "p1": p1, "chi1": chi1, "mu1": mu1})
        if r < tol and _nontrivial(p1, chi1, mu1, power):
            found.append((p1, chi1, mu1, r))
            if i == 0 and init is not None:
                break
    if not found and continuation and cfg.spectrum.is_iid and cfg.alpha != 2.0:
        path = _continue_from_two(constellation, cfg, rsb_quad_order, method, tol)
        if path is not None:
            found.append(path)
            trace.append({"continuation": True, "residual": path[3]})
    if not found:
        raise ConvergenceError("1-RSB equations did not converge to a non-trivial branch",
                               {"starts": trace})
    sols = [_assemble(p1, chi1, mu1, r, constellation, cfg, rsb_quad_order, method)
            for p1, chi1, mu1, r in found]
    sols.sort(key=lambda s: s.distortion)
    best = sols[0]
    best.diagnostics["starts"] = trace
    return best


def _continue_from_two(constellation, cfg, order, method, tol, steps_per_unit=8):
    power = constellation.power

    def cfg_at(a):
        return RsConfig(MarchenkoPasturIid(a), gamma=cfg.gamma, sigma_u2=cfg.sigma_u2)

    c2 = cfg_at(2.0)
    x = None
    for st in _default_starts(2.0, power, cfg.gs):
        xx, r = _root(_from_params(*st, power), constellation, c2, order, method, tol)
        if r < tol and _nontrivial(*_to_params(xx, power), power):
            x = xx
            break
    if x is None:
        return None
    n = max(int(abs(cfg.alpha - 2.0) * steps_per_unit), 1)
    for a in np.linspace(2.0, cfg.alpha, n + 1)[1:]:
        x, r = _root(x, constellation, cfg_at(a), order, method, tol)
        if not r < tol:
            return None
    p1, chi1, mu1 = _to_params(x, power)
    if not _nontrivial(p1, chi1, mu1, power):
        return None
    return p1, chi1, mu1, r


def _assemble(p1, chi1, mu1, r, constellation, cfg, order, method):
    res, info = rsb_residuals(p1, chi1, mu1, constellation, cfg, order, method)
    return RsbSolution(q1=info["q1"], p1=p1, chi1=chi1, mu1=mu1, eta1=info["eta"],
                       e1=info["e1"], f1=info["f1"], g1=info["g1"],
                       distortion=info["distortion"],
                       entropy0=zero_temperature_entropy(chi1, cfg.spectrum),
                       residual=float(np.max(np.abs(res))),
                       diagnostics={"equations": res.tolist(),
                                    "alt_mu_residual": info["alt_mu_residual"],
                                    "power_residual": info["power_residual"],
                                    "path": _path_for(constellation, method)})
