"""Monte Carlo harness, tuning procedures and auxiliary experiments.

* :func:`monte_carlo_distortion` averages the empirical distortion of a
  precoder over random i.i.d. channels and data.
* :func:`tune_rzf` and :func:`tune_constellation` pick ``(lam, gamma)`` to
  maximise the rate lower bound ``log2(gamma sigma_u2 / (sigma_n2 + D))`` under
  an average power target.
* :func:`union_bound_epsilon` gives the distortion floor for M-PSK obtained
  from a union bound over the ``M^N`` candidate vectors.
* :func:`ofdm_equivalence` compares the Gramian spectrum of a
  frequency-selective OFDM channel seen through the DFT with that of a
  single flat i.i.d. channel.
* :func:`power_decay_fit` fits the exponent of the per-antenna power needed
  for a fixed distortion as a function of the load.
* :func:`run_sweep` and friends produce the CSV/JSON outputs of the CLI.
"""

import csv
import json
import math
import os
import platform
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy
from scipy import optimize, stats

from . import __version__
from .constellations import Circle, Disk, FullComplex, Mpsk, constellation_to_dict
from .errors import (BracketError, ConvergenceError, DivergedRSError, DomainError,
                     ExperimentError, LseLabError)
from .precoders import (PrecodingInstance, empirical_distortion, exhaustive_oracle,
                        precode_coordinate_descent, precode_projected_gradient,
                        rzf_precode)
from .replica_core import (RsConfig, solve_rs_constant_envelope, solve_rs_generic,
                           solve_rs_mpsk, solve_rs_peak, solve_rs_rzf)
from .replica_rsb import solve_rsb1
from .spectra import MarchenkoPasturIid

THREADS_ENV = "LSE_LAB_THREADS"


def worker_count():
    """Parallelism cap from ``LSE_LAB_THREADS`` (0 or unset means one per CPU)."""
    raw = os.environ.get(THREADS_ENV, "0").strip() or "0"
    n = int(raw)
    if n < 0:
        raise ValueError(f"{THREADS_ENV} must be >= 0")
    return n if n > 0 else (os.cpu_count() or 1)


def rate_lower_bound(gamma, sigma_u2, sigma_n2, D):
    """Rate lower bound ``log2(gamma sigma_u2 / (sigma_n2 + D))`` in bits per channel use."""
    if not sigma_n2 + D > 0 or not gamma * sigma_u2 > 0:
        raise ValueError("need sigma_n2 + D > 0 and gamma * sigma_u2 > 0")
    return math.log2(gamma * sigma_u2 / (sigma_n2 + D))


# --------------------------------------------------------------------------
# Monte Carlo

SOLVERS = ("auto", "rzf", "pgd", "cd", "exhaustive", "null")


@dataclass
class McConfig:
    """Monte Carlo experiment description.

    ``N = round(alpha K)``.  Channel entries are i.i.d. ``CN(0, 1/N)`` and
    data entries i.i.d. ``CN(0, sigma_u2)``.  Trial ``t`` draws from a Philox
    generator keyed by ``seed + t``.
    """

    K: int
    alpha: float
    trials: int = 50
    seed: int = 0
    constellation: object = FullComplex()
    gamma: float = 1.0
    lam: float = 0.0
    sigma_u2: float = 1.0
    sigma_n2: float = 1.0
    solver: str = "auto"
    restarts: int = 32

    def __post_init__(self):
        if self.K < 1 or self.trials < 1:
            raise ValueError("need K >= 1 and trials >= 1")
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if self.N < 1:
            raise ValueError("round(alpha K) must be at least 1")

    @property
    def N(self):
        return int(round(self.alpha * self.K))


@dataclass
class McResult:
    mean: float
    stderr: float
    trials_used: int
    excluded: int
    samples: np.ndarray = field(repr=False)


def draw_instance(cfg, trial):
    """Channel and data for one trial."""
    rng = np.random.Generator(np.random.Philox(cfg.seed + trial))
    K, N = cfg.K, cfg.N
    H = (rng.standard_normal((K, N)) + 1j * rng.standard_normal((K, N))) / np.sqrt(2.0 * N)
    u = np.sqrt(cfg.sigma_u2 / 2.0) * (rng.standard_normal(K) + 1j * rng.standard_normal(K))
    return H, u


def _resolve_solver(cfg):
    if cfg.solver != "auto":
        return cfg.solver
    c = cfg.constellation
    if isinstance(c, FullComplex):
        return "rzf"
    if isinstance(c, Disk):
        return "pgd"
    return "cd"


def run_trial(cfg, trial):
    """Distortion of one trial; ``None`` if the precoder did not converge."""
    H, u = draw_instance(cfg, trial)
    inst = PrecodingInstance(H, u, cfg.gamma, cfg.lam, cfg.constellation)
    solver = _resolve_solver(cfg)
    if solver == "null":
        v = np.zeros(cfg.N, dtype=complex)
        return empirical_distortion(H, u, v, cfg.gamma)
    if solver == "rzf":
        res = rzf_precode(inst)
    elif solver == "pgd":
        res = precode_projected_gradient(inst)
    elif solver == "cd":
        res = precode_coordinate_descent(inst, restarts=cfg.restarts, seed=cfg.seed + trial)
    else:
        res = exhaustive_oracle(inst)
    if not res.converged:
        return None
    return empirical_distortion(H, u, res.v, cfg.gamma)


def monte_carlo_distortion(cfg, workers=None):
    """Average empirical distortion over ``cfg.trials`` independent trials.

    Trials run in a thread pool (size from ``LSE_LAB_THREADS`` unless
    ``workers`` is given); results are collected by trial index, so the
    output does not depend on scheduling.

    Returns
    -------
    McResult
        ``mean`` and ``stderr`` (sample standard deviation over
        ``sqrt(n)``) of the retained trials.

    Raises
    ------
    ExperimentError
        If more than 10% of the trials did not converge.
    """
    workers = worker_count() if workers is None else workers
    idx = range(cfg.trials)
    if workers > 1 and cfg.trials > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            vals = list(pool.map(lambda t: run_trial(cfg, t), idx))
    else:
        vals = [run_trial(cfg, t) for t in idx]
    kept = np.array([v for v in vals if v is not None])
    excluded = cfg.trials - kept.size
    if excluded > 0.1 * cfg.trials:
        raise ExperimentError(f"{excluded} of {cfg.trials} trials did not converge")
    mean = float(np.mean(kept))
    stderr = float(np.std(kept, ddof=1) / np.sqrt(kept.size)) if kept.size > 1 else 0.0
    return McResult(mean=mean, stderr=stderr, trials_used=int(kept.size),
                    excluded=int(excluded), samples=kept)


# --------------------------------------------------------------------------
# RZF tuning

@dataclass
class RzfTuning:
    s: float
    chi_opt: float
    lambda_opt: float
    gamma: float
    rate_bound: float
    distortion: float


def rzf_rate_at(chi, alpha, q, sigma_n2):
    """Rate bound of RZF at susceptibility ``chi`` with power fixed to ``q``.

    Eliminating ``gamma`` and ``lam`` through the RS equations gives
    ``log2((alpha q (1+chi)^2 - q chi^2) / (sigma_n2 chi^2 + alpha q))``.
    """
    return np.log2((alpha * q * (1 + chi) ** 2 - q * chi ** 2)
                   / (sigma_n2 * chi ** 2 + alpha * q))


def tune_rzf(alpha, q, sigma_n2, sigma_u2=1.0):
    """Closed-form RZF parameters maximising the rate bound at power ``q``.

    With ``s = (alpha - 1) q / sigma_n2 - 1`` the bound is maximised at the
    positive root of ``chi^2 - s chi - alpha q / sigma_n2 = 0``, i.e.
    ``chi = (s + sqrt(s^2 + 4 alpha q / sigma_n2)) / 2``.  The regulariser is
    ``1/chi - 1/(alpha (1 + chi))`` and the gain
    ``gamma = (q / sigma_u2) [alpha (1 + chi)^2 / chi^2 - 1]``.
    """
    if not alpha > 0 or not q > 0 or not sigma_n2 > 0:
        raise ValueError("alpha, q and sigma_n2 must be positive")
    s = (alpha - 1.0) * q / sigma_n2 - 1.0
    c = alpha * q / sigma_n2
    root = np.sqrt(s * s + 4.0 * c)
    # chi written to avoid cancellation when s is large and negative
    chi = (s + root) / 2.0 if s >= 0 else 2.0 * c / (root - s)
    lam = 1.0 / chi - 1.0 / (alpha * (1.0 + chi))
    gamma = q / sigma_u2 * (alpha * (1.0 + chi) ** 2 / chi ** 2 - 1.0)
    return RzfTuning(s=float(s), chi_opt=float(chi), lambda_opt=float(lam),
                     gamma=float(gamma), rate_bound=float(rzf_rate_at(chi, alpha, q, sigma_n2)),
                     distortion=float(alpha * q / chi ** 2))


# --------------------------------------------------------------------------
# generic tuning

@dataclass
class TuningResult:
    lam: float
    gamma: float
    rate_bound: float
    distortion: float
    chi: float
    q: float


class _RsCache:
    """RS solves along a one-parameter path, warm-starting each from the last."""

    def __init__(self, constellation, alpha, gamma, sigma_u2):
        self.constellation = constellation
        self.alpha, self.gamma, self.sigma_u2 = alpha, gamma, sigma_u2
        self.last = None

    def __call__(self, lam):
        sol = _rs_fixed(self.constellation, self.alpha, self.gamma, self.sigma_u2, lam,
                        x0=self.last)
        if np.isfinite(sol.chi):
            self.last = (sol.q, sol.chi)
        return sol


def _rs_fixed(constellation, alpha, gamma, sigma_u2, lam, x0=None):
    """RS solution with the fastest available solver for the set."""
    cfg = RsConfig(MarchenkoPasturIid(alpha), gamma=gamma, sigma_u2=sigma_u2, lam=lam,
                   tol=1e-12)
    if isinstance(constellation, FullComplex):
        return solve_rs_rzf(cfg)
    if isinstance(constellation, Disk):
        return solve_rs_peak(constellation.P, cfg, method="newton", x0=x0)
    if isinstance(constellation, Circle):
        return solve_rs_constant_envelope(constellation.P, cfg)
    if isinstance(constellation, Mpsk):
        return solve_rs_mpsk(constellation.M, constellation.p, cfg)
    return solve_rs_generic(constellation, cfg)


def _lam_for_power(constellation, alpha, gamma, sigma_u2, q_target, tol=1e-12):
    """Regulariser giving RS power ``q_target`` (power decreases with ``lam``)."""
    solve = _RsCache(constellation, alpha, gamma, sigma_u2)

    def q_of(lam):
        return solve(lam).q

    lo = 0.0
    try:
        q_lo = q_of(lo)
    except (DivergedRSError, ConvergenceError, DomainError):
        lo = 1e-12
        while True:
            try:
                q_lo = q_of(lo)
                break
            except (DivergedRSError, ConvergenceError, DomainError):
                lo *= 10.0
                if lo > 1e3:
                    raise BracketError("no regulariser gives a finite RS solution", (0.0, lo))
    if q_lo < q_target:
        raise BracketError(f"power {q_target} unreachable: q({lo:g}) = {q_lo:.6g}",
                           (lo, np.inf), [(lo, q_lo)])
    if q_lo == q_target:
        return lo
    hi = max(lo, 1e-3)
    samples = [(lo, q_lo)]
    while q_of(hi) > q_target:
        samples.append((hi, q_of(hi)))
        lo = hi
        hi *= 4.0
        if hi > 1e12:
            raise BracketError("could not bracket the regulariser", (lo, hi), samples)
    f_lo, f_hi = q_of(lo) - q_target, q_of(hi) - q_target
    if not f_lo > 0 >= f_hi:
        # happens only within rounding of the reachability boundary
        raise BracketError("power target at the edge of the reachable range", (lo, hi),
                           [(lo, f_lo + q_target), (hi, f_hi + q_target)])
    return optimize.brentq(lambda l: q_of(l) - q_target, lo, hi, xtol=tol, rtol=1e-14)


def _gamma_floor(constellation, alpha, q_target, sigma_u2):
    """Smallest gain for which the power target is reachable."""
    if isinstance(constellation, FullComplex):
        return q_target * (alpha - 1.0) / sigma_u2 if alpha > 1 else 0.0
    if isinstance(constellation, Circle):
        return max(np.pi * constellation.P * alpha / 4.0 - constellation.P, 0.0) / sigma_u2
    if isinstance(constellation, Mpsk):
        F = 2.0 / (constellation.M * np.sin(np.pi / constellation.M))
        p = constellation.p
        return max(p * alpha / (np.pi * F * F) - p, 0.0) / sigma_u2
    # disk: bisect on reachability
    def ok(g):
        try:
            _lam_for_power(constellation, alpha, g, sigma_u2, q_target)
            return True
        except LseLabError:
            return False
    lo, hi = 1e-6, 1e2
    if ok(lo):
        return 0.0
    if not ok(hi):
        raise BracketError("power target unreachable for every gain", (lo, hi))
    while hi > lo * (1.0 + 1e-7):
        mid = np.sqrt(lo * hi)
        lo, hi = (lo, mid) if ok(mid) else (mid, hi)
    return hi


def tune_constellation(constellation, alpha, q_target, sigma_n2, sigma_u2=1.0,
                       gamma_bounds=(1e-4, 1e2)):
    """Maximise the rate bound over ``(lam, gamma)`` at RS power ``q_target``.

    For the whole plane and the disk, ``lam`` is found by root finding so that
    the RS power equals ``q_target`` and the gain is optimised by bounded
    scalar search in ``log gamma``.  For constant-modulus sets the power is
    the symbol power (``q_target`` is ignored) and only ``gamma`` is tuned.
    """
    cm = constellation.constant_modulus
    g_floor = _gamma_floor(constellation, alpha, q_target, sigma_u2)
    lo = max(gamma_bounds[0], g_floor * (1.0 + 1e-5))
    hi = gamma_bounds[1]
    if lo >= hi:
        raise BracketError("empty gain interval", (lo, hi))

    def evaluate(gamma):
        lam = 0.0 if cm else _lam_for_power(constellation, alpha, gamma, sigma_u2, q_target)
        sol = _rs_fixed(constellation, alpha, gamma, sigma_u2, lam)
        return lam, sol

    def neg_rate(lg):
        try:
            _, sol = evaluate(np.exp(lg))
        except LseLabError:
            return 1e3
        return -rate_lower_bound(np.exp(lg), sigma_u2, sigma_n2, sol.distortion)

    res = optimize.minimize_scalar(neg_rate, bounds=(np.log(lo), np.log(hi)), method="bounded",
                                   options={"xatol": 1e-11, "maxiter": 500})
    gamma = float(np.exp(res.x))
    lam, sol = evaluate(gamma)
    return TuningResult(lam=float(lam), gamma=gamma, rate_bound=float(-res.fun),
                        distortion=float(sol.distortion), chi=float(sol.chi), q=float(sol.q))


def antenna_gap(constellation, alpha, q, sigma_n2, sigma_u2=1.0):
    """Relative number of extra antennas the set needs to match tuned RZF.

    Returns ``alpha' / alpha - 1`` where the tuned rate of ``constellation`` at
    load ``alpha'`` equals the tuned RZF rate at load ``alpha``.
    """
    target = tune_rzf(alpha, q, sigma_n2, sigma_u2).rate_bound
    f = lambda a: tune_constellation(constellation, a, q, sigma_n2, sigma_u2).rate_bound - target
    hi = alpha * 1.1
    while f(hi) < 0:
        hi *= 1.25
        if hi > 100 * alpha:
            raise BracketError("rate target not reached", (alpha, hi))
    a = optimize.brentq(f, alpha, hi, xtol=1e-10)
    return a / alpha - 1.0


def snr_gap_db(constellation, alpha, q, sigma_n2, sigma_u2=1.0):
    """Extra SNR ``q / sigma_n2`` (in dB) the set needs to match tuned RZF at equal load."""
    target = tune_rzf(alpha, q, sigma_n2, sigma_u2).rate_bound
    f = lambda s2: tune_constellation(constellation, alpha, q, s2, sigma_u2).rate_bound - target
    lo = sigma_n2 / 1.1
    while f(lo) < 0:
        lo /= 1.25
        if lo < sigma_n2 * 1e-4:
            raise BracketError("rate target not reached", (lo, sigma_n2))
    s2 = optimize.brentq(f, lo, sigma_n2, xtol=1e-12)
    return 10.0 * np.log10(sigma_n2 / s2)


# --------------------------------------------------------------------------
# union bound

@dataclass
class UnionBoundResult:
    epsilon_star: float
    alpha: float
    M: int
    rhs: float


def union_bound_epsilon(alpha, M):
    """Distortion floor of M-PSK precoding from a union bound.

    The floor ``eps*`` solves ``eps/2 - ln(eps) = alpha ln(M) - ln(2) + 1`` on
    ``(0, 2]``, where the left side decreases; any distortion below it has
    vanishing probability in the large-system limit.  Unit data power and gain.
    """
    if not alpha > 0 or M < 2:
        raise ValueError("need alpha > 0 and M >= 2")
    rhs = alpha * np.log(M) - np.log(2.0) + 1.0
    F = lambda e: e / 2.0 - np.log(e) - rhs
    if F(2.0) >= 0:
        eps = 2.0
    else:
        lo = 2.0 * np.exp(-rhs - 1.0)
        while F(lo) <= 0:
            lo /= 2.0
        eps = optimize.bisect(F, lo, 2.0, xtol=1e-14, rtol=1e-15, maxiter=500)
    return UnionBoundResult(epsilon_star=float(eps), alpha=float(alpha), M=int(M), rhs=float(rhs))


# --------------------------------------------------------------------------
# OFDM

@dataclass
class OfdmResult:
    ks_distance: float
    eig_ofdm: np.ndarray = field(repr=False)
    eig_flat: np.ndarray = field(repr=False)
    unitarity_error: float = 0.0
    method: str = "dense"


def dft_matrix(L):
    """Unitary ``L``-point DFT matrix."""
    n = np.arange(L)
    return np.exp(-2j * np.pi * np.outer(n, n) / L) / np.sqrt(L)


def ofdm_channel(Hs):
    """Block-sparse ``KL x NL`` matrix from ``L`` per-subcarrier channels.

    Rows are ordered subcarrier-major (``j K + k``); columns antenna-major
    (``n L + l``), so each antenna owns a contiguous length-``L`` block of
    frequency-domain samples.
    """
    L, K, N = Hs.shape
    Ht = np.zeros((K * L, N * L), dtype=complex)
    for j in range(L):
        Ht[j * K:(j + 1) * K, j::L] = Hs[j]
    return Ht


def ofdm_equivalence(L, N, K, seed=0, method="auto", max_entries=1 << 22):
    """Compare the OFDM Gramian spectrum with a flat i.i.d. Gramian.

    ``L`` independent i.i.d. channels ``H_j`` (``K x N``, variance ``1/N``) form
    the block-sparse ``H_t``; the time-domain transform ``W_t = I_N kron W`` uses
    the unitary ``L``-point DFT ``W``.  The eigenvalues of the Gramian of
    ``H_t W_t^H`` are compared with those of ``H_1^H H_1`` by the two-sample
    Kolmogorov-Smirnov distance.

    With ``method="dense"`` the ``KL x NL`` product is formed explicitly.  The
    ``"structured"`` path uses that ``W_t`` is unitary, so the Gramian of
    ``H_t W_t^H`` is unitarily similar to ``H_t^H H_t``, which is block
    diagonal up to a permutation with blocks ``H_j^H H_j``.  ``"auto"`` picks
    the dense path while ``KL * NL <= max_entries``.
    """
    if min(L, N, K) < 1:
        raise ValueError("L, N and K must be positive")
    rng = np.random.Generator(np.random.Philox(seed))
    Hs = (rng.standard_normal((L, K, N)) + 1j * rng.standard_normal((L, K, N))) / np.sqrt(2.0 * N)
    W = dft_matrix(L)
    unit_err = float(np.max(np.abs(W @ W.conj().T - np.eye(L))))
    if unit_err > 1e-12:
        raise DomainError(f"DFT matrix not unitary to 1e-12 (error {unit_err:.2e})")
    if method == "auto":
        method = "dense" if K * L * N * L <= max_entries else "structured"
    if method == "dense":
        if K * L * N * L > max_entries:
            raise MemoryError(f"dense OFDM channel has {K * L * N * L} entries "
                              f"(cap {max_entries})")
        Wt = np.kron(np.eye(N), W)
        A = ofdm_channel(Hs) @ Wt.conj().T
        sv = np.linalg.svd(A, compute_uv=False)
        eig = np.zeros(N * L)
        eig[:sv.size] = sv ** 2
    elif method == "structured":
        eig = np.concatenate([np.linalg.eigvalsh(H.conj().T @ H) for H in Hs])
    else:
        raise ValueError("method must be 'auto', 'dense' or 'structured'")
    flat = np.linalg.eigvalsh(Hs[0].conj().T @ Hs[0])
    # when K < N both spectra hold N - K zeros; snap rounding noise so they tie
    floor = 1e-10 * max(np.max(np.abs(eig)), np.max(np.abs(flat)), 1e-300)
    eig = np.sort(np.where(eig > floor, eig, 0.0))
    flat = np.sort(np.where(flat > floor, flat, 0.0))
    ks = float(stats.ks_2samp(eig, flat).statistic)
    return OfdmResult(ks_distance=ks, eig_ofdm=eig, eig_flat=flat,
                      unitarity_error=unit_err, method=method)


# --------------------------------------------------------------------------
# power decay

@dataclass
class PowerDecayResult:
    kappa: float
    intercept: float
    alphas: list
    q: list
    infeasible: list


def power_for_distortion(D_target, alpha, P, gamma=1.0, sigma_u2=1.0):
    """Per-antenna average power at which the disk precoder reaches ``D_target``.

    The regulariser is adjusted until the RS distortion equals ``D_target``
    (distortion grows with the regulariser); the resulting RS power is returned.
    """
    gs = gamma * sigma_u2
    if not 0 < D_target < gs:
        raise ValueError("need 0 < D_target < gamma sigma_u2")
    solve = _RsCache(Disk(P), alpha, gamma, sigma_u2)

    def D_of(loglam):
        return solve(np.exp(loglam)).distortion - D_target

    # walk the regulariser down from a value where the distortion is too high
    hi = np.log(1e6)
    d_hi = D_of(hi)
    lo = hi
    samples = [(np.exp(hi), d_hi + D_target)]
    while True:
        lo -= np.log(10.0)
        try:
            d_lo = D_of(lo)
        except (DivergedRSError, ConvergenceError):
            d_lo = None
        if d_lo is None or lo < np.log(1e-12):
            raise BracketError(f"D_target={D_target} unreachable at P={P}, alpha={alpha}",
                               (np.exp(lo), np.exp(hi)), samples)
        samples.append((np.exp(lo), d_lo + D_target))
        if d_lo <= 0:
            break
        hi = lo
    solve.last = None
    ll = optimize.brentq(D_of, lo, hi, xtol=1e-13)
    return solve(np.exp(ll)).q


def power_decay_fit(D_target, alphas, P, gamma=1.0, sigma_u2=1.0):
    """Fit ``q(alpha) ~ c alpha^kappa`` for the power needed to reach ``D_target``.

    Least squares on ``log q`` against ``log alpha`` over every feasible load;
    loads where ``D_target`` cannot be reached are listed in ``infeasible``.
    """
    alphas = sorted(float(a) for a in alphas)
    qs, ok_a, bad = [], [], []
    for a in alphas:
        try:
            qs.append(power_for_distortion(D_target, a, P, gamma, sigma_u2))
            ok_a.append(a)
        except LseLabError as exc:
            bad.append({"alpha": a, "reason": str(exc)})
    if len(ok_a) < 2:
        raise ExperimentError("fewer than two feasible loads")
    a = np.array(ok_a)
    q = np.array(qs)
    slope, intercept = np.polyfit(np.log(a), np.log(q), 1)
    return PowerDecayResult(kappa=float(slope), intercept=float(intercept), alphas=ok_a,
                            q=qs, infeasible=bad)


# --------------------------------------------------------------------------
# sweeps and output files

SWEEP_COLUMNS = (
    "alpha", "set", "P", "M", "p", "gamma", "sigma_u2", "sigma_n2", "lam",
    "K", "N", "trials", "seed", "restarts",
    "D_replica_rs", "rs_status", "D_replica_rsb",
    "D_mc_mean", "D_mc_stderr", "rate_bound", "entropy0",
)


@dataclass
class SweepRow:
    alpha: float
    set: str
    P: float = None
    M: int = None
    p: float = None
    gamma: float = 1.0
    sigma_u2: float = 1.0
    sigma_n2: float = 1.0
    lam: float = 0.0
    K: int = None
    N: int = None
    trials: int = 0
    seed: int = 0
    restarts: int = None
    D_replica_rs: float = None
    rs_status: str = "ok"
    D_replica_rsb: float = None
    D_mc_mean: float = None
    D_mc_stderr: float = None
    rate_bound: float = None
    entropy0: float = None


def replica_rs(constellation, alpha, gamma=1.0, sigma_u2=1.0, lam=0.0, spectrum=None,
               **solver_opts):
    """RS solution using a closed form when one exists, quadrature otherwise."""
    spectrum = spectrum or MarchenkoPasturIid(alpha)
    cfg = RsConfig(spectrum, gamma=gamma, sigma_u2=sigma_u2, lam=lam, **solver_opts)
    if spectrum.is_iid:
        if isinstance(constellation, FullComplex):
            return solve_rs_rzf(cfg)
        if isinstance(constellation, Disk):
            return solve_rs_peak(constellation.P, cfg, method="newton")
    return solve_rs_generic(constellation, cfg)


def sweep_row(alpha, constellation, gamma=1.0, sigma_u2=1.0, sigma_n2=1.0, lam=0.0,
              K=100, trials=0, seed=0, restarts=32, rsb=False):
    """Replica predictions (and optionally Monte Carlo) at one load."""
    cd = constellation_to_dict(constellation)
    row = SweepRow(alpha=float(alpha), set=cd["set"], P=cd.get("P"), M=cd.get("M"),
                   p=cd.get("p"), gamma=gamma, sigma_u2=sigma_u2, sigma_n2=sigma_n2,
                   lam=0.0 if constellation.constant_modulus else lam, seed=seed)
    try:
        rs = replica_rs(constellation, alpha, gamma, sigma_u2, lam)
        row.D_replica_rs = rs.distortion
        row.entropy0 = rs.entropy0
        if gamma * sigma_u2 > 0:
            row.rate_bound = rate_lower_bound(gamma, sigma_u2, sigma_n2, rs.distortion)
    except DivergedRSError:
        row.rs_status = "divergent"
    except ConvergenceError:
        row.rs_status = "unconverged"
    if rsb and isinstance(constellation, (Mpsk, Circle)):
        cfg = RsConfig(MarchenkoPasturIid(alpha), gamma=gamma, sigma_u2=sigma_u2)
        row.D_replica_rsb = solve_rsb1(constellation, cfg).distortion
    if trials > 0:
        mc = McConfig(K=K, alpha=alpha, trials=trials, seed=seed, constellation=constellation,
                      gamma=gamma, lam=lam, sigma_u2=sigma_u2, sigma_n2=sigma_n2,
                      restarts=restarts)
        res = monte_carlo_distortion(mc)
        row.K, row.N, row.trials = K, mc.N, trials
        row.restarts = restarts if _resolve_solver(mc) == "cd" else None
        row.D_mc_mean, row.D_mc_stderr = res.mean, res.stderr
    return row


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def write_sweep_csv(rows, fh):
    """Write rows to an open text file; flushes after every row."""
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        d = asdict(row)
        w.writerow([_fmt(d[c]) for c in SWEEP_COLUMNS])
        fh.flush()


def manifest(config, seeds, wall_time):
    """Run manifest: configuration echo, library versions, seeds and wall time."""
    return {
        "config": config,
        "versions": {"lse_lab": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, "scipy": scipy.__version__},
        "seeds": seeds,
        "wall_time_s": wall_time,
    }


def write_manifest(path, config, seeds, wall_time):
    with open(path, "w") as fh:
        json.dump(manifest(config, seeds, wall_time), fh, indent=2, sort_keys=True)
        fh.write("\n")
