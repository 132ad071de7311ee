"""Least-square-error precoders for concrete channel instances.

Every routine targets

    minimise  ||H v - sqrt(gamma) u||^2 + lam ||v||^2   over v in X^N

for a per-antenna transmit set ``X``.  The unconstrained problem is solved in
closed form (regularised zero forcing), the peak-power problem by projected
gradient descent, the non-convex sets by restarted coordinate descent, and
small discrete instances exactly by enumeration.
"""

from dataclasses import dataclass

import numba
import numpy as np

from .constellations import Circle, Disk, FullComplex, Mpsk
from .errors import DomainError, EnumerationLimitError


@dataclass
class PrecodingInstance:
    """A channel ``H`` (K x N), data ``u`` (K), gain, regulariser and transmit set."""

    H: np.ndarray
    u: np.ndarray
    gamma: float = 1.0
    lam: float = 0.0
    constellation: object = FullComplex()

    def __post_init__(self):
        self.H = np.atleast_2d(np.asarray(self.H, dtype=complex))
        self.u = np.atleast_1d(np.asarray(self.u, dtype=complex))
        if self.H.shape[0] != self.u.shape[0]:
            raise ValueError(f"H has {self.H.shape[0]} rows but u has {self.u.shape[0]} entries")
        if self.gamma < 0 or self.lam < 0:
            raise ValueError("gamma and lam must be non-negative")

    @property
    def K(self):
        return self.H.shape[0]

    @property
    def N(self):
        return self.H.shape[1]

    @property
    def target(self):
        return np.sqrt(self.gamma) * self.u

    @property
    def effective_lam(self):
        # the penalty is a constant on constant-modulus sets
        return 0.0 if self.constellation.constant_modulus else self.lam


@dataclass
class PrecodeResult:
    v: np.ndarray
    objective: float
    iterations: int = 0
    restarts_used: int = 0
    converged: bool = True


def objective(inst, v):
    """``||H v - sqrt(gamma) u||^2 + lam ||v||^2`` (penalty dropped for constant-modulus sets)."""
    r = inst.H @ v - inst.target
    return float(np.vdot(r, r).real + inst.effective_lam * np.vdot(v, v).real)


def empirical_distortion(H, u, v, gamma):
    """Single-instance distortion ``||H v - sqrt(gamma) u||^2 / K``."""
    H = np.atleast_2d(H)
    r = H @ v - np.sqrt(gamma) * np.asarray(u)
    return float(np.vdot(r, r).real / H.shape[0])


def rzf_precode(inst):
    """Regularised zero forcing ``v = sqrt(gamma) H^H (H H^H + lam I)^-1 u``.

    Raises
    ------
    DomainError
        If ``lam = 0`` and ``H H^H`` is singular.
    """
    H = inst.H
    A = H @ H.conj().T
    if inst.lam > 0:
        A = A + inst.lam * np.eye(inst.K)
    if np.linalg.cond(A) > 1e14:
        raise DomainError("H H^H is singular; use a positive regulariser lam")
    a = np.linalg.solve(A, inst.target)
    v = H.conj().T @ a
    return PrecodeResult(v=v, objective=objective(inst, v))


def spectral_norm_sq(H, tol=1e-8, max_iter=1000, seed=0):
    """Largest eigenvalue of ``H^H H`` by power iteration."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(H.shape[1]) + 1j * rng.standard_normal(H.shape[1])
    x /= np.linalg.norm(x)
    val = 0.0
    for _ in range(max_iter):
        y = H.conj().T @ (H @ x)
        new = np.linalg.norm(y)
        if new == 0:
            return 0.0
        x = y / new
        if abs(new - val) <= tol * new:
            return new
        val = new
    return val


def precode_projected_gradient(inst, step=None, tol=1e-10, max_iter=5000, v0=None):
    """Projected gradient descent for convex sets (disk or whole plane).

    Uses steps of size ``1/L`` with ``L = 2 (lam + sigma_max(H)^2)`` followed by
    projection onto the set.  Stops when the relative decrease of the
    objective drops below ``tol``.
    """
    c = inst.constellation
    if not isinstance(c, (Disk, FullComplex)):
        raise ValueError("projected gradient needs a convex set (Disk or FullComplex)")
    H, b, lam = inst.H, inst.target, inst.lam
    if step is None:
        L = 2.0 * (lam + spectral_norm_sq(H))
        step = 1.0 / L if L > 0 else 1.0
    v = np.zeros(inst.N, dtype=complex) if v0 is None else c.project(np.asarray(v0, complex))
    Hh = H.conj().T
    r = H @ v - b
    obj = float(np.vdot(r, r).real + lam * np.vdot(v, v).real)
    converged = False
    for it in range(1, max_iter + 1):
        grad = 2.0 * (Hh @ r + lam * v)
        v = c.project(v - step * grad)
        r = H @ v - b
        new = float(np.vdot(r, r).real + lam * np.vdot(v, v).real)
        change = obj - new
        obj = new
        if abs(change) <= tol * max(obj, 1e-300):
            converged = True
            break
    return PrecodeResult(v=v, objective=obj, iterations=it, converged=converged)


_SET_CODES = {FullComplex: 0, Disk: 1, Circle: 2, Mpsk: 3}


@numba.njit(cache=True, nogil=True)
def _cd_kernel(H, b, v, colnorm, lam, code, radius, points, max_sweeps, tol):
    K, N = H.shape
    r = b.copy()
    for i in range(N):
        for k in range(K):
            r[k] -= H[k, i] * v[i]
    M = points.shape[0]
    obj = 0.0
    for k in range(K):
        obj += r[k].real ** 2 + r[k].imag ** 2
    for i in range(N):
        obj += lam * (v[i].real ** 2 + v[i].imag ** 2)
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        sweeps += 1
        changed = False
        for i in range(N):
            if colnorm[i] == 0.0:
                continue
            # r + h_i v_i is the residual with coordinate i removed
            a = 0j
            for k in range(K):
                a += np.conj(H[k, i]) * r[k]
            a = a + colnorm[i] * v[i]
            xh = a / (colnorm[i] + lam)
            if code == 1:
                m = abs(xh)
                if m > radius:
                    xh = xh * (radius / m)
            elif code == 2:
                m = abs(xh)
                if m == 0.0:
                    xh = v[i]
                else:
                    xh = xh * (radius / m)
            elif code == 3:
                best = 0
                bd = np.inf
                for j in range(M):
                    d = abs(xh - points[j]) ** 2
                    if d < bd:
                        bd = d
                        best = j
                xh = points[best]
            delta = xh - v[i]
            if delta != 0:
                if code == 3 or code == 2:
                    changed = True
                for k in range(K):
                    r[k] -= H[k, i] * delta
                v[i] = xh
        new = 0.0
        for k in range(K):
            new += r[k].real ** 2 + r[k].imag ** 2
        for i in range(N):
            new += lam * (v[i].real ** 2 + v[i].imag ** 2)
        if code == 3:
            if not changed:
                converged = True
                obj = new
                break
        elif obj - new <= tol * max(new, 1e-300):
            converged = True
            obj = new
            break
        obj = new
    return obj, sweeps, converged


def precode_coordinate_descent(inst, restarts=32, seed=None, max_sweeps=1000, tol=1e-10,
                               v0=None):
    """Cyclic coordinate descent with random restarts.

    Each coordinate update minimises the objective exactly over the transmit
    set with all other coordinates fixed: the unconstrained minimiser
    ``h_i^H r / (||h_i||^2 + lam)`` (``r`` the residual without coordinate ``i``)
    is projected onto the set.  On the circle a zero minimiser keeps the
    previous value; on M-PSK ties go to the lower symbol index.

    Sweeps repeat until no coordinate changes (M-PSK) or the relative
    objective decrease drops below ``tol``.  The best of ``restarts`` random
    starts (uniform over the set) is returned.

    Parameters
    ----------
    inst : PrecodingInstance
    restarts : int
        Number of random initial points.
    seed : int or None
        Seed for the starting points.
    v0 : array_like, optional
        Extra starting point tried before the random ones.
    """
    c = inst.constellation
    code = _SET_CODES[type(c)]
    lam = inst.effective_lam
    H = np.ascontiguousarray(inst.H)
    b = inst.target.astype(np.complex128)
    colnorm = np.sum(np.abs(H) ** 2, axis=0)
    if code == 3:
        points = c.points.astype(np.complex128)
        radius = np.sqrt(c.p)
    else:
        points = np.zeros(1, dtype=np.complex128)
        radius = np.sqrt(getattr(c, "P", 1.0))
    rng = np.random.default_rng(seed)
    starts = []
    if v0 is not None:
        starts.append(c.project(np.asarray(v0, dtype=complex)))
    for _ in range(max(restarts, 1)):
        starts.append(np.asarray(c.sample(rng, inst.N), dtype=np.complex128))
    best = None
    total = 0
    all_ok = True
    for v in starts:
        v = v.copy()
        obj, sweeps, ok = _cd_kernel(H, b, v, colnorm, lam, code, radius, points,
                                     max_sweeps, tol)
        total += sweeps
        all_ok &= ok
        if best is None or obj < best[0]:
            best = (obj, v, ok)
    obj, v, ok = best
    if code == 2:
        # remove rounding drift so every entry sits exactly on the circle
        v = c.project(v)
    return PrecodeResult(v=v, objective=objective(inst, v), iterations=total,
                         restarts_used=len(starts), converged=ok)


def exhaustive_oracle(inst, limit=2 ** 22, chunk=1 << 15):
    """Global minimiser over an M-PSK alphabet by full enumeration.

    Candidates are enumerated in lexicographic order of symbol indices (first
    antenna most significant); among equal objectives the first is kept.

    Raises
    ------
    EnumerationLimitError
        If ``M^N`` exceeds ``limit``.
    """
    c = inst.constellation
    if not isinstance(c, Mpsk):
        raise ValueError("exhaustive search needs an M-PSK alphabet")
    M, N = c.M, inst.N
    total = M ** N
    if total > limit:
        raise EnumerationLimitError(f"{M}^{N} = {total} candidates exceed the limit {limit}",
                                    required=total)
    pts = c.points
    b = inst.target
    HT = inst.H.T
    # place values of the lexicographic index, first antenna most significant
    place = M ** np.arange(N - 1, -1, -1, dtype=np.int64)
    best_obj, best_idx = np.inf, 0
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // place[None, :]) % M
        X = pts[digits]
        R = X @ HT - b[None, :]
        objs = np.sum(R.real ** 2 + R.imag ** 2, axis=1)
        j = int(np.argmin(objs))
        if objs[j] < best_obj:
            best_obj, best_idx = objs[j], int(idx[j])
    digits = (best_idx // place) % M
    v = pts[digits]
    return PrecodeResult(v=v, objective=objective(inst, v), iterations=total,
                         restarts_used=0, converged=True)
