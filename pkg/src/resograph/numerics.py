"""Root finding, argument-principle zero counting and pole tracking.

Functions ``F`` are complex callables of one complex variable. A callable
carrying ``F.vectorized = True`` (see :func:`vectorized`) accepts numpy
arrays, which lets contour quadrature batch its evaluations. Unmarked
callables are probed once with an array and marked accordingly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (DerivativeVanishes, InsufficientSamples, LostPole, NoConvergence,
                     QuadratureFailure, StepUnderflow, ZeroOnContour)

H_REL = 1e-7
REAL_AXIS_TOL = 1e-6
CENSUS_RESIDUAL_MAX = 0.1

_GL_LO = np.polynomial.legendre.leggauss(10)
_GL_HI = np.polynomial.legendre.leggauss(20)


def vectorized(func):
    """Mark ``func`` as accepting numpy arrays of k."""
    func.vectorized = True
    return func


def _probe_vectorized(F, zs) -> np.ndarray | None:
    """Try an array call once; remember on ``F`` whether it agrees with scalar calls."""
    try:
        with np.errstate(all="ignore"):
            vals = np.asarray(F(zs), dtype=complex)
        ok = vals.shape == zs.shape
        if ok and zs.size:
            ref = complex(F(zs.flat[0]))
            ok = abs(vals.flat[0] - ref) <= 1e-12 * max(1.0, abs(ref))
    except (TypeError, ValueError):
        ok = False
    try:
        F.vectorized = ok
    except AttributeError:
        pass
    return vals if ok else None


def evaluate(F, zs) -> np.ndarray:
    zs = np.asarray(zs, dtype=complex)
    flag = getattr(F, "vectorized", None)
    if flag:
        return np.asarray(F(zs), dtype=complex) * np.ones(zs.shape)
    if flag is None and zs.size > 1:
        vals = _probe_vectorized(F, zs)
        if vals is not None:
            return vals
    return np.array([F(z) for z in zs.ravel()], dtype=complex).reshape(zs.shape)


def fd_step(z):
    return H_REL * np.maximum(1.0, np.abs(z))


def derivative(F, k) -> complex:
    """Central difference with step 1e-7 * max(1, |k|)."""
    h = fd_step(abs(k))
    vals = evaluate(F, [k + h, k - h])
    return complex((vals[0] - vals[1]) / (2 * h))


def log_derivative(F, zs) -> tuple[np.ndarray, np.ndarray]:
    """F(z) and F'(z)/F(z) at the points zs, one batched evaluation.

    Uses ``F.log_derivative`` when the callable provides an exact one,
    central differences otherwise.
    """
    zs = np.asarray(zs, dtype=complex)
    exact = getattr(F, "log_derivative", None)
    if exact is not None:
        f, g = exact(zs)
        return np.asarray(f, dtype=complex), np.asarray(g, dtype=complex)
    h = fd_step(zs)
    vals = evaluate(F, np.concatenate([zs, zs + h, zs - h]))
    n = len(zs)
    f, fp, fm = vals[:n], vals[n:2 * n], vals[2 * n:]
    with np.errstate(divide="ignore", invalid="ignore"):
        return f, (fp - fm) / (2 * h) / f


# -- Newton ---------------------------------------------------------------------------

@dataclass
class NewtonResult:
    root: complex
    residual: float
    derivative: complex
    iterations: int


def newton_solve(F, k_init, tol=1e-12, max_iter=50) -> NewtonResult:
    k = complex(k_init)
    for it in range(1, max_iter + 1):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                f = complex(F(k))
                d = derivative(F, k) if f != 0 else None
        except (OverflowError, ZeroDivisionError) as exc:
            raise NoConvergence(f"iteration left the domain at k={k}: {exc}") from None
        if not np.isfinite(f):
            raise NoConvergence(f"F is not finite at k={k}")
        if f == 0:
            return NewtonResult(k, 0.0, derivative(F, k), it)
        if d == 0 or not np.isfinite(d):
            raise DerivativeVanishes(f"F'({k}) = {d}")
        step = f / d
        if not np.isfinite(step):
            raise NoConvergence(f"non-finite Newton step at k={k}")
        k -= step
        if abs(step) <= tol * max(1.0, abs(k)):
            return NewtonResult(k, abs(complex(F(k))), d, it)
    raise NoConvergence(f"no convergence from {k_init} after {max_iter} iterations (at {k})")


def newton_root(F, k_init, tol=1e-12, max_iter=50) -> complex:
    """Newton iteration with a finite-difference derivative.

    Stops when the last correction is below ``tol * max(1, |k|)``.
    """
    return newton_solve(F, k_init, tol, max_iter).root


# -- argument principle --------------------------------------------------------------

@dataclass(frozen=True)
class ZeroCensus:
    region: tuple[float, float, float, float]
    count: int
    raw_integral: complex
    residual: float
    # sum of (z - centre) and (z - centre)^2 over the zeros, from the same contour
    moments: tuple[complex, ...] = ()

    @property
    def centre(self) -> complex:
        re0, re1, im0, im1 = self.region
        return complex((re0 + re1) / 2, (im0 + im1) / 2)

    def centroid(self) -> complex:
        if self.count == 0:
            raise ValueError("empty census has no centroid")
        return self.centre + self.moments[0] / self.count


def _corners(region):
    re0, re1, im0, im1 = region
    return [complex(re0, im0), complex(re1, im0), complex(re1, im1), complex(re0, im1)]


def _panel(F, za, zb, centre, powers):
    """GL estimates (low, high order) of the moments over segment [za, zb]."""
    mid, half = (za + zb) / 2, (zb - za) / 2
    x_lo, w_lo = _GL_LO
    x_hi, w_hi = _GL_HI
    z = np.concatenate([mid + half * x_lo, mid + half * x_hi])
    f, g = log_derivative(F, z)
    n = len(x_lo)
    out_lo, out_hi = [], []
    for p in powers:
        vals = g * (z - centre) ** p
        out_lo.append(half * np.sum(w_lo * vals[:n]))
        out_hi.append(half * np.sum(w_hi * vals[n:]))
    return np.array(out_lo), np.array(out_hi), np.min(np.abs(f)), np.max(np.abs(g))


def _segment(F, za, zb, centre, powers, tol, fscale, max_depth, budget):
    total = np.zeros(len(powers), dtype=complex)
    stack = [(za, zb, 0)]
    seg_len = abs(zb - za)
    while stack:
        a, b, depth = stack.pop()
        lo, hi, fmin, gmax = _panel(F, a, b, centre, powers)
        budget[0] -= 1
        if not np.all(np.isfinite(hi)) or (fscale > 0 and fmin <= 1e-14 * fscale):
            raise ZeroOnContour(f"F vanishes on the contour near {(a + b) / 2}")
        err = abs(hi[0] - lo[0])
        # below the noise floor of the integrand further splitting cannot help
        floor = 1e-9 * abs(b - a) * gmax
        if err <= max(tol * abs(b - a) / seg_len, floor) or depth >= max_depth:
            if depth >= max_depth and err > tol:
                raise ZeroOnContour(f"unresolvable near-zero on the contour near {(a + b) / 2}")
            total += hi
            continue
        if budget[0] <= 0:
            raise QuadratureFailure("panel budget exhausted")
        m = (a + b) / 2
        stack.append((a, m, depth + 1))
        stack.append((m, b, depth + 1))
    return total


def contour_moments(F, region, powers=(0, 1, 2), tol=1e-6, max_depth=40, max_panels=20000):
    """(1 / 2 pi i) of the integral of (z - c)^p F'/F over the rectangle boundary."""
    re0, re1, im0, im1 = region
    if not (re1 > re0 and im1 > im0):
        raise ValueError(f"degenerate region {region}")
    corners = _corners(region)
    centre = complex((re0 + re1) / 2, (im0 + im1) / 2)
    probe = np.concatenate([np.linspace(corners[i], corners[(i + 1) % 4], 33)[:-1] for i in range(4)])
    fprobe = np.abs(evaluate(F, probe))
    if not np.all(np.isfinite(fprobe)):
        raise ZeroOnContour("F is not finite on the contour")
    fscale = float(np.max(fprobe))
    if fscale == 0 or np.min(fprobe) <= 1e-14 * fscale:
        raise ZeroOnContour(f"F vanishes on the contour near {probe[np.argmin(fprobe)]}")
    budget = [max_panels]
    total = np.zeros(len(powers), dtype=complex)
    for i in range(4):
        total += _segment(F, corners[i], corners[(i + 1) % 4], centre, powers,
                          tol * 2 * np.pi, fscale, max_depth, budget)
    return total / (2j * np.pi)


def count_zeros(F, region, tol=1e-6) -> ZeroCensus:
    """Number of zeros (with multiplicity) inside ``region = (re0, re1, im0, im1)``."""
    region = tuple(float(x) for x in region)
    mom = contour_moments(F, region, tol=tol)
    raw = complex(mom[0])
    count = int(round(raw.real))
    residual = abs(raw - count)
    if residual >= CENSUS_RESIDUAL_MAX or count < 0:
        raise QuadratureFailure(f"census integral {raw} is not close to a non-negative integer")
    return ZeroCensus(region, count, raw, residual, (complex(mom[1]), complex(mom[2])))


def count_zeros_disc(F, centre, radius, tol=1e-6, max_points=1 << 16) -> int:
    """Zeros inside the circle |z - centre| = radius, by the periodic trapezoid rule."""
    if not radius > 0:
        raise ValueError("radius must be positive")
    centre = complex(centre)
    n, prev = 64, None
    while n <= max_points:
        t = 2 * np.pi * np.arange(n) / n
        w = radius * np.exp(1j * t)
        f, g = log_derivative(F, centre + w)
        if not np.all(np.isfinite(g)) or np.min(np.abs(f)) == 0:
            raise ZeroOnContour(f"F vanishes on the circle around {centre}")
        val = complex(np.mean(g * w))
        if prev is not None and abs(val - prev) < tol:
            count = int(round(val.real))
            if abs(val - count) >= CENSUS_RESIDUAL_MAX or count < 0:
                raise QuadratureFailure(f"census integral {val} is not close to a non-negative integer")
            return count
        prev, n = val, 2 * n
    raise QuadratureFailure(f"circle census around {centre} did not settle")


def _split(region, frac):
    re0, re1, im0, im1 = region
    if re1 - re0 >= im1 - im0:
        x = re0 + frac * (re1 - re0)
        return (re0, x, im0, im1), (x, re1, im0, im1)
    y = im0 + frac * (im1 - im0)
    return (re0, re1, im0, y), (re0, re1, y, im1)


def _inside(k, region, pad=0.0):
    re0, re1, im0, im1 = region
    return re0 - pad <= k.real <= re1 + pad and im0 - pad <= k.imag <= im1 + pad


def find_zeros(F, region, max_depth=40, tol=1e-6, census: ZeroCensus | None = None):
    """Locate all zeros in ``region`` as a list of ``(k, multiplicity)``.

    Cells are bisected until each holds a single zero or a cluster too tight
    to separate; each location is polished by Newton.
    """
    region = tuple(float(x) for x in region)
    if census is None:
        census = count_zeros(F, region, tol)
    out = []
    _find(F, census, 0, max_depth, tol, out)
    out.sort(key=lambda t: (t[0].real, t[0].imag))
    return out


def _find(F, census, depth, max_depth, tol, out):
    if census.count == 0:
        return
    region = census.region
    re0, re1, im0, im1 = region
    diag = math.hypot(re1 - re0, im1 - im0)
    centroid = census.centroid()
    if census.count > 1 and depth < max_depth and diag > 1e-9 * max(1.0, abs(centroid)):
        for frac in (0.5, 0.4, 0.6, 0.3, 0.7, 0.45, 0.55):
            a, b = _split(region, frac)
            try:
                ca, cb = count_zeros(F, a, tol), count_zeros(F, b, tol)
            except ZeroOnContour:
                continue
            if ca.count + cb.count == census.count:
                _find(F, ca, depth + 1, max_depth, tol, out)
                _find(F, cb, depth + 1, max_depth, tol, out)
                return
        # fall through: report the unresolved cluster
    k = centroid
    try:
        res = newton_solve(F, centroid)
        if _inside(res.root, region, pad=0.05 * diag):
            k = res.root
    except (NoConvergence, DerivativeVanishes):
        pass
    out.append((k, census.count))


# -- trajectories --------------------------------------------------------------------

@dataclass
class PoleTrajectory:
    lam: np.ndarray
    k: np.ndarray
    residual: np.ndarray
    start: complex
    step: float
    metadata: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.lam)

    def touches(self, tol=REAL_AXIS_TOL) -> np.ndarray:
        """Parameter values of samples lying on the real axis to within ``tol``."""
        return self.lam[np.abs(self.k.imag) < tol]

    def touch_points(self, tol=REAL_AXIS_TOL) -> list[float]:
        """One lambda per contiguous run of real-axis samples (the run's closest approach)."""
        mask = np.abs(self.k.imag) < tol
        pts, i, n = [], 0, len(mask)
        while i < n:
            if mask[i]:
                j = i
                while j + 1 < n and mask[j + 1]:
                    j += 1
                seg = slice(i, j + 1)
                pts.append(float(self.lam[seg][np.argmin(np.abs(self.k.imag[seg]))]))
                i = j + 1
            else:
                i += 1
        return pts

    def rows(self):
        for lam, k, r in zip(self.lam, self.k, self.residual):
            yield float(lam), float(k.real), float(k.imag), float(r)


def _on_grid(lam, origin, step):
    q = (lam - origin) / step
    return abs(q - round(q)) < 1e-9


def track_pole(family, k0, lam_range, step, predictor="secant", correct=True, tol=1e-12,
               min_step=1e-8, jump_factor=10.0, perturbative_step=None,
               verify=True) -> PoleTrajectory:
    """Follow a zero of ``family(k, lam)`` from ``k0`` as lam runs over ``lam_range``.

    ``predictor`` is ``"previous"`` (last k), ``"secant"`` (linear extrapolation
    of the last two samples) or ``"perturbative"`` (``perturbative_step(k, lam, eps)``
    returning the increment of k). With ``correct=False`` the predictor is
    accepted as is, which reproduces pure perturbative stepping. With
    ``verify`` every corrected step is checked by solving back to the previous
    parameter value; a step that does not return is halved.
    """
    a, b = map(float, lam_range)
    direction = 1.0 if b >= a else -1.0
    step = abs(float(step)) * direction
    if step == 0:
        raise ValueError("step must be nonzero")
    if predictor == "perturbative":
        if perturbative_step is None:
            perturbative_step = getattr(family, "perturbative_step", None)
        if perturbative_step is None:
            raise ValueError("perturbative predictor needs a perturbative_step")
    elif predictor not in ("previous", "secant"):
        raise ValueError(f"unknown predictor {predictor!r}")

    F = family if callable(family) else family.func
    k = complex(k0)
    res0 = abs(complex(F(k, a)))
    lams, ks, resid = [a], [k], [res0]
    meta = {"tie_breaks": [], "halvings": 0, "predictor": predictor, "corrected": correct}
    dks = []
    lam, h = a, step
    while (b - lam) * direction > 1e-14:
        nxt = lam + h
        if (nxt - b) * direction > 0:
            nxt = b
        if abs(h) == abs(step) and _on_grid(lam, a, step):
            nxt = a + round((lam - a) / step + 1) * step
            if (nxt - b) * direction > 0:
                nxt = b
        eps = nxt - lam
        if predictor == "perturbative":
            k_pred = k + complex(perturbative_step(k, lam, eps))
        elif predictor == "secant" and len(ks) >= 2:
            k_pred = k + (k - ks[-2]) * eps / (lam - lams[-2])
        else:
            k_pred = k
        if not correct:
            k_new, r, dF = k_pred, abs(complex(F(k_pred, nxt))), None
            ok = np.isfinite(k_new)
        else:
            Fn = lambda z, _l=nxt: F(z, _l)
            ok = True
            try:
                sol = newton_solve(Fn, k_pred, tol=tol)
                k_new, r, dF = sol.root, sol.residual, abs(sol.derivative)
            except (NoConvergence, DerivativeVanishes):
                ok = False
            if ok:
                velocity = abs(k - ks[-2]) / abs(lam - lams[-2]) if len(ks) >= 2 else 0.0
                max_jump = jump_factor * abs(eps) * max(velocity, 1.0) + 1e3 * tol * max(1.0, abs(k))
                ok = abs(k_new - k_pred) <= max_jump
            if ok and verify:
                # the step must be reversible, otherwise Newton hopped to a neighbouring root
                ok = _returns_to(F, k_new - (k_pred - k), lam, k, tol)
            if ok and dks and dF < 1e-3 * float(np.median(dks[-20:])):
                k_new = _tie_break(Fn, k_new, k, ks, max(abs(k_new - k), abs(eps)), meta, nxt)
                r = abs(complex(Fn(k_new)))
        if not ok:
            meta["halvings"] += 1
            h = h / 2
            if abs(h) < min_step:
                if correct:
                    raise StepUnderflow(f"step fell below {min_step} at lambda={lam}, k={k}")
                raise LostPole(f"perturbative predictor broke down at lambda={lam}")
            continue
        lam, k = nxt, k_new
        lams.append(lam)
        ks.append(k)
        resid.append(r)
        if dF is not None:
            dks.append(dF)
        if abs(h) < abs(step):
            h = min(abs(h) * 2, abs(step)) * direction
    traj = PoleTrajectory(np.array(lams), np.array(ks), np.array(resid), complex(k0), abs(step), meta)
    return traj


def _returns_to(F, k_guess, lam, k_prev, tol) -> bool:
    try:
        back = newton_solve(lambda z: F(z, lam), k_guess, tol=tol).root
    except (NoConvergence, DerivativeVanishes):
        return False
    return abs(back - k_prev) <= max(1e6 * tol, 1e-8) * max(1.0, abs(k_prev))


def _tie_break(Fn, k_new, k_prev, ks, radius, meta, lam):
    """Near a degenerate root pick the branch that continues the incoming tangent."""
    r = max(4 * radius, 1e-7 * max(1.0, abs(k_new)))
    box = (k_new.real - r, k_new.real + r, k_new.imag - r, k_new.imag + r)
    try:
        roots = find_zeros(Fn, box, max_depth=20)
    except Exception:
        return k_new
    if len(roots) < 2 and all(m < 2 for _, m in roots):
        return k_new
    if len(ks) < 2:
        return k_new
    tangent = k_prev - ks[-2]
    if tangent == 0:
        return k_new

    def alignment(z):
        d = z - k_prev
        if d == 0:
            return -1.0
        return (d.real * tangent.real + d.imag * tangent.imag) / (abs(d) * abs(tangent))

    best = max((z for z, _ in roots), key=alignment)
    meta["tie_breaks"].append(float(lam))
    return complex(best)


def departure_angle(traj: PoleTrajectory, samples: int = 10) -> float:
    """Angle between the start of a trajectory and the real axis, downward positive.

    The direction is the least-squares line through the start point fitted to
    the next ``samples`` points, oriented along the motion; the result is
    ``atan2(-Im d, Re d)``.
    """
    if len(traj) < 3:
        raise InsufficientSamples("need at least 3 samples")
    pts = traj.k[1:1 + samples] - traj.k[0]
    if len(pts) < 2 or np.all(pts == 0):
        raise InsufficientSamples("trajectory does not move")
    X = np.column_stack([pts.real, pts.imag])
    _, _, vt = np.linalg.svd(X, full_matrices=False)
    d = vt[0]
    if X[-1] @ d < 0:
        d = -d
    return math.atan2(-d[1], d[0])
