"""Convex-function calculus: evaluation, conjugation, and Bregman divergences.

Every cost in the toolkit is a :class:`ConvexFn` exposing value, gradient,
Hessian, and the corresponding Fenchel-dual quantities.  Scalar functions
(``dim == 1``) are elementwise maps: their methods accept floats or numpy
arrays of any shape and broadcast, which is what makes batched rollouts cheap.
Vector functions take single points of shape ``(n,)``.

Conjugates fall back to numeric gradient inversion when no closed form is
available: monotone bisection in the scalar case, damped Newton with Armijo
backtracking otherwise.  Both are globally convergent because gradients of
strictly convex functions are strictly monotone.
"""

from __future__ import annotations

import numpy as np

from .system import DomainError, NumericalError

# Numeric-solver contract shared by every module.
GRAD_INVERT_TOL = 1e-10
FD_STEP_GRAD = 1e-5
FD_STEP_HESS = 1e-4
BREAK_MARGIN = 1e-3


# ---------------------------------------------------------------------------
# gradient inversion


def bisect_increasing(fn, y, radius=None, scale=1.0, max_iter=300):
    """Solve fn(x) = y elementwise for a nondecreasing elementwise map.

    If ``radius`` is given the search is confined to [-radius, radius] and a
    target outside the range of ``fn`` pins the answer at the boundary (the
    clipped maximizer needed by domain-bounded conjugates).  Vectorized: ``y``
    may be an array and ``fn`` must broadcast.
    """
    y_in = np.asarray(y, dtype=float)
    yv = np.atleast_1d(y_in).astype(float)
    if radius is not None:
        lo = np.full(yv.shape, -float(radius))
        hi = np.full(yv.shape, float(radius))
    else:
        lo = np.full(yv.shape, -float(scale))
        hi = np.full(yv.shape, float(scale))
        for _ in range(200):
            need_lo = fn(lo) > yv
            need_hi = fn(hi) < yv
            if not (need_lo.any() or need_hi.any()):
                break
            lo = np.where(need_lo, 2.0 * lo, lo)
            hi = np.where(need_hi, 2.0 * hi, hi)
        else:
            res = float(np.max(np.abs(fn(np.where(fn(hi) < yv, hi, lo)) - yv)))
            raise NumericalError("could not bracket monotone gradient solve", residual=res)
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        too_low = fn(mid) < yv
        lo = np.where(too_low, mid, lo)
        hi = np.where(too_low, hi, mid)
        span = float(np.max(hi - lo))
        if span <= 1e-15 * (1.0 + float(np.max(np.abs(lo))) + float(np.max(np.abs(hi)))):
            break
    x = 0.5 * (lo + hi)
    return x if y_in.shape else float(x[0])


def newton_invert(value, gradient, hessian, y, x0=None, tol=GRAD_INVERT_TOL, max_iter=100):
    """Solve gradient(x) = y by minimizing the convex potential f(x) - x.y.

    Damped Newton with Armijo backtracking; raises ``NumericalError`` with the
    final residual if it stalls.
    """
    y = np.asarray(y, dtype=float)
    x = np.zeros_like(y) if x0 is None else np.array(x0, dtype=float)
    res = np.inf
    for _ in range(max_iter):
        g = gradient(x) - y
        res = float(np.linalg.norm(g))
        if res <= tol * (1.0 + float(np.linalg.norm(y))):
            return x
        H = np.atleast_2d(hessian(x))
        try:
            step = np.linalg.solve(H, -g)
        except np.linalg.LinAlgError:
            raise NumericalError("singular Hessian during gradient inversion", residual=res)
        phi0 = float(value(x)) - float(x @ y)
        slope = float(g @ step)
        t = 1.0
        for _ in range(60):
            xn = x + t * step
            if float(value(xn)) - float(xn @ y) <= phi0 + 1e-4 * t * slope:
                break
            t *= 0.5
        x = x + t * step
    raise NumericalError("gradient inversion did not converge", residual=res)


# ---------------------------------------------------------------------------
# base class


class ConvexFn:
    """A differentiable strictly convex cost with Fenchel-dual access.

    Subclasses implement ``value``, ``gradient`` and ``hessian``; the dual
    methods have numeric defaults and closed-form overrides where available.
    ``domain_radius`` bounds the (closed) effective domain as a box; ``None``
    means the whole space.  Instances are immutable after construction and
    safe to share across threads.
    """

    dim: int = 1
    domain_radius = None

    def value(self, x):
        raise NotImplementedError

    def gradient(self, x):
        raise NotImplementedError

    def hessian(self, x):
        # dim 1: elementwise second derivative; otherwise an (n, n) matrix.
        raise NotImplementedError

    # -- Fenchel dual -------------------------------------------------------

    def conjugate_gradient(self, y):
        """The inverse gradient map: x with grad f(x) = y (clipped maximizer
        when the supremum sits on the domain boundary)."""
        if self.dim == 1:
            return bisect_increasing(self.gradient, y, radius=self.domain_radius)
        if self.domain_radius is not None:
            raise DomainError("numeric conjugation of domain-bounded vector costs is not supported")
        return newton_invert(self.value, self.gradient, self.hessian, y)

    def conjugate_value(self, y):
        x = self.conjugate_gradient(y)
        return pair(self, x, y) - self.value(x)

    def conjugate_hessian(self, y):
        x = self.conjugate_gradient(y)
        if self.dim == 1:
            h = self.hessian(x)
            out = np.where(h > 0, 1.0 / np.where(h > 0, h, 1.0), np.inf)
            if self.domain_radius is not None:
                # the conjugate is affine wherever the maximizer is clipped
                clipped = (np.abs(x) >= self.domain_radius * (1 - 1e-12)) & (
                    np.abs(self.gradient(x) - np.asarray(y, dtype=float)) > 1e-9 * (1.0 + np.abs(y))
                )
                out = np.where(clipped, 0.0, out)
            return out if np.asarray(y).shape else float(np.atleast_1d(out)[0])
        return np.linalg.inv(self.hessian(x))

    # -- kink bookkeeping ---------------------------------------------------

    def hessian_breaks(self):
        """Scalar |x| locations where the Hessian jumps (empty when smooth)."""
        return np.empty(0)

    def conjugate_hessian_breaks(self):
        return np.empty(0)

    def to_spec(self) -> dict:
        raise NotImplementedError(f"{type(self).__name__} is not serializable")


def pair(f: ConvexFn, a, b):
    """Dual pairing <a, b>: elementwise product for scalar maps, dot otherwise."""
    if f.dim == 1:
        return np.asarray(a, dtype=float) * np.asarray(b, dtype=float)
    return float(np.asarray(a, dtype=float) @ np.asarray(b, dtype=float))


# ---------------------------------------------------------------------------
# function library


class QuadraticFn(ConvexFn):
    """x -> x' W x with W symmetric positive definite."""

    def __init__(self, weight):
        W = np.atleast_2d(np.asarray(weight, dtype=float))
        if W.shape[0] != W.shape[1]:
            raise ValueError("weight must be square")
        if np.max(np.abs(W - W.T)) > 1e-12 * (1.0 + np.max(np.abs(W))):
            raise ValueError("weight must be symmetric")
        if np.min(np.linalg.eigvalsh(W)) <= 0:
            raise ValueError("weight must be positive definite")
        self.W = 0.5 * (W + W.T)
        self.W_inv = np.linalg.inv(self.W)
        self.dim = W.shape[0]
        self._w = float(self.W[0, 0]) if self.dim == 1 else None

    def value(self, x):
        if self.dim == 1:
            x = np.asarray(x, dtype=float)
            return self._w * x * x
        x = np.asarray(x, dtype=float)
        return float(x @ self.W @ x)

    def gradient(self, x):
        if self.dim == 1:
            return 2.0 * self._w * np.asarray(x, dtype=float)
        return 2.0 * (self.W @ np.asarray(x, dtype=float))

    def hessian(self, x):
        if self.dim == 1:
            return np.full_like(np.asarray(x, dtype=float), 2.0 * self._w)
        return 2.0 * self.W

    def conjugate_value(self, y):
        if self.dim == 1:
            y = np.asarray(y, dtype=float)
            return y * y / (4.0 * self._w)
        y = np.asarray(y, dtype=float)
        return 0.25 * float(y @ self.W_inv @ y)

    def conjugate_gradient(self, y):
        if self.dim == 1:
            return np.asarray(y, dtype=float) / (2.0 * self._w)
        return 0.5 * (self.W_inv @ np.asarray(y, dtype=float))

    def conjugate_hessian(self, y):
        if self.dim == 1:
            return np.full_like(np.asarray(y, dtype=float), 0.5 / self._w)
        return 0.5 * self.W_inv

    def to_spec(self):
        return {"kind": "quadratic", "weight": self.W.tolist()}


class BoundedQuadraticFn(ConvexFn):
    """weight * sum(x_i^2) on the closed box |x_i| <= bound, +inf outside.

    The conjugate is the C^1 piecewise quadratic/affine closed form; its
    gradient is the componentwise clipped maximizer.
    """

    def __init__(self, bound: float, weight: float = 1.0, dim: int = 1):
        if bound <= 0 or weight <= 0:
            raise ValueError("bound and weight must be positive")
        self.t = float(bound)
        self.c = float(weight)
        self.dim = int(dim)
        self.domain_radius = self.t

    def _check(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(np.abs(x) > self.t * (1.0 + 1e-9) + 1e-300):
            raise DomainError(f"point outside |x| <= {self.t}")
        return np.clip(x, -self.t, self.t)

    def value(self, x):
        x = self._check(x)
        if self.dim == 1:
            return self.c * x * x
        return self.c * float(x @ x)

    def gradient(self, x):
        return 2.0 * self.c * self._check(x)

    def hessian(self, x):
        self._check(x)
        if self.dim == 1:
            return np.full_like(np.asarray(x, dtype=float), 2.0 * self.c)
        return 2.0 * self.c * np.eye(self.dim)

    def _conj_elem(self, y):
        y = np.asarray(y, dtype=float)
        inner = np.abs(y) <= 2.0 * self.c * self.t
        return np.where(inner, y * y / (4.0 * self.c), self.t * np.abs(y) - self.c * self.t**2)

    def conjugate_value(self, y):
        v = self._conj_elem(y)
        if self.dim == 1:
            return v
        return float(np.sum(v))

    def conjugate_gradient(self, y):
        return np.clip(np.asarray(y, dtype=float) / (2.0 * self.c), -self.t, self.t)

    def conjugate_hessian(self, y):
        y = np.asarray(y, dtype=float)
        h = np.where(np.abs(y) < 2.0 * self.c * self.t, 0.5 / self.c, 0.0)
        if self.dim == 1:
            return h
        return np.diag(np.atleast_1d(h))

    def conjugate_hessian_breaks(self):
        return np.array([2.0 * self.c * self.t])

    def to_spec(self):
        return {"kind": "bounded_quadratic", "bound": self.t, "weight": self.c, "dim": self.dim}


class PiecewiseQuadraticFn(ConvexFn):
    """Even scalar cost assembled from quadratic pieces in |x|.

    ``pieces`` is a list of ``(start, a, b, c)`` meaning a*|x|^2 + b*|x| + c on
    [start, next_start).  The first piece must start at 0 with b = c = 0 so the
    function vanishes (with zero slope) at the origin; continuity and matching
    one-sided slopes at breakpoints are required, which together with a > 0
    per piece gives strict convexity.  Hessians are reported one-sidedly at
    breakpoints.
    """

    def __init__(self, pieces):
        arr = np.asarray([[float(v) for v in p] for p in pieces], dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ValueError("pieces must be (start, a, b, c) quadruples")
        if arr[0, 0] != 0.0 or abs(arr[0, 2]) > 1e-12 or abs(arr[0, 3]) > 1e-12:
            raise ValueError("first piece must start at 0 with zero slope and offset")
        if np.any(np.diff(arr[:, 0]) <= 0):
            raise ValueError("piece starts must be strictly increasing")
        if np.any(arr[:, 1] <= 0):
            raise ValueError("piece curvatures must be positive (strict convexity)")
        self.starts = arr[:, 0]
        self.a = arr[:, 1]
        self.b = arr[:, 2]
        self.cc = arr[:, 3]
        scale = 1.0 + float(np.max(np.abs(arr)))
        for i in range(1, len(arr)):
            s = self.starts[i]
            v_prev = self.a[i - 1] * s * s + self.b[i - 1] * s + self.cc[i - 1]
            v_next = self.a[i] * s * s + self.b[i] * s + self.cc[i]
            g_prev = 2.0 * self.a[i - 1] * s + self.b[i - 1]
            g_next = 2.0 * self.a[i] * s + self.b[i]
            if abs(v_prev - v_next) > 1e-9 * scale or abs(g_prev - g_next) > 1e-9 * scale:
                raise ValueError(f"pieces are not C^1 at breakpoint {s}")
        # gradient values at piece starts (ascending: needed for conjugation)
        self.grad_at_start = 2.0 * self.a * self.starts + self.b

    def _idx(self, r):
        return np.clip(np.searchsorted(self.starts, r, side="right") - 1, 0, len(self.starts) - 1)

    def value(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        i = self._idx(r)
        return self.a[i] * r * r + self.b[i] * r + self.cc[i]

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        r = np.abs(x)
        i = self._idx(r)
        return np.sign(x) * (2.0 * self.a[i] * r + self.b[i])

    def hessian(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        return 2.0 * self.a[self._idx(r)]

    def conjugate_gradient(self, y):
        y = np.asarray(y, dtype=float)
        t = np.abs(y)
        i = np.clip(np.searchsorted(self.grad_at_start, t, side="right") - 1, 0, len(self.starts) - 1)
        xm = (t - self.b[i]) / (2.0 * self.a[i])
        hi = np.where(i + 1 < len(self.starts), self.starts[np.minimum(i + 1, len(self.starts) - 1)], np.inf)
        xm = np.clip(xm, self.starts[i], hi)
        return np.sign(y) * xm

    def conjugate_value(self, y):
        y = np.asarray(y, dtype=float)
        x = self.conjugate_gradient(y)
        return x * y - self.value(x)

    def conjugate_hessian(self, y):
        t = np.abs(np.asarray(y, dtype=float))
        i = np.clip(np.searchsorted(self.grad_at_start, t, side="right") - 1, 0, len(self.starts) - 1)
        return 0.5 / self.a[i]

    def hessian_breaks(self):
        return self.starts[1:].copy()

    def conjugate_hessian_breaks(self):
        return self.grad_at_start[1:].copy()

    def to_spec(self):
        return {
            "kind": "piecewise_quadratic",
            "pieces": np.column_stack([self.starts, self.a, self.b, self.cc]).tolist(),
        }


class ExpAbsFn(ConvexFn):
    """u -> exp(|u|) - |u| - 1, a heavy even penalty with log-shaped dual."""

    dim = 1

    def value(self, x):
        r = np.abs(np.asarray(x, dtype=float))
        return np.exp(r) - r - 1.0

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        return np.sign(x) * (np.exp(np.abs(x)) - 1.0)

    def hessian(self, x):
        return np.exp(np.abs(np.asarray(x, dtype=float)))

    def conjugate_value(self, y):
        t = np.abs(np.asarray(y, dtype=float))
        return (t + 1.0) * np.log1p(t) - t

    def conjugate_gradient(self, y):
        y = np.asarray(y, dtype=float)
        return np.sign(y) * np.log1p(np.abs(y))

    def conjugate_hessian(self, y):
        return 1.0 / (np.abs(np.asarray(y, dtype=float)) + 1.0)

    def to_spec(self):
        return {"kind": "exp_abs"}


class ScaledFn(ConvexFn):
    """c * f(x) for c > 0; conjugate is c * f*(y / c)."""

    def __init__(self, base: ConvexFn, scale: float):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.base = base
        self.c = float(scale)
        self.dim = base.dim
        self.domain_radius = base.domain_radius

    def value(self, x):
        return self.c * self.base.value(x)

    def gradient(self, x):
        return self.c * self.base.gradient(x)

    def hessian(self, x):
        return self.c * self.base.hessian(x)

    def conjugate_value(self, y):
        return self.c * self.base.conjugate_value(np.asarray(y, dtype=float) / self.c)

    def conjugate_gradient(self, y):
        return self.base.conjugate_gradient(np.asarray(y, dtype=float) / self.c)

    def conjugate_hessian(self, y):
        return self.base.conjugate_hessian(np.asarray(y, dtype=float) / self.c) / self.c

    def hessian_breaks(self):
        return self.base.hessian_breaks()

    def conjugate_hessian_breaks(self):
        return self.c * self.base.conjugate_hessian_breaks()

    def to_spec(self):
        return {"kind": "scaled", "scale": self.c, "base": self.base.to_spec()}


class ComposedFn(ConvexFn):
    """scale * f(M x + shift); conjugates fall back to the numeric path."""

    def __init__(self, base: ConvexFn, matrix=None, shift=None, scale: float = 1.0):
        if scale <= 0:
            raise ValueError("scale must be positive")
        self.base = base
        self.c = float(scale)
        if matrix is None:
            self.M = np.eye(base.dim) if base.dim > 1 else None
            self.dim = base.dim
        else:
            M = np.atleast_2d(np.asarray(matrix, dtype=float))
            if M.shape[0] != base.dim:
                raise ValueError("matrix rows must match the base dimension")
            self.M = M
            self.dim = M.shape[1]
        self.shift = None if shift is None else np.atleast_1d(np.asarray(shift, dtype=float))

    def _arg(self, x):
        x = np.asarray(x, dtype=float)
        z = x if self.M is None else self.M @ x
        if self.shift is not None:
            z = z + (self.shift if self.dim > 1 else float(self.shift[0]))
        return z

    def value(self, x):
        return self.c * self.base.value(self._arg(x))

    def gradient(self, x):
        g = self.base.gradient(self._arg(x))
        if self.M is None:
            return self.c * g
        return self.c * (self.M.T @ np.atleast_1d(g))

    def hessian(self, x):
        H = self.base.hessian(self._arg(x))
        if self.M is None:
            return self.c * H
        return self.c * (self.M.T @ np.atleast_2d(H) @ self.M)


class SumFn(ConvexFn):
    """Pointwise sum of two costs on the same space."""

    def __init__(self, f: ConvexFn, g: ConvexFn):
        if f.dim != g.dim:
            raise ValueError("dimension mismatch")
        self.f = f
        self.g = g
        self.dim = f.dim
        radii = [r for r in (f.domain_radius, g.domain_radius) if r is not None]
        self.domain_radius = min(radii) if radii else None

    def value(self, x):
        return self.f.value(x) + self.g.value(x)

    def gradient(self, x):
        return self.f.gradient(x) + self.g.gradient(x)

    def hessian(self, x):
        return self.f.hessian(x) + self.g.hessian(x)

    def hessian_breaks(self):
        return np.unique(np.concatenate([self.f.hessian_breaks(), self.g.hessian_breaks()]))


class ConjugateFn(ConvexFn):
    """The Fenchel dual f* of a ConvexFn, as a first-class cost.

    Values and gradients of f* come from the primal's conjugate methods (the
    numeric inversion path unless the primal has closed forms), while the
    conjugate of f* is the primal itself — conjugation is an involution on
    closed convex functions.
    """

    def __init__(self, primal: ConvexFn):
        self.primal = primal
        self.dim = primal.dim

    def value(self, x):
        return self.primal.conjugate_value(x)

    def gradient(self, x):
        return self.primal.conjugate_gradient(x)

    def hessian(self, x):
        return self.primal.conjugate_hessian(x)

    def conjugate_value(self, y):
        return self.primal.value(y)

    def conjugate_gradient(self, y):
        return self.primal.gradient(y)

    def conjugate_hessian(self, y):
        return self.primal.hessian(y)

    def hessian_breaks(self):
        return self.primal.conjugate_hessian_breaks()

    def conjugate_hessian_breaks(self):
        return self.primal.hessian_breaks()


class InducedDifference(ConvexFn):
    """minuend - subtrahend where the minuend is given through its dual.

    Built for storage-minus-state costs m = p - q with p = (p*)*: all primal
    evaluations of p go through one gradient inversion of p*, and conjugate
    evaluations of the difference reuse the same parametrization, so no solve
    is ever nested inside another.  Only meaningful when the difference is
    convex (checked by the certificate machinery, not here).
    """

    def __init__(self, minuend: ConjugateFn, subtrahend: ConvexFn):
        if not isinstance(minuend, ConjugateFn):
            raise TypeError("minuend must be a ConjugateFn (a cost defined through its dual)")
        if minuend.dim != subtrahend.dim:
            raise ValueError("dimension mismatch")
        self.p = minuend
        self.q = subtrahend
        self.dual = minuend.primal  # p*
        self.dim = minuend.dim

    def value(self, x):
        return self.p.value(x) - self.q.value(x)

    def gradient(self, x):
        return self.p.gradient(x) - self.q.gradient(x)

    def hessian(self, x):
        return self.p.hessian(x) - self.q.hessian(x)

    # -- conjugate via the storage-dual parametrization ---------------------
    # With x(z) = grad p*(z), the difference gradient at x(z) is
    # z - grad q(x(z)); inverting that scalar-monotone map in z costs one
    # bisection over closed-form kernels.

    def _zeta_for(self, y):
        if self.dim == 1:
            return bisect_increasing(lambda z: z - self.q.gradient(self.dual.gradient(z)), y)
        y = np.asarray(y, dtype=float)
        z = np.array(y, dtype=float)
        res = np.inf
        for _ in range(100):
            xz = self.dual.gradient(z)
            g = z - self.q.gradient(xz) - y
            res = float(np.linalg.norm(g))
            if res <= GRAD_INVERT_TOL * (1.0 + float(np.linalg.norm(y))):
                return z
            J = np.eye(self.dim) - np.atleast_2d(self.q.hessian(xz)) @ np.atleast_2d(self.dual.hessian(z))
            step = np.linalg.solve(J, -g)
            t = 1.0
            for _ in range(40):
                zn = z + t * step
                gn = zn - self.q.gradient(self.dual.gradient(zn)) - y
                if float(np.linalg.norm(gn)) <= (1.0 - 1e-4 * t) * res:
                    break
                t *= 0.5
            z = z + t * step
        raise NumericalError("difference-conjugate solve did not converge", residual=res)

    def conjugate_gradient(self, y):
        z = self._zeta_for(y)
        return self.dual.gradient(z)

    def conjugate_value(self, y):
        z = self._zeta_for(y)
        x = self.dual.gradient(z)
        # p(x) = <x, z> - p*(z) exactly at the Fenchel-equality pair (x, z)
        p_val = pair(self, x, z) - self.dual.value(z)
        return pair(self, x, y) - (p_val - self.q.value(x))

    def conjugate_hessian(self, y):
        z = self._zeta_for(y)
        x = self.dual.gradient(z)
        if self.dim == 1:
            h = 1.0 / self.dual.hessian(z) - self.q.hessian(x)
            return 1.0 / h
        h = np.linalg.inv(self.dual.hessian(z)) - self.q.hessian(x)
        return np.linalg.inv(h)


# ---------------------------------------------------------------------------
# operations


def bregman(f: ConvexFn, x, y):
    """D_f(x, y) = f(x) - f(y) - <grad f(y), x - y>; nonnegative, zero iff x = y."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return f.value(x) - f.value(y) - pair(f, f.gradient(y), x - y)


def bregman_dual_point(f: ConvexFn, x, y, grad_y):
    """Generalized divergence with an explicit (sub)gradient at the anchor.

    Needed where the anchor sits on a domain boundary and the consistent dual
    point is known from the construction rather than from grad f.
    """
    return f.value(x) - f.value(y) - pair(f, grad_y, np.asarray(x, dtype=float) - np.asarray(y, dtype=float))


def grad_conjugate(f: ConvexFn, y):
    """Numerically invert grad f (ignoring closed forms): the oracle route."""
    if f.dim == 1:
        return bisect_increasing(f.gradient, y, radius=f.domain_radius)
    if f.domain_radius is not None:
        raise DomainError("numeric conjugation of domain-bounded vector costs is not supported")
    return newton_invert(f.value, f.gradient, f.hessian, y)


def conjugate_value_numeric(f: ConvexFn, y):
    """sup_x <x, y> - f(x) via gradient inversion (oracle route, no closed forms)."""
    x = grad_conjugate(f, y)
    return pair(f, x, y) - f.value(x)


def check_duality_identity(f: ConvexFn, x, y) -> float:
    """|D_f(x, y) - D_{f*}(grad f(y), grad f(x))|, which is zero in theory."""
    lhs = bregman(f, x, y)
    gy = f.gradient(y)
    gx = f.gradient(x)
    rhs = f.conjugate_value(gy) - f.conjugate_value(gx) - pair(f, f.conjugate_gradient(gx), np.asarray(gy, dtype=float) - np.asarray(gx, dtype=float))
    return float(np.max(np.abs(lhs - rhs)))


def check_three_point(f1: ConvexFn, f2: ConvexFn, x, y, z) -> float:
    """Residual of the completion-of-squares identity

    D_f1(x, y) + D_f2(x, z) = D_{f1+f2}(x, x*) + D_f1(x*, y) + D_f2(x*, z)
    with grad(f1+f2)(x*) = grad f1(y) + grad f2(z).
    """
    s = SumFn(f1, f2)
    target = f1.gradient(y) + f2.gradient(z)
    xs = grad_conjugate(s, target)
    lhs = bregman(f1, x, y) + bregman(f2, x, z)
    rhs = bregman(s, x, xs) + bregman(f1, xs, y) + bregman(f2, xs, z)
    return float(np.max(np.abs(lhs - rhs)))


def finite_diff_check(f: ConvexFn, x) -> tuple[float, float]:
    """Relative central-difference errors of (gradient, Hessian) at x."""
    if f.dim == 1:
        x = float(np.asarray(x, dtype=float))
        hg = FD_STEP_GRAD * (1.0 + abs(x))
        fd_g = (f.value(x + hg) - f.value(x - hg)) / (2.0 * hg)
        g = float(np.asarray(f.gradient(x), dtype=float))
        grad_err = abs(fd_g - g) / (1.0 + abs(g))
        hh = FD_STEP_HESS * (1.0 + abs(x))
        fd_h = (f.value(x + hh) - 2.0 * f.value(x) + f.value(x - hh)) / (hh * hh)
        h = float(np.asarray(f.hessian(x), dtype=float))
        hess_err = abs(fd_h - h) / (1.0 + abs(h))
        return float(grad_err), float(hess_err)
    x = np.asarray(x, dtype=float)
    n = f.dim
    g = np.asarray(f.gradient(x), dtype=float)
    H = np.atleast_2d(f.hessian(x))
    fd_g = np.zeros(n)
    fd_H = np.zeros((n, n))
    for j in range(n):
        e = np.zeros(n)
        e[j] = 1.0
        hg = FD_STEP_GRAD * (1.0 + abs(x[j]))
        fd_g[j] = (f.value(x + hg * e) - f.value(x - hg * e)) / (2.0 * hg)
        hh = FD_STEP_HESS * (1.0 + abs(x[j]))
        fd_H[:, j] = (np.asarray(f.gradient(x + hh * e)) - np.asarray(f.gradient(x - hh * e))) / (2.0 * hh)
    grad_err = float(np.max(np.abs(fd_g - g)) / (1.0 + np.max(np.abs(g))))
    hess_err = float(np.max(np.abs(fd_H - H)) / (1.0 + np.max(np.abs(H))))
    return grad_err, hess_err


def away_from_breaks(points, breaks, margin: float = BREAK_MARGIN):
    """Filter scalar sample points whose |coordinate| is near a Hessian kink."""
    pts = np.asarray(points, dtype=float)
    if len(np.atleast_1d(breaks)) == 0:
        return pts
    dist = np.min(np.abs(np.abs(pts)[..., None] - np.asarray(breaks, dtype=float)[None, ...]), axis=-1)
    return pts[dist > margin]


# serialization registry ----------------------------------------------------

def function_from_spec(spec: dict) -> ConvexFn:
    """Rebuild a library cost from its JSON description."""
    kind = spec.get("kind")
    if kind == "quadratic":
        return QuadraticFn(np.asarray(spec["weight"], dtype=float))
    if kind == "bounded_quadratic":
        return BoundedQuadraticFn(spec["bound"], spec.get("weight", 1.0), spec.get("dim", 1))
    if kind == "piecewise_quadratic":
        return PiecewiseQuadraticFn(spec["pieces"])
    if kind == "exp_abs":
        return ExpAbsFn()
    if kind == "scaled":
        return ScaledFn(function_from_spec(spec["base"]), spec["scale"])
    raise ValueError(f"unknown function kind: {kind!r}")
