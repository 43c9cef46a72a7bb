"""Strongly convex scalar losses with analytic derivative access.

Every loss exposes its value, first and second derivative, and the inverse
of its derivative (the derivative is a strictly increasing bijection on the
reals, so the inverse is well defined).  Two concrete families are
supported, plus a linear-shift wrapper used to fold penalty slopes into a
node's loss without rebuilding it:

    WeightedQuadratic(w, y)     f(x) = w/2 * (x - y)^2          (w > 0)
    QuarticQuadratic(a, b, c)   f(x) = a*x^2 + b*x^4 + c*x      (a > 0, b >= 0)
    LinearShift(base, slope)    f(x) = base(x) + slope*x

`LossGroup` aggregates several losses that share one variable: its
derivative is the sum of member derivatives, and its inverse derivative
answers "at which point does the pooled slope equal s".  All-quadratic
groups use a closed form; anything else falls back to a safeguarded
Newton-bisection iteration.  `equilibrium_t` locates the parameter at which
a pooled component and a separately parametrized attached node meet.
"""

from __future__ import annotations

import math
from typing import Optional, Sequence, Tuple

from .errors import ContractViolationError, MalformedInstanceError

_ROOT_TOL = 1e-12
_MAX_ITER = 200


def solve_increasing(fun, dfun, target, x0=0.0):
    """Solve fun(x) = target for continuous strictly increasing fun.

    A bracket is found by geometric step expansion from x0, then refined
    by Newton steps that fall back to bisection whenever they leave the
    bracket.  Terminates when |fun(x) - target| <= 1e-12 * (1 + |target|),
    with a hard cap of 200 refinement iterations (monotonicity plus
    bisection make the cap unreachable in practice).
    """
    tol = _ROOT_TOL * (1.0 + abs(target))
    f0 = fun(x0) - target
    if abs(f0) <= tol:
        return x0
    step = 1.0 + 0.1 * abs(x0)
    if f0 < 0:
        lo, flo = x0, f0
        hi = x0 + step
        fhi = fun(hi) - target
        guard = 0
        while fhi < 0:
            lo, flo = hi, fhi
            step *= 2.0
            hi += step
            fhi = fun(hi) - target
            guard += 1
            if guard > _MAX_ITER:
                raise ContractViolationError("bracket expansion failed; fun not increasing to target")
    else:
        hi, fhi = x0, f0
        lo = x0 - step
        flo = fun(lo) - target
        guard = 0
        while flo > 0:
            hi, fhi = lo, flo
            step *= 2.0
            lo -= step
            flo = fun(lo) - target
            guard += 1
            if guard > _MAX_ITER:
                raise ContractViolationError("bracket expansion failed; fun not increasing to target")

    x = 0.5 * (lo + hi)
    for _ in range(_MAX_ITER):
        fx = fun(x) - target
        if abs(fx) <= tol:
            return x
        if fx > 0:
            hi = x
        else:
            lo = x
        d = dfun(x)
        if d > 0:
            nxt = x - fx / d
            if not lo < nxt < hi:
                nxt = 0.5 * (lo + hi)
        else:
            nxt = 0.5 * (lo + hi)
        if nxt == x:
            break
        x = nxt
    return x


def _finite(value, what):
    v = float(value)
    if not math.isfinite(v):
        raise MalformedInstanceError("%s must be finite, got %r" % (what, value))
    return v


class Loss:
    """Interface for a strongly convex differentiable scalar loss."""

    def value(self, x: float) -> float:
        raise NotImplementedError

    def derivative(self, x: float) -> float:
        raise NotImplementedError

    def second_derivative(self, x: float) -> float:
        raise NotImplementedError

    def linear_form(self) -> Optional[Tuple[float, float]]:
        """Return (gain, offset) when f'(x) = gain*x - offset exactly, else None."""
        return None

    def _inverse_guess(self, s: float) -> float:
        return 0.0

    def inverse_derivative(self, s: float) -> float:
        """The point x at which the derivative equals s."""
        form = self.linear_form()
        if form is not None:
            gain, offset = form
            return (s + offset) / gain
        return solve_increasing(
            self.derivative, self.second_derivative, s, self._inverse_guess(s)
        )

    def shifted(self, slope: float) -> "Loss":
        """This loss plus slope*x."""
        if slope == 0.0:
            return self
        return LinearShift(self, slope)


class WeightedQuadratic(Loss):
    """f(x) = w/2 * (x - y)^2 with w > 0."""

    __slots__ = ("w", "y")

    def __init__(self, w: float, y: float):
        w = _finite(w, "quadratic weight")
        if w <= 0:
            raise MalformedInstanceError("quadratic weight must be positive, got %r" % w)
        self.w = w
        self.y = _finite(y, "quadratic target")

    def value(self, x):
        d = x - self.y
        return 0.5 * self.w * d * d

    def derivative(self, x):
        return self.w * (x - self.y)

    def second_derivative(self, x):
        return self.w

    def linear_form(self):
        return self.w, self.w * self.y

    def __repr__(self):
        return "WeightedQuadratic(w=%r, y=%r)" % (self.w, self.y)


class QuarticQuadratic(Loss):
    """f(x) = a*x^2 + b*x^4 + c*x with a > 0, b >= 0."""

    __slots__ = ("a", "b", "c")

    def __init__(self, a: float, b: float, c: float):
        a = _finite(a, "quadratic coefficient")
        b = _finite(b, "quartic coefficient")
        if a <= 0:
            raise MalformedInstanceError("quadratic coefficient must be positive, got %r" % a)
        if b < 0:
            raise MalformedInstanceError("quartic coefficient must be nonnegative, got %r" % b)
        self.a = a
        self.b = b
        self.c = _finite(c, "linear coefficient")

    def value(self, x):
        x2 = x * x
        return self.a * x2 + self.b * x2 * x2 + self.c * x

    def derivative(self, x):
        return 2.0 * self.a * x + 4.0 * self.b * x * x * x + self.c

    def second_derivative(self, x):
        return 2.0 * self.a + 12.0 * self.b * x * x

    def linear_form(self):
        if self.b == 0.0:
            return 2.0 * self.a, -self.c
        return None

    def _inverse_guess(self, s):
        return (s - self.c) / (2.0 * self.a)

    def __repr__(self):
        return "QuarticQuadratic(a=%r, b=%r, c=%r)" % (self.a, self.b, self.c)


class LinearShift(Loss):
    """A base loss plus slope*x; shifting again merges the slopes."""

    __slots__ = ("base", "slope")

    def __init__(self, base: Loss, slope: float):
        self.base = base
        self.slope = _finite(slope, "shift slope")

    def value(self, x):
        return self.base.value(x) + self.slope * x

    def derivative(self, x):
        return self.base.derivative(x) + self.slope

    def second_derivative(self, x):
        return self.base.second_derivative(x)

    def linear_form(self):
        form = self.base.linear_form()
        if form is None:
            return None
        gain, offset = form
        return gain, offset - self.slope

    def _inverse_guess(self, s):
        return self.base._inverse_guess(s - self.slope)

    def shifted(self, slope):
        if slope == 0.0:
            return self
        return LinearShift(self.base, self.slope + slope)

    def __repr__(self):
        return "LinearShift(%r, slope=%r)" % (self.base, self.slope)


class LossGroup:
    """Several losses sharing one variable, pooled by summing derivatives."""

    __slots__ = ("losses", "_gain", "_offset")

    def __init__(self, losses: Sequence[Loss]):
        self.losses = tuple(losses)
        if not self.losses:
            raise ContractViolationError("a loss group needs at least one member")
        gain = 0.0
        offset = 0.0
        for loss in self.losses:
            form = loss.linear_form()
            if form is None:
                gain = None
                break
            gain += form[0]
            offset += form[1]
        self._gain = gain
        self._offset = offset if gain is not None else None

    def linear_form(self):
        if self._gain is None:
            return None
        return self._gain, self._offset

    def value(self, x):
        return sum(loss.value(x) for loss in self.losses)

    def derivative(self, x):
        if self._gain is not None:
            return self._gain * x - self._offset
        return sum(loss.derivative(x) for loss in self.losses)

    def second_derivative(self, x):
        return sum(loss.second_derivative(x) for loss in self.losses)

    def _inverse_guess(self, s):
        # Linearize every member at 0 to get a cheap starting point.
        gain = 0.0
        offset = 0.0
        for loss in self.losses:
            form = loss.linear_form()
            if form is None:
                gain += loss.second_derivative(0.0)
                offset -= loss.derivative(0.0)
            else:
                gain += form[0]
                offset += form[1]
        return (s + offset) / gain

    def inverse_derivative(self, s: float) -> float:
        """The common point at which the pooled derivative equals s."""
        if self._gain is not None:
            return (s + self._offset) / self._gain
        return solve_increasing(
            self.derivative, self.second_derivative, s, self._inverse_guess(s)
        )


def equilibrium_t(group: LossGroup, boundary_flow: float, attach_loss: Loss) -> float:
    """Parameter value at which a pooled component meets its attached node.

    The component tracks group.inverse_derivative(t + boundary_flow) while
    the attached node tracks attach_loss.inverse_derivative(-t); both are
    monotone in t with opposite directions, so they meet at exactly one t.
    Solved in value space: the meeting value v satisfies

        group.derivative(v) + attach_loss.derivative(v) = boundary_flow,

    whose left side is strictly increasing, and then t = -attach'(v).
    """
    gform = group.linear_form()
    aform = attach_loss.linear_form()
    if gform is not None and aform is not None:
        ggain, goff = gform
        again, aoff = aform
        v = (boundary_flow + goff + aoff) / (ggain + again)
    else:
        v = solve_increasing(
            lambda u: group.derivative(u) + attach_loss.derivative(u),
            lambda u: group.second_derivative(u) + attach_loss.second_derivative(u),
            boundary_flow,
            group._inverse_guess(boundary_flow),
        )
    return -attach_loss.derivative(v)


def loss_from_json(obj) -> Loss:
    """Build a loss from its JSON encoding.

    {"type": "quadratic", "y": 4.0, "w": 1.0} or
    {"type": "quartic", "a": 1.0, "b": 0.25, "c": 0.0}.
    """
    if not isinstance(obj, dict):
        raise MalformedInstanceError("loss must be an object, got %r" % (obj,))
    kind = obj.get("type")
    if kind == "quadratic":
        missing = {"y", "w"} - set(obj)
        if missing:
            raise MalformedInstanceError("quadratic loss missing %s" % sorted(missing))
        return WeightedQuadratic(obj["w"], obj["y"])
    if kind == "quartic":
        missing = {"a", "b", "c"} - set(obj)
        if missing:
            raise MalformedInstanceError("quartic loss missing %s" % sorted(missing))
        return QuarticQuadratic(obj["a"], obj["b"], obj["c"])
    raise MalformedInstanceError("unknown loss type %r" % (kind,))


def loss_to_json(loss: Loss) -> dict:
    if isinstance(loss, WeightedQuadratic):
        return {"type": "quadratic", "y": loss.y, "w": loss.w}
    if isinstance(loss, QuarticQuadratic):
        return {"type": "quartic", "a": loss.a, "b": loss.b, "c": loss.c}
    raise ContractViolationError("loss %r has no JSON encoding" % (loss,))
