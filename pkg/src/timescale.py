"""
Periodic time scales.

A p-periodic time scale is stored as one period's worth of runs. A run is
either a closed continuous interval of length l or an isolated point, and is
followed by a trailing gap before the next run. Times are carried around as
TimePoint(period_index, run_index, local_offset) so isolated points and
period boundaries stay exact after many periods; reals are produced only at
evaluation time.

Presets: real_line ("R"), integers ("Z"), h_lattice ("hZ") and
p_ab ("P(a,b)").
"""

import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.integrate import simpson

from errors import ConfigError, NotInTimeScaleError

CONTINUOUS = "continuous"
POINT = "point"

_DEFAULT_TOL = 1e-9
_PERIOD_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Run:
    """One run of the repeating pattern: a continuous piece or a point, plus its trailing gap."""

    kind: str
    length: float = 0.0
    trailing_gap: float = 0.0

    def __post_init__(self):
        if self.kind == CONTINUOUS:
            if not self.length > 0:
                raise ConfigError(f"Continuous run needs length > 0, got {self.length}")
            if self.trailing_gap < 0:
                raise ConfigError(f"Trailing gap must be >= 0, got {self.trailing_gap}")
        elif self.kind == POINT:
            if self.length != 0:
                raise ConfigError("Point runs have zero length")
            if not self.trailing_gap > 0:
                raise ConfigError(f"Point run needs trailing gap > 0, got {self.trailing_gap}")
        else:
            raise ConfigError(f"Unknown run kind {self.kind!r} (expected 'continuous' or 'point')")

    @property
    def is_continuous(self):
        return self.kind == CONTINUOUS


@dataclass(frozen=True, order=True)
class TimePoint:
    """Structural time: t = anchor + k*p + start(run) + local_offset."""

    period_index: int
    run_index: int
    local_offset: float = 0.0


@dataclass(frozen=True)
class Interval:
    """Continuous stretch [start, end] (local offsets) of one run in one period."""

    period_index: int
    run_index: int
    start: float
    end: float

    @property
    def length(self):
        return self.end - self.start

    def point(self, offset):
        return TimePoint(self.period_index, self.run_index, offset)


@dataclass(frozen=True)
class Jump:
    """Right-scattered point with its graininess."""

    point: TimePoint
    mu: float


@dataclass(frozen=True)
class MeshPiece:
    """Quadrature piece: an interval with an even number of equal steps, or a jump."""

    kind: str
    points: tuple
    step: float


class PeriodicTimeScale:
    """
    A p-periodic time scale built from an ordered pattern of runs.

    Args:
        runs: Sequence of Run covering one period
        anchor: Real time of the start of run 0 in period 0
        period: Expected period; checked against the sum of run lengths and gaps
        tol: Membership tolerance (absolute)
        name: Optional label used in reports
    """

    def __init__(self, runs, anchor=0.0, period=None, tol=_DEFAULT_TOL, name=None):
        runs = tuple(runs)
        if not runs:
            raise ConfigError("A time scale needs at least one run")
        total = math.fsum(r.length + r.trailing_gap for r in runs)
        if period is None:
            period = total
        if not period > 0:
            raise ConfigError(f"Period must be positive, got {period}")
        if abs(total - period) > _PERIOD_SUM_TOL * max(1.0, period):
            raise ConfigError(f"Runs cover {total!r} but the period is {period!r}")
        self.runs = runs
        self.anchor = float(anchor)
        self.period = float(period)
        self.tol = tol
        self.name = name or "custom"
        starts = []
        acc = 0.0
        for run in runs:
            starts.append(acc)
            acc += run.length + run.trailing_gap
        self._starts = tuple(starts)
        self.mu_max = max(r.trailing_gap for r in runs)
        if self.mu_max > self.period:
            raise ConfigError(f"Graininess {self.mu_max} exceeds the period {self.period}")

    def __repr__(self):
        return (
            f"PeriodicTimeScale(name={self.name!r}, period={self.period!r}, "
            f"anchor={self.anchor!r})"
        )

    @property
    def has_continuous_part(self):
        return any(r.is_continuous for r in self.runs)

    @property
    def is_discrete(self):
        return not self.has_continuous_part

    def describe(self):
        """Plain-data summary for reports."""
        return {
            "name": self.name,
            "anchor": self.anchor,
            "period": self.period,
            "mu_max": self.mu_max,
            "runs": [
                {"kind": r.kind, "length": r.length, "trailing_gap": r.trailing_gap}
                for r in self.runs
            ],
        }

    # ── Conversion ───────────────────────────────────────────────────────

    def run_start(self, run_index):
        return self._starts[run_index]

    def locate(self, t, tol=None):
        """
        Map a real time (or a TimePoint) to its TimePoint.

        Raises:
            NotInTimeScaleError: t is farther than tol from every element
        """
        if isinstance(t, TimePoint):
            if not 0 <= t.run_index < len(self.runs):
                raise NotInTimeScaleError(f"Run index {t.run_index} out of range")
            return t
        tol = self.tol if tol is None else tol
        t = float(t)
        k = math.floor((t - self.anchor) / self.period)
        u = (t - self.anchor) - k * self.period
        if u >= self.period - tol:
            return TimePoint(k + 1, 0, 0.0)
        u = max(u, 0.0)
        for j, start in enumerate(self._starts):
            if abs(u - start) <= tol:
                return TimePoint(k, j, 0.0)
        for j, (run, start) in enumerate(zip(self.runs, self._starts, strict=True)):
            if run.is_continuous and start < u <= start + run.length + tol:
                off = u - start
                return TimePoint(k, j, run.length if off >= run.length - tol else off)
        raise NotInTimeScaleError(f"t={t!r} is not in the time scale {self.name}")

    def contains(self, t, tol=None):
        try:
            self.locate(t, tol)
        except NotInTimeScaleError:
            return False
        return True

    def to_real(self, tp):
        tp = self.locate(tp)
        start = self._starts[tp.run_index]
        return self.anchor + tp.period_index * self.period + start + tp.local_offset

    def reduced(self, tp):
        """The representative of tp in period 0."""
        tp = self.locate(tp)
        return TimePoint(0, tp.run_index, tp.local_offset)

    def reduced_real(self, tp):
        """Real time of the period-0 representative, used for evaluating periodic data."""
        tp = self.locate(tp)
        return self.anchor + self._starts[tp.run_index] + tp.local_offset

    def shift(self, tp, periods):
        tp = self.locate(tp)
        return TimePoint(tp.period_index + periods, tp.run_index, tp.local_offset)

    def period_fraction(self, t, s):
        """(t - s)/p computed from the structure, exact for isolated points and run ends."""
        t = self.locate(t)
        s = self.locate(s)
        pos_t = self._starts[t.run_index] + t.local_offset
        pos_s = self._starts[s.run_index] + s.local_offset
        return (t.period_index - s.period_index) + (pos_t - pos_s) / self.period

    # ── Jump operator ────────────────────────────────────────────────────

    def graininess(self, t):
        tp = self.locate(t)
        run = self.runs[tp.run_index]
        if not run.is_continuous:
            return run.trailing_gap
        if tp.local_offset >= run.length:
            return run.trailing_gap
        return 0.0

    def sigma_point(self, t):
        tp = self.locate(t)
        if self.graininess(tp) == 0.0:
            return tp
        j = tp.run_index + 1
        if j == len(self.runs):
            return TimePoint(tp.period_index + 1, 0, 0.0)
        return TimePoint(tp.period_index, j, 0.0)

    def sigma(self, t):
        return self.to_real(self.sigma_point(t))

    def right_scattered_points(self, period_index=0):
        """Right-scattered TimePoints of one period, in order."""
        points = []
        for j, run in enumerate(self.runs):
            if run.trailing_gap > 0:
                points.append(TimePoint(period_index, j, run.length))
        return points

    # ── Walking ──────────────────────────────────────────────────────────

    def segments(self, a, b):
        """
        Yield Interval and Jump pieces that make up [a, b) in order.

        Intervals are continuous stretches; a Jump at tau stands for the step
        from tau to sigma(tau).
        """
        a = self.locate(a)
        b = self.locate(b)
        if b < a:
            raise ValueError(f"segments() needs a <= b, got {a} > {b}")
        k, j, off = a.period_index, a.run_index, a.local_offset
        while True:
            run = self.runs[j]
            last = (k, j) == (b.period_index, b.run_index)
            if run.is_continuous:
                hi = b.local_offset if last else run.length
                if hi > off:
                    yield Interval(k, j, off, hi)
                if not last and run.trailing_gap > 0:
                    yield Jump(TimePoint(k, j, run.length), run.trailing_gap)
            elif not last:
                yield Jump(TimePoint(k, j, 0.0), run.trailing_gap)
            if last:
                return
            j += 1
            if j == len(self.runs):
                j = 0
                k += 1
            off = 0.0

    def mesh(self, a, b, h_max):
        """Quadrature mesh for [a, b): even Simpson subdivisions on intervals, jumps as-is."""
        pieces = []
        for seg in self.segments(a, b):
            if isinstance(seg, Jump):
                pieces.append(MeshPiece("jump", (seg.point,), seg.mu))
                continue
            m = max(2, 2 * math.ceil(seg.length / (2 * h_max) - 1e-12))
            step = seg.length / m
            offsets = [seg.start + i * step for i in range(m)] + [seg.end]
            pieces.append(MeshPiece("interval", tuple(seg.point(o) for o in offsets), step))
        return pieces

    def grid(self, a, b, h_max):
        """
        Ordered TimePoints of T within [a, b].

        Isolated points are included exactly; continuous pieces are split into
        equal steps no longer than h_max, endpoints included.
        """
        if b < a:
            raise ValueError(f"grid() needs a <= b, got {a} > {b}")
        if not h_max > 0:
            raise ValueError(f"h_max must be positive, got {h_max}")
        tol = self.tol
        kmin = math.floor((a - self.anchor) / self.period) - 1
        kmax = math.floor((b - self.anchor) / self.period) + 1
        found = {}
        for k in range(kmin, kmax + 1):
            base = self.anchor + k * self.period
            for j, run in enumerate(self.runs):
                s = base + self._starts[j]
                if not run.is_continuous:
                    if a - tol <= s <= b + tol:
                        found[TimePoint(k, j, 0.0)] = None
                    continue
                e = s + run.length
                lo, hi = max(s, a), min(e, b)
                if hi < lo - tol:
                    continue
                lo_off = 0.0 if lo - s <= tol else lo - s
                hi_off = run.length if e - hi <= tol else hi - s
                if hi_off - lo_off <= tol:
                    offsets = [lo_off]
                else:
                    m = math.ceil((hi_off - lo_off) / h_max - 1e-12)
                    step = (hi_off - lo_off) / m
                    offsets = [lo_off + i * step for i in range(m)] + [hi_off]
                for off in offsets:
                    if off >= run.length and run.trailing_gap == 0:
                        continue
                    found[TimePoint(k, j, off)] = None
        return sorted(found)

    # ── Integration ──────────────────────────────────────────────────────

    def delta_integral(self, f, a, b, h_max):
        """
        Delta integral of f over [a, b).

        Composite Simpson on continuous pieces plus mu(tau)*f(tau) at every
        right-scattered tau in [a, b). f receives real times and may return
        scalars or arrays.
        """
        total = None
        for piece in self.mesh(a, b, h_max):
            if piece.kind == "jump":
                part = piece.step * np.asarray(f(self.to_real(piece.points[0])), dtype=complex)
            else:
                ys = np.array([f(self.to_real(p)) for p in piece.points], dtype=complex)
                part = simpson(ys, dx=piece.step, axis=0)
            total = part if total is None else total + part
        if total is None:
            total = 0.0 * np.asarray(f(self.to_real(a)), dtype=complex)
        total = np.asarray(total)
        return complex(total) if total.ndim == 0 else total

    def h_polynomials(self, k_max, t, t0):
        """
        Generalized polynomials h_0..h_{k_max}(t, t0).

        On a continuous stretch of length L the h_k obey a Taylor shift
        (h_k' = h_{k-1}); across a jump h_k(sigma) = h_k + mu*h_{k-1}. Both are
        the exact Delta integral of h_{k-1}.
        """
        if k_max < 0:
            raise ValueError(f"k must be >= 0, got {k_max}")
        t = self.locate(t)
        t0 = self.locate(t0)
        if t < t0:
            raise ValueError("h_k(t, t0) is defined here for t >= t0 only")
        values = [1.0] + [0.0] * k_max
        for seg in self.segments(t0, t):
            if isinstance(seg, Jump):
                tail = [values[j] + seg.mu * values[j - 1] for j in range(1, k_max + 1)]
                values = [values[0]] + tail
            else:
                length = seg.length
                coeffs = [length**i / math.factorial(i) for i in range(k_max + 1)]
                values = [
                    sum(values[j - i] * coeffs[i] for i in range(j + 1)) for j in range(k_max + 1)
                ]
        return values

    def h_polynomial(self, k, t, t0):
        return self.h_polynomials(k, t, t0)[k]

    def log_scalar_exp_constant(self, c, t, t0):
        """log e_c(t, t0) for a real constant c with 1 + mu*c > 0 everywhere."""
        total = 0.0
        for seg in self.segments(t0, t):
            if isinstance(seg, Jump):
                total += math.log1p(seg.mu * c)
            else:
                total += c * seg.length
        return total

    # ── Differentiation ──────────────────────────────────────────────────

    def delta_derivative(self, fn, t, step, dense=False):
        """
        Delta derivative of fn (a map TimePoint -> array) at t.

        Right-scattered points use (fn(sigma) - fn(t))/mu. Inside a continuous
        run a centered difference with step min(step, distance to the run
        ends) is used; too close to an end it switches to a second-order
        one-sided difference. With dense=True the derivative is taken along
        the continuous run even at its right end, where the point itself is
        right-scattered.
        """
        tp = self.locate(t)
        run = self.runs[tp.run_index]
        if dense and not run.is_continuous:
            raise ValueError(f"dense derivative needs a continuous run, got {tp}")
        mu = 0.0 if dense else self.graininess(tp)
        if mu > 0:
            return (np.asarray(fn(self.sigma_point(tp))) - np.asarray(fn(tp))) / mu
        off = tp.local_offset
        back, fwd = off, run.length - off

        def at(o):
            return np.asarray(fn(TimePoint(tp.period_index, tp.run_index, o)))

        if min(back, fwd) >= step / 4:
            h = min(step, back, fwd)
            return (at(off + h) - at(off - h)) / (2 * h)
        if fwd >= back:
            h = min(step, fwd / 2)
            return (-3 * at(off) + 4 * at(off + h) - at(off + 2 * h)) / (2 * h)
        h = min(step, back / 2)
        return (3 * at(off) - 4 * at(off - h) + at(off - 2 * h)) / (2 * h)


# =============================================================================
# MODULE-LEVEL OPERATIONS
# =============================================================================


def contains(ts, t, tol=None):
    return ts.contains(t, tol)


def graininess(ts, t):
    return ts.graininess(t)


def sigma(ts, t):
    return ts.sigma(t)


def grid(ts, a, b, h_max):
    return ts.grid(a, b, h_max)


def delta_integral(ts, f, a, b, h_max):
    return ts.delta_integral(f, a, b, h_max)


def h_polynomial(ts, k, t, t0):
    return ts.h_polynomial(k, t, t0)


def h_polynomials(ts, k_max, t, t0):
    return ts.h_polynomials(k_max, t, t0)


def delta_derivative(ts, fn, t, step, dense=False):
    return ts.delta_derivative(fn, t, step, dense)


# =============================================================================
# PRESETS
# =============================================================================


def real_line(period, anchor=0.0, tol=_DEFAULT_TOL):
    """R viewed as a p-periodic time scale: one continuous run with no gap."""
    return PeriodicTimeScale([Run(CONTINUOUS, period, 0.0)], anchor, period, tol, name="R")


def h_lattice(h, period=None, anchor=0.0, tol=_DEFAULT_TOL):
    """hZ with a period that is a whole multiple of h (default: h)."""
    if not h > 0:
        raise ConfigError(f"Lattice spacing must be positive, got {h}")
    if period is None:
        period = h
    count = round(period / h)
    if count < 1 or abs(count * h - period) > _PERIOD_SUM_TOL * max(1.0, period):
        raise ConfigError(f"Period {period} is not a whole multiple of the spacing {h}")
    name = "Z" if h == 1 else "hZ"
    return PeriodicTimeScale([Run(POINT, 0.0, h)] * count, anchor, period, tol, name=name)


def integers(period=1, anchor=0.0, tol=_DEFAULT_TOL):
    return h_lattice(1.0, float(period), anchor, tol)


def p_ab(a, b, period=None, anchor=0.0, tol=_DEFAULT_TOL):
    """P_{a,b}: continuous runs of length a separated by gaps b."""
    cell = a + b
    if period is None:
        period = cell
    count = round(period / cell)
    if count < 1 or abs(count * cell - period) > _PERIOD_SUM_TOL * max(1.0, period):
        raise ConfigError(f"Period {period} is not a whole multiple of a+b={cell}")
    return PeriodicTimeScale(
        [Run(CONTINUOUS, a, b)] * count, anchor, period, tol, name=f"P({a!r},{b!r})"
    )


_PAB_RE = re.compile(r"^P\(\s*([^,]+?)\s*,\s*([^)]+?)\s*\)$")


def from_preset(preset, period=None, h=None, anchor=0.0, tol=_DEFAULT_TOL):
    """
    Build a time scale from a canonical preset name.

    Args:
        preset: "R", "Z", "hZ" or "P(a,b)"
        period: Period (required for "R"; a multiple of the cell for the lattices and P(a,b))
        h: Spacing for "hZ"
        anchor: Anchor time
    """
    if preset == "R":
        if period is None:
            raise ConfigError("Preset 'R' needs a period")
        return real_line(period, anchor, tol)
    if preset == "Z":
        return integers(1 if period is None else period, anchor, tol)
    if preset == "hZ":
        if h is None:
            raise ConfigError("Preset 'hZ' needs 'h'")
        return h_lattice(h, period, anchor, tol)
    match = _PAB_RE.match(preset or "")
    if match:
        try:
            a, b = float(match.group(1)), float(match.group(2))
        except ValueError as e:
            raise ConfigError(f"Bad P(a,b) parameters in {preset!r}") from e
        return p_ab(a, b, period, anchor, tol)
    raise ConfigError(f"Unknown time scale preset {preset!r}")
