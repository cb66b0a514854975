"""Post-processing of evolution runs: peaks, tracks, speeds, ripple."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientDataError, MismatchedRunError, WindowsCoverDomainError
from .evolve import PeriodicField, RunResult

__all__ = [
    "Peak",
    "PeakTrack",
    "RippleReport",
    "find_peaks",
    "peak_half_width",
    "track_peaks",
    "estimate_speed",
    "ripple_amplitude",
    "measure_ripple",
    "refinement_compare",
    "analyze_run",
]


@dataclass
class Peak:
    position: float
    height: float
    sign: int
    index: int


def find_peaks(field: PeriodicField, threshold: float) -> list[Peak]:
    """Local maxima of ``|u|`` above ``threshold``.

    The position and height come from the parabola through the three
    samples around each discrete maximum; ``sign`` is the sign of ``u``
    there. Peaks are returned in grid order.
    """
    if not threshold > 0:
        raise ValueError("threshold must be positive")
    a = np.abs(field.u)
    left, right = np.roll(a, 1), np.roll(a, -1)
    idx = np.nonzero((a > threshold) & (a >= left) & (a > right))[0]
    peaks = []
    for i in idx:
        am, a0, ap = left[i], a[i], right[i]
        curv = am - 2.0 * a0 + ap
        off = 0.5 * (am - ap) / curv if curv < 0 else 0.0
        pos = field.x[i] + off * field.h
        pos = field.x_left + (pos - field.x_left) % field.length
        height = a0 - 0.25 * (am - ap) * off
        peaks.append(Peak(float(pos), float(height), int(np.sign(field.u[i])), int(i)))
    return peaks


def peak_half_width(field: PeriodicField, peak: Peak) -> float:
    """Half width at half maximum around a peak (mean of both sides)."""
    a = np.abs(field.u)
    half = 0.5 * peak.height
    M = field.M
    widths = []
    for direction in (1, -1):
        prev = a[peak.index]
        for k in range(1, M // 2):
            cur = a[(peak.index + direction * k) % M]
            if cur < half:
                frac = (prev - half) / (prev - cur)
                widths.append((k - 1 + frac) * field.h)
                break
            prev = cur
        else:
            widths.append(0.5 * field.length)
    return float(np.mean(widths))


@dataclass
class PeakTrack:
    """Positions and heights of one wave over time.

    Positions are unwrapped (continuous across the periodic seam).
    ``active`` is False for snapshots where the wave was not identified,
    typically while it overlaps another wave.
    """

    sign: int
    initial_height: float
    speed_hint: float = 0.0
    times: list = field(default_factory=list)
    positions: list = field(default_factory=list)
    heights: list = field(default_factory=list)
    active: list = field(default_factory=list)

    def append(self, t, position, height, active=True):
        self.times.append(float(t))
        self.positions.append(float(position))
        self.heights.append(float(height))
        self.active.append(bool(active))

    def last_active(self):
        for k in range(len(self.times) - 1, -1, -1):
            if self.active[k]:
                return k
        return None

    def velocity(self) -> float:
        """Recent velocity from the last two active points, or the hint."""
        ks = [k for k in range(len(self.times)) if self.active[k]][-2:]
        if len(ks) == 2 and ks[1] == ks[0] + 1:
            dt = self.times[ks[1]] - self.times[ks[0]]
            if dt > 0:
                return (self.positions[ks[1]] - self.positions[ks[0]]) / dt
        return self.speed_hint

    def to_dict(self) -> dict:
        return {
            "sign": self.sign,
            "initial_height": self.initial_height,
            "points": [
                {"t": t, "position": p, "height": hgt, "active": a}
                for t, p, hgt, a in zip(self.times, self.positions, self.heights, self.active)
            ],
        }


def _unwrap_near(pos, target, L):
    return pos + L * round((target - pos) / L)


def track_peaks(
    snapshots,
    threshold: float,
    speeds=None,
    height_tolerance: float = 0.1,
    resume_radius: float | None = None,
) -> list[PeakTrack]:
    """Follow the waves present in the first snapshot through a run.

    A track continues with the nearest peak of the same sign whose jump
    from the last position is at most ``|speed| dt + 2h`` and whose height
    is within ``height_tolerance`` of the initial height. Otherwise the
    track is suspended (collisions are not guessed through); it resumes
    when a matching peak appears within ``resume_radius`` (default a quarter
    of the domain) of the position extrapolated from the last reliable
    point. Collision phase shifts can be many widths, so the resume radius
    is generous and identity rests on the height gate.

    Parameters
    ----------
    snapshots : sequence of PeriodicField
    threshold : float
        Detection threshold for :func:`find_peaks`.
    speeds : sequence of float, optional
        Expected speed for each initial peak (in grid order); used until a
        measured velocity is available.
    """
    snapshots = list(snapshots)
    if not snapshots:
        return []
    first = snapshots[0]
    L, h = first.length, first.h
    peaks0 = find_peaks(first, threshold)
    if resume_radius is None:
        resume_radius = 0.25 * L
    tracks = []
    for k, p in enumerate(peaks0):
        hint = float(speeds[k]) if speeds is not None else 0.0
        tr = PeakTrack(sign=p.sign, initial_height=p.height, speed_hint=hint)
        tr.append(first.t, p.position, p.height)
        tracks.append(tr)

    for snap in snapshots[1:]:
        peaks = find_peaks(snap, threshold)
        claims: dict[int, list] = {}
        for ti, tr in enumerate(tracks):
            k = tr.last_active()
            dt = snap.t - tr.times[k]
            v = tr.velocity()
            pred = tr.positions[k] + v * dt
            consecutive = k == len(tr.times) - 1
            radius = abs(v) * dt + 2.0 * h if consecutive else resume_radius
            best, best_d = None, math.inf
            for pi, p in enumerate(peaks):
                if p.sign != tr.sign:
                    continue
                if abs(p.height - tr.initial_height) > height_tolerance * tr.initial_height:
                    continue
                pos = _unwrap_near(p.position, pred, L)
                jump = abs(pos - tr.positions[k]) if consecutive else abs(pos - pred)
                d = abs(pos - pred)
                if jump <= radius and d < best_d:
                    best, best_d = (pi, pos), d
            if best is not None:
                claims.setdefault(best[0], []).append((ti, best[1]))
        matched = {}
        for pi, lst in claims.items():
            if len(lst) == 1:
                matched[lst[0][0]] = (pi, lst[0][1])
        for ti, tr in enumerate(tracks):
            if ti in matched:
                pi, pos = matched[ti]
                tr.append(snap.t, pos, peaks[pi].height)
            else:
                k = tr.last_active()
                pred = tr.positions[k] + tr.velocity() * (snap.t - tr.times[k])
                tr.append(snap.t, pred, float("nan"), active=False)
    return tracks


def estimate_speed(track: PeakTrack, t_window=None):
    """Least-squares speed over ``t_window = (t0, t1)``.

    Returns ``(speed, max_abs_fit_residual)``. The window must contain at
    least three reliable points and no suspension of the track.
    """
    t = np.asarray(track.times)
    lo, hi = (-math.inf, math.inf) if t_window is None else t_window
    sel = (t >= lo - 1e-12) & (t <= hi + 1e-12)
    active = np.asarray(track.active)
    if np.count_nonzero(sel & active) < 3:
        raise InsufficientDataError("need at least three tracked points in the window")
    first, last = np.nonzero(sel & active)[0][[0, -1]]
    if not np.all(active[first : last + 1]):
        raise InsufficientDataError("track was suspended inside the window (collision)")
    tt = t[first : last + 1]
    xx = np.asarray(track.positions)[first : last + 1]
    slope, icept = np.polyfit(tt, xx, 1)
    resid = float(np.max(np.abs(xx - (slope * tt + icept))))
    return float(slope), resid


@dataclass
class RippleReport:
    t: float
    ripple_amplitude: float
    relative_ripple: float
    window_half_width: list
    location: float
    reference_amplitude: float

    def to_dict(self) -> dict:
        return {
            "t": self.t,
            "ripple_amplitude": self.ripple_amplitude,
            "relative_ripple": self.relative_ripple,
            "window_half_width": list(self.window_half_width),
            "location": self.location,
            "reference_amplitude": self.reference_amplitude,
        }


def _background(field, peaks, profiles):
    """Superposition of the closest-amplitude reference wave at each peak."""
    bg = np.zeros(field.M)
    if not profiles:
        return bg
    for p in peaks:
        prof = min(profiles, key=lambda q: abs(q.amplitude - p.height))
        bg += p.sign * prof(field.wrap(field.x - p.position))
    return bg


def ripple_amplitude(
    field: PeriodicField,
    peaks,
    window_half_width,
    reference_amplitude: float | None = None,
    profiles=None,
) -> RippleReport:
    """Largest deviation from the soliton content outside the peak windows.

    ``window_half_width`` is a scalar or one value per peak. With
    ``profiles`` (solved waves of the amplitudes present), the wave whose
    amplitude is closest to each peak height is placed at the peak and
    subtracted first, so slowly decaying tails are not counted as ripple.
    ``relative_ripple`` divides by ``reference_amplitude`` (default: the
    smallest peak height).

    Raises
    ------
    WindowsCoverDomainError
        When every grid point lies inside some window.
    """
    peaks = list(peaks)
    widths = np.broadcast_to(np.asarray(window_half_width, dtype=float), (len(peaks),))
    if np.any(widths <= 0):
        raise ValueError("window half-width must be positive")
    outside = np.ones(field.M, dtype=bool)
    for p, w in zip(peaks, widths):
        outside &= np.abs(field.wrap(field.x - p.position)) > w
    if not np.any(outside):
        raise WindowsCoverDomainError("peak windows cover the whole domain")
    resid = np.abs(field.u - _background(field, peaks, profiles))
    resid = np.where(outside, resid, -1.0)
    j = int(np.argmax(resid))
    amp = float(resid[j])
    if reference_amplitude is None:
        reference_amplitude = min((p.height for p in peaks), default=1.0)
    return RippleReport(
        t=field.t,
        ripple_amplitude=amp,
        relative_ripple=amp / reference_amplitude,
        window_half_width=[float(w) for w in widths],
        location=float(field.x[j]),
        reference_amplitude=float(reference_amplitude),
    )


def measure_ripple(
    field: PeriodicField,
    reference_amplitude: float,
    profiles=None,
    threshold: float | None = None,
    window_factor: float = 1.5,
) -> RippleReport:
    """Ripple with the default conventions.

    Peaks above ``0.1 * reference_amplitude`` are windowed with
    ``window_factor`` times their measured half width at half maximum.
    """
    if threshold is None:
        threshold = 0.1 * reference_amplitude
    peaks = find_peaks(field, threshold)
    widths = [window_factor * peak_half_width(field, p) for p in peaks]
    return ripple_amplitude(field, peaks, widths, reference_amplitude, profiles)


def _run_profiles(run: RunResult):
    return [item[0] for item in run.embedded]


def _run_min_amplitude(run: RunResult) -> float:
    amps = [item[0].amplitude for item in run.embedded]
    if amps:
        return min(amps)
    peaks = find_peaks(run.snapshots[0], 1e-12)
    return min((p.height for p in peaks), default=1.0)


QUANTITIES = ("ripple_amplitude", "trailing_oscillation_amplitude")


def refinement_compare(run_coarse: RunResult, run_fine: RunResult, quantity="ripple_amplitude", t=None) -> float:
    """``quantity(fine) / quantity(coarse)`` at snapshot time ``t`` (default: last).

    Both named quantities are the absolute ripple of :func:`measure_ripple`
    after subtracting the embedded waves; the trailing oscillations of a
    soliton-antisoliton collision are measured the same way. A callable
    ``quantity(run, snapshot) -> float`` may be passed instead.
    """
    a, b = run_coarse, run_fine
    if a.model != b.model:
        raise MismatchedRunError("runs use different models")
    fa, fb = a.snapshots[0], b.snapshots[0]
    if not (math.isclose(fa.x_left, fb.x_left) and math.isclose(fa.x_right, fb.x_right)):
        raise MismatchedRunError("runs use different domains")
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-9):
        raise MismatchedRunError("runs have different snapshot times")
    if fb.h > fa.h * (1 + 1e-9):
        raise MismatchedRunError("second run must not be coarser than the first")
    ca = [(round(c, 9), s) for _, c, s in a.embedded]
    cb = [(round(c, 9), s) for _, c, s in b.embedded]
    amps_a = [round(p.amplitude, 9) for p, _, _ in a.embedded]
    amps_b = [round(p.amplitude, 9) for p, _, _ in b.embedded]
    if ca != cb or amps_a != amps_b:
        raise MismatchedRunError("runs start from different initial conditions")
    k = len(a.times) - 1 if t is None else int(np.argmin(np.abs(np.asarray(a.times) - t)))

    if callable(quantity):
        qa, qb = quantity(a, a.snapshots[k]), quantity(b, b.snapshots[k])
    elif quantity in QUANTITIES:
        ref = _run_min_amplitude(a)
        qa = measure_ripple(a.snapshots[k], ref, _run_profiles(a)).ripple_amplitude
        qb = measure_ripple(b.snapshots[k], ref, _run_profiles(b)).ripple_amplitude
    else:
        raise ValueError(f"unknown quantity {quantity!r}")
    if qa == 0:
        return 1.0 if qb == 0 else math.inf
    return float(qb / qa)


def _isolated(tracks, L, min_distance, n):
    """Snapshots where every track is active and no two waves are close."""
    ok = np.ones(n, dtype=bool)
    for k in range(n):
        if not all(tr.active[k] for tr in tracks):
            ok[k] = False
            continue
        pos = [tr.positions[k] for tr in tracks]
        for i in range(len(pos)):
            for j in range(i + 1, len(pos)):
                d = abs((pos[i] - pos[j] + 0.5 * L) % L - 0.5 * L)
                if d < min_distance:
                    ok[k] = False
    return ok


def analyze_run(run: RunResult, threshold: float | None = None) -> dict:
    """Tracks, speeds, elasticity and ripple of a run, as plain data."""
    ref = _run_min_amplitude(run)
    if threshold is None:
        threshold = 0.1 * ref
    speeds = None
    first_peaks = find_peaks(run.snapshots[0], threshold)
    if run.embedded and len(run.embedded) == len(first_peaks):
        # embedded list order need not match grid order
        speeds = []
        for p in first_peaks:
            prof = min(run.embedded, key=lambda e: abs(run.snapshots[0].wrap(p.position - e[1])))[0]
            speeds.append(prof.lam)
    tracks = track_peaks(run.snapshots, threshold, speeds=speeds)
    first = run.snapshots[0]
    widths = [peak_half_width(first, p) for p in first_peaks] or [first.h]
    all_active = _isolated(tracks, first.length, 4.0 * max(widths), len(run.times))
    # leading / trailing stretches where every wave travels alone
    n_lead = len(all_active) if np.all(all_active) else int(np.argmin(all_active))
    n_tail = len(all_active) if np.all(all_active) else int(np.argmin(all_active[::-1]))
    t = run.times
    speed_rows = []
    for tr in tracks:
        row = {"initial_height": tr.initial_height, "sign": tr.sign}
        for label, ok, window in (
            ("before", n_lead >= 3, (t[0], t[max(n_lead - 1, 0)])),
            ("after", n_tail >= 3 and n_tail < len(t), (t[len(t) - n_tail], t[-1])),
        ):
            if ok:
                v, res = estimate_speed(tr, window)
                row[f"speed_{label}"] = v
                row[f"fit_residual_{label}"] = res
                row[f"window_{label}"] = list(window)
            else:
                row[f"speed_{label}"] = None
        final = tr.heights[-1] if tr.active[-1] else None
        row["final_height"] = final
        row["height_change"] = None if final is None else (final - tr.initial_height) / tr.initial_height
        speed_rows.append(row)
    ripples = []
    for snap in run.snapshots:
        try:
            ripples.append(measure_ripple(snap, ref, _run_profiles(run)).to_dict())
        except WindowsCoverDomainError:
            ripples.append(None)
    final_ripple = ripples[-1]
    return {
        "n_snapshots": len(run.snapshots),
        "times": list(run.times),
        "mass_drift": run.mass_drift(),
        "momentum_drift": run.momentum_drift(),
        "tracks": [tr.to_dict() for tr in tracks],
        "speeds": speed_rows if len(run.snapshots) > 1 else [],
        "ripple": ripples,
        "relative_ripple": None if final_ripple is None else final_ripple["relative_ripple"],
        "reference_amplitude": ref,
    }
