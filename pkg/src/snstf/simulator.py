"""Channel model, expected-count ledgers and a pulse-level Monte Carlo.

Two modes share one detector model (threshold detectors, Poissonian light,
independent dark counts):

* :func:`expected_ledger` integrates click probabilities over the relative
  phase and returns real-valued expected counts.  Phase tracking is taken
  as ideal, so the slices select the true relative phase.
* :func:`monte_carlo_run` samples every pulse of every frame, including
  phase drift and the reference pulses used to estimate it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import trapezoid

from .capacity import fiber_transmittance, plob_bound, tgw_bound
from .decoy import IntensityProbabilityConfig, SecurityBudget, key_rate
from .errors import DomainError, QuadratureError
from .ledger import CountsLedger
from .phase import (REFERENCE_PHASES, DriftProcessParams, PhaseEstimate, ReferenceWindowCounts,
                    estimate_phase, wrap_phase)
from .sifting import EVENT_DTYPE, SliceConfig, build_ledger

# Transmittances measured on the test bed.  Optics are listed per input
# (A/B), beam-splitter entries per input and output channel, detector
# efficiencies per channel for the first and second run.
CHARACTERIZATION = {
    "PC": {"A": 0.942, "B": 0.928},
    "PBS": {"A": 0.911, "B": 0.865},
    "BS": {"A": (0.369, 0.386), "B": (0.391, 0.414)},
    "SNSPD": {"first": (0.753, 0.766), "second": (0.580, 0.380)},
}

# Fiber loss implied by the 150 km spools of the second run (0.0015 each).
DEFAULT_ATTENUATION = -10 * math.log10(0.0015) / 150
N_PHASES = 16
BLOCK_FRAMES = 200


def system_efficiency(side: str, run: str = "second") -> float:
    """Optics times mean detector efficiency for one input of the beam splitter."""
    c = CHARACTERIZATION
    det = sum(c["SNSPD"][run]) / 2
    return c["PC"][side] * c["PBS"][side] * sum(c["BS"][side]) * det


@dataclass(frozen=True)
class ChannelModel:
    """End-to-end channel seen by the two detectors.

    ``eta_A`` and ``eta_B`` include fiber, optics and detector efficiency.
    ``efficiency_scale`` is an optional dead-time correction applied to
    both sides; it is 1 (off) by default.
    """

    eta_A: float
    eta_B: float
    dark_prob: float = 1e-7
    misalignment: float = 0.0
    drift: DriftProcessParams = field(default_factory=DriftProcessParams)
    efficiency_scale: float = 1.0

    def __post_init__(self):
        problems = []
        for name in ("eta_A", "eta_B"):
            v = getattr(self, name)
            if not 0 < v <= 1:
                problems.append(f"{name} must lie in (0, 1], got {v}")
        if not 0 <= self.dark_prob < 1:
            problems.append(f"dark_prob must lie in [0, 1), got {self.dark_prob}")
        if not 0 <= self.misalignment < 0.5:
            problems.append(f"misalignment must lie in [0, 0.5), got {self.misalignment}")
        if not 0 < self.efficiency_scale <= 1:
            problems.append(f"efficiency_scale must lie in (0, 1], got {self.efficiency_scale}")
        if problems:
            raise DomainError("; ".join(problems))

    @property
    def visibility(self) -> float:
        return 1 - 2 * self.misalignment

    @property
    def etas(self):
        return self.eta_A * self.efficiency_scale, self.eta_B * self.efficiency_scale


@dataclass(frozen=True)
class FrameSchedule:
    """Timing of one 5 us frame: signal slots, reference slots, recovery."""

    period: float = 5e-6
    n_signal: int = 100
    signal_width: float = 2e-9
    signal_interval: float = 30e-9
    n_ref_slots: int = 4
    ref_slot: float = 300e-9
    recovery: float = 0.8e-6
    mu_ref: float | None = None
    ref_width: float = 300e-9
    frames_per_window: int = 2

    def __post_init__(self):
        signal_span = self.n_signal * self.signal_interval
        if self.n_ref_slots != 4:
            raise DomainError("the reference sequence has exactly four slots")
        if signal_span > self.period - self.n_ref_slots * self.ref_slot - self.recovery + 1e-15:
            raise DomainError("signal slots overrun the reference section")
        layout = signal_span + self.n_ref_slots * self.ref_slot + self.recovery
        if abs(layout - self.period) > 1e-12:
            raise DomainError(f"slot layout sums to {layout:.3e} s, not the period {self.period:.3e} s")
        if self.frames_per_window < 1:
            raise DomainError("frames_per_window must be at least 1")

    @property
    def signal_span(self) -> float:
        return self.n_signal * self.signal_interval

    @property
    def window_duration(self) -> float:
        return self.frames_per_window * self.period


def reference_intensity(ch: ChannelModel, detections_per_frame: float = 20.0, n_slots: int = 4) -> float:
    """Reference mean photon number per slot for a target count on detector 1.

    Averaged over the fiber phase, detector 1 sees half of
    ``eta_A mu + eta_B mu`` per slot.
    """
    ea, eb = ch.etas
    return detections_per_frame / (n_slots * 0.5 * (ea + eb))


# -- detector model ---------------------------------------------------------------

def port_intensities(mu_A, mu_B, phi, ch: ChannelModel):
    """Mean photon numbers ``(I_plus, I_minus)`` at the two output ports."""
    ea, eb = ch.etas
    a = ea * np.asarray(mu_A, dtype=float)
    b = eb * np.asarray(mu_B, dtype=float)
    cross = ch.visibility * np.sqrt(a * b) * np.cos(phi)
    return 0.5 * (a + b) + cross, 0.5 * (a + b) - cross


def click_probs(mu_A, mu_B, phi, ch: ChannelModel):
    """Click probabilities of detector 1 (constructive port) and detector 2."""
    if np.any(np.asarray(mu_A) < 0) or np.any(np.asarray(mu_B) < 0):
        raise DomainError("intensities must be non-negative")
    i_plus, i_minus = port_intensities(mu_A, mu_B, phi, ch)
    keep = 1 - ch.dark_prob
    p1 = 1 - keep * np.exp(-np.maximum(i_plus, 0.0))
    p2 = 1 - keep * np.exp(-np.maximum(i_minus, 0.0))
    return p1, p2


def single_click_probs(mu_A, mu_B, phi, ch: ChannelModel):
    """Probabilities that only detector 1, or only detector 2, clicks."""
    p1, p2 = click_probs(mu_A, mu_B, phi, ch)
    return p1 * (1 - p2), p2 * (1 - p1)


def phase_average(func, lo: float, hi: float, rtol: float = 1e-9, n0: int = 360, max_doublings: int = 16):
    """Mean of ``func`` over ``[lo, hi]`` by the trapezoid rule with node doubling.

    ``func`` maps an array of phases to an array (or tuple of arrays).
    Raises :class:`QuadratureError` if a doubling still changes any component
    by more than ``rtol`` relative after ``max_doublings``.
    """
    def evaluate(n):
        x = np.linspace(lo, hi, n + 1)
        vals = np.atleast_2d(np.asarray(func(x), dtype=float))
        return trapezoid(vals, x, axis=-1) / (hi - lo)

    n = n0
    prev = evaluate(n)
    for _ in range(max_doublings):
        n *= 2
        cur = evaluate(n)
        scale = np.maximum(np.abs(cur), np.finfo(float).tiny)
        if np.all(np.abs(cur - prev) <= rtol * scale):
            return cur
        prev = cur
    raise QuadratureError(f"phase quadrature did not reach {rtol:g} relative after {n} nodes")


def mean_single_click_closed_form(mu_A, mu_B, ch: ChannelModel):
    """Phase-averaged single-click probability per detector, via Bessel I0.

    Uses the mean of ``exp(c cos phi)`` over a uniform phase, ``I0(c)``.
    """
    from scipy.special import i0

    ea, eb = ch.etas
    a, b = ea * mu_A, eb * mu_B
    keep = 1 - ch.dark_prob
    c = ch.visibility * math.sqrt(a * b)
    one = keep * math.exp(-(a + b) / 2) * i0(c) - keep * keep * math.exp(-(a + b))
    return one, one


# -- expected ledger -------------------------------------------------------------

def _party_dist(cfg: IntensityProbabilityConfig):
    """``(basis, digit, probability)`` triples for one party."""
    out = []
    for digit, p in enumerate((cfg.p0, cfg.p1, cfg.p2)):
        out.append(("X", digit, cfg.pX * p))
    out.append(("Z", 0, (1 - cfg.pX) * (1 - cfg.pz_send)))
    out.append(("Z", 3, (1 - cfg.pX) * cfg.pz_send))
    return out


def expected_ledger(cfg_a: IntensityProbabilityConfig, cfg_b: IntensityProbabilityConfig, ch: ChannelModel,
                    slice_cfg: SliceConfig, n_total: float, label: str = "expected",
                    rtol: float = 1e-9) -> CountsLedger:
    """Expected counts for ``n_total`` pulse pairs.

    Detection yields are phase averages of :func:`single_click_probs`; the
    digital gate keeps a fraction ``slice_cfg.r_gate`` of every category.
    Slice counts integrate over the wedges around 0 and pi only.
    """
    if not n_total > 0:
        raise DomainError(f"N_total must be positive, got {n_total}")
    gate = slice_cfg.r_gate
    cache = {}

    def yields(mu_a, mu_b):
        key = (mu_a, mu_b)
        if key not in cache:
            cache[key] = phase_average(lambda x: single_click_probs(mu_a, mu_b, x, ch), 0.0, 2 * math.pi, rtol)
        return cache[key]

    sent, detected = {"ZZ": 0.0}, {}
    zz_err = zz_ok = 0.0
    valid = np.zeros(2)
    for ba, da, pa in _party_dist(cfg_a):
        for bb, db, pb in _party_dist(cfg_b):
            n_pairs = n_total * pa * pb
            y = yields(cfg_a.intensity(da), cfg_b.intensity(db))
            valid += gate * n_pairs * y
            hits = gate * n_pairs * float(y.sum())
            if ba == "Z" and bb == "Z":
                sent["ZZ"] += n_pairs
                if (da == 3) != (db == 3):
                    zz_ok += hits
                else:
                    zz_err += hits
                continue
            code = f"{ba}{bb}{da}{db}"
            sent[code] = sent.get(code, 0.0) + n_pairs
            detected[code] = detected.get(code, 0.0) + hits

    Ds = slice_cfg.Ds
    n11 = sent["XX11"]
    frac = 2 * Ds / (2 * math.pi)
    mu1a, mu1b = cfg_a.mu1, cfg_b.mu1
    plus = phase_average(lambda x: single_click_probs(mu1a, mu1b, x, ch), -Ds, Ds, rtol)
    minus = phase_average(lambda x: single_click_probs(mu1a, mu1b, x, ch), math.pi - Ds, math.pi + Ds, rtol)
    plus, minus = gate * frac * n11 * plus, gate * frac * n11 * minus
    slice_detected = (float(plus[0] + minus[0]), float(plus[1] + minus[1]))
    if slice_cfg.plus_port == 1:
        slice_correct = (float(plus[0]), float(minus[1]))
    else:
        slice_correct = (float(minus[0]), float(plus[1]))

    params = {
        "mu1": cfg_a.mu1, "mu2": cfg_a.mu2, "muz": cfg_a.muz, "p_X": cfg_a.pX,
        "p_0": cfg_a.p0, "p_1": cfg_a.p1, "p_2": cfg_a.p2, "p_z1": cfg_a.pz_send,
        "Ds_deg": slice_cfg.Ds_deg, "rc": slice_cfg.rc_max, "r_gate": gate,
        "eta_A": ch.eta_A, "eta_B": ch.eta_B, "dark_count": ch.dark_prob, "misalignment": ch.misalignment,
    }
    return CountsLedger(
        sent=sent, detected=detected, slice_detected=slice_detected, slice_correct=slice_correct,
        zz_error=zz_err, zz_correct=zz_ok, valid=(float(valid[0]), float(valid[1])),
        n_total=n_total, label=label, parameters=params,
    )


def single_photon_truth(ch: ChannelModel, Ds: float, r_gate: float = 1.0):
    """True single-photon yield and phase-flip error rate of the model.

    ``s1`` averages the yields with one photon from Alice or from Bob.
    ``e1`` is the wrong-port single-click rate of the single-photon
    superposition, averaged over the plus slice (the minus slice is its
    mirror image), divided by ``s1``.
    """
    ea, eb = ch.etas
    d = ch.dark_prob
    s10 = ea * (1 - d) + (1 - ea) * 2 * d * (1 - d)
    s01 = eb * (1 - d) + (1 - eb) * 2 * d * (1 - d)
    s1 = 0.5 * (s10 + s01)
    lost = 1 - 0.5 * (ea + eb)
    v = ch.visibility

    def wrong(x):
        p2 = 0.25 * (ea + eb - 2 * v * math.sqrt(ea * eb) * np.cos(x))
        return p2 * (1 - d) + lost * d * (1 - d)

    err = float(phase_average(wrong, -Ds, Ds)[0])
    return r_gate * s1, err / s1


def z_collision_error_rate(cfg_a: IntensityProbabilityConfig, cfg_b: IntensityProbabilityConfig,
                           ch: ChannelModel) -> float:
    """Closed-form Z-basis error rate (both sent / neither sent over all)."""
    pa, pb = cfg_a.pz_send, cfg_b.pz_send

    def y(mu_a, mu_b):
        return sum(mean_single_click_closed_form(mu_a, mu_b, ch))

    both = pa * pb * y(cfg_a.muz, cfg_b.muz)
    none = (1 - pa) * (1 - pb) * y(0.0, 0.0)
    one = pa * (1 - pb) * y(cfg_a.muz, 0.0) + (1 - pa) * pb * y(0.0, cfg_b.muz)
    return (both + none) / (both + none + one)


def sample_ledger(expected: CountsLedger, rng: np.random.Generator) -> CountsLedger:
    """Draw an integer ledger whose counts are distributed around ``expected``.

    Each category of pulse pairs is one multinomial draw over its disjoint
    outcomes, so related rows (slice errors and corrects, Z errors and
    corrects, slice and non-slice XX11 clicks) keep their joint statistics.
    """
    sent = {k: int(round(v)) for k, v in expected.sent.items()}
    detected = {}
    for code, hits in expected.detected.items():
        if code == "XX11":
            continue
        n = sent[code]
        detected[code] = int(rng.binomial(n, min(1.0, hits / n))) if n else 0

    n11 = sent["XX11"]
    (d1, d2), (c1, c2) = expected.slice_detected, expected.slice_correct
    cells = np.array([c1, d1 - c1, c2, d2 - c2, expected.detected["XX11"] - d1 - d2]) / n11
    cells = np.clip(cells, 0.0, None)
    draw = rng.multinomial(n11, np.append(cells, max(0.0, 1 - cells.sum())))
    slice_correct = (int(draw[0]), int(draw[2]))
    slice_detected = (int(draw[0] + draw[1]), int(draw[2] + draw[3]))
    detected["XX11"] = int(draw[:5].sum())

    nzz = sent["ZZ"]
    pz = np.array([expected.zz_error, expected.zz_correct]) / nzz
    zz = rng.multinomial(nzz, np.append(pz, max(0.0, 1 - pz.sum())))
    return CountsLedger(
        sent=sent, detected=detected, slice_detected=slice_detected, slice_correct=slice_correct,
        zz_error=int(zz[0]), zz_correct=int(zz[1]), n_total=expected.n_total,
        label=f"{expected.label} (sampled)", parameters=dict(expected.parameters),
    )


# -- Monte Carlo -------------------------------------------------------------------

@dataclass
class MonteCarloResult:
    events: np.ndarray
    sent: dict
    references: list
    estimates: list
    true_phase: np.ndarray
    n_frames: int
    n_pulses: int

    def ledger(self, slice_cfg: SliceConfig, n_total=None, label: str = "monte carlo") -> CountsLedger:
        return build_ledger(self.events, self.sent, self.estimates, slice_cfg,
                            n_total=n_total or self.n_pulses, label=label)


def _draw_party(rng, cfg, n):
    is_x = rng.random(n) < cfg.pX
    u = rng.random(n)
    x_digit = (u >= cfg.p0).astype(np.uint8) + (u >= cfg.p0 + cfg.p1).astype(np.uint8)
    z_digit = np.where(u < cfg.pz_send, 3, 0).astype(np.uint8)
    digit = np.where(is_x, x_digit, z_digit).astype(np.uint8)
    mu = np.array([0.0, cfg.mu1, cfg.mu2, cfg.muz])[digit]
    theta = rng.integers(0, N_PHASES, n) * (2 * math.pi / N_PHASES)
    return is_x.astype(np.uint8), digit, mu, theta


def _drift_phase(phi0, rates, step, t):
    """Piecewise-linear phase at window-relative times ``t`` (windows x times)."""
    n_steps = rates.shape[1]
    knots = np.concatenate([np.zeros((len(phi0), 1)), np.cumsum(rates * step, axis=1)], axis=1) + phi0[:, None]
    k = np.minimum((t // step).astype(np.int64), n_steps - 1)
    rows = np.arange(len(phi0))[:, None]
    return knots[rows, k] + rates[rows, k] * (t - k * step)


def _run_block(rng, cfg_a, cfg_b, ch, sched, frame0, n_frames, ideal_phase):
    fpw = sched.frames_per_window
    n_windows = -(-n_frames // fpw)
    step = ch.drift.step_duration
    n_steps = max(1, math.ceil(sched.window_duration / step - 1e-9))
    phi0 = rng.uniform(0, 2 * math.pi, n_windows)
    sigma = ch.drift.sigma_rate * 1e3
    rates = ch.drift.offset_rate + sigma * rng.standard_normal((n_windows, n_steps))

    # signal pulses
    n_sig = sched.n_signal
    local_frame = np.arange(n_frames)
    t_sig = (local_frame[:, None] % fpw) * sched.period + np.arange(n_sig)[None, :] * sched.signal_interval
    win_of_frame = local_frame // fpw
    phase_sig = _drift_phase(phi0[win_of_frame], rates[win_of_frame], step, t_sig).ravel()

    n = n_frames * n_sig
    ba, da, mua, tha = _draw_party(rng, cfg_a, n)
    bb, db, mub, thb = _draw_party(rng, cfg_b, n)
    p1, p2 = click_probs(mua, mub, tha - thb + phase_sig, ch)
    c1 = rng.random(n) < p1
    c2 = rng.random(n) < p2
    gate_pos = rng.random(n)
    single = c1 != c2

    # sent tallies
    z_both = (ba == 0) & (bb == 0)
    codes = 16 * (2 * ba[~z_both].astype(np.int64) + bb[~z_both]) + 4 * da[~z_both].astype(np.int64) + db[~z_both]
    sent = {"ZZ": int(np.count_nonzero(z_both))}
    uniq, counts = np.unique(codes, return_counts=True)
    for c, k in zip(uniq, counts):
        pair = c // 16
        ia, ib = divmod(c % 16, 4)
        sent["ZX"[pair // 2] + "ZX"[pair % 2] + f"{ia}{ib}"] = int(k)

    idx = np.flatnonzero(single)
    ev = np.zeros(len(idx), dtype=EVENT_DTYPE)
    frame_local = idx // n_sig
    ev["frame"] = frame0 + frame_local
    ev["slot"] = idx % n_sig
    ev["ref_window"] = (frame0 // fpw) + frame_local // fpw
    ev["basis_a"], ev["basis_b"] = ba[idx], bb[idx]
    ev["intensity_a"], ev["intensity_b"] = da[idx], db[idx]
    ev["theta_a"], ev["theta_b"] = tha[idx], thb[idx]
    ev["detector"] = np.where(c1[idx], 1, 2)
    ev["gate_pos"] = gate_pos[idx]

    # reference pulses: Alice steps through four phases, Bob stays at 0
    mu_ref = sched.mu_ref if sched.mu_ref is not None else reference_intensity(ch)
    t_ref = ((local_frame[:, None] % fpw) * sched.period + sched.signal_span
             + (np.arange(4)[None, :] + 0.5) * sched.ref_slot)
    phase_ref = _drift_phase(phi0[win_of_frame], rates[win_of_frame], step, t_ref)
    i_plus, i_minus = port_intensities(mu_ref, mu_ref, REFERENCE_PHASES[None, :] + phase_ref, ch)
    dark_ref = ch.dark_prob * sched.ref_width / sched.signal_width
    n1 = rng.poisson(i_plus + dark_ref).astype(float)
    n2 = rng.poisson(i_minus + dark_ref).astype(float)
    ref1 = np.zeros((n_windows, 4))
    ref2 = np.zeros((n_windows, 4))
    np.add.at(ref1, win_of_frame, n1)
    np.add.at(ref2, win_of_frame, n2)

    mid = np.full((n_windows, 1), 0.5 * sched.window_duration)
    true_mid = wrap_phase(_drift_phase(phi0, rates, step, mid)[:, 0])
    references, estimates = [], []
    w0 = frame0 // fpw
    for w in range(n_windows):
        ref = ReferenceWindowCounts(tuple(ref1[w]), sched.window_duration, 1, w0 + w, tuple(ref2[w]))
        references.append(ref)
        if ideal_phase:
            estimates.append(PhaseEstimate(float(true_mid[w]), 0.0, 0.0, w0 + w, (w0 + w) * sched.window_duration))
        elif ref1[w].sum() > 0:
            estimates.append(estimate_phase(ref))
        else:
            # no reference light at all: flag the window so the rc filter drops it
            estimates.append(PhaseEstimate(0.0, 1.0, 0.0, w0 + w, (w0 + w) * sched.window_duration))
    return ev, sent, references, estimates, true_mid


def monte_carlo_run(cfg_a: IntensityProbabilityConfig, cfg_b: IntensityProbabilityConfig, ch: ChannelModel,
                    sched: FrameSchedule, n_frames: int, seed: int, ideal_phase: bool = False) -> MonteCarloResult:
    """Pulse-level simulation of ``n_frames`` frames.

    Frames are generated in fixed blocks of :data:`BLOCK_FRAMES`, each with
    its own generator spawned from ``seed``, so results do not depend on how
    the run is split.  Each estimation window (``frames_per_window`` frames)
    starts from a uniform random fiber phase and then drifts.  With
    ``ideal_phase`` the estimate of each window is the true phase at its
    midpoint, with ``rc = 0``.
    """
    if n_frames < 1:
        raise DomainError(f"n_frames must be at least 1, got {n_frames}")
    if BLOCK_FRAMES % sched.frames_per_window:
        raise DomainError("frames_per_window must divide the block size")
    n_blocks = -(-n_frames // BLOCK_FRAMES)
    children = np.random.SeedSequence(seed).spawn(n_blocks)
    events, refs, ests, truth = [], [], [], []
    sent = {}
    for b, child in enumerate(children):
        frame0 = b * BLOCK_FRAMES
        nf = min(BLOCK_FRAMES, n_frames - frame0)
        ev, s, r, e, t = _run_block(np.random.default_rng(child), cfg_a, cfg_b, ch, sched, frame0, nf, ideal_phase)
        events.append(ev)
        refs.extend(r)
        ests.extend(e)
        truth.append(t)
        for k, v in s.items():
            sent[k] = sent.get(k, 0) + v
    return MonteCarloResult(
        events=np.concatenate(events), sent=sent, references=refs, estimates=ests,
        true_phase=np.concatenate(truth), n_frames=n_frames, n_pulses=n_frames * sched.n_signal,
    )


# -- distance sweep -----------------------------------------------------------------

@dataclass(frozen=True)
class SweepConfig:
    """Everything except distance needed for one point of a key-rate curve.

    ``eff_A`` and ``eff_B`` are the distance-independent optics and detector
    efficiencies.  The PLOB and TGW columns use the end-to-end transmittance
    ``fiber(L) * sqrt(eff_A eff_B) * r_gate``.
    """

    cfg: IntensityProbabilityConfig
    slice: SliceConfig
    budget: SecurityBudget = field(default_factory=SecurityBudget)
    n_total: float = 7.2e11
    dark_prob: float = 1e-7
    misalignment: float = 0.02
    eff_A: float = field(default_factory=lambda: system_efficiency("A"))
    eff_B: float = field(default_factory=lambda: system_efficiency("B"))


def second_test_config(**overrides) -> SweepConfig:
    """Source, slice and detector settings of the second experimental run."""
    cfg = IntensityProbabilityConfig(mu1=0.1, mu2=0.2, muz=0.425, pX=0.2, p0=0.2, p1=0.6, p2=0.2, pz_send=0.042)
    base = dict(cfg=cfg, slice=SliceConfig.from_degrees(8.0, rc_max=1.0, r_gate=0.85))
    base.update(overrides)
    return SweepConfig(**base)


def end_to_end_transmittance(base: SweepConfig, distance_km: float, attenuation_db_per_km: float) -> float:
    return fiber_transmittance(distance_km, attenuation_db_per_km) * math.sqrt(base.eff_A * base.eff_B) * base.slice.r_gate


def distance_point(base: SweepConfig, attenuation_db_per_km: float, distance_km: float) -> dict:
    side = fiber_transmittance(distance_km / 2, attenuation_db_per_km)
    ch = ChannelModel(eta_A=side * base.eff_A, eta_B=side * base.eff_B, dark_prob=base.dark_prob,
                      misalignment=base.misalignment)
    led = expected_ledger(base.cfg, base.cfg, ch, base.slice, base.n_total, label=f"{distance_km:g} km")
    rep = key_rate(led, base.cfg, base.budget, n_total=base.n_total, slice_halfwidth=base.slice.Ds)
    eta = end_to_end_transmittance(base, distance_km, attenuation_db_per_km)
    return {
        "distance_km": float(distance_km), "R": rep.R, "s1": rep.s1_lower, "e1ph": rep.e1ph_upper,
        "plob": plob_bound(eta), "tgw": tgw_bound(eta),
    }


def distance_sweep(base: SweepConfig, attenuation_db_per_km: float, distances) -> list:
    """Key-rate curve rows ``distance_km, R, s1, e1ph, plob, tgw`` in input order.

    Each side carries half of the distance.
    """
    distances = list(distances)
    if not distances:
        raise DomainError("distance list is empty")
    return [distance_point(base, attenuation_db_per_km, L) for L in distances]


def first_crossing(rows, column: str = "plob"):
    """First distance where R exceeds the given bound column, or None."""
    for r in rows:
        if r["R"] > r[column]:
            return r["distance_km"]
    return None


def max_distance(rows):
    """Largest distance with a positive key rate, or None."""
    positive = [r["distance_km"] for r in rows if r["R"] > 0]
    return max(positive) if positive else None


def _margin(base, attenuation_db_per_km, distance_km, column):
    p = distance_point(base, attenuation_db_per_km, distance_km)
    if column is None:
        return p["R"] if p["R"] > 0 else -1.0
    return p["R"] - p[column]


def locate_distance(base: SweepConfig, attenuation_db_per_km: float, lo: float, hi: float,
                    column: str | None = None, tol_km: float = 0.1) -> float:
    """Bisect for the distance where the rate stops being positive (``column=None``)
    or where it drops to the given bound column.

    ``lo`` must be on the positive side and ``hi`` on the other.
    """
    f_lo = _margin(base, attenuation_db_per_km, lo, column)
    f_hi = _margin(base, attenuation_db_per_km, hi, column)
    if column is not None:
        # R rises above the bound with distance, so flip the sign convention
        f_lo, f_hi = -f_lo, -f_hi
    if not (f_lo > 0 >= f_hi):
        raise DomainError(f"no sign change between {lo} and {hi} km")
    while hi - lo > tol_km:
        mid = 0.5 * (lo + hi)
        f = _margin(base, attenuation_db_per_km, mid, column)
        if column is not None:
            f = -f
        if f > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)
