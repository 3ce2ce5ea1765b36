"""Finite-key decoy-state analysis for the four-intensity SNS protocol.

The pipeline turns a :class:`~snstf.ledger.CountsLedger` into a
:class:`KeyRateReport`:

1. :func:`effective_pair_counts` recovers how many pulse pairs fell in each
   vacuum/decoy pairing and inside the two X-basis phase slices.
2. :func:`compute_observables` forms the yields ``S_00``, ``S_1``, ``S_2`` and
   the slice error yield ``T_delta``, each with a Chernoff interval.
3. :func:`mean_s1_lower` and :func:`mean_e1ph_upper` bound the single-photon
   yield and phase-flip error rate of the Z-basis effective events.
4. :func:`finite_size_correct` moves from mean values to bounds on the
   realised values in the Z-basis sample.
5. :func:`key_rate` assembles the secret-key rate per sent pulse pair.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

from .errors import DegenerateSliceError, DomainError, IncompleteLedgerError, UndefinedBoundError
from .ledger import CountsLedger

__all__ = [
    "IntensityProbabilityConfig",
    "SecurityBudget",
    "EffectivePairCounts",
    "Observables",
    "KeyRateReport",
    "binary_entropy",
    "chernoff_delta",
    "chernoff_delta_lower_tail",
    "bound_interval",
    "effective_pair_counts",
    "mean_s1_lower",
    "mean_e1ph_upper",
    "compute_observables",
    "finite_size_correct",
    "key_rate",
    "secret_key_rate",
    "pa_overhead",
]


@dataclass(frozen=True)
class IntensityProbabilityConfig:
    """Source settings for one party.

    ``p0, p1, p2`` are conditional on the X basis; ``pz_send`` is the
    probability of sending ``muz`` given the Z basis.
    """

    mu1: float
    mu2: float
    muz: float
    pX: float
    p0: float
    p1: float
    p2: float
    pz_send: float

    def __post_init__(self):
        problems = self.problems()
        if problems:
            raise DomainError("; ".join(problems))

    def problems(self) -> list:
        out = []
        if not 0 < self.mu1 < self.mu2:
            out.append(f"need 0 < mu1 < mu2, got mu1={self.mu1}, mu2={self.mu2}")
        if not self.muz > 0:
            out.append(f"muz must be positive, got {self.muz}")
        if abs(self.p0 + self.p1 + self.p2 - 1) > 1e-12:
            out.append(f"p0 + p1 + p2 must be 1, got {self.p0 + self.p1 + self.p2!r}")
        if min(self.p0, self.p1, self.p2) < 0:
            out.append("decoy probabilities must be non-negative")
        if not 0 < self.pX < 1:
            out.append(f"pX must lie in (0, 1), got {self.pX}")
        if not 0 < self.pz_send < 1:
            out.append(f"pz_send must lie in (0, 1), got {self.pz_send}")
        return out

    def intensity(self, label: int) -> float:
        return (0.0, self.mu1, self.mu2, self.muz)[label]

    def x_prob(self, label: int) -> float:
        return (self.p0, self.p1, self.p2)[label]

    @property
    def a1(self) -> float:
        """Single-photon emission probability of the Z-basis source."""
        return self.muz * math.exp(-self.muz)

    @classmethod
    def from_parameters(cls, params: dict) -> "IntensityProbabilityConfig":
        """Build from a ledger ``parameters`` echo (table naming)."""
        return cls(
            mu1=params["mu1"], mu2=params["mu2"], muz=params["muz"],
            pX=params["p_X"], p0=params["p_0"], p1=params["p_1"], p2=params["p_2"],
            pz_send=params["p_z1"],
        )


@dataclass(frozen=True)
class SecurityBudget:
    """Failure probabilities and error-correction efficiency.

    Component probabilities default to ``epsilon``, with ``eps_bar = 3 eps``
    and ``eps_s1 = 4 eps`` (three Chernoff uses for the phase error, four for
    the yield).  ``upper_deviation`` chooses the deviation used for upper
    bounds: ``"same"`` reuses :func:`chernoff_delta`, ``"lower_tail"`` uses
    :func:`chernoff_delta_lower_tail`.  ``zero_count_rule`` sets the upper
    bound of an observable with no counts: ``"additive"`` gives
    ``ln(2/eps)/scale``, ``"zero"`` gives 0.
    """

    epsilon: float = 1e-10
    eps_cor: float | None = None
    eps_PA: float | None = None
    eps_hat: float | None = None
    eps_bar: float | None = None
    eps_s1: float | None = None
    f_EC: float = 1.1
    upper_deviation: str = "same"
    zero_count_rule: str = "additive"

    def __post_init__(self):
        eps = self.epsilon
        defaults = {"eps_cor": eps, "eps_PA": eps, "eps_hat": eps, "eps_bar": 3 * eps, "eps_s1": 4 * eps}
        for name, value in defaults.items():
            if getattr(self, name) is None:
                object.__setattr__(self, name, value)
        for name in ("epsilon",) + tuple(defaults):
            value = getattr(self, name)
            if not 0 < value < 1:
                raise DomainError(f"{name} must lie in (0, 1), got {value}")
        if self.f_EC < 1:
            raise DomainError(f"f_EC must be >= 1, got {self.f_EC}")
        if self.upper_deviation not in ("same", "lower_tail"):
            raise DomainError(f"unknown upper_deviation {self.upper_deviation!r}")
        if self.zero_count_rule not in ("additive", "zero"):
            raise DomainError(f"unknown zero_count_rule {self.zero_count_rule!r}")

    @property
    def eps_sec(self) -> float:
        return 2 * self.eps_hat + 4 * self.eps_bar + self.eps_PA + self.eps_s1

    @property
    def eps_tol(self) -> float:
        return self.eps_sec + self.eps_cor


@dataclass(frozen=True)
class EffectivePairCounts:
    """Pulse-pair counts behind each observable.

    ``N_ZX`` counts pairs with Alice in Z and Bob in X, ``N_XZ`` the reverse.
    ``N_0k`` is Alice vacuum-equivalent with Bob sending ``mu_k``.
    """

    N_X: float
    N_ZX: float
    N_XZ: float
    N_00: float
    N_01: float
    N_10: float
    N_02: float
    N_20: float
    N_11: float
    N11_slice_plus: float
    N11_slice_minus: float
    N_zz: float

    @property
    def N_XZ_mean(self) -> float:
        return 0.5 * (self.N_ZX + self.N_XZ)


@dataclass(frozen=True)
class Observables:
    """Point estimates with their Chernoff intervals and deviations."""

    S_00: float
    S_1: float
    S_2: float
    T_delta: float
    S_00_lower: float
    S_00_upper: float
    S_1_lower: float
    S_1_upper: float
    S_2_lower: float
    S_2_upper: float
    T_delta_lower: float
    T_delta_upper: float
    deltas: dict = field(default_factory=dict)


@dataclass
class KeyRateReport:
    s1_lower: float
    e1ph_upper: float
    S_Z: float
    E_Z: float
    a1: float
    R: float
    mean_s1: float
    mean_e1ph: float
    R_unclamped: float
    overhead: float
    observables: Observables | None = None
    pairs: EffectivePairCounts | None = None
    deltas: dict = field(default_factory=dict)
    budget: SecurityBudget | None = None
    filters: dict = field(default_factory=dict)
    n_total: float | None = None
    label: str = ""
    note: str = ""

    def to_dict(self) -> dict:
        out = asdict(self)
        if self.budget is not None:
            out["budget"]["eps_sec"] = self.budget.eps_sec
            out["budget"]["eps_tol"] = self.budget.eps_tol
        return out

    def summary(self) -> str:
        lines = [
            f"ledger         {self.label}",
            f"R              {self.R:.4e}  (per pulse)",
            f"s1 lower       {self.s1_lower:.4e}",
            f"e1ph upper     {self.e1ph_upper:.4%}",
            f"S_Z            {self.S_Z:.4e}",
            f"E_Z            {self.E_Z:.4%}",
            f"a1             {self.a1:.5f}",
            f"N_total        {self.n_total:.4e}" if self.n_total else "N_total        -",
            f"PA overhead    {self.overhead:.4e}",
        ]
        if self.observables is not None:
            o = self.observables
            for name in ("S_00", "S_1", "S_2", "T_delta"):
                lo, hi = getattr(o, name + "_lower"), getattr(o, name + "_upper")
                lines.append(f"{name:<14} {getattr(o, name):.4e}  [{lo:.4e}, {hi:.4e}]")
        for name, value in sorted(self.deltas.items()):
            lines.append(f"delta_{name:<8} {value:.4e}")
        if self.budget is not None:
            b = self.budget
            lines.append(
                f"epsilon        {b.epsilon:g} (cor {b.eps_cor:g}, PA {b.eps_PA:g}, hat {b.eps_hat:g}, "
                f"bar {b.eps_bar:g}, s1 {b.eps_s1:g}; total {b.eps_tol:g}); f_EC {b.f_EC}"
            )
        for name, value in self.filters.items():
            lines.append(f"filter {name:<7} {value}")
        if self.note:
            lines.append(f"note           {self.note}")
        return "\n".join(lines)


# -- elementary functions ----------------------------------------------------

def binary_entropy(x: float) -> float:
    """Shannon entropy of a Bernoulli(x) variable in bits; ``H(0) = H(1) = 0``."""
    if not 0 <= x <= 1:
        raise DomainError(f"binary entropy needs 0 <= x <= 1, got {x}")
    if x == 0 or x == 1:
        return 0.0
    return -x * math.log2(x) - (1 - x) * math.log2(1 - x)


def chernoff_delta(x: float, y: float) -> float:
    """Relative deviation of the multiplicative Chernoff bound.

    ``x`` is the observed count, ``y`` the failure probability.  Solves
    ``x d**2 = b (2 + d)`` with ``b = ln(2/y)``.
    """
    if not x > 0:
        raise DomainError(f"Chernoff deviation needs a positive count, got {x}")
    if not 0 < y < 1:
        raise DomainError(f"failure probability must lie in (0, 1), got {y}")
    ln_half = math.log(y / 2)
    return (-ln_half + math.sqrt(ln_half * ln_half - 8 * ln_half * x)) / (2 * x)


def chernoff_delta_lower_tail(x: float, y: float) -> float:
    """Upper-bound deviation from the lower Chernoff tail.

    Solves ``d**2 x = 2 b (1 - d)``; always below 1 so the upper bound stays
    finite for small counts.
    """
    if not x > 0:
        raise DomainError(f"Chernoff deviation needs a positive count, got {x}")
    if not 0 < y < 1:
        raise DomainError(f"failure probability must lie in (0, 1), got {y}")
    b = -math.log(y / 2)
    return (-b + math.sqrt(b * b + 2 * b * x)) / x


def _upper_delta(x, y, budget):
    if budget is not None and budget.upper_deviation == "lower_tail":
        return chernoff_delta_lower_tail(x, y)
    return chernoff_delta(x, y)


def bound_interval(observed: float, scale: float, epsilon: float, budget: SecurityBudget | None = None):
    """Chernoff interval ``(lower, upper)`` for the mean of an observed rate.

    ``scale`` is the number of trials behind the rate, so ``scale * observed``
    is the observed count.  A zero rate gives ``lower = 0`` and an upper
    bound set by ``budget.zero_count_rule``; a deviation of 1 or more gives
    an infinite upper bound.
    """
    if observed < 0 or scale <= 0:
        raise DomainError(f"need observed >= 0 and scale > 0, got {observed}, {scale}")
    if not 0 < epsilon < 1:
        raise DomainError(f"failure probability must lie in (0, 1), got {epsilon}")
    if observed == 0:
        rule = budget.zero_count_rule if budget is not None else "additive"
        upper = math.log(2 / epsilon) / scale if rule == "additive" else 0.0
        return 0.0, upper
    count = scale * observed
    lower = observed / (1 + chernoff_delta(count, epsilon))
    d_up = _upper_delta(count, epsilon, budget)
    upper = math.inf if d_up >= 1 else observed / (1 - d_up)
    return lower, upper


def pa_overhead(budget: SecurityBudget, n_total: float) -> float:
    """Per-pulse cost of error verification and privacy amplification."""
    bits = math.log2(2 / budget.eps_cor) + 2 * math.log2(1 / (math.sqrt(2) * budget.eps_PA * budget.eps_hat))
    return bits / n_total


# -- pair counts ---------------------------------------------------------------

def _estimate_total(ledger, codes, weights):
    """Median over rows of ``count / weight``; tolerant of a single mistyped row."""
    estimates = []
    for code, w in zip(codes, weights):
        if w > 0:
            estimates.append(ledger.sent_count(code) / w)
    if not estimates:
        raise DomainError("no row with positive probability to estimate a basis total")
    estimates.sort()
    n = len(estimates)
    mid = n // 2
    return estimates[mid] if n % 2 else 0.5 * (estimates[mid - 1] + estimates[mid])


def effective_pair_counts(cfg_a: IntensityProbabilityConfig, cfg_b: IntensityProbabilityConfig,
                          ledger: CountsLedger, slice_halfwidth: float) -> EffectivePairCounts:
    """Pulse-pair counts for every vacuum/decoy pairing and the XX11 slices.

    ``N_X`` (both X), ``N_ZX`` and ``N_XZ`` (one party in X) are estimated
    from the sent rows; each row gives ``count / probability`` and the median
    is taken.  The pairing counts then follow the source probabilities, e.g.
    ``N_00 = p0A p0B N_X + (1 - pzA) p0B N_ZX + p0A (1 - pzB) N_XZ``.  Each
    slice holds ``(2 Ds / 2 pi) N_11`` pairs.
    """
    if not 0 < slice_halfwidth <= math.pi / 2:
        raise DomainError(f"slice half-width must lie in (0, pi/2], got {slice_halfwidth}")
    xx = [c for c in ledger.sent if c.startswith("XX")]
    for required in ("XX00", "XX01", "XX02", "XX10", "XX20", "XX11", "XX22"):
        if required not in ledger.sent or ledger.sent[required] is None:
            raise IncompleteLedgerError(f"Sent-{required}")
    xx.sort()
    n_x = _estimate_total(ledger, xx, [cfg_a.x_prob(int(c[2])) * cfg_b.x_prob(int(c[3])) for c in xx])

    zx = ["ZX00", "ZX01", "ZX02", "ZX30"]
    zx_w = [(1 - cfg_a.pz_send) * cfg_b.p0, (1 - cfg_a.pz_send) * cfg_b.p1,
            (1 - cfg_a.pz_send) * cfg_b.p2, cfg_a.pz_send * cfg_b.p0]
    n_zx = _estimate_total(ledger, zx, zx_w)
    xz = ["XZ00", "XZ10", "XZ20", "XZ03"]
    xz_w = [cfg_a.p0 * (1 - cfg_b.pz_send), cfg_a.p1 * (1 - cfg_b.pz_send),
            cfg_a.p2 * (1 - cfg_b.pz_send), cfg_a.p0 * cfg_b.pz_send]
    n_xz = _estimate_total(ledger, xz, xz_w)

    qa, qb = 1 - cfg_a.pz_send, 1 - cfg_b.pz_send
    n_00 = cfg_a.p0 * cfg_b.p0 * n_x + qa * cfg_b.p0 * n_zx + cfg_a.p0 * qb * n_xz
    n_01 = cfg_a.p0 * cfg_b.p1 * n_x + qa * cfg_b.p1 * n_zx
    n_10 = cfg_a.p1 * cfg_b.p0 * n_x + cfg_a.p1 * qb * n_xz
    n_02 = cfg_a.p0 * cfg_b.p2 * n_x + qa * cfg_b.p2 * n_zx
    n_20 = cfg_a.p2 * cfg_b.p0 * n_x + cfg_a.p2 * qb * n_xz
    n_11 = ledger.sent_count("XX11")
    n_slice = (2 * slice_halfwidth / (2 * math.pi)) * n_11
    return EffectivePairCounts(
        N_X=n_x, N_ZX=n_zx, N_XZ=n_xz,
        N_00=n_00, N_01=n_01, N_10=n_10, N_02=n_02, N_20=n_20,
        N_11=n_11, N11_slice_plus=n_slice, N11_slice_minus=n_slice,
        N_zz=ledger.sent_count("ZZ"),
    )


# -- observables ----------------------------------------------------------------

def compute_observables(ledger: CountsLedger, pairs: EffectivePairCounts,
                        budget: SecurityBudget) -> Observables:
    """Yields and slice error yield with Chernoff intervals at ``budget.epsilon``.

    Slice errors are wrong-port clicks: detector 2 in the plus slice,
    detector 1 in the minus slice, i.e. ``detected - correct`` per channel.
    """
    if pairs.N11_slice_plus <= 0 or pairs.N11_slice_minus <= 0:
        raise DegenerateSliceError("phase slices contain no XX11 pulse pairs")
    eps = budget.epsilon
    d = ledger.detected_count
    n_00 = d("XX00") + d("ZX00") + d("XZ00")
    n_1 = d("XX01") + d("ZX01") + d("XX10") + d("XZ10")
    n_2 = d("XX02") + d("ZX02") + d("XX20") + d("XZ20")
    s_00 = n_00 / pairs.N_00
    s_1 = n_1 / (pairs.N_01 + pairs.N_10)
    s_2 = n_2 / (pairs.N_02 + pairs.N_20)
    err_ch1, err_ch2 = ledger.slice_errors
    t_delta = 0.5 * (err_ch2 / pairs.N11_slice_plus + err_ch1 / pairs.N11_slice_minus)

    s00_lo, s00_hi = bound_interval(s_00, pairs.N_00, eps, budget)
    s1_lo, s1_hi = bound_interval(s_1, pairs.N_01 + pairs.N_10, eps, budget)
    s2_lo, s2_hi = bound_interval(s_2, pairs.N_02 + pairs.N_20, eps, budget)
    t_lo, t_hi = bound_interval(t_delta, pairs.N11_slice_plus + pairs.N11_slice_minus, eps, budget)

    deltas = {}
    for name, count in (("00", n_00), ("1", n_1), ("2", n_2), ("Delta", err_ch1 + err_ch2)):
        if count > 0:
            deltas[name] = chernoff_delta(count, eps)
            deltas[name + "'"] = _upper_delta(count, eps, budget)
    return Observables(
        S_00=s_00, S_1=s_1, S_2=s_2, T_delta=t_delta,
        S_00_lower=s00_lo, S_00_upper=s00_hi,
        S_1_lower=s1_lo, S_1_upper=s1_hi,
        S_2_lower=s2_lo, S_2_upper=s2_hi,
        T_delta_lower=t_lo, T_delta_upper=t_hi,
        deltas=deltas,
    )


def mean_s1_lower(S_00_upper: float, S_1_lower: float, S_2_upper: float, mu1: float, mu2: float) -> float:
    """Decoy lower bound on the mean single-photon yield; never negative."""
    if not 0 < mu1 < mu2:
        raise DomainError(f"need 0 < mu1 < mu2, got mu1={mu1}, mu2={mu2}")
    num = (mu2**2 * math.exp(mu1) * S_1_lower
           - mu1**2 * math.exp(mu2) * S_2_upper
           - (mu2**2 - mu1**2) * S_00_upper)
    return max(0.0, num / (mu1 * mu2 * (mu2 - mu1)))


def mean_e1ph_upper(T_delta_upper: float, S_00_lower: float, mu1: float, mean_s1: float) -> float:
    """Upper bound on the mean phase-flip error rate, clamped to [0, 1]."""
    if not mean_s1 > 0:
        raise UndefinedBoundError("single-photon yield bound is zero; no key can be extracted")
    if math.isinf(T_delta_upper):
        return 1.0
    damp = math.exp(-2 * mu1)
    value = (T_delta_upper - 0.5 * damp * S_00_lower) / (2 * mu1 * damp * mean_s1)
    return min(1.0, max(0.0, value))


def finite_size_correct(mean_s1: float, mean_e1ph: float, pairs: EffectivePairCounts,
                        cfg: IntensityProbabilityConfig, budget: SecurityBudget):
    """Bounds on the realised yield and phase error of the Z-basis sample.

    Returns ``(s1_lower, e1ph_upper, deltas)``.
    """
    n_zz_c = 2 * cfg.pz_send * (1 - cfg.pz_send) * pairs.N_zz
    a1 = cfg.a1
    deltas = {}
    if mean_s1 <= 0:
        return 0.0, 1.0, deltas
    d1 = chernoff_delta(a1 * n_zz_c * mean_s1, budget.epsilon)
    deltas["1c"] = d1
    s1 = max(0.0, mean_s1 * (1 - d1))
    if s1 == 0 or mean_e1ph == 0:
        return s1, (mean_e1ph if s1 > 0 else 1.0), deltas
    d1p = _upper_delta(a1 * n_zz_c * s1 * mean_e1ph, budget.epsilon, budget)
    deltas["1c'"] = d1p
    e1ph = min(1.0, mean_e1ph * (1 + d1p))
    return s1, e1ph, deltas


def secret_key_rate(s1: float, e1ph: float, S_Z: float, E_Z: float,
                    cfg: IntensityProbabilityConfig, budget: SecurityBudget, n_total: float):
    """Unclamped key rate per pulse and the overhead term.

    Phase-error bounds at or above 1/2 yield no privacy: the entropy term
    saturates at ``H(1/2) = 1``.
    """
    if n_total <= 0:
        raise DomainError(f"N_total must be positive, got {n_total}")
    gain = 2 * cfg.pz_send * (1 - cfg.pz_send) * cfg.a1 * s1 * (1 - binary_entropy(min(e1ph, 0.5)))
    leak = budget.f_EC * S_Z * binary_entropy(min(E_Z, 1.0))
    overhead = pa_overhead(budget, n_total)
    return (1 - cfg.pX) ** 2 * (gain - leak) - overhead, overhead


def key_rate(ledger: CountsLedger, cfg_a: IntensityProbabilityConfig, budget: SecurityBudget,
             n_total: float | None = None, slice_halfwidth: float | None = None,
             cfg_b: IntensityProbabilityConfig | None = None, filters: dict | None = None) -> KeyRateReport:
    """Full finite-key analysis of one ledger.

    ``slice_halfwidth`` (radians) defaults to the ledger's ``Ds_deg``
    parameter and ``n_total`` to its ``N_total``.
    """
    cfg_b = cfg_b or cfg_a
    if slice_halfwidth is None:
        try:
            slice_halfwidth = math.radians(ledger.parameters["Ds_deg"])
        except KeyError:
            raise DomainError("slice half-width not given and ledger has no Ds_deg parameter") from None
    if n_total is None:
        n_total = ledger.n_total
    if not n_total:
        raise DomainError("N_total unknown: pass it or record it in the ledger")

    pairs = effective_pair_counts(cfg_a, cfg_b, ledger, slice_halfwidth)
    obs = compute_observables(ledger, pairs, budget)
    z_total = ledger.zz_error + ledger.zz_correct
    S_Z = z_total / pairs.N_zz
    E_Z = ledger.zz_error / z_total if z_total else 0.0

    m_s1 = mean_s1_lower(obs.S_00_upper, obs.S_1_lower, obs.S_2_upper, cfg_a.mu1, cfg_a.mu2)
    note = ""
    try:
        m_e1 = mean_e1ph_upper(obs.T_delta_upper, obs.S_00_lower, cfg_a.mu1, m_s1)
    except UndefinedBoundError as exc:
        m_e1, note = 1.0, str(exc)
    s1, e1ph, fs_deltas = finite_size_correct(m_s1, m_e1, pairs, cfg_a, budget)
    raw, overhead = secret_key_rate(s1, e1ph, S_Z, E_Z, cfg_a, budget, n_total)

    deltas = dict(obs.deltas)
    deltas.update(fs_deltas)
    flt = {"Ds_deg": math.degrees(slice_halfwidth)}
    for key in ("rc", "r_gate"):
        if key in ledger.parameters:
            flt[key] = ledger.parameters[key]
    flt.update(filters or {})
    return KeyRateReport(
        s1_lower=s1, e1ph_upper=e1ph, S_Z=S_Z, E_Z=E_Z, a1=cfg_a.a1,
        R=max(0.0, raw), mean_s1=m_s1, mean_e1ph=m_e1, R_unclamped=raw, overhead=overhead,
        observables=obs, pairs=pairs, deltas=deltas, budget=budget, filters=flt,
        n_total=n_total, label=ledger.label, note=note,
    )
