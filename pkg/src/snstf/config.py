"""Run configuration files (TOML).

Example::

    schema_version = 1
    mode = "sweep"
    seed = 7
    N_total = 7.2e11

    [source]                 # Alice; add [source_b] for an asymmetric Bob
    mu1 = 0.1
    mu2 = 0.2
    muz = 0.425
    pX = 0.2
    p0 = 0.2
    p1 = 0.6
    p2 = 0.2
    pz_send = 0.042

    [channel]
    eta_A = 1e-3             # simulate only; sweep derives eta from distance
    eta_B = 1e-3
    dark_prob = 1e-7
    misalignment = 0.02

    [channel.drift]
    sigma_rate = 7.4         # rad/ms
    step_duration = 1e-5     # s
    delta_nu = 0.0           # Hz

    [slice]
    Ds_deg = 8.0
    rc_max = 1.0
    r_gate = 0.85

    [security]
    epsilon = 1e-10
    f_EC = 1.1

    [sweep]
    attenuation_db_per_km = 0.188
    eff_A = 0.311
    eff_B = 0.310

    [schedule]
    mu_ref = 30.0            # omit to aim at ~20 reference detections per frame
    frames_per_window = 2

    [paths]
    ledger = "ledger.json"
    output = "out"

Every section is optional; missing values take the defaults of the
corresponding dataclass.  Validation collects every problem before raising.
"""
from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .decoy import IntensityProbabilityConfig, SecurityBudget
from .errors import ConfigError, DomainError
from .phase import DriftProcessParams
from .simulator import DEFAULT_ATTENUATION, ChannelModel, FrameSchedule, SweepConfig, system_efficiency
from .sifting import SliceConfig

CONFIG_SCHEMA_VERSION = 1
MODES = ("analyze", "simulate", "sweep", "scan", "bounds")

_SECTIONS = {
    "source": ("mu1", "mu2", "muz", "pX", "p0", "p1", "p2", "pz_send"),
    "channel": ("eta_A", "eta_B", "dark_prob", "misalignment", "efficiency_scale", "drift"),
    "drift": ("sigma_rate", "step_duration", "delta_nu", "fiber_length_km"),
    "slice": ("Ds_deg", "rc_max", "r_gate", "plus_port"),
    "security": ("epsilon", "eps_cor", "eps_PA", "eps_hat", "eps_bar", "eps_s1", "f_EC",
                 "upper_deviation", "zero_count_rule"),
    "sweep": ("attenuation_db_per_km", "eff_A", "eff_B", "from_km", "to_km", "step_km"),
    "schedule": tuple(f.name for f in fields(FrameSchedule)),
    "paths": ("ledger", "output", "events"),
}
_TOP = ("schema_version", "mode", "seed", "N_total", "frames", "ideal_phase",
        "source", "source_b", "channel", "slice", "security", "sweep", "schedule", "paths")

SECOND_TEST_SOURCE = {"mu1": 0.1, "mu2": 0.2, "muz": 0.425, "pX": 0.2, "p0": 0.2, "p1": 0.6, "p2": 0.2,
                      "pz_send": 0.042}


@dataclass
class RunConfig:
    mode: str = "analyze"
    seed: int = 0
    n_total: float | None = None
    frames: int | None = None
    ideal_phase: bool = False
    source_a: IntensityProbabilityConfig | None = None
    source_b: IntensityProbabilityConfig | None = None
    channel: ChannelModel | None = None
    slice: SliceConfig | None = None
    budget: SecurityBudget = field(default_factory=SecurityBudget)
    schedule: FrameSchedule = field(default_factory=FrameSchedule)
    attenuation_db_per_km: float = DEFAULT_ATTENUATION
    eff_A: float = field(default_factory=lambda: system_efficiency("A"))
    eff_B: float = field(default_factory=lambda: system_efficiency("B"))
    sweep_range: tuple | None = None
    dark_prob: float = 1e-7
    misalignment: float = 0.02
    paths: dict = field(default_factory=dict)
    source_path: str | None = None

    def sweep_config(self) -> SweepConfig:
        return SweepConfig(
            cfg=self.source_a or IntensityProbabilityConfig(**SECOND_TEST_SOURCE),
            slice=self.slice or SliceConfig.from_degrees(8.0, r_gate=0.85),
            budget=self.budget, n_total=self.n_total or 7.2e11,
            dark_prob=self.dark_prob, misalignment=self.misalignment, eff_A=self.eff_A, eff_B=self.eff_B,
        )


def _unknown(table, allowed, where, problems):
    for key in table:
        if key not in allowed:
            problems.append(f"{where}: unknown key {key!r}")


def _build(cls, kwargs, where, problems):
    try:
        return cls(**kwargs)
    except DomainError as exc:
        problems.append(f"{where}: {exc}")
    except TypeError as exc:
        problems.append(f"{where}: {exc}")
    return None


def _number(table, key, where, problems, default=None, integer=False):
    if key not in table:
        return default
    v = table[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        problems.append(f"{where}.{key}: expected a number, got {v!r}")
        return default
    if integer and not float(v).is_integer():
        problems.append(f"{where}.{key}: expected an integer, got {v!r}")
        return default
    return int(v) if integer else float(v)


def config_from_dict(doc: dict, source_path: str | None = None) -> RunConfig:
    """Validate a parsed TOML document; raise :class:`ConfigError` listing every problem."""
    problems = []
    _unknown(doc, _TOP, "config", problems)
    version = doc.get("schema_version")
    if version is None:
        problems.append("config: missing schema_version")
    elif version != CONFIG_SCHEMA_VERSION:
        problems.append(f"config: unsupported schema_version {version!r} (supported: {CONFIG_SCHEMA_VERSION})")
    mode = doc.get("mode", "analyze")
    if mode not in MODES:
        problems.append(f"config.mode: must be one of {', '.join(MODES)}, got {mode!r}")

    rc = RunConfig(mode=mode, source_path=source_path)
    rc.seed = _number(doc, "seed", "config", problems, 0, integer=True)
    rc.n_total = _number(doc, "N_total", "config", problems)
    if rc.n_total is not None and rc.n_total <= 0:
        problems.append(f"config.N_total: must be positive, got {rc.n_total}")
    rc.frames = _number(doc, "frames", "config", problems, integer=True)
    rc.ideal_phase = bool(doc.get("ideal_phase", False))

    for name, attr in (("source", "source_a"), ("source_b", "source_b")):
        if name in doc:
            table = doc[name]
            _unknown(table, _SECTIONS["source"], name, problems)
            missing = [k for k in _SECTIONS["source"] if k not in table]
            if missing:
                problems.append(f"{name}: missing {', '.join(missing)}")
            else:
                kwargs = {k: _number(table, k, name, problems) for k in _SECTIONS["source"]}
                if None not in kwargs.values():
                    setattr(rc, attr, _build(IntensityProbabilityConfig, kwargs, name, problems))

    sec = doc.get("security", {})
    _unknown(sec, _SECTIONS["security"], "security", problems)
    kwargs = {}
    for k in _SECTIONS["security"]:
        if k in sec:
            kwargs[k] = sec[k] if k in ("upper_deviation", "zero_count_rule") else _number(sec, k, "security", problems)
    budget = _build(SecurityBudget, kwargs, "security", problems)
    if budget is not None:
        rc.budget = budget

    sl = doc.get("slice")
    if sl is not None:
        _unknown(sl, _SECTIONS["slice"], "slice", problems)
        ds = _number(sl, "Ds_deg", "slice", problems)
        if ds is None:
            problems.append("slice: missing Ds_deg")
        else:
            kw = {"Ds": math.radians(ds)}
            for k in ("rc_max", "r_gate"):
                if k in sl:
                    kw[k] = _number(sl, k, "slice", problems)
            if "plus_port" in sl:
                kw["plus_port"] = _number(sl, "plus_port", "slice", problems, integer=True)
            rc.slice = _build(SliceConfig, kw, "slice", problems)

    ch = doc.get("channel", {})
    _unknown(ch, _SECTIONS["channel"], "channel", problems)
    drift_tab = ch.get("drift", {})
    _unknown(drift_tab, _SECTIONS["drift"], "channel.drift", problems)
    drift = _build(DriftProcessParams, {k: _number(drift_tab, k, "channel.drift", problems) for k in drift_tab},
                   "channel.drift", problems)
    rc.dark_prob = _number(ch, "dark_prob", "channel", problems, rc.dark_prob)
    rc.misalignment = _number(ch, "misalignment", "channel", problems, rc.misalignment)
    if "eta_A" in ch or "eta_B" in ch:
        kw = {k: _number(ch, k, "channel", problems) for k in ("eta_A", "eta_B", "dark_prob", "misalignment",
                                                                "efficiency_scale") if k in ch}
        if drift is not None:
            kw["drift"] = drift
        rc.channel = _build(ChannelModel, kw, "channel", problems)
    elif mode == "simulate":
        problems.append("channel: simulate needs eta_A and eta_B")
    else:
        # still validate the shared fields
        for k, lo, hi in (("dark_prob", 0, 1), ("misalignment", 0, 0.5)):
            v = getattr(rc, k)
            if v is not None and not lo <= v < hi:
                problems.append(f"channel.{k}: must lie in [{lo}, {hi}), got {v}")

    sched = doc.get("schedule", {})
    _unknown(sched, _SECTIONS["schedule"], "schedule", problems)
    if sched:
        kw = {k: (_number(sched, k, "schedule", problems, integer=k in ("n_signal", "n_ref_slots", "frames_per_window")))
              for k in sched}
        built = _build(FrameSchedule, kw, "schedule", problems)
        if built is not None:
            rc.schedule = built

    sw = doc.get("sweep", {})
    _unknown(sw, _SECTIONS["sweep"], "sweep", problems)
    rc.attenuation_db_per_km = _number(sw, "attenuation_db_per_km", "sweep", problems, rc.attenuation_db_per_km)
    rc.eff_A = _number(sw, "eff_A", "sweep", problems, rc.eff_A)
    rc.eff_B = _number(sw, "eff_B", "sweep", problems, rc.eff_B)
    for k in ("eff_A", "eff_B"):
        if not 0 < getattr(rc, k) <= 1:
            problems.append(f"sweep.{k}: must lie in (0, 1], got {getattr(rc, k)}")
    if rc.attenuation_db_per_km < 0:
        problems.append(f"sweep.attenuation_db_per_km: must be non-negative, got {rc.attenuation_db_per_km}")
    if all(k in sw for k in ("from_km", "to_km", "step_km")):
        rc.sweep_range = tuple(_number(sw, k, "sweep", problems) for k in ("from_km", "to_km", "step_km"))

    paths = doc.get("paths", {})
    _unknown(paths, _SECTIONS["paths"], "paths", problems)
    rc.paths = {k: str(v) for k, v in paths.items()}

    if mode == "simulate":
        if rc.source_a is None and "source" not in doc:
            problems.append("source: simulate needs a [source] table")
        if rc.slice is None and "slice" not in doc:
            problems.append("slice: simulate needs a [slice] table")
    if problems:
        raise ConfigError(problems)
    return rc


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read ({exc.strerror})"]) from None
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from None
    return config_from_dict(doc, source_path=str(path))
