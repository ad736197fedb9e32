"""Seeded synthetic call-detail records with planted, socially contagious churn.

The generator draws a power-law social graph, plants churners month by month
(a fraction ``homophily`` of each month's churners are neighbours of the
previous month's churners), then samples calls along the ties with
day-of-week and hour-of-day activity profiles. Churners make and receive no
calls after their churn time.
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import TextIO

import numpy as np

from .cdr import DAY, MONTH, N_MONTHS, ChurnLabels, CdrStore, make_store, monthly_labels
from .exceptions import ConfigError

DEFAULT_EPOCH = 1_420_416_000  # Monday 2015-01-05 00:00 UTC
DOW_WEIGHTS = (1.0, 1.0, 1.0, 1.0, 1.1, 0.7, 0.6)
HOUR_WEIGHTS = (0.1, 0.05, 0.05, 0.05, 0.05, 0.1, 0.3, 0.6,
                0.9, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0,
                1.0, 1.0, 1.1, 1.1, 1.0, 0.8, 0.5, 0.2)


@dataclass(frozen=True)
class SynthConfig:
    n_customers: int = 10_000
    churn_rate: float = 0.05
    sparsity: float = 1e-3
    homophily: float = 0.5
    exponent: float = 2.5
    min_degree: int = 3
    one_way: float = 0.2          # share of ties with calls in one direction only
    call_rate: float = 0.1        # mean calls per day per tie direction
    rate_sigma: float = 0.6       # log-normal spread of tie rates
    duration_mu: float = 4.5      # log-seconds
    duration_sigma: float = 1.0
    short_calls: float = 0.03     # share of 0-3 second calls
    dow_weights: tuple = DOW_WEIGHTS
    hour_weights: tuple = HOUR_WEIGHTS
    epoch: int = DEFAULT_EPOCH
    seed: int = 0

    def __post_init__(self):
        if self.n_customers < 10:
            raise ConfigError("n_customers must be at least 10")
        if not 0 <= self.churn_rate < 1:
            raise ConfigError("churn_rate must lie in [0, 1)")
        if not 0 < self.sparsity < 1:
            raise ConfigError("sparsity must lie in (0, 1)")
        if not 0 <= self.homophily <= 1:
            raise ConfigError("homophily must lie in [0, 1]")
        if not self.exponent > 2:
            raise ConfigError("power-law exponent must exceed 2 for a finite mean degree")
        if not 0 <= self.one_way <= 1 or not 0 <= self.short_calls < 1:
            raise ConfigError("one_way and short_calls are fractions")
        if self.call_rate <= 0 or self.rate_sigma < 0 or self.duration_sigma < 0:
            raise ConfigError("call-rate and duration parameters must be positive")
        if len(self.dow_weights) != 7 or len(self.hour_weights) != 24:
            raise ConfigError("need 7 day-of-week and 24 hour-of-day weights")
        if min(self.dow_weights) < 0 or min(self.hour_weights) < 0:
            raise ConfigError("activity weights must be non-negative")

    @property
    def mean_degree(self) -> float:
        return self.sparsity * (self.n_customers - 1)

    def as_dict(self) -> dict:
        d = asdict(self)
        d["dow_weights"] = list(self.dow_weights)
        d["hour_weights"] = list(self.hour_weights)
        return d

    @classmethod
    def from_settings(cls, settings, prefix: str = "synth") -> "SynthConfig":
        s = settings.section(prefix)
        base = cls.__dataclass_fields__
        kw = {}
        for name, f in base.items():
            if name in ("dow_weights", "hour_weights"):
                if s.has(name):
                    kw[name] = tuple(float(x) for x in s.list(name, []))
                continue
            if not s.has(name):
                continue
            kind = type(f.default)
            kw[name] = s.int(name, f.default) if kind is int else s.float(name, f.default)
        return cls(**kw)


@dataclass(frozen=True, eq=False)
class SocialGraph:
    """Undirected ties ``(a, b)`` with per-direction daily call rates (0 = silent)."""

    a: np.ndarray
    b: np.ndarray
    rate_ab: np.ndarray
    rate_ba: np.ndarray


def _ids(n: int) -> np.ndarray:
    width = len(str(n))
    return np.array([f"C{i:0{width}d}" for i in range(1, n + 1)])


def _degrees(cfg: SynthConfig, rng) -> np.ndarray:
    n, alpha = cfg.n_customers, cfg.exponent
    target = cfg.mean_degree
    x_min = target * (alpha - 2) / (alpha - 1)
    if x_min < cfg.min_degree:
        raise ConfigError(
            f"mean degree {target:.2f} (sparsity {cfg.sparsity:g}) cannot support minimum degree "
            f"{cfg.min_degree} under exponent {alpha}; raise sparsity or lower min_degree"
        )
    u = rng.random(n)
    deg = x_min * (1.0 - u) ** (-1.0 / (alpha - 1))
    return np.clip(np.floor(deg + rng.random(n)), cfg.min_degree, n - 1).astype(np.int64)


def _ties(cfg: SynthConfig, rng) -> tuple[np.ndarray, np.ndarray]:
    """Configuration-model pairing, then degree-weighted top-up to the target edge count."""
    n = cfg.n_customers
    deg = _degrees(cfg, rng)
    stubs = np.repeat(np.arange(n), deg)
    if stubs.size % 2:
        stubs = np.append(stubs, rng.integers(n))
    rng.shuffle(stubs)
    a, b = stubs[0::2], stubs[1::2]
    keys = np.unique(np.minimum(a, b)[a != b] * n + np.maximum(a, b)[a != b])
    target = int(round(cfg.mean_degree * n / 2))
    p = deg / deg.sum()
    for _ in range(50):
        short = target - keys.size
        if short <= 0:
            break
        x = rng.choice(n, size=2 * short, p=p)
        y = rng.choice(n, size=2 * short, p=p)
        ok = x != y
        extra = np.minimum(x, y)[ok] * n + np.maximum(x, y)[ok]
        extra = np.setdiff1d(np.unique(extra), keys)
        rng.shuffle(extra)
        keys = np.union1d(keys, extra[:short])
    # pairing drops self-loops and multi-edges; patch nodes left under the minimum
    for _ in range(50):
        have = np.bincount(np.concatenate([keys // n, keys % n]), minlength=n)
        lack = np.clip(cfg.min_degree - have, 0, None)
        if not lack.any():
            break
        x = np.repeat(np.arange(n), lack)
        y = rng.choice(n, size=x.size, p=p)
        ok = x != y
        extra = np.minimum(x, y)[ok] * n + np.maximum(x, y)[ok]
        keys = np.union1d(keys, extra)
    return keys // n, keys % n


def social_graph(cfg: SynthConfig, rng) -> SocialGraph:
    a, b = _ties(cfg, rng)
    m = a.size
    sig = cfg.rate_sigma
    scale = cfg.call_rate * math.exp(-sig * sig / 2)
    r_ab = scale * np.exp(sig * rng.standard_normal(m))
    r_ba = scale * np.exp(sig * rng.standard_normal(m))
    one_way = rng.random(m) < cfg.one_way
    forward = rng.random(m) < 0.5
    # one-way ties keep their total rate in a single direction
    total = r_ab + r_ba
    r_ab = np.where(one_way, np.where(forward, total, 0.0), r_ab)
    r_ba = np.where(one_way, np.where(forward, 0.0, total), r_ba)
    return SocialGraph(a, b, r_ab, r_ba)


def _neighbours(g: SocialGraph, n: int):
    """CSR-style adjacency with tie strength (sum of both rates)."""
    src = np.concatenate([g.a, g.b])
    dst = np.concatenate([g.b, g.a])
    w = np.concatenate([g.rate_ab + g.rate_ba] * 2)
    order = np.lexsort((dst, src))
    src, dst, w = src[order], dst[order], w[order]
    ptr = np.searchsorted(src, np.arange(n + 1))
    return ptr, dst, w


def plant_churn(cfg: SynthConfig, g: SocialGraph, rng) -> np.ndarray:
    """Churn timestamp per customer (-1 = never churns) for months M1..M5."""
    n = cfg.n_customers
    ptr, dst, w = _neighbours(g, n)
    churn_at = np.full(n, -1, dtype=np.int64)
    prev: np.ndarray = np.zeros(0, dtype=np.int64)
    for m in range(1, N_MONTHS):
        alive = np.flatnonzero(churn_at < 0)
        k = int(round(cfg.churn_rate * alive.size))
        chosen: list[int] = []
        taken = np.zeros(n, dtype=bool)
        n_social = int(round(cfg.homophily * k)) if prev.size else 0
        attempts = 0
        while len(chosen) < n_social and attempts < 50 * max(n_social, 1):
            attempts += 1
            c = prev[rng.integers(prev.size)]
            nb, wt = dst[ptr[c]:ptr[c + 1]], w[ptr[c]:ptr[c + 1]]
            ok = (churn_at[nb] < 0) & ~taken[nb]
            if not ok.any():
                continue
            pick = rng.choice(nb[ok], p=wt[ok] / wt[ok].sum())
            taken[pick] = True
            chosen.append(int(pick))
        rest = alive[~taken[alive]]
        fill = rng.choice(rest, size=min(k - len(chosen), rest.size), replace=False)
        month = np.concatenate([np.asarray(chosen, dtype=np.int64), fill.astype(np.int64)])
        start = cfg.epoch + (m - 1) * MONTH
        day = rng.integers(1, 28, size=month.size)
        churn_at[month] = start + day * DAY + rng.integers(0, DAY, size=month.size)
        prev = np.sort(month)
    return churn_at


def _calls(cfg: SynthConfig, g: SocialGraph, churn_at: np.ndarray, rng):
    n_days = N_MONTHS * MONTH // DAY
    caller = np.concatenate([g.a, g.b])
    callee = np.concatenate([g.b, g.a])
    rate = np.concatenate([g.rate_ab, g.rate_ba])
    count = rng.poisson(rate * n_days)
    caller = np.repeat(caller, count)
    callee = np.repeat(callee, count)
    total = caller.size

    dow = np.asarray(cfg.dow_weights, dtype=float)
    day_w = dow[(np.arange(n_days) + (cfg.epoch // DAY + 3)) % 7]
    day = rng.choice(n_days, size=total, p=day_w / day_w.sum())
    hw = np.asarray(cfg.hour_weights, dtype=float)
    hour = rng.choice(24, size=total, p=hw / hw.sum())
    start = cfg.epoch + day * DAY + hour * 3600 + rng.integers(0, 3600, size=total)

    dur = np.exp(cfg.duration_mu + cfg.duration_sigma * rng.standard_normal(total))
    dur = np.maximum(np.round(dur), 4).astype(np.int64)
    short = rng.random(total) < cfg.short_calls
    dur[short] = rng.integers(0, 4, size=int(short.sum()))

    end = np.where(churn_at < 0, np.iinfo(np.int64).max, churn_at)
    keep = (start < end[caller]) & (start < end[callee])
    return caller[keep], callee[keep], start[keep], dur[keep]


def generate(cfg: SynthConfig) -> tuple[CdrStore, ChurnLabels]:
    """Synthetic store and ground-truth churners (``churndate`` = planted churn time)."""
    rng = np.random.default_rng(cfg.seed)
    g = social_graph(cfg, rng)
    churn_at = plant_churn(cfg, g, rng)
    caller, callee, start, dur = _calls(cfg, g, churn_at, rng)
    ids = _ids(cfg.n_customers)
    store = make_store(ids, caller, callee, start, dur, epoch=cfg.epoch)
    truth = ChurnLabels(ids, churn_at >= 0, churn_at, (cfg.epoch, cfg.epoch + N_MONTHS * MONTH))
    return store, truth


def write_labels(labels: ChurnLabels, fh: TextIO, epoch: int | None = None) -> None:
    """Ground truth as ``customer_id,is_churner,churndate,month``."""
    epoch = labels.window[0] if epoch is None else epoch
    fh.write("customer_id,is_churner,churndate,month\n")
    for cid, c, d in zip(labels.customers.tolist(), labels.is_churner.tolist(), labels.churndate.tolist()):
        month = (d - epoch) // MONTH + 1 if c else 0
        fh.write(f"{cid},{int(c)},{int(d)},{int(month)}\n")


def read_labels(fh: TextIO) -> ChurnLabels:
    next(fh)
    ids, churn, date = [], [], []
    for line in fh:
        if not line.strip():
            continue
        cid, c, d, _ = line.rstrip("\n").split(",")
        ids.append(cid)
        churn.append(c == "1")
        date.append(int(d))
    return ChurnLabels(np.array(ids), np.array(churn, dtype=bool), np.array(date, dtype=np.int64), (0, 0))


@dataclass
class Diagnostics:
    churn_rate: list[float]
    target_churn_rate: float
    sparsity: float
    target_sparsity: float
    degree_mean: float
    degree_max: int
    degree_min: int
    homophily_lift: float
    flags: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.flags

    def as_dict(self) -> dict:
        return asdict(self)


def verify(store: CdrStore, labels: ChurnLabels | None = None, cfg: SynthConfig | None = None,
           tolerance: float = 0.2) -> Diagnostics:
    """Realised churn rates (from the 30-day rule), sparsity, degrees and neighbour-churn lift.

    With ground-truth ``labels``, calls after a churn time are flagged.
    Deviations above ``tolerance`` (relative) from the configured targets are
    listed in ``flags``.
    """
    n = store.n_customers
    a = store.caller.astype(np.int64)
    b = store.callee.astype(np.int64)
    keys = np.unique(np.minimum(a, b) * n + np.maximum(a, b))
    ta, tb = keys // n, keys % n
    deg = np.bincount(np.concatenate([ta, tb]), minlength=n)
    sparsity = 2.0 * keys.size / (n * (n - 1))

    lab = monthly_labels(store)
    rates, lifts_num, lifts_den = [], 0.0, 0.0
    prev = np.zeros(n, dtype=bool)
    prev_new = np.zeros(n, dtype=bool)
    for m in range(1, N_MONTHS):
        cur = lab[m].is_churner
        alive = ~prev
        new = cur & alive
        rates.append(float(new.sum() / max(alive.sum(), 1)))
        if m > 1 and prev_new.any():
            hit = np.zeros(n, dtype=bool)
            hit[ta[prev_new[tb]]] = True
            hit[tb[prev_new[ta]]] = True
            exposed = alive & hit
            if exposed.any() and new.any():
                lifts_num += float(new[exposed].mean())
                lifts_den += float(new[alive].mean())
        prev_new = new
        prev = cur | prev
    lift = lifts_num / lifts_den if lifts_den > 0 else float("nan")

    flags = []
    if labels is not None:
        gone = np.where(labels.is_churner, labels.churndate, np.iinfo(np.int64).max)
        pos = store.index_of(labels.customers)
        end = np.full(n, np.iinfo(np.int64).max)
        end[pos] = gone
        late = int(np.count_nonzero((store.start >= end[a]) | (store.start >= end[b])))
        if late:
            flags.append(f"{late} calls after a ground-truth churn time")
    if cfg is not None:
        mean_rate = float(np.mean(rates))
        if cfg.churn_rate > 0 and abs(mean_rate - cfg.churn_rate) > tolerance * cfg.churn_rate:
            flags.append(f"churn rate {mean_rate:.4f} deviates from target {cfg.churn_rate}")
        if cfg.churn_rate == 0 and mean_rate > 0:
            flags.append(f"churn rate {mean_rate:.4f} but target is 0")
        if abs(sparsity - cfg.sparsity) > tolerance * cfg.sparsity:
            flags.append(f"sparsity {sparsity:.3g} deviates from target {cfg.sparsity:g}")
    return Diagnostics(
        churn_rate=rates,
        target_churn_rate=cfg.churn_rate if cfg else float("nan"),
        sparsity=sparsity,
        target_sparsity=cfg.sparsity if cfg else float("nan"),
        degree_mean=float(deg.mean()),
        degree_max=int(deg.max()) if n else 0,
        degree_min=int(deg.min()) if n else 0,
        homophily_lift=lift,
        flags=flags,
    )
