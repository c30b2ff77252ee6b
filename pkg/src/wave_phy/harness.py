"""Monte-Carlo BER/SNR engine, scenario presets and CSV/SVG output.

Randomness is keyed, never shared between processes: frame ``f`` of sweep
point ``p`` draws from ``SeedSequence(seed, spawn_key=(p, f))``, so results do
not depend on how points are scheduled across workers. With ``paired=True``
the point index is dropped from the key and every point replays the same frame
streams, which turns curve-to-curve comparisons into paired ones.
"""
from __future__ import annotations

import csv
import itertools
import json
import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .channel import (
    DEFAULT_RICIAN_K_DB,
    ChannelFamily,
    ChannelScenario,
    apply_awgn,
    apply_channel,
    fading_gains,
)
from .numerology import PHY, McsMode, mcs_table, mode_by_name, payload_capacity
from .rxchain import receive_frame
from .txchain import transmit_frame

UNCODED_BPSK = "uncoded-BPSK"
SNR_CONVENTION = (
    "snr_db = mean power of non-zero samples (preamble included) / complex noise variance "
    "per 10 Msample/s sample; fading SNR is the average over the fading distribution"
)
PRESETS = ("fig5", "fig6", "fig7", "fig8")
CSV_COLUMNS = (
    "scenario", "mode", "channel", "speed_kmh", "symbols_per_frame", "snr_db",
    "bits", "bit_errors", "frames", "frame_errors", "ber", "ci95",
)


@dataclass(frozen=True)
class StopRule:
    min_bits: int = 100_000
    min_errors: int = 100
    max_frames: int = 100_000

    def __post_init__(self):
        if self.min_bits < 1:
            raise ValueError("min_bits must be >= 1")
        if self.min_errors < 0 or self.max_frames < 1:
            raise ValueError("min_errors must be >= 0 and max_frames >= 1")

    def done(self, bits: int, errors: int, frames: int) -> bool:
        return (errors >= self.min_errors and bits >= self.min_bits) or frames >= self.max_frames


@dataclass(frozen=True)
class ChannelTemplate:
    families: tuple[str, ...] = ("Rician",)
    rician_k_db: float = DEFAULT_RICIAN_K_DB
    carrier_frequency: float = PHY.carrier_frequency

    def __post_init__(self):
        fams = (self.families,) if isinstance(self.families, str) else self.families
        object.__setattr__(self, "families", tuple(ChannelFamily.parse(f).value for f in fams))


@dataclass(frozen=True)
class SweepConfig:
    name: str = "sweep"
    modes: tuple[str, ...] = tuple(m.name for m in mcs_table())
    channel: ChannelTemplate = field(default_factory=ChannelTemplate)
    snr_grid: tuple[float, ...] = tuple(float(s) for s in range(0, 31, 2))
    speeds: tuple[float, ...] = (0.0,)
    symbols_per_frame: tuple[int, ...] = (30,)
    stop_rule: StopRule = field(default_factory=StopRule)
    seed: int = 0
    # reuse one set of per-frame random streams for every point (common random numbers)
    paired: bool = False

    def __post_init__(self):
        modes = tuple(m if m == UNCODED_BPSK else mode_by_name(m).name for m in self.modes)
        object.__setattr__(self, "modes", modes)
        object.__setattr__(self, "snr_grid", tuple(float(s) for s in self.snr_grid))
        object.__setattr__(self, "speeds", tuple(float(s) for s in self.speeds))
        object.__setattr__(self, "symbols_per_frame", tuple(int(n) for n in self.symbols_per_frame))
        if not self.snr_grid:
            raise ValueError("snr_grid must not be empty")
        if any(b <= a for a, b in zip(self.snr_grid, self.snr_grid[1:])):
            raise ValueError("snr_grid must be strictly increasing")
        if not self.modes or not self.speeds or not self.symbols_per_frame:
            raise ValueError("modes, speeds and symbols_per_frame must not be empty")
        if any(s < 0 for s in self.speeds) or any(n < 1 for n in self.symbols_per_frame):
            raise ValueError("speeds must be >= 0 and symbols_per_frame >= 1")

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        _reject_unknown(data, cls, "config")
        data = dict(data)
        if "channel" in data:
            _reject_unknown(data["channel"], ChannelTemplate, "channel")
            data["channel"] = ChannelTemplate(**data["channel"])
        if "stop_rule" in data:
            _reject_unknown(data["stop_rule"], StopRule, "stop_rule")
            data["stop_rule"] = StopRule(**data["stop_rule"])
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "SweepConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))

    def to_dict(self) -> dict:
        return json.loads(json.dumps(asdict(self)))

    def points(self) -> list["PointScenario"]:
        """Every sweep point in deterministic product order."""
        out = []
        product = itertools.product(
            self.channel.families, self.modes, self.speeds, self.symbols_per_frame, self.snr_grid
        )
        for index, (family, mode, speed, n_sym, snr) in enumerate(product):
            out.append(PointScenario(
                mode=mode, family=family, speed=speed, symbols_per_frame=n_sym, snr_db=snr,
                rician_k_db=self.channel.rician_k_db, carrier_frequency=self.channel.carrier_frequency,
                stop_rule=self.stop_rule, seed=self.seed, key=() if self.paired else (index,),
                scenario=self.name,
            ))
        return out


def _reject_unknown(data: dict, cls, what: str) -> None:
    if not isinstance(data, dict):
        raise ValueError(f"{what} must be a JSON object")
    unknown = set(data) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown {what} keys: {sorted(unknown)}")


@dataclass(frozen=True)
class PointScenario:
    mode: str = "BPSK-1/2"
    family: str = "AWGN"
    speed: float = 0.0
    symbols_per_frame: int = 30
    snr_db: float = 10.0
    rician_k_db: float = DEFAULT_RICIAN_K_DB
    carrier_frequency: float = PHY.carrier_frequency
    stop_rule: StopRule = field(default_factory=StopRule)
    seed: int = 0
    key: tuple[int, ...] = ()
    scenario: str = "point"


@dataclass(frozen=True)
class BerPoint:
    scenario: str
    mode: str
    channel: str
    speed_kmh: float
    symbols_per_frame: int
    snr_db: float
    bits: int
    bit_errors: int
    frames: int
    frame_errors: int
    # sum over frames of (bit errors in the frame)^2, for the frame-clustered interval
    bit_error_sq: int = 0
    # per-frame bit error counts, kept only on request (see paired_difference)
    frame_bit_errors: tuple[int, ...] | None = field(default=None, compare=False, repr=False)

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits if self.bits else 0.0

    @property
    def fer(self) -> float:
        return self.frame_errors / self.frames if self.frames else 0.0

    @property
    def ci95(self) -> float:
        return binomial_ci95(self.ber, self.bits)

    @property
    def fer_ci95(self) -> float:
        return binomial_ci95(self.fer, self.frames)

    @property
    def cluster_ci95(self) -> float:
        """95% half-width treating frames, not bits, as the independent trials.

        Coded errors arrive in bursts inside a frame, so the binomial interval is
        too narrow whenever a few failed frames carry most of the errors.
        """
        if self.frames < 2 or not self.bits:
            return 0.0
        mean = self.bit_errors / self.frames
        var = max(self.bit_error_sq - self.frames * mean * mean, 0.0) / (self.frames - 1)
        return 1.96 * math.sqrt(var / self.frames) * self.frames / self.bits

    @property
    def ber_interval(self) -> tuple[float, float]:
        return self.ber - self.ci95, self.ber + self.ci95

    @property
    def fer_interval(self) -> tuple[float, float]:
        return self.fer - self.fer_ci95, self.fer + self.fer_ci95

    @property
    def cluster_interval(self) -> tuple[float, float]:
        return self.ber - self.cluster_ci95, self.ber + self.cluster_ci95


def binomial_ci95(p: float, n: int) -> float:
    """Half-width of the normal-approximation 95% interval."""
    return 1.96 * math.sqrt(p * (1 - p) / n) if n else 0.0


def q_function(x: float) -> float:
    return 0.5 * math.erfc(x / math.sqrt(2))


def theoretical_ber(kind: str, snr_db: float) -> float:
    """Closed-form uncoded BPSK BER at per-bit SNR ``snr_db``."""
    g = 10 ** (snr_db / 10)
    if kind == "bpsk_awgn_uncoded":
        return q_function(math.sqrt(2 * g))
    if kind == "bpsk_rayleigh_uncoded":
        return 0.5 * (1 - math.sqrt(g / (1 + g)))
    raise ValueError(f"unknown kind {kind!r}; valid: bpsk_awgn_uncoded, bpsk_rayleigh_uncoded")


# --- single point ------------------------------------------------------------------

def _frame_uncoded(point: PointScenario, snr_db: float, ss: np.random.SeedSequence):
    n = point.symbols_per_frame * PHY.n_data_subcarriers
    bit_ss, fade_ss, noise_ss = ss.spawn(3)
    bits = np.random.default_rng(bit_ss).integers(0, 2, n, dtype=np.uint8)
    x = 2.0 * bits - 1.0
    # one independent flat-fading draw per bit (ideal interleaving)
    g = fading_gains(point.family, 1, 0.0, point.rician_k_db, fade_ss, n_realizations=n)[:, 0]
    y = apply_awgn(g * x, snr_db, noise_ss, power=1.0)
    decided = (np.real(np.conj(g) * y) > 0).astype(np.uint8)
    return bits, decided


def _frame_coded(point: PointScenario, mode: McsMode, snr_db: float, ss: np.random.SeedSequence):
    bit_ss, chan_ss = ss.spawn(2)
    n_sym = point.symbols_per_frame
    payload = np.random.default_rng(bit_ss).integers(0, 2, payload_capacity(mode, n_sym), dtype=np.uint8)
    frame = transmit_frame(payload, mode, n_sym)
    scenario = ChannelScenario(
        family=point.family, snr_db=snr_db, speed=point.speed, rician_k_db=point.rician_k_db,
        carrier_frequency=point.carrier_frequency, seed=chan_ss,
    )
    rx = apply_channel(frame.samples, scenario)
    return payload, receive_frame(rx, mode, n_sym, payload.size)


def run_ber_point(point: PointScenario, snr_db: float | None = None, keep_frames: bool = False) -> BerPoint:
    """Accumulate frames until the stop rule is met.

    With ``keep_frames`` the per-frame error counts are stored on the result.
    """
    snr = point.snr_db if snr_db is None else float(snr_db)
    mode = None if point.mode == UNCODED_BPSK else mode_by_name(point.mode)
    rule = point.stop_rule
    bits = errors = frames = frame_errors = error_sq = 0
    per_frame = []
    while not rule.done(bits, errors, frames):
        ss = np.random.SeedSequence(point.seed, spawn_key=point.key + (frames,))
        if mode is None:
            sent, got = _frame_uncoded(point, snr, ss)
        else:
            sent, got = _frame_coded(point, mode, snr, ss)
        e = int(np.count_nonzero(sent != got))
        bits += sent.size
        errors += e
        error_sq += e * e
        if keep_frames:
            per_frame.append(e)
        frames += 1
        frame_errors += e > 0
    return BerPoint(
        scenario=point.scenario, mode=point.mode, channel=ChannelFamily.parse(point.family).value,
        speed_kmh=point.speed, symbols_per_frame=point.symbols_per_frame, snr_db=snr,
        bits=bits, bit_errors=errors, frames=frames, frame_errors=frame_errors,
        bit_error_sq=error_sq, frame_bit_errors=tuple(per_frame) if keep_frames else None,
    )


def paired_difference(a: BerPoint, b: BerPoint) -> tuple[float, float]:
    """Mean and 95% half-width of the per-frame BER difference ``b - a``.

    Meant for points run on shared per-frame streams (``paired`` sweeps), where
    frame ``f`` of both points saw the same payload, fading and noise draws.
    """
    if a.frame_bit_errors is None or b.frame_bit_errors is None:
        raise ValueError("both points need per-frame errors (run with keep_frames=True)")
    if a.frames != b.frames or a.frames < 2:
        raise ValueError("points must cover the same number (>= 2) of frames")
    ea = np.asarray(a.frame_bit_errors) / (a.bits / a.frames)
    eb = np.asarray(b.frame_bit_errors) / (b.bits / b.frames)
    d = eb - ea
    return float(d.mean()), 1.96 * float(d.std(ddof=1)) / math.sqrt(d.size)


# --- sweeps ----------------------------------------------------------------------

def run_sweep(config: SweepConfig, jobs: int = 1, keep_frames: bool = False) -> list[BerPoint]:
    points = config.points()
    run = partial(run_ber_point, keep_frames=keep_frames)
    if jobs <= 1 or len(points) <= 1:
        return [run(p) for p in points]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, points))


def preset(name: str) -> SweepConfig:
    all_modes = tuple(m.name for m in mcs_table())
    grid = tuple(float(s) for s in range(0, 31, 2))
    presets = {
        "fig5": SweepConfig(name="fig5", modes=all_modes, channel=ChannelTemplate(("Rician",)),
                            snr_grid=grid, speeds=(0, 20, 50), symbols_per_frame=(30,)),
        "fig6": SweepConfig(name="fig6", modes=("BPSK-1/2",), channel=ChannelTemplate(("Rician",)),
                            snr_grid=grid, speeds=(0, 20, 50), symbols_per_frame=(30,)),
        "fig7": SweepConfig(name="fig7", modes=all_modes,
                            channel=ChannelTemplate(("AWGN", "Rayleigh", "Rician")),
                            snr_grid=grid, speeds=(50,), symbols_per_frame=(30,)),
        "fig8": SweepConfig(name="fig8", modes=all_modes, channel=ChannelTemplate(("Rician",)),
                            snr_grid=(10,), speeds=(50,), symbols_per_frame=(1, 5, 10, 20, 30, 50, 100)),
    }
    try:
        return presets[name]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; valid presets: {', '.join(PRESETS)}") from None


# --- output ----------------------------------------------------------------------

def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_csv(points, path, seed: int | None = None) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        fh.write(f"# {SNR_CONVENTION}; seed={seed if seed is not None else 'n/a'}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_COLUMNS)
        for p in points:
            writer.writerow([
                p.scenario, p.mode, p.channel, _fmt(p.speed_kmh), p.symbols_per_frame, _fmt(p.snr_db),
                p.bits, p.bit_errors, p.frames, p.frame_errors, _fmt(p.ber), _fmt(p.ci95),
            ])
    return path


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        rows = csv.DictReader(line for line in fh if not line.startswith("#"))
        return list(rows)


def write_plots(points, outdir) -> list[Path]:
    """One log-scale SVG per (channel, speed, frame size) group; BER vs frame size when SNR is fixed."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    written = []
    snrs = sorted({p.snr_db for p in points})
    if len(snrs) == 1:
        groups = itertools.groupby(sorted(points, key=lambda p: (p.channel, p.speed_kmh)),
                                   key=lambda p: (p.channel, p.speed_kmh))
        for (chan, speed), grp in groups:
            grp = list(grp)
            fig, ax = plt.subplots()
            for mode in dict.fromkeys(p.mode for p in grp):
                pts = [p for p in grp if p.mode == mode]
                ax.semilogy([p.symbols_per_frame for p in pts], [max(p.ber, 1e-7) for p in pts], "o-", label=mode)
            ax.set_xlabel("OFDM symbols per frame")
            ax.set_ylabel("BER")
            ax.set_title(f"{chan}, {speed:g} km/h, SNR {snrs[0]:g} dB")
            ax.legend(fontsize="small")
            out = outdir / f"ber_vs_size_{chan}_{speed:g}kmh.svg"
            fig.savefig(out, format="svg")
            plt.close(fig)
            written.append(out)
        return written
    key = lambda p: (p.channel, p.speed_kmh, p.symbols_per_frame)  # noqa: E731
    for (chan, speed, n_sym), grp in itertools.groupby(sorted(points, key=key), key=key):
        grp = list(grp)
        fig, ax = plt.subplots()
        for mode in dict.fromkeys(p.mode for p in grp):
            pts = sorted((p for p in grp if p.mode == mode), key=lambda p: p.snr_db)
            ax.semilogy([p.snr_db for p in pts], [max(p.ber, 1e-7) for p in pts], "o-", label=mode)
        ax.set_xlabel("SNR (dB)")
        ax.set_ylabel("BER")
        ax.set_title(f"{chan}, {speed:g} km/h, {n_sym} symbols/frame")
        ax.legend(fontsize="small")
        out = outdir / f"ber_{chan}_{speed:g}kmh_{n_sym}sym.svg"
        fig.savefig(out, format="svg")
        plt.close(fig)
        written.append(out)
    return written


# --- closed-form validation -----------------------------------------------------

VALIDATION_CASES = (
    ("bpsk_awgn_uncoded", "AWGN", (4.0, 6.0, 8.0)),
    ("bpsk_rayleigh_uncoded", "Rayleigh", (0.0, 10.0, 20.0)),
)


def validation_point(family: str, snr_db: float, n_bits: int = 1_000_000, seed: int = 0,
                     chunk_symbols: int = 2000) -> BerPoint:
    """Uncoded BPSK over the channel module at per-bit SNR ``snr_db``."""
    chunk = chunk_symbols * PHY.n_data_subcarriers
    point = PointScenario(
        mode=UNCODED_BPSK, family=family, symbols_per_frame=chunk_symbols, snr_db=snr_db,
        stop_rule=StopRule(min_bits=n_bits, min_errors=0, max_frames=-(-n_bits // chunk)),
        seed=seed, scenario="validate",
    )
    return run_ber_point(point)


def run_validation(n_bits: int = 1_000_000, seed: int = 0, sigmas: float = 3.0):
    """Yield ``(kind, snr_db, point, theory, passed)`` for every closed-form oracle case."""
    for kind, family, snrs in VALIDATION_CASES:
        for snr in snrs:
            pt = validation_point(family, snr, n_bits, seed)
            theory = theoretical_ber(kind, snr)
            sigma = math.sqrt(theory * (1 - theory) / pt.bits)
            yield kind, snr, pt, theory, abs(pt.ber - theory) <= sigmas * sigma


def with_overrides(config: SweepConfig, **overrides) -> SweepConfig:
    """Copy of ``config`` with top-level or stop-rule fields replaced (``None`` values ignored)."""
    rule_keys = {f.name for f in fields(StopRule)}
    rule = {k: v for k, v in overrides.items() if k in rule_keys and v is not None}
    top = {k: v for k, v in overrides.items() if k not in rule_keys and v is not None}
    if rule:
        top["stop_rule"] = replace(config.stop_rule, **rule)
    return replace(config, **top)
