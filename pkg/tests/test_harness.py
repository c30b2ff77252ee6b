import json
import math

import numpy as np
import pytest

from wave_phy.harness import (
    CSV_COLUMNS,
    PRESETS,
    UNCODED_BPSK,
    BerPoint,
    ChannelTemplate,
    PointScenario,
    StopRule,
    SweepConfig,
    binomial_ci95,
    preset,
    read_csv,
    run_ber_point,
    run_sweep,
    theoretical_ber,
    validation_point,
    with_overrides,
    write_csv,
)

FIXED = StopRule(min_bits=10**12, min_errors=0, max_frames=5)


def small_config(**kw):
    base = dict(name="t", modes=("BPSK-1/2", "QPSK-1/2"), channel=ChannelTemplate(("Rician",)),
                snr_grid=(6.0, 12.0), speeds=(0.0, 50.0), symbols_per_frame=(5,), stop_rule=FIXED, seed=3)
    base.update(kw)
    return SweepConfig(**base)


# --- closed forms -------------------------------------------------------------------

def test_theoretical_bpsk_awgn():
    assert theoretical_ber("bpsk_awgn_uncoded", 9.6) == pytest.approx(9.74e-6, rel=0.05)
    assert theoretical_ber("bpsk_awgn_uncoded", 0.0) == pytest.approx(0.0786, rel=0.01)


def test_theoretical_bpsk_rayleigh():
    assert theoretical_ber("bpsk_rayleigh_uncoded", 0.0) == pytest.approx(0.1464, abs=1e-4)
    # high-SNR asymptote 1/(4 gamma)
    assert theoretical_ber("bpsk_rayleigh_uncoded", 40.0) == pytest.approx(2.5e-5, rel=0.01)


def test_theoretical_unknown_kind():
    with pytest.raises(ValueError):
        theoretical_ber("qpsk", 3.0)


def test_binomial_ci():
    assert binomial_ci95(0.5, 100) == pytest.approx(0.098)
    assert binomial_ci95(0.0, 100) == 0.0
    assert binomial_ci95(0.1, 0) == 0.0


# --- stop rule ------------------------------------------------------------------------

def test_stop_rule_semantics():
    rule = StopRule(min_bits=1000, min_errors=10, max_frames=50)
    assert not rule.done(999, 100, 1)
    assert not rule.done(10_000, 9, 1)
    assert rule.done(1000, 10, 1)
    assert rule.done(0, 0, 50)
    with pytest.raises(ValueError):
        StopRule(min_bits=0)
    with pytest.raises(ValueError):
        StopRule(max_frames=0)


def test_run_point_honours_stop_rule():
    rule = StopRule(min_bits=2000, min_errors=5, max_frames=1000)
    point = PointScenario(mode="BPSK-1/2", family="AWGN", symbols_per_frame=5, snr_db=2.0, stop_rule=rule)
    pt = run_ber_point(point)
    assert pt.bits >= 2000 and pt.bit_errors >= 5
    # the same streams cut one frame short must not yet satisfy the rule
    short = run_ber_point(PointScenario(**{**point.__dict__, "stop_rule": StopRule(10**12, 0, pt.frames - 1)}))
    assert not rule.done(short.bits, short.bit_errors, short.frames)


def test_run_point_frame_cap():
    pt = run_ber_point(PointScenario(mode="BPSK-1/2", family="AWGN", symbols_per_frame=2, snr_db=30,
                                     stop_rule=StopRule(min_bits=10**9, min_errors=1, max_frames=7)))
    assert pt.frames == 7
    assert pt.bits == 7 * (2 * 24 - 22)


# --- single points -----------------------------------------------------------------------

def test_huge_snr_gives_zero_errors():
    for family in ("AWGN", "Rician"):
        pt = run_ber_point(PointScenario(mode="16QAM-3/4", family=family, speed=0.0, symbols_per_frame=10,
                                         snr_db=300.0, stop_rule=FIXED))
        assert pt.bit_errors == 0 and pt.frame_errors == 0


def test_uncoded_awgn_8db_within_3_sigma():
    pt = validation_point("AWGN", 8.0, n_bits=200_000, seed=1)
    theory = theoretical_ber("bpsk_awgn_uncoded", 8.0)
    assert abs(pt.ber - theory) <= 3 * math.sqrt(theory * (1 - theory) / pt.bits)


def test_point_is_deterministic():
    p = PointScenario(mode="QPSK-3/4", family="Rayleigh", speed=50.0, symbols_per_frame=5, snr_db=10,
                      stop_rule=FIXED, seed=11)
    assert run_ber_point(p) == run_ber_point(p)
    assert run_ber_point(p) != run_ber_point(PointScenario(**{**p.__dict__, "seed": 12}))


def test_ci_coverage():
    theory = theoretical_ber("bpsk_awgn_uncoded", 6.0)
    covered = 0
    for seed in range(100):
        pt = validation_point("AWGN", 6.0, n_bits=20_000, seed=seed, chunk_symbols=100)
        lo, hi = pt.ber_interval
        covered += lo <= theory <= hi
    assert covered >= 90


def test_ber_point_intervals():
    pt = BerPoint("s", "BPSK-1/2", "AWGN", 0.0, 30, 10.0, bits=1000, bit_errors=10, frames=10, frame_errors=4)
    assert pt.ber == 0.01 and pt.fer == 0.4
    assert pt.ber_interval[1] - pt.ber_interval[0] == pytest.approx(2 * pt.ci95)
    assert pt.fer_interval[0] < 0.4 < pt.fer_interval[1]


def test_cluster_ci_matches_hand_computation():
    # four frames of 100 bits with 0, 0, 2, 10 errors
    per_frame = np.array([0, 0, 2, 10])
    pt = BerPoint("s", "BPSK-1/2", "AWGN", 0.0, 30, 10.0, bits=400, bit_errors=12, frames=4, frame_errors=2,
                  bit_error_sq=int(np.sum(per_frame**2)))
    expected = 1.96 * np.std(per_frame / 100, ddof=1) / 2
    assert pt.cluster_ci95 == pytest.approx(expected)
    assert pt.cluster_ci95 > pt.ci95


def test_cluster_ci_reduces_to_binomial_for_independent_bits():
    pt = validation_point("AWGN", 4.0, n_bits=200_000, chunk_symbols=1)
    assert pt.cluster_ci95 == pytest.approx(pt.ci95, rel=0.05)


# --- configs -------------------------------------------------------------------------------

def test_point_count_and_order():
    cfg = small_config()
    pts = cfg.points()
    assert len(pts) == 1 * 2 * 2 * 1 * 2
    assert [(p.mode, p.speed, p.snr_db) for p in pts[:3]] == [
        ("BPSK-1/2", 0.0, 6.0), ("BPSK-1/2", 0.0, 12.0), ("BPSK-1/2", 50.0, 6.0)]
    assert len({p.key for p in pts}) == len(pts)


def test_paired_points_share_streams():
    assert {p.key for p in small_config(paired=True).points()} == {()}


def test_config_validation():
    with pytest.raises(ValueError):
        small_config(snr_grid=(10.0, 5.0))
    with pytest.raises(ValueError):
        small_config(snr_grid=())
    with pytest.raises(ValueError):
        small_config(modes=("QPSK-5/6",))
    with pytest.raises(ValueError):
        small_config(speeds=(-1.0,))
    with pytest.raises(ValueError):
        ChannelTemplate(("Nakagami",))


def test_config_json_round_trip(tmp_path):
    cfg = small_config()
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps(cfg.to_dict()))
    assert SweepConfig.from_json(path) == cfg


@pytest.mark.parametrize("data", [
    {"modes": ["BPSK-1/2"], "snr_gird": [1, 2]},
    {"channel": {"families": ["AWGN"], "k": 3}},
    {"stop_rule": {"min_bits": 10, "max_bits": 3}},
])
def test_config_rejects_unknown_keys(data):
    with pytest.raises(ValueError, match="unknown"):
        SweepConfig.from_dict(data)


def test_default_grid():
    assert SweepConfig().snr_grid == tuple(float(s) for s in range(0, 31, 2))


def test_with_overrides():
    cfg = with_overrides(small_config(), snr_grid=(1.0,), max_frames=3, seed=None)
    assert cfg.snr_grid == (1.0,)
    assert cfg.stop_rule.max_frames == 3 and cfg.stop_rule.min_bits == FIXED.min_bits
    assert cfg.seed == 3


@pytest.mark.parametrize("name", PRESETS)
def test_presets(name):
    cfg = preset(name)
    assert cfg.name == name
    assert cfg.points()


def test_preset_shapes():
    assert len(preset("fig5").points()) == 8 * 3 * 16
    assert preset("fig6").modes == ("BPSK-1/2",)
    assert preset("fig7").channel.families == ("AWGN", "Rayleigh", "Rician")
    assert preset("fig8").symbols_per_frame == (1, 5, 10, 20, 30, 50, 100)
    with pytest.raises(ValueError, match="valid presets"):
        preset("fig9")


# --- sweeps and output -------------------------------------------------------------------

def test_sweep_deterministic_and_job_independent():
    cfg = small_config(stop_rule=StopRule(10**12, 0, 2))
    assert run_sweep(cfg) == run_sweep(cfg) == run_sweep(cfg, jobs=2)


def test_sweep_smoke_monotone_in_snr():
    cfg = small_config(modes=("BPSK-1/2",), snr_grid=(0.0, 30.0), speeds=(0.0,), paired=True,
                       stop_rule=StopRule(10**12, 0, 20))
    low, high = run_sweep(cfg)
    assert low.ber > high.ber


def test_csv_round_trip(tmp_path):
    pts = run_sweep(small_config(stop_rule=StopRule(10**12, 0, 1)))
    path = write_csv(pts, tmp_path / "out.csv", seed=3)
    text = path.read_text().splitlines()
    assert text[0].startswith("#") and "seed=3" in text[0]
    assert text[1].split(",") == list(CSV_COLUMNS)
    rows = read_csv(path)
    assert len(rows) == len(pts)
    for row, p in zip(rows, pts):
        assert row["mode"] == p.mode
        assert int(row["bits"]) == p.bits and int(row["bit_errors"]) == p.bit_errors
        assert float(row["ber"]) == pytest.approx(p.ber, rel=1e-5)


def test_csv_empty(tmp_path):
    path = write_csv([], tmp_path / "empty.csv")
    assert read_csv(path) == []


def test_plots(tmp_path):
    pytest.importorskip("matplotlib")
    from wave_phy.harness import write_plots

    pts = run_sweep(small_config(stop_rule=StopRule(10**12, 0, 1)))
    files = write_plots(pts, tmp_path)
    assert len(files) == 2 and all(f.suffix == ".svg" and f.stat().st_size > 0 for f in files)


def test_uncoded_mode_in_sweep():
    cfg = small_config(modes=(UNCODED_BPSK,), channel=ChannelTemplate(("AWGN",)), speeds=(0.0,))
    assert all(p.bits == 5 * 5 * 48 for p in run_sweep(cfg))


def test_validation_point_bit_count():
    pt = validation_point("Rayleigh", 10.0, n_bits=10_000, chunk_symbols=10)
    assert pt.bits >= 10_000
    assert np.isfinite(pt.ber)
