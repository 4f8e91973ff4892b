import logging
import math

import numpy as np
import pytest
from scipy import stats as sps

from fedfade.channel import Nakagami, Rayleigh, Rician
from fedfade.linkmath import LinkConfig, outage_probability, sfl_round_duration
from fedfade.scheduler import Policy, execute_round, frfl_select_rate, select_clients

K_12DB = 10**1.2

CFG = LinkConfig(bandwidth_hz=1e6, quality_factor=1.0, payload_bits=1_000_000)

MODELS = [
    Rayleigh(sigma2=1.0),
    Rician(sigma2=1.0, k_factor=K_12DB),
    Nakagami(sigma2=1.0, m=3.0),
]


def test_policy_validation():
    Policy.sfl()
    Policy.frfl(0.2)
    Policy.frfl_fixed(1e6)
    with pytest.raises(ValueError):
        Policy.frfl(0.0)
    with pytest.raises(ValueError):
        Policy.frfl(1.0)
    with pytest.raises(ValueError):
        Policy.frfl_fixed(0.0)
    with pytest.raises(ValueError):
        Policy("greedy")


def test_select_clients_full_pool():
    ids = select_clients(17, 17, np.random.default_rng(0))
    assert sorted(ids) == list(range(17))


def test_select_clients_uniform_chi2():
    rng = np.random.default_rng(1)
    n = 8
    counts = np.zeros(n)
    for _ in range(100_000):
        counts[select_clients(n, 1, rng)[0]] += 1
    result = sps.chisquare(counts)
    assert result.pvalue > 0.01


def test_select_clients_deterministic():
    a = select_clients(100, 10, np.random.default_rng(33))
    b = select_clients(100, 10, np.random.default_rng(33))
    assert np.array_equal(a, b)
    with pytest.raises(ValueError):
        select_clients(5, 6, np.random.default_rng(0))


def test_frfl_rate_rayleigh_closed_form():
    rate = frfl_select_rate(CFG, Rayleigh(1.0), Policy.frfl(0.5), 20)
    assert rate == pytest.approx(1e6 * math.log2(1.0 + math.sqrt(2 * math.log(2))), rel=1e-12)


def test_frfl_rate_vanishes_with_epsilon():
    rates = [frfl_select_rate(CFG, Rayleigh(1.0), Policy.frfl(eps), 10)
             for eps in (1e-6, 1e-4, 1e-2)]
    assert rates[0] < rates[1] < rates[2]
    assert rates[0] < 2e3


@pytest.mark.parametrize("model", MODELS, ids=lambda m: m.label)
def test_frfl_rate_outage_roundtrip(model):
    for eps in (0.2, 0.5):
        rate = frfl_select_rate(CFG, model, Policy.frfl(eps), 20)
        assert outage_probability(CFG, model, rate) == pytest.approx(eps, abs=1e-8)


def test_frfl_rate_fixed_passthrough_and_sfl_rejected():
    assert frfl_select_rate(CFG, Rayleigh(1.0), Policy.frfl_fixed(7e5), 10) == 7e5
    with pytest.raises(ValueError):
        frfl_select_rate(CFG, Rayleigh(1.0), Policy.sfl(), 10)


def test_frfl_rate_alpha_diagnostics(caplog):
    # Paper grid premise: R* above the expected minimum rate.
    with caplog.at_level(logging.INFO, logger="fedfade.scheduler"):
        for model in MODELS:
            for eps in (0.2, 0.5):
                for c in (10, 20, 40):
                    caplog.clear()
                    frfl_select_rate(CFG, model, Policy.frfl(eps), c)
                    assert "alpha" in caplog.text
                    assert "violated" not in caplog.text
    # A tiny epsilon pushes R* below E[R_min]: loud diagnostic, no failure.
    with caplog.at_level(logging.WARNING, logger="fedfade.scheduler"):
        caplog.clear()
        rate = frfl_select_rate(CFG, Rayleigh(1.0), Policy.frfl(1e-8), 10)
        assert rate > 0.0
        assert "violated" in caplog.text


def test_execute_round_frfl_all_above_quantile_succeed():
    model = Rayleigh(1.0)
    policy = Policy.frfl(0.5)
    rate = frfl_select_rate(CFG, model, policy, 4)
    h_eps = model.quantile(0.5)
    gains = np.array([h_eps * 1.01, h_eps * 2.0, h_eps * 1.5, h_eps * 3.0])
    out = execute_round(policy, CFG, gains, frfl_rate=rate)
    assert np.array_equal(out.succeeded, out.selected)
    assert out.duration_s == CFG.payload_bits / rate
    assert not out.capped


def test_execute_round_frfl_mean_successes():
    model = Rayleigh(1.0)
    policy = Policy.frfl(0.5)
    rate = frfl_select_rate(CFG, model, policy, 40)
    rng = np.random.default_rng(12)
    successes = []
    for _ in range(10_000):
        out = execute_round(policy, CFG, model.sample(rng, size=40), frfl_rate=rate)
        successes.append(out.n_succeeded)
    se = math.sqrt(40 * 0.25 / len(successes))
    assert abs(np.mean(successes) - 20.0) < 3 * se


def test_execute_round_frfl_duration_constant():
    model = Nakagami(1.0, m=3.0)
    policy = Policy.frfl(0.2)
    rate = frfl_select_rate(CFG, model, policy, 10)
    rng = np.random.default_rng(3)
    durations = {
        execute_round(policy, CFG, model.sample(rng, size=10), frfl_rate=rate).duration_s
        for _ in range(50)
    }
    assert len(durations) == 1


def test_execute_round_frfl_failure_rate_matches_outage():
    model = Rician(1.0, k_factor=K_12DB)
    policy = Policy.frfl(0.2)
    rate = frfl_select_rate(CFG, model, policy, 20)
    rng = np.random.default_rng(21)
    failed = total = 0
    for _ in range(1_000):
        out = execute_round(policy, CFG, model.sample(rng, size=20), frfl_rate=rate)
        failed += 20 - out.n_succeeded
        total += 20
    eps = outage_probability(CFG, model, rate)
    se = math.sqrt(eps * (1 - eps) / total)
    assert abs(failed / total - eps) < 3 * se


def test_execute_round_frfl_needs_resolved_rate():
    with pytest.raises(ValueError):
        execute_round(Policy.frfl(0.2), CFG, [1.0, 2.0])
    out = execute_round(Policy.frfl_fixed(5e5), CFG, [1.0, 2.0])
    assert out.duration_s == CFG.payload_bits / 5e5


def test_execute_round_sfl_uncapped():
    out = execute_round(Policy.sfl(), CFG, [1.0, 3.0])
    assert np.array_equal(out.succeeded, out.selected)
    assert out.duration_s == pytest.approx(1.0)
    assert not out.capped
    # Bitwise agreement with the closed-form duration.
    gains = np.array([0.31, 1.7, 0.55])
    out2 = execute_round(Policy.sfl(), CFG, gains)
    assert out2.duration_s == sfl_round_duration(CFG, gains)


def test_execute_round_sfl_cap_drops_slow_clients():
    gains = np.array([0.1, 1.0, 3.0])
    cap = CFG.payload_bits / 1e6  # only h >= 1 finishes within 1 s
    out = execute_round(Policy.sfl(), CFG, gains, t_ths=cap)
    assert out.capped
    assert out.duration_s == cap
    assert sorted(out.succeeded) == [1, 2]
    # All clients too slow: a valid degenerate all-fail round.
    out_all = execute_round(Policy.sfl(), CFG, np.array([0.01, 0.02]), t_ths=1e-3)
    assert out_all.n_succeeded == 0
    assert out_all.duration_s == 1e-3


def test_execute_round_equivariance_under_permutation():
    model = Rayleigh(1.0)
    policy = Policy.frfl(0.5)
    rate = frfl_select_rate(CFG, model, policy, 6)
    gains = model.sample(np.random.default_rng(17), size=6)
    ids = np.array([11, 5, 42, 7, 23, 9])
    perm = np.array([3, 0, 5, 1, 4, 2])
    out = execute_round(policy, CFG, gains, frfl_rate=rate, client_ids=ids)
    out_p = execute_round(policy, CFG, gains[perm], frfl_rate=rate, client_ids=ids[perm])
    assert set(out.succeeded) == set(out_p.succeeded)
    assert out.duration_s == out_p.duration_s


def test_execute_round_input_validation():
    with pytest.raises(ValueError):
        execute_round(Policy.sfl(), CFG, [])
    with pytest.raises(ValueError):
        execute_round(Policy.sfl(), CFG, [-1.0])
    with pytest.raises(ValueError):
        execute_round(Policy.sfl(), CFG, [1.0], client_ids=[1, 2])
