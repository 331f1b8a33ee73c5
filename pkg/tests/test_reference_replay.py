"""Cross-validation of AgentRun against a straight-line replay.

The replay re-implements the learning loop as one flat function: explicit
episode restarts, inline indicator recomputation, inline wallet branches,
no carried activations or cached state beyond what the loop itself needs.
It consumes the identical RNG stream, so any divergence in indexing, state
carry-over, schedule ticks, or terminal handling shows up as a mismatched
step.
"""

from __future__ import annotations

import math

import numpy as np

from flntrader import AgentParams, AgentRun, Terminal

from conftest import make_walk_series

EPS_FLOOR = math.ceil((math.exp(5.0) - 2.0) / 5.0)


def replay(series, params, rng):
    """Flat reimplementation of one learning run; returns (step log, wallet)."""
    prices = series.prices
    volumes = series.volumes
    n = len(prices)
    hidden = params.hidden_size
    gamma = params.gamma
    fee = params.fee_rate

    # same draw order as AgentRun: per network, hidden then output
    whi1 = rng.uniform(-1.0, 1.0, (hidden, 27))
    whi1 /= np.linalg.norm(whi1, axis=1, keepdims=True)
    wout1 = rng.uniform(-1.0, 1.0, (19, 27 + hidden))
    whi2 = rng.uniform(-1.0, 1.0, (hidden, 27))
    whi2 /= np.linalg.norm(whi2, axis=1, keepdims=True)
    wout2 = rng.uniform(-1.0, 1.0, (19, 27 + hidden))
    max1 = max2 = 1.0

    ieps, ialpha = 0, -1
    rsip = np.zeros(15)
    ring = np.zeros(20)
    mon, cns, sav, res = params.initial_mon, 0.0, 0.0, 0.0
    mlim, mlimn = params.initial_mon, params.mlimn

    log = []
    i = 1

    def rsi_of(window):
        diffs = np.diff(window)
        ups = np.where(diffs > 0.0, diffs, 0.0)
        downs = np.where(diffs < 0.0, -diffs, 0.0)
        if downs.mean() == 0.0:
            return 100.0
        return 100.0 - 100.0 / (1.0 + ups.mean() / downs.mean())

    def features(block_lo, ipr, cav, av, rsi):
        pr = prices[block_lo : block_lo + 5]
        vol5 = volumes[block_lo + 4]
        nmd1 = np.diff(pr) / pr[:-1]
        nmd2 = np.diff(nmd1) / np.maximum(np.abs(nmd1[:-1]), params.denom_floor)
        nmd3 = np.diff(nmd2) / np.maximum(np.abs(nmd2[:-1]), params.denom_floor)
        nmd4 = np.diff(nmd3) / np.maximum(np.abs(nmd3[:-1]), params.denom_floor)
        feat = np.empty(27)
        feat[0] = 0.0
        feat[1:6] = pr
        feat[6] = ipr
        feat[7] = (pr[4] - ipr) / ipr
        feat[8] = mon
        feat[9] = cns
        feat[10] = cav
        feat[11] = av
        feat[12] = (cav - av) / av
        feat[13] = (vol5 - av) / av
        feat[14] = (vol5 - cav) / cav
        feat[15] = rsi
        feat[16:20] = nmd1
        feat[20:23] = nmd2
        feat[23:25] = nmd3
        feat[25:26] = nmd4
        feat[26] = mlim
        feat *= params.feature_norm / float(np.linalg.norm(feat))
        feat[0] = 1.0
        return feat

    def grads(feat):
        z1 = np.clip(whi1 @ feat, -500.0, 500.0)
        z2 = np.clip(whi2 @ feat, -500.0, 500.0)
        return (
            np.concatenate([feat, 1.0 / (1.0 + np.exp(-z1))]),
            np.concatenate([feat, 1.0 / (1.0 + np.exp(-z2))]),
        )

    while True:  # episode label
        lo = 5 * (i - 1)
        ipr = float(prices[lo])
        cav = float(np.mean(volumes[lo : lo + 5]))
        ring[:-1] = ring[1:]
        ring[-1] = cav
        av = float(ring.mean())
        rsip[:10] = rsip[5:]
        rsip[10:] = prices[lo : lo + 5]
        rsi = rsi_of(rsip)
        gradq1, gradq2 = grads(features(lo, ipr, cav, av, rsi))
        wth = mon + cns * prices[lo + 4]

        while 5 * (i + 1) <= n:
            qarr1 = wout1 @ gradq1
            qarr2 = wout2 @ gradq2
            qarr = (qarr1 + qarr2) / 2.0

            if rng.random() <= params.prob_eps and ieps >= EPS_FLOOR:
                ieps = EPS_FLOOR
            else:
                ieps += 1
            eps = 1.0 / math.log(5.0 * ieps + 2.0)
            if rng.random() <= min(eps, 1.0):
                a = int(rng.integers(19))
            else:
                a = int(np.flatnonzero(qarr == qarr.max())[-1])
            ialpha += 1
            alpha = params.alpha_min + 0.5 * (params.alpha_max - params.alpha_min) * (
                1.0 + math.cos(math.pi * ialpha / params.t_alpha)
            )

            price = float(prices[5 * i - 1])
            executed = True
            if a <= 8:
                amount = 10.0 * (a + 1)
                if mon < amount:
                    executed = False
                else:
                    cns += (1.0 - fee) * amount / price
                    mon -= amount
            elif a <= 17:
                amount = 10.0 * (a - 8)
                if cns * price < amount:
                    executed = False
                else:
                    mon += (1.0 - fee) * amount
                    cns -= amount / price
                    if cns < 0.0:
                        cns = 0.0

            wthnew = mon + cns * prices[5 * (i + 1) - 1]
            rew = wthnew - wth
            rew = rew - (rew / 2.0) ** 2 - (0.0 if executed else 0.1)

            nlo = 5 * i  # start of block i+1
            rsip[:10] = rsip[5:]
            rsip[10:] = prices[nlo : nlo + 5]
            rsi = rsi_of(rsip)

            if mon > mlim:
                kind = Terminal.SAVE
            elif wthnew < mlimn and qarr[a] > 0.0 and rsi > 70.0:
                kind = Terminal.REINVEST
            elif wthnew >= mlimn and qarr[a] < 0.0 and rsi < 30.0:
                kind = Terminal.MARKDOWN
            else:
                kind = Terminal.NONE

            if kind is not Terminal.NONE:
                bonus = 0.0
                if kind is Terminal.SAVE:
                    mdf = mon - mlim
                    bonus = 0.34 * mdf
                    sav += 0.34 * mdf
                    res += 0.33 * mdf
                    mon = mlim + 0.33 * mdf
                    mlim = mon + mdf
                elif kind is Terminal.REINVEST:
                    mon += res / 2.0
                    res -= res / 2.0
                    mlim = mon if mon >= mlimn else mlimn
                else:
                    mlim = wthnew
                target = rew + bonus
                if rng.random() <= 0.5:
                    wout1[a] += alpha * (target - qarr1[a]) * gradq1
                    norm = float(np.linalg.norm(wout1[a]))
                    max1 = max(max1, norm)
                    if norm > 1.0:
                        wout1[a] /= max1
                else:
                    wout2[a] += alpha * (target - qarr2[a]) * gradq2
                    norm = float(np.linalg.norm(wout2[a]))
                    max2 = max(max2, norm)
                    if norm > 1.0:
                        wout2[a] /= max2
                log.append((i, a, executed, rew, kind, target))
                i += 2
                if 5 * i > n:
                    return log, (mon, cns, sav, res, mlim)
                break  # back to the episode label

            cav = float(np.mean(volumes[nlo : nlo + 5]))
            ring[:-1] = ring[1:]
            ring[-1] = cav
            av = float(ring.mean())
            gradq1_new, gradq2_new = grads(features(nlo, ipr, cav, av, rsi))
            q1n = wout1 @ gradq1_new
            q2n = wout2 @ gradq2_new
            if rng.random() <= 0.5:
                amax = int(np.flatnonzero(q1n == q1n.max())[-1])
                target = rew + gamma * float(q2n[amax])
                wout1[a] += alpha * (target - qarr1[a]) * gradq1
                norm = float(np.linalg.norm(wout1[a]))
                max1 = max(max1, norm)
                if norm > 1.0:
                    wout1[a] /= max1
            else:
                amax = int(np.flatnonzero(q2n == q2n.max())[-1])
                target = rew + gamma * float(q1n[amax])
                wout2[a] += alpha * (target - qarr2[a]) * gradq2
                norm = float(np.linalg.norm(wout2[a]))
                max2 = max(max2, norm)
                if norm > 1.0:
                    wout2[a] /= max2
            log.append((i, a, executed, rew, Terminal.NONE, target))
            wth = wthnew
            gradq1, gradq2 = gradq1_new, gradq2_new
            i += 1
        else:
            return log, (mon, cns, sav, res, mlim)


def compare_run(series, seed):
    params = AgentParams()
    agent = AgentRun(series, params, np.random.default_rng(seed), record_steps=True)
    summary = agent.run()
    log, pools = replay(series, params, np.random.default_rng(seed))

    assert len(log) == summary.steps == len(summary.records)
    for record, (block, action, executed, reward, kind, target) in zip(
        summary.records, log
    ):
        assert record.block == block
        assert record.action == action
        assert record.executed == executed
        assert record.reward == reward
        assert record.terminal == kind
        assert record.td_target == target
    w = summary.wallet
    assert (w.mon, w.cns, w.sav, w.res, w.mlim) == pools
    return summary


def test_replay_matches_on_walk_series():
    terminals = 0
    for seed, data_seed in [(0, 200), (1, 201), (2, 202)]:
        series = make_walk_series(900, seed=data_seed)
        summary = compare_run(series, seed)
        terminals += sum(
            1 for r in summary.records if r.terminal is not Terminal.NONE
        )
    assert terminals > 0  # the comparison must cover terminal handling


def test_replay_matches_with_all_terminal_kinds():
    # this volatile walk drives one run through save, reinvest, and markdown
    series = make_walk_series(1500, seed=300, step=0.03)
    summary = compare_run(series, seed=0)
    kinds = {r.terminal for r in summary.records}
    assert {Terminal.SAVE, Terminal.REINVEST, Terminal.MARKDOWN} <= kinds


def test_replay_matches_on_bundled_prefix(bundled_series):
    from flntrader import DatasetSlice, slice_series

    series = slice_series(bundled_series, DatasetSlice(0, 2000))
    summary = compare_run(series, seed=77)
    kinds = {r.terminal for r in summary.records}
    assert Terminal.SAVE in kinds
