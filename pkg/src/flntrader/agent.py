"""Episodic double Q-learning trader.

One trade decision per 5-price block: wallet mechanics with fees and modeled
failures, the polynomial wealth reward, three wallet-threshold terminal
states driving a savings mechanism, epsilon and cyclical learning-rate
schedules, and the per-block double-Q update of two independent networks.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data_ingest import FilteredSeries
from .features import (
    BLOCK_SIZE,
    DEFAULT_DENOM_FLOOR,
    DEFAULT_FEATURE_NORM,
    MarketBlock,
    RsiState,
    VolumeState,
    assemble_features,
    market_block,
    nmd_cascade,
)
from .fln import activate, init_network, q_values, sgd_update

N_ACTIONS = 19
HOLD_ACTION = 18  # actions 0..8 buy 10(k+1), 9..17 sell 10(k-8), 18 holds

# Epsilon reset floor: the counter value where 1/ln(5i+2) is about 0.2.
EPS_RESET_FLOOR = math.ceil((math.exp(5.0) - 2.0) / 5.0)


class Terminal(Enum):
    NONE = "none"
    SAVE = "save"
    REINVEST = "reinvest"
    MARKDOWN = "markdown"


@dataclass
class Wallet:
    """Money pools: trading cash, asset holdings, savings, reserve, threshold.

    sav is never spent; res is only refilled by save events and halved by
    reinvest events; mlim is the savings trigger on mon, floored at mlimn.
    """

    mon: float
    cns: float = 0.0
    sav: float = 0.0
    res: float = 0.0
    mlim: float = 0.0
    mlimn: float = 75.0

    def wealth(self, price: float) -> float:
        """Trading wealth at a price: mon + price * cns (excludes sav and res)."""
        return self.mon + price * self.cns


@dataclass(frozen=True)
class ActionOutcome:
    action: int
    executed: bool
    fee_paid: float


@dataclass
class Schedules:
    """Counters and parameters for the epsilon and learning-rate schedules."""

    i_eps: int = 0
    i_alpha: int = -1  # pre-incremented, so the first step evaluates at 0
    prob_eps: float = 1e-4
    alpha_min: float = 1e-3
    alpha_max: float = 1.0
    t_alpha: int = 1000


@dataclass(frozen=True)
class StepRecord:
    """One learning step, for traces and debugging."""

    block: int
    action: int
    executed: bool
    fee_paid: float
    wth_before: float
    wth_after: float
    reward: float
    terminal: Terminal
    eps: float
    alpha: float
    td_target: float
    sav_bonus: float

    def to_dict(self) -> dict:
        return {
            "block": self.block,
            "action": self.action,
            "executed": self.executed,
            "fee_paid": self.fee_paid,
            "wth_before": self.wth_before,
            "wth_after": self.wth_after,
            "reward": self.reward,
            "terminal": self.terminal.value,
            "eps": self.eps,
            "alpha": self.alpha,
            "td_target": self.td_target,
            "sav_bonus": self.sav_bonus,
        }


@dataclass(frozen=True)
class AgentParams:
    """Hyperparameters of one trading run."""

    gamma: float = 0.05
    mlimn: float = 75.0
    prob_eps: float = 1e-4
    alpha_min: float = 1e-3
    alpha_max: float = 1.0
    t_alpha: int = 1000
    fee_rate: float = 0.001
    initial_mon: float = 100.0
    hidden_size: int = 50
    denom_floor: float = DEFAULT_DENOM_FLOOR
    feature_norm: float = DEFAULT_FEATURE_NORM


@dataclass
class RunSummary:
    """Terminal state of a run plus counters; the harness derives metrics."""

    wallet: Wallet
    last_price: float
    steps: int
    episodes: int
    records: list[StepRecord] | None = None


def trade_amount(action: int) -> float:
    """Quote-currency amount moved by an action; 0 for hold."""
    if action < 0 or action >= N_ACTIONS:
        raise ValueError(f"action index {action} out of range 0..{N_ACTIONS - 1}")
    if action == HOLD_ACTION:
        return 0.0
    if action <= 8:
        return 10.0 * (action + 1)
    return 10.0 * (action - 8)


def epsilon_step(s: Schedules, rng: np.random.Generator) -> float:
    """Advance the epsilon counter (or rarely reset it) and return epsilon.

    The reset fires with probability prob_eps, and only once the counter has
    reached the reset floor; it puts epsilon back to about 0.2.
    """
    if rng.random() <= s.prob_eps and s.i_eps >= EPS_RESET_FLOOR:
        s.i_eps = EPS_RESET_FLOOR
    else:
        s.i_eps += 1
    return 1.0 / math.log(5.0 * s.i_eps + 2.0)


def alpha_step(s: Schedules) -> float:
    """Advance the learning-rate counter and return the cosine-cycled alpha."""
    s.i_alpha += 1
    return s.alpha_min + 0.5 * (s.alpha_max - s.alpha_min) * (
        1.0 + math.cos(math.pi * s.i_alpha / s.t_alpha)
    )


def argmax_last(values) -> int:
    """Index of the maximum; ties go to the highest index."""
    arr = np.asarray(values)
    return int(np.flatnonzero(arr == arr.max())[-1])


def select_action(q_avg, eps: float, rng: np.random.Generator) -> int:
    """Epsilon-greedy over the averaged Q-values; eps above 1 acts as 1."""
    if rng.random() <= min(eps, 1.0):
        return int(rng.integers(N_ACTIONS))
    return argmax_last(q_avg)


def execute_action(
    w: Wallet, action: int, price: float, fee_rate: float = 0.001
) -> ActionOutcome:
    """Apply a trade to the wallet at the given price.

    Buys need mon >= amount, sells need cns * price >= amount; a shortfall
    leaves the wallet untouched and is reported as a failed execution, not an
    error. The fee is charged on the quote amount of every executed trade.
    """
    if action == HOLD_ACTION:
        return ActionOutcome(action, True, 0.0)
    amount = trade_amount(action)
    if action <= 8:
        if w.mon < amount:
            return ActionOutcome(action, False, 0.0)
        w.cns += (1.0 - fee_rate) * amount / price
        w.mon -= amount
    else:
        if w.cns * price < amount:
            return ActionOutcome(action, False, 0.0)
        w.mon += (1.0 - fee_rate) * amount
        w.cns -= amount / price
        if w.cns < 0.0:
            w.cns = 0.0  # one-ulp dust from the affordability check
    return ActionOutcome(action, True, fee_rate * amount)


def compute_reward(wth_before: float, wth_after: float, executed: bool) -> float:
    """Polynomial reward in the wealth change, with a flat failure penalty."""
    d = wth_after - wth_before
    reward = d - (d / 2.0) ** 2
    if not executed:
        reward -= 0.1
    return reward


def check_terminal(
    w: Wallet, wth_after: float, q_sa: float, rsi_after: float
) -> Terminal:
    """Classify the post-trade state against the three terminal conditions.

    q_sa is the averaged Q-value of the taken action in the pre-trade state.
    The branch order makes mon <= mlim implicit for the last two cases.
    """
    if w.mon > w.mlim:
        return Terminal.SAVE
    if wth_after < w.mlimn and q_sa > 0.0 and rsi_after > 70.0:
        return Terminal.REINVEST
    if wth_after >= w.mlimn and q_sa < 0.0 and rsi_after < 30.0:
        return Terminal.MARKDOWN
    return Terminal.NONE


def apply_terminal(w: Wallet, kind: Terminal, wth_after: float) -> float:
    """Mutate the wallet for a terminal event and return the savings bonus.

    save: the excess over mlim is split 0.34 / 0.33 / 0.33 between sav, res
    and mon, and mlim rises to the new mon plus the whole excess. reinvest:
    half of res returns to mon and mlim snaps to max(mlimn, mon). markdown:
    only mlim drops, to the current wealth.
    """
    if kind is Terminal.SAVE:
        mdf = w.mon - w.mlim
        w.sav += 0.34 * mdf
        w.res += 0.33 * mdf
        w.mon = w.mlim + 0.33 * mdf
        w.mlim = w.mon + mdf
        return 0.34 * mdf
    if kind is Terminal.REINVEST:
        half = w.res / 2.0
        w.mon += half
        w.res -= half
        w.mlim = w.mon if w.mon >= w.mlimn else w.mlimn
        return 0.0
    if kind is Terminal.MARKDOWN:
        w.mlim = wth_after
        return 0.0
    raise ValueError("apply_terminal called with Terminal.NONE")


class AgentRun:
    """One seeded learning run over a filtered series.

    Owns two independent networks, the wallet, the schedules, and the
    indicator state; everything is driven from a single RNG stream so that
    equal seeds reproduce the run bit for bit.
    """

    def __init__(
        self,
        series: FilteredSeries,
        params: AgentParams,
        rng: np.random.Generator,
        record_steps: bool = False,
    ):
        self.series = series
        self.params = params
        self.rng = rng
        self.net1 = init_network(rng, n_hidden=params.hidden_size)
        self.net2 = init_network(rng, n_hidden=params.hidden_size)
        self.wallet = Wallet(
            mon=params.initial_mon, mlim=params.initial_mon, mlimn=params.mlimn
        )
        self.schedules = Schedules(
            prob_eps=params.prob_eps,
            alpha_min=params.alpha_min,
            alpha_max=params.alpha_max,
            t_alpha=params.t_alpha,
        )
        self.rsi_state = RsiState()
        self.volume_state = VolumeState()
        self.records: list[StepRecord] | None = [] if record_steps else None
        self.steps = 0
        self.episodes = 0
        self.i = 1  # 1-based block counter
        self.ipr = 0.0
        self.wth = 0.0
        self.last_price = 0.0
        self.act1: np.ndarray | None = None
        self.act2: np.ndarray | None = None

    def run(self) -> RunSummary:
        """Execute the full learning loop until the series runs out of blocks."""
        n = len(self.series)
        self._start_episode(1)
        while BLOCK_SIZE * (self.i + 1) <= n:
            self._step()
        return RunSummary(
            wallet=self.wallet,
            last_price=self.last_price,
            steps=self.steps,
            episodes=self.episodes,
            records=self.records,
        )

    def _start_episode(self, index: int) -> None:
        """Observe block ``index`` as the first state of a new episode."""
        block = market_block(self.series, index)
        self.i = index
        self.ipr = float(block.prices[0])
        self._observe(block)
        self.wth = self.wallet.wealth(float(block.prices[-1]))
        self.last_price = float(block.prices[-1])
        self.episodes += 1

    def _observe(self, block: MarketBlock) -> None:
        """Full indicator + feature update for a block; refreshes activations."""
        cav, av = self.volume_state.update(block.volumes)
        rsi = self.rsi_state.update(block.prices)
        feat = self._features(block, cav, av, rsi)
        self.act1 = activate(self.net1, feat)
        self.act2 = activate(self.net2, feat)

    def _features(self, block: MarketBlock, cav: float, av: float, rsi: float):
        w = self.wallet
        return assemble_features(
            block.prices,
            vol5=float(block.volumes[-1]),
            ipr=self.ipr,
            mon=w.mon,
            cns=w.cns,
            cav=cav,
            av=av,
            rsi=rsi,
            nmd=nmd_cascade(block.prices, self.params.denom_floor),
            mlim=w.mlim,
            target_norm=self.params.feature_norm,
        )

    def _step(self) -> StepRecord:
        """One learning step: trade on block i, observe block i+1, update one net.

        Terminal steps update without a bootstrap term and skip a block before
        the next episode; non-terminal steps bootstrap from the other network
        at the updated network's greedy action and carry the state forward.
        """
        p = self.params
        w = self.wallet
        rng = self.rng
        q1 = q_values(self.net1, self.act1)
        q2 = q_values(self.net2, self.act2)
        q_avg = 0.5 * (q1 + q2)

        eps = epsilon_step(self.schedules, rng)
        action = select_action(q_avg, eps, rng)
        alpha = alpha_step(self.schedules)

        trade_price = float(self.series.prices[BLOCK_SIZE * self.i - 1])
        outcome = execute_action(w, action, trade_price, p.fee_rate)

        nxt = market_block(self.series, self.i + 1)
        price_next = float(nxt.prices[-1])
        wth_new = w.wealth(price_next)
        reward = compute_reward(self.wth, wth_new, outcome.executed)
        rsi_new = self.rsi_state.update(nxt.prices)
        self.last_price = price_next

        kind = check_terminal(w, wth_new, float(q_avg[action]), rsi_new)
        if kind is not Terminal.NONE:
            sav_bonus = apply_terminal(w, kind, wth_new)
            target = reward + sav_bonus
            if rng.random() <= 0.5:
                sgd_update(self.net1, action, alpha, target, float(q1[action]), self.act1)
            else:
                sgd_update(self.net2, action, alpha, target, float(q2[action]), self.act2)
            record = self._record(
                action, outcome, wth_new, reward, kind, eps, alpha, target, sav_bonus
            )
            self.steps += 1
            nxt_index = self.i + 2  # the block just observed is consumed, one more is skipped
            self.i = nxt_index
            if BLOCK_SIZE * nxt_index <= len(self.series):
                self._start_episode(nxt_index)
            return record

        cav, av = self.volume_state.update(nxt.volumes)
        feat = self._features(nxt, cav, av, rsi_new)
        act1_new = activate(self.net1, feat)
        act2_new = activate(self.net2, feat)
        q1_new = q_values(self.net1, act1_new)
        q2_new = q_values(self.net2, act2_new)
        if rng.random() <= 0.5:
            amax = argmax_last(q1_new)
            target = reward + p.gamma * float(q2_new[amax])
            sgd_update(self.net1, action, alpha, target, float(q1[action]), self.act1)
        else:
            amax = argmax_last(q2_new)
            target = reward + p.gamma * float(q1_new[amax])
            sgd_update(self.net2, action, alpha, target, float(q2[action]), self.act2)
        record = self._record(
            action, outcome, wth_new, reward, Terminal.NONE, eps, alpha, target, 0.0
        )
        self.steps += 1
        self.wth = wth_new
        self.act1 = act1_new
        self.act2 = act2_new
        self.i += 1
        return record

    def _record(
        self, action, outcome, wth_new, reward, kind, eps, alpha, target, sav_bonus
    ) -> StepRecord:
        record = StepRecord(
            block=self.i,
            action=action,
            executed=outcome.executed,
            fee_paid=outcome.fee_paid,
            wth_before=self.wth,
            wth_after=wth_new,
            reward=reward,
            terminal=kind,
            eps=eps,
            alpha=alpha,
            td_target=target,
            sav_bonus=sav_bonus,
        )
        if self.records is not None:
            self.records.append(record)
        return record


def random_run(
    series: FilteredSeries,
    params: AgentParams,
    rng: np.random.Generator,
    record_steps: bool = False,
) -> RunSummary:
    """Baseline run: a uniform random action per block, no learning, no terminals.

    Fees and insufficient-funds failures behave exactly as in agent runs, so
    the baseline isolates the value of the learned policy.
    """
    w = Wallet(mon=params.initial_mon, mlim=params.initial_mon, mlimn=params.mlimn)
    records: list[StepRecord] | None = [] if record_steps else None
    n = len(series)
    i = 1
    steps = 0
    last_price = float(series.prices[BLOCK_SIZE * i - 1])
    wth = w.wealth(last_price)
    while BLOCK_SIZE * (i + 1) <= n:
        action = int(rng.integers(N_ACTIONS))
        trade_price = float(series.prices[BLOCK_SIZE * i - 1])
        outcome = execute_action(w, action, trade_price, params.fee_rate)
        price_next = float(series.prices[BLOCK_SIZE * (i + 1) - 1])
        wth_new = w.wealth(price_next)
        if records is not None:
            records.append(
                StepRecord(
                    block=i,
                    action=action,
                    executed=outcome.executed,
                    fee_paid=outcome.fee_paid,
                    wth_before=wth,
                    wth_after=wth_new,
                    reward=compute_reward(wth, wth_new, outcome.executed),
                    terminal=Terminal.NONE,
                    eps=1.0,
                    alpha=0.0,
                    td_target=0.0,
                    sav_bonus=0.0,
                )
            )
        wth = wth_new
        last_price = price_next
        steps += 1
        i += 1
    return RunSummary(
        wallet=w, last_price=last_price, steps=steps, episodes=0, records=records
    )
