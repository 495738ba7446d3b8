"""Regret accounting and correlated-equilibrium gaps over recorded runs.

A :class:`RunTrace` stores everything a run produced, per player and round:
strategies, expected-loss vectors, and (when the dynamics expose them) the
inner pair or per-copy distributions used by the stability and variance
diagnostics. Traces serialize to ``.npz`` with bit-exact float64 arrays, so
every regret recomputes identically from a reloaded trace.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .games import Game

DENSE_JOINT_MAX_ENTRIES = 10**6


@dataclass
class PlayerTrace:
    strategies: np.ndarray  # (T, n)
    losses: np.ndarray  # (T, n)
    pair_dists: np.ndarray | None = None  # (T, n(n-1)) for pair-space runs
    pair_losses: np.ndarray | None = None  # (T, n(n-1))
    copy_dists: np.ndarray | None = None  # (T, n, n) for swap-dynamics runs
    tree_dists: np.ndarray | None = None  # (T, n^(n-1)) for tree-space runs

    def stability_rows(self) -> np.ndarray:
        """Inner distributions as a (T, rows, dim) stack for ratio checks."""
        if self.pair_dists is not None:
            return self.pair_dists[:, None, :]
        if self.copy_dists is not None:
            return self.copy_dists
        if self.tree_dists is not None:
            return self.tree_dists[:, None, :]
        return self.strategies[:, None, :]


@dataclass
class RunTrace:
    horizon: int
    dynamics: str
    action_counts: tuple[int, ...]
    etas: tuple[float, ...]
    players: list[PlayerTrace] = field(default_factory=list)

    @property
    def num_players(self) -> int:
        return len(self.action_counts)

    def save(self, path) -> None:
        arrays = {
            "horizon": np.array(self.horizon),
            "dynamics": np.array(self.dynamics),
            "action_counts": np.array(self.action_counts),
            "etas": np.array(self.etas),
        }
        for i, pt in enumerate(self.players):
            arrays[f"p{i}_strategies"] = pt.strategies
            arrays[f"p{i}_losses"] = pt.losses
            for name in ("pair_dists", "pair_losses", "copy_dists", "tree_dists"):
                value = getattr(pt, name)
                if value is not None:
                    arrays[f"p{i}_{name}"] = value
        np.savez(path, **arrays)

    @classmethod
    def load(cls, path) -> "RunTrace":
        with np.load(path, allow_pickle=False) as data:
            action_counts = tuple(int(n) for n in data["action_counts"])
            trace = cls(
                horizon=int(data["horizon"]),
                dynamics=str(data["dynamics"]),
                action_counts=action_counts,
                etas=tuple(float(e) for e in data["etas"]),
            )
            for i in range(len(action_counts)):
                kwargs = {}
                for name in ("pair_dists", "pair_losses", "copy_dists", "tree_dists"):
                    key = f"p{i}_{name}"
                    if key in data:
                        kwargs[name] = data[key]
                trace.players.append(
                    PlayerTrace(
                        strategies=data[f"p{i}_strategies"],
                        losses=data[f"p{i}_losses"],
                        **kwargs,
                    )
                )
        return trace


def _player_arrays(trace: RunTrace, player: int) -> tuple[np.ndarray, np.ndarray]:
    pt = trace.players[player]
    return pt.strategies, pt.losses


def play_loss(trace: RunTrace, player: int) -> float:
    """Total realized expected loss sum_t <x_t, loss_t>."""
    xs, ls = _player_arrays(trace, player)
    return float((xs * ls).sum())


def external_regret(trace: RunTrace, player: int) -> float:
    """Gap to the best fixed action in hindsight."""
    xs, ls = _player_arrays(trace, player)
    return float((xs * ls).sum() - ls.sum(axis=0).min())


def pair_objective_matrix(trace: RunTrace, player: int) -> np.ndarray:
    """G[j, k] = sum_t x_t[j] (loss_t[j] - loss_t[k]); diagonal is zero."""
    xs, ls = _player_arrays(trace, player)
    weighted = xs * ls  # (T, n)
    totals = weighted.sum(axis=0)  # sum_t x[j] loss[j]
    cross = xs.T @ ls  # [j, k] = sum_t x[j] loss[k]
    return totals[:, None] - cross


def offdiagonal_max(G: np.ndarray) -> float:
    """Max over entries j != k; the diagonal never participates."""
    n = G.shape[0]
    return float(G[~np.eye(n, dtype=bool)].max())


def internal_regret(trace: RunTrace, player: int) -> float:
    """Raw best single-pair reallocation gain; may be negative."""
    return offdiagonal_max(pair_objective_matrix(trace, player))


def clamped_internal_regret(trace: RunTrace, player: int) -> float:
    return max(0.0, internal_regret(trace, player))


def swap_regret(trace: RunTrace, player: int) -> float:
    """Gap to the best per-action reassignment in hindsight."""
    xs, ls = _player_arrays(trace, player)
    S = xs.T @ ls  # S[g, k] = sum_t x[g] loss[k]
    return float((xs * ls).sum() - S.min(axis=1).sum())


def best_swap_function(trace: RunTrace, player: int) -> np.ndarray:
    """Argmin target per action; ties go to the lowest action index."""
    xs, ls = _player_arrays(trace, player)
    S = xs.T @ ls
    return S.argmin(axis=1)


@dataclass
class DenseJointDistribution:
    """Materialized average product distribution of play."""

    tensor: np.ndarray


@dataclass
class LazyJointDistribution:
    """Average product distribution kept as the underlying trace.

    Deviation expectations are evaluated by streaming per-round product
    expectations; nothing of profile-tensor size is ever materialized.
    """

    trace: RunTrace


def average_product_distribution(
    trace: RunTrace, max_entries: int = DENSE_JOINT_MAX_ENTRIES
):
    """Time average of the per-round product distributions.

    Returns a dense tensor when the joint profile space has at most
    ``max_entries`` cells, otherwise a lazy handle.
    """
    cells = int(np.prod(trace.action_counts))
    if cells > max_entries:
        return LazyJointDistribution(trace)
    shape = trace.action_counts
    acc = np.zeros(shape)
    for t in range(trace.horizon):
        block = np.ones(())
        for i in range(trace.num_players):
            block = np.multiply.outer(block, trace.players[i].strategies[t])
        acc += block
    return DenseJointDistribution(acc / trace.horizon)


@dataclass
class CeGapReport:
    max_gap: float  # max over players of the off-diagonal pair maxima
    per_player_pair: list[np.ndarray]  # each (n_i, n_i); diagonal is meaningless

    def player_gap(self, player: int) -> float:
        return offdiagonal_max(self.per_player_pair[player])


def _dense_ce_gap(game: Game, tensor: np.ndarray) -> CeGapReport:
    per_player = []
    for i in range(game.num_players):
        mu = np.moveaxis(tensor, i, 0).reshape(game.action_counts[i], -1)
        li = np.moveaxis(game.losses[i], i, 0).reshape(game.action_counts[i], -1)
        inner = mu @ li.T  # [j, k] = E[1{a_i=j} Lambda_i(k, a_-i)]
        per_player.append(np.diag(inner)[:, None] - inner)
    max_gap = max(offdiagonal_max(G) for G in per_player)
    return CeGapReport(max_gap=max_gap, per_player_pair=per_player)


def _lazy_ce_gap(trace: RunTrace) -> CeGapReport:
    per_player = [
        pair_objective_matrix(trace, i) / trace.horizon for i in range(trace.num_players)
    ]
    max_gap = max(offdiagonal_max(G) for G in per_player)
    return CeGapReport(max_gap=max_gap, per_player_pair=per_player)


def ce_gap(game: Game, mu) -> CeGapReport:
    """Largest profitable single-pair deviation under a joint distribution.

    Accepts the dense or the lazy form produced by
    :func:`average_product_distribution`. For the average product
    distribution of a trace, the per-player gap equals that player's raw
    internal regret divided by the horizon.
    """
    if isinstance(mu, DenseJointDistribution):
        return _dense_ce_gap(game, mu.tensor)
    if isinstance(mu, LazyJointDistribution):
        return _lazy_ce_gap(mu.trace)
    raise ValidationError(f"unsupported joint distribution type {type(mu)!r}")
