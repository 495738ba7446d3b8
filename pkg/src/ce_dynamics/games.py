"""Finite normal-form games with loss tensors in [0, 1].

A game is stored densely: one loss tensor per player, indexed by the joint
action profile ``(a_1, ..., a_m)`` with player 1's action on the first axis.
All tensors are immutable after construction so games can be shared freely
across threads.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, GameFormatError, ValidationError

SIMPLEX_ATOL = 1e-12


def is_distribution(v: np.ndarray, atol: float = SIMPLEX_ATOL) -> bool:
    """True when ``v`` is a probability vector up to ``atol`` on the sum."""
    v = np.asarray(v, dtype=float)
    return v.ndim == 1 and np.all(v >= 0.0) and abs(float(v.sum()) - 1.0) <= atol


def check_distribution(v: np.ndarray, name: str = "distribution") -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if not is_distribution(v):
        raise ValidationError(f"{name} is not a probability vector: {v!r}")
    return v


@dataclass(frozen=True)
class Game:
    """An m-player game given by per-player loss tensors over joint profiles.

    ``losses[i]`` has shape ``action_counts`` and entries in [0, 1].
    """

    action_counts: tuple[int, ...]
    losses: tuple[np.ndarray, ...]

    def __post_init__(self):
        m = len(self.action_counts)
        if m < 2:
            raise ValidationError(f"need at least 2 players, got {m}")
        if any(n < 2 for n in self.action_counts):
            raise ValidationError(f"every player needs >= 2 actions, got {self.action_counts}")
        if len(self.losses) != m:
            raise ValidationError(f"expected {m} loss tensors, got {len(self.losses)}")
        shape = tuple(self.action_counts)
        frozen = []
        for i, tensor in enumerate(self.losses):
            arr = np.asarray(tensor, dtype=float)
            if arr.shape != shape:
                raise DimensionMismatchError(
                    f"loss tensor of player {i} has shape {arr.shape}, expected {shape}"
                )
            if not np.all(np.isfinite(arr)):
                raise ValidationError(f"loss tensor of player {i} has non-finite entries")
            if arr.min() < 0.0 or arr.max() > 1.0:
                raise ValidationError(
                    f"loss tensor of player {i} has entries outside [0, 1]: "
                    f"min={arr.min()}, max={arr.max()}"
                )
            arr = arr.copy()
            arr.setflags(write=False)
            frozen.append(arr)
        object.__setattr__(self, "losses", tuple(frozen))
        object.__setattr__(self, "action_counts", shape)

    @property
    def num_players(self) -> int:
        return len(self.action_counts)


def check_profile(game: Game, profile) -> list[np.ndarray]:
    """Validate a mixed-strategy profile against a game's action counts."""
    if len(profile) != game.num_players:
        raise DimensionMismatchError(
            f"profile has {len(profile)} strategies for {game.num_players} players"
        )
    out = []
    for i, (x, n) in enumerate(zip(profile, game.action_counts)):
        x = np.asarray(x, dtype=float)
        if x.shape != (n,):
            raise DimensionMismatchError(
                f"strategy of player {i} has shape {x.shape}, expected ({n},)"
            )
        out.append(check_distribution(x, name=f"strategy of player {i}"))
    return out


def expected_loss(game: Game, profile, player: int) -> np.ndarray:
    """Expected loss vector of ``player`` given opponents' mixed strategies.

    Entry ``j`` is the expectation of the player's loss tensor at action ``j``
    over the product of opponent strategies; the player's own strategy never
    enters. Every entry lies in [0, 1].
    """
    strategies = check_profile(game, profile)
    tensor = game.losses[player]
    # Contract opponent axes from the highest down so axis indices stay valid.
    for axis in sorted((a for a in range(game.num_players) if a != player), reverse=True):
        tensor = np.tensordot(tensor, strategies[axis], axes=([axis], [0]))
    return tensor


_SPLITMIX_GAMMA = 0x9E3779B97F4A7C15
_MASK64 = (1 << 64) - 1


def _splitmix64_stream(seed: int, count: int) -> np.ndarray:
    """Deterministic uniform [0, 1) doubles from the splitmix64 stream.

    Each step advances the state by the 64-bit golden-ratio increment and
    mixes it; doubles take the top 53 bits. Pure-integer arithmetic keeps the
    stream identical across platforms and numpy versions.
    """
    state = seed & _MASK64
    out = np.empty(count, dtype=float)
    for idx in range(count):
        state = (state + _SPLITMIX_GAMMA) & _MASK64
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
        z = z ^ (z >> 31)
        out[idx] = (z >> 11) * 2.0**-53
    return out


def random_game(num_players: int, action_counts, seed: int) -> Game:
    """Game with i.i.d. uniform [0, 1) losses from a seeded splitmix64 stream.

    Identical ``(num_players, action_counts, seed)`` always produces the
    identical game. Entries are drawn player by player in row-major profile
    order.
    """
    action_counts = tuple(int(n) for n in action_counts)
    if num_players < 2 or len(action_counts) != num_players or any(n < 2 for n in action_counts):
        raise ValidationError(
            f"invalid shape: players={num_players}, actions={action_counts}"
        )
    cells = int(np.prod(action_counts))
    draws = _splitmix64_stream(seed, num_players * cells)
    losses = tuple(
        draws[i * cells : (i + 1) * cells].reshape(action_counts) for i in range(num_players)
    )
    return Game(action_counts=action_counts, losses=losses)


def save_game(game: Game) -> bytes:
    """Serialize to the JSON wire format (flat row-major loss lists)."""
    doc = {
        "players": game.num_players,
        "actions": list(game.action_counts),
        "losses": [tensor.ravel(order="C").tolist() for tensor in game.losses],
    }
    return json.dumps(doc, separators=(",", ":"), sort_keys=True).encode("ascii")


def load_game(data: bytes) -> Game:
    """Parse the JSON wire format produced by :func:`save_game`."""
    if isinstance(data, str):
        data = data.encode("utf-8")
    try:
        doc = json.loads(data.decode("utf-8"))
    except UnicodeDecodeError as exc:
        raise GameFormatError(f"game file is not UTF-8: {exc}", offset=exc.start) from exc
    except json.JSONDecodeError as exc:
        raise GameFormatError(
            f"malformed game JSON at byte offset {exc.pos}: {exc.msg}", offset=exc.pos
        ) from exc
    if not isinstance(doc, dict):
        raise GameFormatError("game JSON must be an object")
    try:
        players = int(doc["players"])
        actions = tuple(int(n) for n in doc["actions"])
        flat = doc["losses"]
    except (KeyError, TypeError, ValueError) as exc:
        raise GameFormatError(f"game JSON missing or invalid field: {exc}") from exc
    if len(actions) != players:
        raise GameFormatError(
            f"'actions' lists {len(actions)} players but 'players' is {players}"
        )
    cells = int(np.prod(actions)) if actions else 0
    tensors = []
    for i, row in enumerate(flat):
        arr = np.asarray(row, dtype=float)
        if arr.shape != (cells,):
            raise GameFormatError(
                f"losses[{i}] has {arr.size} entries, expected {cells}"
            )
        tensors.append(arr.reshape(actions))
    return Game(action_counts=actions, losses=tuple(tensors))
