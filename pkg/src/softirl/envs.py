"""Gridworld domains, expert demonstration sampling, and dataset files.

Three reward generators are provided: low-dimensional linear rewards on a
torus, free tabular rewards, and smooth nonlinear rewards that raw-coordinate
features cannot represent. States are indexed s = y * width + x; the five
actions are stay/up/down/left/right.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from softirl.mdp import (
    TabularMdp,
    soft_value_iteration,
    validate_policy,
    validate_state_distribution,
)

ACTIONS = ("stay", "up", "down", "left", "right")
_DELTAS = ((0, 0), (0, 1), (0, -1), (-1, 0), (1, 0))
N_ACTIONS = len(ACTIONS)

REWARD_KINDS = ("linear", "tabular-linear", "nonlinear")
TOPOLOGIES = ("torus", "bounded")
REGIMES = ("iid-restart", "trajectory")

_HEADER_PREFIX = "# transitions"


@dataclass(frozen=True)
class GridworldSpec:
    """Construction recipe for one gridworld benchmark environment.

    `reward_scale` is the initial magnitude of the generated reward;
    `min_action_prob` > 0 shrinks the reward deterministically until the
    expert policy puts at least that probability on every action, which keeps
    log-odds estimable from moderate sample sizes. `move_noise` is the slip
    probability hook (0 = deterministic moves).
    """

    width: int
    height: int
    topology: str = "torus"
    reward_kind: str = "tabular-linear"
    seed: int = 0
    gamma: float = 0.97
    reward_scale: float = 2.5
    min_action_prob: float = 0.0
    move_noise: float = 0.0
    feature_dim: int | None = None

    @property
    def n_states(self) -> int:
        return self.width * self.height


@dataclass(frozen=True)
class FeatureMap:
    """Dense feature table phi[s, a] of fixed dimension d."""

    phi: np.ndarray

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 3:
            raise ValueError(f"phi must have shape (S, A, d), got {phi.shape}")
        if not np.all(np.isfinite(phi)):
            raise ValueError("features must be finite")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def dim(self) -> int:
        return self.phi.shape[2]


@dataclass
class TransitionDataset:
    """Observed (s, a, s') records plus provenance metadata."""

    states: np.ndarray
    actions: np.ndarray
    next_states: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return len(self.states)

    def validate(self) -> None:
        if not (len(self.states) == len(self.actions) == len(self.next_states)):
            raise ValueError("record arrays must have equal length")
        ns = self.meta.get("n_states")
        na = self.meta.get("n_actions")
        if ns is not None:
            for name, arr, hi in (("state", self.states, ns),
                                  ("action", self.actions, na),
                                  ("next state", self.next_states, ns)):
                arr = np.asarray(arr)
                if arr.size and (arr.min() < 0 or arr.max() >= hi):
                    raise ValueError(f"{name} index out of range [0, {hi})")
        if self.meta.get("n", self.n) != self.n:
            raise ValueError(f"meta n={self.meta['n']} != {self.n} records")


def _cell_index(x: int, y: int, width: int) -> int:
    return y * width + x


def _move_targets(spec: GridworldSpec) -> np.ndarray:
    """target[s, a] = destination cell of action a from cell s."""
    targets = np.empty((spec.n_states, N_ACTIONS), dtype=int)
    for y in range(spec.height):
        for x in range(spec.width):
            s = _cell_index(x, y, spec.width)
            for a, (dx, dy) in enumerate(_DELTAS):
                nx, ny = x + dx, y + dy
                if spec.topology == "torus":
                    nx, ny = nx % spec.width, ny % spec.height
                elif not (0 <= nx < spec.width and 0 <= ny < spec.height):
                    nx, ny = x, y  # off-grid moves are no-ops
                targets[s, a] = _cell_index(nx, ny, spec.width)
    return targets


def _coords(spec: GridworldSpec) -> tuple[np.ndarray, np.ndarray]:
    s = np.arange(spec.n_states)
    return s % spec.width, s // spec.width


def _state_features(spec: GridworldSpec) -> np.ndarray:
    """Per-state feature block, excluding the intercept."""
    x, y = _coords(spec)
    if spec.topology == "torus":
        tx = 2.0 * np.pi * x / spec.width
        ty = 2.0 * np.pi * y / spec.height
        return np.column_stack([np.sin(tx), np.cos(tx), np.sin(ty), np.cos(ty)])
    xn = x / max(spec.width - 1, 1)
    yn = y / max(spec.height - 1, 1)
    return np.column_stack([xn, yn])


def _action_block_features(spec: GridworldSpec) -> np.ndarray:
    """phi(s, a) = one_hot(a) kron [1, state features]."""
    base = np.column_stack([np.ones(spec.n_states), _state_features(spec)])
    d_state = base.shape[1]
    phi = np.zeros((spec.n_states, N_ACTIONS, N_ACTIONS * d_state))
    for a in range(N_ACTIONS):
        phi[:, a, a * d_state:(a + 1) * d_state] = base
    return phi


def _one_hot_features(spec: GridworldSpec) -> np.ndarray:
    sa = spec.n_states * N_ACTIONS
    return np.eye(sa).reshape(spec.n_states, N_ACTIONS, sa)


def _nonlinear_reward(spec: GridworldSpec, rng: np.random.Generator) -> np.ndarray:
    """Sin/cos mixtures of grid coordinates with action-dependent phases.

    Frequencies of at least two cycles keep the table nearly orthogonal to
    anything linear in raw coordinates, so coordinate features underfit it.
    """
    x, y = _coords(spec)
    xn = x / spec.width
    yn = y / spec.height
    r = np.zeros((spec.n_states, N_ACTIONS))
    for _ in range(3):
        fx, fy = rng.integers(2, 4, size=2)
        amp = rng.uniform(0.5, 1.5, size=N_ACTIONS) * rng.choice([-1.0, 1.0], size=N_ACTIONS)
        phase = rng.uniform(0.0, 2.0 * np.pi, size=N_ACTIONS)
        wave = 2.0 * np.pi * (fx * xn + fy * yn)
        r += amp[None, :] * np.sin(wave[:, None] + phase[None, :])
    return r


def build_env(spec: GridworldSpec):
    """Construct (TabularMdp, true reward table, FeatureMap) from a spec.

    Deterministic in the spec: the same spec always yields bit-identical
    outputs.
    """
    if spec.width < 1 or spec.height < 1:
        raise ValueError(f"grid must be nonempty, got {spec.width}x{spec.height}")
    if spec.topology not in TOPOLOGIES:
        raise ValueError(f"unknown topology {spec.topology!r}")
    if spec.reward_kind not in REWARD_KINDS:
        raise ValueError(f"unknown reward kind {spec.reward_kind!r}")
    if not 0.0 <= spec.move_noise < 1.0:
        raise ValueError("move_noise must lie in [0, 1)")

    targets = _move_targets(spec)
    ns = spec.n_states
    transition = np.zeros((ns, N_ACTIONS, ns))
    for s in range(ns):
        for a in range(N_ACTIONS):
            transition[s, a, targets[s, a]] += 1.0 - spec.move_noise
            for b in range(N_ACTIONS):
                transition[s, a, targets[s, b]] += spec.move_noise / N_ACTIONS
    mdp = TabularMdp(transition, spec.gamma)

    rng = np.random.default_rng(spec.seed)
    if spec.reward_kind == "linear":
        phi = _action_block_features(spec)
        theta = rng.normal(size=phi.shape[2])
        raw = phi @ theta
    elif spec.reward_kind == "tabular-linear":
        phi = _one_hot_features(spec)
        raw = rng.uniform(-1.0, 1.0, size=(ns, N_ACTIONS))
    else:  # nonlinear truth, but only raw-coordinate features are exposed
        phi = _action_block_features(spec)
        raw = _nonlinear_reward(spec, rng)

    if spec.feature_dim is not None and spec.feature_dim != phi.shape[2]:
        raise ValueError(
            f"feature_dim={spec.feature_dim} but reward kind {spec.reward_kind!r} "
            f"produces {phi.shape[2]} features"
        )

    raw = raw / max(np.max(np.abs(raw)), 1e-12)
    scale = spec.reward_scale
    r_true = scale * raw
    if spec.min_action_prob > 0.0:
        for _ in range(80):
            _, _, pi = soft_value_iteration(mdp, r_true, tol=1e-9)
            if pi.min() >= spec.min_action_prob:
                break
            scale *= 0.9
            r_true = scale * raw
        else:
            raise RuntimeError("could not satisfy min_action_prob by rescaling")
    return mdp, r_true, FeatureMap(phi)


def expert_policy(mdp: TabularMdp, r_true, tol: float = 1e-10) -> np.ndarray:
    """Softmax-optimal behavior policy for the given reward."""
    _, _, pi = soft_value_iteration(mdp, r_true, tol=tol)
    return pi


def sample_transitions(mdp: TabularMdp, pi, n: int, init=None,
                       regime: str = "iid-restart", seed: int = 0,
                       env_id: str = "-") -> TransitionDataset:
    """Draw n (s, a, s') records from the behavior policy.

    iid-restart: the state rolls forward with probability gamma and restarts
    from `init` otherwise (the discounted occupancy sampler). trajectory: one
    long chain. `init` defaults to uniform.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    if regime not in REGIMES:
        raise ValueError(f"unknown sampling regime {regime!r}")
    pi = validate_policy(pi, mdp.n_states, mdp.n_actions)
    if init is None:
        init = np.full(mdp.n_states, 1.0 / mdp.n_states)
    init = validate_state_distribution(init, mdp.n_states)

    rng = np.random.default_rng(seed)
    u = rng.random((n, 3))
    init_cdf = np.cumsum(init)
    pi_cdf = np.cumsum(pi, axis=1)
    trans_cdf = np.cumsum(mdp.transition, axis=2)
    na, ns = mdp.n_actions, mdp.n_states

    states = np.empty(n, dtype=np.int64)
    actions = np.empty(n, dtype=np.int64)
    next_states = np.empty(n, dtype=np.int64)
    s = min(int(np.searchsorted(init_cdf, u[0, 2], side="right")), ns - 1)
    for i in range(n):
        a = min(int(np.searchsorted(pi_cdf[s], u[i, 0], side="right")), na - 1)
        s2 = min(int(np.searchsorted(trans_cdf[s, a], u[i, 1], side="right")), ns - 1)
        states[i], actions[i], next_states[i] = s, a, s2
        if i + 1 < n:
            if regime == "trajectory" or u[i + 1, 2] < mdp.gamma:
                s = s2
            else:
                s = min(int(np.searchsorted(init_cdf, rng.random(), side="right")), ns - 1)

    meta = {"seed": seed, "env": env_id or "-", "n": n,
            "n_states": ns, "n_actions": na, "regime": regime}
    ds = TransitionDataset(states, actions, next_states, meta)
    ds.validate()
    return ds


def write_dataset(dataset: TransitionDataset, path) -> None:
    """Write line-delimited `s,a,s_next` records under a one-line meta header."""
    dataset.validate()
    m = dataset.meta
    env = str(m.get("env", "-")) or "-"
    if any(ch.isspace() for ch in env):
        raise ValueError(f"env id must not contain whitespace: {env!r}")
    header = (f"{_HEADER_PREFIX} seed={m.get('seed', 0)} env={env} n={dataset.n} "
              f"n_states={m['n_states']} n_actions={m['n_actions']} "
              f"regime={m.get('regime', 'iid-restart')}")
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for s, a, s2 in zip(dataset.states, dataset.actions, dataset.next_states):
            fh.write(f"{s},{a},{s2}\n")


def read_dataset(path) -> TransitionDataset:
    """Inverse of write_dataset; raises ValueError naming the offending line."""
    with open(path) as fh:
        header = fh.readline().rstrip("\n")
        if not header.startswith(_HEADER_PREFIX):
            raise ValueError(f"{path}:1: missing dataset header")
        meta = {}
        for tok in header[len(_HEADER_PREFIX):].split():
            if "=" not in tok:
                raise ValueError(f"{path}:1: malformed header token {tok!r}")
            key, val = tok.split("=", 1)
            meta[key] = val if key in ("env", "regime") else int(val)
        for key in ("n", "n_states", "n_actions"):
            if key not in meta:
                raise ValueError(f"{path}:1: header missing {key}")

        states, actions, next_states = [], [], []
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ValueError(f"{path}:{lineno}: expected 's,a,s_next', got {line!r}")
            try:
                s, a, s2 = (int(p) for p in parts)
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-integer field in {line!r}") from None
            if not 0 <= s < meta["n_states"] or not 0 <= s2 < meta["n_states"]:
                raise ValueError(f"{path}:{lineno}: state index out of range")
            if not 0 <= a < meta["n_actions"]:
                raise ValueError(f"{path}:{lineno}: action index out of range")
            states.append(s)
            actions.append(a)
            next_states.append(s2)

    if len(states) != meta["n"]:
        raise ValueError(f"{path}: header says n={meta['n']} but found {len(states)} records")
    ds = TransitionDataset(np.array(states, dtype=np.int64),
                           np.array(actions, dtype=np.int64),
                           np.array(next_states, dtype=np.int64), meta)
    ds.validate()
    return ds
