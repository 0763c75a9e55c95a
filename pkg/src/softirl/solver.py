"""Reward and soft-value recovery from behavior data.

The population maximum-likelihood solution is a potential shaping of the
trivial pair (log pi, 0), pinned down by requiring the reward to integrate to
zero against a reference conditional measure mu. That potential solves an
n_states-dimensional linear system, which `exact_population_solver` solves
densely. The two data-driven variants replace the exact ingredients with a
classification oracle for pi and an iterated regression oracle for the value
fixed point: `classify_then_regress` refits on the full sample every
iteration, `split_classify_regress` dedicates half the data to
classification and one disjoint fold per regression step.

Both variants return rewards through the same closed form r = w - mu w with
w = u - gamma v, which satisfies the normalization identically (and exactly
at the reference action for point-mass mu) regardless of oracle quality.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

from softirl.mdp import (
    TabularMdp,
    apply_P,
    expect_mu,
    joint_frequency,
    state_kernel,
    validate_policy,
)
from softirl.oracles import (
    ClassifierSpec,
    RegressorSpec,
    fit_classifier,
    fit_regressor,
    log_policy,
)

MU_KINDS = ("uniform", "point-mass", "behavior-policy")
MAX_AUTO_K = 500


@dataclass(frozen=True)
class NormalizationMeasure:
    """Reference conditional measure the recovered reward integrates to zero against."""

    kind: str = "uniform"
    ref_action: int = 0
    realized: np.ndarray | None = None

    def materialize(self, n_states: int, n_actions: int, behavior=None) -> np.ndarray:
        if self.kind == "uniform":
            return np.full((n_states, n_actions), 1.0 / n_actions)
        if self.kind == "point-mass":
            if not 0 <= self.ref_action < n_actions:
                raise ValueError(f"ref_action {self.ref_action} out of range")
            table = np.zeros((n_states, n_actions))
            table[:, self.ref_action] = 1.0
            return table
        if self.kind == "behavior-policy":
            table = self.realized if self.realized is not None else behavior
            if table is None:
                raise ValueError("behavior-policy measure needs a realized policy table")
            return validate_policy(table, n_states, n_actions)
        raise ValueError(f"unknown normalization measure kind {self.kind!r}")


@dataclass
class SolverConfig:
    gamma: float = 0.97
    K: int | str = "auto"
    mu: NormalizationMeasure = field(default_factory=NormalizationMeasure)
    classifier: ClassifierSpec = field(default_factory=ClassifierSpec)
    regressor: RegressorSpec = field(default_factory=RegressorSpec)
    split: bool = False
    folds: int | None = None


@dataclass
class SolverDiagnostics:
    """Error-budget quantities observed during a solve.

    eta[k] is the root-mean-square misfit of the k-th regression on its own
    fitting fold; nu_proxy is the train KL between the empirical conditional
    and the fitted classifier; kappa_hat is the largest ratio of stationary
    to empirical (s, a) mass over the visited support.
    """

    eta: list = field(default_factory=list)
    nu_proxy: float | None = None
    kappa_hat: float | None = None
    iterations: int = 0
    warnings: list = field(default_factory=list)
    extras: dict = field(default_factory=dict)


@dataclass
class IrlSolution:
    r: np.ndarray
    v: np.ndarray
    u: np.ndarray
    c: np.ndarray
    mu_table: np.ndarray
    gamma: float
    diagnostics: SolverDiagnostics = field(default_factory=SolverDiagnostics)


def resolve_K(K, n: int | None, gamma: float) -> int:
    """'auto' picks ceil(ln n / ln(1/gamma)) capped at MAX_AUTO_K, so the
    remaining iteration error gamma^K is about 1/n."""
    if isinstance(K, str):
        if K != "auto":
            raise ValueError(f"K must be an integer or 'auto', got {K!r}")
        if n is None:
            raise ValueError("K='auto' needs a dataset to read n from")
        if gamma <= 0.0:
            return 1
        return min(max(1, math.ceil(math.log(n) / math.log(1.0 / gamma))), MAX_AUTO_K)
    if K < 0:
        raise ValueError("K must be nonnegative")
    return int(K)


def _mu_table(mu, n_states: int, n_actions: int, behavior=None) -> np.ndarray:
    if isinstance(mu, NormalizationMeasure):
        return mu.materialize(n_states, n_actions, behavior=behavior)
    return validate_policy(mu, n_states, n_actions)


def T_u_apply(mdp: TabularMdp, mu, u, v) -> np.ndarray:
    """One exact fixed-point step: P mu (gamma v - u)."""
    mu_t = _mu_table(mu, mdp.n_states, mdp.n_actions)
    return apply_P(mdp, expect_mu(mu_t, mdp.gamma * np.asarray(v, dtype=float)
                                  - np.asarray(u, dtype=float)))


def _assemble(u: np.ndarray, v: np.ndarray, mu_t: np.ndarray, gamma: float):
    """Closed-form return line shared by both algorithms.

    With w = u - gamma v, the reward w - mu w integrates to zero against mu
    by construction, and exactly cancels at the reference action when mu is
    a point mass.
    """
    w = u - gamma * v
    mu_w = np.sum(mu_t * w, axis=1)
    r = w - mu_w[:, None]
    return r, -mu_w


def check_normalization(r, mu, n_states=None, n_actions=None) -> float:
    """Largest per-state magnitude of the mu-integral of r."""
    r = np.asarray(r, dtype=float)
    mu_t = _mu_table(mu, *(r.shape if n_states is None else (n_states, n_actions)))
    return float(np.max(np.abs(np.sum(mu_t * r, axis=1))))


def shape(r, v, c, mdp: TabularMdp):
    """Potential shaping: (r + c - gamma Pc, v + Pc) preserves feasibility
    and likelihood for any state potential c."""
    r = np.asarray(r, dtype=float)
    v = np.asarray(v, dtype=float)
    if r.shape != v.shape or r.shape != (mdp.n_states, mdp.n_actions):
        raise ValueError(f"shape mismatch: r {r.shape}, v {v.shape}")
    pc = apply_P(mdp, np.asarray(c, dtype=float))
    return r + np.asarray(c, dtype=float)[:, None] - mdp.gamma * pc, v + pc


def exact_population_solver(mdp: TabularMdp, pi, mu) -> IrlSolution:
    """Unique normalized maximum-likelihood solution given the true policy.

    Solves (I - gamma K_mu) c = -mu log(pi) densely for the state potential
    (K_mu the state kernel under mu), then v = Pc and r via the shaping form.
    """
    pi = validate_policy(pi, mdp.n_states, mdp.n_actions)
    if np.any(pi <= 0.0):
        raise ValueError(
            "behavior policy has zero entries (log undefined); floor it first"
        )
    mu_t = _mu_table(mu, mdp.n_states, mdp.n_actions, behavior=pi)
    u = np.log(pi)
    kernel = state_kernel(mdp, mu_t)
    rhs = -expect_mu(mu_t, u)
    c_solve = np.linalg.solve(np.eye(mdp.n_states) - mdp.gamma * kernel, rhs)
    solve_residual = float(np.max(np.abs(c_solve - mdp.gamma * (kernel @ c_solve) - rhs)))
    if solve_residual > 1e-9:
        raise RuntimeError(f"potential solve residual {solve_residual:.3e} exceeds 1e-9")
    v = apply_P(mdp, c_solve)
    r, c = _assemble(u, v, mu_t, mdp.gamma)
    diag = SolverDiagnostics(eta=[], nu_proxy=0.0, iterations=0,
                             extras={"solve_residual": solve_residual})
    return IrlSolution(r, v, u, c, mu_t, mdp.gamma, diag)


def _classifier_train_kl(probs: np.ndarray, counts: np.ndarray) -> float:
    """KL of the fitted policy from the empirical conditional, weighted by
    empirical state frequency (finite because the fit is floored)."""
    state_counts = counts.sum(axis=1)
    seen = state_counts > 0
    emp = counts[seen] / state_counts[seen, None]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(emp > 0, emp * (np.log(np.maximum(emp, 1e-300)) - np.log(probs[seen])), 0.0)
    return float(np.sum(state_counts[seen] / state_counts.sum() * terms.sum(axis=1)))


def _empirical_kappa(freq: np.ndarray, mu_t: np.ndarray, warnings: list) -> float:
    """Density ratio of (empirical state marginal x mu) to the empirical
    joint, over the visited support; uncovered cells become a warning."""
    state_marginal = freq.sum(axis=1)
    target = state_marginal[:, None] * mu_t
    visited = freq > 0
    uncovered = np.sum((target > 0) & ~visited)
    if uncovered:
        warnings.append(f"{int(uncovered)} (s, a) cells carry mu mass but were never visited")
    if not np.any(visited):
        return float("inf")
    return float(np.max(target[visited] / freq[visited]))


def _fit_policy(cfg: SolverConfig, states, actions, n_states, n_actions):
    clf = fit_classifier(cfg.classifier, states, actions, n_states, n_actions)
    u = log_policy(clf)
    mu_t = cfg.mu.materialize(n_states, n_actions, behavior=clf.probs)
    return clf, u, mu_t


def classify_then_regress(data, cfg: SolverConfig, *, population=None,
                          benchmark_mdp: TabularMdp | None = None,
                          record_iterates: bool = False) -> IrlSolution:
    """Fitted fixed-point recovery: classify the behavior policy, then
    iterate regressions of mu[gamma v - u](s') on (s, a).

    `population=(mdp, pi)` swaps both oracles for their exact population
    versions (the classifier returns pi, each regression applies the exact
    operator), which is the infinite-data limit used by the diagnostics.
    `benchmark_mdp` augments diagnostics with exact per-iteration residuals
    when the true kernel is known but the oracles stay data-driven.
    """
    diag = SolverDiagnostics()
    iterates = []

    if population is not None:
        mdp, pi = population
        pi = validate_policy(pi, mdp.n_states, mdp.n_actions)
        if np.any(pi <= 0.0):
            raise ValueError("behavior policy has zero entries (log undefined); floor it first")
        n_states, n_actions = mdp.n_states, mdp.n_actions
        u = np.log(pi)
        mu_t = cfg.mu.materialize(n_states, n_actions, behavior=pi)
        k_steps = resolve_K(cfg.K, data.n if data is not None else None, cfg.gamma)
        v = np.zeros((n_states, n_actions))
        if record_iterates:
            iterates.append(v.copy())
        for _ in range(k_steps):
            v = T_u_apply(mdp, mu_t, u, v)
            diag.eta.append(0.0)
            if record_iterates:
                iterates.append(v.copy())
        diag.nu_proxy = 0.0
    else:
        n_states = data.meta["n_states"]
        n_actions = data.meta["n_actions"]
        if data.n < 1:
            raise ValueError("empty dataset")
        clf, u, mu_t = _fit_policy(cfg, data.states, data.actions, n_states, n_actions)
        counts = np.bincount(np.asarray(data.states) * n_actions + np.asarray(data.actions),
                             minlength=n_states * n_actions).reshape(n_states, n_actions)
        diag.nu_proxy = _classifier_train_kl(clf.probs, counts)
        if clf.diagnostics.get("n_unvisited_states"):
            diag.warnings.append(
                f"{clf.diagnostics['n_unvisited_states']} states never visited; "
                "classifier rows default to uniform there"
            )
        freq = joint_frequency(data.states, data.actions, n_states, n_actions)
        diag.kappa_hat = _empirical_kappa(freq, mu_t, diag.warnings)

        k_steps = resolve_K(cfg.K, data.n, cfg.gamma)
        v = np.zeros((n_states, n_actions))
        if record_iterates:
            iterates.append(v.copy())
        empty_seen = 0
        for k in range(k_steps):
            g = expect_mu(mu_t, cfg.gamma * v - u)
            y = g[data.next_states]
            try:
                fitted = fit_regressor(cfg.regressor, data.states, data.actions, y,
                                       n_states, n_actions)
            except Exception as exc:
                raise RuntimeError(f"regression oracle failed at iteration {k + 1}: {exc}") from exc
            v_new = fitted.table
            diag.eta.append(float(np.sqrt(np.mean(
                (v_new[data.states, data.actions] - y) ** 2))))
            if benchmark_mdp is not None:
                exact = T_u_apply(benchmark_mdp, mu_t, u, v)
                diag.extras.setdefault("eta_pop_sup", []).append(
                    float(np.max(np.abs(v_new - exact))))
            empty_seen = max(empty_seen, fitted.diagnostics.get("n_empty_cells", 0))
            v = v_new
            if record_iterates:
                iterates.append(v.copy())
        if empty_seen:
            diag.warnings.append(
                f"up to {empty_seen} (s, a) cells unvisited per regression; fallback used"
            )

    diag.iterations = k_steps
    if record_iterates:
        diag.extras["iterates"] = iterates
    r, c = _assemble(u, v, mu_t, cfg.gamma)
    return IrlSolution(r, v, u, c, mu_t, cfg.gamma, diag)


def split_classify_regress(data, cfg: SolverConfig, *,
                           record_iterates: bool = False) -> IrlSolution:
    """Sample-split variant: the classifier sees the first half of the data
    and each regression step fits on its own disjoint fold of the second."""
    n = data.n
    half = n // 2
    if half < 1:
        raise ValueError("need at least 2 records to split")
    n_states = data.meta["n_states"]
    n_actions = data.meta["n_actions"]

    diag = SolverDiagnostics()
    clf, u, mu_t = _fit_policy(cfg, data.states[:half], data.actions[:half],
                               n_states, n_actions)
    counts = np.bincount(np.asarray(data.states[:half]) * n_actions
                         + np.asarray(data.actions[:half]),
                         minlength=n_states * n_actions).reshape(n_states, n_actions)
    diag.nu_proxy = _classifier_train_kl(clf.probs, counts)
    freq = joint_frequency(data.states, data.actions, n_states, n_actions)
    diag.kappa_hat = _empirical_kappa(freq, mu_t, diag.warnings)

    k_steps = resolve_K(cfg.K, n, cfg.gamma)
    folds = cfg.folds if cfg.folds is not None else max(k_steps, 1)
    if folds < 1:
        raise ValueError("folds must be at least 1")
    fold_size = half // folds
    if fold_size == 0:
        raise ValueError(f"fold size is 0: half={half}, folds={folds}")
    if fold_size < n_states:
        diag.warnings.append(
            f"fold size {fold_size} is below the state count; coverage gaps likely"
        )

    reg_s = data.states[half:2 * half]
    reg_a = data.actions[half:2 * half]
    reg_s2 = data.next_states[half:2 * half]
    v = np.zeros((n_states, n_actions))
    iterates = [v.copy()] if record_iterates else []
    empty_seen = 0
    for k in range(k_steps):
        lo = (k % folds) * fold_size
        sl = slice(lo, lo + fold_size)
        g = expect_mu(mu_t, cfg.gamma * v - u)
        y = g[reg_s2[sl]]
        try:
            fitted = fit_regressor(cfg.regressor, reg_s[sl], reg_a[sl], y,
                                   n_states, n_actions)
        except Exception as exc:
            raise RuntimeError(f"regression oracle failed at iteration {k + 1}: {exc}") from exc
        v = fitted.table
        diag.eta.append(float(np.sqrt(np.mean((v[reg_s[sl], reg_a[sl]] - y) ** 2))))
        empty_seen = max(empty_seen, fitted.diagnostics.get("n_empty_cells", 0))
        if record_iterates:
            iterates.append(v.copy())
    if empty_seen:
        diag.warnings.append(
            f"up to {empty_seen} (s, a) cells unvisited per fold; fallback used"
        )
    diag.iterations = k_steps
    if record_iterates:
        diag.extras["iterates"] = iterates
    r, c = _assemble(u, v, mu_t, cfg.gamma)
    return IrlSolution(r, v, u, c, mu_t, cfg.gamma, diag)


def save_solution(solution: IrlSolution, out_dir) -> None:
    """Write r/v/u/c tables as CSV (action-index header) plus diagnostics.json."""
    os.makedirs(out_dir, exist_ok=True)
    header = ",".join(str(a) for a in range(solution.r.shape[1]))
    for name, table in (("r", solution.r), ("v", solution.v), ("u", solution.u)):
        np.savetxt(os.path.join(out_dir, f"{name}.csv"), table,
                   fmt="%.17g", delimiter=",", header=header, comments="")
    np.savetxt(os.path.join(out_dir, "c.csv"), solution.c,
               fmt="%.17g", delimiter=",", header="c", comments="")
    np.savetxt(os.path.join(out_dir, "mu.csv"), solution.mu_table,
               fmt="%.17g", delimiter=",", header=header, comments="")
    d = solution.diagnostics
    payload = {
        "gamma": solution.gamma,
        "eta": d.eta,
        "nu_proxy": d.nu_proxy,
        "kappa_hat": d.kappa_hat,
        "iterations": d.iterations,
        "warnings": d.warnings,
    }
    with open(os.path.join(out_dir, "diagnostics.json"), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_solution(out_dir) -> IrlSolution:
    tables = {}
    for name in ("r", "v", "u", "mu"):
        tables[name] = np.loadtxt(os.path.join(out_dir, f"{name}.csv"),
                                  delimiter=",", skiprows=1, ndmin=2)
    c = np.loadtxt(os.path.join(out_dir, "c.csv"), delimiter=",", skiprows=1, ndmin=1)
    with open(os.path.join(out_dir, "diagnostics.json")) as fh:
        payload = json.load(fh)
    diag = SolverDiagnostics(eta=payload.get("eta", []),
                             nu_proxy=payload.get("nu_proxy"),
                             kappa_hat=payload.get("kappa_hat"),
                             iterations=payload.get("iterations", 0),
                             warnings=payload.get("warnings", []))
    return IrlSolution(tables["r"], tables["v"], tables["u"], c,
                       tables["mu"], payload["gamma"], diag)
