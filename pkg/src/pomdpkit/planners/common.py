"""Shared tree-search machinery: nodes, UCB selection, widening, rollouts."""

from __future__ import annotations

import math
from dataclasses import dataclass, fields
from typing import Any, Iterable, Sequence

from ..core import Action, Environment, State
from ..errors import ContractViolationError
from ..rng import Rng

EXPECTATION = "expectation"
CVAR = "cvar"


def ucb_score(q: float, n_parent: int, n_child: int, c: float) -> float:
    """UCT selection score; unvisited children get the +inf try-me sentinel."""
    if n_child == 0:
        return math.inf
    return q + c * math.sqrt(math.log(n_parent) / n_child)


def pw_allows_new_child(n: int, num_children: int, k: float, alpha: float) -> bool:
    """Progressive widening: admit a child while count < ceil(k * max(n,1)^alpha)."""
    return num_children < math.ceil(k * max(n, 1) ** alpha)


class SearchNode:
    """One node of a planner's search tree.

    Belief nodes key children by action; action nodes key children by
    observation (or by insertion index in the PFT family, where every
    expansion builds a distinct belief child).  ``edge_visits`` counts every
    traversal of the edge into this node and drives closed-widening selection;
    ``N``/``Q`` are the visit count and running value of the node itself.
    ``bag`` holds (state, reward, terminal) triples inserted by simulations,
    weighted by ``bag_weights`` in POMCPOW.  ``returns`` collects per-visit
    returns when the CVaR backup operator is active.
    """

    __slots__ = (
        "kind", "N", "Q", "children", "edge_visits",
        "bag", "bag_weights", "belief", "terminal", "edge_reward",
        "obs_label", "returns",
    )

    def __init__(self, kind: str) -> None:
        self.kind = kind
        self.N = 0
        self.Q = 0.0
        self.children: dict[Any, SearchNode] = {}
        self.edge_visits = 0
        self.bag: list[tuple[State, float, bool]] = []
        self.bag_weights: list[float] = []
        self.belief = None
        self.terminal = False
        self.edge_reward = 0.0
        self.obs_label = None
        self.returns: list[float] | None = None


@dataclass(frozen=True)
class PlannerConfig:
    """Tunable parameters shared by every planner; each reads the subset it uses.

    ``depth`` is the planning horizon (a planning call always evaluates at
    least one action, so depth 0 degenerates to one-step lookahead).
    ``risk_operator`` selects how returns back up: "expectation" is the
    incremental mean, "cvar" the empirical CVaR at ``risk_alpha`` of the
    per-visit return sample.  ``discount_factor``, when given, must match the
    environment's discount; it exists so configs can state it explicitly.
    """

    depth: int = 10
    exploration_constant: float = 1.0
    n_simulations: int = 100
    k_a: float = 2.0
    alpha_a: float = 0.5
    k_o: float = 2.0
    alpha_o: float = 0.5
    m_particles: int = 20
    width: int = 3
    n_rollouts: int = 10
    risk_operator: str = EXPECTATION
    risk_alpha: float = 1.0
    rollout: str = "random"
    exhaustive: bool = False
    enumeration_cap: int = 200_000
    discount_factor: float | None = None

    def __post_init__(self) -> None:
        if self.depth < 0:
            raise ContractViolationError("depth must be nonnegative")
        if self.exploration_constant < 0:
            raise ContractViolationError("exploration_constant must be nonnegative")
        if self.n_simulations < 1 or self.m_particles < 1 or self.width < 1 or self.n_rollouts < 1:
            raise ContractViolationError("simulation, particle and width budgets must be positive")
        if not (0.0 <= self.alpha_a <= 1.0 and 0.0 <= self.alpha_o <= 1.0):
            raise ContractViolationError("widening exponents must lie in [0, 1]")
        if self.risk_operator not in (EXPECTATION, CVAR):
            raise ContractViolationError(f"unknown risk operator {self.risk_operator!r}")
        if not 0.0 < self.risk_alpha <= 1.0:
            raise ContractViolationError("risk_alpha must lie in (0, 1]")
        if self.rollout not in ("random", "none"):
            raise ContractViolationError(f"unknown rollout mode {self.rollout!r}")

    @classmethod
    def from_params(cls, params: dict[str, Any]) -> "PlannerConfig":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(params) - known)
        if unknown:
            raise ContractViolationError(
                f"unknown planner parameters {unknown}; valid: {sorted(known)}"
            )
        return cls(**params)

    def as_params(self) -> dict[str, Any]:
        """Full resolved parameter map; this is what gets hashed into specs."""
        return {f.name: getattr(self, f.name) for f in fields(self)}

    def validate_against(self, env: Environment) -> None:
        if self.discount_factor is not None and self.discount_factor != env.discount:
            raise ContractViolationError(
                f"planner discount_factor {self.discount_factor} != environment discount {env.discount}"
            )


class DiscreteActionSampler:
    """Proposes actions for progressive widening over a finite action set.

    Draws uniformly without replacement among the not-yet-expanded actions.
    """

    def __init__(self, actions: Sequence[Action]) -> None:
        if not actions:
            raise ContractViolationError("action sampler needs a nonempty action list")
        self.actions = tuple(actions)

    def sample_unexpanded(self, expanded: Iterable[Action], rng: Rng) -> Action:
        taken = set(expanded)
        candidates = [a for a in self.actions if a not in taken]
        if not candidates:
            raise ContractViolationError("all actions already expanded")
        return candidates[int(rng.integers(len(candidates)))]

    def sample(self, rng: Rng) -> Action:
        return self.actions[int(rng.integers(len(self.actions)))]


def random_rollout(state: State, env: Environment, depth: int, rng: Rng) -> float:
    """Discounted return of uniform-random actions until terminal or depth runs out."""
    actions = env.actions()
    total = 0.0
    disc = 1.0
    s = state
    for _ in range(depth):
        if env.is_terminal(s):
            break
        a = actions[int(rng.integers(len(actions)))]
        s, _obs, r, term, _safety = env.step(s, a, rng)
        total += disc * r
        disc *= env.discount
        if term:
            break
    return total


def leaf_value(state: State, env: Environment, depth: int, rng: Rng, mode: str) -> float:
    if mode == "none" or depth <= 0:
        return 0.0
    return random_rollout(state, env, depth, rng)


def backup(node: SearchNode, value: float, risk_operator: str, risk_alpha: float) -> None:
    """Fold one simulated return into an action node's value estimate."""
    node.N += 1
    if risk_operator == EXPECTATION:
        node.Q += (value - node.Q) / node.N
    else:
        if node.returns is None:
            node.returns = []
        node.returns.append(value)
        from ..evaluation import cvar

        node.Q = cvar(node.returns, risk_alpha)


def select_action_node(
    node: SearchNode,
    sampler: DiscreteActionSampler,
    c: float,
    rng: Rng,
    widen: bool,
    k_a: float,
    alpha_a: float,
) -> tuple[SearchNode, Action]:
    """Pick the action edge to follow from a belief node.

    While the widening budget (the full action set when ``widen`` is false)
    permits, a new uniformly drawn unexpanded action is added; afterwards the
    UCB-best existing child is taken, ties to the first-expanded child.
    """
    n_actions = len(sampler.actions)
    if widen:
        limit = min(math.ceil(k_a * max(node.N, 1) ** alpha_a), n_actions)
    else:
        limit = n_actions
    if len(node.children) < limit:
        a = sampler.sample_unexpanded(node.children.keys(), rng)
        child = SearchNode("action")
        node.children[a] = child
        return child, a
    n_parent = max(node.N, 1)
    best_a = None
    best_child = None
    best_score = -math.inf
    for a, child in node.children.items():
        score = ucb_score(child.Q, n_parent, child.N, c)
        if score > best_score:
            best_score = score
            best_a = a
            best_child = child
    return best_child, best_a


def best_root_action(root: SearchNode) -> Action:
    """Final selection: highest Q, ties broken by first-expanded order."""
    if not root.children:
        raise ContractViolationError("planner produced an empty root; no action to return")
    best_a = None
    best_q = -math.inf
    for a, child in root.children.items():
        if child.Q > best_q:
            best_q = child.Q
            best_a = a
    return best_a


def root_diagnostics(root: SearchNode) -> tuple[dict[str, int], dict[str, float]]:
    visits = {str(a): child.N for a, child in root.children.items()}
    values = {str(a): child.Q for a, child in root.children.items()}
    return visits, values
