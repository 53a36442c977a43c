"""SINR-binned radar scan/track scenario generator.

States are uniform SINR bins (represented by their midpoints, in dB), actions
are scan/track modes. Costs follow ``c(i,u) = (1 - tanh(rho_i / chi)) * C_u``
and transitions are softmax rows ``P_ij(u) ∝ exp(K_i t_u (rho_i - rho_j))``:
rows skew toward lower-SINR states, more strongly for confident states
(large ``K_i``) and slow modes (large ``t_u``).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mdp import MdpModel

PAPER_C_U = (0.606, 0.407, 0.977, 0.465)
PAPER_K_I = (0.0040, 0.0210, 0.0960, 0.1310, 0.2130,
             0.5020, 0.5280, 0.7910, 0.8450, 0.8500)
PAPER_T_U = (0.083, 0.413, 0.590, 0.928)
PAPER_ACTIONS = ("Fine Scanning", "Coarse Scanning", "Fine Tracking", "Coarse Tracking")


@dataclass(frozen=True)
class ScenarioParams:
    """Parameter bundle for the SINR-binned scan/track MDP."""

    sinr_min_db: float
    sinr_max_db: float
    n_states: int
    chi: float
    c_u: tuple[float, ...]
    k_i: tuple[float, ...]
    t_u: tuple[float, ...]
    action_names: tuple[str, ...] = field(default=())

    def __post_init__(self):
        object.__setattr__(self, "c_u", tuple(float(v) for v in self.c_u))
        object.__setattr__(self, "k_i", tuple(float(v) for v in self.k_i))
        object.__setattr__(self, "t_u", tuple(float(v) for v in self.t_u))
        names = tuple(self.action_names) or tuple(
            f"action_{u}" for u in range(len(self.c_u)))
        object.__setattr__(self, "action_names", names)
        if not self.sinr_min_db < self.sinr_max_db:
            raise ValueError("require sinr_min_db < sinr_max_db")
        if self.n_states < 2:
            raise ValueError("require n_states >= 2")
        if not self.chi > 0:
            raise ValueError("require chi > 0")
        if len(self.k_i) != self.n_states:
            raise ValueError("k_i must have one entry per state")
        if len(self.t_u) != len(self.c_u) or len(names) != len(self.c_u):
            raise ValueError("c_u, t_u and action_names must agree in length")
        if any(v <= 0 for v in self.c_u):
            raise ValueError("all C_u must be positive")
        if any(v < 0 for v in self.k_i) or any(v < 0 for v in self.t_u):
            raise ValueError("K_i and t_u must be nonnegative")
        if any(b < a for a, b in zip(self.k_i, self.k_i[1:])):
            raise ValueError("K_i must be non-decreasing in the SINR bin")

    @property
    def n_actions(self) -> int:
        return len(self.c_u)

    def bin_midpoints_db(self) -> np.ndarray:
        """Representative SINR per state: the midpoint of each uniform bin."""
        edges = np.linspace(self.sinr_min_db, self.sinr_max_db, self.n_states + 1)
        return 0.5 * (edges[:-1] + edges[1:])

    def to_dict(self) -> dict:
        return {
            "sinr_min_db": self.sinr_min_db,
            "sinr_max_db": self.sinr_max_db,
            "n_states": self.n_states,
            "chi": self.chi,
            "c_u": list(self.c_u),
            "k_i": list(self.k_i),
            "t_u": list(self.t_u),
            "action_names": list(self.action_names),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> "ScenarioParams":
        return cls(
            sinr_min_db=float(doc["sinr_min_db"]),
            sinr_max_db=float(doc["sinr_max_db"]),
            n_states=int(doc["n_states"]),
            chi=float(doc["chi"]),
            c_u=tuple(doc["c_u"]),
            k_i=tuple(doc["k_i"]),
            t_u=tuple(doc["t_u"]),
            action_names=tuple(doc.get("action_names", ())),
        )


def build_cost(params: ScenarioParams) -> np.ndarray:
    """c[i, u] = (1 - tanh(rho_i / chi)) * C_u, strictly decreasing in SINR."""
    rho = params.bin_midpoints_db()
    c_rho = 1.0 - np.tanh(rho / params.chi)
    return np.outer(c_rho, np.asarray(params.c_u))


def build_transition(params: ScenarioParams) -> np.ndarray:
    """Softmax rows P[i, u, j] ∝ exp(K_i t_u (rho_i - rho_j))."""
    rho = params.bin_midpoints_db()
    k = np.asarray(params.k_i)
    t = np.asarray(params.t_u)
    gap = rho[:, None] - rho[None, :]                # (i, j)
    logits = k[:, None, None] * t[None, :, None] * gap[:, None, :]
    logits -= logits.max(axis=2, keepdims=True)
    p = np.exp(logits)
    return p / p.sum(axis=2, keepdims=True)


def build_model(params: ScenarioParams) -> MdpModel:
    return MdpModel(
        n_states=params.n_states,
        n_actions=params.n_actions,
        transition=build_transition(params),
        cost=build_cost(params),
    )


def paper_default_scenario(chi: float = 10.0) -> tuple[MdpModel, ScenarioParams]:
    """The 10-state, 4-action scan/track scenario: SINR 0..35 dB, published
    C_u / K_i / t_u vectors, chi configurable (10 by default)."""
    params = ScenarioParams(
        sinr_min_db=0.0,
        sinr_max_db=35.0,
        n_states=10,
        chi=chi,
        c_u=PAPER_C_U,
        k_i=PAPER_K_I,
        t_u=PAPER_T_U,
        action_names=PAPER_ACTIONS,
    )
    return build_model(params), params
