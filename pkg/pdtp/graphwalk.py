"""
Graph Walk Module
Undirected graphs, one-step transition matrices and the subordinated walk transition matrix
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import IO, Callable, Dict, Iterable, List, Optional, Tuple, Union

import networkx as nx
import numpy as np
import pandas as pd

from .counting import ct_state_prob, state_distribution
from .errors import ConvergenceError, GraphError, IntegrityError
from .models import CtParams, NumericsSettings, PdtpParams, Route, resolve_settings
from .utils import NeumaierAccumulator

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class Graph:
    """Connected undirected simple graph on nodes 0..N-1"""
    adjacency: np.ndarray
    name: str = "graph"
    _neighbors: Tuple[np.ndarray, ...] = field(init=False, repr=False, default=())

    def __post_init__(self):
        a = np.array(self.adjacency, dtype=np.int64)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise GraphError(f"adjacency must be square, got shape {a.shape}")
        if a.shape[0] < 2:
            raise GraphError(f"a graph needs at least 2 nodes, got {a.shape[0]}", N=int(a.shape[0]))
        if not np.isin(a, (0, 1)).all():
            raise GraphError("adjacency entries must be 0 or 1")
        if np.any(np.diag(a) != 0):
            raise GraphError("self-loops are not allowed", nodes=np.flatnonzero(np.diag(a)).tolist())
        if not np.array_equal(a, a.T):
            raise GraphError("adjacency must be symmetric for an undirected graph")
        if not nx.is_connected(nx.from_numpy_array(a)):
            components = [sorted(c) for c in nx.connected_components(nx.from_numpy_array(a))]
            raise GraphError(
                f"graph {self.name!r} is disconnected ({len(components)} components)",
                components=components,
            )
        a.setflags(write=False)
        object.__setattr__(self, "adjacency", a)
        object.__setattr__(self, "_neighbors", tuple(np.flatnonzero(row) for row in a))

    @property
    def N(self) -> int:
        return int(self.adjacency.shape[0])

    @property
    def degrees(self) -> np.ndarray:
        return self.adjacency.sum(axis=1)

    def neighbors(self, node: int) -> np.ndarray:
        return self._neighbors[node]

    def edges(self) -> List[Tuple[int, int]]:
        rows, cols = np.nonzero(np.triu(self.adjacency))
        return [(int(i), int(j)) for i, j in zip(rows, cols)]

    def check_node(self, node: int) -> int:
        if int(node) != node or not 0 <= node < self.N:
            raise GraphError(f"node {node!r} is not in 0..{self.N - 1}", node=node, N=self.N)
        return int(node)


@dataclass(frozen=True, eq=False)
class StochasticMatrix:
    """Row-stochastic matrix; roundoff negatives are clamped to zero"""
    values: np.ndarray
    row_tol: float = 1e-10
    clamp: float = 1e-12

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise IntegrityError(f"transition matrix must be square, got shape {v.shape}", residual=float("nan"))
        lowest = float(v.min())
        if lowest < -self.clamp:
            raise IntegrityError(f"transition matrix has a negative entry {lowest:.3g}", residual=-lowest)
        if lowest < 0:
            logger.debug(f"clamping roundoff negatives down to {lowest:.3g}")
            v = np.maximum(v, 0.0)
        residual = float(np.max(np.abs(v.sum(axis=1) - 1.0)))
        if residual > self.row_tol:
            raise IntegrityError(f"row sums deviate from 1 by {residual:.3g}", residual=residual)
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def N(self) -> int:
        return int(self.values.shape[0])

    def row(self, i: int) -> np.ndarray:
        return self.values[i].copy()

    def to_numpy(self) -> np.ndarray:
        return self.values.copy()

    def row_sum_residual(self) -> float:
        return float(np.max(np.abs(self.values.sum(axis=1) - 1.0)))

    def detailed_balance_residual(self, degrees: np.ndarray) -> float:
        """max |K_i P_ij - K_j P_ji|"""
        flux = np.asarray(degrees, dtype=float)[:, None] * self.values
        return float(np.max(np.abs(flux - flux.T)))

    def spectral_radius(self) -> float:
        return float(np.max(np.abs(np.linalg.eigvals(self.values))))

    def commutator_residual(self, other: "StochasticMatrix") -> float:
        a, b = self.values, other.values
        return float(np.max(np.abs(a @ b - b @ a)))


# --- Construction ---

def from_edge_list(edges: Iterable[Tuple[int, int]], N: int, name: str = "graph") -> Graph:
    """
    Build a graph from node pairs

    Args:
        edges: (i, j) pairs; duplicates and reversed duplicates collapse
        N: Number of nodes
        name: Label used in logs and output headers

    Returns:
        Graph
    """
    if int(N) != N or N < 2:
        raise GraphError(f"a graph needs at least 2 nodes, got N={N!r}", N=N)
    a = np.zeros((N, N), dtype=np.int64)
    for i, j in edges:
        if int(i) != i or int(j) != j or not (0 <= i < N and 0 <= j < N):
            raise GraphError(f"edge ({i}, {j}) has a node outside 0..{N - 1}", edge=[i, j], N=N)
        if i == j:
            raise GraphError(f"self-loop at node {i}", edge=[i, j])
        a[i, j] = a[j, i] = 1
    return Graph(a, name)


def read_edge_list(path: Union[str, Path]) -> Graph:
    """
    Read a graph from an edge-list file

    The first non-comment line is `N <int>`, each further line an `i j` pair;
    `#` starts a comment.

    Args:
        path: File path

    Returns:
        Graph named after the file stem
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise GraphError(f"cannot read edge list {str(path)!r}: {e}", path=str(path))

    n_nodes: Optional[int] = None
    edges: List[Tuple[int, int]] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if n_nodes is None:
                if len(parts) != 2 or parts[0] != "N":
                    raise ValueError("expected header 'N <int>'")
                n_nodes = int(parts[1])
            else:
                if len(parts) != 2:
                    raise ValueError("expected 'i j'")
                edges.append((int(parts[0]), int(parts[1])))
        except ValueError as e:
            raise GraphError(f"{path.name}:{lineno}: {e}", path=str(path), line=lineno)
    if n_nodes is None:
        raise GraphError(f"{path.name}: missing 'N <int>' header", path=str(path))
    logger.info(f"Read graph {path.stem!r}: N={n_nodes}, {len(edges)} edge lines")
    return from_edge_list(edges, n_nodes, name=path.stem)


def complete_graph(N: int) -> Graph:
    return Graph(np.ones((N, N), dtype=np.int64) - np.eye(N, dtype=np.int64), f"K{N}")


def triangle() -> Graph:
    g = complete_graph(3)
    return Graph(g.adjacency, "triangle")


def star_graph(k: int) -> Graph:
    """Star with center 0 and leaves 1..k"""
    return from_edge_list([(0, i) for i in range(1, k + 1)], k + 1, name=f"star{k}")


def cycle_graph(N: int) -> Graph:
    return from_edge_list([(i, (i + 1) % N) for i in range(N)], N, name=f"cycle{N}")


def random_connected_graph(N: int, p: float, seed: int = 0, max_attempts: int = 1000) -> Graph:
    """
    G(N, p) instance, reseeded deterministically (seed, seed+1, ...) until connected

    Returns:
        Graph named gnp<N>
    """
    for attempt in range(max_attempts):
        candidate = nx.gnp_random_graph(N, p, seed=seed + attempt)
        if N >= 2 and nx.is_connected(candidate):
            a = nx.to_numpy_array(candidate, nodelist=range(N), dtype=np.int64)
            logger.debug(f"G({N}, {p}) connected at seed {seed + attempt}")
            return Graph(a, f"gnp{N}")
    raise GraphError(f"no connected G({N}, {p}) within {max_attempts} seeds", N=N, p=p)


NAMED_GRAPHS: Dict[str, Callable[[], "Graph"]] = {
    "k2": lambda: complete_graph(2),
    "triangle": triangle,
    "star3": lambda: star_graph(3),
    "cycle5": lambda: cycle_graph(5),
    "gnp10": lambda: random_connected_graph(10, 0.4, seed=0),
}


def named_graph(name: str) -> Graph:
    try:
        return NAMED_GRAPHS[name]()
    except KeyError:
        raise GraphError(f"unknown graph name {name!r}; known: {', '.join(NAMED_GRAPHS)}", name=name)


# --- Transition matrices ---

def one_step_matrix(g: Graph) -> StochasticMatrix:
    """H_ij = A_ij / K_i"""
    return StochasticMatrix(g.adjacency / g.degrees[:, None], row_tol=1e-12)


def _polynomial_in_h(g: Graph, weights: Iterable[float]) -> np.ndarray:
    h = one_step_matrix(g).values
    power = np.eye(g.N)
    acc = NeumaierAccumulator((g.N, g.N))
    for n, w in enumerate(weights):
        if n > 0:
            power = power @ h
        if w != 0.0:
            acc.add(w * power)
    return acc.value()


def dtrw_matrix(
    g: Graph,
    p: PdtpParams,
    t: int,
    route: Route = Route.AUTO,
    settings: Optional[NumericsSettings] = None
) -> StochasticMatrix:
    """
    Transition matrix P(t) = sum_{n=0}^{t} H^n Phi^(n)(t)

    Args:
        g: Graph
        p: Process parameters
        t: Nonnegative integer time
        route: Route of the state probabilities (AUTO by default)
        settings: Numeric settings

    Returns:
        StochasticMatrix; the identity at t = 0
    """
    dist = state_distribution(p, t, route, settings)
    values = _polynomial_in_h(g, dist.probs)
    logger.debug(f"P(t={t}) on {g.name}: route={dist.route.value}, residual={dist.residual:.3g}")
    return StochasticMatrix(values)


def occupation_row(
    g: Graph,
    p: PdtpParams,
    t: int,
    start: int,
    route: Route = Route.AUTO,
    settings: Optional[NumericsSettings] = None
) -> np.ndarray:
    """Probability of each node at time t for a walker started at `start`"""
    start = g.check_node(start)
    return dtrw_matrix(g, p, t, route, settings).row(start)


def stationary_distribution(g: Graph) -> np.ndarray:
    """pi_i = K_i / sum_j K_j"""
    k = g.degrees.astype(float)
    return k / k.sum()


def ct_transition_matrix(
    g: Graph,
    ct: CtParams,
    t: float,
    tol: float = 1e-10,
    settings: Optional[NumericsSettings] = None
) -> StochasticMatrix:
    """
    Continuous-time limit P_ct(t) = sum_n H^n Phi_ct^(n)(t), summed until the
    remaining state mass is below tol

    Returns:
        StochasticMatrix with row tolerance 10*tol
    """
    settings = resolve_settings(settings)
    weights: List[float] = []
    mass = 0.0
    for n in range(settings.max_terms):
        w = ct_state_prob(ct, n, t, settings)
        weights.append(w)
        mass += w
        if 1.0 - mass <= tol and w <= tol:
            break
    else:
        raise ConvergenceError(f"state mass at t={t} still {1.0 - mass:.3g} short after {len(weights)} states")
    logger.debug(f"P_ct(t={t}) on {g.name}: {len(weights)} states, mass defect {1.0 - mass:.3g}")
    return StochasticMatrix(_polynomial_in_h(g, weights), row_tol=10 * tol)


def write_matrix_csv(matrix: Union[StochasticMatrix, np.ndarray], target: Union[str, Path, IO]) -> None:
    """Row-major CSV, 17 significant digits, no header or index"""
    values = matrix.values if isinstance(matrix, StochasticMatrix) else np.asarray(matrix, dtype=float)
    pd.DataFrame(values).to_csv(target, header=False, index=False, float_format="%.17g", lineterminator="\n")
