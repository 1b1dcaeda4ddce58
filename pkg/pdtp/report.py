"""
Report Module
Builds result tables for every command and writes them as versioned CSV or JSON
"""
import io
import json
import logging
from typing import IO, Dict, List, Optional

import numpy as np
import pandas as pd

from . import __version__
from . import counting, graphwalk, montecarlo
from .errors import DomainError
from .models import CtParams, NumericsSettings, Route, RunConfig, TailMode, resolve_settings
from .specfun import prabhakar_density
from .utils import convert_numpy_types

logger = logging.getLogger(__name__)

SCHEMA_REVISION = 1
TAIL_MAX_ORACLE_LENGTH = 32768


class ReportBuilder:
    """Turns a resolved RunConfig into a result table"""

    def __init__(self, config: RunConfig, settings: Optional[NumericsSettings] = None):
        """
        Initialize report builder

        Args:
            config: Validated run configuration
            settings: Numeric settings (environment-resolved by the CLI)
        """
        self.config = config
        self.settings = resolve_settings(settings)

    @property
    def schema(self) -> str:
        return f"pdtp-{self.config.command}/{SCHEMA_REVISION}"

    def build(self) -> pd.DataFrame:
        """Dispatch on the command"""
        builders = {
            "pmf": self.pmf_table,
            "states": self.states_table,
            "ct-states": self.ct_states_table,
            "tail": self.tail_table,
            "limit-probe": self.limit_probe_table,
            "walk": self.walk_table,
            "simulate": self.simulate_table,
        }
        logger.info(f"Running command {self.config.command!r}")
        return builders[self.config.command]()

    def _route(self, default: Route) -> Route:
        return self.config.route if self.config.route is not None else default

    def _require_t(self) -> List[int]:
        if not self.config.t_values:
            raise DomainError(f"command {self.config.command!r} needs --t")
        return self.config.t_values

    def _require_grid(self) -> List[float]:
        if self.config.t_grid:
            return self.config.t_grid
        if self.config.t_values:
            return [float(t) for t in self.config.t_values]
        raise DomainError(f"command {self.config.command!r} needs --t-grid")

    def _graph(self) -> graphwalk.Graph:
        if self.config.graph_path is not None:
            return graphwalk.read_edge_list(self.config.graph_path)
        if self.config.graph_name is not None:
            return graphwalk.named_graph(self.config.graph_name)
        raise DomainError(f"command {self.config.command!r} needs --graph or --graph-name")

    # --- 1. Discrete-time tables ---
    def pmf_table(self) -> pd.DataFrame:
        p = self.config.params
        route = self._route(Route.CLOSED_FORM)
        rows = [
            {"t": t, "theta": counting.interarrival_pmf(p, t, route, self.settings)}
            for t in self._require_t()
        ]
        return pd.DataFrame(rows, columns=["t", "theta"])

    def states_table(self) -> pd.DataFrame:
        p = self.config.params
        route = self._route(Route.AUTO)
        rows = []
        for t in self._require_t():
            dist = counting.state_distribution(p, t, route, self.settings)
            selected = self.config.n_values or range(t + 1)
            for n in selected:
                prob = float(dist.probs[n]) if n <= t else 0.0
                rows.append({"t": t, "n": n, "prob": prob})
        return pd.DataFrame(rows, columns=["t", "n", "prob"])

    # --- 2. Continuous-time and tail tables ---
    def ct_states_table(self) -> pd.DataFrame:
        ct = self.config.ct
        n_values = self.config.n_values or [0]
        rows = [
            {"t": t, "n": n, "prob": counting.ct_state_prob(ct, n, t, self.settings)}
            for n in n_values
            for t in self._require_grid()
        ]
        return pd.DataFrame(rows, columns=["t", "n", "prob"])

    def tail_table(self) -> pd.DataFrame:
        params = self.config.params if self.config.params is not None else self.config.ct
        mode = self.config.tail_mode
        n_values = (self.config.n_values or [0]) if mode is TailMode.STATE else [None]
        rows = []
        for t in self._require_grid():
            asymptote = counting.tail_asymptote(params, mode, t)
            for n in n_values:
                exact = self._tail_exact(params, mode, n, t)
                rows.append({
                    "t": t,
                    "n": n if n is not None else "",
                    "mode": mode.value,
                    "asymptote": asymptote,
                    "exact": exact,
                    "ratio": exact / asymptote,
                })
        return pd.DataFrame(rows, columns=["t", "n", "mode", "asymptote", "exact", "ratio"])

    def _tail_exact(self, params, mode: TailMode, n: Optional[int], t: float) -> float:
        if isinstance(params, CtParams):
            if mode is TailMode.STATE:
                return counting.ct_state_prob(params, n, t, self.settings)
            return prabhakar_density(params, t, self.settings).value
        if t != int(t):
            raise DomainError(f"discrete tail needs integer times, got t={t!r}", t=t)
        t = int(t)
        settings = self._tail_settings(t)
        if mode is TailMode.STATE:
            return counting.state_prob(params, n, t, Route.ORACLE, settings)
        return counting.interarrival_pmf(params, t, Route.ORACLE, settings)

    def _tail_settings(self, t: int) -> NumericsSettings:
        # the tail table may run the oracle past its usual length cap
        if t + 1 <= self.settings.oracle_max_length:
            return self.settings
        if t + 1 > TAIL_MAX_ORACLE_LENGTH:
            raise DomainError(
                f"t={t} needs an oracle longer than the tail cap {TAIL_MAX_ORACLE_LENGTH}",
                t=t,
                oracle_max_length=TAIL_MAX_ORACLE_LENGTH,
            )
        needed = min(1 << t.bit_length(), TAIL_MAX_ORACLE_LENGTH)
        logger.info(f"Raising the oracle length cap to {needed} for the tail at t={t}")
        return self.settings.model_copy(update={"oracle_max_length": needed})

    def limit_probe_table(self) -> pd.DataFrame:
        ct = self.config.ct
        if not self.config.h_list:
            raise DomainError("command 'limit-probe' needs --h-list")
        rows = []
        for n in self.config.n_values or [0]:
            for t in self._require_grid():
                for record in counting.scaled_limit_probe(ct, n, t, self.config.h_list, self.settings):
                    rows.append({
                        "n": n,
                        "t": t,
                        "h": record.h,
                        "steps": record.steps,
                        "rounding_residue": record.rounding_residue,
                        "xi_h": record.xi_h,
                        "route": record.route.value,
                        "discrete_value": record.discrete_value,
                        "ct_value": record.ct_value,
                        "gap": record.gap,
                    })
        columns = ["n", "t", "h", "steps", "rounding_residue", "xi_h", "route", "discrete_value", "ct_value", "gap"]
        return pd.DataFrame(rows, columns=columns)

    # --- 3. Graph and Monte Carlo tables ---
    def walk_table(self) -> pd.DataFrame:
        g = self._graph()
        p = self.config.params
        route = self._route(Route.AUTO)
        rows = []
        for t in self._require_t():
            matrix = graphwalk.dtrw_matrix(g, p, t, route, self.settings)
            starts = [g.check_node(self.config.start)] if self.config.start is not None else range(g.N)
            for i in starts:
                for j, prob in enumerate(matrix.values[i]):
                    rows.append({"t": t, "i": i, "j": j, "prob": float(prob)})
        return pd.DataFrame(rows, columns=["t", "i", "j", "prob"])

    def simulate_table(self) -> pd.DataFrame:
        cfg = self.config
        p = cfg.params
        horizon = max(self._require_t())
        table = montecarlo.build_sampler(p, cfg.eps_tail, self.settings)
        frames = []
        if cfg.graph_path is not None or cfg.graph_name is not None:
            g = self._graph()
            start = g.check_node(cfg.start or 0)
            paths = montecarlo.simulate_walk_ensemble(g, table, horizon, start, cfg.walkers, cfg.seed, cfg.threads)
            for t in cfg.t_values:
                hist = montecarlo.empirical_occupation(paths, t, g.N)
                analytic = graphwalk.occupation_row(g, p, t, start, self._route(Route.AUTO), self.settings)
                frames.append(montecarlo.compare_to_analytic(hist, analytic, index_name="node"))
        else:
            paths = montecarlo.simulate_counting_ensemble(table, horizon, cfg.walkers, cfg.seed, cfg.threads)
            for t in cfg.t_values:
                hist = montecarlo.empirical_state_probs(paths, t)
                analytic = counting.state_distribution(p, t, self._route(Route.AUTO), self.settings).probs
                frames.append(montecarlo.compare_to_analytic(hist, analytic))
        return pd.concat(frames, ignore_index=True)

    # --- 4. Output ---
    def header_lines(self) -> List[str]:
        lines = [f"schema={self.schema}", f"version={__version__}"]
        lines.extend(f"{key}={value}" for key, value in self.config.echo())
        return lines

    def write(self, df: pd.DataFrame, stream: IO[str]) -> None:
        """
        Write the table with its header block

        Args:
            df: Result table
            stream: Text stream
        """
        if self.config.fmt == "json":
            payload: Dict = {
                "schema": self.schema,
                "version": __version__,
                "config": dict(self.config.echo()),
                "rows": convert_numpy_types(df.replace({np.nan: None}).to_dict(orient="records")),
            }
            stream.write(json.dumps(payload, indent=2))
            stream.write("\n")
            return
        for line in self.header_lines():
            stream.write(f"# {line}\n")
        if self.config.fmt == "matrix":
            matrix = df.pivot(index="i", columns="j", values="prob").sort_index().sort_index(axis=1)
            graphwalk.write_matrix_csv(matrix.to_numpy(), stream)
            return
        buffer = io.StringIO()
        df.to_csv(buffer, index=False, float_format="%.17g", lineterminator="\n")
        stream.write(buffer.getvalue())


def read_csv_report(source) -> pd.DataFrame:
    """Parse a CSV report back, skipping the header block"""
    return pd.read_csv(source, comment="#")
