# services/lower_bound.py
"""
Packaged demonstration that n = 3t is not enough.

Two groups of correct nodes start from far-apart valid inputs v1 and v2;
cross-group traffic is held back until long after both have terminated,
and the Byzantine nodes run one honest replica per group. With n = 3t
each group reaches its quorum alone and outputs its own input; with
n = 3t + 1 the channel forces one view on everybody.
"""
import logging
import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from config import DEFAULT_SEED
from services.adversary import Mirror, PartitionUntil
from services.geometry import Point, distance
from services.monitors import MonitorSettings
from services.sim import SimConfig, SimResult, run
from services.validity import FiniteSetPredicate

logger = logging.getLogger(__name__)

RELEASE_TIME = 10_000
FINITE_SET_TOL = 1e-12


@dataclass
class LowerBoundReport:
    n: int
    t: int
    epsilon: float
    v1: Point
    v2: Point
    groups: Tuple[Tuple[int, ...], Tuple[int, ...]]
    byzantine: Tuple[int, ...]
    result: SimResult

    @property
    def clusters(self) -> List[List[int]]:
        """Correct nodes grouped by output, clustering at distance epsilon"""
        clusters: List[List[int]] = []
        for node in sorted(self.result.outputs):
            out = self.result.outputs[node]
            for cluster in clusters:
                if distance(self.result.outputs[cluster[0]], out) <= self.epsilon:
                    cluster.append(node)
                    break
            else:
                clusters.append([node])
        return clusters

    @property
    def separation(self) -> float:
        return self.result.max_pairwise_output

    @property
    def separated(self) -> bool:
        return self.separation > self.epsilon

    def lines(self) -> List[str]:
        lines = [
            f"lower-bound demo n={self.n} t={self.t} epsilon={self.epsilon}",
            f"groups G1={list(self.groups[0])} G2={list(self.groups[1])} byzantine={list(self.byzantine)}",
            f"v1={_fmt(self.v1)} v2={_fmt(self.v2)}",
        ]
        for k, cluster in enumerate(self.clusters):
            lines.append(f"cluster {k}: nodes {cluster} output {_fmt(self.result.outputs[cluster[0]])}")
        lines.append(f"separation {self.separation:.6g} ({'>' if self.separated else '<='} epsilon)")
        if self.result.violations:
            lines.extend(f"monitor {v.name} failed: {v.detail}" for v in self.result.violations)
        else:
            lines.append("all monitors pass")
        return lines


def _fmt(p: Point) -> str:
    return "(" + ", ".join(f"{c:.6f}" for c in p) + ")"


def sample_inputs(m: int, epsilon: float, seed: int) -> Tuple[Point, Point]:
    """v1 uniform in (0,1)^m and v2 uniform in (eps+1, eps+2)^m, so dist(v1, v2) > eps"""
    rng = np.random.default_rng(seed)
    v1 = tuple(float(x) for x in rng.uniform(0.0, 1.0, size=m))
    v2 = tuple(float(x) for x in rng.uniform(epsilon + 1.0, epsilon + 2.0, size=m))
    return v1, v2


def demo_layout(n: int, t: int) -> Tuple[Tuple[int, ...], Tuple[int, ...], Tuple[int, ...]]:
    """Group sizes ceil((n-t)/2) and floor((n-t)/2); the Byzantine ids come last"""
    correct = n - t
    g1 = tuple(range(math.ceil(correct / 2)))
    g2 = tuple(range(len(g1), correct))
    byzantine = tuple(range(correct, n))
    if not g2:
        # a single correct node has nobody to disagree with; let one Byzantine id play the second group
        g2 = byzantine[:1]
        byzantine = byzantine[1:]
    return g1, g2, byzantine


def build_demo_config(n: int = 3, t: int = 1, m: int = 2, epsilon: float = 0.5,
                      seed: int = DEFAULT_SEED, release_time: int = RELEASE_TIME) -> Tuple[SimConfig, Dict]:
    v1, v2 = sample_inputs(m, epsilon, seed)
    g1, g2, byzantine = demo_layout(n, t)
    inputs = [v1 if i in g1 else v2 for i in range(n)]
    strategy = Mirror((v1, v2), (g1, g2), byzantine)
    cfg = SimConfig(
        n=n,
        t=t,
        m=m,
        epsilon=epsilon,
        inputs=inputs,
        seed=seed,
        adversaries={b: strategy for b in byzantine},
        scheduler=PartitionUntil((g1, g2), release_time),
        predicate=FiniteSetPredicate((v1, v2), FINITE_SET_TOL),
        lower_bound_demo=n <= 3 * t,
        monitors=MonitorSettings(enforce=False),
        name=f"lower_bound_n{n}_t{t}",
    )
    return cfg, {"v1": v1, "v2": v2, "groups": (g1, g2), "byzantine": byzantine}


def run_demo(n: int = 3, t: int = 1, m: int = 2, epsilon: float = 0.5,
             seed: int = DEFAULT_SEED, release_time: Optional[int] = None) -> LowerBoundReport:
    cfg, layout = build_demo_config(n, t, m, epsilon, seed, release_time or RELEASE_TIME)
    result = run(cfg)
    report = LowerBoundReport(n, t, epsilon, layout["v1"], layout["v2"], layout["groups"],
                              layout["byzantine"], result)
    logger.info(f"lower-bound demo n={n} t={t}: separation {report.separation:.6g}")
    return report
