# services/report_service.py
"""
CSV metrics and sweep aggregation.
"""
import json
import logging
import os
from typing import Dict, Iterable, List, Optional

import pandas as pd

from config import METRICS_FILE, SWEEP_FILE
from services.monitors import max_pairwise
from services.sim import SimResult

logger = logging.getLogger(__name__)

METRICS_COLUMNS = ["round", "diameter_union", "max_pairwise_output", "nodes_terminated"]
SWEEP_COLUMNS = ["seed", "final_rounds_max", "max_pairwise_output", "all_monitors_pass"]
EPSILON_SWEEP_COLUMNS = ["epsilon", "seed", "final_rounds_max", "round_bound", "max_pairwise_output",
                         "all_monitors_pass"]
EPSILON_SWEEP_FILE = "sweep_epsilon.csv"


def metrics_frame(result: SimResult) -> pd.DataFrame:
    """One row per round; output columns count the nodes finished by that round"""
    rows = []
    for r in sorted(result.diameters):
        done = sorted(i for i, final in result.rounds.items() if final <= r and i in result.outputs)
        rows.append({
            "round": r,
            "diameter_union": result.diameters[r],
            "max_pairwise_output": max_pairwise([result.outputs[i] for i in done]),
            "nodes_terminated": len(done),
        })
    return pd.DataFrame(rows, columns=METRICS_COLUMNS)


def sweep_frame(results: Iterable[SimResult]) -> pd.DataFrame:
    rows = [{
        "seed": res.config.seed,
        "final_rounds_max": max(res.rounds.values()) if res.rounds else 0,
        "max_pairwise_output": res.max_pairwise_output,
        "all_monitors_pass": res.passed,
    } for res in results]
    return pd.DataFrame(rows, columns=SWEEP_COLUMNS)


def epsilon_sweep_frame(results: Iterable[SimResult], bounds: Dict[float, int]) -> pd.DataFrame:
    rows = [{
        "epsilon": res.config.epsilon,
        "seed": res.config.seed,
        "final_rounds_max": max(res.rounds.values()) if res.rounds else 0,
        "round_bound": bounds[res.config.epsilon],
        "max_pairwise_output": res.max_pairwise_output,
        "all_monitors_pass": res.passed,
    } for res in results]
    return pd.DataFrame(rows, columns=EPSILON_SWEEP_COLUMNS)


def diameter_curve(results: Iterable[SimResult]) -> pd.DataFrame:
    """Mean and max union diameter per round across runs"""
    records = [{"round": r, "diameter_union": d} for res in results for r, d in res.diameters.items()]
    if not records:
        return pd.DataFrame(columns=["round", "mean_diameter", "max_diameter", "runs"])
    df = pd.DataFrame(records)
    curve = df.groupby("round")["diameter_union"].agg(["mean", "max", "count"]).reset_index()
    return curve.rename(columns={"mean": "mean_diameter", "max": "max_diameter", "count": "runs"})


def round_histogram(results: Iterable[SimResult]) -> pd.Series:
    finals = [r for res in results for r in res.rounds.values()]
    return pd.Series(finals, dtype="int64").value_counts().sort_index()


def write_frame(df: pd.DataFrame, out_dir: str, filename: str) -> str:
    os.makedirs(out_dir, exist_ok=True)
    path = os.path.join(out_dir, filename)
    df.to_csv(path, index=False, lineterminator='\n')
    logger.info(f"Wrote {len(df)} rows to {path}")
    return path


def write_metrics(result: SimResult, out_dir: str) -> str:
    return write_frame(metrics_frame(result), out_dir, METRICS_FILE)


def write_sweep(df: pd.DataFrame, out_dir: str, filename: Optional[str] = None) -> str:
    return write_frame(df, out_dir, filename or SWEEP_FILE)


def format_summary(summary: Dict) -> List[str]:
    """Human-readable lines for the CLI report"""
    lines = [
        f"scenario {summary['name']} seed={summary['seed']} broadcast={summary['broadcast']}",
        f"terminated {summary['terminated']}/{summary['correct']} correct nodes after {summary['events']} events",
        f"final rounds {json.dumps(summary['rounds_histogram'], sort_keys=True)}",
        f"max pairwise output distance {summary['max_pairwise_output']:.6g}",
        f"link messages {summary['link_messages']} ({summary['link_bytes']} bytes)",
        f"trace digest {summary['trace_digest']}",
    ]
    if summary['violations']:
        lines.extend(f"VIOLATION {v}" for v in summary['violations'])
    else:
        lines.append("all monitors pass")
    return lines
