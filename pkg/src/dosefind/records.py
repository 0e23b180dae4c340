"""Line-delimited record formats for ensembles and study outputs.

One JSON object per line, keys sorted, so outputs are streamable,
diff-friendly, and byte-identical across reruns with the same seed.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple

from dosefind.model import ToxScenario
from dosefind.scenarios import GenConfig, ScenarioRecord


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def scenario_line(rec: ScenarioRecord, config: GenConfig) -> str:
    return dumps(
        {
            "id": rec.id,
            "m": rec.scenario.m,
            "p": rec.scenario.p,
            "f": list(rec.scenario.f),
            "alpha_used": list(rec.alpha),
            "alpha_index": rec.alpha_index,
            "attempts": rec.attempts,
            "seed_info": {"seed": config.seed, "spawn_key": [rec.id]},
        }
    )


def write_scenarios(path: str | Path, records: Sequence[ScenarioRecord], config: GenConfig) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(scenario_line(rec, config) + "\n")


def read_scenarios(path: str | Path) -> List[ToxScenario]:
    scenarios = []
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            obj = json.loads(line)
            scenarios.append(
                ToxScenario(f=tuple(obj["f"]), p=obj["p"], label=f"gen[{obj['id']}]")
            )
    return scenarios


def write_lines(path: str | Path, lines: Iterable[str]) -> None:
    with open(path, "w") as fh:
        for line in lines:
            fh.write(line + "\n")
