"""Bundled reference data: eleven public accounts with their public counts.

Each record carries the friend and follower counts (rounded as listed)
and the listed zero-overlap follow probability.  There are no edges.
"""
from __future__ import annotations

import json
from importlib import resources
from pathlib import Path

from .graph import SocialGraph, VertexMeta

TARGETS_TABLE = "targets_table.json"


def targets_table_path() -> Path:
    return Path(str(resources.files("followback") / "data" / TARGETS_TABLE))


def _records() -> list[dict]:
    return json.loads(targets_table_path().read_text())["vertices"]


def targets_table() -> SocialGraph:
    """The eleven accounts as an edgeless graph, all marked as targets."""
    verts = {
        r["id"]: VertexMeta(r["friend_count"], r["follower_count"], True) for r in _records()
    }
    return SocialGraph(verts, [])


def listed_baselines() -> dict[str, float]:
    """Listed baseline follow probability per account, in table order."""
    return {r["id"]: r["baseline_probability"] for r in _records()}
