"""Hierarchical blockchain e-voting simulator and audit toolkit."""

from __future__ import annotations

import os
from pathlib import Path

from . import _hbvote
from ._hbvote import (
    Config,
    Error,
    ParseError,
    Simulation,
    audit,
    genesis_hash,
    mine_vote,
    sha256_hex,
    tamper,
)

__all__ = [
    "Config",
    "Error",
    "ParseError",
    "Simulation",
    "audit",
    "cli_path",
    "genesis_hash",
    "mine_vote",
    "run",
    "sha256_hex",
    "tamper",
]


def run(config: Config | str | os.PathLike, out: str | os.PathLike | None = None, faults: str = "") -> dict:
    """Simulates one election and returns its report; exports it when `out` is given."""
    if not isinstance(config, Config):
        config = Config.load(os.fspath(config))
    sim = Simulation(config, faults)
    report = sim.run()
    if out is not None:
        sim.export(Path(out))
    return report


def cli_path() -> Path:
    """Location of the bundled `hbvote` command-line tool."""
    return Path(_hbvote.__file__).with_name("bin") / "hbvote"
