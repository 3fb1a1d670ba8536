"""Bundled reference inputs: default chip, benchmark unitaries, molecules and graphs."""

from __future__ import annotations

import json
from importlib import resources

import numpy as np

GRAPH_NAMES = ("A1", "A2", "A3", "A4")
MOLECULE_NAMES = ("ethylene", "phenylvinylacetylene")


def read(name: str) -> dict:
    return json.loads((resources.files(__name__) / name).read_text(encoding="utf-8"))


def unitary(name: str) -> np.ndarray:
    """Bundled 4x4 benchmark unitary ``"U1"``, ``"U2"`` or ``"U3"``, rounded to four decimals and not re-unitarised."""
    return np.array([[complex(re, im) for re, im in row] for row in read("haar_unitaries.json")[name]])


def graph(name: str):
    from ..applications import GraphInput

    return GraphInput.from_dict(read(f"graph_{name}.json"))


def molecule(name: str):
    from ..applications import VibronicInput

    return VibronicInput.from_dict(read(f"{name}.json"))


def permutations() -> dict[str, list[int]]:
    return read("permutations.json")
