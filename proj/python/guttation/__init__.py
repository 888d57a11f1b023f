"""Python access to the guttation chip reader.

Structured results are returned as plain dicts decoded from the same JSON the
CLI and relay emit.
"""

import json
from os import PathLike
from typing import Optional, Sequence, Union

from . import _core
from ._core import CHEMICALS, GENERATOR_VERSION, GuttationError

__all__ = [
    "CHEMICALS",
    "GENERATOR_VERSION",
    "GuttationError",
    "analyze",
    "check_rule_table",
    "curve_point",
    "default_config",
    "default_rules",
    "generate_corpus",
    "interpret",
    "project",
    "quantify",
]

Rgb = Sequence[float]


def default_config() -> dict:
    return json.loads(_core.default_config_text())


def default_rules() -> dict:
    return json.loads(_core.default_rules_text())


def analyze(
    image: Union[str, PathLike, bytes],
    layout: Optional[str] = None,
    scales: Optional[str] = None,
    temperature: Optional[float] = None,
) -> dict:
    """Run the full pipeline on a file path or encoded image bytes.

    Returns {"reading", "report", "error"}; a failed analysis has a null
    reading and an error naming code and stage.
    """
    if isinstance(image, (bytes, bytearray)):
        text = _core.analyze_bytes(bytes(image), layout, scales, temperature)
    else:
        text = _core.analyze_file(image, layout, scales, temperature)
    return json.loads(text)


def quantify(chemical: str, reactant: Rgb, references: Optional[Sequence[Rgb]] = None) -> dict:
    return json.loads(_core.quantify(chemical, list(reactant), references))


def interpret(chemical: str, value: float, temperature: Optional[float] = None, species: str = "tomato") -> dict:
    return json.loads(_core.interpret(chemical, value, temperature, species))["interpretations"][0]


def project(references: Sequence[Rgb], reactant: Rgb):
    return _core.project(references, list(reactant))


def curve_point(references: Sequence[Rgb], t: float):
    return _core.curve_point(references, t)


def check_rule_table(rules: Optional[str] = None) -> list:
    return _core.check_rule_table(rules)


def generate_corpus(out_dir, count: int, seed: int = 0, noiseless: bool = False, spec: Optional[str] = None) -> dict:
    return json.loads(_core.generate_corpus(out_dir, count, seed, noiseless, spec))
