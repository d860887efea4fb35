"""
Configuration loading.

A run is configured from one flat JSON file whose keys are ScenarioConfig and
AgentConfig field names, plus environment defaults read from .env.
Precedence: CLI flags > environment > JSON > dataclass defaults.
"""

import json
import os
import re
from typing import Any, Dict, List, Optional, Tuple

from dotenv import load_dotenv

from agents.sac import AgentConfig
from core.errors import ConfigurationError, UsageError
from core.scenario import ScenarioConfig

load_dotenv()

DEFAULT_CONFIG = os.getenv("STAR_MEC_CONFIG")
DEFAULT_OUT = os.getenv("STAR_MEC_OUT", "output")
DEFAULT_SEEDS = os.getenv("STAR_MEC_SEEDS", "2020-2024")
TOTAL_STEPS_OVERRIDE = os.getenv("STAR_MEC_TOTAL_STEPS")
QUIET = os.getenv("STAR_MEC_QUIET", "").lower() in ("1", "true", "yes")

SEED_RANGE = re.compile(r"^(\d+)\s*-\s*(\d+)$")
SWEEPABLE = ("N", "N_bar", "K", "Q", "b", "z", "p_max")


def split_config(data: Dict[str, Any]) -> Tuple[Dict[str, Any], Dict[str, Any]]:
    """
    Split a flat mapping into scenario keys and agent keys.

    Raises:
        ConfigurationError: naming the first key neither dataclass declares
    """
    scenario_keys = set(ScenarioConfig.field_names())
    agent_keys = set(AgentConfig.field_names())
    scenario, agent = {}, {}
    for key, value in data.items():
        if key in scenario_keys:
            scenario[key] = value
        elif key in agent_keys:
            agent[key] = value
        else:
            raise ConfigurationError(key, "unknown configuration key")
    return scenario, agent


def load_config(path: Optional[str] = None) -> Tuple[ScenarioConfig, AgentConfig]:
    """
    Load scenario and agent configs from a flat JSON file.

    Args:
        path: JSON file; falls back to STAR_MEC_CONFIG, then to pure defaults

    Returns:
        (ScenarioConfig, AgentConfig), both validated

    Raises:
        ConfigurationError: for unreadable files, unknown keys or bad values
    """
    path = path or DEFAULT_CONFIG
    data: Dict[str, Any] = {}
    if path:
        try:
            with open(path, "r", encoding="utf-8") as f:
                data = json.load(f)
        except FileNotFoundError:
            raise ConfigurationError("config", f"file not found: {path}")
        except json.JSONDecodeError as e:
            raise ConfigurationError("config", f"invalid JSON in {path}: {e}")
        if not isinstance(data, dict):
            raise ConfigurationError("config", "top level must be a JSON object")
    scenario, agent = split_config(data)
    if TOTAL_STEPS_OVERRIDE:
        agent["total_env_steps"] = int(TOTAL_STEPS_OVERRIDE)
    return ScenarioConfig.from_dict(scenario), AgentConfig.from_dict(agent)


def parse_seeds(text: str) -> List[int]:
    """
    Parse "2020-2024", "1,2,7" or a mix such as "1,5-7".

    Raises:
        UsageError: on malformed input
    """
    seeds: List[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        span = SEED_RANGE.match(part)
        if span:
            seeds.extend(range(int(span.group(1)), int(span.group(2)) + 1))
        elif part.lstrip("-").isdigit():
            seeds.append(int(part))
        else:
            raise UsageError(f"cannot parse seed list '{text}'")
    if not seeds:
        raise UsageError("seed list is empty")
    return seeds


def parse_sweep(text: Optional[str]) -> Tuple[Optional[str], List[Any]]:
    """
    Parse "N=16,32,64" into ("N", [16, 32, 64]).

    Raises:
        UsageError: on malformed input or a key that cannot be swept
    """
    if not text:
        return None, [None]
    if "=" not in text:
        raise UsageError(f"sweep must look like KEY=v1,v2: '{text}'")
    key, values = text.split("=", 1)
    key = key.strip()
    if key not in SWEEPABLE:
        raise UsageError(f"cannot sweep '{key}', choose from {', '.join(SWEEPABLE)}")
    try:
        parsed = [float(v) if key in ("z", "p_max") else int(v) for v in values.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"bad sweep values '{values}'")
    if not parsed:
        raise UsageError("sweep has no values")
    return key, parsed
