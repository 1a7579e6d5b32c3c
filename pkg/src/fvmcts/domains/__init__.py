"""Benchmark domains and their JSON parameter files.

A parameter file is a JSON object with a ``"name"`` key (``"sysadmin"`` or
``"drones"``); every other key maps onto a field of :class:`SysAdminParams`
or :class:`DroneParams`. Unknown keys are rejected.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path
from typing import Union

from .drones import DroneParams, MultiDroneDelivery, drone_cg, drone_initial_state, drone_step
from .sysadmin import SysAdmin, SysAdminParams, sysadmin_cg, sysadmin_step

__all__ = [
    "DroneParams", "MultiDroneDelivery", "SysAdmin", "SysAdminParams",
    "drone_cg", "drone_initial_state", "drone_step", "sysadmin_cg", "sysadmin_step",
    "make_domain", "load_domain", "domain_spec",
]

_DOMAINS = {
    "sysadmin": (SysAdminParams, SysAdmin),
    "drones": (DroneParams, MultiDroneDelivery),
}


def make_domain(spec: dict):
    spec = dict(spec)
    name = spec.pop("name", None)
    if name not in _DOMAINS:
        raise ValueError(f"unknown domain {name!r}; expected one of {sorted(_DOMAINS)}")
    params_cls, model_cls = _DOMAINS[name]
    fields = {f.name for f in dataclasses.fields(params_cls)}
    unknown = set(spec) - fields
    if unknown:
        raise ValueError(f"unknown {name} parameters: {sorted(unknown)}")
    return model_cls(params_cls(**spec))


def load_domain(source: Union[str, Path, dict]):
    """Build a model from a parameter dict or a JSON file path."""
    if isinstance(source, dict):
        return make_domain(source)
    with open(source) as fh:
        return make_domain(json.load(fh))


def domain_spec(model) -> dict:
    return {"name": model.name, **model.params.to_dict()}
