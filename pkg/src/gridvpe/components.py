"""Builtin components the simulator can execute.

A builtin is ``fn(params, inputs) -> outputs`` where ``inputs`` and
``outputs`` are lists of payloads in the order the component declares its
artifacts. Payloads are floats (scalars), numpy arrays (real vectors) or
opaque values (anything else, e.g. the ``"zeros"`` initial marker).
"""

from __future__ import annotations

from functools import lru_cache
import json

import numpy as np

from . import aeroelastic as ae
from .errors import SimulationError

BUILTINS: dict = {}


class ComponentError(SimulationError):
    pass


def builtin(name: str):
    def register(fn):
        BUILTINS[name] = fn
        return fn

    return register


def _field(payload, n: int) -> np.ndarray:
    if isinstance(payload, str) and payload == "zeros":
        return np.zeros(n)
    arr = np.asarray(payload, dtype=float)
    if arr.ndim == 0:
        return np.full(n, float(arr))
    return arr


@builtin("noop")
def _noop(params, inputs):
    return [float(params.get("value", 0.0))] * int(params.get("n_outputs", 1))


@builtin("scale")
def _scale(params, inputs):
    """Multiply the first input by ``factor``; used for toy convergent loops."""
    factor = float(params.get("factor", 0.5))
    x = inputs[0]
    out = factor * np.asarray(x, dtype=float)
    return [float(out) if out.ndim == 0 else out] * int(params.get("n_outputs", 1))


@builtin("fail")
def _fail(params, inputs):
    raise ComponentError(params.get("message", "component failure"))


@lru_cache(maxsize=32)
def _wing(wing_json: str) -> ae.WingModel:
    return ae.WingModel.from_dict(json.loads(wing_json))


def wing_from_params(params) -> ae.WingModel:
    return _wing(json.dumps(params.get("wing") or {}, sort_keys=True))


def _case(params) -> ae.FlightCase:
    case = params.get("case", "cruise")
    if isinstance(case, dict):
        return ae.FlightCase.from_dict(case)
    try:
        return ae.STATIC_CASES[case]
    except KeyError:
        raise ComponentError(f"unknown flight case {case!r}") from None


def aero_settings(params):
    """(wing, q, trim, cl_target, alpha_root) for an aerodynamic component."""
    wing = wing_from_params(params)
    trim = bool(params.get("trim", True))
    if "q" in params:
        q = float(params["q"])
        cl = params.get("cl_target")
    else:
        fc = ae.flight_condition(_case(params), wing)
        q, cl = fc.q, params.get("cl_target", fc.cl_target)
    return wing, q, trim, cl, float(params.get("alpha_root", 0.0))


@builtin("aero-strip")
def _aero_strip(params, inputs):
    """inputs: [twist on aero grid]; outputs: [lift, moment, alpha_root]."""
    wing, q, trim, cl, alpha = aero_settings(params)
    twist_aero = _field(inputs[0], wing.stations_aero)
    alpha, lift, moment = ae.aero_stage(wing, q, twist_aero, trim=trim, cl_target=cl, alpha_root=alpha)
    return [lift, moment, float(alpha)]


@builtin("beam-csm")
def _beam_csm(params, inputs):
    """inputs: [lift, moment]; outputs: [deflection, unrelaxed twist] on the struct grid."""
    wing = wing_from_params(params)
    deflection, twist_new = ae.structure_stage(wing, inputs[0], inputs[1])
    return [deflection, twist_new]


@builtin("field-map")
def _field_map(params, inputs):
    """inputs: [unrelaxed twist, previous twist]; outputs: [twist, twist on aero grid, residual]."""
    wing = wing_from_params(params)
    prev = _field(inputs[1], wing.stations_struct)
    twist, twist_aero, residual = ae.mesh_stage(wing, prev, inputs[0], float(params.get("omega", 0.5)))
    return [twist, twist_aero, residual]
