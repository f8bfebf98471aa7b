"""Static aeroelastic coupling of a straight cantilever wing.

Three single-discipline pieces are iterated to a fixed point:

* aerodynamics: strip theory, ``l = q c a (alpha_root + twist_geo + twist)``
  and a pitching moment ``m = e l`` about the elastic axis;
* structure: Euler-Bernoulli bending and St-Venant torsion of a
  cantilever, both by repeated trapezoid integration;
* mesh: piecewise-linear transfer between the (deliberately different)
  aerodynamic and structural station grids, plus under-relaxation of the
  twist update.

The coupling step is split into :func:`aero_stage`, :func:`structure_stage`
and :func:`mesh_stage` so that a workflow running the three stages as
separate components performs exactly the same floating-point operations
as :func:`coupling_step`.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from importlib import resources
from typing import Mapping

import numpy as np

from .errors import AeroelasticError

# ISA constants
R_AIR = 287.05
GAMMA_AIR = 1.4
G0 = 9.80665
T_SEA_LEVEL = 288.15
RHO_SEA_LEVEL = 1.225
LAPSE_RATE = 0.0065
TROPOPAUSE_M = 11000.0
T_TROPOPAUSE = 216.65
TROPOSPHERE_DENSITY_EXPONENT = 4.2561
MAX_ALTITUDE_M = 20000.0


@dataclass(frozen=True)
class AtmosphereState:
    T: float
    rho: float
    a: float


def isa_atmosphere(z: float) -> AtmosphereState:
    """Temperature (K), density (kg/m^3) and speed of sound (m/s) at altitude ``z`` metres."""
    if not (0.0 <= z <= MAX_ALTITUDE_M):
        raise AeroelasticError(f"altitude {z!r} m outside [0, {MAX_ALTITUDE_M:g}]")
    if z <= TROPOPAUSE_M:
        T = T_SEA_LEVEL - LAPSE_RATE * z
        rho = RHO_SEA_LEVEL * (T / T_SEA_LEVEL) ** TROPOSPHERE_DENSITY_EXPONENT
    else:
        T = T_TROPOPAUSE
        rho_11 = RHO_SEA_LEVEL * (T_TROPOPAUSE / T_SEA_LEVEL) ** TROPOSPHERE_DENSITY_EXPONENT
        rho = rho_11 * math.exp(-G0 * (z - TROPOPAUSE_M) / (R_AIR * T))
    return AtmosphereState(T=T, rho=rho, a=math.sqrt(GAMMA_AIR * R_AIR * T))


@dataclass(frozen=True)
class FlightCase:
    """A flight condition trimmed either to a lift coefficient or to a load factor."""

    label: str
    mach: float
    altitude_m: float
    cl: float | None = None
    nz: float | None = None

    def __post_init__(self):
        if (self.cl is None) == (self.nz is None):
            raise AeroelasticError(f"case {self.label!r}: give exactly one of cl or nz")

    def to_dict(self) -> dict:
        d = {"label": self.label, "mach": self.mach, "altitude_m": self.altitude_m}
        if self.cl is not None:
            d["cl"] = self.cl
        else:
            d["nz"] = self.nz
        return d

    @classmethod
    def from_dict(cls, raw: Mapping) -> "FlightCase":
        try:
            return cls(
                label=str(raw["label"]),
                mach=float(raw["mach"]),
                altitude_m=float(raw["altitude_m"]),
                cl=None if raw.get("cl") is None else float(raw["cl"]),
                nz=None if raw.get("nz") is None else float(raw["nz"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise AeroelasticError(f"malformed flight case {raw!r}") from exc


#: The three static aero-structure test cases.
STATIC_CASES = {
    "cruise": FlightCase("cruise", mach=0.8, altitude_m=11277.0, cl=0.45),
    "pullup": FlightCase("pullup", mach=0.6, altitude_m=4500.0, nz=2.5),
    "pushdown": FlightCase("pushdown", mach=0.6, altitude_m=4500.0, nz=-1.0),
}


def _sample(prop, y: np.ndarray, L: float) -> np.ndarray:
    """Evaluate a constant or uniformly tabulated spanwise property on ``y``."""
    if np.ndim(prop) == 0:
        out = np.full(y.shape, float(prop))
    else:
        values = np.asarray(prop, dtype=float)
        out = np.interp(y, np.linspace(0.0, L, values.size), values)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class WingModel:
    """Cantilever half wing; spanwise properties are constants or uniform tables root to tip.

    Defaults describe a synthetic medium-size transport wing used by the
    demo; they are configuration, not measured data.
    """

    half_span: float = 15.0
    stations_aero: int = 40
    stations_struct: int = 60
    chord: object = 3.0
    lift_slope: float = 2.0 * math.pi
    ea_offset: object = 0.25
    EI: object = 1.0e8
    GJ: object = 8.0e6
    geometric_twist: object = 0.0
    S_ref: float = 90.0
    weight: float = 5.0e5

    def __post_init__(self):
        if not (self.half_span > 0):
            raise AeroelasticError("half_span must be positive")
        for name in ("stations_aero", "stations_struct"):
            n = getattr(self, name)
            if isinstance(n, bool) or not isinstance(n, int) or n < 3:
                raise AeroelasticError(f"{name} must be an integer >= 3")
        for name in ("chord", "EI", "GJ", "ea_offset", "geometric_twist"):
            prop = getattr(self, name)
            if np.ndim(prop) != 0:
                if np.size(prop) < 2:
                    raise AeroelasticError(f"tabulated {name} needs at least two values")
                object.__setattr__(self, name, tuple(float(v) for v in prop))
        for name in ("chord", "EI", "GJ"):
            if np.any(np.asarray(getattr(self, name), dtype=float) <= 0):
                raise AeroelasticError(f"{name} must be positive everywhere")
        if not (self.S_ref > 0):
            raise AeroelasticError("S_ref must be positive")

    @cached_property
    def y_aero(self) -> np.ndarray:
        y = np.linspace(0.0, self.half_span, self.stations_aero)
        y.setflags(write=False)
        return y

    @cached_property
    def y_struct(self) -> np.ndarray:
        y = np.linspace(0.0, self.half_span, self.stations_struct)
        y.setflags(write=False)
        return y

    @cached_property
    def chord_aero(self) -> np.ndarray:
        return _sample(self.chord, self.y_aero, self.half_span)

    @cached_property
    def offset_aero(self) -> np.ndarray:
        return _sample(self.ea_offset, self.y_aero, self.half_span)

    @cached_property
    def twist_geo_aero(self) -> np.ndarray:
        return _sample(self.geometric_twist, self.y_aero, self.half_span)

    @cached_property
    def EI_struct(self) -> np.ndarray:
        return _sample(self.EI, self.y_struct, self.half_span)

    @cached_property
    def GJ_struct(self) -> np.ndarray:
        return _sample(self.GJ, self.y_struct, self.half_span)

    def scaled(self, **factors) -> "WingModel":
        """Copy with named properties multiplied, e.g. ``scaled(GJ=2)``."""
        changes = {}
        for name, f in factors.items():
            prop = getattr(self, name)
            changes[name] = prop * f if np.ndim(prop) == 0 else tuple(v * f for v in prop)
        return dataclasses.replace(self, **changes)

    def to_dict(self) -> dict:
        out = {}
        for f in dataclasses.fields(self):
            v = getattr(self, f.name)
            out[f.name] = list(v) if isinstance(v, tuple) else v
        return out

    @classmethod
    def from_dict(cls, raw: Mapping | None) -> "WingModel":
        raw = dict(raw or {})
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(raw) - known
        if unknown:
            raise AeroelasticError(f"unknown wing fields {sorted(unknown)}")
        return cls(**raw)


def load_config(text: str):
    """Parse a ``{"wing": {...}, "cases": [...]}`` document into (wing, {label: case})."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise AeroelasticError(f"config: syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    wing = WingModel.from_dict(doc.get("wing"))
    cases = {}
    for raw in doc.get("cases", []):
        case = FlightCase.from_dict(raw)
        cases[case.label] = case
    return wing, cases


def load_demo_config():
    text = resources.files("gridvpe.data").joinpath("demo_wing.json").read_text()
    return load_config(text)


@dataclass(frozen=True)
class FlightCondition:
    V: float
    q: float
    cl_target: float


def flight_condition(case: FlightCase, wing: WingModel) -> FlightCondition:
    """Airspeed, dynamic pressure and the lift coefficient the trim must deliver."""
    if not (0.0 < case.mach < 1.0):
        raise AeroelasticError(f"case {case.label!r}: Mach {case.mach} gives a degenerate or supersonic condition")
    atm = isa_atmosphere(case.altitude_m)
    V = case.mach * atm.a
    q = 0.5 * atm.rho * V * V
    if case.cl is not None:
        cl = case.cl
    else:
        cl = case.nz * wing.weight / (q * wing.S_ref)
    return FlightCondition(V=V, q=q, cl_target=cl)


def _check_len(arr, n: int, what: str) -> np.ndarray:
    arr = np.asarray(arr, dtype=float)
    if arr.shape != (n,):
        raise AeroelasticError(f"{what}: expected {n} values, got shape {arr.shape}")
    return arr


def cumulative_from_root(f: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Trapezoid integral of ``f`` from y[0] to each station."""
    out = np.zeros_like(f)
    out[1:] = np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(y))
    return out


def cumulative_from_tip(f: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Trapezoid integral of ``f`` from each station to y[-1]."""
    out = np.zeros_like(f)
    out[:-1] = np.cumsum((0.5 * (f[1:] + f[:-1]) * np.diff(y))[::-1])[::-1]
    return out


def aero_loads(wing: WingModel, twist, alpha_root: float, q: float):
    """Sectional lift (N/m) and nose-up moment about the elastic axis (N m/m)."""
    twist = _check_len(twist, wing.stations_aero, "aero twist")
    lift = q * wing.chord_aero * wing.lift_slope * (alpha_root + wing.twist_geo_aero + twist)
    return lift, wing.offset_aero * lift


def total_lift(wing: WingModel, lift) -> float:
    """Lift of both half wings."""
    lift = _check_len(lift, wing.stations_aero, "lift")
    return 2.0 * float(np.sum(0.5 * (lift[1:] + lift[:-1]) * np.diff(wing.y_aero)))


def trim_alpha(wing: WingModel, twist, q: float, cl_target: float) -> float:
    """Root incidence that makes total lift equal ``q S_ref cl_target``.

    Lift is affine in incidence, so two evaluations pin it down exactly.
    """
    L0 = total_lift(wing, aero_loads(wing, twist, 0.0, q)[0])
    L1 = total_lift(wing, aero_loads(wing, twist, 1.0, q)[0])
    slope = L1 - L0
    if slope == 0.0 or not math.isfinite(slope):
        raise AeroelasticError("degenerate lift slope: lift does not depend on incidence")
    return (q * wing.S_ref * cl_target - L0) / slope


def beam_bending(wing: WingModel, lift) -> np.ndarray:
    """Vertical deflection (m) of the cantilever under distributed load ``lift`` (N/m)."""
    lift = _check_len(lift, wing.stations_struct, "struct lift")
    y = wing.y_struct
    shear = cumulative_from_tip(lift, y)
    moment = cumulative_from_tip(shear, y)
    slope = cumulative_from_root(moment / wing.EI_struct, y)
    return cumulative_from_root(slope, y)


def beam_torsion(wing: WingModel, moment) -> np.ndarray:
    """Elastic twist (rad) with clamped root and free tip under distributed torque ``moment``."""
    moment = _check_len(moment, wing.stations_struct, "struct moment")
    y = wing.y_struct
    torque = cumulative_from_tip(moment, y)
    return cumulative_from_root(torque / wing.GJ_struct, y)


def map_fields(src_y, src_v, dst_y) -> np.ndarray:
    """Piecewise-linear transfer between station grids, clamped outside the source span."""
    src_y = np.asarray(src_y, dtype=float)
    src_v = np.asarray(src_v, dtype=float)
    dst_y = np.asarray(dst_y, dtype=float)
    if src_y.ndim != 1 or src_y.shape != src_v.shape or src_y.size == 0:
        raise AeroelasticError("map_fields: src_y and src_v must be 1-D of equal length")
    if np.any(np.diff(src_y) <= 0):
        raise AeroelasticError("map_fields: src_y must be strictly increasing")
    return np.interp(dst_y, src_y, src_v)


def divergence_q(wing: WingModel) -> float:
    """Torsional divergence dynamic pressure (Pa) of a uniform strip-theory cantilever."""
    for name in ("chord", "ea_offset", "GJ"):
        if np.ndim(getattr(wing, name)) != 0:
            raise AeroelasticError(f"divergence_q needs a constant {name}")
    e = float(wing.ea_offset)
    if e <= 0:
        raise AeroelasticError("no divergence: elastic axis is not aft of the aerodynamic centre (e <= 0)")
    if wing.lift_slope <= 0:
        raise AeroelasticError("no divergence: non-positive lift slope")
    k = math.pi / (2.0 * wing.half_span)
    return float(wing.GJ) * k * k / (float(wing.chord) * e * wing.lift_slope)


@dataclass(frozen=True)
class CouplingOptions:
    omega: float = 0.5
    tol: float = 1e-6
    max_iter: int = 50
    trim: bool = True
    cl_target: float | None = None
    alpha_root: float = 0.0

    def __post_init__(self):
        if not (0.0 < self.omega <= 1.0):
            raise AeroelasticError(f"relaxation omega must lie in (0, 1], got {self.omega}")
        if not (self.tol > 0):
            raise AeroelasticError(f"tolerance must be positive, got {self.tol}")
        if isinstance(self.max_iter, bool) or not isinstance(self.max_iter, int) or self.max_iter < 1:
            raise AeroelasticError(f"max_iter must be a positive integer, got {self.max_iter}")


@dataclass(frozen=True)
class CouplingState:
    twist: np.ndarray
    deflection: np.ndarray
    loads_l: np.ndarray
    moments_m: np.ndarray
    alpha_root: float
    residual_history: tuple = ()
    iteration: int = 0
    twist_aero: np.ndarray = field(default=None)

    @classmethod
    def initial(cls, wing: WingModel, alpha_root: float = 0.0) -> "CouplingState":
        return cls(
            twist=np.zeros(wing.stations_struct),
            deflection=np.zeros(wing.stations_struct),
            loads_l=np.zeros(wing.stations_aero),
            moments_m=np.zeros(wing.stations_aero),
            alpha_root=alpha_root,
            twist_aero=np.zeros(wing.stations_aero),
        )


def aero_stage(wing, q, twist_aero, *, trim: bool, cl_target=None, alpha_root: float = 0.0):
    """Trim (optionally) and evaluate loads; returns (alpha_root, lift, moment) on the aero grid."""
    if trim:
        if cl_target is None:
            raise AeroelasticError("trim requested without a target lift coefficient")
        alpha_root = trim_alpha(wing, twist_aero, q, cl_target)
    lift, moment = aero_loads(wing, twist_aero, alpha_root, q)
    return alpha_root, lift, moment


def structure_stage(wing, lift, moment):
    """Move aero loads onto the structural grid and solve; returns (deflection, twist)."""
    l_s = map_fields(wing.y_aero, lift, wing.y_struct)
    m_s = map_fields(wing.y_aero, moment, wing.y_struct)
    return beam_bending(wing, l_s), beam_torsion(wing, m_s)


def mesh_stage(wing, twist_prev, twist_new, omega: float):
    """Relax the twist update; returns (twist, twist on the aero grid, residual)."""
    twist_prev = _check_len(twist_prev, wing.stations_struct, "previous twist")
    twist = (1.0 - omega) * twist_prev + omega * twist_new
    residual = float(np.max(np.abs(twist - twist_prev)))
    return twist, map_fields(wing.y_struct, twist, wing.y_aero), residual


def coupling_step(state: CouplingState, wing: WingModel, q: float, opts: CouplingOptions) -> CouplingState:
    """One aero -> structure -> mesh pass of the partitioned fixed point."""
    twist_aero = state.twist_aero
    if twist_aero is None:
        twist_aero = map_fields(wing.y_struct, state.twist, wing.y_aero)
    alpha, lift, moment = aero_stage(
        wing, q, twist_aero, trim=opts.trim, cl_target=opts.cl_target, alpha_root=opts.alpha_root
    )
    deflection, twist_new = structure_stage(wing, lift, moment)
    twist, twist_aero, residual = mesh_stage(wing, state.twist, twist_new, opts.omega)
    return CouplingState(
        twist=twist,
        deflection=deflection,
        loads_l=lift,
        moments_m=moment,
        alpha_root=alpha,
        residual_history=state.residual_history + (residual,),
        iteration=state.iteration + 1,
        twist_aero=twist_aero,
    )


@dataclass(frozen=True)
class StaticSolution:
    status: str
    iterations: int
    state: CouplingState
    q: float
    history: tuple = ()  # (iter, residual, tip twist rad, tip deflection m)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def _diverging(history) -> bool:
    if not math.isfinite(history[-1]):
        return True
    if len(history) < 4:
        return False
    h = history[-4:]
    return h[0] < h[1] < h[2] < h[3] and h[3] > 1e3 * history[0]


def solve_static(
    case: FlightCase | None,
    wing: WingModel,
    opts: CouplingOptions | None = None,
    *,
    q: float | None = None,
) -> StaticSolution:
    """Iterate :func:`coupling_step` to convergence.

    The dynamic pressure comes from ``case`` unless ``q`` is given. In trim
    mode the lift coefficient target defaults to the case's. The run is
    declared diverged when ``max_iter`` is exhausted, or early when the
    residual has grown three times in a row and exceeds 1000 times the
    first residual.
    """
    opts = opts or CouplingOptions()
    if q is None:
        if case is None:
            raise AeroelasticError("solve_static needs a flight case or an explicit q")
        fc = flight_condition(case, wing)
        q = fc.q
        if opts.trim and opts.cl_target is None:
            opts = dataclasses.replace(opts, cl_target=fc.cl_target)
    if not (q > 0):
        raise AeroelasticError(f"dynamic pressure must be positive, got {q}")
    state = CouplingState.initial(wing, opts.alpha_root)
    rows = []
    status = "diverged"
    for _ in range(opts.max_iter):
        state = coupling_step(state, wing, q, opts)
        res = state.residual_history[-1]
        rows.append((state.iteration, res, float(state.twist[-1]), float(state.deflection[-1])))
        if res < opts.tol:
            status = "converged"
            break
        if _diverging(state.residual_history):
            break
    return StaticSolution(status, state.iteration, state, q, tuple(rows))


def convergence_csv(rows) -> str:
    """``iter,residual_rad,tip_twist_deg,tip_deflection_m`` with 9 significant digits."""
    lines = ["iter,residual_rad,tip_twist_deg,tip_deflection_m"]
    for it, res, twist, defl in rows:
        lines.append(f"{it},{res:.9g},{math.degrees(twist):.9g},{defl:.9g}")
    return "\n".join(lines) + "\n"
