"""Linear optical elements and circuit application.

Elements are expressed as linear maps on creation operators (the same real
coefficients the annihilation-operator convention would use; for complex
maps this fixes the conjugation convention).  Lossless elements are
isometries on their declared input modes; loss is modeled by dilation into a
fresh environment mode.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field

from .fock import (ConfigError, Mode, PureState, mode_str, substitute_modes)

POL_H = "x"
POL_V = "y"
POL_DIAG = ("xp", "yp")  # x', y' labels after the trigger-arm wave plate

ENV_PREFIX = "~"

LOSSLESS_ATOL = 1e-9


def env_mode_for(m: Mode) -> Mode:
    """Deterministic fresh environment label for loss on a physical mode."""
    return (f"{ENV_PREFIX}{m[0]}:{m[1]}", m[1])


def is_env_mode(m: Mode) -> bool:
    return m[0].startswith(ENV_PREFIX)


@dataclass(frozen=True)
class ModeTransform:
    """Linear map on creation operators, one column per input mode."""

    columns: dict[Mode, tuple[tuple[complex, Mode], ...]]
    lossless: bool = True

    def extended(self, modes: set[Mode]) -> "ModeTransform":
        """Add identity columns for occupied modes this element ignores."""
        extra = {m: ((1.0 + 0.0j, m),) for m in modes if m not in self.columns}
        if not extra:
            return self
        return ModeTransform({**self.columns, **extra}, lossless=self.lossless)

    def gram_deviation(self) -> float:
        """Max deviation of the column Gram matrix from the identity."""
        cols = list(self.columns.items())
        dev = 0.0
        for i, (_, ci) in enumerate(cols):
            di = dict((m, c) for c, m in ci)
            for j, (_, cj) in enumerate(cols):
                g = sum(di.get(m, 0.0).conjugate() * c for c, m in cj)
                target = 1.0 if i == j else 0.0
                dev = max(dev, abs(g - target))
        return dev


def validate_isometry(transform: ModeTransform,
                      atol: float = LOSSLESS_ATOL) -> tuple[bool, float]:
    dev = transform.gram_deviation()
    return dev <= atol, dev


@dataclass(frozen=True)
class BeamSplitterSpec:
    """Non-polarizing partial-reflecting beam splitter (intensity R + T = 1)."""

    R: float
    input: str
    reflected_out: str
    transmitted_out: str
    T: float | None = None
    phase: float = 0.0  # optional relative phase on the reflected port

    def __post_init__(self):
        t = 1.0 - self.R if self.T is None else self.T
        object.__setattr__(self, "T", t)
        if not (0.0 <= self.R <= 1.0):
            raise ConfigError(f"beam splitter R={self.R} outside [0, 1]")
        if abs(self.R + self.T - 1.0) > 1e-9:
            raise ConfigError(
                f"beam splitter R+T={self.R + self.T} != 1 (loss is modeled separately)")


def beam_splitter(spec: BeamSplitterSpec) -> ModeTransform:
    r = math.sqrt(spec.R) * cmath.exp(1j * spec.phase)
    t = math.sqrt(spec.T)
    columns = {}
    for pol in (POL_H, POL_V):
        columns[(spec.input, pol)] = (
            (r, (spec.reflected_out, pol)),
            (t + 0.0j, (spec.transmitted_out, pol)),
        )
    return ModeTransform(columns)


@dataclass(frozen=True)
class WavePlateSpec:
    """Half-wave plate at a given angle, with output polarization labels."""

    angle_deg: float
    target: str
    output_polarizations: tuple[str, str] = POL_DIAG

    def __post_init__(self):
        if not (-90.0 < self.angle_deg <= 90.0):
            raise ConfigError(f"wave plate angle {self.angle_deg} outside (-90, 90]")


def half_wave_plate(spec: WavePlateSpec) -> ModeTransform:
    """HWP convention: h -> cos2t h' + sin2t v', v -> sin2t h' - cos2t v'.

    At -22.5 deg this reproduces f_x -> (f_x' - f_y')/sqrt(2) and
    f_y -> -(f_x' + f_y')/sqrt(2); the sign on the second row is an
    unobservable convention choice.
    """
    c = math.cos(2.0 * math.radians(spec.angle_deg))
    s = math.sin(2.0 * math.radians(spec.angle_deg))
    p1, p2 = spec.output_polarizations
    tgt = spec.target
    columns = {
        (tgt, POL_H): ((c + 0.0j, (tgt, p1)), (s + 0.0j, (tgt, p2))),
        (tgt, POL_V): ((s + 0.0j, (tgt, p1)), (-c + 0.0j, (tgt, p2))),
    }
    return ModeTransform(columns)


def polarizing_beam_splitter(input_spatial: str,
                             pols: tuple[str, str] = (POL_H, POL_V)
                             ) -> ModeTransform:
    """Ideal PBS: routes each polarization to its own output arm.

    In the (spatial, polarization) mode algebra the two output arms are
    already distinct channels, so the map is the identity relabeling; it
    exists so circuits document where arms become separate detectors.
    """
    p1, p2 = pols
    columns = {
        (input_spatial, p1): ((1.0 + 0.0j, (input_spatial, p1)),),
        (input_spatial, p2): ((1.0 + 0.0j, (input_spatial, p2)),),
    }
    return ModeTransform(columns)


def loss_channel(m: Mode, eta: float) -> ModeTransform:
    """Loss as a beam splitter into a fresh environment mode (dilation)."""
    if not (0.0 <= eta <= 1.0):
        raise ConfigError(f"loss transmission {eta} outside [0, 1] for {mode_str(m)}")
    env = env_mode_for(m)
    columns = {m: ((math.sqrt(eta) + 0.0j, m),
                   (math.sqrt(1.0 - eta) + 0.0j, env))}
    return ModeTransform(columns)


def measurement_rotation(spatial: str, basis: str) -> ModeTransform:
    """Map H/V creation operators onto the detectors of a measurement basis.

    After the rotation the detector on (spatial, x) registers the first
    outcome of the basis (H, + or R) and (spatial, y) the second.
    """
    hx: Mode = (spatial, POL_H)
    vy: Mode = (spatial, POL_V)
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    if basis == "HV":
        columns = {hx: ((1.0 + 0.0j, hx),), vy: ((1.0 + 0.0j, vy),)}
    elif basis == "DA":
        columns = {hx: ((inv_sqrt2 + 0.0j, hx), (inv_sqrt2 + 0.0j, vy)),
                   vy: ((inv_sqrt2 + 0.0j, hx), (-inv_sqrt2 + 0.0j, vy))}
    elif basis == "RL":
        columns = {hx: ((inv_sqrt2 + 0.0j, hx), (inv_sqrt2 + 0.0j, vy)),
                   vy: ((-1j * inv_sqrt2, hx), (1j * inv_sqrt2, vy))}
    else:
        raise ConfigError(f"unknown measurement basis {basis!r}")
    return ModeTransform(columns)


BASIS_OUTCOMES = {"HV": ("H", "V"), "DA": ("+", "-"), "RL": ("R", "L")}


@dataclass(frozen=True)
class CircuitSpec:
    """Ordered pipeline of mode transforms (propagation order)."""

    transforms: tuple[ModeTransform, ...] = field(default_factory=tuple)

    def then(self, transform: ModeTransform) -> "CircuitSpec":
        return CircuitSpec(self.transforms + (transform,))


def apply_circuit(state: PureState, circuit: CircuitSpec) -> PureState:
    for transform in circuit.transforms:
        state = substitute_modes(state, transform.extended(state.occupied_modes()))
    return state


def heralding_circuit(R: float) -> CircuitSpec:
    """The heralded-source circuit: two partial BS, trigger-arm HWP, two PBS.

    Source arm a splits into output c and trigger e; arm b into output d and
    trigger f.  The HWP rotates f into the diagonal (x', y') labels before
    its PBS.  Trigger modes: e.x, e.y, f.xp, f.yp; output arms: c, d.
    """
    return CircuitSpec((
        beam_splitter(BeamSplitterSpec(R=R, input="a",
                                       reflected_out="c", transmitted_out="e")),
        beam_splitter(BeamSplitterSpec(R=R, input="b",
                                       reflected_out="d", transmitted_out="f")),
        half_wave_plate(WavePlateSpec(angle_deg=-22.5, target="f")),
        polarizing_beam_splitter("e"),
        polarizing_beam_splitter("f", pols=POL_DIAG),
    ))


TRIGGER_MODES: tuple[Mode, ...] = (("e", "x"), ("e", "y"),
                                   ("f", "xp"), ("f", "yp"))
OUTPUT_ARMS: tuple[str, str] = ("c", "d")
