"""Experiment configuration: flat key=value text with section headers.

The config format is deliberately schema-free structured text::

    [domain]
    name = hopf2d
    preset = skew
    skew = 0.4

    [target]
    name = circle
    period = 1.0

    [initial]
    preset = perturbed-linear
    winding = 1 0
    amplitude = 0.02
    seed = 5
    # optional explicit modes: comp: k-vector : amplitude : phase ; ...
    modes = 0: 1 0 : 0.012 : 0.4 ; 0: 2 0 : 0.006 : 2.1

    [grid]
    extents = 64 64

    [flow]
    tol_converged = 1e-6
    max_steps = 200000

    [output]
    directory = runs/hopf
    checkpoint_every = 0

Unknown sections or keys are rejected (usage errors, exit code 64).
"""

from __future__ import annotations

import configparser
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .fields import MapField, linear_map, onto_geodesic_map, perturbed_linear_map, point_map
from .flow import FlowConfig
from .geometry import DOMAIN_NAMES, DomainStructure, build_domain
from .targets import TARGET_NAMES, TargetManifold, catalog_lookup

FlowSettings = FlowConfig

INITIAL_PRESETS = ("linear", "perturbed-linear", "point", "onto-geodesic")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    domain_name: str
    extents: tuple[int, ...]
    target_name: str
    domain_preset: str | None = None
    domain_params: dict = field(default_factory=dict)
    target_params: dict = field(default_factory=dict)
    initial_preset: str = "linear"
    winding: tuple[tuple[int, ...], ...] = ()
    amplitude: float = 0.01
    seed: int = 0
    base: tuple[float, ...] | None = None
    modes: dict | None = None
    flow: FlowConfig = field(default_factory=FlowConfig)
    output_dir: str = "out"
    checkpoint_every: int = 0
    scenario: str | None = None

    def __post_init__(self):
        if self.domain_name not in DOMAIN_NAMES:
            raise ConfigError(f"unknown domain {self.domain_name!r}")
        if self.target_name not in TARGET_NAMES:
            raise ConfigError(f"unknown target {self.target_name!r}")
        if self.initial_preset not in INITIAL_PRESETS:
            raise ConfigError(f"unknown initial preset {self.initial_preset!r}")
        for tol in (self.flow.tol_converged, self.flow.tol_plateau, self.flow.blowup_factor):
            if not tol > 0:
                raise ConfigError("tolerances must be positive")

    def build_domain_structure(self) -> DomainStructure:
        return build_domain(self.domain_name, self.extents, self.domain_preset,
                            self.domain_params)

    def build_target(self) -> TargetManifold:
        return catalog_lookup(self.target_name, self.target_params)

    def build_initial_map(self, domain: DomainStructure) -> MapField:
        target = self.build_target()
        d = domain.grid.ndim
        winding = np.zeros((target.dim, d), dtype=np.int64)
        if self.winding:
            w = np.asarray(self.winding, dtype=np.int64)
            if w.shape != (target.dim, d):
                raise ConfigError(
                    f"winding shape {w.shape} does not match target dim {target.dim} "
                    f"and domain dim {d}")
            winding = w
        if self.initial_preset == "linear":
            return linear_map(domain.grid, target, winding, base=self.base)
        if self.initial_preset == "perturbed-linear":
            return perturbed_linear_map(domain.grid, target, winding,
                                        amplitude=self.amplitude, seed=self.seed,
                                        base=self.base, modes=self.modes)
        if self.initial_preset == "point":
            if self.base is None:
                raise ConfigError("point initial data needs a base point")
            f = point_map(domain.grid, target, self.base)
            if self.modes is not None:
                f = perturbed_linear_map(domain.grid, target, winding,
                                         amplitude=self.amplitude, seed=self.seed,
                                         base=self.base, modes=self.modes)
            return f
        if self.initial_preset == "onto-geodesic":
            return onto_geodesic_map(domain.grid, target, winding[1])
        raise ConfigError(f"unknown initial preset {self.initial_preset!r}")

    def flow_config(self) -> FlowConfig:
        return self.flow

    def resolved_output_dir(self) -> str:
        root = os.environ.get("NONDIV_OUT_ROOT")
        if root and not os.path.isabs(self.output_dir):
            return os.path.join(root, self.output_dir)
        return self.output_dir


# ---------------------------------------------------------------------------
# ini parsing


_FLOW_FIELDS = {
    "tol_converged": float,
    "tol_plateau": float,
    "blowup_factor": float,
    "max_steps": int,
    "record_every": int,
    "window": int,
    "r2_threshold": float,
    "scheme": str,
    "dt_safety": float,
    "dt_override": float,
    "settle_time": float,
    "monotone_tol": float,
    "compute_measure": bool,
    "enforce_monotone": bool,
}


def _parse_scalar(text: str):
    text = text.strip()
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        pass
    if text.lower() in ("true", "false"):
        return text.lower() == "true"
    return text


def _parse_winding(text: str) -> tuple[tuple[int, ...], ...]:
    rows = [r.strip() for r in text.split(";") if r.strip()]
    return tuple(tuple(int(v) for v in row.split()) for row in rows)


def _parse_modes(text: str) -> dict:
    """``comp: k1 k2 : amplitude : phase ; ...`` per mode."""
    modes: dict[int, list] = {}
    for chunk in text.split(";"):
        chunk = chunk.strip()
        if not chunk:
            continue
        parts = [p.strip() for p in chunk.split(":")]
        if len(parts) != 4:
            raise ConfigError(f"bad mode spec {chunk!r} (want comp: k-vec : amp : phase)")
        comp = int(parts[0])
        kvec = tuple(int(v) for v in parts[1].split())
        modes.setdefault(comp, []).append((kvec, float(parts[2]), float(parts[3])))
    return modes


_KNOWN_SECTIONS = {"domain", "target", "initial", "grid", "flow", "output"}
_INITIAL_KEYS = {"preset", "winding", "amplitude", "seed", "base", "modes"}
_OUTPUT_KEYS = {"directory", "checkpoint_every"}


def parse_config_text(text: str, scenario: str | None = None) -> ExperimentConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from exc

    unknown = set(cp.sections()) - _KNOWN_SECTIONS
    if unknown:
        raise ConfigError(f"unknown config sections: {sorted(unknown)}")
    for required in ("domain", "target", "grid"):
        if required not in cp:
            raise ConfigError(f"missing [{required}] section")

    dom = dict(cp["domain"])
    if "name" not in dom:
        raise ConfigError("[domain] needs a name")
    domain_name = dom.pop("name")
    domain_preset = dom.pop("preset", None)
    domain_params = {k: _parse_scalar(v) for k, v in dom.items()}

    tgt = dict(cp["target"])
    if "name" not in tgt:
        raise ConfigError("[target] needs a name")
    target_name = tgt.pop("name")
    target_params = {}
    for k, v in tgt.items():
        if k == "periods":
            target_params[k] = tuple(float(x) for x in v.split())
        else:
            target_params[k] = _parse_scalar(v)

    grid_sec = dict(cp["grid"])
    if "extents" not in grid_sec:
        raise ConfigError("[grid] needs extents")
    extents = tuple(int(v) for v in grid_sec.pop("extents").split())
    if grid_sec:
        raise ConfigError(f"unknown [grid] keys: {sorted(grid_sec)}")

    init_kwargs: dict = {}
    if "initial" in cp:
        init = dict(cp["initial"])
        unknown = set(init) - _INITIAL_KEYS
        if unknown:
            raise ConfigError(f"unknown [initial] keys: {sorted(unknown)}")
        if "preset" in init:
            init_kwargs["initial_preset"] = init["preset"]
        if "winding" in init:
            init_kwargs["winding"] = _parse_winding(init["winding"])
        if "amplitude" in init:
            init_kwargs["amplitude"] = float(init["amplitude"])
        if "seed" in init:
            init_kwargs["seed"] = int(init["seed"])
        if "base" in init:
            init_kwargs["base"] = tuple(float(v) for v in init["base"].split())
        if "modes" in init:
            init_kwargs["modes"] = _parse_modes(init["modes"])

    flow_kwargs = {}
    if "flow" in cp:
        for k, v in cp["flow"].items():
            if k not in _FLOW_FIELDS:
                raise ConfigError(f"unknown [flow] key {k!r}")
            conv = _FLOW_FIELDS[k]
            if conv is bool:
                flow_kwargs[k] = v.strip().lower() == "true"
            else:
                flow_kwargs[k] = conv(v)

    out_kwargs = {}
    if "output" in cp:
        out = dict(cp["output"])
        unknown = set(out) - _OUTPUT_KEYS
        if unknown:
            raise ConfigError(f"unknown [output] keys: {sorted(unknown)}")
        if "directory" in out:
            out_kwargs["output_dir"] = out["directory"]
        if "checkpoint_every" in out:
            out_kwargs["checkpoint_every"] = int(out["checkpoint_every"])

    try:
        return ExperimentConfig(
            domain_name=domain_name, domain_preset=domain_preset,
            domain_params=domain_params, target_name=target_name,
            target_params=target_params, extents=extents,
            flow=FlowConfig(**flow_kwargs), scenario=scenario,
            **init_kwargs, **out_kwargs,
        )
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str) -> ExperimentConfig:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            return parse_config_text(fh.read())
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc}") from exc


def config_to_ini(cfg: ExperimentConfig) -> str:
    """Serialize a config back to the flat text format (round-trips)."""
    lines = ["[domain]", f"name = {cfg.domain_name}"]
    if cfg.domain_preset:
        lines.append(f"preset = {cfg.domain_preset}")
    for k, v in cfg.domain_params.items():
        lines.append(f"{k} = {v}")
    lines += ["", "[target]", f"name = {cfg.target_name}"]
    for k, v in cfg.target_params.items():
        if isinstance(v, (tuple, list)):
            lines.append(f"{k} = {' '.join(repr(float(x)) for x in v)}")
        else:
            lines.append(f"{k} = {v}")
    lines += ["", "[initial]", f"preset = {cfg.initial_preset}"]
    if cfg.winding:
        lines.append("winding = " + " ; ".join(" ".join(str(v) for v in row)
                                               for row in cfg.winding))
    lines.append(f"amplitude = {cfg.amplitude!r}")
    lines.append(f"seed = {cfg.seed}")
    if cfg.base is not None:
        lines.append("base = " + " ".join(repr(float(v)) for v in cfg.base))
    if cfg.modes:
        chunks = []
        for comp, comp_modes in sorted(cfg.modes.items()):
            for kvec, amp, phase in comp_modes:
                chunks.append(f"{comp}: {' '.join(str(k) for k in kvec)} : {amp!r} : {phase!r}")
        lines.append("modes = " + " ; ".join(chunks))
    lines += ["", "[grid]", "extents = " + " ".join(str(n) for n in cfg.extents)]
    lines += ["", "[flow]"]
    defaults = FlowConfig()
    for name in _FLOW_FIELDS:
        val = getattr(cfg.flow, name)
        if val != getattr(defaults, name) and val is not None:
            lines.append(f"{name} = {val!r}" if isinstance(val, float) else f"{name} = {val}")
    lines += ["", "[output]", f"directory = {cfg.output_dir}",
              f"checkpoint_every = {cfg.checkpoint_every}", ""]
    return "\n".join(lines)
