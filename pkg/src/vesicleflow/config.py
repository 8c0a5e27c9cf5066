"""Run configuration: a small versioned YAML schema, shipped presets, and
dot-path overrides.

A configuration is a nested mapping with sections ``params``, ``grid``,
``time``, ``initial`` and optional ``newton``, ``output`` and
``converge``; the root carries ``schema: 1``.  Presets are ordinary
config files bundled with the package, so every named setup stays
inspectable and editable.
"""

import copy
from importlib import resources

import yaml

from . import fv, model, newton, timeloop
from .errors import ConfigError

__all__ = [
    "load_config",
    "load_preset",
    "list_presets",
    "apply_overrides",
    "normalize_config",
    "build_simulation",
]

SCHEMA_VERSION = 1

_TOP_KEYS = {"schema", "name", "description", "params", "grid", "time",
             "initial", "newton", "output", "converge"}
_PARAM_KEYS = {"alpha1", "alpha2", "beta1", "beta2", "D1", "D2",
               "lambda_n_max", "lambda_s_max", "V1", "V2"}
_NEWTON_DEFAULTS = {"tol": 1e-3, "max_iter": 50, "damping_exponent": 0.75,
                    "mode": "capped_increment"}
_OUTPUT_DEFAULTS = {"every": 100}


def _require_mapping(node, name):
    if not isinstance(node, dict):
        raise ConfigError(f"config section {name!r} must be a mapping")
    return node


def _require_number(section, key, where):
    if key not in section:
        raise ConfigError(f"missing key {where}.{key}")
    v = section[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{where}.{key} must be a number, got {v!r}")
    return float(v)


def _check_keys(section, allowed, where):
    unknown = set(section) - allowed
    if unknown:
        raise ConfigError(f"unknown key {where}.{sorted(unknown)[0]}")


def load_config(path):
    """Parse a YAML config file into a raw mapping."""
    with open(path, "r", encoding="utf-8") as fh:
        try:
            cfg = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if not isinstance(cfg, dict):
        raise ConfigError(f"config root in {path} must be a mapping")
    return cfg


def _preset_files():
    return resources.files("vesicleflow").joinpath("presets")


def list_presets():
    """Names and one-line descriptions of the bundled presets."""
    out = []
    for entry in sorted(_preset_files().iterdir(), key=lambda e: e.name):
        if entry.name.endswith(".yaml"):
            cfg = yaml.safe_load(entry.read_text(encoding="utf-8"))
            out.append((entry.name[:-5], cfg.get("description", "")))
    return out


def load_preset(name):
    entry = _preset_files().joinpath(f"{name}.yaml")
    try:
        text = entry.read_text(encoding="utf-8")
    except (FileNotFoundError, OSError) as exc:
        names = ", ".join(n for n, _ in list_presets())
        raise ConfigError(f"unknown preset {name!r}; available: {names}") from exc
    return yaml.safe_load(text)


def apply_overrides(cfg, overrides):
    """Apply ``section.key=value`` strings; values parse as YAML scalars."""
    cfg = copy.deepcopy(cfg)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.strip().split(".")
        if not all(keys):
            raise ConfigError(f"override {item!r} has an empty key component")
        try:
            value = yaml.safe_load(raw)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse override value {raw!r}: {exc}") from exc
        node = cfg
        for k in keys[:-1]:
            if k not in node:
                node[k] = {}
            node = node[k]
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into non-mapping {k!r}")
        node[keys[-1]] = value
    return cfg


def _normalize_potential(spec, where):
    if isinstance(spec, (int, float)) and not isinstance(spec, bool):
        return {"kind": "linear", "slope": float(spec)}
    spec = _require_mapping(spec, where)
    kind = spec.get("kind")
    if kind == "linear":
        _check_keys(spec, {"kind", "slope"}, where)
        return {"kind": "linear", "slope": _require_number(spec, "slope", where)}
    if kind == "tabulated":
        _check_keys(spec, {"kind", "face_slopes"}, where)
        slopes = spec.get("face_slopes")
        if not isinstance(slopes, list) or len(slopes) < 3:
            raise ConfigError(f"{where}.face_slopes must be a list of numbers")
        return {"kind": "tabulated", "face_slopes": [float(s) for s in slopes]}
    raise ConfigError(f"{where}.kind must be linear or tabulated, got {kind!r}")


def normalize_config(cfg):
    """Validate a raw mapping and fill defaults; returns the effective config.

    The result is plain data (suitable for echoing into summaries) and
    re-normalizes to itself, so a round trip through serialization gives
    back the same effective configuration.
    """
    cfg = _require_mapping(cfg, "config")
    _check_keys(cfg, _TOP_KEYS, "config")
    if cfg.get("schema") != SCHEMA_VERSION:
        raise ConfigError(
            f"config.schema must be {SCHEMA_VERSION}, got {cfg.get('schema')!r}")
    for req in ("params", "grid", "time", "initial"):
        if req not in cfg:
            raise ConfigError(f"missing config section {req!r}")

    p = _require_mapping(cfg["params"], "params")
    _check_keys(p, _PARAM_KEYS, "params")
    params = {k: _require_number(p, k, "params")
              for k in sorted(_PARAM_KEYS - {"V1", "V2"})}
    if "V1" not in p or "V2" not in p:
        raise ConfigError("params.V1 and params.V2 are required")
    params["V1"] = _normalize_potential(p["V1"], "params.V1")
    params["V2"] = _normalize_potential(p["V2"], "params.V2")

    g = _require_mapping(cfg["grid"], "grid")
    _check_keys(g, {"m"}, "grid")
    m = g.get("m")
    if not isinstance(m, int) or isinstance(m, bool) or m < 2:
        raise ConfigError(f"grid.m must be an integer >= 2, got {m!r}")

    t = _require_mapping(cfg["time"], "time")
    _check_keys(t, {"tau", "t_end", "allow_short_last_step"}, "time")
    time_sec = {
        "tau": _require_number(t, "tau", "time"),
        "t_end": _require_number(t, "t_end", "time"),
        "allow_short_last_step": bool(t.get("allow_short_last_step", False)),
    }

    ini = _require_mapping(cfg["initial"], "initial")
    kind = ini.get("kind")
    if kind == "uniform":
        _check_keys(ini, {"kind", "u1", "u2", "lambda_n", "lambda_s"}, "initial")
        initial = {
            "kind": "uniform",
            "u1": _require_number(ini, "u1", "initial"),
            "u2": _require_number(ini, "u2", "initial"),
        }
    elif kind == "piecewise":
        _check_keys(ini, {"kind", "blocks", "lambda_n", "lambda_s"}, "initial")
        blocks = ini.get("blocks")
        if not isinstance(blocks, list) or not blocks:
            raise ConfigError("initial.blocks must be a non-empty list")
        norm_blocks = []
        for i, b in enumerate(blocks):
            if not isinstance(b, list) or len(b) != 4:
                raise ConfigError(
                    f"initial.blocks[{i}] must be [x_lo, x_hi, u1, u2]")
            norm_blocks.append([float(v) for v in b])
        initial = {"kind": "piecewise", "blocks": norm_blocks}
    else:
        raise ConfigError(
            f"initial.kind must be uniform or piecewise, got {kind!r}")
    initial["lambda_n"] = _require_number(ini, "lambda_n", "initial")
    initial["lambda_s"] = _require_number(ini, "lambda_s", "initial")

    n = _require_mapping(cfg.get("newton", {}), "newton")
    _check_keys(n, set(_NEWTON_DEFAULTS), "newton")
    newton_sec = dict(_NEWTON_DEFAULTS)
    for k, v in n.items():
        if k == "mode":
            newton_sec[k] = str(v)
        elif k == "max_iter":
            if not isinstance(v, int) or isinstance(v, bool) or v < 1:
                raise ConfigError(f"newton.max_iter must be a positive integer")
            newton_sec[k] = v
        else:
            newton_sec[k] = _require_number(n, k, "newton")

    o = _require_mapping(cfg.get("output", {}), "output")
    _check_keys(o, set(_OUTPUT_DEFAULTS), "output")
    output_sec = dict(_OUTPUT_DEFAULTS)
    if "every" in o:
        if not isinstance(o["every"], int) or isinstance(o["every"], bool) or o["every"] < 1:
            raise ConfigError("output.every must be a positive integer")
        output_sec["every"] = o["every"]

    out = {
        "schema": SCHEMA_VERSION,
        "name": str(cfg.get("name", "")),
        "params": params,
        "grid": {"m": m},
        "time": time_sec,
        "initial": initial,
        "newton": newton_sec,
        "output": output_sec,
    }
    if cfg.get("description"):
        out["description"] = str(cfg["description"])
    if "converge" in cfg:
        out["converge"] = _normalize_converge(cfg["converge"])
    return out


def _normalize_converge(section):
    c = _require_mapping(section, "converge")
    mode = c.get("mode")
    if mode not in ("time", "space"):
        raise ConfigError(f"converge.mode must be time or space, got {mode!r}")
    levels = c.get("levels")
    if not isinstance(levels, int) or isinstance(levels, bool) or levels < 2:
        raise ConfigError("converge.levels must be an integer >= 2")
    if mode == "time":
        _check_keys(c, {"mode", "levels", "base_tau", "ref_tau"}, "converge")
        out = {"mode": "time", "levels": levels,
               "base_tau": _require_number(c, "base_tau", "converge"),
               "ref_tau": _require_number(c, "ref_tau", "converge")}
        if out["ref_tau"] >= out["base_tau"] * 2.0 ** (-levels):
            raise ConfigError("converge.ref_tau must be finer than the finest level")
    else:
        _check_keys(c, {"mode", "levels", "base_h", "ref_h"}, "converge")
        out = {"mode": "space", "levels": levels,
               "base_h": _require_number(c, "base_h", "converge"),
               "ref_h": _require_number(c, "ref_h", "converge")}
        if out["ref_h"] >= out["base_h"] * 2.0 ** (-levels):
            raise ConfigError("converge.ref_h must be finer than the finest level")
    return out


def _build_potential(spec):
    if spec["kind"] == "linear":
        return model.Potential.linear(spec["slope"])
    return model.Potential.tabulated(spec["face_slopes"])


def build_simulation(cfg):
    """Effective config mapping -> SimulationConfig ready to run."""
    cfg = normalize_config(cfg)
    p = cfg["params"]
    try:
        params = model.ModelParameters(
            alpha1=p["alpha1"], alpha2=p["alpha2"],
            beta1=p["beta1"], beta2=p["beta2"],
            D1=p["D1"], D2=p["D2"],
            lambda_n_max=p["lambda_n_max"], lambda_s_max=p["lambda_s_max"],
            V1=_build_potential(p["V1"]), V2=_build_potential(p["V2"]),
        )
    except ValueError as exc:
        raise ConfigError(f"invalid params: {exc}") from exc
    ini = cfg["initial"]
    if ini["kind"] == "uniform":
        initial = timeloop.InitialCondition(
            "uniform", u1=ini["u1"], u2=ini["u2"],
            lambda_n=ini["lambda_n"], lambda_s=ini["lambda_s"])
    else:
        initial = timeloop.InitialCondition(
            "piecewise", blocks=[tuple(b) for b in ini["blocks"]],
            lambda_n=ini["lambda_n"], lambda_s=ini["lambda_s"])
    nw = cfg["newton"]
    try:
        ncfg = newton.NewtonConfig(
            tol=nw["tol"], max_iter=nw["max_iter"],
            damping_exponent=nw["damping_exponent"], mode=nw["mode"])
    except ValueError as exc:
        raise ConfigError(f"invalid newton section: {exc}") from exc
    return timeloop.SimulationConfig(
        params=params,
        grid=fv.Grid(cfg["grid"]["m"]),
        tau=cfg["time"]["tau"],
        t_end=cfg["time"]["t_end"],
        initial=initial,
        newton=ncfg,
        output_every=cfg["output"]["every"],
        allow_short_last_step=cfg["time"]["allow_short_last_step"],
        name=cfg["name"],
    )
