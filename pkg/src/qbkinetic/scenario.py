"""Scenario files: parsing, validation, hashing and re-emission.

Scenarios are INI files (``configparser``) with the sections below, or JSON
objects with the same nesting.  Every key is checked; unknown sections or
keys are rejected with the offending ``section.key`` in the message.

    [params]    m g n_c lambda1 lambda2 kappa3 kappa1 kappa2 gamma_cap
    [grid]      u_max panels nodes_per_panel ratio refine
    [initial]   kind (gaussian|bose_einstein|shell|file) and its fields
    [controls]  h_max safety t_end record_every conservation_fix n_star
    [feasible]  c0 c1 n_star c_nstar          (optional)
    [audits]    enabled relaxation probes probe_pairs tol_entropy
    [output]    dir snapshots
    [run]       seed name
"""

from __future__ import annotations

import configparser
import copy
import hashlib
import io
import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .grid import DistributionState, FeasibleSetSpec, RadialGrid, bose_einstein, from_profile, make_grid
from .integrator import StepControls
from .physics import DomainError, PhysicalParams


class ConfigError(ValueError):
    """Invalid scenario; the message names the offending field."""


def _bool(s):
    if isinstance(s, bool):
        return s
    v = str(s).strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _opt_float(s):
    if s is None or (isinstance(s, str) and s.strip().lower() in ("", "none")):
        return None
    return float(s)


# section -> key -> (converter, default); a default of REQUIRED must be given
REQUIRED = object()
SCHEMA = {
    "params": {
        "m": (float, 1.0),
        "g": (float, 1.0),
        "n_c": (float, 0.5),
        "lambda1": (_opt_float, None),
        "lambda2": (_opt_float, None),
        "kappa3": (float, 1.0),
        "kappa1": (_opt_float, None),
        "kappa2": (_opt_float, None),
        "gamma_cap": (_opt_float, None),
    },
    "grid": {
        "u_max": (float, 6.0),
        "panels": (int, 8),
        "nodes_per_panel": (int, 8),
        "ratio": (float, 1.0),
        "refine": (int, 1),
    },
    "initial": {
        "kind": (str, REQUIRED),
        "amplitude": (float, None),
        "center": (float, None),
        "width": (float, None),
        "c": (float, None),
        "a": (float, None),
        "b": (float, None),
        "height": (float, None),
        "path": (str, None),
    },
    "controls": {
        "h_max": (float, 0.05),
        "safety": (float, 0.5),
        "t_end": (float, 1.0),
        "record_every": (float, 0.05),
        "conservation_fix": (_bool, False),
        "n_star": (float, 7.0),
    },
    "feasible": {
        "c0": (float, REQUIRED),
        "c1": (float, REQUIRED),
        "n_star": (float, 7.0),
        "c_nstar": (float, math.inf),
    },
    "audits": {
        "enabled": (_bool, True),
        "relaxation": (_bool, True),
        "probes": (_bool, False),
        "probe_pairs": (int, 20),
        "tol_entropy": (_opt_float, None),
    },
    "output": {
        "dir": (str, "out"),
        "snapshots": (_bool, True),
    },
    "run": {
        "seed": (int, 0),
        "name": (str, "scenario"),
    },
}
OPTIONAL_SECTIONS = {"feasible"}
INITIAL_FIELDS = {
    "gaussian": ("amplitude", "center", "width"),
    "bose_einstein": ("c",),
    "shell": ("a", "b", "height"),
    "file": ("path",),
}


def _normalise(raw: dict) -> dict:
    """Check keys, convert values and fill defaults."""
    out = {}
    for sec in raw:
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]")
    for sec, keys in SCHEMA.items():
        given = raw.get(sec)
        if given is None:
            if sec in OPTIONAL_SECTIONS:
                continue
            if any(d is REQUIRED for _, d in keys.values()):
                raise ConfigError(f"missing section [{sec}]")
            given = {}
        if not isinstance(given, dict):
            raise ConfigError(f"section [{sec}] must be a table")
        for k in given:
            if k not in keys:
                raise ConfigError(f"unknown key {sec}.{k}")
        sec_out = {}
        for k, (conv, default) in keys.items():
            if k in given and given[k] is not None:
                try:
                    sec_out[k] = conv(given[k])
                except (TypeError, ValueError) as exc:
                    raise ConfigError(f"{sec}.{k}: {exc}") from None
            elif default is REQUIRED:
                raise ConfigError(f"missing key {sec}.{k}")
            else:
                sec_out[k] = default
        out[sec] = sec_out
    init = out["initial"]
    kind = init["kind"]
    if kind not in INITIAL_FIELDS:
        raise ConfigError(f"initial.kind must be one of {sorted(INITIAL_FIELDS)}, got {kind!r}")
    for k in INITIAL_FIELDS[kind]:
        if init[k] is None:
            raise ConfigError(f"missing key initial.{k} for kind {kind}")
    for k in ("amplitude", "center", "width", "c", "a", "b", "height", "path"):
        if k not in INITIAL_FIELDS[kind] and init[k] is not None:
            raise ConfigError(f"initial.{k} is not used by kind {kind}")
    # drop unused initial fields so the canonical form (and hash) is minimal
    out["initial"] = {"kind": kind, **{k: init[k] for k in INITIAL_FIELDS[kind]}}
    return out


def _canonical(mapping: dict) -> dict:
    """JSON-safe copy (inf becomes the string "inf")."""
    def fix(v):
        if isinstance(v, float) and not math.isfinite(v):
            return repr(v)
        return v
    return {s: {k: fix(v) for k, v in sec.items()} for s, sec in mapping.items()}


@dataclass(frozen=True)
class Scenario:
    """A fully validated run configuration."""

    config: dict

    # -- construction

    @classmethod
    def from_mapping(cls, raw: dict) -> "Scenario":
        raw = copy.deepcopy(raw)
        if "feasible" in raw and isinstance(raw["feasible"], dict):
            for k in ("c_nstar",):
                if raw["feasible"].get(k) in ("inf", "Infinity"):
                    raw["feasible"][k] = math.inf
        cfg = _normalise(raw)
        scn = cls(cfg)
        # surface physics errors as config errors
        try:
            scn.params()
            scn.controls()
            scn.feasible()
            if cfg["grid"]["panels"] < 1 or cfg["grid"]["nodes_per_panel"] < 2 or cfg["grid"]["refine"] < 1:
                raise DomainError("grid.panels >= 1, grid.nodes_per_panel >= 2 and grid.refine >= 1 required")
            if not cfg["grid"]["u_max"] > 0:
                raise DomainError("grid.u_max must be > 0")
        except DomainError as exc:
            raise ConfigError(str(exc)) from None
        return scn

    @classmethod
    def from_file(cls, path) -> "Scenario":
        path = Path(path)
        text = path.read_text()
        if path.suffix.lower() == ".json" or text.lstrip().startswith("{"):
            raw = json.loads(text)
            # a run_meta.json carries the resolved config under "config"
            if "config" in raw and isinstance(raw["config"], dict):
                raw = raw["config"]
        else:
            cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
            cp.optionxform = str
            try:
                cp.read_string(text, source=str(path))
            except configparser.Error as exc:
                raise ConfigError(f"{path}: {exc}") from None
            raw = {s: dict(cp.items(s)) for s in cp.sections()}
        scn = cls.from_mapping(raw)
        init = scn.config["initial"]
        if init["kind"] == "file" and not Path(init["path"]).is_absolute():
            cfg = copy.deepcopy(scn.config)
            cfg["initial"]["path"] = str((path.parent / init["path"]).resolve())
            scn = cls(cfg)
        return scn

    def with_overrides(self, seed=None, refine=None, out_dir=None) -> "Scenario":
        cfg = copy.deepcopy(self.config)
        if seed is not None:
            cfg["run"]["seed"] = int(seed)
        if refine is not None:
            cfg["grid"]["refine"] = int(refine)
        if out_dir is not None:
            cfg["output"]["dir"] = str(out_dir)
        return Scenario.from_mapping(cfg)

    # -- views

    def to_mapping(self) -> dict:
        return _canonical(self.config)

    def to_ini(self) -> str:
        cp = configparser.ConfigParser(interpolation=None)
        cp.optionxform = str
        for sec, vals in self.to_mapping().items():
            cp[sec] = {k: ("none" if v is None else str(v).lower() if isinstance(v, bool) else repr(v) if isinstance(v, float) else str(v)) for k, v in vals.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    def hash(self) -> str:
        """sha256 of the canonical config, excluding the output directory."""
        m = self.to_mapping()
        m = {s: v for s, v in m.items() if s != "output"}
        blob = json.dumps(m, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def params(self) -> PhysicalParams:
        p = self.config["params"]
        return PhysicalParams(
            m=p["m"], g=p["g"], n_c=p["n_c"], lambda1=p["lambda1"], lambda2=p["lambda2"],
            kappa3=p["kappa3"], kappa1_override=p["kappa1"], kappa2_override=p["kappa2"],
            gamma_cap=p["gamma_cap"],
        )

    def grid(self) -> RadialGrid:
        g = self.config["grid"]
        return make_grid(g["u_max"], g["panels"], g["nodes_per_panel"], g["ratio"], g["refine"], self.params())

    def controls(self) -> StepControls:
        c = self.config["controls"]
        return StepControls(
            h_max=c["h_max"], safety=c["safety"], t_end=c["t_end"], record_every=c["record_every"],
            conservation_fix=c["conservation_fix"], n_star=c["n_star"],
        )

    def feasible(self) -> FeasibleSetSpec | None:
        f = self.config.get("feasible")
        if f is None:
            return None
        return FeasibleSetSpec(c0=f["c0"], c1=f["c1"], n_star=f["n_star"], c_nstar=f["c_nstar"])

    def initial_state(self, grid: RadialGrid | None = None) -> DistributionState:
        grid = grid or self.grid()
        init = self.config["initial"]
        params = self.params()
        kind = init["kind"]
        try:
            if kind == "gaussian":
                a, c, w = init["amplitude"], init["center"], init["width"]
                if a < 0 or w <= 0:
                    raise DomainError("gaussian needs amplitude >= 0 and width > 0")
                return from_profile(grid, lambda u: a * np.exp(-(((u - c) / w) ** 2)))
            if kind == "bose_einstein":
                return bose_einstein(init["c"], grid, params)
            if kind == "shell":
                a, b, h = init["a"], init["b"], init["height"]
                if not (0 <= a < b) or h < 0:
                    raise DomainError("shell needs 0 <= a < b and height >= 0")
                return from_profile(grid, lambda u: np.where((u >= a) & (u <= b), h, 0.0))
            # file: snapshot JSON; resampled linearly if the nodes differ
            d = json.loads(Path(init["path"]).read_text())
            nodes = np.asarray(d["nodes"], dtype=float)
            vals = np.asarray(d["values"], dtype=float)
            if nodes.shape == grid.nodes.shape and np.allclose(nodes, grid.nodes, rtol=1e-13, atol=0):
                return DistributionState(grid, vals)
            return DistributionState(grid, np.interp(grid.nodes, nodes, vals, right=0.0))
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise ConfigError(f"initial.path: {exc}") from None
        except DomainError as exc:
            raise ConfigError(f"initial: {exc}") from None


def load(path) -> Scenario:
    return Scenario.from_file(path)
