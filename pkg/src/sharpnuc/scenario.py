"""Scenario files (YAML) and the cached pipeline objects built from them."""

from __future__ import annotations

import copy
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .gridspace import GridSpec, build_grid
from .localization import build_L_pm, build_T, check_gamma, choose_h, test_function_family

SCENARIO_DIR = Path(__file__).parent / "scenarios"


class ScenarioError(ValueError):
    pass


# every key with its default; nested dicts are sections
DEFAULTS = {
    "name": "default",
    "s": 3,
    "grid": {"n": 32, "pmax": 8.0, "half_shift": True},
    "r": 1.0,
    "E": 4.0,
    "p": [0.5, 1.0],
    "gamma": 0.95,
    "epsilon": 0.1,
    "h": {"threshold": 1e-12},
    "m": 20,                        # size of the test-function family
    "svd_tolerance": 1e-8,
    "eps_pad": None,                # cutoff padding; None means 0.25 r
    "refinement": [24, 32, 48],     # n values for the spectrum stability table
    "fock": {"n_max": 6, "dimension_cap": 20000, "active": 2, "weyl_norm": 0.5, "trials": 20},
    "K": 4,                         # multi-index cutoff for series sums
    "correlations": {"eigenindex": 0, "sign": "+", "top": 5, "ntest": 64, "ntimes": 7, "scan_points": 96},
    "kernel": {"rho": 1.0, "radii": 8},
    "nuclearity": {"active": 2, "n_max": 3, "max_order": 3, "restarts": 5,
                   "multinorm_configs": ["single", "light", "pair5", "quad5"],
                   "harmonic_configs": ["single", "pair5", "quad5"],
                   "n_sweep": [1, 2, 4, 8, 16], "delta_sweep": [0.0, 5.0, 20.0, 50.0],
                   "limit_delta": 50.0, "limit_tolerance": 0.02},
    "translations": {
        "single": [[0.0, 0.0, 0.0, 0.0]],
        "light": [[0.0, 0.0, 0.0, 0.0], [3.0, 3.0, 0.0, 0.0]],
        "pair5": [[0.0, 0.0, 0.0, 0.0], [0.0, 5.0, 0.0, 0.0]],
        "quad5": [[0.0, 0.0, 0.0, 0.0], [0.0, 5.0, 0.0, 0.0], [0.0, 2.5, 4.330127018922193, 0.0],
                  [0.0, 2.5, 1.4433756729740643, 4.08248290463863]],
    },
    "seed": 0,
}

# sections whose keys are user-chosen names rather than fixed options
FREE_SECTIONS = {"translations"}


def _merge(base: dict, over: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in over.items():
        where = f"{path}{key}"
        if key not in base:
            raise ScenarioError(f"unknown key '{where}'")
        if isinstance(base[key], dict) and key not in FREE_SECTIONS:
            if not isinstance(val, dict):
                raise ScenarioError(f"'{where}' must be a mapping")
            out[key] = _merge(base[key], val, where + ".")
        elif key in FREE_SECTIONS:
            if not isinstance(val, dict):
                raise ScenarioError(f"'{where}' must be a mapping of name -> point list")
            out[key] = copy.deepcopy(val)
        else:
            out[key] = val
    return out


@dataclass
class Scenario:
    data: dict

    def __getitem__(self, key):
        return self.data[key]

    @property
    def grid_spec(self) -> GridSpec:
        g = self.data["grid"]
        return GridSpec(self.data["s"], int(g["n"]), float(g["pmax"]), bool(g["half_shift"]))

    @property
    def eps_pad(self) -> float:
        v = self.data["eps_pad"]
        return 0.25 * self.data["r"] if v is None else float(v)

    def points(self, name: str) -> np.ndarray:
        try:
            return np.asarray(self.data["translations"][name], dtype=float)
        except KeyError:
            raise ScenarioError(f"no translation config named '{name}'") from None

    def with_seed(self, seed: int | None) -> "Scenario":
        if seed is None:
            return self
        d = copy.deepcopy(self.data)
        d["seed"] = int(seed)
        return Scenario(d)

    def digest(self) -> str:
        blob = json.dumps(self.data, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]

    def rng(self, stream: str) -> np.random.Generator:
        """Deterministic generator per named stream, derived from seed and scenario hash."""
        h = hashlib.sha256(f"{self.data['seed']}:{self.digest()}:{stream}".encode()).digest()
        return np.random.default_rng(int.from_bytes(h[:8], "little"))

    def validate(self, *, nuclearity: bool = False) -> None:
        d = self.data
        s = d["s"]
        if not isinstance(s, int) or s < 2:
            raise ScenarioError(f"s must be an integer >= 2, got {s!r}")
        try:
            # s = 2 leaves no admissible gamma; report the infrared reason instead
            self.grid_spec.validate(nuclearity=nuclearity or s == 2)
            check_gamma(float(d["gamma"]), s)
        except ValueError as exc:
            raise ScenarioError(str(exc)) from None
        if not 0 < d["epsilon"] < 1:
            raise ScenarioError(f"epsilon must lie in (0, 1), got {d['epsilon']}")
        if not (d["r"] > 0 and d["E"] > 0):
            raise ScenarioError("r and E must be positive")
        for p in d["p"]:
            if not 0 < p <= 1:
                raise ScenarioError(f"p values must lie in (0, 1], got {p}")
        if d["m"] < 1:
            raise ScenarioError("m must be >= 1")
        fk = d["fock"]
        if fk["n_max"] < 1 or fk["dimension_cap"] < 1:
            raise ScenarioError("fock.n_max and fock.dimension_cap must be >= 1")
        for name, pts in d["translations"].items():
            arr = np.asarray(pts, dtype=float)
            if arr.ndim != 2 or arr.shape[1] != s + 1:
                raise ScenarioError(f"translation config '{name}' needs points with {s + 1} coordinates")
        wrap = 0.5 * self.grid_spec.n * math.pi / self.grid_spec.pmax
        from .nuclearity import TranslationConfig

        for name in d["nuclearity"]["multinorm_configs"]:
            cfg = TranslationConfig(self.points(name), name)
            if cfg.N > 1 and cfg.delta < -1e-12:
                raise ScenarioError(f"config '{name}' has delta(x) = {cfg.delta:g} < 0")
            if cfg.max_separation() >= wrap:
                raise ScenarioError(f"config '{name}' spans {cfg.max_separation():g} >= wrap radius {wrap:g}")

    def echo(self) -> dict:
        return copy.deepcopy(self.data)


def load_scenario(source=None, overrides: dict | None = None) -> Scenario:
    """Load from a path, a shipped scenario name, or a dict; None gives the defaults."""
    if source is None:
        raw = {}
    elif isinstance(source, dict):
        raw = source
    else:
        path = Path(source)
        if not path.exists():
            shipped = SCENARIO_DIR / f"{source}.yaml"
            if not shipped.exists():
                raise ScenarioError(f"scenario file not found: {source}")
            path = shipped
        with open(path, encoding="utf-8") as handle:
            raw = yaml.safe_load(handle) or {}
    if not isinstance(raw, dict):
        raise ScenarioError("scenario must be a mapping")
    data = _merge(DEFAULTS, raw)
    if overrides:
        data = _merge(data, overrides)
    sc = Scenario(data)
    sc.validate()
    return sc


@dataclass(eq=False)
class Context:
    """Lazily built pipeline objects for one scenario (and optionally another n)."""

    scenario: Scenario
    n: int | None = None
    _cache: dict = field(default_factory=dict)

    def _get(self, key, fn):
        if key not in self._cache:
            self._cache[key] = fn()
        return self._cache[key]

    @property
    def grid(self):
        def make():
            spec = self.scenario.grid_spec
            if self.n is not None:
                spec = GridSpec(spec.s, self.n, spec.pmax, spec.half_shift)
            return build_grid(spec)
        return self._get("grid", make)

    @property
    def family(self):
        return self._get("family", lambda: test_function_family(self.grid, self.scenario["r"], self.scenario["m"]))

    @property
    def Lplus(self):
        return self._get("L+", lambda: build_L_pm(self.grid, self.family, "+", self.scenario["svd_tolerance"]))

    @property
    def Lminus(self):
        return self._get("L-", lambda: build_L_pm(self.grid, self.family, "-", self.scenario["svd_tolerance"]))

    @property
    def h(self):
        sc = self.scenario
        return self._get("h", lambda: choose_h(sc["r"], sc["E"], self.grid, sc["h"]["threshold"]))

    @property
    def spectrum(self):
        sc = self.scenario
        return self._get("T", lambda: build_T(self.grid, self.Lplus, self.Lminus, sc["E"], sc["gamma"], self.h))

    def refined(self, n: int) -> "Context":
        return Context(self.scenario, n)
