"""Scenario files: the JSON schema, parsing with overrides, seeded random fields.

A scenario names a potential, given as explicit terms or as a seeded random
recipe, together with the sampling box.  Everything else is optional: a
gauge generator, a prescribed current, a toy Hamiltonian, an observable,
lattice grids and tolerance overrides.  Matrices are written row-major as
``[re, im]`` pairs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np
from scipy.stats import qmc

from .. import field_expr as fe
from .. import operator_core as oc
from ..errors import ScenarioError
from ..gauge import GaugePotential
from ..maxwell import CurrentDensity

SCHEMA_ID = "ogt-scenario/1"

# Slots keep random streams of different fields independent of each other.
SLOT_POTENTIAL = 0
SLOT_GENERATOR = 4
SLOT_CURRENT = 5
SLOT_HAMILTONIAN = 9
SLOT_OBSERVABLE = 10

_NUMBER_PAIR = {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2}

SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["schema", "name", "dim", "potential", "sampling"],
    "additionalProperties": False,
    "properties": {
        "schema": {"const": SCHEMA_ID},
        "name": {"type": "string", "minLength": 1},
        "description": {"type": "string"},
        "dim": {"type": "integer", "minimum": 1, "maximum": 64},
        "constants": {
            "type": "object",
            "additionalProperties": False,
            "properties": {k: {"type": "number"} for k in ("q", "hbar", "c", "eps0", "mu0")},
        },
        "potential": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["components"],
                    "additionalProperties": False,
                    "properties": {"components": {"type": "array", "items": {"$ref": "#/$defs/field"},
                                                  "minItems": 4, "maxItems": 4}},
                },
                {
                    "type": "object",
                    "required": ["random"],
                    "additionalProperties": False,
                    "properties": {"random": {"$ref": "#/$defs/random"}},
                },
            ]
        },
        "generator": {"$ref": "#/$defs/field"},
        "prescribed_current": {
            "type": "object",
            "required": ["components"],
            "additionalProperties": False,
            "properties": {"components": {"type": "array", "items": {"$ref": "#/$defs/field"},
                                          "minItems": 4, "maxItems": 4}},
        },
        "hamiltonian": {"$ref": "#/$defs/field"},
        "observable": {"$ref": "#/$defs/field"},
        "sampling": {
            "type": "object",
            "required": ["seed"],
            "additionalProperties": False,
            "properties": {
                "box": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                        "minItems": 4, "maxItems": 4},
                "points": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer", "minimum": 0},
            },
        },
        "lattice": {
            "type": "object",
            "required": ["grids"],
            "additionalProperties": False,
            "properties": {
                "box": {"type": "array", "items": {"type": "number", "exclusiveMinimum": 0},
                        "minItems": 4, "maxItems": 4},
                "grids": {"type": "array", "items": {"type": "integer", "minimum": 4}, "minItems": 1},
            },
        },
        "tolerances": {"type": "object", "additionalProperties": {"type": "number", "exclusiveMinimum": 0}},
    },
    "$defs": {
        "matrix": {"type": "array", "minItems": 1, "items": {"type": "array", "minItems": 1, "items": _NUMBER_PAIR}},
        "basis": {
            "oneOf": [
                {
                    "type": "object",
                    "required": ["kind", "exponents"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "monomial"},
                        "exponents": {"type": "array", "items": {"type": "integer", "minimum": 0},
                                      "minItems": 4, "maxItems": 4},
                        "amplitude": {"type": "number"},
                    },
                },
                {
                    "type": "object",
                    "required": ["kind", "function", "wavevector"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"const": "trig"},
                        "function": {"enum": ["sin", "cos"]},
                        "wavevector": {"type": "array", "items": {"type": "number"}, "minItems": 4, "maxItems": 4},
                        "phase": {"type": "number"},
                        "amplitude": {"type": "number"},
                    },
                },
            ]
        },
        "term": {
            "type": "object",
            "required": ["basis", "coefficient"],
            "additionalProperties": False,
            "properties": {"basis": {"$ref": "#/$defs/basis"}, "coefficient": {"$ref": "#/$defs/matrix"}},
        },
        "random": {
            "type": "object",
            "required": ["seed"],
            "additionalProperties": False,
            "properties": {
                "seed": {"type": "integer", "minimum": 0},
                "basis": {"enum": ["monomial", "trig"]},
                "terms": {"type": "integer", "minimum": 1},
                "degree": {"type": "integer", "minimum": 0},
                "scale": {"type": "number", "exclusiveMinimum": 0},
                "central": {"type": "boolean"},
                "time_dependent": {"type": "boolean"},
            },
        },
        "field": {
            "oneOf": [
                {"type": "array", "items": {"$ref": "#/$defs/term"}},
                {
                    "type": "object",
                    "required": ["random"],
                    "additionalProperties": False,
                    "properties": {"random": {"$ref": "#/$defs/random"}},
                },
            ]
        },
    },
}

_VALIDATOR = jsonschema.Draft202012Validator(SCHEMA)


@dataclass(frozen=True)
class Sampling:
    box: tuple[float, float, float, float] = (1.0, 1.0, 1.0, 1.0)
    points: int = 32
    seed: int = 0

    def sample_points(self) -> np.ndarray:
        """Scrambled Halton points in ``[0, L_0) x ... x [0, L_3)``."""
        sampler = qmc.Halton(d=4, scramble=True, seed=self.seed)
        return sampler.random(self.points) * np.asarray(self.box)


@dataclass(frozen=True)
class Scenario:
    name: str
    dim: int
    constants: oc.PhysicalConstants
    potential: GaugePotential
    sampling: Sampling
    generator: fe.Expr | None = None
    prescribed_current: CurrentDensity | None = None
    hamiltonian: fe.Expr | None = None
    observable: fe.Expr | None = None
    lattice_box: tuple[float, ...] | None = None
    lattice_grids: tuple[int, ...] = ()
    tolerances: dict = field(default_factory=dict)
    source: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def seed(self) -> int:
        return self.sampling.seed

    def leaves(self):
        """Every expression the scenario defines (for periodicity checks)."""
        out = list(self.potential)
        for extra in (self.generator, self.hamiltonian, self.observable):
            if extra is not None:
                out.append(extra)
        if self.prescribed_current is not None:
            out.extend(self.prescribed_current)
        return out


# ---------------------------------------------------------------------------
# random fields


def random_basis(rng: np.random.Generator, kind: str, degree: int, box, time_dependent: bool = False):
    if kind == "monomial":
        exps = [0, 0, 0, 0]
        total = int(rng.integers(0, degree + 1))
        if time_dependent:
            exps[0] = 1
            total = max(total - 1, 0)
        for _ in range(total):
            exps[int(rng.integers(0, 4))] += 1
        return fe.Monomial(tuple(exps))
    ints = rng.integers(-1, 2, size=4)
    if not ints.any():
        ints[int(rng.integers(0, 4))] = 1
    if time_dependent and ints[0] == 0:
        ints[0] = 1
    k = tuple(2 * math.pi * int(n) / float(length) for n, length in zip(ints, box))
    func = "sin" if rng.integers(0, 2) else "cos"
    return fe.Trig(func, k, float(rng.uniform(0, 2 * math.pi)))


def random_field(
    rng: np.random.Generator,
    dim: int,
    basis: str = "monomial",
    terms: int = 3,
    degree: int = 2,
    scale: float = 0.5,
    central: bool = False,
    time_dependent: bool = False,
    box=(1.0, 1.0, 1.0, 1.0),
) -> fe.AnalyticField:
    """Hermitian analytic field with seeded random basis functions and coefficients.

    ``central=True`` makes every coefficient a real multiple of the identity.
    """
    out = []
    for i in range(terms):
        b = random_basis(rng, basis, degree, box, time_dependent and i == 0)
        if central:
            coef = scale * float(rng.standard_normal()) * np.eye(dim)
        else:
            coef = oc.random_hermitian(int(rng.integers(2**32)), dim, scale)
        out.append((b, coef))
    return fe.AnalyticField(out, dim)


def random_potential(rng: np.random.Generator, dim: int, **kwargs) -> tuple[fe.AnalyticField, ...]:
    return tuple(random_field(rng, dim, **kwargs) for _ in range(4))


# ---------------------------------------------------------------------------
# parsing


def _matrix(raw, dim: int, where: str) -> np.ndarray:
    rows = len(raw)
    if rows != dim or any(len(r) != dim for r in raw):
        raise ScenarioError(f"{where}: coefficient must be {dim}x{dim}, got {rows} rows of lengths {[len(r) for r in raw]}")
    return np.array([[complex(re, im) for re, im in row] for row in raw])


def _basis(raw: dict):
    amp = float(raw.get("amplitude", 1.0))
    if raw["kind"] == "monomial":
        return fe.Monomial(tuple(raw["exponents"]), amp)
    return fe.Trig(raw["function"], tuple(raw["wavevector"]), float(raw.get("phase", 0.0)), amp)


def _random_kwargs(recipe: dict, box) -> dict:
    return {
        "basis": recipe.get("basis", "monomial"),
        "terms": recipe.get("terms", 3),
        "degree": recipe.get("degree", 2),
        "scale": recipe.get("scale", 0.5),
        "central": recipe.get("central", False),
        "time_dependent": recipe.get("time_dependent", False),
        "box": box,
    }


def _field(raw, dim: int, slot: int, box, where: str) -> fe.AnalyticField:
    if isinstance(raw, dict):
        recipe = raw["random"]
        rng = np.random.default_rng([recipe["seed"], slot])
        return random_field(rng, dim, **_random_kwargs(recipe, box))
    terms = [(_basis(t["basis"]), _matrix(t["coefficient"], dim, f"{where}[{i}]")) for i, t in enumerate(raw)]
    fld = fe.AnalyticField(terms, dim)
    if terms and not fld.hermitian:
        raise ScenarioError(f"{where}: coefficients must be Hermitian")
    return fld


def _format_error(err: jsonschema.ValidationError) -> str:
    if err.context:
        # for oneOf/anyOf failures the most specific sub-error is the useful one
        err = jsonschema.exceptions.best_match(err.context)
    path = "/".join(str(p) for p in err.absolute_path) or "<root>"
    return f"field {path}: {err.message}"


def validate(raw) -> None:
    errors = sorted(_VALIDATOR.iter_errors(raw), key=lambda e: list(map(str, e.absolute_path)))
    if errors:
        raise ScenarioError("scenario does not match schema " + SCHEMA_ID + ":\n  " + "\n  ".join(
            _format_error(e) for e in errors))


def apply_overrides(raw: dict, seed: int | None = None, dim: int | None = None) -> dict:
    """Return a copy with ``--seed`` / ``--dim`` applied.

    ``seed`` replaces the sampling seed and the seed of every random field
    recipe.  ``dim`` is only allowed when no explicit matrices are present.
    """
    raw = json.loads(json.dumps(raw))
    if seed is not None:
        if seed < 0:
            raise ScenarioError("seed must be non-negative")
        raw["sampling"]["seed"] = seed
        for recipe in _random_specs(raw):
            recipe["seed"] = seed
    if dim is not None:
        if dim < 1:
            raise ScenarioError("dim must be positive")
        if dim != raw["dim"] and _has_explicit_matrices(raw):
            raise ScenarioError(
                f"--dim {dim} conflicts with explicit {raw['dim']}x{raw['dim']} coefficients in the scenario"
            )
        raw["dim"] = dim
    return raw


def _field_entries(raw: dict):
    pot = raw["potential"]
    if "components" in pot:
        yield from pot["components"]
    else:
        yield pot
    for key in ("generator", "hamiltonian", "observable"):
        if key in raw:
            yield raw[key]
    if "prescribed_current" in raw:
        yield from raw["prescribed_current"]["components"]


def _random_specs(raw: dict):
    return [e["random"] for e in _field_entries(raw) if isinstance(e, dict)]


def _has_explicit_matrices(raw: dict) -> bool:
    return any(isinstance(e, list) and e for e in _field_entries(raw))


def build(raw: dict) -> Scenario:
    """Validate a decoded JSON document and construct the scenario objects."""
    validate(raw)
    dim = raw["dim"]
    try:
        constants = oc.PhysicalConstants(**raw.get("constants", {}))
    except ValueError as exc:
        raise ScenarioError(f"field constants: {exc}") from None
    samp = raw["sampling"]
    sampling = Sampling(tuple(float(v) for v in samp.get("box", (1.0,) * 4)), int(samp.get("points", 32)),
                        int(samp["seed"]))
    box = sampling.box
    pot = raw["potential"]
    if "components" in pot:
        comps = tuple(_field(c, dim, SLOT_POTENTIAL + mu, box, f"potential/components/{mu}")
                      for mu, c in enumerate(pot["components"]))
    else:
        recipe = pot["random"]
        rng = np.random.default_rng([recipe["seed"], SLOT_POTENTIAL])
        comps = random_potential(rng, dim, **_random_kwargs(recipe, box))
    potential = GaugePotential(comps, constants)

    def optional(key, slot):
        return _field(raw[key], dim, slot, box, key) if key in raw else None

    current = None
    if "prescribed_current" in raw:
        current = CurrentDensity(
            tuple(_field(c, dim, SLOT_CURRENT + nu, box, f"prescribed_current/components/{nu}")
                  for nu, c in enumerate(raw["prescribed_current"]["components"])),
            constants=constants,
        )
    lat = raw.get("lattice")
    return Scenario(
        name=raw["name"],
        dim=dim,
        constants=constants,
        potential=potential,
        sampling=sampling,
        generator=optional("generator", SLOT_GENERATOR),
        prescribed_current=current,
        hamiltonian=optional("hamiltonian", SLOT_HAMILTONIAN),
        observable=optional("observable", SLOT_OBSERVABLE),
        lattice_box=tuple(float(v) for v in lat.get("box", box)) if lat else None,
        lattice_grids=tuple(lat["grids"]) if lat else (),
        tolerances=dict(raw.get("tolerances", {})),
        source=raw,
    )


def bundled_names() -> list[str]:
    root = resources.files(__package__) / "scenarios"
    return sorted(p.name[:-5] for p in root.iterdir() if p.name.endswith(".json"))


def read_raw(path_or_name) -> dict:
    """Read a scenario document from a path or a bundled scenario name."""
    path = Path(path_or_name)
    if path.suffix != ".json" and not path.exists() and str(path_or_name) in bundled_names():
        text = (resources.files(__package__) / "scenarios" / f"{path_or_name}.json").read_text()
        where = f"<bundled {path_or_name}>"
    else:
        try:
            text = path.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario {path}: {exc.strerror or exc}") from None
        where = str(path)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{where}: invalid JSON at line {exc.lineno} column {exc.colno}: {exc.msg}") from None


def load_scenario(path_or_name, seed: int | None = None, dim: int | None = None) -> Scenario:
    raw = read_raw(path_or_name)
    validate(raw)
    return build(apply_overrides(raw, seed, dim))
