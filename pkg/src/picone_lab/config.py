"""JSON run configuration: schema validation and object construction.

Every key is checked against a fixed schema; unknown keys are rejected with
their full path. All expressions are compiled during validation, so a bad
coefficient is reported before any computation starts.
"""

import difflib
import json
import math
from dataclasses import dataclass

from .elliptic import BoundaryCondition, EllipticProblem
from .errors import ConfigurationError, LabError
from .expr import Expression, constant
from .grid import make_grid, sample
from .lotka_volterra import COMPETITIVE, SYMBIOTIC, LVSystem
from .scalar_branch import Nonlinearity, ScalarProblem

REQUIRED = object()
# sections without required keys are always present, filled with defaults
OPTIONAL_SECTIONS = ("solver", "output", "eigen", "branch", "lv_solve")


class _Kind:
    def __init__(self, name, check, default=REQUIRED):
        self.name = name
        self.check = check
        self.default = default


def _expr(variable="x"):
    def check(value, path):
        if isinstance(value, bool) or not isinstance(value, (str, int, float)):
            raise ConfigurationError(f"{path}: expected an expression string or number")
        try:
            if variable == "t":
                try:
                    Expression(value, "t")
                except ConfigurationError:
                    Expression(value, "x")
            else:
                Expression(value, variable)
        except LabError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
        return value if isinstance(value, str) else repr(float(value))

    return check


def _const(value, path):
    if isinstance(value, bool):
        raise ConfigurationError(f"{path}: expected a number")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return constant(value)
        except LabError as exc:
            raise ConfigurationError(f"{path}: {exc}") from None
    raise ConfigurationError(f"{path}: expected a number or constant expression")


def _positive(value, path):
    v = _const(value, path)
    if not v > 0 or not math.isfinite(v):
        raise ConfigurationError(f"{path}: must be a positive finite number, got {value!r}")
    return v


def _nonneg(value, path):
    v = _const(value, path)
    if not v >= 0:
        raise ConfigurationError(f"{path}: must be nonnegative, got {value!r}")
    return v


def _int(minimum):
    def check(value, path):
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigurationError(f"{path}: expected an integer, got {value!r}")
        if value < minimum:
            raise ConfigurationError(f"{path}: must be at least {minimum}, got {value}")
        return value

    return check


def _bool(value, path):
    if not isinstance(value, bool):
        raise ConfigurationError(f"{path}: expected true or false")
    return value


def _enum(*choices):
    def check(value, path):
        if value not in choices:
            raise ConfigurationError(f"{path}: expected one of {', '.join(choices)}, got {value!r}")
        return value

    return check


def _range(value, path):
    if not isinstance(value, list) or len(value) != 2:
        raise ConfigurationError(f"{path}: expected a two-element list [lo, hi]")
    lo, hi = _const(value[0], f"{path}[0]"), _const(value[1], f"{path}[1]")
    if not lo <= hi:
        raise ConfigurationError(f"{path}: lower end exceeds upper end")
    return [lo, hi]


def _string(value, path):
    if not isinstance(value, str) or not value:
        raise ConfigurationError(f"{path}: expected a non-empty string")
    return value


def _section(schema):
    def check(value, path):
        return _validate(value, schema, path)

    return check


BC = {
    "kind": _Kind("kind", _enum("Dirichlet", "Robin", "Neumann")),
    "beta": _Kind("beta", _const, None),
}
OPERATOR = {
    "A": _Kind("A", _expr(), "1"),
    "C": _Kind("C", _expr(), "0"),
    "bc_left": _Kind("bc_left", _section(BC), {"kind": "Dirichlet"}),
    "bc_right": _Kind("bc_right", _section(BC), {"kind": "Dirichlet"}),
    "allow_indefinite": _Kind("allow_indefinite", _bool, False),
}
NONLINEARITY = {
    "form": _Kind("form", _enum("PowerLaw", "ULogU", "Composite")),
    "p": _Kind("p", _positive, None),
    "q": _Kind("q", _positive, None),
    "nu": _Kind("nu", _nonneg, None),
}
SCHEMA = {
    "domain": {
        "x_lo": _Kind("x_lo", _const),
        "x_hi": _Kind("x_hi", _const),
        "n": _Kind("n", _int(-(10**9))),
    },
    "operator": OPERATOR,
    "solver": {
        "tol": _Kind("tol", _positive, 1e-10),
        "residual_tol": _Kind("residual_tol", _positive, 1e-8),
        "newton_tol": _Kind("newton_tol", _positive, 1e-9),
        "fold_tol": _Kind("fold_tol", _positive, 1e-6),
    },
    "eigen": {"potential": _Kind("potential", _expr(), "0")},
    "picone": {
        "u": _Kind("u", _expr()),
        "v": _Kind("v", _expr()),
        "g": _Kind("g", _expr("t")),
        "g_prime": _Kind("g_prime", _expr("t")),
    },
    "scalar": {
        "a": _Kind("a", _expr()),
        "f": _Kind("f", _section(NONLINEARITY)),
        "p": _Kind("p", _positive, None),
    },
    "branch": {
        "eps": _Kind("eps", _positive, 1e-2),
        "step": _Kind("step", _positive, 0.05),
        "max_points": _Kind("max_points", _int(2), 400),
        "lambda_window": _Kind("lambda_window", _range, None),
        "blowup": _Kind("blowup", _positive, 1e6),
    },
    "system": {
        "kind": _Kind("kind", _enum(SYMBIOTIC, COMPETITIVE)),
        "d1": _Kind("d1", _expr(), "1"),
        "d2": _Kind("d2", _expr(), "1"),
        "lambda": _Kind("lambda", _expr()),
        "mu": _Kind("mu", _expr()),
        "a": _Kind("a", _expr()),
        "b": _Kind("b", _expr()),
        "c": _Kind("c", _expr()),
        "d": _Kind("d", _expr()),
        "operator1": _Kind("operator1", _section(OPERATOR), None),
        "operator2": _Kind("operator2", _section(OPERATOR), None),
    },
    "lv_solve": {
        "lambda": _Kind("lambda", _const, None),
        "mu": _Kind("mu", _const, None),
    },
    "scan": {
        "lambda_range": _Kind("lambda_range", _range),
        "mu_range": _Kind("mu_range", _range),
        "steps": _Kind("steps", _int(1)),
        "tol": _Kind("tol", _positive, 1e-6),
    },
    "evolve": {
        "dt": _Kind("dt", _positive, 0.01),
        "t_end": _Kind("t_end", _positive),
        "stride": _Kind("stride", _int(1), 100),
        "initial": _Kind("initial", _enum("random", "expression", "coexistence"), "random"),
        "u0": _Kind("u0", _expr(), None),
        "v0": _Kind("v0", _expr(), None),
        "count": _Kind("count", _int(1), 5),
        "seed": _Kind("seed", _int(0), 0xC0FFEE),
        "scale": _Kind("scale", _positive, 2.0),
        "reference": _Kind("reference", _enum("coexistence", "none"), "coexistence"),
    },
    "output": {"prefix": _Kind("prefix", _string, "out")},
}


def _unknown(key, allowed, path):
    hint = difflib.get_close_matches(key, list(allowed), n=1)
    where = f"{path}." if path else ""
    extra = f" (did you mean {hint[0]!r}?)" if hint else ""
    return ConfigurationError(f"unknown key {where}{key!r}{extra}")


def _validate(value, schema, path):
    if not isinstance(value, dict):
        raise ConfigurationError(f"{path}: expected an object")
    out = {}
    for key in value:
        if key not in schema:
            raise _unknown(key, schema, path)
    for key, kind in schema.items():
        sub = f"{path}.{key}" if path else key
        if key in value:
            out[key] = kind.check(value[key], sub)
        elif kind.default is REQUIRED:
            raise ConfigurationError(f"missing required key {sub!r}")
        elif isinstance(kind.default, dict):
            out[key] = kind.check(kind.default, sub)
        else:
            out[key] = kind.default
    return out


@dataclass(frozen=True)
class RunConfig:
    """Validated configuration; missing optional values are filled in."""

    data: dict

    def has(self, section):
        return section in self.data

    def section(self, name):
        if name not in self.data:
            raise ConfigurationError(f"missing required section {name!r}")
        return self.data[name]

    @property
    def solver(self):
        return self.data["solver"]

    @property
    def prefix(self):
        return self.data["output"]["prefix"]

    def grid(self):
        d = self.section("domain")
        return make_grid(d["x_lo"], d["x_hi"], d["n"])

    def operator(self, block=None):
        block = block if block is not None else self.section("operator")
        grid = self.grid()
        return EllipticProblem.build(
            grid,
            block["A"],
            block["C"],
            _boundary(block["bc_left"]),
            _boundary(block["bc_right"]),
            block["allow_indefinite"],
        )

    def nonlinearity(self):
        f = self.section("scalar")["f"]
        form = f["form"]
        if form == "PowerLaw":
            if f["p"] is None:
                raise ConfigurationError("scalar.f.p is required for PowerLaw")
            return Nonlinearity.power(f["p"])
        if form == "Composite":
            missing = [k for k in ("nu", "p", "q") if f[k] is None]
            if missing:
                raise ConfigurationError(f"scalar.f.{missing[0]} is required for Composite")
            return Nonlinearity.composite(f["nu"], f["p"], f["q"])
        return Nonlinearity.ulogu()

    def scalar_problem(self):
        op = self.operator()
        return ScalarProblem(op, sample(op.grid, self.section("scalar")["a"]), self.nonlinearity())

    def system(self):
        s = self.section("system")
        default = self.data.get("operator")
        blocks = []
        for key in ("operator1", "operator2"):
            block = s[key] if s[key] is not None else default
            if block is None:
                block = _validate({}, OPERATOR, key)
            blocks.append(block)
        op1, op2 = self.operator(blocks[0]), self.operator(blocks[1])
        g = op1.grid
        F = lambda key: sample(g, s[key])  # noqa: E731
        return LVSystem(s["kind"], F("d1"), F("d2"), F("lambda"), F("mu"), F("a"), F("b"), F("c"), F("d"), op1, op2)


def _boundary(block):
    kind = block["kind"]
    if kind == "Dirichlet":
        if block["beta"] is not None:
            raise ConfigurationError("a Dirichlet condition carries no beta")
        return BoundaryCondition.dirichlet()
    if kind == "Neumann":
        if block["beta"] not in (None, 0.0):
            raise ConfigurationError("a Neumann condition has beta = 0; use Robin")
        return BoundaryCondition.neumann()
    return BoundaryCondition.robin(0.0 if block["beta"] is None else block["beta"])


def parse_config(text: str) -> RunConfig:
    """Parse and validate a JSON configuration document.

    Raises
    ------
    ConfigurationError
        For malformed JSON (with line and column), unknown or missing keys,
        bad values or expressions that do not parse. Messages carry the key
        path, for example ``operator.bc_left.beta``.
    """
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"invalid JSON at line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(raw, dict):
        raise ConfigurationError("configuration must be a JSON object")
    for key in raw:
        if key not in SCHEMA:
            raise _unknown(key, SCHEMA, "")
    data = {}
    for name, schema in SCHEMA.items():
        if name in raw:
            data[name] = _validate(raw[name], schema, name)
        elif name in OPTIONAL_SECTIONS:
            data[name] = _validate({}, schema, name)
    cfg = RunConfig(data)
    if "domain" in data:
        cfg.grid()  # grid preconditions
    return cfg
