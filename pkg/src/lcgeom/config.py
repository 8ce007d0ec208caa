"""Plain key-value experiment configs.

One ``key = value`` per line, ``#`` starts a comment. Keys under ``spec.``
describe the distribution; every other key belongs to the experiment schema.
Unknown keys are rejected.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from . import distributions as dist
from .errors import ConfigError


def _floats(text):
    vals = [float(v) for v in str(text).split(",") if v.strip()]
    if not vals:
        raise ConfigError("grid is empty")
    if any(b < a for a, b in zip(vals, vals[1:])):
        raise ConfigError(f"grid {text!r} is not sorted")
    return vals


def _ints(text):
    return [int(v) for v in _floats(text)]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes"):
        return True
    if t in ("0", "false", "no"):
        return False
    raise ConfigError(f"not a boolean: {text!r}")


# experiment -> {key: (parser, default)}; default None means required
_COMMON = {"seed": (int, 0), "replicas": (int, 16), "C": (float, 3.0), "c": (float, 1.0)}
SCHEMAS = {
    "sample": {"N": (int, None), "pairs": (int, 1000)},
    "shell": {"N": (int, 100_000), "t-grid": (_floats, "0.05,0.1,0.2,0.5"),
              "tail-form": (str, "gm")},
    "moments": {"N": (int, 100_000), "p-grid": (_floats, ""), "borell-p-grid": (_floats, "2,4,8,16")},
    "weak-strong": {"N": (int, 100_000), "p-grid": (_floats, ""), "norm": (str, "l2"),
                    "h-p": (float, 2.0)},
    "cov-approx": {"eps-grid": (_floats, "0.25,0.5"), "eta": (float, 0.1),
                   "N-grid": (_ints, "512,1024,2048,4096,8192,16384")},
    "clt": {"N": (int, 100_000), "directions": (int, 200), "thresholds": (_floats, "0.01,0.02,0.03"),
            "tau": (float, 1.0)},
    "abp": {"N": (int, 100_000)},
    "isoperimetry": {"N": (int, 1_000_000), "directions": (int, 32), "eps": (float, 0.01)},
    "kp-body": {"p": (float, None), "directions": (int, 100), "pairs": (int, 200)},
    "sections": {"body": (str, None), "N": (int, 200_000), "directions": (int, 8)},
    "volume": {"body": (str, None), "eps": (float, 0.1), "eta": (float, 0.05),
               "round-samples": (int, 4000), "max-calls": (int, 50_000_000)},
    "hull": {"n": (int, None), "points": (int, None), "trials": (int, 4), "mc": (int, 20_000)},
    "proof-check": {"p": (float, 2.0), "m": (int, 0), "N": (int, 100_000), "draws": (int, 100)},
    "accept": {"criteria": (_ints, "1,2,3,4,5,6,7,8,9,10,11,12,13")},
}
NEEDS_SPEC = {"sample", "shell", "moments", "weak-strong", "cov-approx", "clt", "abp",
              "isoperimetry", "kp-body", "proof-check"}


@dataclass
class ExperimentConfig:
    experiment: str
    values: dict
    raw: dict
    spec: object = None
    meta: dict = field(default_factory=dict)

    def __getitem__(self, key):
        return self.values[key]

    @property
    def seed(self) -> int:
        return self.values["seed"]

    def to_text(self) -> str:
        """Canonical echo; parsing it back reproduces this config."""
        lines = [f"experiment = {self.experiment}"]
        lines += [f"{k} = {v}" for k, v in sorted(self.raw.items())]
        return "\n".join(lines) + "\n"


def parse_lines(text: str) -> dict:
    kv = {}
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        k, sep, v = line.partition("=")
        if not sep:
            raise ConfigError(f"line {n}: expected key = value, got {raw!r}")
        k = k.strip()
        if k in kv:
            raise ConfigError(f"line {n}: duplicate key {k!r}")
        kv[k] = v.strip()
    return kv


def build_config(experiment: str, kv: dict) -> ExperimentConfig:
    kv = dict(kv)
    name = kv.pop("experiment", experiment) or experiment
    if experiment and name != experiment:
        raise ConfigError(f"config is for {name!r}, not {experiment!r}")
    if name not in SCHEMAS:
        raise ConfigError(f"unknown experiment {name!r}")
    schema = {**_COMMON, **SCHEMAS[name]}
    spec_kv = {k[5:]: v for k, v in kv.items() if k.startswith("spec.")}
    rest = {k: v for k, v in kv.items() if not k.startswith("spec.")}
    unknown = sorted(set(rest) - set(schema))
    if unknown:
        raise ConfigError(f"unknown keys for {name}: {unknown}")
    if spec_kv and name not in NEEDS_SPEC:
        raise ConfigError(f"{name} takes no spec.* keys")
    values = {}
    for key, (parse, default) in schema.items():
        if key in rest:
            text = rest[key]
        elif default is None:
            raise ConfigError(f"{name} requires key {key!r}")
        else:
            text = default
        if text == "" and parse in (_floats, _ints):
            values[key] = None
            continue
        try:
            values[key] = parse(text)
        except ValueError as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    spec = None
    if name in NEEDS_SPEC:
        if not spec_kv:
            raise ConfigError(f"{name} needs spec.family and spec.n")
        spec = dist.spec_from_mapping(spec_kv)
    return ExperimentConfig(name, values, kv, spec)


def load_config(experiment: str, path=None, overrides=()) -> ExperimentConfig:
    kv = {}
    if path is not None:
        try:
            with open(path) as fh:
                kv = parse_lines(fh.read())
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
    for item in overrides:
        k, sep, v = item.partition("=")
        if not sep:
            raise ConfigError(f"override {item!r} is not key=value")
        kv[k.strip()] = v.strip()
    return build_config(experiment, kv)
