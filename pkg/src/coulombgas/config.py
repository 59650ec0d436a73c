"""Experiment configuration: an INI file with one section per module.

Every key is declared in ``SCHEMA`` with a parser and a default; unknown
sections or keys are rejected with their dotted key path. The resolved
configuration (all defaults filled in) is what gets hashed and written to
the manifest, so a run can be repeated from the manifest alone.
"""

import configparser
import hashlib
import json

from .errors import ConfigError, CoulombGasError
from .equilibrium import PotentialSpec
from .kernel import KernelSpec
from .sampler import GibbsParams

KERNELS = ("Log1", "Log2", "Coul", "Riesz")


def _floats(text):
    return [float(t) for t in str(text).replace(",", " ").split()]


def _ints(text):
    return [int(t) for t in str(text).replace(",", " ").split()]


def _bool(text):
    t = str(text).strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _kernel_name(text):
    if text not in KERNELS:
        raise ValueError(f"kernel must be one of {', '.join(KERNELS)}")
    return text


def _lattices(text):
    names = str(text).replace(",", " ").split()
    allowed = ("square", "triangular", "cubic", "integers", "dimer")
    bad = [n for n in names if n not in allowed]
    if bad:
        raise ValueError(f"unknown lattice {bad[0]!r}")
    return names


SCHEMA = {
    "run": {
        "seed": (int, 0),
        "workers": (int, 1),
        "out": (str, "results"),
    },
    "gibbs": {
        "kernel": (_kernel_name, "Log2"),
        "d": (int, 2),
        "s": (float, 0.0),
        "beta": (float, 2.0),
        "N": (int, 64),
        "a": (float, 1.0),
    },
    "sampler": {
        "sweeps": (int, 20_000),
        "thinning": (int, 1),
        "burn_in": (float, 0.2),
        "chains": (int, 1),
        "target_acceptance": (float, 0.3),
        "checkpoint_every": (int, 0),
    },
    "oracle": {
        "samples": (int, 200),
    },
    "energy": {
        "configs": (int, 10),
        "N": (int, 8),
    },
    "fluct": {
        "center": (_floats, [0.0, 0.0]),
        "r_in": (float, 0.2),
        "r_out": (float, 0.6),
        "betas": (_floats, [1.0, 2.0, 4.0]),
    },
    "jellium": {
        "lattices": (_lattices, ["square", "triangular"]),
        "dimer_delta": (float, 0.1),
        "scan": (_bool, False),
        "scan_re": (int, 50),
        "scan_im": (int, 50),
    },
    "logz": {
        "Ns": (_ints, [8, 16, 32, 64]),
        "beta_target": (float, 0.0),
        "ti_N": (int, 16),
        "ti_grid": (int, 5),
        "ti_sweeps": (int, 20_000),
    },
    "tolerances": {
        "ti": (float, 0.0),
        "jellium": (float, 1e-8),
    },
}


def _render(value):
    if isinstance(value, list):
        return " ".join(repr(v) if isinstance(v, float) else str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


class ExperimentConfig:
    """Validated configuration.

    Attributes
    ----------
    values : dict
        ``values[section][key]`` for every declared key, defaults included.
    """

    def __init__(self, values):
        self.values = values

    def __getitem__(self, section):
        return self.values[section]

    @classmethod
    def from_mapping(cls, raw):
        values = {}
        for sec in raw:
            if sec not in SCHEMA:
                raise ConfigError("unknown section", key_path=sec)
        for sec, keys in SCHEMA.items():
            given = dict(raw.get(sec, {}))
            for key in given:
                if key not in keys:
                    raise ConfigError("unknown key", key_path=f"{sec}.{key}")
            values[sec] = {}
            for key, (parse, default) in keys.items():
                if key in given:
                    try:
                        values[sec][key] = parse(given[key]) if isinstance(given[key], str) else _coerce(parse, given[key])
                    except (TypeError, ValueError) as exc:
                        raise ConfigError(str(exc), key_path=f"{sec}.{key}") from None
                else:
                    values[sec][key] = list(default) if isinstance(default, list) else default
        cfg = cls(values)
        cfg._check()
        return cfg

    @classmethod
    def from_text(cls, text):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        try:
            parser.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(f"unreadable configuration: {exc}") from None
        return cls.from_mapping({s: dict(parser[s]) for s in parser.sections()})

    @classmethod
    def load(cls, path):
        """Read an INI file, or the config snapshot inside a JSON manifest."""
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
        if text.lstrip().startswith("{"):
            try:
                data = json.loads(text)
                return cls.from_mapping(data["config"])
            except (KeyError, json.JSONDecodeError):
                raise ConfigError("JSON input is not a result manifest") from None
        return cls.from_text(text)

    def _check(self):
        g = self.values["gibbs"]
        for key in ("beta", "a"):
            if not g[key] > 0:
                raise ConfigError("must be positive", key_path=f"gibbs.{key}")
        if g["N"] < 1:
            raise ConfigError("must be at least 1", key_path="gibbs.N")
        s = self.values["sampler"]
        if s["thinning"] < 1:
            raise ConfigError("must be at least 1", key_path="sampler.thinning")
        if not 0.0 <= s["burn_in"] < 1.0:
            raise ConfigError("must lie in [0, 1)", key_path="sampler.burn_in")
        if s["chains"] < 1:
            raise ConfigError("must be at least 1", key_path="sampler.chains")
        if self.values["run"]["workers"] < 1:
            raise ConfigError("must be at least 1", key_path="run.workers")
        try:
            self.gibbs_params()
        except CoulombGasError as exc:
            raise ConfigError(str(exc), key_path="gibbs") from None

    def kernel(self):
        g = self.values["gibbs"]
        return {"Log1": lambda: KernelSpec.log1(), "Log2": lambda: KernelSpec.log2(),
                "Coul": lambda: KernelSpec.coulomb(g["d"]),
                "Riesz": lambda: KernelSpec.riesz(g["d"], g["s"])}[g["kernel"]]()

    def gibbs_params(self, beta=None, N=None):
        g = self.values["gibbs"]
        return GibbsParams(beta if beta is not None else g["beta"], N if N is not None else g["N"],
                           self.kernel(), PotentialSpec(g["a"]))

    def snapshot(self):
        """Resolved configuration as strings, the form hashed and stored."""
        return {sec: {k: _render(v) for k, v in keys.items()} for sec, keys in self.values.items()}

    def digest(self, length=10):
        """Hash of the snapshot; the output directory and worker count do not change results."""
        snap = self.snapshot()
        snap["run"] = {k: v for k, v in snap["run"].items() if k not in ("out", "workers")}
        blob = json.dumps(snap, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:length]


def _coerce(parse, value):
    if isinstance(value, list):
        return parse(" ".join(str(v) for v in value))
    return parse(str(value)) if parse in (_bool, _kernel_name) else parse(value)
