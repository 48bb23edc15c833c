"""Run configuration: a small key=value text format and its typed view.

The on-disk grammar is deliberately plain: optional ``[section]`` headers,
``key = value`` assignments (split on the first ``=``), blank lines and
``#`` comments.  :class:`Config` stores the raw string mapping and
round-trips through :meth:`Config.serialize`;  :class:`RunConfig` is the
typed, validated view the command line front-end consumes.
"""

from dataclasses import dataclass, field

from .problems import get_problem

_RUN_KEYS = ("problem", "M", "pipeline", "velocity", "flux", "guess",
             "cfl", "dt", "t_final", "seed")
_GRID_KEYS = ("nx", "ny")
_OUTPUT_KEYS = ("dir", "prefix", "snapshots", "cut_axis", "cut_coord",
                "variables")

# section each bare --set key belongs to ([system] keys are free-form and
# must be addressed explicitly)
_KEY_SECTION = {**{k: "run" for k in _RUN_KEYS},
                **{k: "grid" for k in _GRID_KEYS},
                **{k: "output" for k in _OUTPUT_KEYS}}

_PIPELINES = ("prim", "cons")
_FLUXES = ("rusanov", "osher")
_GUESSES = ("constant", "muscl-cn", "adams-bashforth")
_VELOCITIES = ("v", "Wv")


class ConfigError(ValueError):
    """Malformed config text or an invalid field value."""


class Config:
    """Ordered mapping of sections to key -> string value."""

    def __init__(self, sections=None):
        self.sections = {}
        for name, kv in (sections or {}).items():
            self.sections[name] = dict(kv)

    # -- parsing / serialization ------------------------------------------

    @classmethod
    def parse(cls, text):
        cfg = cls()
        section = ""
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if line.startswith("["):
                if not line.endswith("]") or len(line) < 3:
                    raise ConfigError(f"line {lineno}: bad section header "
                                      f"{line!r}")
                section = line[1:-1].strip()
                cfg.sections.setdefault(section, {})
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}: expected key = value, "
                                  f"got {line!r}")
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if not key:
                raise ConfigError(f"line {lineno}: empty key")
            kv = cfg.sections.setdefault(section, {})
            if key in kv:
                raise ConfigError(f"line {lineno}: duplicate key "
                                  f"{key!r} in section [{section}]")
            kv[key] = value
        return cfg

    @classmethod
    def from_file(cls, path):
        with open(path, "r", encoding="ascii") as fh:
            return cls.parse(fh.read())

    def serialize(self):
        out = []
        for name, kv in self.sections.items():
            if not kv and name:
                out.append(f"[{name}]")
                out.append("")
                continue
            if name:
                out.append(f"[{name}]")
            for key, value in kv.items():
                out.append(f"{key} = {value}")
            out.append("")
        return "\n".join(out)

    # -- access -------------------------------------------------------------

    def get(self, section, key, default=None):
        return self.sections.get(section, {}).get(key, default)

    def set(self, section, key, value):
        self.sections.setdefault(section, {})[key] = str(value)

    def apply_set(self, assignment):
        """Apply one ``--set`` override: ``[section.]key=value``."""
        if "=" not in assignment:
            raise ConfigError(f"--set needs key=value, got {assignment!r}")
        key, _, value = assignment.partition("=")
        key, value = key.strip(), value.strip()
        if "." in key:
            section, _, key = key.partition(".")
        elif key in _KEY_SECTION:
            section = _KEY_SECTION[key]
        else:
            hits = [name for name, kv in self.sections.items() if key in kv]
            if len(hits) != 1:
                raise ConfigError(f"--set key {key!r} is ambiguous; use "
                                  f"section.key")
            section = hits[0]
        if not key:
            raise ConfigError(f"--set needs a key, got {assignment!r}")
        self.set(section, key, value)

    def __eq__(self, other):
        return isinstance(other, Config) and \
            {k: v for k, v in self.sections.items() if v} == \
            {k: v for k, v in other.sections.items() if v}


def _typed(section, key, raw, conv):
    try:
        return conv(raw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None


def _floats(raw):
    return tuple(float(tok) for tok in raw.split())


@dataclass
class RunConfig:
    """Validated run parameters with problem-registry defaults filled in."""

    problem: str
    M: int
    pipeline: str
    velocity: str
    flux: str
    guess: str
    cfl: float
    dt: float = None
    t_final: float = None
    seed: int = None
    nx: int = None
    ny: int = None
    system_overrides: dict = field(default_factory=dict)
    outdir: str = "out"
    prefix: str = None
    snapshots: tuple = None
    cut_axis: str = None
    cut_coord: float = None
    variables: tuple = None

    @classmethod
    def from_config(cls, cfg):
        name = cfg.get("run", "problem")
        if not name:
            raise ConfigError("missing required key [run] problem")
        try:
            prob = get_problem(name)
        except KeyError:
            raise ConfigError(f"unknown problem {name!r}") from None

        def run_key(key, default, conv):
            raw = cfg.get("run", key)
            return default if raw is None else _typed("run", key, raw, conv)

        rc = cls(
            problem=name,
            M=run_key("M", prob.default_M, int),
            pipeline=run_key("pipeline", "prim", str),
            velocity=run_key("velocity", "v", str),
            flux=run_key("flux", prob.default_flux, str),
            guess=run_key("guess", prob.default_guess, str),
            cfl=run_key("cfl", 0.5, float),
            dt=run_key("dt", None, float),
            t_final=run_key("t_final", prob.t_final, float),
            seed=run_key("seed", None, int),
            nx=_typed("grid", "nx", cfg.get("grid", "nx"), int)
            if cfg.get("grid", "nx") is not None else None,
            ny=_typed("grid", "ny", cfg.get("grid", "ny"), int)
            if cfg.get("grid", "ny") is not None else None,
            system_overrides={k: _typed("system", k, v, float)
                              for k, v in
                              cfg.sections.get("system", {}).items()},
            outdir=cfg.get("output", "dir", "out"),
            prefix=cfg.get("output", "prefix", name),
            snapshots=_typed("output", "snapshots",
                             cfg.get("output", "snapshots"), _floats)
            if cfg.get("output", "snapshots") is not None else None,
            cut_axis=cfg.get("output", "cut_axis"),
            cut_coord=_typed("output", "cut_coord",
                             cfg.get("output", "cut_coord"), float)
            if cfg.get("output", "cut_coord") is not None else None,
            variables=tuple(cfg.get("output", "variables").split())
            if cfg.get("output", "variables") is not None else None,
        )
        rc.validate(prob)
        return rc

    def validate(self, prob=None):
        prob = get_problem(self.problem) if prob is None else prob
        if not 1 <= self.M <= 5:
            raise ConfigError(f"M must be in [1, 5], got {self.M}")
        if self.pipeline not in _PIPELINES:
            raise ConfigError(f"pipeline must be one of {_PIPELINES}, "
                              f"got {self.pipeline!r}")
        if self.flux not in _FLUXES:
            raise ConfigError(f"flux must be one of {_FLUXES}, "
                              f"got {self.flux!r}")
        if self.guess not in _GUESSES:
            raise ConfigError(f"guess must be one of {_GUESSES}, "
                              f"got {self.guess!r}")
        if self.velocity not in _VELOCITIES:
            raise ConfigError(f"velocity must be one of {_VELOCITIES}, "
                              f"got {self.velocity!r}")
        system = prob.system_name
        if self.flux == "osher" and system == "rmhd":
            raise ConfigError("osher flux is not available for rmhd")
        if self.velocity == "Wv" and system not in ("rhd", "rmhd"):
            raise ConfigError("velocity = Wv needs a relativistic system")
        if self.cfl <= 0.0:
            raise ConfigError(f"cfl must be positive, got {self.cfl}")
        if self.dt is not None and self.dt <= 0.0:
            raise ConfigError(f"dt must be positive, got {self.dt}")
        if self.t_final is not None and self.t_final < 0.0:
            raise ConfigError(f"t_final must be nonnegative, "
                              f"got {self.t_final}")
        if self.nx is not None and self.nx < 1:
            raise ConfigError(f"nx must be positive, got {self.nx}")
        if self.ny is not None and self.ny < 1:
            raise ConfigError(f"ny must be positive, got {self.ny}")
        if self.cut_axis is not None and self.cut_axis not in ("x", "y"):
            raise ConfigError(f"cut_axis must be x or y, "
                              f"got {self.cut_axis!r}")
        if prob.ndim == 1 and self.cut_axis is not None:
            raise ConfigError("cut_axis only applies to 2d problems")

    def to_config(self):
        cfg = Config()
        cfg.set("run", "problem", self.problem)
        cfg.set("run", "M", self.M)
        cfg.set("run", "pipeline", self.pipeline)
        cfg.set("run", "velocity", self.velocity)
        cfg.set("run", "flux", self.flux)
        cfg.set("run", "guess", self.guess)
        cfg.set("run", "cfl", repr(self.cfl))
        for key in ("dt", "t_final"):
            val = getattr(self, key)
            if val is not None:
                cfg.set("run", key, repr(val))
        if self.seed is not None:
            cfg.set("run", "seed", self.seed)
        for key, val in self.system_overrides.items():
            cfg.set("system", key, repr(val))
        for key in ("nx", "ny"):
            val = getattr(self, key)
            if val is not None:
                cfg.set("grid", key, val)
        cfg.set("output", "dir", self.outdir)
        cfg.set("output", "prefix", self.prefix)
        if self.snapshots is not None:
            cfg.set("output", "snapshots",
                    " ".join(repr(t) for t in self.snapshots))
        if self.cut_axis is not None:
            cfg.set("output", "cut_axis", self.cut_axis)
        if self.cut_coord is not None:
            cfg.set("output", "cut_coord", repr(self.cut_coord))
        if self.variables is not None:
            cfg.set("output", "variables", " ".join(self.variables))
        return cfg

    def setup(self):
        """Build (problem, solver, Q0) from this configuration."""
        prob = get_problem(self.problem)
        solver, Q0 = prob.setup(
            M=self.M, nx=self.nx, ny=self.ny, pipeline=self.pipeline,
            flux=self.flux, guess=self.guess, cfl=self.cfl,
            fixed_dt=self.dt, velocity=self.velocity,
            **self.system_overrides)
        return prob, solver, Q0
