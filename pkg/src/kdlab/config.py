"""Lab configuration files.

A config is a TOML document (or the ``config`` block of a JSON manifest
written by a previous run) with these sections::

    [teacher]        TeacherSpec fields
    [run]            steps, learning_rate, record_every, target_index,
                     active_set_threshold, init = {kind, std, seed}
    [mixture]        init_mean, init_std, min_std      (mixture command only)
    [output]         dir, densities
    objective = {...} or [[objectives]] tables          ObjectiveSpec fields

Precedence, lowest to highest: built-in defaults, ``$KDLAB_OUT`` (output
directory only), the config file, command-line flags.
"""

from __future__ import annotations

import json
import os
import re
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .distributions import TeacherSpec, teacher_from_dict
from .errors import ConfigError
from .objectives import ObjectiveSpec
from .toy_lab.fit import InitSpec, RunConfig
from .toy_lab.mixture import MixtureConfig

ENV_OUT = "KDLAB_OUT"
DEFAULT_OUT = "kdlab_out"

_SECTIONS = {"teacher", "run", "mixture", "output", "objective", "objectives"}
_RUN_KEYS = {"steps", "learning_rate", "record_every", "target_index", "active_set_threshold", "init"}
_MIXTURE_KEYS = {"init_mean", "init_std", "min_std"}
_OUTPUT_KEYS = {"dir", "densities"}


class LocatedConfigError(ConfigError):
    """A config error that knows where in the source file it happened."""

    def __init__(self, message, path=None, line=None):
        where = str(path) if path else "<config>"
        if line:
            where += f":{line}"
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class LabConfig:
    teacher: TeacherSpec
    objectives: list
    run: dict = field(default_factory=dict)
    mixture: dict = field(default_factory=dict)
    out_dir: Optional[str] = None
    densities: bool = True

    def run_config(self, objective: Optional[ObjectiveSpec] = None) -> RunConfig:
        kw = dict(self.run)
        init = kw.pop("init", None)
        cfg = RunConfig(teacher=self.teacher, objective=objective or self.objectives[0],
                        init=InitSpec(**init) if init else InitSpec(), **kw)
        cfg.validate()
        return cfg

    def mixture_config(self) -> MixtureConfig:
        kw = {k: v for k, v in self.run.items() if k in ("steps", "learning_rate", "record_every",
                                                        "active_set_threshold")}
        cfg = MixtureConfig(teacher=self.teacher, **kw, **self.mixture)
        cfg.validate()
        return cfg

    def to_dict(self) -> dict:
        teacher = {k: (list(v) if isinstance(v, tuple) else v) for k, v in asdict(self.teacher).items()}
        return {
            "teacher": teacher,
            "run": dict(self.run),
            "mixture": dict(self.mixture),
            "objectives": [o.to_dict() for o in self.objectives],
            "output": {"dir": self.out_dir, "densities": self.densities},
        }


def _find_line(text: str, section: Optional[str], key: Optional[str]) -> Optional[int]:
    """Best-effort line number of ``key`` inside ``[section]``."""
    if text is None:
        return None
    current = None
    for i, line in enumerate(text.splitlines(), 1):
        stripped = line.strip()
        header = re.match(r"^\[\[?\s*([\w.]+)\s*\]\]?", stripped)
        if header:
            current = header.group(1)
            if key is None and current == section:
                return i
            continue
        if key is not None and re.match(rf"^{re.escape(key)}\s*=", stripped):
            if section is None or current == section:
                return i
    return None


def parse_config(doc: dict, path=None, text: Optional[str] = None) -> LabConfig:
    """Validate a parsed config document into a :class:`LabConfig`."""

    def fail(msg, section=None, key=None):
        raise LocatedConfigError(msg, path, _find_line(text, section, key))

    unknown = set(doc) - _SECTIONS
    if unknown:
        key = sorted(unknown)[0]
        fail(f"unknown top-level key {key!r}", None, key)
    if "teacher" not in doc:
        fail("missing [teacher] section")
    try:
        teacher = teacher_from_dict(doc["teacher"])
    except ConfigError as exc:
        fail(str(exc), "teacher", _guess_key(str(exc), doc["teacher"]))

    if "objective" in doc and "objectives" in doc:
        fail("give either 'objective' or 'objectives', not both", None, "objective")
    raw_objs = doc.get("objectives", [doc["objective"]] if "objective" in doc else [])
    if isinstance(raw_objs, dict):
        raw_objs = [raw_objs]
    objectives = []
    for raw in raw_objs:
        try:
            objectives.append(ObjectiveSpec.from_dict(raw))
        except (ConfigError, TypeError) as exc:
            fail(str(exc), "objectives" if "objectives" in doc else None,
                 _guess_key(str(exc), raw) or "objective")

    run = dict(doc.get("run", {}))
    for key in sorted(set(run) - _RUN_KEYS):
        fail(f"unknown [run] key {key!r}", "run", key)
    if "init" in run:
        init = dict(run["init"])
        bad = set(init) - {f.name for f in fields(InitSpec)}
        if bad:
            fail(f"unknown init keys {sorted(bad)}", "run", "init")
        try:
            InitSpec(**init).validate()
        except ConfigError as exc:
            fail(str(exc), "run", "init")
        run["init"] = init

    mixture = dict(doc.get("mixture", {}))
    for key in sorted(set(mixture) - _MIXTURE_KEYS):
        fail(f"unknown [mixture] key {key!r}", "mixture", key)

    output = dict(doc.get("output", {}))
    for key in sorted(set(output) - _OUTPUT_KEYS):
        fail(f"unknown [output] key {key!r}", "output", key)

    cfg = LabConfig(teacher=teacher, objectives=objectives, run=run, mixture=mixture,
                    out_dir=output.get("dir"), densities=bool(output.get("densities", True)))
    try:
        if objectives:
            for o in objectives:
                cfg.run_config(o)
        else:
            cfg.run_config(ObjectiveSpec("rkl"))
    except (ConfigError, TypeError) as exc:
        fail(str(exc), "run", _guess_key(str(exc), run))
    return cfg


def _guess_key(message: str, section: dict) -> Optional[str]:
    for key in section:
        if key in message:
            return key
    return None


def load_config(path) -> LabConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    if path.suffix == ".json":
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise LocatedConfigError(exc.msg, path, exc.lineno) from None
        if isinstance(doc, dict) and "config" in doc:
            doc = doc["config"]
        doc = _drop_nulls(doc)
        return parse_config(doc, path, None)
    try:
        doc = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        m = re.search(r"line (\d+)", str(exc))
        raise LocatedConfigError(str(exc), path, int(m.group(1)) if m else None) from None
    return parse_config(doc, path, text)


def _drop_nulls(doc):
    if isinstance(doc, dict):
        return {k: _drop_nulls(v) for k, v in doc.items() if v is not None}
    if isinstance(doc, list):
        return [_drop_nulls(v) for v in doc]
    return doc


def apply_overrides(cfg: LabConfig, *, seed=None, objective=None, out=None, **hyper) -> LabConfig:
    """Fold command-line flags into ``cfg``.

    ``--objective`` replaces the objective list with a single entry built from
    the hyperparameter flags; without it, each hyperparameter flag updates the
    configured objectives that use it.
    """
    hyper = {k: v for k, v in hyper.items() if v is not None}
    if seed is not None:
        if not 0 <= seed < 2**64:
            raise ConfigError("--seed must be an unsigned 64-bit integer")
        cfg.teacher = replace(cfg.teacher, seed=seed)
        if "init" in cfg.run:
            cfg.run = {**cfg.run, "init": {**cfg.run["init"], "seed": seed}}
    if objective is not None:
        cfg.objectives = [ObjectiveSpec(objective, **hyper)]
    elif hyper:
        updated = []
        for o in cfg.objectives:
            d = o.to_dict()
            d.update({k: v for k, v in hyper.items() if k in d})
            updated.append(ObjectiveSpec.from_dict(d))
        cfg.objectives = updated
    if out is not None:
        cfg.out_dir = out
    if cfg.out_dir is None:
        cfg.out_dir = os.environ.get(ENV_OUT, DEFAULT_OUT)
    return cfg
