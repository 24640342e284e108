"""Run configuration: strict INI-style files, validated before any compute.

Sections and keys (dotted names in docs map to section/key):

    [obstacle]            microstructure 0; more via [obstacle.1], [obstacle.2], ...
    kind = square|disk|polygon
    center = 0.5, 0.5     (square, disk)
    side = 0.5            (square)     radius = 0.25  (disk)
    vertices = x,y; x,y; x,y           (polygon)

    [layout]              optional; omitted = whole domain, microstructure 0
    split_axis = 1|2
    split_value = 0.5
    micro_ids = 0, 1      (below, above; a single id = whole domain)

    [run]                 eps = 1/8 | 0.125;  n_per_cell = 16
    [force]               fx = sin(pi*x2);  fy = 0
    [solver]              tol = 1e-8;  max_iter = 10000
    [sweep]               eps_list = 1/4, 1/8, 1/16;  threads = 1
    [output]              dir = out   (overridable via PERMLAB_OUTDIR)

Unknown sections or keys are rejected.  Force components are closed-form
expressions in x1, x2 with the usual math functions, evaluated on arrays.
"""

from __future__ import annotations

import ast
import configparser
import hashlib
import os
import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError
from .geometry import AxisSquare, Disk, Layout, ObstacleSpec, Polygon

_ALLOWED_KEYS = {
    "obstacle": {"kind", "center", "side", "radius", "vertices"},
    "layout": {"split_axis", "split_value", "micro_ids"},
    "run": {"eps", "n_per_cell"},
    "force": {"fx", "fy"},
    "solver": {"tol", "max_iter"},
    "sweep": {"eps_list", "threads"},
    "output": {"dir"},
}

_FORCE_NAMES = {
    "pi": np.pi,
    "sin": np.sin,
    "cos": np.cos,
    "tan": np.tan,
    "exp": np.exp,
    "sqrt": np.sqrt,
    "abs": np.abs,
}


class ForceExpr:
    """Closed-form force component f(x1, x2) compiled from a config string."""

    def __init__(self, text: str):
        self.text = text.strip()
        try:
            tree = ast.parse(self.text, mode="eval")
        except SyntaxError as exc:
            raise ConfigError(f"cannot parse force expression {text!r}: {exc}") from exc
        allowed = set(_FORCE_NAMES) | {"x1", "x2"}
        for node in ast.walk(tree):
            if isinstance(node, ast.Name) and node.id not in allowed:
                raise ConfigError(f"unknown name {node.id!r} in force expression {text!r}")
            if isinstance(node, (ast.Call,)) and not isinstance(node.func, ast.Name):
                raise ConfigError(f"only direct function calls allowed in {text!r}")
            if isinstance(node, (ast.Attribute, ast.Subscript, ast.Lambda)):
                raise ConfigError(f"unsupported syntax in force expression {text!r}")
        self._code = compile(tree, "<force>", "eval")

    def __call__(self, x1, x2):
        env = dict(_FORCE_NAMES)
        env["x1"] = x1
        env["x2"] = x2
        return eval(self._code, {"__builtins__": {}}, env)  # noqa: S307 - vetted names


@dataclass
class RunConfig:
    obstacles: tuple[ObstacleSpec, ...]
    layout: Layout
    eps: float
    n_per_cell: int
    fx: ForceExpr
    fy: ForceExpr
    tol: float
    max_iter: int
    eps_list: tuple[float, ...]
    threads: int
    out_dir: str
    sha256: str = ""

    def force(self):
        fx, fy = self.fx, self.fy
        def f(x, y):
            one = np.ones_like(np.asarray(x, dtype=float))
            return (np.asarray(fx(x, y), dtype=float) * one,
                    np.asarray(fy(x, y), dtype=float) * one)
        return f

    def micro_count(self) -> int:
        return 1 + max(self.layout.micro_id(i) for i in range(self.layout.count))


def _parse_eps(text: str) -> float:
    text = text.strip()
    m = re.fullmatch(r"1\s*/\s*(\d+)", text)
    if m:
        return 1.0 / int(m.group(1))
    try:
        return float(text)
    except ValueError as exc:
        raise ConfigError(f"cannot parse eps value {text!r}") from exc


def _parse_pair(text: str, what: str) -> tuple[float, float]:
    parts = [p.strip() for p in text.split(",")]
    if len(parts) != 2:
        raise ConfigError(f"{what} needs two comma-separated numbers, got {text!r}")
    return float(parts[0]), float(parts[1])


def _parse_obstacle(section) -> ObstacleSpec:
    kind = section.get("kind")
    if kind is None:
        raise ConfigError("missing key obstacle.kind")
    kind = kind.strip().lower()
    if kind == "square":
        if "side" not in section:
            raise ConfigError("square obstacle needs obstacle.side")
        return AxisSquare(_parse_pair(section.get("center", "0.5, 0.5"), "obstacle.center"),
                          float(section["side"]))
    if kind == "disk":
        if "radius" not in section:
            raise ConfigError("disk obstacle needs obstacle.radius")
        return Disk(_parse_pair(section.get("center", "0.5, 0.5"), "obstacle.center"),
                    float(section["radius"]))
    if kind == "polygon":
        if "vertices" not in section:
            raise ConfigError("polygon obstacle needs obstacle.vertices")
        verts = []
        for chunk in section["vertices"].split(";"):
            verts.append(_parse_pair(chunk, "obstacle.vertices entry"))
        return Polygon(tuple(verts))
    raise ConfigError(f"unknown obstacle.kind {kind!r}")


def load_config(path) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path, encoding="utf-8") as fh:
            raw = fh.read()
        parser.read_string(raw)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config {path}: {exc}") from exc

    obstacles: dict[int, ObstacleSpec] = {}
    for name in parser.sections():
        base = name.split(".")[0]
        if base not in _ALLOWED_KEYS:
            raise ConfigError(f"unknown config section [{name}]")
        if base == "obstacle":
            parts = name.split(".")
            if len(parts) == 1:
                idx = 0
            elif len(parts) == 2 and parts[1].isdigit():
                idx = int(parts[1])
            else:
                raise ConfigError(f"bad obstacle section name [{name}]")
            if idx in obstacles:
                raise ConfigError(f"duplicate obstacle index {idx}")
            obstacles[idx] = _parse_obstacle(parser[name])
        elif "." in name:
            raise ConfigError(f"unknown config section [{name}]")
        for key in parser[name]:
            if key not in _ALLOWED_KEYS[base]:
                raise ConfigError(f"unknown key {base}.{key}")

    if 0 not in obstacles:
        raise ConfigError("missing [obstacle] section (microstructure 0)")
    obs_list = []
    for idx in range(len(obstacles)):
        if idx not in obstacles:
            raise ConfigError(f"obstacle indices must be contiguous; missing {idx}")
        obs_list.append(obstacles[idx])

    lay_sec = parser["layout"] if parser.has_section("layout") else {}
    ids_text = lay_sec.get("micro_ids", "0")
    ids = [int(p) for p in ids_text.split(",") if p.strip() != ""]
    if "split_axis" in lay_sec or "split_value" in lay_sec:
        if "split_axis" not in lay_sec or "split_value" not in lay_sec:
            raise ConfigError("layout split needs both split_axis and split_value")
        if len(ids) != 2:
            raise ConfigError("a split layout needs exactly two micro_ids")
        layout = Layout.half_split(int(lay_sec["split_axis"]), float(lay_sec["split_value"]),
                                   ids[0], ids[1])
    else:
        if len(ids) != 1:
            raise ConfigError("a whole-domain layout needs exactly one micro_id")
        layout = Layout.whole(ids[0])
    for mid in ids:
        if mid >= len(obs_list):
            raise ConfigError(f"micro id {mid} has no [obstacle.{mid}] section")

    run_sec = parser["run"] if parser.has_section("run") else {}
    eps = _parse_eps(run_sec.get("eps", "1/8"))
    n_per_cell = int(run_sec.get("n_per_cell", "16"))

    force_sec = parser["force"] if parser.has_section("force") else {}
    fx = ForceExpr(force_sec.get("fx", "sin(pi*x2)"))
    fy = ForceExpr(force_sec.get("fy", "0"))

    solver_sec = parser["solver"] if parser.has_section("solver") else {}
    tol = float(solver_sec.get("tol", "1e-8"))
    max_iter = int(solver_sec.get("max_iter", "10000"))

    sweep_sec = parser["sweep"] if parser.has_section("sweep") else {}
    eps_list = tuple(_parse_eps(p) for p in sweep_sec.get("eps_list", "").split(",")
                     if p.strip() != "")
    threads = int(sweep_sec.get("threads", "1"))
    if threads < 1:
        raise ConfigError("sweep.threads must be at least 1")

    out_sec = parser["output"] if parser.has_section("output") else {}
    out_dir = os.environ.get("PERMLAB_OUTDIR", out_sec.get("dir", "out"))

    return RunConfig(
        obstacles=tuple(obs_list),
        layout=layout,
        eps=eps,
        n_per_cell=n_per_cell,
        fx=fx,
        fy=fy,
        tol=tol,
        max_iter=max_iter,
        eps_list=eps_list,
        threads=threads,
        out_dir=out_dir,
        sha256=hashlib.sha256(raw.encode("utf-8")).hexdigest(),
    )
