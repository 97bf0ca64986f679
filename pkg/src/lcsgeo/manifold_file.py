"""Reader for the sectioned manifold description files, and point sampling.

Format::

    # comment
    [manifold]
    name = "lcs3-example"
    dim = 3
    coords = "x, y, z"
    domain = "z"              # comma-separated, each must stay nonzero

    [parameters]              # optional named constants usable in expressions
    c = 1

    [metric]
    g11 = "z^(-4)"            # or g_1_1; unspecified off-diagonal entries are 0

    [frame]                   # optional
    E1 = "z^2, 0, 0"
    signature = "1, 1, -1"

    [structure]               # optional
    xi = "0, 0, 1"
    alpha = "-2/z"

    [soliton]                 # optional
    lambda = "2*(z-5)/z^2"
    mu = "2*(z+1)/z^2"
    f = "-z"
    kind = "eta-ricci"

    [sampling]                # optional
    z = "1, 4"                # range per coordinate
    grid = 3
    count = 8
    seed = 0

The standard ``configparser`` is not used because every semantic error
(index range, unknown coordinate) must point at a line of the file.
"""

from __future__ import annotations

import itertools
import re
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Mapping

import numpy as np

from .expr import Expr, ExprSyntaxError, parse
from .geometry import ChartManifold, GeometryError, Point
from .soliton import ETA_EINSTEIN, ETA_RICCI, SolitonParams

SECTIONS = ("manifold", "parameters", "metric", "frame", "structure", "soliton", "sampling")

ALIASES = {"gaussian3": "euclidean3-gaussian", "euclidean3": "euclidean3-gaussian"}


class ManifoldFileError(ValueError):
    def __init__(self, message: str, path: str = "<string>", line: int | None = None):
        where = f"{path}:{line}" if line is not None else path
        super().__init__(f"{where}: {message}")
        self.path = path
        self.line = line


class SamplingError(ValueError):
    pass


@dataclass
class Sampling:
    ranges: dict[str, tuple[float, float]] = field(default_factory=dict)
    grid: int = 3
    count: int = 8
    seed: int = 0


@dataclass
class LoadedManifold:
    manifold: ChartManifold
    xi: tuple[Expr, ...] | None
    alpha: Expr | None
    params: SolitonParams | None
    sampling: Sampling
    path: str


_LINE = re.compile(r"^\s*([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.*?)\s*$")
_SECTION = re.compile(r"^\s*\[\s*([A-Za-z_]+)\s*\]\s*$")


def _strip_value(raw: str) -> str:
    raw = raw.strip()
    if raw[:1] in ("'", '"'):
        end = raw.find(raw[0], 1)
        if end > 0:
            return raw[1:end]
    return raw.split("#", 1)[0].rstrip()


def _read_sections(text: str, path: str) -> dict[str, dict[str, tuple[str, int]]]:
    sections: dict[str, dict[str, tuple[str, int]]] = {}
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        m = _SECTION.match(line)
        if m:
            current = m.group(1).lower()
            if current not in SECTIONS:
                raise ManifoldFileError(f"unknown section [{current}]", path, lineno)
            if current in sections:
                raise ManifoldFileError(f"duplicate section [{current}]", path, lineno)
            sections[current] = {}
            continue
        m = _LINE.match(line)
        if not m:
            raise ManifoldFileError(f"cannot parse line {stripped!r}", path, lineno)
        if current is None:
            raise ManifoldFileError("entry outside of any section", path, lineno)
        key = m.group(1)
        if key in sections[current]:
            raise ManifoldFileError(f"duplicate key {key!r}", path, lineno)
        sections[current][key] = (_strip_value(m.group(2)), lineno)
    return sections


def _split(value: str) -> list[str]:
    return [v.strip() for v in value.split(",") if v.strip()]


def _number(value: str, path: str, line: int) -> Fraction:
    try:
        return Fraction(value)
    except (ValueError, ZeroDivisionError):
        raise ManifoldFileError(f"expected a number, got {value!r}", path, line) from None


def _expr(value: str, coords, constants, path: str, line: int) -> Expr:
    try:
        return parse(value, coords=coords, constants=constants)
    except ExprSyntaxError as exc:
        raise ManifoldFileError(str(exc), path, line) from None


def _metric_index(key: str, dim: int, path: str, line: int) -> tuple[int, int]:
    m = re.fullmatch(r"g_(\d+)_(\d+)", key) or re.fullmatch(r"g(\d)(\d)", key)
    if not m:
        raise ManifoldFileError(f"metric key {key!r} must look like g12 or g_1_2", path, line)
    i, j = int(m.group(1)), int(m.group(2))
    if not (1 <= i <= dim and 1 <= j <= dim):
        raise ManifoldFileError(f"metric index ({i},{j}) out of range 1..{dim}", path, line)
    return i - 1, j - 1


def loads(text: str, path: str = "<string>", parameters: Mapping[str, float] | None = None) -> LoadedManifold:
    """Parse a manifold description. ``parameters`` override the file's [parameters]."""
    sec = _read_sections(text, path)
    if "manifold" not in sec:
        raise ManifoldFileError("missing [manifold] section", path)
    man = sec["manifold"]
    for key in ("name", "dim", "coords"):
        if key not in man:
            raise ManifoldFileError(f"[manifold] needs {key!r}", path)
    name = man["name"][0]
    coords = _split(man["coords"][0])
    dim_val, dim_line = man["dim"]
    try:
        dim = int(dim_val)
    except ValueError:
        raise ManifoldFileError(f"dim must be an integer, got {dim_val!r}", path, dim_line) from None
    if dim != len(coords):
        raise ManifoldFileError(f"dim = {dim} but {len(coords)} coordinates declared", path, dim_line)
    if len(set(coords)) != len(coords):
        raise ManifoldFileError("coordinate names must be distinct", path, man["coords"][1])

    constants: dict[str, Fraction] = {}
    for key, (value, line) in sec.get("parameters", {}).items():
        if key in coords:
            raise ManifoldFileError(f"parameter {key!r} shadows a coordinate", path, line)
        constants[key] = _number(value, path, line)
    for key, value in (parameters or {}).items():
        constants[key] = Fraction(value) if not isinstance(value, Fraction) else value

    def ex(value, line):
        return _expr(value, coords, constants, path, line)

    domain = []
    if "domain" in man:
        value, line = man["domain"]
        domain = [ex(d, line) for d in _split(value)]

    if "metric" not in sec:
        raise ManifoldFileError("missing [metric] section", path)
    entries: dict[tuple[int, int], tuple[Expr, int]] = {}
    for key, (value, line) in sec["metric"].items():
        i, j = _metric_index(key, dim, path, line)
        e = ex(value, line)
        for ij in ((i, j), (j, i)):
            if ij in entries and entries[ij][0] != e:
                raise ManifoldFileError(f"conflicting entries for g({i + 1},{j + 1})", path, line)
            entries[ij] = (e, line)
    metric = []
    for i in range(dim):
        if (i, i) not in entries:
            raise ManifoldFileError(f"missing diagonal metric entry g{i + 1}{i + 1}", path)
        metric.append([entries.get((i, j), (parse("0"), 0))[0] for j in range(dim)])

    frame = signature = None
    if "frame" in sec:
        fr = sec["frame"]
        frame = []
        for a in range(1, dim + 1):
            key = f"E{a}"
            if key not in fr:
                raise ManifoldFileError(f"[frame] needs {key}", path)
            value, line = fr[key]
            comps = _split(value)
            if len(comps) != dim:
                raise ManifoldFileError(f"{key} needs {dim} components, got {len(comps)}", path, line)
            frame.append([ex(c, line) for c in comps])
        if "signature" in fr:
            value, line = fr["signature"]
            signature = [int(_number(v, path, line)) for v in _split(value)]
            if len(signature) != dim:
                raise ManifoldFileError("signature length differs from dim", path, line)
        extra = set(fr) - {f"E{a}" for a in range(1, dim + 1)} - {"signature"}
        if extra:
            key = sorted(extra)[0]
            raise ManifoldFileError(f"unknown frame key {key!r}", path, fr[key][1])

    try:
        M = ChartManifold(name, coords, metric, domain=domain, frame=frame, signature=signature)
    except GeometryError as exc:
        raise ManifoldFileError(str(exc), path) from None

    xi = alpha = None
    if "structure" in sec:
        st = sec["structure"]
        if "xi" not in st:
            raise ManifoldFileError("[structure] needs xi", path)
        value, line = st["xi"]
        comps = _split(value)
        if len(comps) != dim:
            raise ManifoldFileError(f"xi needs {dim} components", path, line)
        xi = tuple(ex(c, line) for c in comps)
        if "alpha" in st:
            alpha = ex(*st["alpha"])

    params = None
    if "soliton" in sec:
        so = sec["soliton"]
        lam = ex(*so["lambda"]) if "lambda" in so else None
        mu = ex(*so["mu"]) if "mu" in so else None
        f = ex(*so["f"]) if "f" in so else None
        kind = so.get("kind", (ETA_RICCI, 0))
        if kind[0] not in (ETA_RICCI, ETA_EINSTEIN):
            raise ManifoldFileError(f"kind must be {ETA_RICCI} or {ETA_EINSTEIN}", path, kind[1])
        params = SolitonParams(lam, mu, f, kind[0])

    sampling = Sampling()
    for key, (value, line) in sec.get("sampling", {}).items():
        if key in coords:
            parts = _split(value)
            if len(parts) != 2:
                raise ManifoldFileError(f"range for {key} must be 'lo, hi'", path, line)
            lo, hi = (float(_number(v, path, line)) for v in parts)
            if lo > hi:
                raise ManifoldFileError(f"empty range for {key}: {lo} > {hi}", path, line)
            sampling.ranges[key] = (lo, hi)
        elif key in ("grid", "count", "seed"):
            setattr(sampling, key, int(_number(value, path, line)))
        else:
            raise ManifoldFileError(f"unknown sampling key {key!r}", path, line)
    return LoadedManifold(M, xi, alpha, params, sampling, path)


def fixture_names() -> list[str]:
    root = resources.files("lcsgeo") / "fixtures"
    return sorted(p.name[: -len(".ini")] for p in root.iterdir() if p.name.endswith(".ini"))


def resolve(path: str | Path) -> str | Path:
    """A file path, or ``fixtures/<name>`` / ``<name>`` for a bundled fixture."""
    p = Path(path)
    if p.is_file():
        return p
    name = p.name[:-4] if p.name.endswith(".ini") else p.name
    name = ALIASES.get(name, name)
    if p.parent in (Path("."), Path("fixtures")) and name in fixture_names():
        return name
    raise FileNotFoundError(f"no manifold file or bundled fixture named {str(path)!r}")


def load_manifold(path: str | Path, parameters: Mapping[str, float] | None = None) -> LoadedManifold:
    target = resolve(path)
    if isinstance(target, Path):
        return loads(target.read_text(encoding="utf-8"), str(target), parameters)
    text = (resources.files("lcsgeo") / "fixtures" / f"{target}.ini").read_text(encoding="utf-8")
    return loads(text, f"fixtures/{target}", parameters)


def sample_points(
    M: ChartManifold,
    sampling: Sampling,
    seed: int | None = None,
    count: int | None = None,
    ranges: Mapping[str, tuple[float, float]] | None = None,
) -> list[Point]:
    """``grid^dim`` evenly spaced points plus ``count`` uniform random ones.

    Raises :class:`SamplingError` if a range is empty or missing, or if any
    sampled point comes within the margin of a domain constraint, or if a
    constraint changes sign across the sample (the box crosses its zero set).
    """
    rng_ranges = dict(sampling.ranges)
    rng_ranges.update(ranges or {})
    missing = [c for c in M.coords if c not in rng_ranges]
    if missing:
        raise SamplingError(f"no sampling range for {', '.join(missing)}")
    bounds = [rng_ranges[c] for c in M.coords]
    for c, (lo, hi) in zip(M.coords, bounds):
        if not lo <= hi:
            raise SamplingError(f"empty admissible region: range for {c} is [{lo}, {hi}]")
    axes = [np.linspace(lo, hi, sampling.grid) if sampling.grid > 1 else np.array([lo]) for lo, hi in bounds]
    pts = [tuple(float(v) for v in combo) for combo in itertools.product(*axes)]
    rng = np.random.default_rng(sampling.seed if seed is None else seed)
    k = sampling.count if count is None else count
    lo = np.array([b[0] for b in bounds])
    hi = np.array([b[1] for b in bounds])
    for row in rng.uniform(lo, hi, size=(k, M.n)):
        pts.append(tuple(float(v) for v in row))
    signs: dict[int, set] = {}
    for p in pts:
        env = M.env(p)
        for idx, (d, fn) in enumerate(zip(M.domain, M._domain_fns)):
            v = fn(env)
            if not abs(v) > 1e-8:
                raise SamplingError(f"constraint margin violated: {d} = {v:.3g} at {p}")
            signs.setdefault(idx, set()).add(v > 0)
    for idx, s in signs.items():
        if len(s) > 1:
            raise SamplingError(f"constraint margin violated: sample box straddles {M.domain[idx]} = 0")
    return pts
