"""Problem files: one JSON document describing a system to analyze.

Schema (matrix literals are nested row-major arrays)::

    {
      "system": {"A": [[...]], "B": [[...]], "C": [[...]]},
      "perturbation": {"D": [[...]], "E": [[...]], "norm": "two", "S": [[...]]},
      "sector": {"Sigma1": [[...]], "Sigma2": [[...]]},      # at most one of
      "network": "relative/path.json",                        # these three
      "builtin_nonlinearity": "cubic_sine",
      "simulation": {"dt": 0.001, "horizon": 20.0, "x0": [...]},   # optional
      "sweep": {"deltas": [0.1, 0.2]}                              # optional
    }

A problem with none of sector/network/builtin describes a purely linear
perturbation analysis.  Bundled problems (the two worked examples) are
resolved by bare filename when the given path does not exist.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .errors import DimensionMismatchError, NonFiniteEntriesError, ProblemFormatError
from .ffnn import Ffnn, load_ffnn, sector_bound_ffnn
from .linalg import NormKind, as_matrix
from .radius import LtiSystem, PerturbationStructure, SectorBound
from .sim import BUILTIN_NONLINEARITIES, Nonlinearity, SimConfig

FIXTURE_PACKAGE = "lurestab.fixtures"


def fixture_path(name: str) -> Path:
    """Filesystem path of a bundled fixture file."""
    return Path(resources.files(FIXTURE_PACKAGE) / name)


def resolve_problem_path(path) -> Path:
    """Resolve a problem path, falling back to the bundled fixtures."""
    p = Path(path)
    if p.exists():
        return p
    if not p.is_absolute() and len(p.parts) == 1:
        bundled = fixture_path(p.name)
        if bundled.exists():
            return bundled
    raise ProblemFormatError("problem file not found", path=path)


@dataclass(frozen=True)
class Problem:
    """A parsed problem file plus the digest of its raw bytes."""

    system: LtiSystem
    pert: PerturbationStructure
    sector: SectorBound | None
    network: Ffnn | None
    network_path: str | None
    builtin: str | None
    sim_overrides: dict
    sweep_deltas: list[float] | None
    path: Path
    digest: str

    @property
    def nonlinearity_kind(self) -> str:
        if self.sector is not None:
            return "sector"
        if self.network is not None:
            return "network"
        if self.builtin is not None:
            return "builtin"
        return "none"

    def analysis_sector(self) -> SectorBound | None:
        """The sector driving radius/certification for this problem.

        Sector problems carry it explicitly; network problems derive it
        from the weight-product bound; builtin nonlinearities carry a
        declared design sector.
        """
        if self.sector is not None:
            return self.sector
        if self.network is not None:
            return sector_bound_ffnn(self.network)
        if self.builtin is not None:
            spec = BUILTIN_NONLINEARITIES[self.builtin]
            if self.system.m != self.system.p:
                raise DimensionMismatchError(
                    "an elementwise nonlinearity needs matching input/output counts"
                )
            eye = np.eye(self.system.m)
            return SectorBound(spec.sector_lower * eye, spec.sector_upper * eye)
        return None

    def loop_nonlinearity(self) -> Nonlinearity | None:
        """The feedback used in simulations.

        Sector problems simulate the worst case, i.e. the constant upper
        gain; network problems evaluate the network; builtin problems call
        the named function.
        """
        if self.network is not None:
            return Nonlinearity.network(self.network, name="network")
        if self.builtin is not None:
            return BUILTIN_NONLINEARITIES[self.builtin].make()
        if self.sector is not None:
            return Nonlinearity.gain(self.sector.upper, name="upper_sector_gain")
        return None

    def sim_config(self, dt=None, horizon=None) -> SimConfig:
        kwargs = dict(self.sim_overrides)
        if dt is not None:
            kwargs["dt"] = dt
        if horizon is not None:
            kwargs["horizon"] = horizon
        return SimConfig(**kwargs)


def _get(data: dict, key: str, context: str, path) -> object:
    if key not in data:
        raise ProblemFormatError(f"{context}: missing required field {key!r}", path=path)
    return data[key]


def _matrix(data: dict, key: str, context: str, path) -> np.ndarray:
    raw = _get(data, key, context, path)
    rows = raw if isinstance(raw, list) else None
    if rows is not None and rows and all(isinstance(r, list) for r in rows):
        lengths = {len(r) for r in rows}
        if len(lengths) > 1:
            raise ProblemFormatError(
                f"{context}.{key}: ragged rows (lengths {sorted(lengths)})", path=path
            )
    try:
        return as_matrix(raw, f"{context}.{key}")
    except (DimensionMismatchError, NonFiniteEntriesError) as exc:
        raise ProblemFormatError(str(exc), path=path) from None


def load_problem(path, norm_override: str | None = None) -> Problem:
    """Parse and validate a problem file.

    ``norm_override`` replaces the file's perturbation norm (the CLI's
    ``--norm`` flag).
    """
    resolved = resolve_problem_path(path)
    raw = resolved.read_bytes()
    digest = hashlib.sha256(raw).hexdigest()
    try:
        data = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ProblemFormatError(f"invalid JSON: {exc.msg}", path=resolved, line=exc.lineno) from None
    if not isinstance(data, dict):
        raise ProblemFormatError("top level must be a JSON object", path=resolved)

    sys_data = _get(data, "system", "problem", resolved)
    system = _build_system(sys_data, resolved)
    pert = _build_perturbation(
        _get(data, "perturbation", "problem", resolved), resolved, norm_override
    )
    try:
        pert.check_dims(system.n)
    except DimensionMismatchError as exc:
        raise ProblemFormatError(str(exc), path=resolved) from None

    present = [k for k in ("sector", "network", "builtin_nonlinearity") if k in data]
    if len(present) > 1:
        raise ProblemFormatError(
            "at most one of sector/network/builtin_nonlinearity may be present; got "
            + ", ".join(present),
            path=resolved,
        )

    sector = None
    network = None
    network_path = None
    builtin = None
    if "sector" in data:
        sec = data["sector"]
        lower = _matrix(sec, "Sigma1", "sector", resolved)
        upper = _matrix(sec, "Sigma2", "sector", resolved)
        try:
            sector = SectorBound(lower, upper)
        except Exception as exc:
            raise ProblemFormatError(f"sector: {exc}", path=resolved) from None
        if sector.lower.shape != (system.m, system.p):
            raise ProblemFormatError(
                f"sector: must be {system.m}x{system.p}, got {sector.lower.shape}",
                path=resolved,
            )
    elif "network" in data:
        network_path = str(data["network"])
        net_file = Path(network_path)
        if not net_file.is_absolute():
            net_file = resolved.parent / net_file
        network = load_ffnn(net_file)
        if network.input_dim != system.p or network.output_dim != system.m:
            raise ProblemFormatError(
                f"network maps {network.input_dim} -> {network.output_dim}, "
                f"but the plant needs {system.p} -> {system.m}",
                path=resolved,
            )
    elif "builtin_nonlinearity" in data:
        builtin = str(data["builtin_nonlinearity"])
        if builtin not in BUILTIN_NONLINEARITIES:
            raise ProblemFormatError(
                f"unknown builtin nonlinearity {builtin!r}; available: "
                + ", ".join(sorted(BUILTIN_NONLINEARITIES)),
                path=resolved,
            )

    sim_overrides = {}
    if "simulation" in data:
        sim = data["simulation"]
        if not isinstance(sim, dict):
            raise ProblemFormatError("simulation: must be an object", path=resolved)
        for key in ("dt", "horizon"):
            if key in sim:
                sim_overrides[key] = float(sim[key])
        if "x0" in sim:
            sim_overrides["x0"] = np.asarray(sim["x0"], dtype=float)
        unknown = set(sim) - {"dt", "horizon", "x0"}
        if unknown:
            raise ProblemFormatError(
                f"simulation: unknown field(s) {sorted(unknown)}", path=resolved
            )

    sweep_deltas = None
    if "sweep" in data:
        sw = data["sweep"]
        if not isinstance(sw, dict) or "deltas" not in sw:
            raise ProblemFormatError("sweep: must be an object with a 'deltas' list", path=resolved)
        sweep_deltas = [float(d) for d in sw["deltas"]]

    return Problem(
        system=system,
        pert=pert,
        sector=sector,
        network=network,
        network_path=network_path,
        builtin=builtin,
        sim_overrides=sim_overrides,
        sweep_deltas=sweep_deltas,
        path=resolved,
        digest=digest,
    )


def _build_system(data, path) -> LtiSystem:
    if not isinstance(data, dict):
        raise ProblemFormatError("system: must be an object", path=path)
    a = _matrix(data, "A", "system", path)
    b = _matrix(data, "B", "system", path)
    c = _matrix(data, "C", "system", path)
    try:
        return LtiSystem(a, b, c)
    except DimensionMismatchError as exc:
        raise ProblemFormatError(f"system: {exc}", path=path) from None


def _build_perturbation(data, path, norm_override) -> PerturbationStructure:
    if not isinstance(data, dict):
        raise ProblemFormatError("perturbation: must be an object", path=path)
    d = _matrix(data, "D", "perturbation", path)
    e = _matrix(data, "E", "perturbation", path)
    norm_name = norm_override or data.get("norm", "two")
    try:
        norm = NormKind.from_name(norm_name)
    except ValueError as exc:
        raise ProblemFormatError(f"perturbation: {exc}", path=path) from None
    schur = None
    if "S" in data:
        schur = _matrix(data, "S", "perturbation", path)
        norm = NormKind.MAX_ABS if norm_override is None else norm
    try:
        return PerturbationStructure(d=d, e=e, norm=norm, schur_scale=schur)
    except (ValueError, DimensionMismatchError) as exc:
        raise ProblemFormatError(f"perturbation: {exc}", path=path) from None
