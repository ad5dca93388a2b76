"""Grid sweeps over squeezing and displacement, plus reductions of the records.

A sweep evaluates the conditional preparation on a ``(gamma, xi)`` grid for
every transmission ``eta`` and detector outcome in the config.  Work is split
by grid column (one ``xi`` each):

1. A single-writer phase resolves ``d0``, looks up ``d1`` for each pending
   ``xi`` in the :class:`~fockprep.tame.D1Cache` and builds each displacement
   matrix exactly once.
2. Columns are evaluated, optionally in worker processes.  For a column the
   detector kernel is formed once per detector, loss is applied once per
   ``eta``, and each ``gamma`` costs only an elementwise product.
3. Finished columns are persisted under ``<out>.parts/`` so an interrupted
   sweep resumes where it stopped.  The final CSV is the union of all
   columns sorted by ``(gamma, xi, eta, detector)``, written with ``repr``
   floats, so it is byte-identical for any worker count.

CSV columns, in order::

    gamma, xi, eta, detector, probability, nonlinear_M,
    fidelity_0 .. fidelity_{T-1}, unnormalizable, cutoff_bias

``fidelity_i`` refers to ``targets[i]`` of the config, stored in the JSON
sidecar ``<out>.json`` together with the package version.  Missing values
(unnormalizable outcomes) are empty fields.
"""

from __future__ import annotations

import csv
import dataclasses
import hashlib
import io
import json
import logging
import math
import os
import shutil
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .circuit import (
    STANDARD_DETECTORS,
    detector_kernel,
    find_d0,
    kernel_with_loss,
    make_povm,
    parse_descriptor,
    prepare_from_kernel,
)
from .errors import NumericGuardError
from .metrics import DEFAULT_FRAME, edge_population, fidelity_qubit, nonlinear_variance
from .tame import D1Cache, TameConfig, tame_build

log = logging.getLogger(__name__)

ETA_PRESET = (0.80, 0.90, 0.99, 1.00)
DESK_POINTS = 101
FULL_POINTS = 1001
CUTOFF_BIAS_ABOVE = 1e-8


def default_thresholds() -> tuple[float, ...]:
    """``0.80, 0.81, ..., 0.99`` followed by ``0.999``."""
    return tuple(round(0.80 + 0.01 * i, 2) for i in range(20)) + (0.999,)


@dataclass(frozen=True)
class SweepConfig:
    """Everything that determines the content of a sweep.

    ``gamma_range`` and ``xi_range`` are ``(lo, hi, count)`` for inclusive
    equidistant grids.  ``d0 = None`` resolves the target dimension from the
    grid maxima with ``epsilon0``.  ``parallelism``, ``output_path`` and
    ``cache_path`` do not affect the records.
    """

    gamma_range: tuple[float, float, int] = (0.0, 1.0, FULL_POINTS)
    xi_range: tuple[float, float, int] = (0.0, 1.0, FULL_POINTS)
    etas: tuple[float, ...] = ETA_PRESET
    detectors: tuple[str, ...] = tuple(d.label for d in STANDARD_DETECTORS)
    d0: int | None = None
    epsilon0: float = 1e-13
    epsilon1: float = 1e-13
    targets: tuple[float, ...] = (math.pi / 3, math.pi / 6)
    bins: int = 200
    frame: float = DEFAULT_FRAME
    output_path: str = "sweep.csv"
    cache_path: str | None = None
    parallelism: int = 1

    def __post_init__(self):
        for name in ("gamma_range", "xi_range"):
            lo, hi, n = getattr(self, name)
            if int(n) != n or n < 2:
                raise ValueError(f"{name} needs at least 2 points, got {n}")
            if not lo <= hi:
                raise ValueError(f"{name} has lo > hi")
            object.__setattr__(self, name, (float(lo), float(hi), int(n)))
        if self.gamma_range[0] < 0:
            raise ValueError("squeezing must be nonnegative")
        if not self.etas:
            raise ValueError("need at least one transmission value")
        for e in self.etas:
            if not 0.0 <= e <= 1.0:
                raise ValueError(f"transmission {e} outside [0, 1]")
        if not self.detectors:
            raise ValueError("need at least one detector")
        labels = tuple(parse_descriptor(d).label for d in self.detectors)
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate detectors in config")
        object.__setattr__(self, "detectors", labels)
        object.__setattr__(self, "etas", tuple(float(e) for e in self.etas))
        object.__setattr__(self, "targets", tuple(float(t) for t in self.targets))
        if self.d0 is not None and self.d0 < 2:
            raise ValueError("d0 must be at least 2")
        if not (self.epsilon0 > 0 and self.epsilon1 > 0):
            raise ValueError("tolerances must be positive")
        if self.bins < 1:
            raise ValueError("bins must be positive")
        if self.parallelism < 1:
            raise ValueError("parallelism must be positive")

    @classmethod
    def desk(cls, **overrides) -> "SweepConfig":
        """The 101 x 101 preset over the unit square."""
        base = dict(gamma_range=(0.0, 1.0, DESK_POINTS), xi_range=(0.0, 1.0, DESK_POINTS))
        base.update(overrides)
        return cls(**base)

    def gammas(self) -> np.ndarray:
        return np.linspace(*self.gamma_range)

    def xis(self) -> np.ndarray:
        return np.linspace(*self.xi_range)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SweepConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        conv = dict(data)
        for k in ("gamma_range", "xi_range", "etas", "detectors", "targets"):
            if k in conv:
                conv[k] = tuple(conv[k])
        return cls(**conv)

    def content_key(self, d0: int) -> str:
        """Hash of the fields that determine the records."""
        d = self.to_dict()
        for k in ("output_path", "cache_path", "parallelism", "bins"):
            d.pop(k)
        d["d0"] = d0
        return hashlib.sha256(json.dumps(d, sort_keys=True).encode()).hexdigest()


@dataclass(frozen=True)
class SweepRecord:
    gamma: float
    xi: float
    eta: float
    detector: str
    probability: float
    nonlinear_M: float | None
    fidelities: tuple[float | None, ...] = field(default=())
    unnormalizable: bool = False
    cutoff_bias: bool = False

    def sort_key(self):
        return (self.gamma, self.xi, self.eta, self.detector)


def csv_header(n_targets: int) -> list[str]:
    return (
        ["gamma", "xi", "eta", "detector", "probability", "nonlinear_M"]
        + [f"fidelity_{i}" for i in range(n_targets)]
        + ["unnormalizable", "cutoff_bias"]
    )


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return repr(float(x))


def _opt(s: str) -> float | None:
    return None if s == "" else float(s)


def record_to_row(r: SweepRecord) -> list[str]:
    return [_fmt(v) for v in (r.gamma, r.xi, r.eta, r.detector, r.probability, r.nonlinear_M)] + [
        _fmt(f) for f in r.fidelities
    ] + [_fmt(r.unnormalizable), _fmt(r.cutoff_bias)]


def row_to_record(row: list[str]) -> SweepRecord:
    return SweepRecord(
        gamma=float(row[0]),
        xi=float(row[1]),
        eta=float(row[2]),
        detector=row[3],
        probability=float(row[4]),
        nonlinear_M=_opt(row[5]),
        fidelities=tuple(_opt(s) for s in row[6:-2]),
        unnormalizable=row[-2] == "1",
        cutoff_bias=row[-1] == "1",
    )


def _evaluate_column(
    xi: float,
    displacement: np.ndarray,
    gammas: np.ndarray,
    etas: tuple[float, ...],
    detectors: tuple[str, ...],
    targets: tuple[float, ...],
    frame: float,
) -> list[SweepRecord]:
    """All records of one grid column; a pure function of its arguments."""
    d0 = displacement.shape[0]
    out = []
    # one BLAS thread keeps results bitwise independent of the worker count
    with threadpool_limits(limits=1):
        for det in detectors:
            H = detector_kernel(displacement, make_povm(det, d0).weights)
            for eta in etas:
                K = kernel_with_loss(H, eta)
                for g in gammas:
                    res = prepare_from_kernel(K, float(g))
                    if res.unnormalizable:
                        out.append(SweepRecord(float(g), xi, eta, det, res.probability, None,
                                               (None,) * len(targets), True, False))
                        continue
                    try:
                        M = nonlinear_variance(res.rho, frame)[0]
                    except ValueError:
                        M = None
                    fids = tuple(fidelity_qubit(res.rho, t) for t in targets)
                    bias = edge_population(res.rho) > CUTOFF_BIAS_ABOVE
                    out.append(SweepRecord(float(g), xi, eta, det, res.probability, M,
                                           fids, False, bias))
    return out


def _column_task(args):
    return args[0], _evaluate_column(*args[1:])


@dataclass
class SweepStats:
    """Bookkeeping of one :func:`run_sweep` call."""

    d0: int = 0
    builds: int = 0
    columns_computed: int = 0
    columns_resumed: int = 0
    d1_by_xi: dict = field(default_factory=dict)


def resolve_d0(config: SweepConfig) -> int:
    if config.d0 is not None:
        return config.d0
    return find_d0(config.gamma_range[1], config.xi_range[1], config.epsilon0)


def _parts_dir(out: Path) -> Path:
    return out.with_name(out.name + ".parts")


def _write_atomic(path: Path, text: str) -> None:
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(text)
    tmp.replace(path)


def _rows_text(rows: list[list[str]]) -> str:
    buf = io.StringIO()
    csv.writer(buf, lineterminator="\n").writerows(rows)
    return buf.getvalue()


def run_sweep(config: SweepConfig, stats: SweepStats | None = None) -> list[SweepRecord]:
    """Run (or resume) a sweep and write the CSV and JSON sidecar.

    Returns the sorted records.  Pass a :class:`SweepStats` to observe how
    many displacement builds and columns were performed.

    Raises
    ------
    NoSolutionError
        If ``d0`` or some ``d1`` cannot be resolved.
    NumericGuardError
        If a displacement matrix has non-finite entries.
    """
    from . import __version__

    stats = stats if stats is not None else SweepStats()
    out = Path(config.output_path)
    d0 = resolve_d0(config)
    stats.d0 = d0
    key = config.content_key(d0)

    parts = _parts_dir(out)
    parts.mkdir(parents=True, exist_ok=True)
    stamp = parts / "config.sha256"
    if stamp.exists() and stamp.read_text().strip() != key:
        raise ValueError(f"{parts} holds columns of a different sweep; remove it to start over")
    _write_atomic(stamp, key + "\n")

    xis = config.xis()
    gammas = config.gammas()
    part_path = lambda j: parts / f"col_{j:05d}.csv"
    pending = [j for j in range(xis.size) if not part_path(j).exists()]
    stats.columns_resumed = xis.size - len(pending)

    # single-writer phase: d1 lookups and one TAME build per pending column
    cache = D1Cache(config.cache_path)
    tcfg = TameConfig(d0, config.epsilon1)
    tasks = []
    for j in pending:
        xi = float(xis[j])
        d1 = cache.lookup(xi, tcfg)
        D = tame_build(xi, d1, d0)
        stats.builds += 1
        stats.d1_by_xi[xi] = d1
        if not D.is_finite():
            raise NumericGuardError(f"displacement matrix for xi={xi} has non-finite entries")
        tasks.append((j, xi, np.array(D.entries), gammas, config.etas, config.detectors,
                      config.targets, config.frame))

    def persist(j, records):
        _write_atomic(part_path(j), _rows_text([record_to_row(r) for r in records]))
        stats.columns_computed += 1

    if config.parallelism == 1 or len(tasks) <= 1:
        for t in tasks:
            persist(*_column_task(t))
    else:
        with ProcessPoolExecutor(max_workers=config.parallelism) as pool:
            for j, records in pool.map(_column_task, tasks):
                persist(j, records)

    records = []
    for j in range(xis.size):
        with open(part_path(j), newline="") as fh:
            records.extend(row_to_record(r) for r in csv.reader(fh))
    records.sort(key=SweepRecord.sort_key)

    header = csv_header(len(config.targets))
    out.parent.mkdir(parents=True, exist_ok=True)
    _write_atomic(out, _rows_text([header] + [record_to_row(r) for r in records]))
    sidecar = {"version": __version__, "d0": d0, "config": config.to_dict(), "columns": header}
    _write_atomic(sidecar_path(out), json.dumps(sidecar, indent=1, sort_keys=True) + "\n")
    shutil.rmtree(parts)
    log.info("sweep wrote %d records to %s", len(records), out)
    return records


def sidecar_path(csv_path: str | os.PathLike) -> Path:
    p = Path(csv_path)
    return p.with_name(p.name + ".json")


def read_records(path: str | os.PathLike) -> tuple[list[SweepRecord], dict]:
    """Records of a sweep CSV and its sidecar (empty dict if absent)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    side = sidecar_path(path)
    meta = json.loads(side.read_text()) if side.exists() else {}
    return [row_to_record(r) for r in rows[1:]], meta


# Reductions ------------------------------------------------------------------


@dataclass(frozen=True)
class BinRow:
    """Max probability of one scenario within a bin.

    For ``nonlinear_M`` the bin is ``[lo, hi)`` (the last one closed); for
    fidelity ``lo`` is the threshold ``tau`` and ``hi`` is ``None``.
    """

    eta: float
    detector: str
    lo: float
    hi: float | None
    max_probability: float | None


def _scenarios(records):
    groups: dict[tuple[float, str], list[SweepRecord]] = {}
    for r in records:
        groups.setdefault((r.eta, r.detector), []).append(r)
    return dict(sorted(groups.items()))


def bin_reduce(
    records,
    metric: str = "nonlinear_M",
    bins: int = 200,
    target: int = 0,
    thresholds=None,
) -> list[BinRow]:
    """Maximal success probability per bin of a figure of merit.

    Parameters
    ----------
    metric : {"nonlinear_M", "fidelity"}
        ``nonlinear_M`` uses ``bins`` equal-width bins spanning the observed
        range over all records, so scenarios share bin edges.  ``fidelity``
        uses the cumulative selections ``F >= tau`` for each threshold.
    target : int
        Index of the fidelity target column.
    thresholds : sequence of float, optional
        Fidelity thresholds; defaults to :func:`default_thresholds`.
    """
    records = list(records)
    if not records:
        raise ValueError("no records to reduce")
    groups = _scenarios(records)
    rows = []
    if metric == "nonlinear_M":
        vals = [r.nonlinear_M for r in records if r.nonlinear_M is not None]
        if not vals:
            raise ValueError("no record carries a nonlinear_M value")
        lo, hi = min(vals), max(vals)
        n = bins if hi > lo else 1
        edges = np.linspace(lo, hi, n + 1) if hi > lo else np.array([lo, hi])
        for (eta, det), rs in groups.items():
            best = [None] * n
            for r in rs:
                if r.nonlinear_M is None:
                    continue
                k = min(int(np.searchsorted(edges, r.nonlinear_M, side="right")) - 1, n - 1)
                if best[k] is None or r.probability > best[k]:
                    best[k] = r.probability
            rows.extend(BinRow(eta, det, float(edges[k]), float(edges[k + 1]), best[k])
                        for k in range(n))
    elif metric == "fidelity":
        taus = default_thresholds() if thresholds is None else tuple(thresholds)
        for (eta, det), rs in groups.items():
            pairs = [(r.fidelities[target], r.probability) for r in rs
                     if r.fidelities and r.fidelities[target] is not None]
            for tau in taus:
                sel = [p for f, p in pairs if f >= tau]
                rows.append(BinRow(eta, det, float(tau), None, max(sel) if sel else None))
    else:
        raise ValueError(f"unknown metric {metric!r}")
    return rows


@dataclass(frozen=True)
class ImprovementRow:
    eta: float
    tau: float
    detector: str
    L: float | None


def relative_improvement(
    records, target: int = 0, baseline: str = "apd", thresholds=None
) -> list[ImprovementRow]:
    """``log10 P_det - log10 P_baseline`` of the fidelity reduction per threshold.

    ``L`` is ``None`` where either maximal probability is missing or zero.
    """
    records = list(records)
    baseline = parse_descriptor(baseline).label
    if not any(r.detector == baseline for r in records):
        raise ValueError(f"baseline detector {baseline} not present in records")
    table = bin_reduce(records, "fidelity", target=target, thresholds=thresholds)
    base = {(r.eta, r.lo): r.max_probability for r in table if r.detector == baseline}
    out = []
    for r in table:
        if r.detector == baseline or (r.eta, r.lo) not in base:
            continue
        pb, pd = base[(r.eta, r.lo)], r.max_probability
        L = math.log10(pd) - math.log10(pb) if pb and pd else None
        out.append(ImprovementRow(r.eta, r.lo, r.detector, L))
    return out
