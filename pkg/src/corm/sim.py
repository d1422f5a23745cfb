"""Series simulation of CoRM draws and Monte Carlo validation of tail integrals.

Jumps of the directing process come from the Ferguson-Klass representation
z_i = U^-1(G_i / alpha(X)), G_i the arrival times of a unit-rate Poisson
process, so they are produced in decreasing order and truncation is a stopping
rule.  Every replication owns a counter-based Philox stream derived from
(seed, rep), which makes replications order independent.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import CormSpec, DirectingMeasure
from .errors import IllPosedSpec, TruncationBias, TruncationBudgetExceeded
from .integrability import Posedness, check_corm
from .quad import QuadConfig
from .tails import marginal_tail

_JUMPS, _SCORES, _LOCATIONS = 0, 1, 2


@dataclass(frozen=True)
class Truncation:
    """Stop at the first jump below eps or after max_atoms atoms, whichever comes first.

    With strict=True hitting the atom budget before eps raises instead of
    returning a draw truncated at a larger jump.
    """

    eps: float = 1e-8
    max_atoms: int = 100_000
    strict: bool = False

    def __post_init__(self):
        if not self.eps > 0 and self.max_atoms is None:
            raise ValueError("need eps > 0 or a finite atom budget")
        if self.max_atoms is not None and self.max_atoms < 1:
            raise ValueError("max_atoms must be positive")

    def to_dict(self) -> dict:
        return {"eps": self.eps, "max_atoms": self.max_atoms, "strict": self.strict}


def rng_stream(seed: int, rep: int = 0, purpose: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed), spawn_key=(int(rep), int(purpose)))
    return np.random.Generator(np.random.Philox(ss))


def ferguson_klass_jumps(
    directing: DirectingMeasure,
    base_mass: float,
    truncation: Truncation | None = None,
    seed: int = 0,
    rep: int = 0,
    *,
    rng: np.random.Generator | None = None,
    chunk: int = 4096,
) -> tuple[np.ndarray, str]:
    """Decreasing jumps above the truncation level and the rule that stopped the series."""
    tr = truncation or Truncation()
    if not base_mass > 0:
        raise ValueError("base mass must be positive")
    rng = rng if rng is not None else rng_stream(seed, rep, _JUMPS)
    out: list[np.ndarray] = []
    count = 0
    gamma = 0.0
    budget = tr.max_atoms if tr.max_atoms is not None else math.inf
    while True:
        arrivals = gamma + np.cumsum(rng.standard_exponential(chunk))
        gamma = float(arrivals[-1])
        z = directing.inverse_tail(arrivals / base_mass)
        keep = (z >= tr.eps) & (z > 0)
        stop = not keep.all()
        z = z[: int(np.argmin(keep)) if stop else z.size]
        if count + z.size >= budget:
            fits = stop and count + z.size == budget
            out.append(z[: int(budget - count)])
            if fits:
                return np.concatenate(out), "eps"
            if tr.strict:
                raise TruncationBudgetExceeded(f"more than {tr.max_atoms} jumps above eps={tr.eps!r}")
            return np.concatenate(out), "budget"
        out.append(z)
        count += z.size
        if stop:
            return np.concatenate(out), "eps"


@dataclass
class CormDraw:
    locations: np.ndarray
    z: np.ndarray
    scores: np.ndarray
    eps: float
    seed: int
    rep: int
    stopped_by: str

    @property
    def weights(self) -> np.ndarray:
        return self.z[:, None] * self.scores

    @property
    def n_atoms(self) -> int:
        return int(self.z.size)

    @property
    def d(self) -> int:
        return int(self.scores.shape[1])

    @property
    def eps_effective(self) -> float:
        """Level below which jumps were discarded."""
        if self.stopped_by == "budget" and self.z.size:
            return float(self.z[-1])
        return self.eps

    def metadata(self) -> dict:
        return {
            "eps": self.eps,
            "eps_effective": self.eps_effective,
            "n_atoms": self.n_atoms,
            "seed": self.seed,
            "rep": self.rep,
            "stopped_by": self.stopped_by,
        }

    def header(self) -> list[str]:
        return ["atom_index", "location", "z"] + [f"m_{j + 1}" for j in range(self.d)] + [f"s_{j + 1}" for j in range(self.d)]

    def write_csv(self, path) -> None:
        w_all = self.weights
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.header())
            for i in range(self.n_atoms):
                row = [i, repr(float(self.locations[i])), repr(float(self.z[i]))]
                row += [repr(float(v)) for v in self.scores[i]]
                row += [repr(float(v)) for v in w_all[i]]
                w.writerow(row)


def _require_well_posed(spec: CormSpec, force: bool, config: QuadConfig | None) -> None:
    if force:
        return
    verdict = check_corm(spec, config, direct=False).multivariate
    if verdict is not Posedness.WELL_POSED:
        raise IllPosedSpec(f"specification is {verdict.value}; pass force=True to simulate anyway")


def _draw(spec: CormSpec, truncation: Truncation, seed: int, rep: int) -> CormDraw:
    z, rule = ferguson_klass_jumps(spec.directing, spec.base.total_mass, truncation, seed, rep)
    scores = spec.score.sample(rng_stream(seed, rep, _SCORES), z.size)
    locations = spec.base.sample_locations(rng_stream(seed, rep, _LOCATIONS), z.size)
    return CormDraw(locations, z, scores.reshape(z.size, spec.d), truncation.eps, int(seed), int(rep), rule)


def sample_corm(
    spec: CormSpec,
    truncation: Truncation | None = None,
    seed: int = 0,
    rep: int = 0,
    *,
    force: bool = False,
    config: QuadConfig | None = None,
) -> CormDraw:
    """One truncated draw; refuses specifications that are not WellPosed unless forced."""
    _require_well_posed(spec, force, config)
    return _draw(spec, truncation or Truncation(), seed, rep)


@dataclass
class ThresholdRow:
    j: int
    y: float
    mean_count: float
    std_error: float
    expected: float
    z_score: float
    within: bool
    valid: bool
    note: str = ""


@dataclass
class SimReport:
    rows: list[ThresholdRow]
    replications: int
    seed: int
    eps_effective: float
    n_sigma: float
    pass_fraction: float
    counts: np.ndarray = field(repr=False, default=None)

    @property
    def valid_rows(self) -> list[ThresholdRow]:
        return [r for r in self.rows if r.valid]

    @property
    def fraction_within(self) -> float:
        rows = self.valid_rows
        return sum(r.within for r in rows) / len(rows) if rows else 0.0

    @property
    def passed(self) -> bool:
        return bool(self.valid_rows) and self.fraction_within >= self.pass_fraction

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["j", "y", "mean_count", "std_error", "expected", "z_score", "within", "valid", "note"])
            for r in self.rows:
                w.writerow([r.j + 1, repr(r.y), repr(r.mean_count), repr(r.std_error), repr(r.expected), repr(r.z_score), int(r.within), int(r.valid), r.note])

    def to_dict(self) -> dict:
        return {
            "replications": self.replications,
            "seed": self.seed,
            "eps_effective": self.eps_effective,
            "n_sigma": self.n_sigma,
            "fraction_within": self.fraction_within,
            "passed": self.passed,
        }


def _score_q99(spec: CormSpec, j: int, seed: int) -> float:
    m = spec.score.marginals[j]
    try:
        return float(m.ppf(0.99))
    except (NotImplementedError, TypeError, ValueError):
        sample = m.sample(rng_stream(seed, 2**31 - 1, 3 + j), 100_000)
        return float(np.quantile(sample, 0.99))


def validate_tails(
    spec: CormSpec,
    thresholds: Sequence[float] = (0.5, 1.0, 2.0, 5.0),
    replications: int = 2000,
    seed: int = 0,
    truncation: Truncation | None = None,
    *,
    n_sigma: float = 4.0,
    pass_fraction: float = 0.95,
    force: bool = False,
    config: QuadConfig | None = None,
) -> SimReport:
    """Compare mean exceedance counts #{i: s_ji > y} with alpha(X) U_j(y).

    Thresholds violating y >= 10 * eps * q99(S_j) are annotated and excluded
    from the pass rule; if none remain, TruncationBias is raised.
    """
    if replications < 1:
        raise ValueError("replications must be positive")
    ys = np.asarray(thresholds, dtype=float)
    if ys.size == 0 or np.any(ys <= 0):
        raise ValueError("thresholds must be positive")
    _require_well_posed(spec, force, config)
    tr = truncation or Truncation()
    d = spec.d
    counts = np.zeros((replications, d, ys.size))
    eps_eff = tr.eps
    for rep in range(replications):
        draw = _draw(spec, tr, seed, rep)
        eps_eff = max(eps_eff, draw.eps_effective)
        w = draw.weights
        counts[rep] = (w[:, :, None] > ys[None, None, :]).sum(axis=0)

    mass = spec.base.total_mass
    rows = []
    for j in range(d):
        floor = 10.0 * eps_eff * _score_q99(spec, j, seed)
        m = spec.score.marginals[j]
        for k, y in enumerate(ys):
            expected = mass * marginal_tail(m, spec.directing, float(y), config)
            c = counts[:, j, k]
            mean = float(c.mean())
            se = float(c.std(ddof=1) / math.sqrt(replications)) if replications > 1 else 0.0
            note = ""
            if se == 0.0:
                se = math.sqrt(expected / replications)
                note = "poisson_se"
            zs = (mean - expected) / se if se > 0 else (0.0 if mean == expected else math.inf)
            valid = bool(y >= floor)
            if not valid:
                note = f"below truncation floor {floor:.3g}"
            rows.append(ThresholdRow(j, float(y), mean, se, float(expected), float(zs), bool(abs(zs) <= n_sigma), valid, note))
    report = SimReport(rows, replications, int(seed), eps_eff, n_sigma, pass_fraction, counts)
    if not report.valid_rows:
        raise TruncationBias(f"every threshold lies below 10 * eps * q99 (eps={eps_eff:.3g})")
    return report
