"""Monte Carlo operating characteristics and efficiency ratios.

Each (theta index, block) pair draws from its own counter-based stream, so
every test in a suite sees the same observations (common random numbers) and
tallies do not depend on the thread count.  Tallies are integer histograms
merged by summation.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import streams, validation
from .design import z_upper

CSV_COLUMNS = (
    "test",
    "theta",
    "power",
    "mc_se_power",
    "mean_n",
    "pct25",
    "pct50",
    "pct75",
    "mean_stages",
    "reps",
    "seed",
)


class UndefinedRatioError(ValueError):
    """The efficiency ratio is not meaningful at the given powers."""


class IncompatibleDesignError(ValueError):
    pass


class FingerprintMismatchError(ValueError):
    pass


@dataclass
class Tally:
    """Integer counts for one test at one theta; merged by addition."""

    reps: int
    rejections: int
    n_hist: np.ndarray
    stage_hist: np.ndarray
    first_stage_accepts: int

    @classmethod
    def from_outcomes(cls, out, max_n: int) -> "Tally":
        return cls(
            reps=int(out.reject.size),
            rejections=int(out.reject.sum()),
            n_hist=np.bincount(out.total_n, minlength=max_n + 1),
            stage_hist=np.bincount(out.n_analyses, minlength=4)[:4],
            first_stage_accepts=int((out.early_accept & (out.n_analyses == 1)).sum()),
        )

    def __add__(self, other: "Tally") -> "Tally":
        return Tally(
            self.reps + other.reps,
            self.rejections + other.rejections,
            self.n_hist + other.n_hist,
            self.stage_hist + other.stage_hist,
            self.first_stage_accepts + other.first_stage_accepts,
        )

    def percentile(self, p: float) -> int:
        """Nearest-rank percentile of the realized sample sizes."""
        rank = max(1, math.ceil(p / 100 * self.reps))
        return int(np.searchsorted(np.cumsum(self.n_hist), rank))

    @property
    def mean_n(self) -> float:
        return float(np.arange(self.n_hist.size) @ self.n_hist / self.reps)

    @property
    def mean_stages(self) -> float:
        return float(np.arange(4) @ self.stage_hist / self.reps)

    def fraction_within(self, stages: int) -> float:
        return float(self.stage_hist[: stages + 1].sum() / self.reps)

    @property
    def first_stage_accept_rate(self) -> float:
        return self.first_stage_accepts / self.reps

    @property
    def first_stage_stop_rate(self) -> float:
        return float(self.stage_hist[1] / self.reps)


@dataclass(frozen=True)
class OCRow:
    theta: tuple
    power: float
    mc_se_power: float
    mean_n: float
    pct25: int
    pct50: int
    pct75: int
    mean_stages: float
    reps: int

    @classmethod
    def from_tally(cls, theta, t: Tally) -> "OCRow":
        p = t.rejections / t.reps
        return cls(
            theta=tuple(float(x) for x in theta),
            power=p,
            mc_se_power=math.sqrt(p * (1 - p) / t.reps),
            mean_n=t.mean_n,
            pct25=t.percentile(25),
            pct50=t.percentile(50),
            pct75=t.percentile(75),
            mean_stages=t.mean_stages,
            reps=t.reps,
        )


@dataclass
class OCTable:
    test: str
    fingerprint: str
    rows: list
    seed: int
    tallies: list = field(default_factory=list, compare=False, repr=False)

    def row_at(self, theta) -> OCRow:
        theta = tuple(float(x) for x in np.atleast_1d(theta))
        for row in self.rows:
            if np.allclose(row.theta, theta):
                return row
        raise KeyError(f"no row at theta={theta}")

    def tally_at(self, theta) -> Tally:
        return self.tallies[self.rows.index(self.row_at(theta))]

    def verify(self, test) -> None:
        """Raise unless ``test`` is the configuration that produced this table."""
        if fingerprint(test) != self.fingerprint:
            raise FingerprintMismatchError(f"table for {self.test!r} was produced by a different design")


def _jsonable(v):
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, np.ndarray):
        return [_jsonable(x) for x in v]
    if isinstance(v, (tuple, list)):
        return [_jsonable(x) for x in v]
    if hasattr(v, "to_dict"):
        return v.to_dict()
    if hasattr(v, "as_tuple"):
        return list(v.as_tuple())
    return v if v is None or isinstance(v, (str, bool)) else repr(v)


def fingerprint(test) -> str:
    """SHA-256 of the test's class, parameters and fitted constants."""
    params = {k: _jsonable(v) for k, v in sorted(test.get_params().items())}
    fitted = {
        k: _jsonable(v)
        for k, v in sorted(vars(test).items())
        if k.endswith("_") and not k.startswith("_") and k not in ("calibration_", "trail_")
    }
    blob = json.dumps({"class": type(test).__name__, "params": params, "fitted": fitted}, sort_keys=True)
    return hashlib.sha256(blob.encode()).hexdigest()


def _grid(test, theta_grid):
    return validation.check_theta_grid([np.atleast_1d(t) for t in theta_grid], test.family_)


def _simulate(tests: dict, theta_grid, reps: int, seed: int, block: int, threads: int) -> dict:
    """Tallies per test name, one per theta, sharing random numbers across tests."""
    seed = validation.check_seed(seed)
    reps = validation.check_positive_int(reps, "reps")
    first = next(iter(tests.values()))
    family = first.family_
    grid = _grid(first, theta_grid)
    nmax = max(t.max_n_ for t in tests.values())
    out = {name: [] for name in tests}
    for i, theta in enumerate(grid):

        def one(b, size, theta=theta, i=i):
            rng = streams.block_rng(seed, streams.SIMULATION, i, b)
            cum = family.sample_cumulative(rng, theta, size, nmax)
            return {name: Tally.from_outcomes(t.evaluate(cum[:, : t.max_n_]), t.max_n_) for name, t in tests.items()}

        parts = streams.map_blocks(one, reps, block, threads)
        for name in tests:
            total = parts[0][name]
            for p in parts[1:]:
                total = total + p[name]
            out[name].append(total)
    return grid, out


def simulate_oc(
    test,
    theta_grid,
    reps: int,
    seed: int,
    name: str | None = None,
    block: int = streams.DEFAULT_BLOCK,
    threads: int = 1,
) -> OCTable:
    """Operating characteristics of a fitted test over ``theta_grid``."""
    name = name or type(test).__name__
    grid, tallies = _simulate({name: test}, theta_grid, reps, seed, block, threads)
    rows = [OCRow.from_tally(th, t) for th, t in zip(grid, tallies[name])]
    return OCTable(name, fingerprint(test), rows, int(seed), tallies[name])


def efficiency_ratio(row: OCRow, ref: OCRow, alpha: float) -> float:
    """100 x [(z_a + z_{1-power})^2 / E N] / [same for ``ref``]."""
    alpha = validation.check_probability(alpha, "alpha")
    for r in (row, ref):
        if not alpha < r.power < 1:
            raise UndefinedRatioError(f"power {r.power:.4g} outside ({alpha}, 1): ratio is not meaningful")
    za = z_upper(alpha)

    def info_rate(r):
        return (za + z_upper(1 - r.power)) ** 2 / r.mean_n

    return float(100 * info_rate(row) / info_rate(ref))


@dataclass
class SuiteResult:
    tables: dict
    ratios: dict
    reference: str

    def table(self, name: str) -> OCTable:
        return self.tables[name]


def _check_compatible(tests: dict):
    sigs = {}
    for name, t in tests.items():
        fam = t.family_
        sigs[name] = (json.dumps(fam.to_dict(), sort_keys=True), float(getattr(t, "u0", 0.0)))
    if len(set(sigs.values())) > 1:
        raise IncompatibleDesignError(f"tests disagree on family or null value: {sigs}")


def compare_suite(
    tests: dict,
    theta_grid,
    reps: int,
    seed: int,
    reference: str | None = None,
    alpha: float | None = None,
    block: int = streams.DEFAULT_BLOCK,
    threads: int = 1,
) -> SuiteResult:
    """Simulate every test on common random numbers and form efficiency ratios.

    ``ratios[name]`` lists R(test, reference) per theta; entries are None
    where the ratio is undefined (theta at or below the null, or a power
    outside (alpha, 1)).
    """
    if not tests:
        raise ValueError("no tests to compare")
    _check_compatible(tests)
    reference = reference or next(iter(tests))
    if reference not in tests:
        raise KeyError(f"reference {reference!r} is not among the tests")
    alpha = alpha if alpha is not None else getattr(tests[reference], "alpha", 0.025)
    grid, tallies = _simulate(tests, theta_grid, reps, seed, block, threads)
    tables = {
        name: OCTable(name, fingerprint(t), [OCRow.from_tally(th, x) for th, x in zip(grid, tallies[name])], int(seed), tallies[name])
        for name, t in tests.items()
    }
    family = tests[reference].family_
    u0 = float(getattr(tests[reference], "u0", 0.0))
    ratios = {}
    for name, tab in tables.items():
        col = []
        for row, ref in zip(tab.rows, tables[reference].rows):
            try:
                if family.u(row.theta) <= u0:
                    raise UndefinedRatioError("theta is not an alternative")
                col.append(efficiency_ratio(row, ref, alpha))
            except UndefinedRatioError:
                col.append(None)
        ratios[name] = col
    return SuiteResult(tables, ratios, reference)


# -- CSV ----------------------------------------------------------------------------


def _fmt_theta(theta) -> str:
    return ";".join(repr(float(x)) for x in theta)


def write_csv(tables, path_or_buf=None) -> str:
    """Write OC tables; fingerprints go on leading ``#`` lines."""
    tables = [tables] if isinstance(tables, OCTable) else list(tables)
    buf = io.StringIO()
    for t in tables:
        buf.write(f"# fingerprint {t.test} {t.fingerprint}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for t in tables:
        for r in t.rows:
            w.writerow(
                [
                    t.test,
                    _fmt_theta(r.theta),
                    repr(r.power),
                    repr(r.mc_se_power),
                    repr(r.mean_n),
                    r.pct25,
                    r.pct50,
                    r.pct75,
                    repr(r.mean_stages),
                    r.reps,
                    t.seed,
                ]
            )
    text = buf.getvalue()
    if path_or_buf is not None:
        if hasattr(path_or_buf, "write"):
            path_or_buf.write(text)
        else:
            with open(path_or_buf, "w", newline="") as fh:
                fh.write(text)
    return text


def read_csv(path_or_text) -> list[OCTable]:
    if hasattr(path_or_text, "read"):
        text = path_or_text.read()
    elif "\n" in str(path_or_text):
        text = str(path_or_text)
    else:
        with open(path_or_text, newline="") as fh:
            text = fh.read()
    prints, body = {}, []
    for line in text.splitlines():
        if line.startswith("# fingerprint "):
            _, _, name, digest = line.split(" ", 3)
            prints[name] = digest
        elif line.strip():
            body.append(line)
    tables: dict[str, OCTable] = {}
    for rec in csv.DictReader(body):
        name = rec["test"]
        if name not in tables:
            tables[name] = OCTable(name, prints.get(name, ""), [], int(rec["seed"]))
        tables[name].rows.append(
            OCRow(
                theta=tuple(float(x) for x in rec["theta"].split(";")),
                power=float(rec["power"]),
                mc_se_power=float(rec["mc_se_power"]),
                mean_n=float(rec["mean_n"]),
                pct25=int(rec["pct25"]),
                pct50=int(rec["pct50"]),
                pct75=int(rec["pct75"]),
                mean_stages=float(rec["mean_stages"]),
                reps=int(rec["reps"]),
            )
        )
    return list(tables.values())


def format_tables(tables, ratios: dict | None = None) -> str:
    """Aligned plain-text summary."""
    tables = [tables] if isinstance(tables, OCTable) else list(tables)
    head = f"{'test':<10}{'theta':>16}{'power':>8}{'se':>8}{'E N':>9}{'p25':>6}{'p50':>6}{'p75':>6}{'#':>6}"
    if ratios:
        head += f"{'R':>8}"
    lines = [head, "-" * len(head)]
    for t in tables:
        for j, r in enumerate(t.rows):
            th = ",".join(f"{x:g}" for x in r.theta)
            line = (
                f"{t.test:<10}{th:>16}{r.power:>8.4f}{r.mc_se_power:>8.4f}{r.mean_n:>9.1f}"
                f"{r.pct25:>6}{r.pct50:>6}{r.pct75:>6}{r.mean_stages:>6.2f}"
            )
            if ratios:
                v = ratios.get(t.test, [None] * len(t.rows))[j]
                line += f"{'-' if v is None else format(v, '.1f'):>8}"
            lines.append(line)
    return "\n".join(lines)
