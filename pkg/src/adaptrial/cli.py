"""Command-line interface.

    adaptrial calibrate --config sec2_2
    adaptrial simulate  --config table1_desk --reps 2000 --out oc.csv
    adaptrial compare   --config table4_desk
    adaptrial audit     --config sec2_2 --data obs.txt
    adaptrial reproduce sec2_2

``--config`` takes a path to an INI file or the name of a shipped config.
"""

from __future__ import annotations

import argparse
import ast
import configparser
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from . import simulate, validation
from .comparators import COMPARATORS
from .design import DesignParams
from .engine import DataExhaustedError, OutOfOrderError, Thresholds, trail_to_text
from .estimator import AdaptiveTest
from .exp_family import TwoSampleBinomial

SCHEMA = "adaptrial/1"
DESIGN_KEYS = ("family", "sigma", "u0", "u1", "alpha", "alpha_tilde", "m", "M", "eps", "eps_tilde", "rho", "nuisance")
SHARED_KEYS = ("family", "sigma", "u0")

EXIT_ACCEPT, EXIT_REJECT, EXIT_ERROR = 0, 1, 2


class ConfigError(ValueError):
    pass


# -- configuration ------------------------------------------------------------


def _parse_value(text: str):
    try:
        return ast.literal_eval(text)
    except (ValueError, SyntaxError):
        return text.strip()


def _parse_theta(text: str) -> list:
    out = []
    for item in text.split(";"):
        item = item.strip()
        if item:
            out.append(tuple(float(x) for x in item.split(",")))
    return out


def shipped_configs() -> list[str]:
    return sorted(p.name[:-4] for p in resources.files("adaptrial.configs").iterdir() if p.name.endswith(".ini"))


def _resolve(path_or_name: str) -> tuple[str, str]:
    p = Path(path_or_name)
    if p.exists():
        return str(p), p.read_text()
    res = resources.files("adaptrial.configs") / f"{path_or_name}.ini"
    if res.is_file():
        return f"<shipped:{path_or_name}>", res.read_text()
    raise ConfigError(f"no config file or shipped config named {path_or_name!r} (shipped: {', '.join(shipped_configs())})")


@dataclass
class RunConfig:
    name: str
    source: str
    text: str
    design: dict
    calibration: dict
    thresholds: Thresholds | None
    theta: list
    reps: int
    seed: int
    threads: int
    reference: str
    tests: dict = field(default_factory=dict)

    def where(self, section: str, key: str) -> str:
        sect = None
        for i, line in enumerate(self.text.splitlines(), 1):
            s = line.strip()
            if s.startswith("[") and s.endswith("]"):
                sect = s[1:-1]
            elif sect == section and s.split("=", 1)[0].strip() == key:
                return f"{self.source}:{i} [{section}] {key}"
        return f"{self.source} [{section}] {key}"

    def adaptive_test(self, **over) -> AdaptiveTest:
        kw = {k: v for k, v in self.design.items()}
        kw.update(self.calibration)
        if self.thresholds is not None:
            kw["thresholds"] = self.thresholds
        kw.update(over)
        return AdaptiveTest(**kw)

    def design_params(self) -> DesignParams:
        return self.adaptive_test().design()


def load_config(path_or_name: str) -> RunConfig:
    source, text = _resolve(path_or_name)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    if cp.get("meta", "schema", fallback=None) != SCHEMA:
        raise ConfigError(f"{source}: [meta] schema must be {SCHEMA!r}")
    name = cp.get("meta", "name", fallback=Path(source).stem)
    if "design" not in cp:
        raise ConfigError(f"{source}: missing [design] section")
    design = {}
    for key, raw in cp["design"].items():
        if key not in DESIGN_KEYS:
            raise ConfigError(f"{source} [design] {key}: unknown field")
        design[key] = _parse_value(raw)
    calibration = {k: _parse_value(v) for k, v in cp["calibration"].items()} if "calibration" in cp else {}
    unknown = set(calibration) - {"method", "reps", "seed", "nodes", "threads"}
    if unknown:
        raise ConfigError(f"{source} [calibration]: unknown fields {sorted(unknown)}")
    thresholds = None
    if "thresholds" in cp:
        t = cp["thresholds"]
        thresholds = (float(t["b"]), float(t["b_tilde"]), float(t["c"]))
    sim = cp["simulation"] if "simulation" in cp else {}
    theta = _parse_theta(sim.get("theta", "")) if sim else []
    tests = {}
    for sect in cp.sections():
        if sect.startswith("test:"):
            kw = {k: _parse_value(v) for k, v in cp[sect].items()}
            kind = kw.pop("type", None)
            if kind not in COMPARATORS:
                raise ConfigError(f"{source} [{sect}] type: expected one of {sorted(COMPARATORS)}, got {kind!r}")
            tests[sect[5:]] = (kind, kw)
    cfg = RunConfig(
        name=name,
        source=source,
        text=text,
        design=design,
        calibration=calibration,
        thresholds=thresholds,
        theta=theta,
        reps=int(_parse_value(sim.get("reps", "10000"))) if sim else 10000,
        seed=int(_parse_value(sim.get("seed", "0"))) if sim else 0,
        threads=int(_parse_value(sim.get("threads", "1"))) if sim else 1,
        reference=sim.get("reference", "ADAPT") if sim else "ADAPT",
        tests=tests,
    )
    _validate(cfg)
    return cfg


def _validate(cfg: RunConfig) -> None:
    try:
        cfg.design_params()
    except (ValueError, TypeError) as exc:
        msg = str(exc)
        key = next((k for k in DESIGN_KEYS if msg.startswith(k + " ") or msg.startswith(k + "=")), None)
        if key is None:
            key = next((k for k in ("m", "M") if f"{k}=" in msg), "design")
        raise ConfigError(f"{cfg.where('design', key)}: {msg}") from None
    if cfg.thresholds is not None:
        try:
            validation.check_thresholds(cfg.thresholds)
        except ValueError as exc:
            raise ConfigError(f"{cfg.source} [thresholds]: {exc}") from None


def build_tests(cfg: RunConfig, fit_adaptive: bool = True, **over) -> dict:
    tests = {"ADAPT": cfg.adaptive_test(**over)}
    for name, (kind, kw) in cfg.tests.items():
        cls = COMPARATORS[kind]
        params = cls().get_params()
        args = {k: cfg.design[k] for k in SHARED_KEYS if k in cfg.design and k in params}
        args.update(kw)
        if "threads" in params:
            args["threads"] = over.get("threads", 1)
        unknown = set(args) - set(params)
        if unknown:
            raise ConfigError(f"{cfg.source} [test:{name}]: unknown fields {sorted(unknown)}")
        tests[name] = cls(**args)
    for name, t in tests.items():
        if name == "ADAPT" and not fit_adaptive:
            continue
        try:
            t.fit()
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{cfg.source} [test:{name}]: {exc}") from None
    return tests


# -- thresholds file --------------------------------------------------------------


def design_fingerprint(params: DesignParams) -> str:
    return hashlib.sha256(json.dumps(params.to_dict(), sort_keys=True).encode()).hexdigest()


def write_thresholds(path, thr: Thresholds, params: DesignParams) -> None:
    Path(path).write_text(
        f"b = {thr.b!r}\nb_tilde = {thr.b_tilde!r}\nc = {thr.c!r}\nfingerprint = {design_fingerprint(params)}\n"
    )


def read_thresholds(path) -> tuple[Thresholds, str]:
    kv = {}
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{i}: expected key = value")
        k, v = (s.strip() for s in line.split("=", 1))
        kv[k] = v
    missing = {"b", "b_tilde", "c", "fingerprint"} - set(kv)
    if missing:
        raise ConfigError(f"{path}: missing fields {sorted(missing)}")
    return Thresholds(float(kv["b"]), float(kv["b_tilde"]), float(kv["c"])), kv["fingerprint"]


# -- data files -------------------------------------------------------------------------


def read_observations(path, binomial: bool) -> list:
    obs = []
    for i, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.replace(",", " ").split()
        try:
            vals = [float(p) for p in parts]
        except ValueError:
            raise ConfigError(f"{path}:{i}: not a number: {line!r}") from None
        if binomial:
            if len(vals) != 2 or any(v not in (0.0, 1.0) for v in vals):
                raise ConfigError(f"{path}:{i}: expected two 0/1 outcomes, got {line!r}")
            obs.append(vals)
        else:
            if len(vals) != 1 or not math.isfinite(vals[0]):
                raise ConfigError(f"{path}:{i}: expected one observation, got {line!r}")
            obs.append(vals[0])
    return obs


# -- commands ----------------------------------------------------------------------------


def _thresholds_for(cfg: RunConfig, args) -> AdaptiveTest:
    over = {"threads": args.threads}
    if getattr(args, "thresholds", None):
        thr, fp = read_thresholds(args.thresholds)
        if fp != design_fingerprint(cfg.design_params()):
            raise ConfigError(f"{args.thresholds}: fingerprint does not match the design in {cfg.source}")
        over["thresholds"] = thr
    if args.seed is not None:
        over["seed"] = args.seed
    return cfg.adaptive_test(**over).fit()


def cmd_calibrate(args) -> int:
    cfg = load_config(args.config)
    over = {"threads": args.threads, "thresholds": None}
    if args.seed is not None:
        over["seed"] = args.seed
    if args.reps is not None:
        over["reps"] = args.reps
    test = cfg.adaptive_test(**over).fit()
    print(f"config     {cfg.name}")
    print(test.calibration_.summary())
    out = args.out or f"{cfg.name}.thresholds"
    write_thresholds(out, test.thresholds_, test.design_)
    print(f"wrote      {out}")
    return 0


def _suite(args, ratios: bool) -> int:
    cfg = load_config(args.config)
    if not cfg.theta:
        raise ConfigError(f"{cfg.where('simulation', 'theta')}: theta grid is empty")
    tests = build_tests(cfg, fit_adaptive=False, threads=args.threads)
    tests["ADAPT"] = _thresholds_for(cfg, args)
    reps = args.reps or cfg.reps
    seed = cfg.seed if args.seed is None else args.seed
    res = simulate.compare_suite(
        tests, cfg.theta, reps, seed, reference=cfg.reference, alpha=cfg.design.get("alpha"), threads=args.threads
    )
    tables = list(res.tables.values())
    out = Path(args.out or f"{cfg.name}_oc.csv")
    simulate.write_csv(tables, out)
    text = simulate.format_tables(tables, res.ratios if ratios else None)
    out.with_suffix(".txt").write_text(text + "\n")
    print(text)
    if ratios:
        rpath = out.with_name(out.stem + "_ratios.csv")
        with open(rpath, "w") as fh:
            fh.write("test,theta,ratio\n")
            for name, col in res.ratios.items():
                for row, v in zip(res.tables[name].rows, col):
                    fh.write(f"{name},{';'.join(repr(x) for x in row.theta)},{'' if v is None else repr(v)}\n")
        print(f"wrote {out}, {out.with_suffix('.txt')}, {rpath}")
    else:
        print(f"wrote {out}, {out.with_suffix('.txt')}")
    return 0


def cmd_simulate(args) -> int:
    return _suite(args, ratios=False)


def cmd_compare(args) -> int:
    return _suite(args, ratios=True)


def cmd_audit(args) -> int:
    cfg = load_config(args.config)
    test = _thresholds_for(cfg, args)
    obs = read_observations(args.data, isinstance(test.design_.family, TwoSampleBinomial))
    decision = test.run(obs)
    text = trail_to_text(test.trail_)
    sys.stdout.write(text)
    if args.out:
        Path(args.out).write_text(text)
    print(
        f"verdict={decision.verdict.value} stage={decision.at_stage} n={decision.total_n} "
        f"trigger={decision.trigger.value}"
    )
    return EXIT_REJECT if decision.rejected else EXIT_ACCEPT


# -- reproduction recipes ------------------------------------------------------------


def _check(label, got, target, tol) -> bool:
    ok = abs(got - target) <= tol
    print(f"  {'PASS' if ok else 'FAIL'}  {label:<40} got {got:.4f}  target {target:.4f} +/- {tol:g}")
    return ok


def _reproduce_sec2_2(args) -> bool:
    test = load_config("sec2_2").adaptive_test().fit()
    t = test.thresholds_
    return all(
        [
            _check("b_tilde", t.b_tilde, 1.99, 0.02),
            _check("b", t.b, 3.26, 0.02),
            _check("c", t.c, 2.05, 0.02),
        ]
    )


def _check_range(label, got, lo, hi) -> bool:
    ok = lo <= got <= hi
    print(f"  {'PASS' if ok else 'FAIL'}  {label:<40} got {got:.4f}  range [{lo:g}, {hi:g}]")
    return ok


def _suite_for(name, args):
    cfg = load_config(name)
    tests = build_tests(cfg, threads=args.threads)
    reps = args.reps or cfg.reps
    seed = cfg.seed if args.seed is None else args.seed
    res = simulate.compare_suite(tests, cfg.theta, reps, seed, reference=cfg.reference, alpha=cfg.design.get("alpha"), threads=args.threads)
    print(simulate.format_tables(list(res.tables.values()), res.ratios))
    return tests, res


def _reproduce_table1(args) -> bool:
    _, res = _suite_for("table1_desk", args)
    a = res.tables["ADAPT"]
    null = a.row_at(0.0)
    alt = a.row_at(0.3)
    tol = max(0.005, 3 * math.sqrt(0.025 * 0.975 / null.reps))
    return all(
        [
            _check("ADAPT power at theta=0", null.power, 0.025, tol),
            _check_range("ADAPT power at theta=.3", alt.power, 0.86, 0.90),
        ]
    )


def _reproduce_table3(args) -> bool:
    tests, res = _suite_for("table3_desk", args)
    thr = tests["ADAPT"].thresholds_
    ok = [
        _check("b_tilde", thr.b_tilde, 0.59, 0.1),
        _check("b", thr.b, 2.49, 0.1),
        _check("c", thr.c, 2.7, 0.1),
    ]
    a = res.tables["ADAPT"].rows
    ok.append(_check_range("ADAPT largest mean stage count", max(r.mean_stages for r in a), 1.0, 2.0))
    return all(ok)


def _reproduce_table4(args) -> bool:
    _, res = _suite_for("table4_desk", args)
    th = (0.254, 0.351)
    ok = [
        _check(f"{n} first-stage futility stop", res.tables[n].tally_at(th).first_stage_accept_rate, 0.47, 0.02)
        for n in ("L", "PH")
    ]
    row = res.tables["ADAPT"].row_at(th)
    ok.append(_check("ADAPT mean per-group n", row.mean_n, 213.1, 3.0))
    ok.append(_check("ADAPT power", row.power, 0.79, 0.02))
    return all(ok)


RECIPES = {
    "sec2_2": _reproduce_sec2_2,
    "table1_desk": _reproduce_table1,
    "table3_desk": _reproduce_table3,
    "table4_desk": _reproduce_table4,
}


def cmd_reproduce(args) -> int:
    print(f"recipe {args.recipe}")
    ok = RECIPES[args.recipe](args)
    print("all checks passed" if ok else "some checks failed")
    return 0 if ok else 1


# -- entry point -----------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="adaptrial", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="INI file or shipped config name")
        p.add_argument("--seed", type=int, default=None)
        p.add_argument("--reps", type=int, default=None)
        p.add_argument("--out", default=None)
        p.add_argument("--threads", type=int, default=1)

    p = sub.add_parser("calibrate", help="solve for (b, b_tilde, c) and write a thresholds file")
    common(p)
    p.set_defaults(func=cmd_calibrate)
    for name, fn, text in (
        ("simulate", cmd_simulate, "operating characteristics of every test in the config"),
        ("compare", cmd_compare, "as simulate, plus efficiency ratios against the reference"),
    ):
        p = sub.add_parser(name, help=text)
        common(p)
        p.add_argument("--thresholds", default=None, help="thresholds file from `calibrate`")
        p.set_defaults(func=fn)
    p = sub.add_parser("audit", help="run one trial on a data file and print the audit trail")
    common(p)
    p.add_argument("--thresholds", default=None)
    p.add_argument("--data", required=True)
    p.set_defaults(func=cmd_audit)
    p = sub.add_parser("reproduce", help="run a shipped recipe and check its targets")
    p.add_argument("recipe", choices=sorted(RECIPES))
    common(p, config=False)
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be >= 1", file=sys.stderr)
        return EXIT_ERROR
    try:
        return args.func(args)
    except (ConfigError, DataExhaustedError, OutOfOrderError, ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
