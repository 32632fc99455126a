"""Command-line front end: ``equi-auction <command> --config file [--set key=value ...]``.

Curves and grids are written as CSV whose first line is ``# config: <json>``;
scalars and structures are written as JSON with a ``config`` member. Output is a
pure function of the resolved configuration.
"""
import argparse
import copy
import csv
import io
import json
import sys
from dataclasses import dataclass

import numpy as np

from . import equilibrium, equity, mechanism, search, simulate
from .distributions import make_counterexample
from .valuation import Market

DEFAULTS = {
    "market": {"n": 3, "k": 2, "c": 0.0, "dist": {"kind": "uniform", "params": {}}},
    "delta": 1.0,
    "points": 101,
    "c_grid": [round(0.05 * i, 10) for i in range(21)],
    "delta_grid": [round(0.05 * i, 10) for i in range(21)],
    "tol": 1e-3,
    "frontier": True,
    "draws": 100000,
    "seed": 0,
    "metric": "wev",
    "signals": None,
    "slice_signal": None,
    "epsilon": 0.02,
    "eta": 1e-3,
    "output": "-",
    "summary": None,
}
COMMANDS = ("bid-curve", "wev", "meu-region", "sweep", "delta-star", "equitable",
            "simulate", "counterexample")
METRICS = ("wev", "revenue", "regret", "variances", "gini", "equitable-revenue")


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str
    values: dict

    @property
    def market(self):
        return Market(**self.values["market"])

    def __getitem__(self, key):
        return self.values[key]

    def to_dict(self):
        return {"command": self.command, **self.values}

    @classmethod
    def resolve(cls, command, raw=None, overrides=()):
        values = copy.deepcopy(DEFAULTS)
        _deep_update(values, raw or {})
        for item in overrides:
            key, sep, text = item.partition("=")
            if not sep:
                raise ConfigError(f"override {item!r} is not of the form key=value")
            _set_dotted(values, key.strip(), _parse_value(text))
        unknown = set(values) - set(DEFAULTS)
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        cfg = cls(command, values)
        cfg.validate()
        return cfg

    def validate(self):
        if self.command != "counterexample":
            self.market  # raises on bad n, k, c or distribution kind
        d = self.values["delta"]
        if not isinstance(d, (int, float)) or not 0 <= d <= 1:
            raise ConfigError(f"delta={d} outside [0, 1]")
        for key in ("c_grid", "delta_grid"):
            g = self.values[key]
            if not g or any(not 0 <= float(x) <= 1 for x in g):
                raise ConfigError(f"{key} must be a non-empty list within [0, 1]")
        if self.values["metric"] not in METRICS:
            raise ConfigError(f"metric must be one of {METRICS}")


def _deep_update(base, new):
    for key, val in new.items():
        if isinstance(val, dict) and isinstance(base.get(key), dict) and key != "params":
            _deep_update(base[key], val)
        else:
            base[key] = copy.deepcopy(val)


def _set_dotted(values, key, val):
    parts = key.split(".")
    node = values
    for p in parts[:-1]:
        node = node.setdefault(p, {})
        if not isinstance(node, dict):
            raise ConfigError(f"cannot set {key}: {p} is not a mapping")
    node[parts[-1]] = val


def _parse_value(text):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _dumps(obj):
    return json.dumps(obj, sort_keys=True, default=_json_default, indent=2) + "\n"


def _csv_text(cfg, header, rows):
    buf = io.StringIO()
    buf.write("# config: " + json.dumps(cfg.to_dict(), sort_keys=True, default=_json_default) + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def _json_text(cfg, payload):
    return _dumps({"config": cfg.to_dict(), **payload})


# -- commands -----------------------------------------------------------------

def cmd_bid_curve(cfg):
    m, delta = cfg.market, float(cfg["delta"])
    u = np.linspace(0.0, 1.0, int(cfg["points"]))
    s = np.asarray(m.dist.quantile(u))
    bid = np.asarray(equilibrium.bid_mixed(m, delta, s))
    slope = np.asarray(equilibrium.bid_slope(m, delta, s))
    return _csv_text(cfg, ["s", "bid", "slope"], zip(s, bid, slope))


def cmd_wev(cfg):
    m, delta = cfg.market, float(cfg["delta"])
    comp = equity.wev_components(m, delta)
    rep = equity.meu_verdict(m, delta)
    return _json_text(cfg, {"wev": equity.wev(m, delta), "A": comp["A"], "B": comp["B"],
                            "error_estimate": comp["tail"],
                            "meu": {"holds": rep.meu_holds, "margin": rep.meu_margin,
                                    "max_slope": rep.max_slope},
                            "bounds": equity.theory_bounds(m)})


def cmd_meu_region(cfg):
    m = cfg.market
    rows = []
    for c in map(float, cfg["c_grid"]):
        mc = m.with_c(c)
        for d in map(float, cfg["delta_grid"]):
            rep = equity.meu_verdict(mc, d)
            rows.append((c, d, equity.wev(mc, d), int(rep.meu_holds), rep.max_slope))
    return _csv_text(cfg, ["c", "delta", "wev", "meu_holds", "max_slope"], rows)


def cmd_sweep(cfg):
    res = search.landscape_sweep(cfg.market, cfg["c_grid"], cfg["delta_grid"], cfg["tol"],
                                 bool(cfg["frontier"]))
    header = ["c"] + [f"delta={d!r}" for d in map(float, res.delta_grid)]
    rows = [[float(c)] + list(res.wev_matrix[i]) for i, c in enumerate(res.c_grid)]
    summary = _json_text(cfg, {"rows": res.summary(), "failures": res.failures})
    return _csv_text(cfg, header, rows), summary


def cmd_delta_star(cfg):
    m = cfg.market
    rows = []
    for c in map(float, cfg["c_grid"]):
        mc = m.with_c(c)
        ds = search.delta_star(mc, cfg["tol"])
        fr = search.meu_frontier(mc, tol=cfg["tol"]) if cfg["frontier"] else float("nan")
        b = equity.theory_bounds(mc)
        rows.append((c, ds["delta_star"], ds["wev_min"], fr, b["lb_logconcave"],
                     b.get("lb_distribution", float("nan"))))
    return _csv_text(cfg, ["c", "delta_star", "wev_min", "frontier", "lb_logconcave",
                           "lb_distribution"], rows)


def _signals(cfg):
    sig = cfg["signals"]
    if sig is None:
        raise ConfigError("equitable needs a signal profile (signals or --signals)")
    if isinstance(sig, str):
        try:
            with open(sig) as fh:
                sig = [float(x) for row in csv.reader(fh) for x in row if x.strip()]
        except OSError:
            sig = [float(x) for x in sig.split(",")]
    return np.asarray(sig, dtype=float)


def cmd_equitable(cfg):
    m = cfg.market
    res = mechanism.equitable_outcome(m, _signals(cfg))
    payload = {"result": res.to_dict()}
    if cfg["slice_signal"] is not None:
        s = float(cfg["slice_signal"])
        ys = np.linspace(0.0, s, int(cfg["points"]))[:-1]
        payload["slice"] = {"s": s, "y": ys, "payment": mechanism.equitable_payment(m, s, ys),
                            "maximum": mechanism.payment_slice_maximum(m, s)}
    return _json_text(cfg, payload)


def cmd_simulate(cfg):
    m, delta = cfg.market, float(cfg["delta"])
    draws, seed, metric = int(cfg["draws"]), int(cfg["seed"]), cfg["metric"]
    if metric == "wev":
        out = simulate.estimate_wev(m, delta, draws, seed).to_dict()
    elif metric == "revenue":
        out = simulate.estimate_revenue(m, delta, draws, seed).to_dict()
    elif metric == "equitable-revenue":
        out = simulate.estimate_equitable_revenue(m, draws, seed).to_dict()
    elif metric == "gini":
        out = simulate.estimate_gini_winners(m, delta, draws, seed).to_dict()
    elif metric == "variances":
        out = {k: v.to_dict() for k, v in simulate.estimate_variance_suite(m, delta, draws, seed).items()}
    else:
        a = simulate.regret_audit(m, delta, draws=draws, seed=seed)
        out = {"s": a["grid"][:, 0], "report": a["grid"][:, 1], "regret": a["regret"],
               "se": a["se"], "max_regret": a["max_regret"], "passes": a["passes"],
               "draws": a["draws"], "seed": a["seed"]}
    return _json_text(cfg, {"metric": metric, "estimate": out})


def cmd_counterexample(cfg):
    n, k = int(cfg["market"]["n"]), int(cfg["market"]["k"])
    m = Market(n, k, float(cfg["market"]["c"]), make_counterexample(cfg["epsilon"], cfg["eta"]))
    wu, wp = equity.wev(m, 0.0), equity.wev(m, 1.0)
    return _json_text(cfg, {"n": n, "k": k, "wev_uniform": wu, "wev_payasbid": wp,
                            "uniform_lower": wu < wp,
                            "bounds": {"uniform_upper": 0.005 / n, "payasbid_lower": 0.01 / n}})


HANDLERS = {"bid-curve": cmd_bid_curve, "wev": cmd_wev, "meu-region": cmd_meu_region,
            "sweep": cmd_sweep, "delta-star": cmd_delta_star, "equitable": cmd_equitable,
            "simulate": cmd_simulate, "counterexample": cmd_counterexample}


def _write(path, text):
    if path in (None, "-"):
        sys.stdout.write(text)
        return
    try:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    except OSError as exc:
        raise ConfigError(f"cannot write output {path!r}: {exc.strerror}") from exc


def build_parser():
    p = argparse.ArgumentParser(prog="equi-auction", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("--config", help="JSON configuration file")
    p.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                   help="dotted-key override, value parsed as JSON when possible")
    p.add_argument("--output", "-o", help="output path ('-' for stdout)")
    p.add_argument("--delta", type=float)
    p.add_argument("--draws", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--metric", choices=METRICS)
    p.add_argument("--signals", help="comma-separated profile or CSV file")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        raw = {}
        if args.config:
            try:
                with open(args.config) as fh:
                    raw = json.load(fh)
            except (OSError, json.JSONDecodeError) as exc:
                raise ConfigError(f"cannot read config {args.config!r}: {exc}") from exc
        for key in ("output", "delta", "draws", "seed", "metric", "signals"):
            val = getattr(args, key)
            if val is not None:
                raw[key] = val
        cfg = RunConfig.resolve(args.command, raw, args.set)
        out = HANDLERS[args.command](cfg)
        if isinstance(out, tuple):
            main_text, summary = out
            _write(cfg["output"], main_text)
            target = cfg["summary"]
            if target is None and cfg["output"] not in (None, "-"):
                target = str(cfg["output"]).rsplit(".", 1)[0] + ".summary.json"
            if target is not None:
                _write(target, summary)
        else:
            _write(cfg["output"], out)
    except (ValueError, TypeError) as exc:
        err = {"error": type(exc).__name__, "message": str(exc), "command": args.command}
        sys.stderr.write(json.dumps(err, sort_keys=True) + "\n")
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
