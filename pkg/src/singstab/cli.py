"""Configuration-driven runs: one task per invocation, artifacts on disk.

A run reads an INI file with a ``[potential]`` section, an optional
``[run]`` section (seed, tol) and one section named after the task::

    [potential]
    family = poly
    epsilons = 1.5, 2.0
    alpha = 1.0

    [criteria]
    r_max = 1e12

and writes into ``--out``:

* ``manifest.ini`` - the fully resolved configuration (re-usable as --config);
* ``summary.json`` - verdicts and fitted constants, each number paired with
  its error or tolerance;
* task CSV files with fixed headers (see ``CSV_HEADERS``).

Exit status: 0 success, 2 invalid configuration or a theorem hypothesis
that fails its check, 1 numerical failure.
"""
import argparse
import configparser
import contextlib
import csv
import io
import json
import math
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from .coefficients import ExpressionError
from .functions import TestFunction, atom_from_spec, log_of
from .measure import (HypothesisNotMet, NumericalError, SpecificationError, criteria_profile,
                      direction_grid, make_potential)

TASKS = ("criteria", "rates", "form", "lyapunov", "gap", "simulate", "report")

CSV_HEADERS = {
    "phi.csv": ("radius", "phi", "log_phi"),
    "diagnostics.csv": ("diagnostic", "radius", "value", "verdict"),
    "rates.csv": ("family", "params", "argument", "value", "log_value", "verdict"),
    "residuals.csv": ("kind", "params", "lhs", "rhs", "minimal_constant", "tolerance"),
    "drift.csv": ("radius", "direction", "L_phi", "Lambda", "phi", "ratio"),
    "gap.csv": ("R", "n", "lambda1", "ratio_to_previous_R", "verdict"),
    "decay.csv": ("t", "rho_hat", "stderr"),
    "fit.csv": ("fit_tag", "slope_or_rate", "ci_low", "ci_high"),
    "occupation.csv": ("chains", "jumps_per_chain", "accepted", "acceptance_rate", "ks"),
    "report.csv": ("run", "task", "key", "value", "error"),
}


# tolerance used when [run] tol is empty: Phi-table relative tolerance
# (criteria, rates), generator two-level error (lyapunov), eigen-residual (gap)
DEFAULT_TOL = {"criteria": 1e-3, "rates": 1e-3, "lyapunov": 1e-6, "gap": 1e-8}


class ConfigError(SpecificationError):
    """Invalid or unknown configuration entry."""


# ---------------------------------------------------------------------------
# schema
# ---------------------------------------------------------------------------

def _floats(text):
    return [float(v) for v in text.replace(";", ",").split(",") if v.strip()]


def _strings(text):
    return [v.strip() for v in text.split(",") if v.strip()]


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, (list, tuple)):
        return ", ".join(_fmt(v) for v in value)
    return str(value)


def _bool(text):
    t = text.strip().lower()
    if t in ("yes", "true", "1", "on"):
        return True
    if t in ("no", "false", "0", "off"):
        return False
    raise ValueError(f"expected yes/no, got {text!r}")


def _choice(*options):
    def parse(text):
        t = text.strip()
        if t not in options:
            raise ValueError(f"expected one of {', '.join(options)}, got {t!r}")
        return t
    return parse


# (parser, default); default None means "module default" and an empty value.
SCHEMA = {
    "potential": {
        "family": (_choice("poly", "log", "variable"), None),
        "dimension": (int, None),
        "epsilons": (_floats, None),
        "coefficients": (lambda t: [c.strip() for c in t.split(";") if c.strip()], None),
        "alpha": (float, None),
    },
    "run": {
        "task": (_choice(*TASKS), None),
        "seed": (int, 0),
        "tol": (float, None),
    },
    "criteria": {
        "gamma": (float, None),
        "r_max": (float, 1e12),
    },
    "rates": {
        "s_min": (float, 1e-3),
        "s_max": (float, 1e-1),
        "r_min": (float, 1e-3),
        "r_max": (float, 1e-1),
        "points": (int, 9),
        "c": (float, 1.0),
        "entropy": (_bool, True),
    },
    "form": {
        "f": (str, "bump 0 1"),
        "g": (str, None),
        "truncation": (_choice("full", "above_one"), "full"),
        "residuals": (_strings, ["poincare"]),
        "s": (float, 0.1),
        "r": (float, 0.1),
        "t": (float, 0.1),
        "ball": (float, 1.0),
    },
    "lyapunov": {
        "gamma": (float, None),
        "r_min": (float, 1.0),
        "r_max": (float, 1e3),
        "radii": (int, 16),
        "directions": (int, None),
    },
    "gap": {
        "radii": (_floats, [25.0, 50.0, 100.0]),
        "n": (int, 1024),
    },
    "simulate": {
        "mode": (_choice("decay", "occupation"), "decay"),
        "function": (str, "bump 0 1"),
        "horizon": (float, 100.0),
        "trajectories": (int, 2000),
        "delta": (float, 1.0),
        "batch": (int, 500),
        "t_min": (float, None),
        "method": (_choice("auto", "product", "thinning"), "auto"),
        "chains": (int, 1000),
        "jumps": (int, 1000),
        "axis": (int, 0),
    },
    "report": {
        "inputs": (_strings, []),
    },
}


class RunConfig:
    """Resolved configuration: every key of the used sections, defaults filled."""

    def __init__(self, task, sections, source="<command line>"):
        self.task = task
        self.sections = sections
        self.source = source

    @property
    def potential(self):
        return self.sections["potential"]

    @property
    def params(self):
        return self.sections[self.task]

    @property
    def seed(self):
        return self.sections["run"]["seed"]

    @property
    def tol(self):
        return self.sections["run"]["tol"]

    def manifest(self):
        cp = configparser.ConfigParser(interpolation=None)
        for name, values in self.sections.items():
            cp[name] = {k: "; ".join(v) if k == "coefficients" and v else _fmt(v)
                        for k, v in values.items()}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()


def _fail(source, where, msg):
    raise ConfigError(f"{source}: {where}: {msg}")


def load_config(path, task, seed=None, tol=None):
    """Parse and validate an INI file (``path=None`` gives an empty one)."""
    source = str(path) if path is not None else "<command line>"
    cp = configparser.ConfigParser(interpolation=None)
    if path is not None:
        try:
            with open(path) as fh:
                cp.read_file(fh)
        except OSError as exc:
            raise ConfigError(f"{source}: cannot read: {exc.strerror}") from None
        except configparser.Error as exc:
            raise ConfigError(f"{source}: {exc}") from None
    for name in cp.sections():
        if name not in SCHEMA:
            _fail(source, f"[{name}]", f"unknown section (known: {', '.join(SCHEMA)})")
        for key in cp[name]:
            if key not in SCHEMA[name]:
                _fail(source, f"[{name}] {key}", "unknown key")
    # sections of other tasks are checked for unknown keys but otherwise ignored
    wanted = ["run", task] if task == "report" else ["potential", "run", task]
    sections = {}
    for name in wanted:
        raw = dict(cp[name]) if cp.has_section(name) else {}
        out = {}
        for key, (parse, default) in SCHEMA[name].items():
            text = raw.get(key, "").strip()
            if not text:
                out[key] = default
                continue
            try:
                out[key] = parse(text)
            except (ValueError, TypeError) as exc:
                _fail(source, f"[{name}] {key}", str(exc))
        sections[name] = out
    run = sections["run"]
    if run["task"] is not None and run["task"] != task:
        _fail(source, "[run] task", f"config is for task {run['task']!r}, command is {task!r}")
    run["task"] = task
    if seed is not None:
        run["seed"] = int(seed)
    if tol is not None:
        run["tol"] = float(tol)
    if run["tol"] is not None and not run["tol"] > 0:
        _fail(source, "[run] tol", "must be positive")
    if "potential" in sections:
        _resolve_potential(sections["potential"], source)
        alpha = sections["potential"]["alpha"]
        if task in ("criteria", "lyapunov") and sections[task]["gamma"] is None:
            sections[task]["gamma"] = min(alpha, 1.0) / 2
    if run["tol"] is None:
        run["tol"] = DEFAULT_TOL.get(task)
    cfg = RunConfig(task, sections, source)
    _validate_task(cfg)
    return cfg


def _resolve_potential(p, source):
    if p["family"] is None:
        _fail(source, "[potential] family", "required (poly, log or variable)")
    if p["alpha"] is None:
        _fail(source, "[potential] alpha", "required")
    if not 0 < p["alpha"] < 2:
        _fail(source, "[potential] alpha", f"must lie in (0, 2), got {p['alpha']}")
    if p["family"] == "variable":
        if not p["coefficients"]:
            _fail(source, "[potential] coefficients", "required for the variable family")
        if p["epsilons"]:
            _fail(source, "[potential] epsilons", "not used by the variable family")
        n = len(p["coefficients"])
    else:
        if not p["epsilons"]:
            _fail(source, "[potential] epsilons", f"required for the {p['family']} family")
        if p["coefficients"]:
            _fail(source, "[potential] coefficients", "only used by the variable family")
        n = len(p["epsilons"])
    if p["dimension"] is None:
        p["dimension"] = n
    elif p["dimension"] != n:
        _fail(source, "[potential] dimension", f"{p['dimension']} does not match {n} axis entries")
    if not 1 <= n <= 3:
        _fail(source, "[potential] dimension", f"must be 1, 2 or 3, got {n}")


def _validate_task(cfg):
    p, src = cfg.params, cfg.source
    t = cfg.task
    if t == "gap":
        if cfg.potential["dimension"] > 2:
            _fail(src, "[potential] dimension", "the gap task supports dimension 1 or 2 only")
        if not p["radii"] or any(not r > 0 for r in p["radii"]):
            _fail(src, "[gap] radii", "need at least one positive radius")
    elif t == "rates":
        if not 0 < p["s_min"] < p["s_max"]:
            _fail(src, "[rates] s_min", "need 0 < s_min < s_max")
        if not 0 < p["r_min"] < p["r_max"]:
            _fail(src, "[rates] r_min", "need 0 < r_min < r_max")
        if p["points"] < 3:
            _fail(src, "[rates] points", "need at least 3")
    elif t == "lyapunov":
        if not 0 < p["r_min"] < p["r_max"]:
            _fail(src, "[lyapunov] r_min", "need 0 < r_min < r_max")
    elif t == "simulate":
        if p["trajectories"] < 2 or p["batch"] < 1:
            _fail(src, "[simulate] trajectories", "need at least 2 trajectories and batch >= 1")
        if not p["horizon"] > 0 or not p["delta"] > 0:
            _fail(src, "[simulate] horizon", "horizon and delta must be positive")
        if not 0 <= p["axis"] < cfg.potential["dimension"]:
            _fail(src, "[simulate] axis", "outside the dimension")
    elif t == "report":
        if not p["inputs"]:
            _fail(src, "[report] inputs", "list at least one run directory")
    if t in ("form", "simulate"):
        for key in ("f", "g", "function"):
            if p.get(key):
                try:
                    parse_function(p[key], cfg.potential["dimension"])
                except SpecificationError as exc:
                    _fail(src, f"[{t}] {key}", str(exc))
    if t == "form":
        kinds = {"poincare", "super_poincare", "local_super", "entropy", "weak"}
        bad = [k for k in p["residuals"] if k not in kinds]
        if bad:
            _fail(src, "[form] residuals", f"unknown kind(s) {bad}; known: {sorted(kinds)}")


def parse_function(text, dimension):
    """``"1 * constant 1 + 0.5 * bump 0 1; gaussian 0 2"`` -> sum of tensor products.

    Terms are separated by ``+``, an optional ``c *`` prefix scales a term,
    and ``;`` separates the atoms of consecutive axes.  Missing trailing
    axes are filled with the constant 1.
    """
    terms = []
    for term in text.split("+"):
        coef, _, body = term.rpartition("*")
        try:
            c = float(coef) if coef.strip() else 1.0
        except ValueError:
            raise SpecificationError(f"bad coefficient {coef.strip()!r} in {text!r}") from None
        parts = [p.strip() for p in body.split(";") if p.strip()]
        if not parts or len(parts) > dimension:
            raise SpecificationError(f"need 1..{dimension} atoms separated by ';', got {term!r}")
        atoms = []
        for part in parts:
            kind, *args = part.split()
            try:
                atoms.append(atom_from_spec(kind, *map(float, args)))
            except (TypeError, ValueError) as exc:
                raise SpecificationError(f"bad atom {part!r}: {exc}") from None
        atoms += [atom_from_spec("constant", 1.0)] * (dimension - len(atoms))
        terms.append((c, tuple(atoms)))
    return TestFunction(terms)


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer, int)):
        return int(v)
    if isinstance(v, (np.floating, float)):
        v = float(v)
        return v if math.isfinite(v) else repr(v)
    return v


def num(value, error):
    """A summary number with its error bar or tolerance."""
    return {"value": value, "error": error}


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    if v is None:
        return ""
    return str(v)


def _atomic_write(path, text):
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        with contextlib.suppress(OSError):
            os.unlink(tmp)
        raise


class Artifacts:
    def __init__(self, out):
        self.out = Path(out)
        self.out.mkdir(parents=True, exist_ok=True)
        self.files = []

    def csv(self, name, rows):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_HEADERS[name])
        for row in rows:
            if len(row) != len(CSV_HEADERS[name]):
                raise AssertionError(f"{name}: row of length {len(row)}")
            w.writerow([_cell(v) for v in row])
        _atomic_write(self.out / name, buf.getvalue())
        self.files.append(name)

    def text(self, name, text):
        _atomic_write(self.out / name, text)
        self.files.append(name)

    def summary(self, data):
        data = dict(data, files=sorted(self.files + ["summary.json"]))
        text = json.dumps(_jsonable(data), indent=2, sort_keys=True, allow_nan=False) + "\n"
        _atomic_write(self.out / "summary.json", text)


def _params_text(d):
    return ";".join(f"{k}={_cell(v)}" for k, v in d.items())


# ---------------------------------------------------------------------------
# tasks
# ---------------------------------------------------------------------------

def build_potential(cfg):
    p = cfg.potential
    return make_potential(p["family"], p["dimension"], p["epsilons"], p["alpha"],
                          p["coefficients"])


def task_criteria(cfg, pot, art):
    from .rates import poincare_verdict
    p = cfg.params
    alpha = cfg.potential["alpha"]
    tol = cfg.tol
    prof = criteria_profile(pot, alpha, gamma=p["gamma"], r_max=p["r_max"], tol=tol)
    ver = poincare_verdict(pot, prof, alpha)
    art.csv("phi.csv", [(r, v, lv) for r, v, lv in
                        zip(prof.phi.radii, prof.phi.values, prof.phi.log_values)])
    rows = []
    for diag in (prof.limsup, prof.liminf, prof.growth):
        rows += [(diag.name, r, v, diag.verdict) for r, v in diag.rows()]
    art.csv("diagnostics.csv", rows)
    return {
        "poincare": {"verdict": ver.verdict, "reason": ver.reason},
        "gamma": num(prof.gamma, 0.0),
        "limsup": {"verdict": prof.limsup.verdict, "slope": num(prof.limsup.slope, tol)},
        "liminf": {"verdict": prof.liminf.verdict, "slope": num(prof.liminf.slope, tol)},
        "phi_growth": {"verdict": prof.growth.verdict, "slope": num(prof.growth.slope, tol)},
        "phi_at_top": num(prof.phi.limit(), tol * prof.phi.limit()),
    }


def _slope_with_spread(rate, lo, hi, n):
    """Fitted log-log slope; the error is half the gap between the slopes
    over the two halves of the range (a curvature indicator)."""
    from .rates import fitted_slope
    mid = math.sqrt(lo * hi)
    s = fitted_slope(rate, lo, hi, n)
    s1 = fitted_slope(rate, lo, mid, max(3, n // 2 + 1))
    s2 = fitted_slope(rate, mid, hi, max(3, n // 2 + 1))
    return num(s, abs(s1 - s2) / 2)


def task_rates(cfg, pot, art):
    from . import rates as R
    p = cfg.params
    alpha = cfg.potential["alpha"]
    fam = cfg.potential["family"]
    ss = np.geomspace(p["s_min"], p["s_max"], p["points"])
    rs = np.geomspace(p["r_min"], p["r_max"], p["points"])
    rows = []
    out = {}

    def table(rate, xs, verdict):
        rows.extend((rate.family, _params_text(rate.params), x, v, lv, verdict)
                    for x, v, lv in rate.table(xs))

    ver = R.poincare_verdict(pot, alpha=alpha)
    out["poincare"] = {"verdict": ver.verdict, "reason": ver.reason}
    eps = cfg.potential["epsilons"]
    if fam == "poly":
        e_star = min(eps)
        if e_star > alpha:
            rate = R.poly_beta_rate(alpha, eps, p["c"])
            table(rate, ss, R.HOLDS)
            out["super_poincare"] = {"verdict": R.HOLDS,
                                     "exponent": num(rate.params["exponent"], 0.0)}
        else:
            out["super_poincare"] = {"verdict": R.FAILS,
                                     "reason": f"min eps {e_star} is not above alpha {alpha}"}
        if 0 < e_star < alpha:
            eta, env = R.weak_eta_closed_form("poly", alpha, eps, 1.0, p["c"])
            out["weak_closed_form"] = {"decay": env.params["law"],
                                       "decay_exponent": num(env.params["exponent"], 0.0)}
    elif fam == "log":
        e_star = min(eps)
        out["log_sobolev"] = {"verdict": R.HOLDS if R.logsobolev_iff(eps) else R.FAILS}
        if e_star > 0:
            rate = R.log_beta_rate(alpha, eps, p["c"])
            table(rate, ss, R.HOLDS)
            out["super_poincare"] = {"verdict": R.HOLDS,
                                     "inner_exponent": num(rate.params["inner_exponent"], 0.0)}
        else:
            out["super_poincare"] = {"verdict": R.FAILS,
                                     "reason": f"min eps {e_star} is not positive"}
        if e_star < 0:
            _, env = R.weak_eta_closed_form("log", alpha, eps, 1.0, p["c"])
            out["weak_closed_form"] = {"decay": env.params["law"],
                                       "decay_exponent": num(env.params["exponent"], 0.0)}
    else:
        rep = R.variable_order_analyze(pot, alpha)
        out["variable_order"] = {
            "A_star": num(rep.A_star, rep.eps_slack), "stabilized": rep.stabilized,
            "B": [num(b, 0.0) for b in rep.B], "poincare": rep.poincare,
            "beta_exponent": (None if rep.beta_exponent is None
                              else num(rep.beta_exponent, 0.0)),
        }

    # numeric super-Poincare rate from the criteria profile
    prof = criteria_profile(pot, alpha, tol=cfg.tol)
    try:
        sp = R.super_poincare_rate(pot, prof)
        table(sp, ss, R.HOLDS)
        out["super_poincare_numeric"] = {
            "verdict": R.HOLDS,
            "slope": _slope_with_spread(sp, p["s_min"], p["s_max"], p["points"])}
    except HypothesisNotMet as exc:
        out["super_poincare_numeric"] = {"verdict": R.UNKNOWN, "reason": str(exc)}

    # numeric weak rate (only meaningful when Poincare fails)
    if ver.verdict != R.HOLDS and pot.is_product:
        try:
            wr = R.weak_eta_rate(pot, alpha, C=p["c"])
            table(wr, rs, R.HOLDS)
            out["weak_numeric"] = {
                "verdict": R.HOLDS,
                "slope": _slope_with_spread(wr, p["r_min"], p["r_max"], p["points"])}
        except HypothesisNotMet as exc:
            out["weak_numeric"] = {"verdict": R.UNKNOWN, "reason": str(exc)}

    if p["entropy"] and pot.is_product:
        ec = R.entropy_condition(pot, alpha)
        fine = R.entropy_condition(pot, alpha, n=400)
        out["entropy"] = {
            "verdict": ec.verdict,
            "C": [num(c, abs(c - c2)) for c, c2 in zip(ec.C, fine.C)],
            "constant": num(ec.constant, abs(ec.constant - fine.constant)
                            if math.isfinite(ec.constant) else math.nan),
        }
    art.csv("rates.csv", rows)
    return out


def task_form(cfg, pot, art):
    from . import forms as F
    from .quadrature import DEFAULT
    p = cfg.params
    alpha = cfg.potential["alpha"]
    d = cfg.potential["dimension"]
    f = parse_function(p["f"], d)
    g = parse_function(p["g"], d) if p["g"] else None
    quad = DEFAULT
    mean, var = F.variance_and_mean(pot, f, quad)
    out = {"mean": num(mean.value, mean.error), "variance": num(var.value, var.error)}
    if g is None:
        D = F.dirichlet_form(pot, f, alpha, quad, truncation=p["truncation"], tol=cfg.tol)
    else:
        D = F.bilinear_form(pot, f, g, alpha, quad, truncation=p["truncation"], tol=cfg.tol)
        chk = F.identity_check(pot, f, g, alpha, quad)
        out["identity"] = {"verdict": "PASS" if chk.passed else "FAIL",
                           "difference": num(chk.difference, chk.tolerance)}
    out["energy"] = num(D.value, D.error)
    rows = []
    for kind in p["residuals"]:
        if kind == "super_poincare":
            res = F.inequality_residual(kind, pot, f, alpha, quad, s=p["s"])
        elif kind == "local_super":
            res = F.inequality_residual(kind, pot, f, alpha, quad, r=p["ball"], t=p["t"])
        elif kind == "weak":
            res = F.inequality_residual(kind, pot, f, alpha, quad, r=p["r"])
        elif kind == "entropy":
            lo, _ = f.bounds()
            if not lo > 0:
                raise ConfigError(f"{cfg.source}: [form] f: entropy residual needs a positive "
                                  f"function (lower bound {lo:g})")
            res = F.inequality_residual(kind, pot, f, alpha, quad, log_f=log_of(f))
        else:
            res = F.inequality_residual(kind, pot, f, alpha, quad)
        rows.append((res.kind, _params_text(res.params), res.lhs, res.rhs,
                     res.minimal_constant, res.tolerance))
        out.setdefault("residuals", {})[kind] = {
            "lhs": num(res.lhs, res.tolerance), "rhs": num(res.rhs, res.tolerance),
            "minimal_constant": (None if res.minimal_constant is None
                                 else num(res.minimal_constant, res.tolerance))}
    art.csv("residuals.csv", rows)
    return out


def task_lyapunov(cfg, pot, art):
    from .lyapunov import drift_verify
    p = cfg.params
    alpha = cfg.potential["alpha"]
    gamma = p["gamma"]
    radii = np.geomspace(p["r_min"], p["r_max"], p["radii"])
    dirs = None if p["directions"] is None else direction_grid(pot.dimension, p["directions"])
    rep = drift_verify(pot, gamma, alpha, radii=radii, directions=dirs, tol=cfg.tol)
    art.csv("drift.csv", rep.rows())
    err = float(np.max(rep.L_phi_error))
    return {"verdict": rep.verdict, "gamma": num(gamma, 0.0), "r0": num(rep.r0, 0.0),
            "C1": num(rep.C1, err), "C2": num(rep.C2, err),
            "generator_error_max": num(err, 0.0), "notes": rep.notes}


def task_gap(cfg, pot, art):
    from .spectral import gap_sweep
    p = cfg.params
    recs, verdict = gap_sweep(pot, cfg.potential["alpha"], p["radii"], n=p["n"],
                              tol=cfg.tol)
    art.csv("gap.csv", [r.row() for r in recs])
    return {"verdict": verdict,
            "lambda1": [num(r.lambda1, r.residual) for r in recs],
            "ratios": [num(r.ratio, 0.0) for r in recs[1:]]}


def task_simulate(cfg, pot, art):
    from . import simulate as S
    p = cfg.params
    alpha = cfg.potential["alpha"]
    if p["mode"] == "occupation":
        ks, acc, rate = S.occupation_ks(pot, alpha, p["chains"], p["jumps"], seed=cfg.seed,
                                        delta=p["delta"], axis=p["axis"], method=p["method"])
        art.csv("occupation.csv", [(p["chains"], p["jumps"], acc, rate, ks)])
        # KS error bar: the asymptotic 95% band for i.i.d. samples of that size
        return {"ks": num(ks, 1.36 / math.sqrt(acc)), "accepted": acc,
                "acceptance_rate": num(rate, 0.0)}
    f = parse_function(p["function"], pot.dimension)
    rep, fit = S.decay_estimate(pot, f, p["horizon"], p["trajectories"], alpha,
                                delta=p["delta"], seed=cfg.seed, batch=p["batch"],
                                t_min=p["t_min"], method=p["method"])
    art.csv("decay.csv", rep.rows())
    out = {"trajectories": rep.trajectories, "variance": num(rep.variance, float(rep.stderr[0])),
           "acceptance_rate": num(rep.acceptance_rate, 0.0), "notes": rep.notes}
    if fit is None:
        art.csv("fit.csv", [])
        out["fit"] = None
    else:
        art.csv("fit.csv", [(fit.law, fit.slope, fit.ci_low, fit.ci_high)])
        out["fit"] = {"law": fit.law, "slope_or_rate": num(fit.slope, fit.stderr),
                      "points": fit.n_points}
    return out


def _flatten(prefix, v, rows):
    if isinstance(v, dict) and set(v) == {"value", "error"}:
        rows.append((prefix, v["value"], v["error"]))
    elif isinstance(v, dict):
        for k in sorted(v):
            _flatten(f"{prefix}.{k}" if prefix else k, v[k], rows)
    elif isinstance(v, list):
        for i, x in enumerate(v):
            _flatten(f"{prefix}[{i}]", x, rows)
    else:
        rows.append((prefix, v, ""))


def task_report(cfg, pot, art):
    rows, runs = [], []
    for d in cfg.params["inputs"]:
        path = Path(d) / "summary.json"
        try:
            data = json.loads(path.read_text())
        except (OSError, ValueError) as exc:
            raise ConfigError(f"{cfg.source}: [report] inputs: cannot read {path}: {exc}") from None
        task = data.get("task", "")
        flat = []
        _flatten("", data.get("results", {}), flat)
        rows += [(d, task, k, v, e) for k, v, e in flat]
        runs.append({"run": d, "task": task,
                     "verdicts": {k: v for k, v, _ in flat if k.endswith("verdict")}})
    art.csv("report.csv", rows)
    return {"runs": runs}


TASK_FUNCS = {"criteria": task_criteria, "rates": task_rates, "form": task_form,
              "lyapunov": task_lyapunov, "gap": task_gap, "simulate": task_simulate,
              "report": task_report}


def run(cfg, out):
    """Execute one configured task and write its artifacts into ``out``."""
    art = Artifacts(out)
    pot = build_potential(cfg) if cfg.task != "report" else None
    results = TASK_FUNCS[cfg.task](cfg, pot, art)
    art.text("manifest.ini", cfg.manifest())
    art.summary({"task": cfg.task, "seed": cfg.seed,
                 "potential": cfg.sections.get("potential"), "results": results})
    return results


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _limit_threads(n):
    if n is None:
        return contextlib.nullcontext()
    try:
        from threadpoolctl import threadpool_limits
    except ImportError:
        for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
            os.environ[var] = str(n)
        return contextlib.nullcontext()
    return threadpool_limits(limits=n)


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, default=None, help="INI configuration file")
    common.add_argument("--seed", type=int, default=None, help="overrides [run] seed")
    common.add_argument("--out", type=Path, default=None,
                        help="output directory (default: runs/<task>)")
    common.add_argument("--tol", type=float, default=None, help="overrides [run] tol")
    common.add_argument("--threads", type=int, default=None, help="BLAS/OpenMP thread limit")
    parser = argparse.ArgumentParser(prog="singstab", description=__doc__.split("\n")[0])
    sub = parser.add_subparsers(dest="task", required=True)
    helps = {"criteria": "Phi table, tail diagnostics and the Poincare verdict",
             "rates": "super-Poincare, weak and log-Sobolev rate functions",
             "form": "Dirichlet form and inequality residuals of one test function",
             "lyapunov": "drift verification of the truncated generator",
             "gap": "spectral gap sweep over growing boxes (dimension <= 2)",
             "simulate": "decay of autocovariances or occupation KS for the jump chain",
             "report": "collect summaries of earlier runs into one table"}
    for t in TASKS:
        sub.add_parser(t, parents=[common], help=helps[t])
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    source = str(args.config) if args.config else "<command line>"
    try:
        cfg = load_config(args.config, args.task, seed=args.seed, tol=args.tol)
        out = args.out if args.out is not None else Path("runs") / args.task
        with _limit_threads(args.threads):
            results = run(cfg, out)
    except (HypothesisNotMet, SpecificationError, ExpressionError) as exc:
        msg = str(exc)
        if not msg.startswith(source):
            msg = f"{source}: {args.task}: {msg}"
        print(f"error: {msg}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"numerical failure: {source}: {args.task}: {exc}", file=sys.stderr)
        return 1
    verdicts = {k: v["verdict"] for k, v in results.items()
                if isinstance(v, dict) and "verdict" in v}
    if "verdict" in results:
        verdicts[args.task] = results["verdict"]
    line = ", ".join(f"{k}={v}" for k, v in sorted(verdicts.items()))
    print(f"{args.task}: wrote {out}" + (f" ({line})" if line else ""))
    return 0


if __name__ == "__main__":
    sys.exit(main())
