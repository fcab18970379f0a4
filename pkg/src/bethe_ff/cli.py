"""``bethe-ff`` command-line driver.

Configuration is a sectioned ``key = value`` text file::

    [model]
    zeta = pi/3
    h_frac = 0.5

Every command writes CSV tables plus ``run.json`` into ``output.directory``.
``run.json`` is byte-stable for identical inputs; wall times go to
``timings.json`` next to it.
"""

from __future__ import annotations

import argparse
import ast
import csv
import json
import math
import operator
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import __version__
from . import acceptance
from . import experiments as xp
from . import finite_bethe as fb
from . import lieb
from . import thermo_ff as tf
from .errors import BetheFFError, ComputationFailed, ConfigInvalid
from .lieb import ExcitationSpec, ModelParams

COMMANDS = ("selftest", "dressed", "boundary", "excitation", "ff-thermo", "bethe", "scaling")

# section -> key -> (kind, default); kinds are parsed by _parse_value
SCHEMA: Dict[str, Dict[str, tuple]] = {
    "model": {
        "zeta": ("real", "pi/3"),
        "J": ("real", "1"),
        "h": ("real?", None),
        "h_frac": ("real", "0.5"),
        "q": ("real?", None),
        "n_quad": ("int", "128"),
    },
    "excitation": {
        "strings": ("strings", ""),
        "holes_off": ("reals", ""),
        "umklapp": ("ints", "0,0"),
        "varkappa": ("kappa", "0,0"),
        "p_L": ("ints", ""),
        "h_L": ("ints", ""),
        "p_R": ("ints", ""),
        "h_R": ("ints", ""),
        "twist_alpha": ("real", "0"),
        "spin_deficit": ("int", "0"),
        "parity": ("int", "0"),
    },
    "contour": {
        "rho_radius": ("real?", None),
        "rho_nodes": ("int", "16"),
        "nodes_per_panel": ("int", "16"),
        "theta": ("complex", "0"),
    },
    "experiment": {
        "L": ("ints", "32,64,128,256"),
        "gamma": ("gamma", "+"),
        "family": ("family", "edge_particle"),
        "lambda_min": ("real", "-2"),
        "lambda_max": ("real", "2"),
        "n_lambda": ("int", "41"),
        "h_frac_min": ("real", "0.05"),
        "h_frac_max": ("real", "0.95"),
        "n_h": ("int", "19"),
        "N": ("int?", None),
        "holes": ("ints", ""),
        "particles": ("ints", ""),
        "checks": ("ints", "1,2,3,4,5,6,7,8,9,10,11,12"),
    },
    "tolerance": {k: ("real", repr(v)) for k, v in acceptance.DEFAULT_TOLERANCES.items()},
    "output": {
        "directory": ("str", "bethe_ff_out"),
        "formats": ("formats", "csv,json"),
    },
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul, ast.Div: operator.truediv,
           ast.Pow: operator.pow}
_NAMES = {"pi": math.pi, "j": 1j}


def _arith(text: str) -> complex:
    """Numbers combined with + - * / ** and the constant pi; nothing else is evaluated."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float, complex)):
            return node.value
        if isinstance(node, ast.Name) and node.id in _NAMES:
            return _NAMES[node.id]
        if isinstance(node, ast.UnaryOp) and isinstance(node.op, (ast.USub, ast.UAdd)):
            v = ev(node.operand)
            return -v if isinstance(node.op, ast.USub) else v
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        raise ValueError(f"unsupported expression {text!r}")

    try:
        return ev(ast.parse(text.strip(), mode="eval"))
    except SyntaxError as exc:
        raise ValueError(f"cannot parse {text!r}") from exc


def _real(text: str) -> float:
    v = _arith(text)
    if isinstance(v, complex):
        if v.imag:
            raise ValueError(f"{text!r} is not real")
        v = v.real
    return float(v)


def _int(text: str) -> int:
    v = _real(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _split(text: str) -> List[str]:
    return [t for t in (s.strip() for s in text.split(",")) if t]


def _parse_value(kind: str, text: Optional[str]):
    if kind.endswith("?"):
        if text is None or text.strip().lower() in ("", "none", "auto"):
            return None
        kind = kind[:-1]
    if text is None:
        raise ValueError("missing value")
    if kind == "real":
        return _real(text)
    if kind == "int":
        return _int(text)
    if kind == "complex":
        return complex(_arith(text))
    if kind == "reals":
        return tuple(_real(t) for t in _split(text))
    if kind == "ints":
        return tuple(_int(t) for t in _split(text))
    if kind == "kappa":
        if text.strip().lower() == "auto":
            return None
        v = tuple(_int(t) for t in _split(text))
        if len(v) != 2:
            raise ValueError("varkappa needs two integers or 'auto'")
        return v
    if kind == "strings":
        out = []
        for item in _split(text):
            r, _, c = item.partition(":")
            if not c:
                raise ValueError(f"string entry {item!r} must read r:center")
            out.append((_int(r), complex(_arith(c))))
        return tuple(out)
    if kind == "gamma":
        v = text.strip()
        if v not in ("+", "z"):
            raise ValueError("gamma must be '+' or 'z'")
        return v
    if kind == "family":
        v = text.strip()
        if v not in xp.FAMILIES:
            raise ValueError(f"family must be one of {sorted(xp.FAMILIES)}")
        return v
    if kind == "formats":
        v = tuple(_split(text))
        if not set(v) <= {"csv", "json"}:
            raise ValueError("formats are drawn from csv, json")
        return v
    if kind == "str":
        return text.strip()
    raise AssertionError(kind)


def read_config_text(text: str) -> Dict[str, Dict[str, str]]:
    """Raw ``{section: {key: text}}``; rejects unknown sections and keys."""
    raw: Dict[str, Dict[str, str]] = {}
    section = None
    for lineno, line in enumerate(text.splitlines(), 1):
        s = line.split("#", 1)[0].strip()
        if not s:
            continue
        if s.startswith("[") and s.endswith("]"):
            section = s[1:-1].strip()
            if section not in SCHEMA:
                raise ConfigInvalid(f"line {lineno}: unknown section [{section}]")
            raw.setdefault(section, {})
            continue
        if "=" not in s:
            raise ConfigInvalid(f"line {lineno}: expected key = value")
        if section is None:
            raise ConfigInvalid(f"line {lineno}: key outside of a section")
        key, value = (t.strip() for t in s.split("=", 1))
        _check_key(section, key)
        raw[section][key] = value
    return raw


def _check_key(section: str, key: str) -> None:
    if section not in SCHEMA:
        raise ConfigInvalid(f"unknown section {section!r}")
    if key not in SCHEMA[section]:
        raise ConfigInvalid(f"unknown key {section}.{key}")


def apply_overrides(raw: Dict[str, Dict[str, str]], overrides: Sequence[str]) -> None:
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigInvalid(f"--set expects section.key=value, got {item!r}")
        path, value = item.split("=", 1)
        section, key = path.strip().split(".", 1)
        _check_key(section, key)
        raw.setdefault(section, {})[key] = value.strip()


def resolve_config(raw: Dict[str, Dict[str, str]]) -> Dict[str, Dict[str, object]]:
    """Typed config with every default filled in."""
    out: Dict[str, Dict[str, object]] = {}
    for section, keys in SCHEMA.items():
        out[section] = {}
        for key, (kind, default) in keys.items():
            text = raw.get(section, {}).get(key, default)
            try:
                out[section][key] = _parse_value(kind, text)
            except ValueError as exc:
                raise ConfigInvalid(f"{section}.{key}: {exc}") from exc
    return out


def load_config(path: Optional[str], overrides: Sequence[str] = ()) -> Dict[str, Dict[str, object]]:
    raw: Dict[str, Dict[str, str]] = {}
    if path is not None:
        try:
            text = Path(path).read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigInvalid(f"cannot read config: {exc}") from exc
        raw = read_config_text(text)
    apply_overrides(raw, overrides)
    return resolve_config(raw)


# ------------------------------------------------------------- output

def fmt(x) -> str:
    """Round-trip-safe scientific notation, 17 significant digits."""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    if isinstance(x, str):
        return x
    return f"{float(x):.16e}"


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows([fmt(v) for v in row] for row in rows)


class Output:
    """Destination directory plus the table formats to emit (csv and/or json)."""

    def __init__(self, directory: Path, formats: Sequence[str]):
        self.directory = directory
        self.formats = tuple(formats)

    def table(self, name: str, header: Sequence[str], rows: Sequence[Sequence[object]]) -> None:
        if "csv" in self.formats:
            write_csv(self.directory / f"{name}.csv", header, rows)
        if "json" in self.formats:
            records = [{h: (v if isinstance(v, str) else fmt(v)) for h, v in zip(header, row)} for row in rows]
            _dump_json(self.directory / f"{name}.json", records)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, complex):
        return {"re": obj.real, "im": obj.imag}
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return repr(obj)
    return obj


def _dump_json(path: Path, payload) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(payload), fh, indent=2, sort_keys=True)
        fh.write("\n")


# ------------------------------------------------------------- builders

def model_params(cfg) -> ModelParams:
    m = cfg["model"]
    zeta, J, n = m["zeta"], m["J"], m["n_quad"]
    if m["q"] is not None:
        if m["h"] is not None:
            raise ConfigInvalid("give model.h or model.q, not both")
        return ModelParams(zeta=zeta, J=J, h=lieb.field_for_boundary(zeta, J, m["q"], n), q=m["q"], n_quad=n)
    h = m["h"] if m["h"] is not None else m["h_frac"] * lieb.critical_field(zeta, J)
    return ModelParams.from_field(zeta, J, h, n_quad=n)


def excitation_spec(cfg) -> ExcitationSpec:
    e = cfg["excitation"]
    if len(e["umklapp"]) != 2:
        raise ConfigInvalid("excitation.umklapp needs two integers")
    try:
        return _spec_from(e)
    except ValueError as exc:
        raise ConfigInvalid(f"excitation: {exc}") from exc


def _spec_from(e) -> ExcitationSpec:
    return ExcitationSpec(
        string_centers=e["strings"],
        holes_off=e["holes_off"],
        umklapp=e["umklapp"],
        varkappa=e["varkappa"],
        massless={k: e[k] for k in ("p_L", "h_L", "p_R", "h_R")},
        twist_alpha=e["twist_alpha"],
        spin_deficit=e["spin_deficit"],
        parity=e["parity"],
    )


# ------------------------------------------------------------- commands

def cmd_dressed(cfg, out: Output, workers: int) -> dict:
    P = model_params(cfg)
    th = lieb.Thermo.build(P)
    e = cfg["experiment"]
    lam = np.linspace(e["lambda_min"], e["lambda_max"], e["n_lambda"])
    p = np.real(th.p(lam))
    pp = np.real(th.pprime(lam))
    eps = np.real(th.eps(lam))
    Z = np.real(th.Z(lam))
    out.table("dressed", ("lambda", "p", "p_prime", "epsilon", "Z"), list(zip(lam, p, pp, eps, Z)))
    return {"q": P.q, "h": P.h, "fermi_velocity": th.fermi_velocity, "det_id_plus_K": lieb.fredholm_det_k(P)}


def _boundary_point(args):
    zeta, J, h, n = args
    return lieb.fermi_boundary(zeta, J, h, n_quad=n)


def cmd_boundary(cfg, out: Output, workers: int) -> dict:
    m, e = cfg["model"], cfg["experiment"]
    hc = lieb.critical_field(m["zeta"], m["J"])
    fracs = np.linspace(e["h_frac_min"], e["h_frac_max"], e["n_h"])
    jobs = [(m["zeta"], m["J"], float(f * hc), m["n_quad"]) for f in fracs]
    qs = _map(_boundary_point, jobs, workers)
    out.table("boundary", ("h", "h_over_hc", "q"), [(j[2], f, q) for j, f, q in zip(jobs, fracs, qs)])
    monotone = bool(np.all(np.diff(qs) < 0))
    return {"h_c": hc, "q_monotone_decreasing": monotone}


def cmd_excitation(cfg, out: Output, workers: int) -> dict:
    P = model_params(cfg)
    spec = excitation_spec(cfg)
    model = tf.AsymptoticModel(P, spec)
    ex = model.edge_exponents(0.0)
    rows = []
    E, Pm = lieb.excitation_observables(spec, P, thermo=model.th)
    rows.append(("inf", E.real, E.imag, Pm.real, Pm.imag))
    for L in cfg["experiment"]["L"]:
        E, Pm = lieb.excitation_observables(spec, P, L=L, thermo=model.th)
        rows.append((L, E.real, E.imag, Pm.real, Pm.imag))
    out.table("excitation", ("L", "energy_re", "energy_im", "momentum_re", "momentum_im"), rows)
    return {"f_L": ex.f_L, "f_R": ex.f_R, "kappa": list(model.kappa), "ell_kappa": list(model.ell_kappa)}


def _ff_point(args):
    P, spec, L, gamma, radius, n_nodes = args
    return tf.AsymptoticModel(P, spec).ff_asymptotics(L, gamma, radius, n_nodes)


def cmd_ff_thermo(cfg, out: Output, workers: int) -> dict:
    P = model_params(cfg)
    spec = excitation_spec(cfg)
    c, e = cfg["contour"], cfg["experiment"]
    model = tf.AsymptoticModel(P, spec)
    radius = c["rho_radius"] if c["rho_radius"] is not None else model.admissible_radius()
    Ls = e["L"]
    vals = _map(_ff_point, [(P, spec, L, e["gamma"], radius, c["rho_nodes"]) for L in Ls], workers)
    out.table("ff_thermo", ("L", "ff_asymptotic"), list(zip(Ls, vals)))
    info = {"rho_radius": radius, "gamma": e["gamma"]}
    if len(Ls) >= 2:
        info["slope"] = fb.loglog_slope(Ls, vals)
    return info


def cmd_bethe(cfg, out: Output, workers: int) -> dict:
    P = model_params(cfg)
    e = cfg["experiment"]
    rows = []
    for L in e["L"]:
        N = e["N"] if e["N"] is not None else xp.ground_count(P, L)
        gs = fb.solve_state(L, N, zeta=P.zeta)
        if e["holes"] or e["particles"]:
            qn = fb.particle_hole_numbers(N, e["holes"], e["particles"])
            st = fb.solve_state(L, N, quantum_numbers=qn, zeta=P.zeta)
        else:
            st = gs
        E = st.energy(P.J, P.h)
        rows.append((L, N, E, E - gs.energy(P.J, P.h), st.momentum, fb.norm_matrix_det(st), st.residual))
    out.table("bethe", ("L", "N", "energy", "excitation_energy", "momentum", "det_Xi", "residual"), rows)
    return {"det_id_plus_K": lieb.fredholm_det_k(P)}


def _scaling_point(args):
    family, P, gamma, L = args
    gs, ex, asym = xp.family_callback(family, P, gamma)(L)
    fin = fb.finite_form_factor(gs, ex, gamma)
    return L, abs(fin), asym


def cmd_scaling(cfg, out: Output, workers: int) -> dict:
    P = model_params(cfg)
    e = cfg["experiment"]
    pts = _map(_scaling_point, [(e["family"], P, e["gamma"], L) for L in e["L"]], workers)
    rows = [fb.ScalingRow(L, f, a) for L, f, a in pts]
    out.table("scaling", ("L", "value_finite", "value_asymptotic", "ratio"),
              [(r.L, r.value_finite, r.value_asymptotic, r.ratio) for r in rows])
    info = {}
    if len(rows) >= 2:
        sf_, ef = fb.loglog_slope([r.L for r in rows], [r.value_finite for r in rows])
        sa, ea = fb.loglog_slope([r.L for r in rows], [r.value_asymptotic for r in rows])
        out.table("scaling_fit", ("series", "slope", "stderr"), [("finite", sf_, ef), ("asymptotic", sa, ea)])
        info = {"slope_finite": sf_, "slope_asymptotic": sa}
    return info


def cmd_selftest(cfg, out: Output, workers: int) -> dict:
    results = acceptance.run_all(cfg["tolerance"], only=cfg["experiment"]["checks"])
    out.table("selftest", ("check", "passed", "summary"),
              [(r.number, "true" if r.passed else "false", r.summary) for r in results])
    for r in results:
        print(r.line(), flush=True)
    checks = {str(r.number): {"name": r.name, "passed": r.passed, "summary": r.summary} for r in results}
    timings = {str(r.number): r.seconds for r in results}
    failed = [r.number for r in results if not r.passed]
    return {"checks": checks, "_timings": timings, "_failed": failed}


HANDLERS = {
    "selftest": cmd_selftest,
    "dressed": cmd_dressed,
    "boundary": cmd_boundary,
    "excitation": cmd_excitation,
    "ff-thermo": cmd_ff_thermo,
    "bethe": cmd_bethe,
    "scaling": cmd_scaling,
}


def _map(func, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [func(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, jobs))


def _workers(flag: Optional[int]) -> int:
    if flag is not None:
        return max(1, flag)
    env = os.environ.get("BETHE_FF_WORKERS")
    if env:
        try:
            return max(1, int(env))
        except ValueError as exc:
            raise ConfigInvalid(f"BETHE_FF_WORKERS must be an integer, got {env!r}") from exc
    return 1


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="bethe-ff", description="XXZ form-factor asymptotics and finite-L checks")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", help="sectioned key = value file")
    ap.add_argument("--set", dest="overrides", action="append", default=[], metavar="SECTION.KEY=VALUE")
    ap.add_argument("--workers", type=int, default=None)
    return ap


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    manifest: dict = {"command": args.command, "version": __version__, "status": "ok"}
    timings: dict = {}
    out = Path(".")
    code = 0
    t0 = time.perf_counter()
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            cfg = load_config(args.config, args.overrides)
            manifest["config"] = cfg
            out = Path(str(cfg["output"]["directory"]))
            out.mkdir(parents=True, exist_ok=True)
            workers = _workers(args.workers)
            try:
                info = HANDLERS[args.command](cfg, Output(out, cfg["output"]["formats"]), workers)
            except (BetheFFError, ValueError, ArithmeticError, np.linalg.LinAlgError) as exc:
                if isinstance(exc, ConfigInvalid):
                    raise
                raise ComputationFailed(f"{type(exc).__name__}: {exc}") from exc
            timings.update(info.pop("_timings", {}))
            failed = info.pop("_failed", [])
            manifest["result"] = info
            if failed:
                manifest["status"] = "checks_failed"
                manifest["failed_checks"] = failed
                code = 1
        except ConfigInvalid as exc:
            manifest["status"] = "config_invalid"
            manifest["error"] = str(exc)
            code = 2
        except ComputationFailed as exc:
            manifest["status"] = "computation_failed"
            manifest["error"] = str(exc)
            code = 1
        except Exception as exc:  # still leave a manifest behind
            manifest["status"] = "internal_error"
            manifest["error"] = f"{type(exc).__name__}: {exc}"
            code = 3
    manifest["warnings"] = sorted({f"{w.category.__name__}: {w.message}" for w in caught})
    timings["total"] = time.perf_counter() - t0
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError:
        out = Path(".")
    _dump_json(out / "run.json", manifest)
    _dump_json(out / "timings.json", timings)
    if code:
        print(f"bethe-ff {args.command}: {manifest['status']}" + (f": {manifest.get('error')}" if "error" in manifest else ""),
              file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
