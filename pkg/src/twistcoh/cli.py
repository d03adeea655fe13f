"""Batch command line: ``twistcoh {betti,verify,scan,gate,lcs} --config run.json``.

A run is described by one JSON document (see :class:`RunConfig`); dotted
``--set key=value`` overrides patch it before validation.  The report is
written as canonical JSON (plus a spectra CSV when there is a spectrum) to
the configured output directory, which ``TWISTCOH_OUTPUT_DIR`` overrides.

Exit codes: 0 when every check passes, 1 when some check fails, 2 when the
configuration is rejected (a JSON error record goes to stdout).
"""

from __future__ import annotations

import argparse
import copy
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from importlib import resources
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np

from . import curvature as cv
from . import lcs
from . import mapping_torus as mt
from . import simplicial as sc
from . import torus as tt
from .modes import TrigPolynomial
from .report import BettiReport, emit, to_json
from .verify import run_suite

OUTPUT_ENV = "TWISTCOH_OUTPUT_DIR"
BACKENDS = ("torus", "simplicial", "mapping_torus", "lie_gate", "lcs_check")
VERBS = {
    "betti": ("torus", "simplicial", "mapping_torus"),
    "verify": ("torus", "mapping_torus"),
    "scan": ("mapping_torus",),
    "gate": ("lie_gate",),
    "lcs": ("lcs_check",),
}
CONFIG_KEYS = {"backend", "model", "twist", "cutoff", "tolerances", "seed", "samples", "output",
               "timings", "workers", "scan", "golden", "expect"}
DEFAULT_TOLERANCES = {"rank": 1e-8, "residual": 1e-8}


class ConfigError(ValueError):
    def __init__(self, message: str, key: Optional[str] = None):
        super().__init__(message)
        self.key = key

    def record(self) -> Dict[str, Any]:
        return {"status": "ERROR", "error": {"type": "config", "key": self.key, "message": str(self)}}


@dataclass
class RunConfig:
    backend: str
    model: Dict[str, Any] = field(default_factory=dict)
    twist: Dict[str, Any] = field(default_factory=dict)
    cutoff: Optional[int] = None
    tolerances: Dict[str, float] = field(default_factory=lambda: dict(DEFAULT_TOLERANCES))
    seed: int = 0
    samples: int = 50
    output: Dict[str, Any] = field(default_factory=dict)
    timings: bool = False
    workers: int = 1
    scan: Dict[str, Any] = field(default_factory=dict)
    golden: Optional[str] = None
    expect: Optional[Any] = None

    @classmethod
    def from_dict(cls, raw: Dict[str, Any]) -> "RunConfig":
        if not isinstance(raw, dict):
            raise ConfigError("configuration must be a JSON object")
        unknown = sorted(set(raw) - CONFIG_KEYS)
        if unknown:
            raise ConfigError(f"unknown configuration keys {unknown}", unknown[0])
        if "backend" not in raw:
            raise ConfigError("missing backend", "backend")
        backend = raw["backend"]
        if backend not in BACKENDS:
            raise ConfigError(f"unknown backend {backend!r}; expected one of {list(BACKENDS)}", "backend")
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(raw.get("tolerances") or {})
        for name, v in tol.items():
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not v > 0 or not math.isfinite(v):
                raise ConfigError(f"tolerance {name} must be a positive number, got {v!r}", f"tolerances.{name}")
        cutoff = raw.get("cutoff")
        if cutoff is not None and (not isinstance(cutoff, int) or isinstance(cutoff, bool) or cutoff < 1):
            raise ConfigError(f"cutoff must be an integer >= 1, got {cutoff!r}", "cutoff")
        for key in ("seed", "samples", "workers"):
            v = raw.get(key, 0 if key == "seed" else 1)
            if not isinstance(v, int) or isinstance(v, bool) or v < (0 if key == "seed" else 1):
                raise ConfigError(f"{key} must be a {'non-negative' if key == 'seed' else 'positive'} integer", key)
        for key in ("model", "twist", "output", "scan"):
            if not isinstance(raw.get(key, {}), dict):
                raise ConfigError(f"{key} must be an object", key)
        kw = {k: v for k, v in raw.items() if k != "tolerances"}
        return cls(tolerances=tol, **kw)


def apply_overrides(raw: Dict[str, Any], overrides: Sequence[str]) -> Dict[str, Any]:
    """Patch ``raw`` with ``a.b.c=value`` strings; values parse as JSON when they can."""
    out = copy.deepcopy(raw)
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value", item)
        key, text = item.split("=", 1)
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = out
        parts = key.split(".")
        for p in parts[:-1]:
            node = node.setdefault(p, {})
            if not isinstance(node, dict):
                raise ConfigError(f"cannot descend into non-object at {p!r}", key)
        node[parts[-1]] = value
    return out


def load_config(path: Optional[str]) -> Dict[str, Any]:
    if path is None:
        return {}
    if path.startswith("bundled:"):
        name = path.split(":", 1)[1]
        res = resources.files("twistcoh").joinpath("data", f"{name}.json")
        if not res.is_file():
            raise ConfigError(f"no bundled config {name!r}", "config")
        return json.loads(res.read_text())
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found", "config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config file {path} is not valid JSON: {exc}", "config") from None


# ------------------------------------------------------------------ builders


def _potential(terms, dim: int) -> Optional[TrigPolynomial]:
    if not terms:
        return None
    try:
        return TrigPolynomial.from_terms(dim, terms)
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"bad potential terms: {exc}", "twist.potential") from None


def build_torus(cfg: RunConfig):
    q = cfg.model.get("q")
    if not isinstance(q, int) or q < 1:
        raise ConfigError("torus model needs an integer q >= 1", "model.q")
    const = cfg.twist.get("constant", [0.0] * q)
    if len(const) != q:
        raise ConfigError(f"twist constant part has {len(const)} entries, torus has dimension {q}", "twist.constant")
    theta = tt.TwistClass(tuple(float(c) for c in const), _potential(cfg.twist.get("potential"), q))
    need = tt.required_cutoff(tt.TorusModel(q, 1), theta)
    cutoff = cfg.cutoff if cfg.cutoff is not None else max(need, 4)
    if cutoff < need:
        raise ConfigError(f"cutoff {cutoff} below the certified bound {need}", "cutoff")
    return tt.TorusModel(q, cutoff, cfg.tolerances["rank"]), theta


def build_mapping_torus(cfg: RunConfig, with_cutoff: bool = True):
    m = cfg.model
    kw = {"rank_tol": cfg.tolerances["rank"]}
    try:
        if "matrix" in m:
            model = mt.from_matrix(m["matrix"], **kw)
        elif "mu" in m:
            mu = [float(x) for x in m["mu"]]
            model = mt.MappingTorusModel(tuple(mu), float(m.get("nu", -sum(mu))), **kw)
        else:
            raise ConfigError("mapping_torus model needs 'matrix' or 'mu'", "model")
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "model") from None
    theta = mt.BasicTwist(resolve_c(model, cfg.twist.get("c", 0.0)), _potential(cfg.twist.get("potential"), 1))
    if not with_cutoff:
        return model, theta
    need = mt.required_cutoff(model, theta)
    cutoff = cfg.cutoff if cfg.cutoff is not None else max(need, model.cutoff)
    if cutoff < need:
        raise ConfigError(f"cutoff {cutoff} below the kernel-support bound {need}", "cutoff")
    return _with_cutoff(model, cutoff), theta


def _with_cutoff(model: mt.MappingTorusModel, cutoff: int) -> mt.MappingTorusModel:
    return mt.MappingTorusModel(model.mu, model.nu, cutoff, model.rank_tol, model.margin, model.matrix)


def resolve_c(model: mt.MappingTorusModel, value) -> float:
    """Numbers pass through; ``kappa``, ``ln_lambda1`` and ``ln_lambda2`` name model constants."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    named = {"kappa": model.kappa}
    if model.matrix is not None:
        lam1, lam2 = mt.eigenvalues(model)
        named.update(ln_lambda1=math.log(lam1), ln_lambda2=math.log(lam2))
    if isinstance(value, str):
        if value in named:
            return named[value]
        try:
            return float(value)
        except ValueError:
            pass
    raise ConfigError(f"cannot interpret twist coefficient {value!r}", "twist.c")


def build_simplicial(cfg: RunConfig):
    m = cfg.model
    try:
        if "complex" in m:
            cx = sc.bundled_complex(m["complex"])
        elif "path" in m:
            cx = sc.load_complex(m["path"])
        else:
            raise ConfigError("simplicial model needs 'complex' (bundled name) or 'path'", "model")
    except (KeyError, OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "model") from None
    t = cfg.twist
    try:
        if "cocycle" in t:
            theta = sc.load_cocycle(t["cocycle"])
        elif "holonomy" in t:
            hol = [sc.parse_value(str(h)) for h in t["holonomy"]]
            if len(hol) == 2 and cx.n_vertices == 7:
                theta = sc.torus7_cocycle(*hol)
            elif len(hol) == 1 and cx.dim == 1 and cx.n_vertices == 3:
                theta = sc.circle_cocycle(hol[0])
            else:
                raise ConfigError("holonomy shortcuts exist for the 7-vertex torus and the 3-vertex circle",
                                  "twist.holonomy")
        elif "random" in t:
            theta = sc.random_closed_cocycle(cx, np.random.default_rng(cfg.seed), t["random"])
        else:
            theta = sc.EdgeCocycle.zero(cx)
        sc.cocycle_check(cx, theta)
    except sc.CocycleError as exc:
        raise ConfigError(str(exc), "twist") from None
    except (OSError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc), "twist") from None
    return cx, theta


def build_lie(cfg: RunConfig):
    """Either a Lie algebra (bi-invariant metric) or a geometric model's transverse curvature."""
    m = cfg.model
    kind = m.get("kind", "lie_algebra")
    if kind == "lie_algebra":
        name = m.get("algebra", "o3")
        if name == "o3":
            lie = cv.so3()
        elif name == "abelian":
            lie = cv.abelian(int(m.get("n", 3)))
        elif name == "file":
            try:
                lie = cv.load_structure_constants(m["path"])
            except (KeyError, OSError, ValueError) as exc:
                raise ConfigError(f"cannot read structure constants: {exc}", "model.path") from None
        else:
            raise ConfigError(f"unknown algebra {name!r}", "model.algebra")
        scale = m.get("scale", 1)
        if scale != 1:
            lie = lie.scaled(Fraction(scale) if isinstance(scale, (int, str)) else float(scale))
        try:
            return cv.biinvariant_curvature(lie), {"kind": kind, "algebra": name, "scale": str(scale)}
        except ValueError as exc:
            raise ConfigError(str(exc), "model") from None
    if kind == "flat_torus":
        q = int(m.get("q", 3))
        return cv.curvature_report(np.zeros((q, q, q))), {"kind": kind, "q": q}
    if kind == "mapping_torus":
        sub = RunConfig("mapping_torus", m.get("mapping_torus", {}), {}, tolerances=cfg.tolerances)
        model, _ = build_mapping_torus(sub, with_cutoff=False)
        return mt.transverse_curvature(model), {"kind": kind, **model.to_dict()}
    raise ConfigError(f"unknown gate model kind {kind!r}", "model.kind")


def build_lcs(cfg: RunConfig):
    m = cfg.model
    q = m.get("q", 4)
    if not isinstance(q, int) or q < 4 or q % 2:
        raise ConfigError("the l.c.s. check needs an even torus dimension >= 4", "model.q")
    entries = m.get("omega")
    if entries is None:
        omega = lcs.standard_symplectic(q)
    else:
        try:
            omega = lcs.constant_two_form(q, {(int(i), int(j)): float(v) for i, j, v in entries})
        except (TypeError, ValueError, IndexError) as exc:
            raise ConfigError(f"bad omega entries: {exc}", "model.omega") from None
    f = _potential(m.get("conformal"), q)
    tail = 0.0
    if f is not None:
        omega, tail = lcs.conformal_rescale(omega, f)
    const = cfg.twist.get("constant", [0.0] * q)
    if len(const) != q:
        raise ConfigError("twist constant part has the wrong length", "twist.constant")
    theta = tt.TwistClass(tuple(float(c) for c in const), _potential(cfg.twist.get("potential"), q))
    return omega, theta, tail


# --------------------------------------------------------------------- verbs


def _simplicial_betti(cfg: RunConfig) -> BettiReport:
    cx, theta = build_simplicial(cfg)
    rep = sc.twisted_betti(cx, theta, cfg.tolerances["rank"], cfg.seed)
    rep.model["source"] = cfg.model.get("complex", cfg.model.get("path"))
    squares = sc.coboundary_square_residuals(cx, theta, cfg.seed)
    exact = rep.extras["arithmetic"] != "float"
    worst = max((r for _, r in squares.values()), default=0.0)
    rep.add_check("d_squared", worst, 0.0 if exact else cfg.tolerances["residual"])
    return rep


def _torus_betti(cfg: RunConfig) -> BettiReport:
    model, theta = build_torus(cfg)
    rep = tt.harmonic_dims(model, theta, with_spectra=True)
    calc = tt.TorusCalculus(model, theta)
    rep.add_check("d_squared", (calc.d(calc.next_cutoff()) @ calc.d()).norm(), cfg.tolerances["residual"])
    return rep


def _golden_doc(name: str) -> Dict[str, Any]:
    if name.startswith("bundled:"):
        return json.loads(resources.files("twistcoh").joinpath("data", f"{name.split(':', 1)[1]}.json").read_text())
    return json.loads(Path(name).read_text())


def _mapping_torus_betti(cfg: RunConfig) -> BettiReport:
    model, theta = build_mapping_torus(cfg)
    rep = mt.basic_twisted_betti(model, theta, with_spectra=True)
    calc = mt.BasicCalculus(model, theta)
    rep.add_check("d_squared", (calc.d_structure(calc.next_cutoff()) @ calc.d_structure()).norm(),
                  cfg.tolerances["residual"])
    mc = mt.mean_curvature(model)
    rep.extras["mean_curvature_dt"] = mc.kappa_t
    rep.add_check("mean_curvature_crosscheck", mc.crosscheck_residual, mt.CROSSCHECK_TOL)
    if cfg.golden:
        try:
            doc = _golden_doc(cfg.golden)
        except (OSError, ValueError) as exc:
            raise ConfigError(f"cannot read golden file: {exc}", "golden") from None
        for entry in doc["entries"]:
            c = resolve_c(model, entry["c"])
            got = mt.basic_twisted_betti(mt._fit(model, c), mt.BasicTwist(c)).dims
            rep.golden[entry["label"]] = {"c": c, "expected": entry["dims"], "dims": got,
                                          "passed": got == entry["dims"]}
    return rep


def cmd_betti(cfg: RunConfig) -> BettiReport:
    return {"torus": _torus_betti, "simplicial": _simplicial_betti,
            "mapping_torus": _mapping_torus_betti}[cfg.backend](cfg)


def cmd_verify(cfg: RunConfig) -> BettiReport:
    model, theta = build_torus(cfg) if cfg.backend == "torus" else build_mapping_torus(cfg)
    suite = run_suite(model, theta, cfg.seed, cfg.samples)
    rep = BettiReport(backend=cfg.backend, model=_model_dict(model), twist=theta.to_dict(), seed=cfg.seed)
    for name, value in sorted(suite.residuals.items()):
        rep.add_check(name, value, cfg.tolerances["residual"])
    rep.extras.update(suite.extras)
    if suite.skipped:
        rep.extras["skipped"] = suite.skipped
    boch = suite.extras["bochner"]
    rep.gates["bochner_vanishing"] = {"verdict": boch["vanishing_verdict"], "min_eigenvalue": boch["min_eigenvalue"]}
    return rep


def _model_dict(model) -> Dict[str, Any]:
    if isinstance(model, tt.TorusModel):
        return {"q": model.q, "cutoff": model.cutoff, "rank_tol": model.rank_tol}
    return model.to_dict()


def _scan_values(cfg: RunConfig) -> List[float]:
    s = cfg.scan
    if "values" in s:
        return [float(v) for v in s["values"]]
    lo, hi, n = s.get("linspace", [-2.0, 2.0, 21])
    if int(n) < 1:
        raise ConfigError("scan.linspace needs at least one point", "scan.linspace")
    return [float(x) for x in np.linspace(float(lo), float(hi), int(n))]


def _scan_one(args):
    mu, nu, cutoff, rank_tol, matrix, c = args
    model = mt.MappingTorusModel(mu, nu, cutoff, rank_tol, matrix=matrix)
    return mt.top_degree_scan(model, [c], include_kappa=False)


def cmd_scan(cfg: RunConfig) -> BettiReport:
    model, _ = build_mapping_torus(cfg)
    values = _scan_values(cfg)
    include = cfg.scan.get("include_kappa", True)
    if cfg.workers > 1:
        cs = list(values)
        if include and not any(abs(c - model.kappa) < 1e-14 for c in cs):
            cs.append(model.kappa)
        jobs = [(model.mu, model.nu, model.cutoff, model.rank_tol, model.matrix, c) for c in sorted(cs)]
        with ProcessPoolExecutor(cfg.workers) as pool:
            parts = list(pool.map(_scan_one, jobs))
        res = mt.ScanResult({}, [], model.kappa, {}, {})
        for p in parts:
            res.values.update(p.values)
            res.duality.update(p.duality)
            res.euler.update(p.euler)
        res.locus = [c for c, v in res.values.items() if v != 0]
    else:
        res = mt.top_degree_scan(model, values, include_kappa=include)
    rep = BettiReport(backend="mapping_torus", model=model.to_dict(), twist={"scan": sorted(res.values)},
                      expected_euler=0)
    rep.extras["scan"] = res.to_dict()
    mismatches = sum(a != b for a, b in res.duality.values())
    rep.add_check("duality_mismatches", mismatches, 0)
    rep.add_check("euler_nonzero_count", sum(e != 0 for e in res.euler.values()), 0)
    rep.euler_characteristic = 0 if all(e == 0 for e in res.euler.values()) else next(
        e for e in res.euler.values() if e != 0)
    rep.gates["top_degree_locus"] = {"locus": res.locus, "kappa_t": res.kappa_t,
                                     "locus_is_kappa": res.locus == [res.kappa_t]}
    rep.notes.append(
        "Top-degree classes occur only where the scanned coefficient equals the mean-curvature "
        "coefficient. Under the tilde shift by half of kappa this is theta = kappa/2, a closed form "
        "that is not exact, so top-degree vanishing for every non-exact theta is not supported; "
        "the locus is reported as observed."
    )
    return rep


def cmd_gate(cfg: RunConfig) -> BettiReport:
    curv, echo = build_lie(cfg)
    verdict = cv.positivity_gate(curv)
    rep = BettiReport(backend="lie_gate", model=echo)
    rep.extras["curvature"] = curv.to_dict()
    rep.gates["positivity"] = verdict.to_dict()
    rep.gates["lcs_obstruction"] = verdict.lcs_obstruction
    if "formula_residual" in curv.extras:
        rep.add_check("sectional_formula", curv.extras["formula_residual"], cfg.tolerances["residual"])
    if cfg.expect is not None:
        rep.golden["gate_verdict"] = {"expected": bool(cfg.expect), "verdict": verdict.passed,
                                      "passed": bool(cfg.expect) == verdict.passed}
    return rep


def cmd_lcs(cfg: RunConfig) -> BettiReport:
    omega, theta, tail = build_lcs(cfg)
    res = lcs.lcs_check(omega, theta)
    rep = BettiReport(backend="lcs_check", model={"q": omega.q, "modes": len(omega.coefficients),
                                                  "conformal_tail": tail}, twist=theta.to_dict())
    rep.gates["lcs"] = res.to_dict()
    if cfg.expect is None:
        rep.add_check("twisted_closedness", res.residual, lcs.CLOSED_TOL)
        rep.add_check("nondegeneracy", res.min_abs_det, lcs.DEGENERACY_TOL, "ge")
    else:
        rep.golden["lcs_verdict"] = {"expected": bool(cfg.expect), "verdict": res.passed,
                                     "passed": bool(cfg.expect) == res.passed}
    return rep


COMMANDS = {"betti": cmd_betti, "verify": cmd_verify, "scan": cmd_scan, "gate": cmd_gate, "lcs": cmd_lcs}


# ---------------------------------------------------------------------- run


def output_path(cfg: RunConfig, verb: str) -> Path:
    base = os.environ.get(OUTPUT_ENV) or cfg.output.get("dir") or "twistcoh-out"
    name = cfg.output.get("name") or f"{verb}-{cfg.backend}"
    return Path(base) / name


def run(verb: str, raw: Dict[str, Any]) -> BettiReport:
    """Validate, dispatch and return the report (nothing is written)."""
    cfg = RunConfig.from_dict(raw)
    if cfg.backend not in VERBS[verb]:
        raise ConfigError(f"verb {verb!r} does not support backend {cfg.backend!r}; "
                          f"use one of {list(VERBS[verb])}", "backend")
    start = time.perf_counter()
    try:
        rep = COMMANDS[verb](cfg)
    except (tt.CutoffError, mt.CutoffError) as exc:
        raise ConfigError(str(exc), "cutoff") from None
    if rep.seed is None:
        rep.seed = cfg.seed
    if cfg.timings:
        rep.timings["wall_seconds"] = time.perf_counter() - start
    rep.extras["config"] = asdict(cfg)
    return rep


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(prog="twistcoh", description=__doc__.split("\n")[0])
    parser.add_argument("verb", choices=sorted(COMMANDS))
    parser.add_argument("--config", help="JSON run configuration (or bundled:<name>)")
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override a config entry; dotted keys reach nested objects")
    parser.add_argument("--stdout", action="store_true", help="print the JSON report instead of a summary line")
    args = parser.parse_args(argv)
    try:
        raw = apply_overrides(load_config(args.config), args.set)
        cfg = RunConfig.from_dict(raw)
        rep = run(args.verb, raw)
    except ConfigError as exc:
        print(json.dumps(exc.record(), sort_keys=True))
        return 2
    path = output_path(cfg, args.verb)
    try:
        json_path = emit(rep, path.with_suffix(".json"), "json")
        csv_path = emit(rep, path.with_suffix(".csv"), "csv") if rep.spectra else None
    except OSError as exc:
        print(json.dumps({"status": "ERROR", "error": {"type": "io", "message": str(exc)}}, sort_keys=True))
        return 2
    if args.stdout:
        sys.stdout.write(to_json(rep))
    else:
        summary = {"status": "PASSED" if rep.passed else "FAILED", "dims": rep.dims, "report": str(json_path),
                   "failures": rep.failures()}
        if csv_path is not None:
            summary["spectra"] = str(csv_path)
        print(json.dumps(summary, sort_keys=True))
    return 0 if rep.passed else 1


if __name__ == "__main__":
    sys.exit(main())
