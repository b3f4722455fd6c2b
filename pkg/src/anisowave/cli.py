"""Command-line driver.

Every command reads one JSON config (``--config``), applies ``--set
key=value`` overrides to top-level scalars, validates the result against
the command's schema and writes JSON/CSV with floats fixed to 17
significant digits.  Exit codes: 0 ok, 2 validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from importlib import resources
from pathlib import Path

import jsonschema
import numpy as np

from .anisotropy import Anisotropy, heat_alpha_bounds, heat_anisotropy, make_anisotropy
from .errors import InadmissibleParameters, InvalidArgument, NumericalFailure

COMMANDS = ("transform", "inverse", "norms", "embed-check", "heat", "rates", "demo-paper")
EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


# deterministic output


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if hasattr(obj, "numerator") and hasattr(obj, "denominator") and not isinstance(obj, (int, bool)):
        return str(obj)
    return obj


def _encode(obj, indent: int = 0) -> str:
    pad = "  " * (indent + 1)
    end = "  " * indent
    if isinstance(obj, bool) or obj is None:
        return json.dumps(obj)
    if isinstance(obj, float):
        return format(obj, ".17g") if math.isfinite(obj) else "null"
    if isinstance(obj, (int, str)):
        return json.dumps(obj, ensure_ascii=False)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k, ensure_ascii=False)}: {_encode(obj[k], indent + 1)}" for k in sorted(obj)]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if not obj:
            return "[]"
        if all(not isinstance(v, (dict, list)) for v in obj):
            return "[" + ", ".join(_encode(v) for v in obj) + "]"
        return "[\n" + ",\n".join(pad + _encode(v, indent + 1) for v in obj) + "\n" + end + "]"
    raise TypeError(f"cannot encode {type(obj).__name__}")


def dumps(obj) -> str:
    return _encode(_plain(obj)) + "\n"


def _emit(obj, path: str | None):
    text = dumps(obj)
    if path:
        Path(path).write_text(text)
    else:
        sys.stdout.write(text)


# config handling


def load_schema(cmd: str) -> dict:
    return json.loads(resources.files("anisowave").joinpath("schemas", f"{cmd}.json").read_text())


def _parse_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def apply_overrides(cfg: dict, sets) -> dict:
    cfg = dict(cfg)
    for item in sets or []:
        if "=" not in item:
            raise InvalidArgument(f"override {item!r} is not of the form key=value")
        key, raw = item.split("=", 1)
        val = _parse_value(raw)
        if isinstance(val, (dict, list)) or isinstance(cfg.get(key), (dict, list)):
            raise InvalidArgument(f"override {key!r}: only top-level scalar fields can be set from the command line")
        cfg[key] = val
    return cfg


def load_config(cmd: str, path: str | None, sets) -> dict:
    if path is None:
        cfg = {}
    elif path == "-":
        cfg = json.load(sys.stdin)
    else:
        with open(path) as fh:
            cfg = json.load(fh)
    if not isinstance(cfg, dict):
        raise InvalidArgument("config must be a JSON object")
    cfg = apply_overrides(cfg, sets)
    try:
        jsonschema.validate(cfg, load_schema(cmd))
    except jsonschema.ValidationError as exc:
        where = "/".join(str(p) for p in exc.absolute_path) or "<root>"
        raise InvalidArgument(f"config invalid at {where}: {exc.message}") from None
    return cfg


def _aniso(cfg) -> Anisotropy:
    a = cfg["aniso"]
    return make_anisotropy(a["b"], a["norm_sum"])


def _bank(cfg):
    from .filters import make_spline_filters

    L = cfg.get("filter", [2, 2])
    return make_spline_filters(int(L[0]), int(L[1]))


def _cylinder(c):
    from .geometry import Cylinder

    return Cylinder(tuple(c["lo"]), tuple(c["hi"]), float(c["T"]), c.get("shape", "box"))


def _depth(cfg, dims, aniso, bank):
    from .embedding import max_depth

    if "J" in cfg:
        return int(cfg["J"])
    J = max_depth(dims, aniso, bank)
    if J < 1:
        raise InvalidArgument(f"grid {tuple(dims)} admits no transform level")
    return J


def _singular_set(cyl, grid):
    from .geometry import parabolic_boundary

    return parabolic_boundary(cyl, list(grid.spacing / 4))


# commands


def cmd_transform(cfg) -> dict:
    from .grid import load_grid
    from .transform import forward, level_energy, save_tree

    g = load_grid(cfg["input"])
    aniso, bank = _aniso(cfg), _bank(cfg)
    tree = forward(g, bank, aniso, int(cfg["J"]), cfg.get("mode", "zero_pad"))
    save_tree(tree, cfg["output"])
    p = float(cfg.get("p", 2.0))
    S = level_energy(tree, p)
    coarse = float(np.sum(np.abs(tree.coarse()) ** p) ** (1 / p))
    return {
        "output": cfg["output"], "dims": list(g.dims), "J": tree.J, "coarse_shape": list(tree.coarse_shape),
        "p": p, "coarse_energy": coarse,
        "levels": [{"level": j, "count": tree.level_count(j), "energy": float(S[j])} for j in range(tree.J)],
    }


def cmd_inverse(cfg) -> dict:
    from .grid import save_grid
    from .transform import inverse, load_tree

    tree = load_tree(cfg["input"])
    g = inverse(tree)
    save_grid(g, cfg["output"])
    return {"output": cfg["output"], "dims": list(g.dims)}


def cmd_norms(cfg) -> dict:
    from . import norms
    from .grid import load_grid
    from .transform import forward

    g = load_grid(cfg["input"])
    kind = cfg["norm"]

    def need(*keys):
        miss = [k for k in keys if k not in cfg]
        if miss:
            raise InvalidArgument(f"norm {kind!r} requires {', '.join(miss)}")

    if kind in ("besov", "adaptivity"):
        need("aniso", "p")
        aniso, bank = _aniso(cfg), _bank(cfg)
        tree = forward(g, bank, aniso, _depth(cfg, g.dims, aniso, bank), cfg.get("mode", "zero_pad"))
        if kind == "besov":
            need("alpha", "q")
            rep = norms.besov_wavelet_norm(tree, float(cfg["alpha"]), float(cfg["p"]), float(cfg["q"]))
        else:
            need("r")
            rep = norms.adaptivity_norm(tree, float(cfg["r"]), float(cfg["p"]))
    elif kind == "modulus":
        need("alpha", "p", "q", "k")
        alpha = cfg["alpha"] if isinstance(cfg["alpha"], list) else [cfg["alpha"]] * g.D
        rep = norms.modulus_besov_seminorm(g, alpha, float(cfg["p"]), float(cfg["q"]), cfg["k"])
    elif kind == "sobolev":
        need("l", "p")
        rep = norms.aniso_sobolev_norm(g, cfg["l"], float(cfg["p"]))
    elif kind == "w21":
        need("p")
        rep = norms.w21_norm(g, float(cfg["p"]), bool(cfg.get("include_mixed", True)))
    else:
        need("aniso", "m", "gamma", "p", "cylinder")
        aniso = _aniso(cfg)
        M = _singular_set(_cylinder(cfg["cylinder"]), g)
        rep = norms.kondratiev_norm(
            g, cfg["m"], aniso, float(cfg["gamma"]), float(cfg["p"]), M,
            seminorm_only=bool(cfg.get("seminorm_only", False)),
            classical_weights=bool(cfg.get("classical_weights", False)),
        )
    out = rep.to_dict()
    out["norm"] = kind
    return out


def cmd_embed_check(cfg) -> dict:
    from .embedding import corpus_embedding_study, embedding_check
    from .grid import load_grid

    aniso, bank = _aniso(cfg), _bank(cfg)
    cyl = _cylinder(cfg["cylinder"])
    mode = cfg.get("mode", "zero_pad")
    if "inputs" in cfg:
        grids = [load_grid(p) for p in cfg["inputs"]]
        M = _singular_set(cyl, grids[0])
        J = _depth(cfg, grids[0].dims, aniso, bank)
        summ = corpus_embedding_study(grids, cfg["params"], M, aniso, bank=bank, J=J, mode=mode)
        return {"corpus": summ.to_dict(), "inputs": cfg["inputs"], "params": cfg["params"]}
    if "input" not in cfg:
        raise InvalidArgument("embed-check needs 'input' or 'inputs'")
    g = load_grid(cfg["input"])
    M = _singular_set(cyl, g)
    J = _depth(cfg, g.dims, aniso, bank)
    rep = embedding_check(g, cfg["params"], M, aniso, bank, J, mode, force=bool(cfg.get("force", False)))
    if "shell_csv" in cfg:
        rep.shell_csv(cfg["shell_csv"])
    return rep.to_dict()


def cmd_heat(cfg) -> dict:
    from .heat import exact_temperature, save_temperature, solve_heat_cn

    cyl = _cylinder(cfg["cylinder"])
    kind = cfg["kind"]
    if kind == "crank_nicolson":
        init = cfg.get("initial", 0.0)
        if init == "sine":
            k = cfg.get("k", [1] * cyl.d)

            def init(*x):
                return np.prod([np.sin(np.pi * ki * (xi - lo) / (hi - lo)) for ki, xi, lo, hi in zip(k, x, cyl.lo, cyl.hi)], axis=0)

        if "convergence" in cfg:
            if cfg.get("initial") != "sine" or cfg.get("lateral", 0.0) != 0.0:
                raise InvalidArgument("a convergence table needs initial='sine' with zero lateral data")
            rows, prev = [], None
            for n in cfg["convergence"]:
                u = solve_heat_cn(cyl, init, 0.0, n, n)
                ex = exact_temperature("sine_mode", cyl, (n,) * cyl.d + (n,), k=cfg.get("k", [1] * cyl.d))
                err = float(np.max(np.abs(u.grid.data - ex.grid.data)))
                rows.append({"n": n, "error": err, "ratio": (prev / err) if prev and err > 0 else None})
                prev = err
            return {"kind": kind, "convergence": rows}
        if "nx" not in cfg or "nt" not in cfg:
            raise InvalidArgument("crank_nicolson needs nx and nt")
        u = solve_heat_cn(cyl, init, float(cfg.get("lateral", 0.0)), cfg["nx"], cfg["nt"])
    else:
        if "dims" not in cfg:
            raise InvalidArgument(f"{kind} needs dims")
        extra = {k: cfg[k] for k in ("k", "x0", "t0", "terms") if k in cfg}
        u = exact_temperature(kind, cyl, tuple(cfg["dims"]), **extra)
    u.check()
    if "output" in cfg:
        save_temperature(u, cfg["output"])
    return dict(u.sidecar(), dims=list(u.grid.dims), output=cfg.get("output"))


def _rates_payload(tree, p, Ns=None, window=None, prefix=None) -> dict:
    from .rates import fit_rate, nterm_error_curve, regularity_estimate, uniform_error_curve

    nt = nterm_error_curve(tree, Ns, p)
    un = uniform_error_curve(tree, p)
    out = {}
    for name, curve in (("nterm", nt), ("uniform", un)):
        try:
            fit = fit_rate(curve, tuple(window) if window else None).to_dict()
        except InvalidArgument as exc:
            fit = {"refused": str(exc)}
        out[name] = dict(curve.to_dict(), fit=fit)
        if prefix:
            curve.to_csv(f"{prefix}_{name}.csv")
    try:
        out["regularity"] = regularity_estimate(tree, p, nterm=nt).to_dict()
    except InvalidArgument as exc:
        out["regularity"] = {"refused": str(exc)}
    ns = float(tree.aniso.norm_sum)
    a = out["nterm"]["fit"].get("exponent")
    b = out["uniform"]["fit"].get("exponent")
    out["summary"] = {
        "adaptive_exponent": a, "uniform_exponent": b,
        "gap": (a - b) if a is not None and b is not None else None,
        "uniform_rate_r": ns * b if b is not None else None,
    }
    return out


def cmd_rates(cfg) -> dict:
    from .grid import load_grid
    from .transform import forward

    g = load_grid(cfg["input"])
    aniso, bank = _aniso(cfg), _bank(cfg)
    tree = forward(g, bank, aniso, _depth(cfg, g.dims, aniso, bank), cfg.get("mode", "zero_pad"))
    out = _rates_payload(tree, float(cfg.get("p", 2.0)), cfg.get("Ns"), cfg.get("window"), cfg.get("output_prefix"))
    if cfg.get("output_prefix"):
        Path(cfg["output_prefix"] + "_rates.json").write_text(dumps(out))
    return out


def cmd_demo_paper(cfg) -> dict:
    """Bounds for d = 2, 3 and the d = 1 adaptive-versus-uniform experiment."""
    from .embedding import max_depth
    from .geometry import Cylinder
    from .heat import exact_temperature
    from .transform import forward

    outdir = Path(cfg["output_dir"])
    outdir.mkdir(parents=True, exist_ok=True)
    p = float(cfg.get("p", 2.0))
    bounds = {}
    # s at its limit 2, p = 2 and n large enough that 2n does not bind
    for d in (2, 3):
        b = heat_alpha_bounds(2, 2, d, 4)
        bounds[str(d)] = {"improved": b.improved, "baseline": b.aimar}
    nx, nt = int(cfg.get("nx", 512)), int(cfg.get("nt", 1024))
    u = exact_temperature("incompatible_step", Cylinder.unit(1), (nx, nt)).check()
    aniso, bank = heat_anisotropy(1), _bank(cfg)
    tree = forward(u.grid, bank, aniso, max_depth(u.grid.dims, aniso, bank))
    rates = _rates_payload(tree, p, prefix=str(outdir / "incompatible_step"))
    out = {"alpha_bounds": bounds, "rates": rates, "grid": [nx, nt], "J": tree.J}
    (outdir / "demo.json").write_text(dumps(out))
    return {"alpha_bounds": bounds, "summary": rates["summary"], "regularity": rates["regularity"], "output_dir": str(outdir)}


HANDLERS = {
    "transform": cmd_transform, "inverse": cmd_inverse, "norms": cmd_norms, "embed-check": cmd_embed_check,
    "heat": cmd_heat, "rates": cmd_rates, "demo-paper": cmd_demo_paper,
}


HELP = {
    "transform": "forward transform of a grid file into a coefficient tree",
    "inverse": "reconstruct a grid from a coefficient tree",
    "norms": "Besov, adaptivity, modulus, Sobolev, W21 or Kondratiev norm of a grid",
    "embed-check": "compare the adaptivity norm with the Kondratiev and Besov norms",
    "heat": "exact temperatures, Crank-Nicolson solves and convergence tables",
    "rates": "N-term and uniform approximation curves with fitted rates",
    "demo-paper": "alpha bounds plus the adaptive-versus-uniform heat experiment",
}


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="anisowave", description="Anisotropic wavelet norms, embeddings and heat-equation rates.")
    sub = ap.add_subparsers(dest="command", required=True)
    for cmd in COMMANDS:
        sp = sub.add_parser(cmd, help=HELP[cmd])
        sp.add_argument("--config", "-c", help="JSON config file ('-' for stdin)")
        sp.add_argument("--set", action="append", metavar="KEY=VALUE", help="override a top-level scalar field")
        sp.add_argument("--output", "-o", help="write the JSON result here instead of stdout")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.command, args.config, args.set)
        if "threads" in cfg:
            os.environ["ANISOWAVE_NUM_THREADS"] = str(cfg["threads"])
        result = HANDLERS[args.command](cfg)
    except InadmissibleParameters as exc:
        sys.stderr.write(f"error: inadmissible parameters: {exc.condition}\n")
        return EXIT_VALIDATION
    except (InvalidArgument, OSError, KeyError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_VALIDATION
    except NumericalFailure as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return EXIT_NUMERICAL
    _emit(result, args.output)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
