"""Command-line driver: JSON config in, CSV/JSON data and PNG figures out.

Exit codes: 0 success, 2 configuration or domain error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import plotting
from .effects import (
    TOL,
    JointObservable2,
    JointObservable3,
    UnsharpObservable,
    build_joint2,
    build_joint3,
    find_joint2_completion,
    jm_unbiased_ok,
    joint2_marginals,
    joint3_single_marginals,
    necessary_condition_3,
)
from .errors import AkJointError, ConfigError, NumericalError, PreconditionError
from .fermat import directions_from_angles, ft_condition, ft_point, ft_vertices, max_common_scale
from .fidelity import eta_i_form, fidelity_report
from .kernels import NORM_TOL, build_kernel_table2
from .report import write_csv, write_json
from .three_detector import ORTHOGONAL_BOUND, check_necessary, compute_triple, compute_triple_grid
from .two_detector import (
    LABELS,
    BlochState,
    compute_marginals,
    oblique_probabilities,
    oblique_probabilities_numeric,
    outcome_probabilities,
    post_state,
    post_state_physical,
    sweep_marginals,
)

log = logging.getLogger("akjoint")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERICAL = 0, 2, 3


@dataclass(frozen=True)
class Context:
    out: Path
    threads: int = 1
    figures: bool = True


def _ordered_map(fn, items, threads: int):
    """Map in a worker pool; results come back in input order."""
    items = list(items)
    if threads > 1 and len(items) > 1:
        with ThreadPoolExecutor(threads) as pool:
            return list(pool.map(fn, items))
    return [fn(x) for x in items]


def cmd_sweep_aprime(cfg: dict, ctx: Context) -> list[Path]:
    """Marginal unsharpness of the two-detector scheme over detector widths."""
    sa = cfgmod.expand_range(cfg["sigma_a"], "sigma_a")
    if cfg["sigma_b"] == "equal":
        pairs = [(s, s) for s in sa]
    else:
        sb = cfgmod.expand_range(cfg["sigma_b"], "sigma_b")
        pairs = [(a, b) for a in sa for b in sb]
    base = cfgmod.detector_config(cfg, (1.0, 1.0))
    margs = sweep_marginals(pairs, base, ctx.threads)
    rows = [(a, b, m.a_prime, m.b_prime, m.uncertainty_lhs) for (a, b), m in zip(pairs, margs)]
    paths = [
        write_csv(
            ctx.out / "sweep_aprime.csv",
            ["sigma_a", "sigma_b", "a_prime", "b_prime", "lhs_uncertainty"],
            rows,
        )
    ]
    lhs = np.array([r[4] for r in rows])
    a = np.array([r[2] for r in rows])
    k = int(np.argmax(a))
    summary = {
        "points": len(rows),
        "max_a_prime": a[k],
        "max_a_prime_at": pairs[k],
        "max_lhs_uncertainty": lhs.max(),
        "uncertainty_relation_holds": bool(np.all(lhs <= 1 + 1e-6)),
        "eta_bound_a_prime": 2 / np.pi,
    }
    paths.append(write_json(ctx.out / "sweep_aprime.json", "sweep-aprime", cfg, summary, {"uncertainty": 1e-6}))
    if ctx.figures:
        x = None
        if cfg["sigma_b"] == "equal" or len(set(b for _, b in pairs)) == 1:
            x, label = [p[0] for p in pairs], "sigma_a"
        elif len(set(p[0] for p in pairs)) == 1:
            x, label = [p[1] for p in pairs], "sigma_b"
        if x is not None:
            paths.append(plotting.plot_sweep(x, a, [r[3] for r in rows], ctx.out / "sweep_aprime.png", label))
    return paths


def _post_summary(ps) -> dict:
    return {
        "probability": ps.probability,
        "bloch": ps.state.r,
        "bloch_magnitude": ps.bloch_magnitude,
        "uncertainty_product": ps.uncertainty_product,
        "angle_to_x_deg": ps.angle_to_x_deg,
    }


def cmd_post_state(cfg: dict, ctx: Context) -> list[Path]:
    """Post-measurement state for one outcome, closed form against the Kraus oracle."""
    chi = BlochState(tuple(cfg["state"]))
    outcome = cfg.get("outcome", "++")
    table = build_kernel_table2(cfgmod.detector_config(cfg, cfg["sigmas"]))
    mp = compute_marginals(table)
    result = {
        "a_prime": mp.a_prime,
        "b_prime": mp.b_prime,
        "probabilities": outcome_probabilities(mp, chi),
        "outcome": outcome,
        "closed_form": _post_summary(post_state(table, chi, outcome)),
        "kraus": _post_summary(post_state_physical(table, chi, outcome)),
    }
    paths = []
    if "sigma_sweep" in cfg:
        sig = cfgmod.expand_range(cfg["sigma_sweep"], "sigma_sweep")

        def one(s):
            t = build_kernel_table2(cfgmod.detector_config(cfg, (s, s)))
            return post_state(t, chi, outcome)

        states = _ordered_map(one, sig, ctx.threads)
        rows = [
            (s, p.probability, *p.state.r, p.bloch_magnitude, p.uncertainty_product, p.angle_to_x_deg)
            for s, p in zip(sig, states)
        ]
        header = ["sigma", "probability", "x", "y", "z", "bloch_magnitude", "uncertainty_product", "angle_to_x_deg"]
        paths.append(write_csv(ctx.out / "post_state_sweep.csv", header, rows))
        if ctx.figures:
            paths.append(
                plotting.plot_post_state(sig, [r[6] for r in rows], [r[5] for r in rows], ctx.out / "post_state.png")
            )
    paths.insert(0, write_json(ctx.out / "post_state.json", "post-state", cfg, result, {"normalization": NORM_TOL}))
    return paths


def cmd_fidelities(cfg: dict, ctx: Context) -> list[Path]:
    """Retrodictive, predictive and disturbance fidelities per width pair."""
    pairs = [tuple(p) for p in cfg["sigmas"]]
    states = [BlochState(tuple(s)) for s in cfg.get("states", [])]

    def one(pair):
        table = build_kernel_table2(cfgmod.detector_config(cfg, pair))
        rep = fidelity_report(table)
        form = eta_i_form(table)
        spread = max((abs(form.at(s.r) - form.const) for s in states), default=0.0)
        return rep, spread

    results = _ordered_map(one, pairs, ctx.threads)
    header = [
        "sigma_a", "sigma_b", "a_prime", "eta_i", "eta_i_closed", "closed_form_gap",
        "eta_f", "eta_d", "delta_ei", "delta_ef", "delta_d", "state_spread",
    ]
    rows = [
        (*r.sigmas, r.a_prime, r.eta_i, r.eta_i_closed, r.closed_form_gap, r.eta_f, r.eta_d,
         r.delta_ei, r.delta_ef, r.delta_d, spread)
        for r, spread in results
    ]
    paths = [write_csv(ctx.out / "fidelities.csv", header, rows)]
    reports = [{**asdict(r), "closed_form_gap": r.closed_form_gap, "state_spread": s} for r, s in results]
    tol = {"eta_d": 1e-6, "closed_form": 1e-3, "eta_f_vs_eta_i": 1e-3}
    paths.append(write_json(ctx.out / "fidelities.json", "fidelities", cfg, reports, tol))
    if ctx.figures and all(a == b for a, b in pairs) and len(pairs) > 1:
        rs = [r for r, _ in results]
        paths.append(
            plotting.plot_fidelities(
                [p[0] for p in pairs],
                [r.eta_i for r in rs],
                [r.eta_f for r in rs],
                [r.eta_d for r in rs],
                [r.eta_i_closed for r in rs],
                ctx.out / "fidelities.png",
            )
        )
    return paths


def cmd_oblique(cfg: dict, ctx: Context) -> list[Path]:
    """Outcome probabilities when the readout directions meet at an angle."""
    chi = BlochState(tuple(cfg["state"]))
    theta = cfgmod.expand_range(cfg["theta"], "theta")
    if np.any(theta < 0) or np.any(theta > np.pi + 1e-12):
        raise ConfigError("theta values must lie in [0, pi]")
    theta = np.clip(theta, 0.0, np.pi)
    table = None
    if "a_prime" in cfg:
        a_prime = float(cfg["a_prime"])
    elif "sigma" in cfg:
        s = cfg["sigma"]
        table = build_kernel_table2(cfgmod.detector_config(cfg, (s, s)))
        a_prime = compute_marginals(table).a_prime
    else:
        raise ConfigError("oblique needs either a_prime or sigma")
    probs = [oblique_probabilities(a_prime, t, chi) for t in theta]
    rows = [(t, *(p[k] for k in LABELS), sum(p.values())) for t, p in zip(theta, probs)]
    header = ["theta", *(f"p{k}" for k in LABELS), "total"]
    paths = [write_csv(ctx.out / "oblique.csv", header, rows)]
    summary = {
        "a_prime": a_prime,
        "min_probability": min(min(p.values()) for p in probs),
        "max_total_error": max(abs(sum(p.values()) - 1) for p in probs),
    }
    if table is not None:
        gaps = [
            max(abs(oblique_probabilities_numeric(table, t, chi)[k] - p[k]) for k in LABELS)
            for t, p in zip(theta, probs)
        ]
        summary["max_quadrature_gap"] = max(gaps)
    paths.append(write_json(ctx.out / "oblique.json", "oblique", cfg, summary, {"sum": 1e-9}))
    if ctx.figures:
        paths.append(
            plotting.plot_oblique(theta, {k: [p[k] for p in probs] for k in LABELS}, ctx.out / "oblique.png")
        )
    return paths


def cmd_three_sweep(cfg: dict, ctx: Context) -> list[Path]:
    """Three-detector marginals by seeded Monte Carlo."""
    if "sigmas" in cfg:
        triples = [tuple(t) for t in cfg["sigmas"]]
    elif "sigma" in cfg:
        triples = [(s, s, s) for s in cfgmod.expand_range(cfg["sigma"], "sigma")]
    else:
        raise ConfigError("three-sweep needs sigma (diagonal range) or sigmas (explicit triples)")
    oracle = bool(cfg.get("oracle", False))
    rows, results = [], []
    for trip in triples:
        dcfg = cfgmod.detector_config(cfg, trip)
        tm = compute_triple(dcfg, ctx.threads)
        rep = check_necessary(tm)
        # 1/sqrt(3) is the largest common unsharpness of an orthogonal unbiased triple
        within = bool(np.all(tm.values <= ORTHOGONAL_BOUND + 3 * tm.stderrs))
        row = [*trip, tm.a_prime.value, tm.a_prime.stderr, tm.b_prime.value, tm.b_prime.stderr,
               tm.c_prime.value, tm.c_prime.stderr, rep.sum_of_squares, rep.holds, within]
        if oracle:
            row += list(compute_triple_grid(dcfg))
        rows.append(row)
        results.append({"sigmas": trip, "marginals": tm, "necessary": rep, "below_equal_bound": within})
        log.info("sigma=%s a'=%.5f +- %.1e", trip, tm.a_prime.value, tm.a_prime.stderr)
    header = ["sigma_a", "sigma_b", "sigma_c", "a_prime", "a_stderr", "b_prime", "b_stderr",
              "c_prime", "c_stderr", "sum_of_squares", "ft_holds", "below_equal_bound"]
    if oracle:
        header += ["a_grid", "b_grid", "c_grid"]
    paths = [write_csv(ctx.out / "three_sweep.csv", header, rows)]
    a = np.array([r[3] for r in rows])
    k = int(np.argmax(a))
    summary = {
        "points": results,
        "max_a_prime": a[k],
        "max_a_prime_stderr": rows[k][4],
        "max_a_prime_at": triples[k],
        "all_below_equal_bound": all(r["below_equal_bound"] for r in results),
        "bound": ORTHOGONAL_BOUND,
    }
    tol = {"bound_stderr_multiple": 3.0, "ft_condition": 1e-9}
    paths.append(write_json(ctx.out / "three_sweep.json", "three-sweep", cfg, summary, tol))
    if ctx.figures and all(t[0] == t[1] == t[2] for t in triples) and len(triples) > 1:
        paths.append(
            plotting.plot_three_sweep([t[0] for t in triples], a, [r[4] for r in rows], ctx.out / "three_sweep.png")
        )
    return paths


def cmd_ft_check(cfg: dict, ctx: Context) -> list[Path]:
    """Fermat-Toricelli test for an unbiased triple of directions."""
    if "directions" in cfg:
        d = cfg["directions"]
        l, m, n = (np.asarray(d[k], dtype=float) for k in "lmn")
    elif "angles" in cfg:
        ang = dict(cfg["angles"])
        if cfg.get("angles_in_pi", False):
            ang = {k: v * np.pi for k, v in ang.items()}
        l, m, n = directions_from_angles(ang["theta"], ang["phi"], ang["phi1"])
    else:
        raise ConfigError("ft-check needs directions or angles")
    scale = float(cfg.get("scale", 1.0))
    pts = ft_vertices(scale * l, scale * m, scale * n)
    res = ft_point(pts)
    cond = ft_condition(scale * l, scale * m, scale * n)
    names = "ABCD"
    result = {
        "l": l * scale,
        "m": m * scale,
        "n": n * scale,
        "vertices": {k: p for k, p in zip(names, pts)},
        "ft_point": res,
        "vertex": names[res.vertex_index] if res.is_vertex else None,
        "min_total": cond.min_total,
        "holds": cond.holds,
        "max_common_scale": max_common_scale(l, m, n),
        "sum_of_squares": float(scale**2 * (l @ l + m @ m + n @ n)),
    }
    return [write_json(ctx.out / "ft_check.json", "ft-check", cfg, result, {"vertex": 1e-9, "condition": 1e-9})]


def _obs(block) -> UnsharpObservable:
    return UnsharpObservable(block.get("x", 0.0), block["m"])


def cmd_jm_check(cfg: dict, ctx: Context) -> list[Path]:
    """Joint measurability of configured pairs and triples."""
    pairs_out = []
    for item in cfg.get("pairs", []):
        o1, o2 = _obs(item["obs1"]), _obs(item["obs2"])
        entry = {"obs1_valid": o1.is_valid(), "obs2_valid": o2.is_valid()}
        if "Z" in item or "z" in item:
            j = JointObservable2(o1, o2, item.get("Z", 0.0), item.get("z", (0, 0, 0)))
            effects = build_joint2(j)
            first, second = joint2_marginals(effects)
            entry.update(
                effects=effects,
                margins={k: e.margin() for k, e in effects.items()},
                valid=all(e.margin() >= -TOL for e in effects.values()),
                marginals_exact=first["+"].isclose(o1.plus) and second["+"].isclose(o2.plus),
            )
        else:
            search = find_joint2_completion(o1, o2)
            entry.update(valid=search.feasible, search=search)
        if o1.x == 0 and o2.x == 0:
            entry["unbiased_condition"] = jm_unbiased_ok(o1.m, o2.m)
        pairs_out.append(entry)
    triples_out = []
    for item in cfg.get("triples", []):
        obs = [_obs(item[k]) for k in ("obs1", "obs2", "obs3")]
        Z = tuple(item.get("Z", (0, 0, 0, 0)))
        zs = np.asarray(item.get("zs", np.zeros((4, 3))), dtype=float)
        j = JointObservable3(*obs, Z, zs)
        effects = build_joint3(j)
        singles = joint3_single_marginals(effects)
        nec = necessary_condition_3(obs[0].m, obs[1].m, obs[2].m, *Z[:3], zs[3])
        entry = {
            "valid": all(e.margin() >= -TOL for e in effects.values()),
            "margins": {k: e.margin() for k, e in effects.items()},
            "marginals_exact": all(s["+"].isclose(o.plus) for s, o in zip(singles, obs)),
            "necessary": {"individual": nec.individual, "summed": nec.summed, "total": nec.total, "holds": nec.holds},
        }
        if all(o.x == 0 for o in obs):
            cond = ft_condition(obs[0].m, obs[1].m, obs[2].m)
            entry["ft_condition"] = {"min_total": cond.min_total, "holds": cond.holds}
        triples_out.append(entry)
    if not pairs_out and not triples_out:
        raise ConfigError("jm-check needs at least one pair or triple")
    result = {"pairs": pairs_out, "triples": triples_out}
    return [write_json(ctx.out / "jm_check.json", "jm-check", cfg, result, {"effect_validity": TOL})]


COMMANDS = {
    "sweep-aprime": cmd_sweep_aprime,
    "post-state": cmd_post_state,
    "fidelities": cmd_fidelities,
    "oblique": cmd_oblique,
    "three-sweep": cmd_three_sweep,
    "ft-check": cmd_ft_check,
    "jm-check": cmd_jm_check,
}


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must fit in an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON run configuration")
    common.add_argument("--out", help="output directory (default: config 'output' or ./out)")
    common.add_argument("--seed", type=_u64, help="overrides the config seed")
    common.add_argument("--threads", type=int, default=1, help="worker threads for sweeps")
    common.add_argument("--no-figures", action="store_true", help="write data files only")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    p = argparse.ArgumentParser(prog="akjoint", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name, fn in COMMANDS.items():
        sub.add_parser(name, parents=[common], help=fn.__doc__ or name)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        if args.threads < 1:
            raise ConfigError("--threads must be at least 1")
        cfg = cfgmod.load(args.config, args.command, args.seed)
        out = Path(args.out or cfg.get("output") or "out")
        ctx = Context(out, args.threads, not args.no_figures)
        paths = COMMANDS[args.command](cfg, ctx)
    except (ConfigError, PreconditionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except AkJointError as exc:  # pragma: no cover - every subclass is handled above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for path in paths:
        print(path)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
