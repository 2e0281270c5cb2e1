"""Command-line entry point: ``crinkit <command> ...``.

Exit status: 0 ok, 1 check failed, 2 parse error, 3 dimension error,
4 POVM error, 5 precondition violated, 6 lattice coverage exhausted,
7 truncation too small.
"""

import argparse
import json
import os
import sys
from dataclasses import dataclass, fields

import numpy as np

from . import construct, crin, formats, iontrap, opalg, protocols
from .errors import CrinkitError, DimensionError, ParseError

CONFIG_ENV = "CRINKIT_CONFIG"


@dataclass
class RunConfig:
    bin_tol: float = None
    atom_tol: float = 1e-9
    check_tol: float = 1e-9
    seed: int = 0
    max_dim: int = opalg.MAX_DIM
    strict: bool = True

    def __post_init__(self):
        for name in ("bin_tol", "atom_tol", "check_tol"):
            v = getattr(self, name)
            if v is not None and not v > 0:
                raise ParseError(f"config: {name} must be positive")


def load_config(path):
    if not path:
        return RunConfig()
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"config {path}: {exc}") from exc
    known = {f.name for f in fields(RunConfig)}
    bad = set(doc) - known
    if bad:
        raise ParseError(f"config {path}: unknown keys {sorted(bad)}")
    return RunConfig(**doc)


def parse_complex(text):
    try:
        parts = [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ParseError(f"bad complex value {text!r}: {exc}") from exc
    if len(parts) not in (1, 2):
        raise ParseError(f"bad complex value {text!r}; use re or re,im")
    return complex(parts[0], parts[1] if len(parts) == 2 else 0.0)


def emit(text, path):
    if path:
        formats.atomic_write(path, text)
    else:
        sys.stdout.write(text)


PROTOCOLS = {"obs": protocols.obs_povm, "tpm": protocols.tpm_povm}


def _protocol(name, cfg):
    base = PROTOCOLS[name]
    if cfg.bin_tol is None:
        return base
    return lambda h1, u: base(h1, u, cfg.bin_tol)


def cmd_dist(args, cfg):
    h1, u, rho = (formats.read_matrix(p) for p in (args.h1, args.u, args.rho))
    for m in (h1, u, rho):
        opalg._check_dim(m.shape[0], cfg.max_dim)
    h1 = opalg.hermitian(h1)
    u = opalg.unitary(u, tol=1e-9)
    rho = opalg.density(rho)
    if not (h1.dim == u.dim == rho.dim):
        raise DimensionError(f"dimensions differ: H1 {h1.dim}, U {u.dim}, rho {rho.dim}")
    dist = protocols.evaluate(_protocol(args.protocol, cfg)(h1, u), rho)
    dist = protocols.canonicalize(dist, cfg.atom_tol)
    # outcomes the state cannot produce are not listed
    dist = protocols.OutcomeDistribution(tuple(a for a in dist.atoms if a[1] > protocols.NEG_PROB_TOL))
    emit(formats.distribution_to_text(dist), args.out)
    mean, var = protocols.moments(dist)
    summary = {"protocol": args.protocol, "mean": mean, "variance": var, "atoms": len(dist.atoms)}
    (sys.stderr if not args.out else sys.stdout).write(formats.dumps(summary))
    return 0


def _print_reports(reports, stream):
    for r in reports:
        mark = "PASS" if r.passed else "FAIL"
        stream.write(f"condition {r.condition}: {mark} worst={r.worst_violation!r} ({r.witness})\n")


def _merge(per_instance):
    merged = {}
    for reps in per_instance:
        for r in reps:
            cur = merged.get(r.condition)
            if cur is None or r.worst_violation > cur.worst_violation:
                merged[r.condition] = crin.CrinReport(r.condition, r.passed and (cur is None or cur.passed),
                                                      r.worst_violation, r.witness, r.tol, r.info)
            elif not r.passed:
                cur.passed = False
    return [merged[k] for k in sorted(merged)]


def ion_fig1_reports(protocol, n_max=64, tol=1e-9, strict=True):
    """Condition 1 on the ion model, compared on unit-width energy bins."""
    p = iontrap.IonParams()
    ops = iontrap.model_operators(p, n_max, "adapted")
    psi, _ = iontrap.normalized_state(ops, 0j, +1, strict)
    rho = np.outer(psi, psi.conj())
    edges = np.arange(-10.5, 11.0, 1.0)
    return [crin.check_conservation(protocol, ops.h_ho, ops.h_e, ops.u_tau, states=[rho],
                                    tol=tol, bin_edges=edges)]


def cmd_crin(args, cfg):
    proto = _protocol(args.protocol, cfg)
    tol = cfg.check_tol
    if args.ion_fig1:
        per = [ion_fig1_reports(proto, args.n_max, tol, cfg.strict)]
        label = {"instances": "ion-fig1"}
    elif args.random:
        dims = (args.dim,) if args.dim else (2, 3, 4, 5)
        runs = crin.random_suite(proto, args.random, dims=dims, seed=cfg.seed, tol=tol)
        per = [reps for _, _, reps in runs]
        label = {"instances": args.random, "dims": list(dims), "seed": cfg.seed}
    else:
        if not (args.h1 and args.h2 and args.u):
            raise ParseError("crin needs --h1, --h2 and --u, or --random N, or --ion-fig1")
        h1, h2, u = (formats.read_matrix(p) for p in (args.h1, args.h2, args.u))
        opalg._check_dim(h1.shape[0], cfg.max_dim)
        rng = np.random.default_rng(cfg.seed)
        ups = [opalg.haar_unitary(2, rng), opalg.haar_unitary(3, rng)]
        per = [crin.run_all(proto, h1, h2, opalg.unitary(u, tol=1e-9), ups, tol)]
        label = {"instances": 1}
    reports = _merge(per)
    doc = dict(label, protocol=args.protocol, reports=[r.to_doc() for r in reports])
    emit(formats.dumps(doc), args.out)
    _print_reports(reports, sys.stderr if not args.out else sys.stdout)
    return 0 if all(r.passed for r in reports) else 1


def cmd_construct(args, cfg):
    h1, u = formats.read_matrix(args.h1), formats.read_matrix(args.u)
    opalg._check_dim(h1.shape[0], cfg.max_dim)
    cert = construct.fill_h2(h1, u, args.target, l_max=args.l_max, alpha_v=parse_complex(args.alpha_v),
                             energy=args.ei, phases=args.phases, policy=args.policy)
    rep = construct.verify_certificate(cert, h1, u, args.target)
    doc = cert.to_doc()
    doc["verification"] = rep
    emit(formats.dumps(doc), args.out)
    stream = sys.stderr if not args.out else sys.stdout
    stream.write(f"r_comm={cert.r_comm!r} r_eig0={cert.r_eig0!r} r_eigt={cert.r_eigt!r} "
                 f"min_eig_residual={cert.ledger['min_eig_residual']!r}\n")
    ok = (cert.r_comm <= 1e-12 and cert.r_eig0 <= cfg.check_tol and cert.r_eigt <= 10 * cfg.check_tol
          and rep["energy_consistent"] and rep["hermitian"])
    return 0 if ok else 1


def _gauss_doc(g):
    return {"mean": g.mean, "sd": g.sd}


def _table(header, rows):
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) if not isinstance(v, int) else str(v) for v in r) for r in rows]
    return "\n".join(lines) + "\n"


def cmd_ion(args, cfg):
    p = iontrap.IonParams()
    if args.params:
        try:
            with open(args.params, encoding="utf-8") as fh:
                p = iontrap.params_from_doc(json.load(fh))
        except (OSError, json.JSONDecodeError, ValueError, TypeError) as exc:
            raise ParseError(f"params {args.params}: {exc}") from exc
    out_dir = args.out_dir
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
    files = {}
    if args.figure == "fig1":
        summary = iontrap.fig1_closed_form(p)
        d = iontrap.derived(p)
        rows = [(n, iontrap.tpm_hho_amplitude(p, n)) for n in range(11)]
        files["fig1_hho.csv"] = _table(["n", "p"], rows)
        gauss, masses = iontrap.tpm_he_distribution(p)
        files["fig1_he_bins.csv"] = "bin,mass\n" + "".join(f"{k},{v!r}\n" for k, v in masses.items())
        summary["lambda"] = d.lam
        if args.matrix_check:
            m = iontrap.fig1_matrix(p, args.n_max, cfg.strict)
            summary["matrix"] = {k: m[k] for k in ("p_hho_I1_plus", "p_he_I1_minus", "p_he_I0", "leakage")}
            summary["route_gap"] = max(abs(m["p_hho_I1_plus"] - summary["p_hho_I1_plus"]),
                                       abs(m["p_he_I1_minus"] - summary["p_he_I1_minus"]))
    elif args.figure == "fig3":
        alpha = parse_complex(args.alpha)
        q = iontrap.fig5_quantities(p, alpha)
        summary = {"alpha": [alpha.real, alpha.imag], "obs_hho": _gauss_doc(q["obs_hho"]),
                   "he_0": _gauss_doc(q["he_0"]), "he_t": _gauss_doc(q["he_t"]),
                   "position_sd": 1.0, "sigma_delta_flag": iontrap.sigma_delta_flag(p)}
        g = q["obs_hho"]
        zs = np.linspace(g.mean - 6 * g.sd, g.mean + 6 * g.sd, 121)
        dens = np.exp(-0.5 * ((zs - g.mean) / g.sd) ** 2) / (g.sd * np.sqrt(2 * np.pi))
        files["fig3_obs_density.csv"] = _table(["z", "density"], zip(zs, dens))
    else:
        alpha = parse_complex(args.alpha)
        q = iontrap.fig5_quantities(p, alpha)
        implied, gap = iontrap.reference_consistency()
        summary = {k: q[k] for k in ("sigma_delta", "sigma_h0", "sigma_ht", "commutator", "slack",
                                     "poisson_mean_0", "poisson_mean_t")}
        summary.update(alpha=[alpha.real, alpha.imag], alpha_tau=[q["alpha_tau"].real, q["alpha_tau"].imag],
                       he_0=_gauss_doc(q["he_0"]), he_t=_gauss_doc(q["he_t"]),
                       reference_implied_bound=implied, reference_relative_gap=gap,
                       sigma_delta_flag=iontrap.sigma_delta_flag(p))
        m0, mt = summary["poisson_mean_0"], summary["poisson_mean_t"]
        top = int(max(m0, mt) + 10 * np.sqrt(max(m0, mt)) + 20)
        rows = [(n, iontrap.poisson(n, m0), iontrap.poisson(n, mt)) for n in range(top + 1)]
        files["fig5_poisson.csv"] = _table(["n", "p0", "ptau"], rows)
        if args.matrix_check:
            p0, pt, lk = iontrap.fig5_matrix_populations(p, alpha, args.n_max, cfg.strict)
            summary["matrix"] = {
                "tv_0": 0.5 * float(np.abs(p0 - iontrap.poisson_vector(m0, args.n_max)).sum()),
                "tv_tau": 0.5 * float(np.abs(pt - iontrap.poisson_vector(mt, args.n_max)).sum()),
                "leakage": lk}
    for name, text in sorted(files.items()):
        if out_dir:
            formats.atomic_write(os.path.join(out_dir, name), text)
    sys.stdout.write(formats.dumps(_jsonable(summary)))
    return 0


def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, complex):
        return [x.real, x.imag]
    if isinstance(x, (np.floating, np.integer)):
        return x.item()
    return x


def cmd_random(args, cfg):
    h1, u = opalg.random_instance(args.dim, cfg.seed, cfg.max_dim)
    formats.atomic_write(args.out_h1, formats.dumps(formats.matrix_to_doc(h1.mat)))
    formats.atomic_write(args.out_u, formats.dumps(formats.matrix_to_doc(u.mat)))
    if args.out_h2:
        h1c, h2 = opalg.conserved_pair(u, cfg.seed)
        formats.atomic_write(args.out_h1, formats.dumps(formats.matrix_to_doc(h1c.mat)))
        formats.atomic_write(args.out_h2, formats.dumps(formats.matrix_to_doc(h2.mat)))
    return 0


def build_parser():
    ap = argparse.ArgumentParser(prog="crinkit", description="Energy-variation measurement toolkit.")
    ap.add_argument("--config", help=f"JSON run configuration (default: ${CONFIG_ENV})")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--no-strict", action="store_true", help="report truncation leakage instead of failing")
    sub = ap.add_subparsers(dest="command", required=True)

    d = sub.add_parser("dist", help="outcome distribution of a protocol")
    d.add_argument("--protocol", choices=sorted(PROTOCOLS), required=True)
    d.add_argument("--h1", required=True)
    d.add_argument("--u", required=True)
    d.add_argument("--rho", required=True)
    d.add_argument("--out")
    d.set_defaults(func=cmd_dist)

    c = sub.add_parser("crin", help="run the four condition checkers")
    c.add_argument("--protocol", choices=sorted(PROTOCOLS), required=True)
    c.add_argument("--h1")
    c.add_argument("--h2")
    c.add_argument("--u")
    c.add_argument("--random", type=int, metavar="N")
    c.add_argument("--dim", type=int)
    c.add_argument("--ion-fig1", action="store_true")
    c.add_argument("--n-max", type=int, default=64)
    c.add_argument("--out")
    c.set_defaults(func=cmd_crin)

    k = sub.add_parser("construct", help="build and verify a probe Hamiltonian certificate")
    k.add_argument("--h1", required=True)
    k.add_argument("--u", required=True)
    k.add_argument("--target", type=int, default=0)
    k.add_argument("--l-max", type=int, default=2)
    k.add_argument("--phases", choices=("rational", "float"), default="rational")
    k.add_argument("--alpha-v", default="1,0.5")
    k.add_argument("--ei", type=float, default=1.0)
    k.add_argument("--policy", choices=("projected", "recipe"), default="projected")
    k.add_argument("--out")
    k.set_defaults(func=cmd_construct)

    i = sub.add_parser("ion", help="trapped-ion figure data")
    i.add_argument("figure", choices=("fig1", "fig3", "fig5"))
    i.add_argument("--params")
    i.add_argument("--matrix-check", action="store_true")
    i.add_argument("--n-max", type=int, default=64)
    i.add_argument("--alpha", default="0,20")
    i.add_argument("--out-dir")
    i.set_defaults(func=cmd_ion)

    r = sub.add_parser("random", help="write a seeded random instance")
    r.add_argument("--dim", type=int, required=True)
    r.add_argument("--out-h1", required=True)
    r.add_argument("--out-u", required=True)
    r.add_argument("--out-h2", help="also write H2 so that (H1, H2) is conserved under U")
    r.set_defaults(func=cmd_random)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code else 0
    try:
        cfg = load_config(args.config or os.environ.get(CONFIG_ENV))
        if args.seed is not None:
            cfg.seed = args.seed
        if args.no_strict:
            cfg.strict = False
        return args.func(args, cfg)
    except CrinkitError as exc:
        sys.stderr.write(f"error: {exc}\n")
        if getattr(exc, "level", None) is not None:
            sys.stderr.write(f"achieved level: {exc.level}\n")
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
