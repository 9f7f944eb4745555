"""``pme-lab``: generate -> fit-pme -> train-surrogate -> train-nlpme/train-dae -> sweep -> report.

Everything lives under the output directory::

    dataset/  pme/  surrogate/  nlpme/N<k>/  dae/N<k>/  cells/
    sweep.csv  thresholds.csv  reduction.csv  failures.csv  report/

Every file written starts with a ``# config_hash=<hash>`` comment line.
"""

import os

# reproducible reductions need a single BLAS thread; set before numpy loads
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    os.environ.setdefault(_var, "1")

import argparse  # noqa: E402
import csv  # noqa: E402
import io  # noqa: E402
import sys  # noqa: E402
from pathlib import Path  # noqa: E402

import numpy as np  # noqa: E402

from . import _io, dataset as ds_mod, metrics, plots  # noqa: E402
from .config import PROFILES, load_config, parse_config  # noqa: E402
from .dae import dae_reconstruct, load_dae, save_dae, train_dae  # noqa: E402
from .errors import ConfigError, ContractError, NumericError, PmeLabError  # noqa: E402
from .nlpme import load_nlpme, nlpme_reconstruct, save_nlpme, train_nlpme  # noqa: E402
from .pme import fit_pme, load_pme, pme_encode, pme_reconstruct_geometry, save_pme  # noqa: E402
from .surrogate import load_surrogate, save_surrogate, surrogate_predict, train_surrogate  # noqa: E402

METHODS = ("PME", "NLPME", "DAE")


def _say(msg):
    print(msg, file=sys.stderr, flush=True)


class Run:
    """Resolved config plus the paths of every artifact it owns."""

    def __init__(self, cfg, out=None):
        self.cfg = cfg
        self.out = Path(out or cfg.out)
        self.hash = cfg.hash()
        self.comment = f"config_hash={self.hash}"
        self.gen = cfg.generator()

    def path(self, *parts):
        return self.out.joinpath(*parts)

    def model_dir(self, method, N):
        return self.path(method.lower(), f"N{N}")

    def write_csv(self, name, header, rows):
        buf = io.StringIO()
        buf.write(f"# {self.comment}\n")
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)
        p = self.path(name) if isinstance(name, str) else name
        p.parent.mkdir(parents=True, exist_ok=True)
        p.write_text(buf.getvalue())
        return p

    def current(self, bundle):
        """True if ``bundle`` exists and was produced under this config hash."""
        man = bundle / "manifest.txt"
        return man.exists() and _io.read_manifest(man).get("config_hash") == self.hash

    # loaders that name the missing upstream artifact
    def dataset(self):
        d = self.path("dataset")
        if not (d / "manifest.txt").exists():
            raise ContractError(f"dataset bundle missing at {d}; run 'pme-lab generate' first")
        return ds_mod.load(d, self.gen)

    def surrogate(self):
        d = self.path("surrogate")
        if not (d / "manifest.txt").exists():
            raise ContractError(f"surrogate bundle missing at {d}; run 'pme-lab train-surrogate' first")
        return load_surrogate(d)

    def pme(self):
        d = self.path("pme")
        if not (d / "manifest.txt").exists():
            raise ContractError(f"PME bundle missing at {d}; run 'pme-lab fit-pme' first")
        return load_pme(d)


def _fmt(x):
    return "%.17g" % x


def cmd_generate(run):
    cfg = run.cfg
    data = ds_mod.build_dataset(run.gen, cfg.S_requested, skip=cfg.skip, seed=cfg.seed)
    data.manifest["config_hash"] = run.hash
    ds_mod.save(data, run.path("dataset"), run.comment)
    print(f"dataset: S={data.S} of {cfg.S_requested} valid, M={data.M}, n_g={data.n_g}")
    return data


def cmd_fit_pme(run):
    data = run.dataset()
    model = fit_pme(data.D, data.U)
    save_pme(model, run.path("pme"), {"config_hash": run.hash}, run.comment)
    rows = []
    for N in range(1, model.n_stored + 1):
        eps = metrics.nmse(data.D, pme_reconstruct_geometry(model, model.alpha_train[:, :N]))
        rows.append((N, _fmt(eps)))
    run.write_csv(run.path("pme", "history.csv"), ["N", "epsilon"], rows)
    print(f"pme: rank {model.r}, eps(1)={rows[0][1] if rows else 'n/a'}")
    return model


def cmd_train_surrogate(run):
    data = run.dataset()
    sec = run.cfg.surrogate
    _say(f"training surrogate {sec.hidden} for up to {sec.train.max_epochs} epochs")
    model = train_surrogate(data, sec.train, hidden=sec.hidden, seed=run.cfg.seed)
    save_surrogate(model, run.path("surrogate"), {"config_hash": run.hash}, run.comment)
    eps = metrics.nmse(data.D, surrogate_predict(model, data.U).d)
    print(f"surrogate: val loss {model.val_loss:.6g}, training nmse {eps:.6g}")
    return model


def _train_cfg(run, section, N):
    train = getattr(run.cfg, section).train
    return train.with_(seed=train.seed + run.cfg.seed + N)


def _nlpme_cell(run, data, sur, N, retrain=False):
    d = run.model_dir("NLPME", N)
    if not retrain and run.current(d):
        model = load_nlpme(d, sur)
    else:
        sec = run.cfg.nlpme
        model = train_nlpme(data, sur, N, _train_cfg(run, "nlpme", N), sec.encoder_hidden, sec.hidden)
        save_nlpme(model, d, {"config_hash": run.hash}, run.comment)
    return model, metrics.nmse(data.D, nlpme_reconstruct(model, data.D)[0])


def _dae_cell(run, data, N, retrain=False):
    d = run.model_dir("DAE", N)
    if not retrain and run.current(d):
        model = load_dae(d)
    else:
        sec = run.cfg.dae
        model = train_dae(data, N, _train_cfg(run, "dae", N), sec.encoder_hidden, sec.hidden)
        save_dae(model, d, {"config_hash": run.hash}, run.comment)
    return model, metrics.nmse(data.D, dae_reconstruct(model, data.D))


def _n_list(run, n):
    return [n] if n is not None else list(run.cfg.sweep_N)


def cmd_train_nlpme(run, n=None):
    data, sur = run.dataset(), run.surrogate()
    for N in _n_list(run, n):
        model, eps = _nlpme_cell(run, data, sur, N, retrain=True)
        print(f"nlpme N={N}: final loss {model.history.best_loss:.6g}, nmse {eps:.6g}")


def cmd_train_dae(run, n=None):
    data = run.dataset()
    for N in _n_list(run, n):
        model, eps = _dae_cell(run, data, N, retrain=True)
        print(f"dae N={N}: final loss {model.history.best_loss:.6g}, nmse {eps:.6g}")


def _cell_path(run, method, N):
    return run.path("cells", f"{method}_N{N}.csv")


def _read_cell(run, method, N):
    p = _cell_path(run, method, N)
    if not p.exists():
        return None
    lines = p.read_text().splitlines()
    if not lines or lines[0] != f"# {run.comment}":
        return None
    row = next(csv.DictReader(lines[1:]))
    return row


def cmd_sweep(run, resume=False):
    """Fill every (method, N) cell, then assemble the summary tables and plots."""
    data, sur = run.dataset(), run.surrogate()
    pme = None
    computed = 0
    for method in METHODS:
        for N in run.cfg.sweep_N:
            if resume and _read_cell(run, method, N) is not None:
                continue
            computed += 1
            try:
                if method == "PME":
                    pme = pme or fit_pme(data.D, data.U)
                    if N > pme.n_stored:
                        raise ContractError(f"N={N} exceeds the PME rank {pme.n_stored}")
                    eps = metrics.nmse(data.D, pme_reconstruct_geometry(pme, pme_encode(pme, data.D, N)))
                elif method == "NLPME":
                    _say(f"sweep: NLPME N={N}")
                    eps = _nlpme_cell(run, data, sur, N, retrain=not resume)[1]
                else:
                    _say(f"sweep: DAE N={N}")
                    eps = _dae_cell(run, data, N, retrain=not resume)[1]
                run.write_csv(_cell_path(run, method, N), ["method", "N", "epsilon", "status", "message"],
                              [(method, N, _fmt(eps), "ok", "")])
            except (ContractError, NumericError, ConfigError) as exc:
                _say(f"sweep: {method} N={N} failed: {exc}")
                run.write_csv(_cell_path(run, method, N), ["method", "N", "epsilon", "status", "message"],
                              [(method, N, "nan", "failed", str(exc))])
    _say(f"sweep: computed {computed} cells")
    return summarize(run)


def _curves(run):
    curves, failures = {}, []
    for method in METHODS:
        Ns, eps = [], []
        for N in run.cfg.sweep_N:
            row = _read_cell(run, method, N)
            if row is None:
                continue
            if row["status"] == "ok":
                Ns.append(N)
                eps.append(float(row["epsilon"]))
            else:
                failures.append((method, N, row["message"]))
        curves[method] = metrics.SweepCurve(method, Ns, eps, run.hash)
    return curves, failures


def summarize(run):
    curves, failures = _curves(run)
    rows = [(c.method, N, _fmt(e)) for c in curves.values() for N, e in zip(c.N, c.eps)]
    run.write_csv("sweep.csv", ["method", "N", "epsilon"], rows)
    trows = []
    for c in curves.values():
        for tau in run.cfg.taus:
            n_min = metrics.threshold_dimension(c, tau) if c.N else None
            trows.append((c.method, repr(tau), "none" if n_min is None else n_min))
    run.write_csv("thresholds.csv", ["method", "tau", "N_min"], trows)
    pme = dict(zip(curves["PME"].N, curves["PME"].eps))
    rrows, reductions = [], {}
    for method in ("NLPME", "DAE"):
        c = curves[method]
        Ns = [N for N in c.N if N in pme]
        vals, skipped = metrics.relative_reduction(
            [e for N, e in zip(c.N, c.eps) if N in pme], [pme[N] for N in Ns]
        )
        for i, N in enumerate(Ns):
            rrows.append((method, N, _fmt(vals[i]), int(i in skipped)))
        reductions[method] = (Ns, vals)
    run.write_csv("reduction.csv", ["method", "N", "reduction_percent", "skipped"], rrows)
    run.write_csv("failures.csv", ["method", "N", "message"], failures)
    plots.error_curves_svg({m: (c.N, c.eps) for m, c in curves.items() if c.N},
                           run.path("epsilon.svg"), run.cfg.taus, run.comment)
    plots.reduction_svg({m: r for m, r in reductions.items() if r[0]}, run.cfg.M,
                        run.path("reduction.svg"), run.comment)
    return curves


def _selected_N(run, curves):
    c = curves["NLPME"]
    if not c.N:
        raise ContractError("no successful NLPME cells in the sweep")
    n = metrics.threshold_dimension(c, run.cfg.taus[0])
    return n if n is not None else c.N[int(np.argmin(c.eps))]


def cmd_report(run):
    if not run.path("sweep.csv").exists():
        raise ContractError(f"no sweep at {run.path('sweep.csv')}; run 'pme-lab sweep' first")
    curves = summarize(run)
    data, sur = run.dataset(), run.surrogate()
    N = _selected_N(run, curves)
    rep = run.path("report")
    rep.mkdir(parents=True, exist_ok=True)

    pme = fit_pme(data.D, data.U)
    D_pme = pme_reconstruct_geometry(pme, pme_encode(pme, data.D, N))
    nl, _ = _nlpme_cell(run, data, sur, N)
    D_nl, _ = nlpme_reconstruct(nl, data.D, "surrogate")
    D_gen, U_hat = nlpme_reconstruct(nl, data.D, "generator", run.gen)
    per = {"PME": metrics.per_sample_nse(data.D, D_pme), "NLPME": metrics.per_sample_nse(data.D, D_nl)}
    if N < data.n_g and N in curves["DAE"].N:
        per["DAE"] = metrics.per_sample_nse(data.D, dae_reconstruct(_dae_cell(run, data, N)[0], data.D))

    eps_s, eps_g = metrics.nmse(data.D, D_nl), metrics.nmse(data.D, D_gen)
    run.write_csv(rep / "consistency.csv", ["N", "epsilon_surrogate", "epsilon_generator", "relative_gap"],
                  [(N, _fmt(eps_s), _fmt(eps_g), _fmt(abs(eps_s - eps_g) / eps_g))])

    hi = max(float(v.max()) for v in per.values())
    hists = {m: metrics.error_pdf(v, run.cfg.n_bins, (0.0, hi if hi > 0 else 1.0)) for m, v in per.items()}
    rows = []
    for m, (dens, edges) in hists.items():
        rows += [(m, _fmt(edges[i]), _fmt(edges[i + 1]), _fmt(dens[i])) for i in range(len(dens))]
    run.write_csv(rep / "pdf.csv", ["method", "left", "right", "density"], rows)
    plots.histogram_svg(hists, rep / "pdf.svg", N, run.comment)

    idx = metrics.representative_sample(per["PME"], per["NLPME"])
    e_pme = metrics.per_point_error(data.D[idx], D_pme[idx])
    e_nl = metrics.per_point_error(data.D[idx], D_nl[idx])
    g = (data.g0 + data.D[idx]).reshape(-1, 3)
    run.write_csv(rep / "per_point_error.csv", ["point", "x", "y", "z", "error_PME", "error_NLPME"],
                  [(i, _fmt(p[0]), _fmt(p[1]), _fmt(p[2]), _fmt(a), _fmt(b))
                   for i, (p, a, b) in enumerate(zip(g, e_pme, e_nl))])
    run.write_csv(rep / "summary.csv", ["key", "value"], [
        ("selected_N", N),
        ("representative_sample", idx),
        ("decoded_outside_box", int(np.sum((U_hat <= 0) | (U_hat >= 1)))),
    ])
    print(f"report: N={N}, eps via surrogate {eps_s:.4g}, via generator {eps_g:.4g}, sample {idx}")
    return N


def build_parser():
    p = argparse.ArgumentParser(prog="pme-lab", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=["generate", "fit-pme", "train-surrogate", "train-nlpme",
                                       "train-dae", "sweep", "report"])
    p.add_argument("--config", help="config file of 'section.key = value' lines")
    p.add_argument("--n", type=int, help="latent dimension (train-nlpme / train-dae)")
    p.add_argument("--resume", action="store_true", help="sweep: keep finished cells")
    p.add_argument("--profile", choices=PROFILES)
    p.add_argument("--out", help="output directory (overrides run.out)")
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.profile) if args.config else parse_config("", args.profile)
        run = Run(cfg, args.out)
        run.out.mkdir(parents=True, exist_ok=True)
        run.path("config.txt").write_text(f"# {run.comment}\n" + cfg.to_text())
        if args.command == "generate":
            cmd_generate(run)
        elif args.command == "fit-pme":
            cmd_fit_pme(run)
        elif args.command == "train-surrogate":
            cmd_train_surrogate(run)
        elif args.command == "train-nlpme":
            cmd_train_nlpme(run, args.n)
        elif args.command == "train-dae":
            cmd_train_dae(run, args.n)
        elif args.command == "sweep":
            cmd_sweep(run, resume=args.resume)
        else:
            cmd_report(run)
    except PmeLabError as exc:
        print(f"pme-lab {args.command}: error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())
