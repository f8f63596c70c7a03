"""Command line entry point and the cached end-to-end pipeline."""

from __future__ import annotations

import argparse
import dataclasses
import hashlib
import json
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import boundary, conformal, doi, groups, io, measures, quantized
from .errors import FiniteRank, InsufficientData, NumericalError, QFTraceError, ValidationError
from .groups import GroupKind

SUMMARY_SCHEMA = "qftrace.summary/1"
P_SOURCES = ("orbit", "boxcount", "slope", "manual")


@dataclass
class ExperimentConfig:
    group: str = "bent:0.3"
    depth: int = 14
    prune: float = 1e6
    vertex_budget: int = 16384
    fourier_n: int = 4096
    cutoff_m: int = 1024
    p_source: str = "boxcount"
    p_manual: float | None = None
    test_functions: tuple = ("one", "re", "im", "abs2")
    s_offset: float = 0.1
    geometricity_generators: tuple = (0, 1)
    out_dir: str = "qftrace_out"
    seed: int = 0

    def validate(self) -> "ExperimentConfig":
        groups.group_from_label(self.group)
        n = self.fourier_n
        if n < 64 or n & (n - 1):
            raise ValidationError("fourier_n must be a power of two >= 64")
        if self.cutoff_m < 1 or self.cutoff_m > n // 4:
            raise ValidationError("cutoff_m must lie in [1, fourier_n/4]")
        if self.p_source not in P_SOURCES:
            raise ValidationError(f"p_source must be one of {P_SOURCES}")
        if self.p_source == "manual" and not (self.p_manual and self.p_manual > 0):
            raise ValidationError("p_source 'manual' needs p_manual > 0")
        unknown = set(self.test_functions) - set(measures.STANDARD_TEST_FUNCTIONS)
        if "one" not in self.test_functions or unknown:
            raise ValidationError("test functions must include 'one' and come from one/re/im/abs2")
        if not 0 < self.s_offset <= 0.2:
            raise ValidationError("s_offset must lie in (0, 0.2]")
        if self.vertex_budget < 16:
            raise ValidationError("vertex_budget must be >= 16")
        return self

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["test_functions"] = list(self.test_functions)
        d["geometricity_generators"] = list(self.geometricity_generators)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        extra = set(d) - names
        if extra:
            raise ValidationError(f"unknown config keys: {sorted(extra)}")
        d = dict(d)
        for k in ("test_functions", "geometricity_generators"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d).validate()


def _key(*parts) -> str:
    blob = json.dumps(parts, sort_keys=True, default=str).encode()
    return hashlib.sha256(blob).hexdigest()[:16]


class StageError(QFTraceError):
    def __init__(self, stage: str, exc: QFTraceError):
        self.stage, self.exc = stage, exc
        super().__init__(f"[{stage}] {type(exc).__name__}: {exc}")


@dataclass
class Stages:
    """Content-addressed cache directory; ``hits`` records reused stages."""

    root: Path
    hits: list = field(default_factory=list)
    built: list = field(default_factory=list)

    def path(self, stage: str, key: str, ext: str) -> Path:
        return self.root / "cache" / f"{stage}-{key}.{ext}"

    def get(self, stage, key, ext, build, load, save):
        p = self.path(stage, key, ext)
        if p.exists():
            self.hits.append(stage)
            return load(p), p
        try:
            obj = build()
        except QFTraceError as exc:
            raise StageError(stage, exc) from exc
        p.parent.mkdir(parents=True, exist_ok=True)
        save(p, obj)
        self.built.append(stage)
        return obj, p


def _r(x, nd: int = 12):
    """Round floats for the summary so that roundoff-level noise cannot change bytes."""
    if x is None:
        return None
    if isinstance(x, (list, tuple)):
        return [_r(v, nd) for v in x]
    x = float(x)
    if not math.isfinite(x):
        return None
    return float(f"{x:.{nd}g}")


def _save_curve(p, curve):
    io.write_columns_csv(p, ["t", "re_w", "im_w"], curve.t, curve.points.real, curve.points.imag)


def _load_curve(p):
    d = io.read_columns_csv(p)
    return boundary.CurvePolyline(d[:, 1] + 1j * d[:, 2], d[:, 0], True)


def _save_samples(p, z):
    io.write_columns_csv(p, ["k", "re_z", "im_z"], np.arange(len(z)), z.real, z.imag)


def _load_samples(p):
    d = io.read_columns_csv(p)
    return d[:, 1] + 1j * d[:, 2]


def _save_mu(p, mu):
    io.write_columns_csv(p, ["k", "mu"], np.arange(len(mu)), mu)


def _load_mu(p):
    return io.read_columns_csv(p)[:, 1]


def _curve_for(base, pres, orbit):
    samples = boundary.fixed_point_pairs(base, pres, orbit)
    return boundary.order_curve(samples)


def run_pipeline(config: ExperimentConfig) -> dict:
    """Run every stage, reusing cached artifacts, and write ``summary.json``."""
    cfg = config.validate()
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    st = Stages(out)
    pres = groups.group_from_label(cfg.group)
    base = groups.baseline_for(pres)
    files = {}

    k_orbit = _key("orbit", cfg.group, cfg.depth, cfg.prune)
    orbit, p = st.get(
        "orbit", k_orbit, "npz", lambda: groups.enumerate_orbit(pres, cfg.depth, cfg.prune), io.load_orbit, io.save_orbit
    )
    files["orbit"] = p
    try:
        p_orbit, p_orbit_se = groups.critical_exponent(orbit)
    except QFTraceError as exc:
        raise StageError("orbit", exc) from exc

    k_curve = _key("curve", k_orbit)
    curve, p = st.get("curve", k_curve, "csv", lambda: _curve_for(base, pres, orbit), _load_curve, _save_curve)
    files["curve"] = p
    try:
        box = boundary.curve_box_dimension(curve)
    except QFTraceError as exc:
        raise StageError("dimension", exc) from exc

    k_map = _key("map", k_curve, cfg.vertex_budget)
    cmap, p = st.get(
        "map",
        k_map,
        "json",
        lambda: conformal.fit_zipper(curve.subsample(cfg.vertex_budget)),
        conformal.load_map,
        conformal.save_map,
    )
    files["map"] = p

    def samples_for(n):
        k = _key("samples", k_map, n)
        z, p = st.get("samples", k, "csv", lambda: conformal.eval_boundary(cmap, n), _load_samples, _save_samples)
        return z, p

    Zs, files["samples"] = samples_for(cfg.fourier_n)
    fd = quantized.fourier_coeffs(Zs)

    def spectrum_for(fdata, M, tag):
        k = _key("spectrum", tag, M)
        return st.get(
            "spectrum", k, "csv", lambda: quantized.commutator_singular_values(fdata, M), _load_mu, _save_mu
        )

    M = cfg.cutoff_m
    mu, files["spectrum"] = spectrum_for(fd, M, _key(k_map, cfg.fourier_n))
    summary = {
        "schema": SUMMARY_SCHEMA,
        "config": cfg.to_dict(),
        "group": {"label": pres.label, "kind": pres.kind.value, "bending_angle": pres.bending_angle},
        "orbit": {"n_elements": len(orbit), "collisions": orbit.meta.get("collisions"), "pruned": orbit.meta.get("pruned")},
        "p_hat_orbit": {"value": _r(p_orbit), "stderr": _r(p_orbit_se)},
        "p_hat_box": {"value": _r(box.dimension), "stderr": _r(box.stderr)},
        "curve": {"n_points": len(curve), "max_gap": _r(boundary.max_gap(curve))},
        "map": {"kind": cmap.kind, "n_vertices": len(cmap.vertices), "eps_fit": _r(cmap.eps_fit)},
    }

    try:
        fit = quantized.fit_decay_exponent(mu, M)
        finite_rank = None
    except FiniteRank as exc:
        fit, finite_rank = None, exc.rank
    except InsufficientData as exc:
        raise StageError("spectrum", exc) from exc
    summary["finite_rank"] = finite_rank
    if fit is not None:
        summary["p_hat_slope"] = {"value": _r(fit.p_hat), "stderr": _r(fit.stderr), "window": list(fit.window)}
        n2 = max(cfg.fourier_n, 8 * M)
        Z2, _ = samples_for(n2)
        mu2, _ = spectrum_for(quantized.fourier_coeffs(Z2), 2 * M, _key(k_map, n2))
        fit2 = quantized.fit_decay_exponent(mu2, 2 * M)
        summary["truncation"] = {"p_hat_slope_2M": _r(fit2.p_hat), "delta": _r(abs(fit2.p_hat - fit.p_hat))}
    else:
        summary["p_hat_slope"] = None

    if pres.kind is GroupKind.FUCHSIAN:
        summary["conjugated_variant"] = _conjugated_flag(orbit, base, cfg, st)

    p_used = {
        "orbit": p_orbit,
        "boxcount": box.dimension,
        "slope": fit.p_hat if fit is not None else None,
        "manual": cfg.p_manual,
    }[cfg.p_source]
    summary["p_used"] = {"source": cfg.p_source, "value": _r(p_used)}

    if fit is None or p_used is None:
        summary["weak_norm_profile"] = None
        summary["zeta_floor"] = None
        summary["trace_measure"] = {"skipped": "finite-rank commutator spectrum"}
        summary["geometricity"] = None
    else:
        summary["weak_norm_profile"] = _weak_profile(mu, p_used)
        floor, top, s_grid, vals = quantized.zeta_floor(mu, p_used)
        summary["zeta_floor"] = {
            "floor": _r(floor),
            "top": _r(top),
            "ratio": _r(floor / top),
            "s": _r(list(s_grid)),
            "values": _r(list(vals)),
        }
        k_meas = _key("measure", k_orbit, k_curve, _r(p_used), cfg.s_offset)
        nu, files["measure"] = st.get(
            "measure",
            k_meas,
            "csv",
            lambda: measures.patterson_sullivan(orbit, p_used, s_offset=cfg.s_offset, limit_points=curve.points),
            lambda p: measures.read_atoms_csv(p, s=p_used + cfg.s_offset),
            measures.write_atoms_csv,
        )
        tf = {name: measures.STANDARD_TEST_FUNCTIONS[name] for name in cfg.test_functions}
        try:
            rep = measures.trace_vs_measure_report(fd, nu, p_used, tf, M=M)
        except QFTraceError as exc:
            raise StageError("trace-report", exc) from exc
        summary["trace_measure"] = {
            "c1": _r(rep.c1),
            "spread": _r(rep.spread),
            "skipped": list(rep.skipped),
            "rows": [
                {"f": r.name, "trace": _r(r.trace), "integral": _r(r.integral), "ratio": _r(r.ratio)} for r in rep.rows
            ],
        }
        summary["geometricity"] = {
            f"g{k}": _r(measures.geometricity_check(nu, pres.primary(k), np.real)) for k in cfg.geometricity_generators
        }

    summary["files"] = {k: str(Path(v).relative_to(out)) for k, v in sorted(files.items())}
    io.write_json(out / "summary.json", summary)
    summary["_cache"] = {"hits": st.hits, "built": st.built}
    return summary


def _weak_profile(mu, p):
    """sup (k+1)^{1/p} mu(k) over dyadic blocks [2^j - 1, 2^{j+1} - 1)."""
    mu = np.asarray(mu)
    k = np.arange(1, len(mu) + 1, dtype=float)
    w = k ** (1.0 / p) * mu
    blocks, sups = [], []
    j = 0
    while (1 << j) - 1 < len(mu):
        lo, hi = (1 << j) - 1, min((1 << (j + 1)) - 1, len(mu))
        blocks.append([lo, hi])
        sups.append(float(w[lo:hi].max()))
        j += 1
    return {"p": _r(p), "blocks": blocks, "sup": _r(sups), "overall": _r(max(sups))}


def _conjugated_flag(orbit, base, cfg, st):
    conj = groups.conjugate(base, groups.DEFAULT_CONJUGATOR)
    k = _key("conj-curve", cfg.depth, cfg.prune, cfg.group)
    curve, _ = st.get("curve", k, "csv", lambda: _curve_for(base, conj, orbit), _load_curve, _save_curve)
    cmap = conformal.fit_zipper(curve.subsample(cfg.vertex_budget))
    fd = quantized.fourier_coeffs(conformal.eval_boundary(cmap, cfg.fourier_n))
    mu = quantized.commutator_singular_values(fd, cfg.cutoff_m)
    rank = quantized.numerical_rank(mu)
    return {"map_kind": cmap.kind, "numerical_rank": rank, "finite_rank": bool(rank < len(mu) // 2)}


# ---------------------------------------------------------------------------
# subcommands


def _emit(obj):
    print(json.dumps(obj, indent=2, sort_keys=True, default=str))


def cmd_catalog(a):
    for k, v in groups.CATALOG.items():
        print(f"{k:14s} {v}")


def cmd_orbit(a):
    orb = groups.enumerate_orbit(groups.group_from_label(a.group), a.depth, a.prune)
    io.save_orbit(a.out, orb)
    _emit({"n_elements": len(orb), **{k: v for k, v in orb.meta.items() if isinstance(v, (int, float))}})


def cmd_limitset(a):
    pres = groups.group_from_label(a.group)
    orb = io.load_orbit(a.orbit) if a.orbit else groups.enumerate_orbit(pres, a.depth, a.prune)
    s = boundary.fixed_point_pairs(groups.baseline_for(pres), pres, orb)
    boundary.write_samples_csv(a.out, s)
    _emit({"n_samples": len(s), **s.meta})


def _read_points(path):
    d = io.read_columns_csv(path)
    return d[:, 1] + 1j * d[:, 2]


def cmd_dimension(a):
    d = io.read_columns_csv(a.input)
    if a.curve:
        s = boundary.BoundarySamples(d[:, 0], d[:, 1] + 1j * d[:, 2], np.zeros(len(d), int), np.zeros(len(d), int))
        fit = boundary.curve_box_dimension(boundary.order_curve(s), a.scales)
    else:
        fit = boundary.box_dimension(d[:, 1] + 1j * d[:, 2], a.scales)
    _emit({"dimension": fit.dimension, "stderr": fit.stderr, "scales": fit.scales, "counts": fit.counts})


def cmd_riemann_map(a):
    d = io.read_columns_csv(a.curve)
    s = boundary.BoundarySamples(d[:, 0], d[:, 1] + 1j * d[:, 2], np.zeros(len(d), int), np.zeros(len(d), int))
    curve = boundary.order_curve(s)
    cmap = conformal.fit_zipper(curve, eps_fit=a.eps_fit, max_vertices=a.vertices)
    conformal.save_map(a.out, cmap)
    _emit({"kind": cmap.kind, "n_vertices": len(cmap.vertices), "eps_fit": cmap.eps_fit})


def cmd_boundary_samples(a):
    z = conformal.eval_boundary(conformal.load_map(a.map), a.n)
    _save_samples(a.out, z)
    _emit({"n": a.n})


def cmd_spectrum(a):
    fd = quantized.fourier_coeffs(_read_points(a.samples))
    mu = quantized.commutator_singular_values(fd, a.cutoff)
    if a.out:
        _save_mu(a.out, mu)
    res = {"cutoff": a.cutoff, "numerical_rank": quantized.numerical_rank(mu)}
    if a.p_fit:
        fit = quantized.fit_decay_exponent(mu, a.cutoff)
        res.update(p_hat=fit.p_hat, stderr=fit.stderr, window=fit.window, weak_norm=quantized.weak_norm(mu, fit.p_hat))
    _emit(res)


def cmd_trace(a):
    Zs = _read_points(a.samples)
    fd = quantized.fourier_coeffs(Zs)
    f = measures.STANDARD_TEST_FUNCTIONS[a.f]
    est = quantized.localized_trace(fd, np.real(f(Zs)), a.p, a.cutoff)
    if a.out:
        io.write_columns_csv(a.out, ["n", "partial"], est.params, est.partials)
    _emit({"f": a.f, "p": a.p, "value": est.value, "method": est.method})


def cmd_measure(a):
    orb = io.load_orbit(a.orbit)
    lim = _read_points(a.curve) if a.curve else None
    nu = measures.patterson_sullivan(orb, a.p, s_offset=a.offset, limit_points=lim)
    measures.write_atoms_csv(a.out, nu)
    ints = {k: complex(measures.integrate(nu, f)).real for k, f in measures.STANDARD_TEST_FUNCTIONS.items()}
    _emit({"n_atoms": len(nu), "s": nu.s, "integrals": ints, **nu.meta})


def cmd_trace_report(a):
    fd = quantized.fourier_coeffs(_read_points(a.samples))
    nu = measures.read_atoms_csv(a.measure)
    rep = measures.trace_vs_measure_report(fd, nu, a.p, M=a.cutoff)
    _emit(
        {
            "c1": rep.c1,
            "spread": rep.spread,
            "skipped": rep.skipped,
            "rows": [dataclasses.asdict(r) for r in rep.rows],
        }
    )


def cmd_doi_verify(a):
    rng = np.random.default_rng(a.seed)
    X, Y = doi.random_positive(a.n, rng), doi.random_positive(a.n, rng)
    q = doi.make_quadrature(a.p)
    _emit(
        {
            "p": a.p,
            "n": a.n,
            "seed": a.seed,
            "nodes": q.n_nodes,
            "S": q.S,
            "reconstruction_error": q.reconstruction_error(),
            "power_difference": doi.verify_power_difference(X, Y, a.p, q),
            "second_formula": doi.verify_second_formula(X, Y, a.p, q),
        }
    )


def cmd_run(a):
    d = io.read_json(a.config) if a.config else {}
    for k in ("group", "depth", "prune", "cutoff_m", "fourier_n", "vertex_budget", "p_source", "out_dir", "seed"):
        v = getattr(a, k, None)
        if v is not None:
            d[k] = v
    summary = run_pipeline(ExperimentConfig.from_dict(d))
    summary.pop("_cache", None)
    _emit(summary)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="qftrace", description="Quasi-Fuchsian trace experiments")
    sub = ap.add_subparsers(dest="cmd", required=True)

    sub.add_parser("catalog", help="list group labels").set_defaults(fn=cmd_catalog)

    p = sub.add_parser("orbit", help="enumerate a group orbit")
    p.add_argument("--group", required=True)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--prune", type=float, default=1e6)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_orbit)

    p = sub.add_parser("limitset", help="limit-set samples paired with the circle parameter")
    p.add_argument("--group", required=True)
    p.add_argument("--depth", type=int, default=14)
    p.add_argument("--prune", type=float, default=1e6)
    p.add_argument("--orbit", help="orbit cache to reuse")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_limitset)

    p = sub.add_parser("dimension", help="box-counting dimension of a sample CSV")
    p.add_argument("--in", dest="input", required=True)
    p.add_argument("--scales", type=float, nargs="+")
    p.add_argument("--curve", action="store_true", help="order the samples and fill in chords")
    p.set_defaults(fn=cmd_dimension)

    p = sub.add_parser("riemann-map", help="fit the zipper map to a limit-set curve")
    p.add_argument("--curve", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--vertices", type=int, default=16384)
    p.add_argument("--eps-fit", type=float, default=conformal.EPS_FIT)
    p.set_defaults(fn=cmd_riemann_map)

    p = sub.add_parser("boundary-samples", help="evaluate Z on the N-th roots of unity")
    p.add_argument("--map", required=True)
    p.add_argument("--n", type=int, default=4096)
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_boundary_samples)

    p = sub.add_parser("spectrum", help="singular values of [F, Z]")
    p.add_argument("--samples", required=True)
    p.add_argument("--cutoff", type=int, default=1024)
    p.add_argument("--p-fit", action="store_true")
    p.add_argument("--out")
    p.set_defaults(fn=cmd_spectrum)

    p = sub.add_parser("trace", help="localized Dixmier-trace estimate")
    p.add_argument("--samples", required=True)
    p.add_argument("--f", choices=sorted(measures.STANDARD_TEST_FUNCTIONS), default="one")
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--cutoff", type=int, default=1024)
    p.add_argument("--out")
    p.set_defaults(fn=cmd_trace)

    p = sub.add_parser("measure", help="orbit-sum geometric measure")
    p.add_argument("--orbit", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--offset", type=float, default=0.1)
    p.add_argument("--curve", help="limit-set CSV used to clip atoms to its bounding box")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_measure)

    p = sub.add_parser("trace-report", help="trace/measure ratio table")
    p.add_argument("--samples", required=True)
    p.add_argument("--measure", required=True)
    p.add_argument("--p", type=float, required=True)
    p.add_argument("--cutoff", type=int, default=1024)
    p.set_defaults(fn=cmd_trace_report)

    p = sub.add_parser("doi-verify", help="residuals of the power-difference formulas")
    p.add_argument("--p", type=float, default=1.5)
    p.add_argument("--n", type=int, default=6)
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(fn=cmd_doi_verify)

    p = sub.add_parser("run", help="full cached pipeline")
    p.add_argument("--config", help="JSON file with ExperimentConfig fields")
    p.add_argument("--group")
    p.add_argument("--depth", type=int)
    p.add_argument("--prune", type=float)
    p.add_argument("--cutoff", dest="cutoff_m", type=int)
    p.add_argument("--fourier-n", type=int)
    p.add_argument("--vertex-budget", type=int)
    p.add_argument("--p-source", choices=P_SOURCES)
    p.add_argument("--out-dir")
    p.add_argument("--seed", type=int)
    p.set_defaults(fn=cmd_run)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        args.fn(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2 if isinstance(exc.exc, ValidationError) else 3
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3
    except (OSError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
