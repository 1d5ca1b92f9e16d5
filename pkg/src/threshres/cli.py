"""Batch experiment harness: config ingestion, pipelines, persistence.

Subcommands
-----------
validate    check the decay hypothesis of the configured potential
toeplitz    counting-function experiment (CSV + fit report + plot script)
resonances  resonance scan per coupling (CSV + check reports + plot script)
report      collate the JSON reports of a finished run directory

Exit codes: 0 success, 2 hypothesis-validation failure, 3 numerical
budget failure, 4 mathematical check violated.

Config files are TOML; the documented schema lives in the README.  All
outputs are written atomically (temp file + rename) with deterministic
formatting so identical configs give byte-identical artifacts.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # pragma: no cover - py310
    import tomli as tomllib

from . import birman_schwinger, charval, landau, toeplitz
from .errors import (
    ContourTooClose,
    FitRangeError,
    IntegrationFailure,
    MissingArtifact,
    SubdivisionBudget,
    ThreshresError,
    TruncationError,
)
from .model import (
    AxialProfile,
    DomainRadii,
    MagneticModel,
    PerturbationSpec,
    TransversePotential,
    validate_hypothesis,
)

EXIT_OK = 0
EXIT_VALIDATION = 2
EXIT_BUDGET = 3
EXIT_CHECK_FAILED = 4

_BUDGET_ERRORS = (SubdivisionBudget, TruncationError, IntegrationFailure,
                  ContourTooClose, FitRangeError)


@dataclass
class ExperimentConfig:
    """Flat mirror of the TOML schema; see README for the field list."""

    model: dict = field(default_factory=lambda: {"b0": 1.0})
    potential: dict = field(default_factory=dict)
    radii: dict = field(default_factory=dict)
    toeplitz: dict = field(default_factory=dict)
    resonances: dict = field(default_factory=dict)
    output: dict = field(default_factory=lambda: {"seed": 0, "tag": "run"})

    def to_dict(self):
        return asdict(self)

    @classmethod
    def from_dict(cls, data):
        known = {"model", "potential", "radii", "toeplitz", "resonances", "output"}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config sections: {sorted(unknown)}")
        return cls(**{k: dict(v) for k, v in data.items()})

    @classmethod
    def load(cls, path):
        with open(path, "rb") as fh:
            return cls.from_dict(tomllib.load(fh))


def build_model(config):
    return MagneticModel(b0=float(config.model.get("b0", 1.0)))


def build_spec(config, coupling=None):
    pot = config.potential
    n = int(pot.get("n", 2))
    transverse = TransversePotential(
        kind=pot.get("transverse", "gaussian"),
        **{k: float(v) for k, v in pot.get("transverse_params", {}).items()},
    )
    axial = AxialProfile(
        kind=pot.get("axial", "exponential"),
        **{k: float(v) for k, v in pot.get("axial_params", {}).items()},
    )
    matrix = pot.get("matrix")
    if matrix is None:
        matrix = np.zeros((n, n))
        matrix[0, 0] = 1.0
    if coupling is None:
        coupling = float(pot.get("couplings", [1.0])[0])
    return PerturbationSpec(
        n=n,
        transverse=transverse,
        axial=axial,
        matrix_profile=np.asarray(matrix, dtype=complex),
        coupling=coupling,
        delta=float(pot.get("delta", 1.0)),
        m12=float(pot.get("m12", 2.0)),
    )


def _atomic_write(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    with open(tmp, "w") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _fmt(x):
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return f"{x:.17g}"
    return str(x)


def write_csv(path, header, rows):
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    _atomic_write(path, "\n".join(lines) + "\n")


def write_json(path, payload):
    _atomic_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


# -- experiment runners -----------------------------------------------------


def run_validate(config, outdir):
    spec = build_spec(config)
    report = validate_hypothesis(spec)
    write_json(Path(outdir) / "validation.json", report.to_dict())
    return EXIT_OK if report.accepted else EXIT_VALIDATION


def _comparator_from_config(config, model):
    tp = config.toeplitz
    law = tp.get("law", "")
    params = {k: float(v) for k, v in tp.get("law_params", {}).items()}
    if law == "power":
        alpha = params.get("alpha", 2.0)
        u0_integral = params.get("u0_integral", 2.0 * math.pi)
        return law, lambda s: toeplitz.comparator_power(s, alpha, u0_integral, model.b0)
    if law == "quasi_exp":
        beta = params.get("beta", 1.0)
        mu = params.get("mu", 0.5)
        return law, lambda s: toeplitz.comparator_quasi_exponential(s, beta, mu, model.b0)
    if law == "compact":
        return law, lambda s: toeplitz.comparator_compact(s)
    return "", None


def run_toeplitz_experiment(config, outdir):
    """Counting curve CSV, fit report JSON, and a plot script."""
    outdir = Path(outdir)
    model = build_model(config)
    spec = build_spec(config)
    tp = config.toeplitz
    L_max = int(tp.get("L_max", 64))
    basis = landau.build_basis(model, Q_max=1, L_max=L_max,
                               cache_dir=os.environ.get("THRESHRES_CACHE"))
    matrix = toeplitz.assemble(spec.transverse, basis)

    s_min = float(tp.get("s_min", 1e-8))
    s_max = float(tp.get("s_max", 1e-1))
    samples = int(tp.get("samples", 24))
    s_values = np.geomspace(s_min, s_max, samples)

    law, comparator = _comparator_from_config(config, model)
    curve = toeplitz.CountingCurve.from_eigenvalues(
        matrix.eigenvalues, s_values, comparator=comparator, law=law
    )
    write_csv(outdir / "counting.csv", ["s", "n_plus", "comparator", "ratio"],
              curve.rows())

    payload = {"law": law, "fit": None, "schatten": None}
    if law:
        fit = toeplitz.fit_counting_law(curve, law,
                                        beta=float(tp.get("law_params", {}).get("beta", 1.0)))
        payload["fit"] = fit.to_dict()
    sch = toeplitz.schatten_check(matrix, spec.transverse, 2, model)
    payload["schatten"] = sch.to_dict()
    write_json(outdir / "fit_report.json", payload)
    _emit_counting_plot(outdir)
    if not sch.holds:
        return EXIT_CHECK_FAILED
    return EXIT_OK


def _dyadic_annuli(r_out, count=3):
    return [(r_out / 2.0 ** (i + 1), r_out / 2.0**i) for i in range(count)]


def run_resonance_experiment(config, outdir):
    """Per-coupling resonance CSVs plus sector/annulus/accumulation reports."""
    outdir = Path(outdir)
    model = build_model(config)
    rc = config.resonances
    flavor = rc.get("flavor", "pauli")
    L_max = int(rc.get("L_max", 32))
    Q_bs = int(rc.get("Q_bs", 3))
    grid_size = int(rc.get("grid_size", 192))
    theta = float(rc.get("theta", 0.1))
    couplings = [float(e) for e in config.potential.get("couplings", [0.05])]
    if any(e == 0 for e in couplings):
        raise ValueError("couplings must exclude 0")

    spec0 = build_spec(config)
    report = validate_hypothesis(spec0)
    if not report.accepted:
        write_json(outdir / "validation.json", report.to_dict())
        return EXIT_VALIDATION

    mass = float(config.radii.get("mass", 1.0))
    margin = float(config.radii.get("margin", 0.9))
    if flavor == "pauli":
        radii = DomainRadii.for_pauli(spec0.delta, model.b0 * 2.0, margin=margin)
    else:
        radii = DomainRadii.for_dirac(spec0.delta, model.b0 * 2.0, mass, margin=margin)

    basis = landau.build_basis(model, Q_max=Q_bs, L_max=L_max,
                               cache_dir=os.environ.get("THRESHRES_CACHE"))

    worst = EXIT_OK
    summary = {"couplings": couplings, "flavor": flavor, "runs": []}
    for e in couplings:
        spec = build_spec(config, coupling=e)
        assembly = birman_schwinger.build_assembly(
            model, spec, basis, flavor=flavor, radii=radii,
            Q_bs=Q_bs, grid_size=grid_size,
        )
        beta_top = float(np.max(assembly.beta)) if assembly.beta.size else 0.1
        r_out = float(rc.get("r_out", min(0.4 * assembly.radius, 2.5 * abs(e) * beta_top)))
        r_in = float(rc.get("r_in", r_out / 16.0))
        rset = charval.find_resonances(assembly, r_in, r_out, coupling=e,
                                       threads=int(rc.get("threads", 1)))

        tag = f"e{e:+.6g}".replace("+", "p").replace("-", "m").replace(".", "_")
        write_csv(outdir / f"resonances_{tag}.csv",
                  ["re_k", "im_k", "mult", "residual"],
                  charval.resonances_to_csv_rows(rset))

        sign = assembly.J if assembly.J else math.copysign(1.0, e)
        sec = charval.sector_check(rset, sign, theta)
        annuli = [charval.annulus_count_check(rset, rr[0], assembly.pwp)
                  for rr in _dyadic_annuli(r_out)]
        acc = charval.accumulation_check(rset, r_in, r_out, e, assembly.beta)
        run_report = {
            "coupling": e,
            "region": rset.region,
            "count": len(rset),
            "sector": sec,
            "annuli": annuli,
            "accumulation": acc,
            "theta": theta,
        }
        write_json(outdir / f"report_{tag}.json", run_report)
        summary["runs"].append(run_report)
        if not sec["holds"] or not all(a["holds"] for a in annuli):
            worst = max(worst, EXIT_CHECK_FAILED)

    write_json(outdir / "summary.json", summary)
    _emit_resonance_plot(outdir, theta)
    return worst


def emit_plots(run_dir):
    """Write plot scripts for whatever artifacts the run directory holds."""
    run_dir = Path(run_dir)
    wrote = []
    if (run_dir / "counting.csv").is_file():
        _emit_counting_plot(run_dir)
        wrote.append("plot_counting.py")
    res = sorted(run_dir.glob("resonances_*.csv"))
    if res:
        theta = 0.1
        for rep in sorted(run_dir.glob("report_*.json")):
            theta = json.loads(rep.read_text()).get("theta", theta)
            break
        _emit_resonance_plot(run_dir, theta)
        wrote.append("plot_resonances.py")
    if not wrote:
        raise MissingArtifact(f"no counting.csv or resonances_*.csv in {run_dir}")
    return wrote


_COUNTING_PLOT = """\
#!/usr/bin/env python3
\"\"\"Render the counting curve against its comparator (reads counting.csv).\"\"\"
import csv
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

with open("counting.csv") as fh:
    rows = list(csv.DictReader(fh))
s = [float(r["s"]) for r in rows]
n = [int(r["n_plus"]) for r in rows]
comp = [float(r["comparator"]) for r in rows]

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.loglog(s, n, "o-", label="n_+")
if all(c == c for c in comp):
    ax1.loglog(s, comp, "--", label="comparator")
ax1.set_xlabel("s"); ax1.set_ylabel("count"); ax1.legend()
ax2.semilogx(s, n, "o-", label="n_+")
if all(c == c for c in comp):
    ax2.semilogx(s, comp, "--", label="comparator")
ax2.set_xlabel("s"); ax2.legend()
fig.tight_layout()
fig.savefig("counting.png", dpi=150)
"""

_RESONANCE_PLOT = """\
#!/usr/bin/env python3
\"\"\"k-plane scatter of located resonances with the sector wedge overlay.

Reads resonances_*.csv and report_*.json from the working directory.
\"\"\"
import csv, glob, json, math
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

fig, ax = plt.subplots(figsize=(6, 6))
rmax = 0.0
for path in sorted(glob.glob("resonances_*.csv")):
    with open(path) as fh:
        rows = list(csv.DictReader(fh))
    x = [float(r["re_k"]) for r in rows]
    y = [float(r["im_k"]) for r in rows]
    rmax = max([rmax] + [math.hypot(a, b) for a, b in zip(x, y)])
    ax.scatter(x, y, s=18, marker="x", label=path)

theta = 0.1
reports = sorted(glob.glob("report_*.json"))
if reports:
    with open(reports[0]) as fh:
        theta = json.load(fh).get("theta", theta)
if rmax == 0.0:
    rmax = 1.0
for sgn in (1.0, -1.0):
    ax.plot([0, sgn * rmax * math.sin(theta)], [0, -rmax * math.cos(theta)],
            color="gray", lw=0.8)
ax.axhline(0.0, color="k", lw=0.5)
ax.axvline(0.0, color="k", lw=0.5)
ax.set_xlabel("Re k"); ax.set_ylabel("Im k")
ax.set_aspect("equal")
ax.legend(fontsize=7)
fig.tight_layout()
fig.savefig("resonances.png", dpi=150)
"""


def _emit_counting_plot(outdir):
    _atomic_write(Path(outdir) / "plot_counting.py", _COUNTING_PLOT)


def _emit_resonance_plot(outdir, theta):
    # theta reaches the script through report_*.json, not the script body
    _atomic_write(Path(outdir) / "plot_resonances.py", _RESONANCE_PLOT)


def run_report(run_dir):
    run_dir = Path(run_dir)
    reports = sorted(run_dir.glob("*.json"))
    if not reports:
        raise MissingArtifact(f"no JSON reports in {run_dir}")
    combined = {}
    for path in reports:
        combined[path.name] = json.loads(path.read_text())
    write_json(run_dir / "collated.json", combined)
    for name, payload in combined.items():
        if name == "collated.json":
            continue
        print(f"-- {name}")
        print(json.dumps(payload, indent=2, sort_keys=True)[:2000])
    return EXIT_OK


# -- entry point ------------------------------------------------------------


def _apply_overrides(config, pairs):
    for pair in pairs or ():
        key, _, raw = pair.partition("=")
        section, _, name = key.partition(".")
        if not name:
            raise ValueError(f"override {pair!r} must look like section.key=value")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        getattr(config, section)[name] = value


def main(argv=None):
    parser = argparse.ArgumentParser(
        prog="threshres",
        description="threshold-resonance experiments for Pauli/Dirac operators",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("validate", "toeplitz", "resonances"):
        p = sub.add_parser(name)
        p.add_argument("--config", required=True)
        p.add_argument("--out", default=".")
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--set", action="append", dest="overrides", metavar="SEC.KEY=V")
    p = sub.add_parser("report")
    p.add_argument("--run-dir", required=True)

    args = parser.parse_args(argv)
    try:
        if args.command == "report":
            return run_report(args.run_dir)
        config = ExperimentConfig.load(args.config)
        _apply_overrides(config, args.overrides)
        if args.threads and args.threads > 1:
            config.resonances.setdefault("threads", args.threads)
        if args.command == "validate":
            return run_validate(config, args.out)
        if args.command == "toeplitz":
            return run_toeplitz_experiment(config, args.out)
        return run_resonance_experiment(config, args.out)
    except _BUDGET_ERRORS as err:
        print(f"numerical budget failure: {err}", file=sys.stderr)
        return EXIT_BUDGET
    except ThreshresError as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_BUDGET


if __name__ == "__main__":
    sys.exit(main())
