"""
Experiment orchestration: cut-off sequences H_n = A_ext - alpha V_n for
several extensions, compared with the Friedrichs form sum A_hat - alpha V.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import __version__
from .errors import ConfigError
from .forms import AssembledOperator, ExtensionSpec, assemble_extension, perturb_form
from .mesh import build_mesh
from .schrodinger import (DEFAULT_B_GRID, FULL, RegularizingSequence, SingularPotential,
                          admissibility_curve, assemble_stiffness_mass, deficiency_basis,
                          estimate_form_bound, potential_form, resolution_warning)
from .spectral import ShiftedSolver, lowest_eigenpairs, resolvent_diff_norm

CSV_COLUMNS = ("n", "spec", "vector_id", "sre_error", "norm_resolvent_est",
               "admissibility_plus", "admissibility_minus", "eig1", "eig2", "eig3")
SPEC_ORDER = ("friedrichs", "general", "krein")
VECTOR_IDS = ("random0", "random1", "random2", "bump", "trace")
DEFAULT_SCHEDULE = tuple(10.0 ** k for k in range(1, 7))


@dataclass(frozen=True)
class ExperimentConfig:
    # mesh
    L: float = 10.0
    K_per_side: int = 2000
    grading_exponent: float = 3.0
    # potential
    kappa: float = 1.0
    beta: float = 1.5
    cap: float = math.inf
    # experiment
    alpha: float | None = None
    alpha_fraction: float | None = 0.5
    eta: float = -1.0
    z: float | None = None
    specs: tuple = ("friedrichs", "krein", "general")
    general_q: float = 1.0
    schedule: tuple | None = None
    seed: int = 0
    power_iterations: int = 200
    spectrum_k: int = 3
    b_grid: tuple = DEFAULT_B_GRID
    output: str = "."

    def echo(self) -> dict:
        d = dataclasses.asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
            elif isinstance(v, float) and math.isinf(v):
                d[k] = "inf"
        return d

    def config_hash(self) -> str:
        d = self.echo()
        d.pop("output")
        blob = json.dumps(d, sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()[:16]


def _fail(field_name, message):
    raise ConfigError(f"{field_name}: {message}", field=field_name)


class Experiment:
    """Validated config plus every matrix the runs share, built lazily."""

    def __init__(self, config: ExperimentConfig):
        self.config = config
        c = config
        if not (math.isfinite(c.L) and c.L > 0):
            _fail("L", f"half-length must be positive, got {c.L}")
        if int(c.K_per_side) != c.K_per_side or c.K_per_side < 2:
            _fail("K_per_side", f"must be an integer >= 2, got {c.K_per_side}")
        if not c.grading_exponent >= 1:
            _fail("grading_exponent", f"must be >= 1, got {c.grading_exponent}")
        if not c.kappa > 0:
            _fail("kappa", f"must be > 0, got {c.kappa}")
        if not 1 <= c.beta <= 2:
            _fail("beta", f"must lie in [1, 2], got {c.beta}")
        if not c.eta < 0:
            _fail("eta", f"must be negative, got {c.eta}")
        for s in c.specs:
            if s not in SPEC_ORDER:
                _fail("specs", f"unknown extension {s!r}; choose from {', '.join(SPEC_ORDER)}")
        if not c.general_q >= 0:
            _fail("general_q", "must be >= 0 (q is a nonnegative form)")
        if c.alpha is not None and not c.alpha >= 0:
            _fail("alpha", f"coupling must be >= 0, got {c.alpha}")
        if c.alpha is None and (c.alpha_fraction is None or not 0 <= c.alpha_fraction < 1):
            _fail("alpha_fraction", "must lie in [0, 1) (alpha < 1/a)")
        if c.schedule is not None and (not c.schedule or min(c.schedule) <= 0):
            _fail("schedule", "levels must be positive")
        if not 1 <= c.spectrum_k <= 5:
            _fail("spectrum_k", f"must lie in [1, 5], got {c.spectrum_k}")
        if c.power_iterations < 1:
            _fail("power_iterations", "must be >= 1")

        self.mesh = build_mesh(c.L, c.K_per_side, c.grading_exponent)
        self.potential = SingularPotential(c.kappa, c.beta)
        self.sequence = RegularizingSequence(self.potential, c.cap)
        self.form_bound = estimate_form_bound(self.mesh, self.potential, c.b_grid)

        a, b = self.form_bound.a, self.form_bound.b
        if c.alpha is not None:
            alpha = float(c.alpha)
        else:
            alpha = c.alpha_fraction * self.form_bound.alpha_max if a > 0 else 0.0
        if alpha > 0 and not alpha < self.form_bound.alpha_max:
            _fail("alpha", f"coupling {alpha:g} violates α < 1/a = {self.form_bound.alpha_max:g} "
                           f"(a = {a:.4g}); the perturbed form is not semibounded")
        if alpha > 0 and c.beta >= 2 and not a < 1:
            _fail("kappa", f"beta = 2 needs a < 1 (kappa > 1); estimated a = {a:.4g}")
        self.alpha = alpha
        self.uniform_lower_bound = c.eta - alpha * b
        z = self.uniform_lower_bound - 2.0 if c.z is None else float(c.z)
        if not z < self.uniform_lower_bound - 1.0:
            _fail("z", f"shift {z:g} must lie below eta - alpha*b - 1 = "
                       f"{self.uniform_lower_bound - 1.0:g}")
        self.z = z

        self.warnings = []
        levels = c.schedule if c.schedule is not None else DEFAULT_SCHEDULE
        levels = sorted(float(n) for n in levels)
        if c.schedule is None:
            # cap the default schedule at the finest level the mesh resolves
            ok = [n for n in levels if resolution_warning(self.mesh, self.sequence, n) is None]
            levels = ok or levels[:1]
        msg = resolution_warning(self.mesh, self.sequence, levels[-1])
        if msg:
            self.warnings.append(msg)
        self.schedule = levels

    # shared matrices -------------------------------------------------

    @cached_property
    def friedrichs_form(self):
        return assemble_stiffness_mass(self.mesh)[0]

    @property
    def ambient_mass(self):
        return self.friedrichs_form.ambient_mass

    @cached_property
    def deficiency(self):
        return deficiency_basis(self.mesh, self.config.eta)

    def extension_spec(self, tag: str) -> ExtensionSpec:
        eta = self.config.eta
        if tag == "friedrichs":
            return ExtensionSpec.friedrichs()
        if tag == "krein":
            return ExtensionSpec.krein(eta)
        return ExtensionSpec.general(eta, np.eye(2), self.config.general_q * np.eye(2))

    @cached_property
    def extensions(self) -> dict:
        return {t: assemble_extension(self.friedrichs_form, self.deficiency, self.extension_spec(t))
                for t in self.config.specs}

    @cached_property
    def reference(self) -> AssembledOperator:
        """Friedrichs form sum A_hat - alpha V on the trace-free space."""
        base = assemble_extension(self.friedrichs_form, self.deficiency, ExtensionSpec.friedrichs())
        if self.alpha == 0:
            return base
        W = potential_form(self.mesh, self.sequence, FULL, hardy_ok=True)
        return perturb_form(base, W, self.alpha)

    @cached_property
    def reference_solver(self) -> ShiftedSolver:
        return ShiftedSolver(self.reference, self.z)

    @cached_property
    def test_vectors(self) -> dict:
        rng = np.random.default_rng(self.config.seed)
        n = self.mesh.n_ambient
        x = self.mesh.ambient_x
        vecs = {f"random{j}": rng.standard_normal(n) for j in range(3)}
        vecs["bump"] = np.exp(-((x - 1.0) / 0.5) ** 2)
        vecs["trace"] = np.exp(-np.abs(x))
        return vecs

    def cutoff_matrix(self, level):
        return potential_form(self.mesh, self.sequence, level, include_traces=True)

    def sequence_operator(self, tag: str, level=None, W=None) -> AssembledOperator:
        op = self.extensions[tag]
        if self.alpha == 0:
            return op
        if W is None:
            W = self.cutoff_matrix(level)
        return perturb_form(op, op.form.pull_back(W), self.alpha)

    def admissibility(self, W) -> tuple:
        H = self.deficiency.vectors
        return float(H[:, 1] @ (W @ H[:, 1])), float(H[:, 0] @ (W @ H[:, 0]))

    def mass_norm(self, v) -> float:
        return math.sqrt(float(v @ (self.ambient_mass @ v)))


@dataclass
class ConvergenceReport:
    kind: str
    rows: list
    metadata: dict = field(default_factory=dict)

    def column(self, name, spec=None, vector_id=None) -> np.ndarray:
        return np.array([r[name] for r in self.rows
                         if (spec is None or r["spec"] == spec)
                         and (vector_id is None or r["vector_id"] == vector_id)])

    def levels(self, spec=None) -> np.ndarray:
        return np.unique(self.column("n", spec))

    def to_csv(self) -> str:
        lines = [",".join(CSV_COLUMNS)]
        for r in self.rows:
            lines.append(",".join(_fmt(r.get(c, math.nan)) for c in CSV_COLUMNS))
        return "\n".join(lines) + "\n"

    def write(self, outdir, stem=None):
        """Write ``<stem>.csv`` and ``<stem>.json`` atomically; returns both paths."""
        stem = stem or self.kind
        csv_path = os.path.join(outdir, stem + ".csv")
        json_path = os.path.join(outdir, stem + ".json")
        write_atomic({csv_path: self.to_csv(),
                      json_path: json.dumps(self.metadata, indent=2, sort_keys=True,
                                            default=_jsonable) + "\n"})
        return csv_path, json_path


def write_atomic(files: dict):
    """Write every ``path -> text`` pair to a temp file first, then rename them all."""
    tmp = []
    try:
        for path, text in files.items():
            outdir = os.path.dirname(os.path.abspath(path))
            os.makedirs(outdir, exist_ok=True)
            fd, name = tempfile.mkstemp(dir=outdir, prefix="." + os.path.basename(path))
            tmp.append((name, path))
            with os.fdopen(fd, "w") as fh:
                fh.write(text)
        for name, path in tmp:
            os.replace(name, path)
    finally:
        for name, _ in tmp:
            if os.path.exists(name):
                os.unlink(name)


def _fmt(v) -> str:
    if isinstance(v, str):
        return v
    v = float(v)
    if not math.isfinite(v):
        return "nan" if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return np.format_float_positional(v, precision=17, unique=False, fractional=False, trim="-")


def _jsonable(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    return str(o)


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("KREINLAB_THREADS", "1")))
    except ValueError:
        return 1


def _metadata(exp: Experiment, kind: str) -> dict:
    fb = exp.form_bound
    return {
        "kind": kind,
        "config": exp.config.echo(),
        "config_hash": exp.config.config_hash(),
        "library_version": __version__,
        "mesh_warnings": list(exp.warnings),
        "alpha": exp.alpha,
        "z": exp.z,
        "form_bound": {"a": fb.a, "b": fb.b, "b_grid_value": fb.b_grid_value,
                       "alpha_max": fb.alpha_max if math.isfinite(fb.alpha_max) else "inf"},
        "uniform_lower_bound": exp.uniform_lower_bound,
        "schedule": list(exp.schedule),
    }


def _as_experiment(config) -> Experiment:
    return config if isinstance(config, Experiment) else Experiment(config)


def run_convergence(config) -> ConvergenceReport:
    """Strong-resolvent errors ||R_n f - R_hat f|| / ||f|| per level, extension and vector.

    The Friedrichs sequence stays above the uniform bound eta - alpha b, so
    its shifted pencils are definite; the other extensions acquire bound
    states that dive below z as n grows, and are solved as nonsingular
    indefinite systems.
    """
    exp = _as_experiment(config)
    ref = exp.reference_solver
    vecs = exp.test_vectors
    ref_u = {k: ref.apply_ambient(v) for k, v in vecs.items()}
    norms = {k: exp.mass_norm(v) for k, v in vecs.items()}
    below = {}

    def one(level, W, tag):
        op = exp.sequence_operator(tag, W=W)
        solver = ShiftedSolver(op, exp.z, require_definite=(tag == "friedrichs"))
        errs = {k: exp.mass_norm(solver.apply_ambient(v) - ref_u[k]) / norms[k]
                for k, v in vecs.items()}
        est = resolvent_diff_norm(op, exp.reference, exp.z, exp.config.power_iterations,
                                  seed=exp.config.seed, solvers=(solver, ref))
        eigs = [p[0] for p in lowest_eigenpairs(op, 3)]
        return errs, est, eigs, solver.eigenvalues_below

    rows = []
    tags = [t for t in SPEC_ORDER if t in exp.config.specs]
    for level in exp.schedule:
        W = exp.cutoff_matrix(level)
        adm_plus, adm_minus = exp.admissibility(W)
        with ThreadPoolExecutor(max_workers=_workers()) as pool:
            results = list(pool.map(lambda t: one(level, W, t), tags))
        for tag, (errs, est, eigs, nb) in zip(tags, results):
            below[f"{tag}@{level:g}"] = nb
            for vid in VECTOR_IDS:
                rows.append({"n": level, "spec": tag, "vector_id": vid, "sre_error": errs[vid],
                             "norm_resolvent_est": est, "admissibility_plus": adm_plus,
                             "admissibility_minus": adm_minus,
                             "eig1": eigs[0], "eig2": eigs[1], "eig3": eigs[2]})
    meta = _metadata(exp, "convergence")
    meta["eigenvalues_below_shift"] = below
    meta["reference_lower_bound"] = exp.reference.lower_bound_estimate
    return ConvergenceReport("convergence", rows, meta)


def _corr(x, y) -> float:
    if np.ptp(x) == 0 or np.ptp(y) == 0:
        return math.nan
    return float(np.corrcoef(x, y)[0, 1])


def fit_divergence(levels, values, beta):
    """Growth-law fit: log law for beta = 1, power law otherwise."""
    levels = np.asarray(levels, dtype=float)
    values = np.asarray(values, dtype=float)
    ln = np.log(levels)
    if beta == 1.0:
        slope, intercept = np.polyfit(ln, values, 1)
        return {"law": "log", "slope": float(slope), "intercept": float(intercept),
                "correlation": _corr(ln, values)}
    slope, intercept = np.polyfit(ln, np.log(values), 1)
    corr = _corr(ln, np.log(values))
    return {"law": "power", "exponent": float(slope), "target_exponent": (beta - 1.0) / beta,
            "intercept": float(intercept), "correlation": corr}


def divergence_verdict(values) -> str:
    """'admissible-divergent' unless the increments die out (a finite supremum)."""
    v = np.asarray(values, dtype=float)
    if len(v) < 3:
        return "undetermined"
    inc = np.diff(v)
    if inc[-1] > 0 and inc[-1] >= 0.5 * inc[-2]:
        return "admissible-divergent"
    return "not admissible"


def run_admissibility(config, fit_window=(1e2, 1e6)) -> ConvergenceReport:
    """(V_n h, h) for both deficiency directions, with a growth fit and verdict."""
    exp = _as_experiment(config)
    H = exp.deficiency.vectors
    curves = {}
    for name, col in (("plus", 1), ("minus", 0)):
        curves[name] = admissibility_curve(exp.mesh, exp.sequence, H[:, col], exp.schedule)
    rows = []
    for j, level in enumerate(exp.schedule):
        rows.append({"n": level, "spec": "deficiency", "vector_id": "h",
                     "sre_error": math.nan, "norm_resolvent_est": math.nan,
                     "admissibility_plus": curves["plus"].values[j],
                     "admissibility_minus": curves["minus"].values[j],
                     "eig1": math.nan, "eig2": math.nan, "eig3": math.nan})
    meta = _metadata(exp, "admissibility")
    lv = np.asarray(exp.schedule)
    win = (lv >= fit_window[0]) & (lv <= fit_window[1])
    fits = {}
    verdicts = {}
    for name, cur in curves.items():
        if win.sum() >= 2:
            fits[name] = fit_divergence(lv[win], cur.values[win], exp.config.beta)
        verdicts[name] = divergence_verdict(cur.values)
        meta["mesh_warnings"] += [w for w in cur.warnings if w not in meta["mesh_warnings"]]
    meta["fits"] = fits
    meta["verdicts"] = verdicts
    both = set(verdicts.values())
    meta["verdict"] = both.pop() if len(both) == 1 else "mixed"
    return ConvergenceReport("admissibility", rows, meta)


def run_spectrum_tracking(config, k: int | None = None) -> ConvergenceReport:
    """Lowest k eigenvalues of every H_n, with the Krein <= Friedrichs interlacing check."""
    exp = _as_experiment(config)
    k = exp.config.spectrum_k if k is None else k
    if not 1 <= k <= 5:
        raise ConfigError(f"spectrum_k: must lie in [1, 5], got {k}", field="spectrum_k")
    tags = [t for t in SPEC_ORDER if t in exp.config.specs]
    rows = []
    spectra = {}
    for level in exp.schedule:
        W = exp.cutoff_matrix(level)
        adm_plus, adm_minus = exp.admissibility(W)
        for tag in tags:
            eigs = [p[0] for p in lowest_eigenpairs(exp.sequence_operator(tag, W=W), k)]
            spectra[(tag, level)] = eigs
            pad = eigs + [math.nan] * (3 - len(eigs))
            rows.append({"n": level, "spec": tag, "vector_id": "-", "sre_error": math.nan,
                         "norm_resolvent_est": math.nan, "admissibility_plus": adm_plus,
                         "admissibility_minus": adm_minus,
                         "eig1": pad[0], "eig2": pad[1], "eig3": pad[2]})
    meta = _metadata(exp, "spectrum")
    meta["spectra"] = {f"{t}@{n:g}": v for (t, n), v in spectra.items()}
    meta["reference_spectrum"] = [p[0] for p in lowest_eigenpairs(exp.reference, k)]
    if "krein" in tags and "friedrichs" in tags:
        ok = all(spectra[("krein", n)][j] <= spectra[("friedrichs", n)][j] + 1e-9
                 for n in exp.schedule for j in range(k))
        meta["interlacing_ok"] = ok
    return ConvergenceReport("spectrum", rows, meta)
