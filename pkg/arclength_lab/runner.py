"""
Campaign runner

CampaignRunner.run(config) resolves the curve, dispatches the configured
command to the module operations and collects everything into one
VerificationReport. Library failures inside a check become FAIL records
naming the check; configuration failures propagate as ConfigError.
"""

import logging
import math
import time
from contextlib import contextmanager
from dataclasses import replace
from fractions import Fraction
from typing import Any, Callable, Dict, Iterator, List, Optional, Sequence, Tuple

import numpy as np

from arclength_lab import __version__, sampling
from arclength_lab.band_lab import (
    LowerBoundParams,
    SeparationMetric,
    TowerParams,
    build_bands,
    build_tuple_tower,
    build_two_stage_bands,
    check_elim_diff,
    idempotence_failures,
    lower_bound_campaign,
    refine_band_structure,
    refines,
    sample_tower_configurations,
    verify_band_conclusions,
)
from arclength_lab.dw_decomp import (
    Interval,
    all_sign_vectors,
    check_monotone_centers,
    comparability_profile,
    dw_decompose,
    initial_decomposition,
    normalize_piece,
    piece_count_bound,
    preimage_collision_probe,
    verify_geometric_inequality,
)
from arclength_lab.errors import ArclengthLabError, ConfigError
from arclength_lab.exponents import Variant, exponent_bookkeeping, minimum_free_indices, mlf_quadruples, r_d
from arclength_lab.jacobian_lab import (
    JLadder,
    alternant_polynomial,
    check_Id1_partial_bound,
    check_identity_JP_equals_Jd,
    check_L1_derivative_bound,
    check_ladder_antisymmetry,
    difference_alternant,
    exhaustive_exponent_family,
    power_determinant_factor,
)
from arclength_lab.measures import Box, GridSet, MuMeasure
from arclength_lab.operator_lab import (
    check_mlE_inequality,
    check_mlF_inequality,
    functionals,
    knapp_family,
    knapp_sweep,
    off_endpoint_sweep,
    rwt_ratio,
)
from arclength_lab.poly_core import PolyCurve, eval_curve
from arclength_lab.report import CheckStatus, VerificationReport
from config.corpus import CORPUS_VERSION, list_corpus, resolve_curve
from config.run_config import Command, RunConfig
from config.settings import LabSettings, get_default_settings

logger = logging.getLogger(__name__)

DEFAULT_INTERVAL = (0.0, 1.0)
DEFAULT_DELTAS = [2.0 ** -j for j in range(1, 11)]


def _status(ok: bool, warn: bool = False) -> CheckStatus:
    if ok:
        return CheckStatus.PASS
    return CheckStatus.WARN if warn else CheckStatus.FAIL


def grid_set_from_spec(spec: Dict[str, Any]) -> GridSet:
    """{"lo": [...], "hi": [...]} | {"boxes": [{"corner", "sides"}]} | {"ball": {"center", "radius", "cells"}}"""
    try:
        if "ball" in spec:
            ball = spec["ball"]
            return GridSet.ball(ball["center"], float(ball["radius"]), int(ball.get("cells", 8)))
        if "boxes" in spec:
            boxes = [Box(tuple(b["corner"]), tuple(b["sides"])) for b in spec["boxes"]]
            return GridSet(boxes, spec.get("frame"), spec.get("shift"))
        return GridSet.box(spec["lo"], spec["hi"])
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed set description: {exc}", "params") from exc


class CampaignRunner:
    """Dispatch a RunConfig to the library and collect a VerificationReport"""

    def __init__(self, settings: Optional[LabSettings] = None):
        self.settings = settings or get_default_settings()
        self._handlers: Dict[Command, Callable[[RunConfig, VerificationReport], None]] = {
            Command.DECOMPOSE: self._decompose,
            Command.VERIFY_IDENTITY: self._verify_identity,
            Command.VERIFY_VANDERMONDE: self._verify_vandermonde,
            Command.VERIFY_DERIVATIVE_BOUNDS: self._verify_derivative_bounds,
            Command.VERIFY_GEOMETRIC: self._verify_geometric,
            Command.VERIFY_LBJ: self._verify_lbj,
            Command.BANDS_BUILD: self._bands_build,
            Command.BANDS_VERIFY: self._bands_verify,
            Command.TOWER_BUILD: self._tower_build,
            Command.OPERATOR_RATIO: self._operator_ratio,
            Command.OPERATOR_SWEEP_KNAPP: self._operator_sweep_knapp,
            Command.OPERATOR_CHECK_MLE: self._operator_check_mle,
            Command.OPERATOR_CHECK_MLF: self._operator_check_mlf,
            Command.CORPUS_LIST: self._corpus_list,
        }

    def run(self, config: RunConfig) -> VerificationReport:
        started = time.perf_counter()
        report = VerificationReport(command=config.command.value, config=config.echo(), version=__version__)
        logger.info("running %s", config.command.value)
        self._handlers[config.command](config, report)
        report.summary = {"counts": report.counts(), "passed": report.passed, **report.summary}
        report.wall_time = round(time.perf_counter() - started, 3)
        logger.info("%s finished: %s", config.command.value, report.counts())
        return report

    @contextmanager
    def _guard(self, report: VerificationReport, name: str, anchor: str) -> Iterator[None]:
        try:
            yield
        except ConfigError:
            raise
        except ArclengthLabError as exc:
            report.add_check(name, anchor, CheckStatus.FAIL, {"error": type(exc).__name__, "message": str(exc)})

    # shared inputs

    def _curve(self, config: RunConfig) -> PolyCurve:
        if config.curve is not None:
            return config.curve.to_curve()
        return resolve_curve(config.corpus, config.seed or 0, self.settings.corpus_dir)

    @staticmethod
    def _interval(config: RunConfig, default: Tuple[float, float] = DEFAULT_INTERVAL) -> Interval:
        if config.interval is not None:
            return Interval(config.interval.lo, config.interval.hi)
        return Interval(*default)

    def _samples(self, config: RunConfig, default: Optional[int] = None) -> int:
        return config.samples or default or self.settings.sampling.default_samples

    def _comparability(self, config: RunConfig):
        return replace(self.settings.comparability, max_ratio=config.tolerances.comparability_ratio)

    def _leaves(self, config: RunConfig, curve: PolyCurve):
        return dw_decompose(curve, config.tolerances.root_tol, self._comparability(config))

    @staticmethod
    def _reach(curve: PolyCurve, interval: Interval) -> float:
        s = np.linspace(interval.lo, interval.hi, 257)
        return float(np.abs(eval_curve(curve, s)).max())

    def _covering_sets(self, curve: PolyCurve, interval: Interval, config: RunConfig,
                       names: Sequence[str], small: Sequence[str]) -> Dict[str, GridSet]:
        """Sets from params["sets"]; missing large sets cover every x -/+ P(s), missing small ones are unit boxes"""
        specs = config.params.get("sets", {})
        d = curve.dim
        radius = (2 * d + 2) * self._reach(curve, interval) + 2.0
        sets = {}
        for name in names:
            if name in specs:
                sets[name] = grid_set_from_spec(specs[name])
            elif name in small:
                sets[name] = GridSet.box([-1.0] * d, [1.0] * d)
            else:
                sets[name] = GridSet.box([-radius] * d, [radius] * d)
        return sets

    # commands

    def _decompose(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        settings = self._comparability(config)
        with self._guard(report, "decomposition", "interval decomposition"):
            leaves = self._leaves(config, curve)
            bound = piece_count_bound(curve.degree, curve.dim)
            report.add_check("piece-count", "leaf count bounded in terms of N and d",
                             _status(len(leaves) <= bound), {"leaves": len(leaves), "bound": bound})
            rows = []
            for index, leaf in enumerate(leaves):
                c_lo, c_hi = leaf.comparability
                ratio = c_hi / c_lo if c_lo > 0 else math.inf
                report.add_check(f"comparability:{index}", "|L_P(s)| ~ A|s-b|^K on the piece",
                                 _status(ratio <= settings.max_ratio, warn=bool(leaf.flags)),
                                 {"c_lo": c_lo, "c_hi": c_hi, "ratio": ratio, "flags": list(leaf.flags)})
                violation = check_monotone_centers(leaf)
                report.add_check(f"lineage:{index}", "centres move monotonically along the lineage",
                                 _status(violation <= 1e-9, warn=True), {"max_violation": violation})
                s, ratios = comparability_profile(leaf, curve, settings.grid, settings)
                rows.extend([index, float(x), float(r)] for x, r in zip(s, ratios))
            report.add_table("comparability", ["leaf", "s", "ratio"], rows)
            report.summary["leaves"] = [leaf.to_dict() for leaf in leaves]

    def _verify_identity(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        samples = self._samples(config, self.settings.sampling.identity_tuples)
        tol = float(config.params.get("tol_rel", config.tolerances.identity_rel_tol))
        swaps = int(config.params.get("swaps", 20))
        quadrature = replace(self.settings.quadrature, base_rel_tol=config.tolerances.quad_rel_tol)
        for index, piece in enumerate(initial_decomposition(curve, config.tolerances.root_tol)):
            with self._guard(report, f"identity:{index}", "J_P equals the nested ladder J_d"):
                result = check_identity_JP_equals_Jd(curve, piece, samples, tol, config.seed,
                                                     quadrature)
                report.add_check(f"identity:{index}", "J_P equals the nested ladder J_d", _status(result.passed),
                                 {"piece": piece.to_dict(), "max_relative_error": result.max_relative_error,
                                  "max_error_estimate": result.max_error_estimate, "samples": samples})
            if swaps <= 0:
                continue
            with self._guard(report, f"antisymmetry:{index}", "J_k alternates under adjacent swaps"):
                ladder = JLadder(curve, piece, settings=quadrature)
                worst = max(check_ladder_antisymmetry(ladder, k, swaps, config.seed)
                            for k in range(2, curve.dim + 1))
                report.add_check(f"antisymmetry:{index}", "J_k alternates under adjacent swaps",
                                 _status(worst <= tol), {"max_relative_defect": worst, "swaps": swaps})

    def _verify_vandermonde(self, config: RunConfig, report: VerificationReport) -> None:
        max_dim = int(config.params.get("max_dim", 4))
        max_sum = int(config.params.get("max_sum", 20))
        with self._guard(report, "vandermonde-factorization", "alternant / Vandermonde is symmetric and non-negative"):
            count = 0
            for exponents in exhaustive_exponent_family(max_dim, max_sum):
                power_determinant_factor(exponents)
                count += 1
            report.add_check("vandermonde-factorization", "alternant / Vandermonde is symmetric and non-negative",
                             CheckStatus.PASS, {"exponent_lists": count, "max_dim": max_dim, "max_sum": max_sum})
        diff_sum = int(config.params.get("difference_max_sum", 8))
        with self._guard(report, "difference-alternant", "repeated-index terms cancel"):
            mismatches = []
            checked = 0
            for ms in exhaustive_exponent_family(min(max_dim, 3), diff_sum):
                if ms[0] == 0:
                    continue
                _, _, total = difference_alternant(ms)
                _, _, alternant = alternant_polynomial((0,) + tuple(ms))
                checked += 1
                if total != alternant:
                    mismatches.append(list(ms))
            report.add_check("difference-alternant", "repeated-index terms cancel", _status(not mismatches),
                             {"checked": checked}, mismatches)

    def _verify_derivative_bounds(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        grid = int(config.params.get("grid", self.settings.comparability.grid))
        partial_golden = config.params.get("partial_golden")
        partial_golden = None if partial_golden is None else float(partial_golden)
        leaves = []
        with self._guard(report, "decomposition", "interval decomposition"):
            leaves = self._leaves(config, curve)
        for index, leaf in enumerate(leaves):
            with self._guard(report, f"L1-derivative:{index}", "s|L_1'(s)/L_1(s)| <= deg L_1"):
                norm = normalize_piece(leaf, curve, self.settings.comparability)
                check = check_L1_derivative_bound(norm.curve, norm.interval, grid)
                report.add_check(f"L1-derivative:{index}", "s|L_1'(s)/L_1(s)| <= deg L_1", _status(check.passed),
                                 {"measured": check.measured, "bound": check.bound, "truncated": norm.truncated})
                if config.seed is not None and config.samples:
                    probe = check_Id1_partial_bound(norm.curve, norm.interval, (0,), config.samples, config.seed)
                    ok = math.isfinite(probe.max_ratio)
                    ok = ok and (partial_golden is None or probe.max_ratio <= partial_golden)
                    report.add_check(f"partial-bound:{index}", "mixed partials of J_P / prod L_1", _status(ok),
                                     {"max_ratio": probe.max_ratio, "resampled": probe.resampled,
                                      "golden": partial_golden})

    def _verify_geometric(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        samples = self._samples(config)
        collision_samples = int(config.params.get("collision_samples", 0))
        quantum = float(config.params.get("quantum", 1e-6))
        sampling_settings = self.settings.sampling
        leaves = []
        with self._guard(report, "decomposition", "interval decomposition"):
            leaves = self._leaves(config, curve)
        for index, leaf in enumerate(leaves):
            with self._guard(report, f"geometric:{index}", "|J_P| >~ prod |L_P|^(1/d) |V|"):
                probe, scaled = (
                    verify_geometric_inequality(leaf, curve, samples, config.seed, self.settings.comparability,
                                                sampling_settings.chunk_size, sampling_settings.workers, log_scale)
                    for log_scale in (False, True)
                )
                report.add_check(f"geometric:{index}", "|J_P| >~ prod |L_P|^(1/d) |V|",
                                 _status(min(probe.min_ratio, scaled.min_ratio) > 0),
                                 {"min_ratio": probe.min_ratio, "max_ratio": probe.max_ratio,
                                  "log_scale_min_ratio": scaled.min_ratio, "log_scale_max_ratio": scaled.max_ratio,
                                  "samples": probe.samples, "resampled": probe.resampled + scaled.resampled,
                                  "box": list(probe.box)})
            if collision_samples <= 0:
                continue
            for eps in all_sign_vectors(curve.dim):
                name = f"collision:{index}:{''.join('+' if e > 0 else '-' for e in eps)}"
                with self._guard(report, name, "at most d! preimages of the signed sum map"):
                    hit = preimage_collision_probe(leaf, curve, eps, collision_samples, quantum, config.seed,
                                                   self.settings.comparability)
                    report.add_check(name, "at most d! preimages of the signed sum map",
                                     _status(not hit.flagged, warn=True),
                                     {"max_multiplicity": hit.max_multiplicity, "bound": hit.bound},
                                     [list(w) for w in hit.witnesses])

    def _tower_inputs(self, config: RunConfig, curve: PolyCurve):
        interval = self._interval(config)
        variant = Variant(config.params.get("variant", Variant.MLE.value))
        names = ("E1", "E2", "F") if variant is Variant.MLE else ("E", "F1", "F2")
        sets = self._covering_sets(curve, interval, config, names, small=())
        mass = MuMeasure(config.K, curve.dim).interval_mass(interval.lo, interval.hi)
        scale = float(config.params.get("scale", 0.5 * mass))
        params = TowerParams(
            alpha1=float(config.params.get("alpha1", scale)),
            alpha2=float(config.params.get("alpha2", scale)),
            beta1=float(config.params.get("beta1", scale)),
            beta2=float(config.params.get("beta2", scale)),
            grid=int(config.params.get("grid", 2048)),
            branching=int(config.params.get("branching", 4)),
            max_tuples=int(config.params.get("max_tuples", 64)),
        )
        return interval, variant, sets, params

    def _tower(self, config: RunConfig, report: VerificationReport, curve: PolyCurve):
        interval, variant, sets, params = self._tower_inputs(config, curve)
        tower = build_tuple_tower(curve, interval, sets, variant, params, config.K, config.seed)
        report.add_table("tower-levels", ["level", "demand", "floor", "retained", "pruned", "min_mass"],
                         [[r.level, r.demand, r.floor, r.retained, r.pruned, r.min_mass] for r in tower.records])
        report.add_check("tower-excision", "excised near-point mass within 2r(t+r)^(2K/d(d+1))",
                         _status(all(e.within_bound for e in tower.excisions)),
                         {"excisions": len(tower.excisions)})
        report.summary["tower"] = tower.to_dict()
        return tower, params

    def _tower_build(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        with self._guard(report, "tower", "nested tuple sets with quantitative mass"):
            tower, params = self._tower(config, report, curve)
            self._elim_diff(config, report, tower, params)

    def _elim_diff(self, config: RunConfig, report: VerificationReport, tower, params: TowerParams) -> None:
        count = int(config.params.get("elim_diff_tuples", 32))
        failed = []
        for t in sample_tower_configurations(tower, count, config.seed):
            result = check_elim_diff(t, params, tower.variant, config.K, tower.d, self.settings.bands)
            if not result.passed:
                failed.append([float(x) for x in t])
        report.add_check("elim-diff", "top-level tuples separate from earlier coordinates",
                         _status(not failed, warn=True), {"tuples": count, "failing": len(failed)}, failed[:5])

    def _verify_lbj(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        d = curve.dim
        self._exponent_checks(report, d)
        with self._guard(report, "lower-bound-J", "conditional lower bound for |J_P| on band data"):
            tower, params = self._tower(config, report, curve)
            count = self._samples(config, self.settings.sampling.tower_configurations)
            lb_params = LowerBoundParams(params.alpha1, params.alpha2, params.beta1, config.K,
                                         float(config.params.get("c0", 1.0 / 64.0)))
            campaign = lower_bound_campaign(curve, tower, lb_params, count, config.seed, self.settings.bands)
            golden = float(config.params.get("golden", 0.0))
            ok = campaign.evaluated > 0 and campaign.min_ratio > 0 and campaign.min_ratio >= golden
            report.add_check("lower-bound-J", "conditional lower bound for |J_P| on band data", _status(ok),
                             {"evaluated": campaign.evaluated, "refused": campaign.refused,
                              "skipped": campaign.skipped, "min_ratio": campaign.min_ratio, "golden": golden})

    def _exponent_checks(self, report: VerificationReport, d: int) -> None:
        with self._guard(report, "exponent-bookkeeping", "r_d and beta-exponent bookkeeping"):
            records = []
            for variant in Variant:
                for k in range(d, 2 * d):
                    forced = minimum_free_indices(d, k, variant)
                    if forced > d:
                        continue
                    M = d - forced
                    records.append(exponent_bookkeeping(d, k, M, variant).to_dict())
            measured = {"r_d": r_d(d), "records": len(records)}
            report.add_check("exponent-bookkeeping", "r_d and beta-exponent bookkeeping", CheckStatus.PASS, measured)

    def _band_inputs(self, config: RunConfig) -> Tuple[List[float], SeparationMetric, float, float]:
        params = config.params
        if "t" not in params:
            raise ConfigError("bands need a point list", "params.t")
        t = [float(x) for x in params["t"]]
        d = int(params.get("d", config.curve.dim if config.curve else max(2, (len(t) + 1) // 2)))
        return t, SeparationMetric(config.K, d), float(params.get("delta", 0.125)), float(params.get("alpha1", 1.0))

    def _bands_build(self, config: RunConfig, report: VerificationReport) -> None:
        t, metric, delta, alpha1 = self._band_inputs(config)
        with self._guard(report, "bands", "band structure"):
            if "epsilon" in config.params:
                refined = refine_band_structure(t, delta, alpha1, metric, float(config.params["epsilon"]),
                                                beta1=config.params.get("beta1"))
                bs = refined.structure
                report.summary["refinement"] = {"rounds": refined.rounds, "delta": refined.delta,
                                                "delta_prime": refined.delta_prime}
            else:
                bs = build_bands(t, delta, alpha1, metric, beta1=config.params.get("beta1"))
            total = set(bs.classification) == set(bs.indices)
            report.add_check("classification", "every index is free, quasi-free or bound", _status(total),
                             {"M": bs.M, "lambda": bs.lam})
            report.summary["bands"] = bs.to_dict()

    def _bands_verify(self, config: RunConfig, report: VerificationReport) -> None:
        params = config.params
        count = self._samples(config, 1000)
        d = int(params.get("d", 3))
        k = int(params.get("k", 2 * d - 1))
        delta = float(params.get("delta", self.settings.bands.much_less))
        alpha1 = float(params.get("alpha1", 1.0))
        epsilon = float(params.get("epsilon", self.settings.bands.epsilon))
        metric = SeparationMetric(config.K, d)
        rng = sampling.stream(config.seed, "bands-verify")
        failures: Dict[str, List[Any]] = {"totality": [], "monotone": [], "idempotent": [], "clauses": []}
        with self._guard(report, "band-invariants", "band structure invariants"):
            for _ in range(count):
                t = np.sort(rng.uniform(0.5, 2.0, size=k))
                t = t * np.exp(rng.uniform(-6, 0, size=k)) if params.get("multiscale", True) else t
                t = list(np.unique(t))
                if len(t) < 2:
                    continue
                bs = build_bands(t, delta, alpha1, metric)
                if set(bs.classification) != set(bs.indices):
                    failures["totality"].append(t)
                if not refines(build_bands(t, delta / 2, alpha1, metric), bs):
                    failures["monotone"].append(t)
                if idempotence_failures(bs, t):
                    failures["idempotent"].append(t)
                refined = refine_band_structure(t, delta, alpha1, metric, epsilon)
                clauses = verify_band_conclusions(refined.structure, t, 0.0, 0.0, settings=self.settings.bands)
                if not all(c.passed for c in clauses.values()):
                    failures["clauses"].append(t)
            for name, witnesses in failures.items():
                report.add_check(f"bands-{name}", "band structure invariants", _status(not witnesses),
                                 {"configurations": count, "failing": len(witnesses)}, witnesses[:5])
        two_stage = params.get("two_stage")
        if two_stage:
            with self._guard(report, "two-stage", "two-stage band clauses"):
                result = build_two_stage_bands(
                    two_stage["t"], two_stage["delta"], two_stage["delta_prime"], two_stage["rho"],
                    two_stage["rho_prime"], two_stage["alpha1"], two_stage["gamma2"],
                    SeparationMetric(config.K, int(two_stage.get("d", (len(two_stage["t"]) + 1) // 2))),
                    two_stage["beta1"], two_stage["beta2"], two_stage.get("c_n", 0.125),
                    two_stage.get("epsilon", 1.0 / 64.0))
                report.add_check("two-stage", "two-stage band clauses", _status(result.passed),
                                 {name: c.to_dict() for name, c in result.clauses.items()})

    def _measure(self, config: RunConfig, curve: PolyCurve) -> MuMeasure:
        return MuMeasure(config.K, curve.dim)

    def _operator_ratio(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        interval = self._interval(config)
        measure = self._measure(config, curve)
        x_samples = self._samples(config, self.settings.sampling.x_samples)
        workers = self.settings.sampling.workers
        with self._guard(report, "rwt-ratio", "restricted weak-type ratio"):
            if "sets" in config.params:
                sets = self._covering_sets(curve, interval, config, ("E", "F"), small=("F",))
                E, F = sets["E"], sets["F"]
            else:
                pair = knapp_family(curve, interval, float(config.params.get("delta", 0.25)),
                                    config.params.get("t0"))
                E, F = pair.E, pair.F
            p, q = config.params.get("p"), config.params.get("q")
            result = rwt_ratio(curve, interval, measure, E, F,
                               None if p is None else float(Fraction(str(p))),
                               None if q is None else float(Fraction(str(q))), x_samples, config.seed, workers)
            report.add_check("rwt-ratio", "restricted weak-type ratio", _status(math.isfinite(result.ratio)),
                             {"ratio": result.ratio, "error": result.error, "p": result.p, "q": result.q,
                              **result.functionals.to_dict()})
            dual = functionals(curve, interval, measure, E, F, x_samples, config.seed, duality=True, workers=workers)
            allowed = dual.error + (dual.adjoint_error or 0.0)
            report.add_check("duality", "<T chi_E, chi_F> = <chi_E, T* chi_F>", _status(dual.duality_gap <= allowed),
                             {"gap": dual.duality_gap, "allowed": allowed})

    def _operator_sweep_knapp(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        interval = self._interval(config)
        measure = self._measure(config, curve)
        deltas = [float(x) for x in config.params.get("deltas", DEFAULT_DELTAS)]
        x_samples = self._samples(config, self.settings.sampling.x_samples)
        p, q = config.params.get("p"), config.params.get("q")
        max_flatness = float(config.params.get("max_flatness", 8.0))
        with self._guard(report, "knapp-sweep", "Knapp family at the exponent pair"):
            sweep = knapp_sweep(curve, interval, measure, deltas,
                                None if p is None else float(Fraction(str(p))),
                                None if q is None else float(Fraction(str(q))),
                                x_samples, config.seed, config.params.get("t0"), self.settings.sampling.workers)
            if sweep.expected == 0:
                ok = sweep.flatness <= max_flatness
            else:
                ok = sweep.observed == sweep.expected
            report.add_check("knapp-sweep", "Knapp family at the exponent pair", _status(ok),
                             {k: v for k, v in sweep.to_dict().items() if k not in ("rows", "columns")})
            report.add_table("knapp", ["delta", "ratio", "error"], [list(r) for r in sweep.rows])
        offsets = config.params.get("offsets")
        if offsets:
            with self._guard(report, "off-endpoint", "Knapp ratios off the endpoint line"):
                off = off_endpoint_sweep(curve, interval, measure, deltas, [tuple(o) for o in offsets],
                                         x_samples, config.seed, self.settings.sampling.workers)
                for name, s in off.sweeps.items():
                    report.add_table(f"knapp:{name}", ["delta", "ratio", "error"], [list(r) for r in s.rows])
                report.add_check("off-endpoint", "Knapp ratios off the endpoint line", CheckStatus.PASS, off.growth())

    def _operator_check_mle(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        interval = self._interval(config)
        sets = self._covering_sets(curve, interval, config, ("E1", "E2", "F"), small=("F",))
        golden = float(config.params.get("golden", 0.0))
        with self._guard(report, "mlE", "restricted estimate, E-variant"):
            check = check_mlE_inequality(curve, interval, self._measure(config, curve), sets["E1"], sets["E2"],
                                         sets["F"], self._samples(config, self.settings.sampling.x_samples),
                                         config.seed, self.settings.sampling.workers)
            report.add_check("mlE", "restricted estimate, E-variant",
                             _status(check.ratio > 0 and check.ratio >= golden), {**check.to_dict(), "golden": golden})

    def _operator_check_mlf(self, config: RunConfig, report: VerificationReport) -> None:
        curve = self._curve(config)
        interval = self._interval(config)
        sets = self._covering_sets(curve, interval, config, ("E", "F1", "F2"), small=("E",))
        golden = float(config.params.get("golden", 0.0))
        quadruple = config.params.get("quadruple", mlf_quadruples(curve.dim, config.K)["large-top"])
        with self._guard(report, "mlF", "restricted estimate, F-variant"):
            check = check_mlF_inequality(curve, interval, self._measure(config, curve), sets["E"], sets["F1"],
                                         sets["F2"], float(config.params.get("eta", 1.0)),
                                         [Fraction(str(x)) for x in quadruple], float(config.params.get("C", 1.0)),
                                         self._samples(config, self.settings.sampling.x_samples), config.seed,
                                         self.settings.sampling.workers, self.settings.bands)
            report.add_check("mlF", "restricted estimate, F-variant",
                             _status(check.ratio > 0 and check.ratio >= golden), {**check.to_dict(), "golden": golden})

    def _corpus_list(self, config: RunConfig, report: VerificationReport) -> None:
        entries = list_corpus(self.settings.corpus_dir)
        report.add_table("corpus", ["name", "description", "seeded", "source"],
                         [[e["name"], e["description"], e["seeded"], e["source"]] for e in entries])
        report.summary["corpus_version"] = CORPUS_VERSION


def run(config: RunConfig, settings: Optional[LabSettings] = None) -> VerificationReport:
    return CampaignRunner(settings).run(config)
