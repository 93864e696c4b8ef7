#!/usr/bin/env python3

"""
The experiments run by the ``rotsync`` command line.

An experiment is configured by an :class:`ExperimentConfig` (a system,
the experiment parameters, the seeds and the output location) and runs
once per seed, fanning the seeds out on a thread pool. The per-seed
results are merged in seed order, so the CSV and JSON payloads written
by :func:`write_result` only depend on the configuration.

Each run emits :class:`rotsync.logger.RunMessage` logs under the
`rotsync.experiments.<kind>` loggers.
"""

import concurrent.futures
import csv
import dataclasses
import json
import math
import os
from collections.abc import Mapping
from datetime import datetime
from typing import Dict, List, Optional

import numpy as np

from . import analysis, diffchain, displacement, rds, sets, torus
from .bases import BaseExperiment, ExperimentConfigurator
from .errors import (InvalidConfigError, InvalidInputError,
                     NotIntegrableError)
from .logger import RunMessage

_JUMP_1D = [math.sqrt(2) - 1]
_JUMP_2D = [math.sqrt(2) - 1, math.sqrt(3) - 1]

PRESETS = {
    "interval": {
        "system": {"dimension": 1,
                   "set": {"kind": "intervals", "arcs": [[0.0, 0.3]]},
                   "v": _JUMP_1D},
        "experiment": {"eps": [0.1, 0.25, 0.5]},
        "output": {"name": "interval"},
    },
    "cantor8": {
        "system": {"dimension": 1,
                   "set": {"kind": "cantor", "depth": 8, "base": 8},
                   "v": _JUMP_1D},
        "output": {"name": "cantor8"},
    },
    "box2d": {
        "system": {"dimension": 2,
                   "set": {"kind": "boxes",
                           "boxes": [[[0.0, 0.5], [0.0, 0.5]]]},
                   "v": _JUMP_2D},
        "experiment": {"compare_stationary": True},
        "output": {"name": "box2d"},
    },
}

DEFAULT_PARAMS = {
    # displacement profile
    "grid_size": None,
    "levels": 40,
    "fit_window": None,
    "mc_samples": 100_000,
    "eps": [],
    "exclusion_radius": 0.01,
    "symmetry_tolerance": 0.01,
    "require_integrable": False,
    # two-point traces
    "N": 100_000,
    "x0": None,
    "y0": None,
    "deltas": [0.01, 0.05, 0.1],
    "horizons": None,
    "jump_bins": 16,
    "min_visits": 0,
    "compare_stationary": False,
    # ensembles
    "M": 10_000,
    "n": 1000,
    "checkpoints": None,
    "collapse_threshold": 0.01,
    # attractor
    "max_components": rds.DEFAULT_MAX_COMPONENTS,
    "mc_steps": [10, 100],
    "probes": 10_000,
    # difference chain
    "z0": None,
    "bins": 64,
    "law_test": True,
    "law_n": 30,
    "trials": 100_000,
    "hold_scale": 1.0,
    "holding_delta": 0.05,
}

_POSITIVE_INTS = ("levels", "mc_samples", "N", "jump_bins", "M", "n",
                  "max_components", "probes", "bins", "law_n", "trials")
_POSITIVE_FLOATS = ("symmetry_tolerance", "collapse_threshold", "hold_scale",
                    "holding_delta")
_BOOLEANS = ("require_integrable", "compare_stationary", "law_test")
_STEP_LISTS = {"horizons": "N", "checkpoints": "n"}


def merge_config(base, overlay):
    """
    Returns `base` updated by `overlay` recursively: nested mappings
    are merged, everything else in `overlay` replaces its counterpart.
    """
    result = dict(base)
    for key, value in (overlay or {}).items():
        if isinstance(value, Mapping) and isinstance(result.get(key),
                                                     Mapping):
            result[key] = merge_config(result[key], value)
        else:
            result[key] = value
    return result


def _check(condition, message):
    if not condition:
        raise InvalidConfigError(message)


def _is_int(value):
    return isinstance(value, (int, np.integer)) and \
        not isinstance(value, bool)


def _build_system(system):
    _check(isinstance(system, Mapping) and "set" in system,
           "the 'system' section needs a 'set' descriptor")
    try:
        A = sets.from_descriptor(dict(system["set"]))
        dimension = system.get("dimension", A.dimension)
        _check(_is_int(dimension) and dimension >= 1,
               f"invalid dimension {dimension!r}")
        _check(dimension == A.dimension,
               f"the set has dimension {A.dimension}, not {dimension}")
        v = system.get("v")
        v = rds.default_jump(dimension) if v is None else v
        config = rds.SystemConfig(A, v, dimension=dimension)
        config.validate()
        return config
    except InvalidConfigError:
        raise
    except (InvalidInputError, TypeError, ValueError) as exp:
        raise InvalidConfigError(f"invalid system: {exp}") from exp


def _check_params(params):
    unknown = sorted(set(params) - set(DEFAULT_PARAMS))
    _check(not unknown, f"unknown experiment parameters: {unknown}")
    params = {**DEFAULT_PARAMS, **params}

    for key in _POSITIVE_INTS:
        _check(_is_int(params[key]) and params[key] >= 1,
               f"'{key}' must be a positive integer: {params[key]!r}")
    for key in _POSITIVE_FLOATS:
        value = params[key]
        _check(isinstance(value, (int, float)) and value > 0 and
               math.isfinite(value),
               f"'{key}' must be a positive number: {value!r}")
    for key in _BOOLEANS:
        _check(isinstance(params[key], bool),
               f"'{key}' must be true or false: {params[key]!r}")

    size = params["grid_size"]
    _check(size is None or (_is_int(size) and size >= 2),
           f"'grid_size' must be an integer >= 2: {size!r}")
    _check(_is_int(params["min_visits"]) and params["min_visits"] >= 0,
           "'min_visits' must be a non-negative integer")

    radius = params["exclusion_radius"]
    _check(isinstance(radius, (int, float)) and 0 < radius < 0.5,
           f"'exclusion_radius' must lie in (0, 0.5): {radius!r}")

    deltas = params["deltas"]
    _check(isinstance(deltas, list) and deltas and
           all(isinstance(d, (int, float)) and d > 0 for d in deltas),
           f"'deltas' must be a nonempty list of positive numbers: "
           f"{deltas!r}")

    window = params["fit_window"]
    _check(window is None or (
        isinstance(window, list) and len(window) == 2 and
        0 < window[0] < window[1]),
        f"'fit_window' must be [low, high] with 0 < low < high: {window!r}")

    mc_steps = params["mc_steps"]
    _check(isinstance(mc_steps, list) and
           all(_is_int(s) and s >= 0 for s in mc_steps),
           f"'mc_steps' must list non-negative integers: {mc_steps!r}")

    for key, bound in _STEP_LISTS.items():
        steps = params[key]
        if steps is None:
            continue
        _check(isinstance(steps, list) and
               all(_is_int(s) and 0 <= s <= params[bound] for s in steps),
               f"'{key}' must list integer steps in [0, {bound}]: {steps!r}")

    return params


def _check_seeds(seeds):
    if _is_int(seeds):
        seeds = [seeds]
    _check(isinstance(seeds, list) and seeds,
           "at least one seed is required")
    for seed in seeds:
        _check(_is_int(seed) and 0 <= seed < 2 ** 64,
               f"seeds must be unsigned 64 bit integers: {seed!r}")
    return tuple(int(s) for s in seeds)


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """
    A validated experiment configuration.

    :Attributes:
     - `system`: the resolved system section (dimension, set
       descriptor, v)
     - `params`: every experiment parameter, defaults included
     - `seeds`: the master seeds, one run each
     - `threads`: the size of the worker pool
     - `out_dir`: the output directory
     - `name`: the base name of the output files
     - `system_config`: the :class:`rotsync.rds.SystemConfig`
    """
    system: dict
    params: dict
    seeds: tuple
    threads: int = 1
    out_dir: str = "results"
    name: str = "run"
    system_config: Optional[rds.SystemConfig] = dataclasses.field(
        default=None, compare=False, repr=False)

    @classmethod
    def from_dict(cls, document):
        """
        Validates a configuration document with the "system",
        "experiment" and "output" sections. `cfg://` and `ext://`
        values are resolved first.

        :Raises: :class:`rotsync.errors.InvalidConfigError`
        """
        _check(isinstance(document, Mapping),
               "the configuration must be a mapping")
        configurator = ExperimentConfigurator(dict(document))
        try:
            system = configurator.resolve(document.get("system"))
            experiment = configurator.resolve(document.get("experiment"))
            output = configurator.resolve(document.get("output"))
        except (ImportError, KeyError, ValueError) as exp:
            raise InvalidConfigError(
                f"cannot resolve the configuration: {exp}") from exp

        experiment = dict(experiment or {})
        output = dict(output or {})
        seeds = _check_seeds(experiment.pop("seeds", [0]))
        threads = experiment.pop("threads", 1)
        _check(_is_int(threads) and threads >= 1,
               f"'threads' must be a positive integer: {threads!r}")
        params = _check_params(experiment)

        system_config = _build_system(system)
        resolved_system = {"dimension": system_config.dimension,
                           "set": dict(system["set"]),
                           "v": system_config.v.tolist()}

        out_dir, name = output.get("dir", "results"), output.get("name", "run")
        _check(isinstance(out_dir, str) and out_dir,
               "'output.dir' must be a path")
        _check(isinstance(name, str) and name and os.sep not in name,
               f"'output.name' must be a plain file name: {name!r}")

        return cls(system=resolved_system, params=params, seeds=seeds,
                   threads=int(threads), out_dir=out_dir, name=name,
                   system_config=system_config)

    def to_dict(self):
        return {
            "system": self.system,
            "experiment": {"seeds": list(self.seeds),
                           "threads": self.threads, **self.params},
            "output": {"dir": self.out_dir, "name": self.name},
        }

    def grid_spec(self):
        window = self.params["fit_window"]
        return displacement.GridSpec(
            size=self.params["grid_size"], levels=self.params["levels"],
            fit_window=tuple(window) if window else None,
            mc_samples=self.params["mc_samples"], workers=self.threads,
            seed=self.seeds[0])


@dataclasses.dataclass
class SeedResult:
    """
    The outcome of one run.

    :Attributes:
     - `seed`: the master seed
     - `rows`: the CSV rows
     - `data`: the JSON-ready details
     - `summary`: the scalar fields logged with the final message
    """
    seed: int
    rows: List[dict]
    data: dict
    summary: dict


@dataclasses.dataclass
class ExperimentResult:
    """
    The merged outcome of all the runs of an experiment.

    :Attributes:
     - `kind`: the experiment name
     - `config`: the resolved configuration
     - `runs`: the :class:`SeedResult` list in seed order
     - `summary`: the aggregate over the seeds
     - `parts`: the results of the experiments bundled in a report
    """
    kind: str
    config: dict
    runs: List[SeedResult]
    summary: dict
    parts: Dict[str, "ExperimentResult"] = dataclasses.field(
        default_factory=dict)
    extra_rows: List[dict] = dataclasses.field(default_factory=list)

    def rows(self):
        for run in self.runs:
            for row in run.rows:
                yield {"seed": run.seed, **row}
        yield from self.extra_rows

    def fields(self):
        fields = {}
        for row in self.rows():
            fields.update(dict.fromkeys(row))
        return list(fields)

    def to_dict(self):
        return {
            "experiment": self.kind,
            "config": self.config,
            "summary": self.summary,
            "runs": [{"seed": run.seed, **run.data} for run in self.runs],
        }


def median_rows(rows, keys, values):
    """
    Groups `rows` by the `keys` columns (first-seen order) and returns
    the median of every `values` column in each group.
    """
    groups = {}
    for row in rows:
        groups.setdefault(tuple(row[k] for k in keys), []).append(row)

    return [{**dict(zip(keys, key)),
             **{value: analysis.median_over_seeds(
                 [row.get(value) for row in group]) for value in values}}
            for key, group in groups.items()]


def _points(value, dimension):
    points = np.asarray(value, dtype=float)
    _check(points.size and points.size % dimension == 0,
           f"expected points of dimension {dimension}: {value!r}")
    return torus.wrap(points.reshape(-1, dimension))


class Experiment(BaseExperiment):
    """
    An experiment over a system. Subclasses implement :meth:`run_seed`
    and may override :meth:`prepare` (seed independent work done once
    before the runs) and :meth:`summarize`.

    :Attributes:
     - `per_seed`: False when the result does not depend on the seed,
       so only the first seed runs
    """
    per_seed = True
    all_fields = ("RunID", "Iteration", "StartTime", "Experiment", "Seed",
                  "Preset", "Error")
    default_fields = ("Experiment", "Preset", "Seed", "Iteration")

    def __init__(self, config: ExperimentConfig, profile=None):
        self.config = config
        self.params = config.params
        self.system = config.system_config
        self._profile = profile

    @property
    def dimension(self):
        return self.system.dimension

    def profile(self):
        """
        The displacement profile of A, computed on first use.
        """
        if self._profile is None:
            self._profile = displacement.phi_profile(
                self.system.A, self.config.grid_spec(),
                dimension=self.dimension)
        return self._profile

    def prepare(self):
        pass

    def run_seed(self, seed, message) -> SeedResult:
        raise NotImplementedError

    def summarize(self, runs: List[SeedResult]) -> dict:
        return {}

    def run_one(self, seed):
        message = self.start_message(Seed=seed, Preset=self.config.name)
        try:
            result = self.run_seed(seed, message)
        except Exception as exp:
            self.final_message(message, Error=f"{type(exp).__name__}: {exp}")
            raise

        self.final_message(message, **result.summary)
        return result

    def run(self) -> ExperimentResult:
        self.prepare()
        seeds = self.config.seeds if self.per_seed else self.config.seeds[:1]

        if self.config.threads > 1 and len(seeds) > 1:
            with concurrent.futures.ThreadPoolExecutor(
                    self.config.threads) as executor:
                runs = list(executor.map(self.run_one, seeds))
        else:
            runs = [self.run_one(seed) for seed in seeds]

        return ExperimentResult(self.kind, self.config.to_dict(), runs,
                                self.summarize(runs))


class PhiExperiment(Experiment):
    """
    Tabulates the displacement function over the profile grid and at
    the requested points.
    """
    kind = "phi"
    per_seed = False
    all_fields = Experiment.all_fields + ("GridPoints", "Alpha", "Verdict")

    def run_seed(self, seed, message):
        profile = self.profile()
        rows = []
        for row, level in zip(profile.rows(), profile.levels.tolist()):
            rows.append({"point": "refined" if level else "uniform",
                         "level": level, **row})

        requested = self.params["eps"]
        for eps in (_points(requested, self.dimension) if requested else []):
            row = {f"eps_{i + 1}": float(c) for i, c in enumerate(eps)}
            row.update(phi=displacement.phi(self.system.A, eps), exact=1,
                       stderr=0.0)
            rows.append({"point": "requested", "level": 0, **row})

        fit = profile.exponent_fit
        return SeedResult(
            seed, rows, profile.to_dict(),
            {"GridPoints": len(rows), "Alpha": fit.alpha,
             "Verdict": profile.verdict})


class ClassifyExperiment(Experiment):
    """
    Decides whether 1/φ is integrable and, when it is, computes the
    normalization constant Z.
    """
    kind = "classify"
    per_seed = False
    all_fields = Experiment.all_fields + (
        "Verdict", "Alpha", "AlphaLow", "AlphaHigh", "AlphaLowerBound",
        "SymmetryPassed", "Z", "ZError")
    default_fields = ("Experiment", "Preset", "Verdict", "Alpha", "Z")

    def run_seed(self, seed, message):
        profile = self.profile()
        fit = profile.exponent_fit
        symmetry = displacement.symmetry_check(
            profile, tolerance=self.params["symmetry_tolerance"])

        z = z_error = None
        if profile.verdict == displacement.CONVERGES:
            z, z_error = displacement.z_constant(
                profile, self.params["exclusion_radius"])
        elif self.params["require_integrable"]:
            raise NotIntegrableError(
                f"Z cannot be computed: the verdict is {profile.verdict}")

        data = {
            "verdict": profile.verdict,
            "exponent_fit": fit.to_dict(),
            "symmetry_check": symmetry.to_dict(),
            "alpha_lower_bound": displacement.alpha_lower_bound(profile),
            "measure": profile.measure,
            "z": z,
            "z_error": z_error,
        }
        descriptor = profile.set_descriptor
        if descriptor.get("kind") == "cantor":
            spec = sets.CantorSpec(int(descriptor["depth"]),
                                   descriptor.get("base", 8))
            data["cantor"] = {
                "predicted_alpha": displacement.cantor_predicted_alpha(
                    spec.base),
                "remainder": displacement.cantor_remainder(spec),
                "limit_measure": spec.limit_measure,
            }

        row = {"verdict": profile.verdict, "alpha": fit.alpha,
               "alpha_low": fit.alpha_low, "alpha_high": fit.alpha_high,
               "r_squared": fit.r_squared,
               "alpha_lower_bound": data["alpha_lower_bound"],
               "symmetry_passed": symmetry.passed, "z": z,
               "z_error": z_error}
        return SeedResult(seed, [row], data, {
            "Verdict": profile.verdict, "Alpha": fit.alpha,
            "AlphaLow": fit.alpha_low, "AlphaHigh": fit.alpha_high,
            "AlphaLowerBound": data["alpha_lower_bound"],
            "SymmetryPassed": symmetry.passed, "Z": z, "ZError": z_error})


class TwoPointExperiment(Experiment):
    """
    Drives two points with the same noise and reports the fraction of
    time they spend close together.
    """
    kind = "twopoint"
    all_fields = Experiment.all_fields + ("N", "CesaroDistance",
                                          "SyncFraction")
    default_fields = ("Experiment", "Preset", "Seed", "N", "SyncFraction",
                      "CesaroDistance")

    def initial_points(self):
        k = self.dimension
        x0 = self.params["x0"]
        x0 = np.full(k, 0.1) if x0 is None else _points(x0, k)[0]
        y0 = self.params["y0"]
        y0 = torus.wrap(x0 + 0.5) if y0 is None else _points(y0, k)[0]
        return x0, y0

    def horizons(self):
        N = self.params["N"]
        horizons = self.params["horizons"]
        if horizons is None:
            horizons = rds.geometric_schedule(N, ratio=10, start=min(100, N))
        return sorted(set(h for h in horizons if h >= 1))

    def prepare(self):
        if self.params["compare_stationary"]:
            self.profile()

    def run_seed(self, seed, message):
        x0, y0 = self.initial_points()
        N = self.params["N"]
        trace = rds.two_point_orbit(self.system, x0, y0, N,
                                    rds.NoiseStream(seed),
                                    keep_positions=False)

        rows = list(analysis.sync_fraction_table(
            trace, self.params["deltas"], self.horizons()))
        data = {"z0": trace.z0.tolist(), "table": rows}
        if not self.system.is_oracle:
            data["jump_frequencies"] = rds.jump_frequencies(
                trace, self.system, self.params["jump_bins"],
                self.params["min_visits"])

        final = [row for row in rows if row["N"] == rows[-1]["N"]]
        return SeedResult(seed, rows, data, {
            "N": rows[-1]["N"],
            "CesaroDistance": final[0]["cesaro_distance"],
            "SyncFraction": {str(row["delta"]): row["sync_fraction"]
                             for row in final}})

    def summarize(self, runs):
        rows = [row for run in runs for row in run.rows]
        summary = {"medians": median_rows(
            rows, ("N", "delta"), ("sync_fraction", "cesaro_distance"))}

        profile = self._profile
        if self.params["compare_stationary"] and \
                profile.verdict == displacement.CONVERGES:
            summary["stationary_mass"] = [
                {"delta": delta,
                 "mass": displacement.mu_bar_mass(
                     profile, delta, self.params["exclusion_radius"])}
                for delta in self.params["deltas"]]
        return summary


class EnsembleExperiment(Experiment):
    """
    Pushes a uniform particle ensemble forward and follows D of its
    empirical measure.
    """
    kind = "ensemble"
    all_fields = Experiment.all_fields + ("Step", "D")
    default_fields = ("Experiment", "Preset", "Seed", "Iteration", "Step",
                      "D")

    def checkpoints(self, start=0):
        n = self.params["n"]
        checkpoints = self.params["checkpoints"]
        if checkpoints is None:
            checkpoints = [0] + rds.geometric_schedule(n)
        return sorted(set(c for c in checkpoints if c >= start)) or \
            [self.params["n"]]

    def run_seed(self, seed, message):
        snapshots = rds.ensemble_forward(
            self.system, self.params["M"], self.params["n"],
            rds.NoiseStream(seed), self.checkpoints())

        rows = []
        for snapshot in snapshots:
            rows.append({"step": snapshot.step, "d": snapshot.d_value})
            self.update_message(message, Step=snapshot.step,
                                D=snapshot.d_value)
        return SeedResult(seed, rows, {"series": rows}, {
            "Step": rows[-1]["step"], "D": rows[-1]["d"]})

    def summarize(self, runs):
        rows = [row for run in runs for row in run.rows]
        return {"medians": median_rows(rows, ("step",), ("d",))}


class ReversedExperiment(EnsembleExperiment):
    """
    Pushes uniform ensembles through reversed compositions, where the
    pushforwards collapse to a random Dirac mass.
    """
    kind = "reversed"
    all_fields = EnsembleExperiment.all_fields + ("LimitPoint",)
    default_fields = EnsembleExperiment.default_fields + ("LimitPoint",)

    def run_seed(self, seed, message):
        snapshots = rds.reversed_series(
            self.system, self.params["M"], self.checkpoints(start=1),
            rds.NoiseStream(seed))

        rows = []
        for snapshot in snapshots:
            limit = rds.estimate_limit_point(snapshot.ensemble)
            row = {"step": snapshot.step, "d": snapshot.d_value}
            row.update({f"limit_{i + 1}": c for i, c in enumerate(limit)})
            rows.append(row)
            self.update_message(message, Step=snapshot.step,
                                D=snapshot.d_value, LimitPoint=list(limit))

        last = rows[-1]
        limit = [last[f"limit_{i + 1}"] for i in range(self.dimension)]
        return SeedResult(seed, rows, {"series": rows, "limit_point": limit},
                          {"Step": last["step"], "D": last["d"],
                           "LimitPoint": limit})

    def summarize(self, runs):
        summary = super().summarize(runs)
        threshold = self.params["collapse_threshold"]
        summary["collapsed_fraction"] = float(np.mean(
            [run.summary["D"] <= threshold for run in runs]))
        return summary


class AttractorExperiment(Experiment):
    """
    Tracks the exact reversed images of the circle, whose intersection
    is the topological attractor, and checks their measures against
    Monte Carlo estimates.
    """
    kind = "attractor"
    all_fields = Experiment.all_fields + ("Step", "Components", "Measure",
                                          "Nested")
    default_fields = ("Experiment", "Preset", "Seed", "Iteration", "Step",
                      "Components", "Measure")

    @staticmethod
    def supports(system):
        return system.dimension == 1 and \
            isinstance(system.A, sets.IntervalUnion)

    def prepare(self):
        _check(self.supports(self.system),
               "the attractor experiment needs k = 1 and A given as "
               "intervals")

    def run_seed(self, seed, message):
        noise = rds.NoiseStream(seed)
        n = self.params["n"]
        checkpoints = self.params["checkpoints"]
        checkpoints = rds.geometric_schedule(n) if checkpoints is None \
            else [c for c in checkpoints if c >= 1]
        report = rds.attractor_report(
            self.system, n, noise, checkpoints,
            max_components=self.params["max_components"])

        rows = []
        for checkpoint in report.checkpoints:
            row = checkpoint.to_dict()
            row.pop("arcs", None)
            rows.append(row)
            self.update_message(message, Step=checkpoint.step,
                                Components=checkpoint.component_count,
                                Measure=checkpoint.measure)

        exact = {c.step: c.measure for c in report.checkpoints}
        estimates = []
        for step in self.params["mc_steps"]:
            if not 1 <= step <= n:
                continue
            measure = exact.get(step)
            if measure is None:
                measure = sets.measure(rds.reversed_image_exact(
                    self.system, step, noise, self.params["max_components"]))
            estimate, stderr = rds.image_measure_mc(
                self.system, step, noise, self.params["probes"])
            estimates.append({"step": step, "exact": measure,
                              "estimate": estimate, "stderr": stderr})

        last = report.checkpoints[-1]
        return SeedResult(
            seed, rows, {**report.to_dict(), "image_measure_mc": estimates},
            {"Step": last.step, "Components": last.component_count,
             "Measure": last.measure, "Nested": report.nested})

    def summarize(self, runs):
        rows = [row for run in runs for row in run.rows]
        return {"nested": all(run.summary["Nested"] for run in runs),
                "medians": median_rows(
                    rows, ("step",),
                    ("component_count", "measure", "largest_gap",
                     "largest_component"))}


class DiffChainExperiment(Experiment):
    """
    Runs the difference chain, compares its occupation histogram with
    the predicted stationary density and checks the law of the slowed
    walk construction.
    """
    kind = "diffchain"
    all_fields = Experiment.all_fields + (
        "TV", "TVWithoutZeroBin", "LawPValue", "MeanHoldingTime",
        "PlusJumps", "MinusJumps")
    default_fields = ("Experiment", "Preset", "Seed", "TV", "LawPValue")

    predicted = None

    def z0(self):
        z0 = self.params["z0"]
        if z0 is None:
            return np.full(self.dimension, 0.5)
        return _points(z0, self.dimension)[0]

    def prepare(self):
        profile = self.profile()
        if profile.verdict == displacement.CONVERGES:
            self.predicted = diffchain.predicted_density(
                profile, self.params["bins"])
        elif self.params["require_integrable"]:
            raise NotIntegrableError(
                f"no stationary density: the verdict is {profile.verdict}")

    def run_seed(self, seed, message):
        noise = rds.NoiseStream(seed)
        z0 = self.z0()
        provider = diffchain.LatticePhi(self.system.A, z0, self.system.v)
        orbit = diffchain.chain_orbit(z0, self.params["N"], provider, noise,
                                      bins=self.params["bins"])

        tv = tv_without_zero = None
        predicted = self.predicted
        if predicted is not None:
            tv = diffchain.occupation_compare(orbit, predicted)
            tv_without_zero = diffchain.occupation_compare(
                orbit, predicted, exclude_zero_bin=True)

        _, walk = diffchain.slowed_orbit(
            z0, self.params["N"], provider, noise.substream(2),
            bins=self.params["bins"])
        holding = diffchain.holding_time_summary(
            walk, self.params["holding_delta"])

        law = None
        if self.params["law_test"]:
            law = diffchain.law_equivalence_test(
                z0, self.params["law_n"], self.params["trials"],
                noise.substream(3), provider,
                hold_scale=self.params["hold_scale"])

        empirical = orbit.histogram.masses.reshape(-1)
        expected = (predicted.masses.reshape(-1) if predicted is not None
                    else np.full(len(empirical), math.nan))
        rows = []
        for (b, center), p, q in zip(
                enumerate(orbit.histogram.bin_centers()), empirical,
                expected):
            row = {"bin": b}
            row.update({f"center_{i + 1}": float(c)
                        for i, c in enumerate(center)})
            row.update(empirical=float(p), predicted=float(q))
            rows.append(row)

        data = {**orbit.to_dict(), "tv": tv,
                "tv_without_zero_bin": tv_without_zero,
                "holding_times": holding,
                "law_test": law.to_dict() if law else None}
        return SeedResult(seed, rows, data, {
            "TV": tv, "TVWithoutZeroBin": tv_without_zero,
            "LawPValue": law.p_value if law else None,
            "MeanHoldingTime": holding["mean_holding_time"],
            "PlusJumps": orbit.plus, "MinusJumps": orbit.minus})

    def summarize(self, runs):
        profile = self._profile
        return {
            "verdict": profile.verdict,
            "median_tv": analysis.median_over_seeds(
                [run.summary["TV"] for run in runs]),
            "median_tv_without_zero_bin": analysis.median_over_seeds(
                [run.summary["TVWithoutZeroBin"] for run in runs]),
            "min_law_p_value": min(
                (run.summary["LawPValue"] for run in runs
                 if run.summary["LawPValue"] is not None), default=None),
        }


class ReportExperiment(Experiment):
    """
    Runs the other experiments on one system and bundles their
    summaries.
    """
    kind = "report"
    sections = ("classify", "twopoint", "ensemble", "reversed", "attractor",
                "diffchain")

    def run(self):
        parts, rows = {}, []
        for kind in self.sections:
            cls = EXPERIMENTS[kind]
            if cls is AttractorExperiment and \
                    not AttractorExperiment.supports(self.system):
                continue
            experiment = cls(self.config, profile=self._profile)
            result = experiment.run()
            self._profile = experiment._profile or self._profile
            parts[kind] = result

            for run in result.runs:
                for key, value in run.summary.items():
                    if value is None or isinstance(value, (int, float, str)):
                        rows.append({"experiment": kind, "seed": run.seed,
                                     "metric": key, "value": value})

        summary = {kind: result.summary for kind, result in parts.items()}
        return ExperimentResult(self.kind, self.config.to_dict(), [],
                                summary, parts=parts, extra_rows=rows)


EXPERIMENTS = {cls.kind: cls for cls in (
    PhiExperiment, ClassifyExperiment, TwoPointExperiment,
    EnsembleExperiment, ReversedExperiment, AttractorExperiment,
    DiffChainExperiment, ReportExperiment)}


def _jsonable(value):
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return _jsonable(value.tolist())
    if isinstance(value, (bool, np.bool_)):
        return bool(value)
    if isinstance(value, (int, np.integer)):
        return int(value)
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def write_csv(path, config, rows, fields):
    """
    Writes `rows` as CSV with a `# config:` comment line, a header and
    the floats in their shortest round-trip representation.
    """
    with open(path, "w", newline="", encoding="utf-8") as fp:
        fp.write("# config: " + json.dumps(_jsonable(config),
                                           sort_keys=True) + "\n")
        writer = csv.writer(fp, dialect="unix", quoting=csv.QUOTE_MINIMAL)
        writer.writerow(fields)
        for row in rows:
            writer.writerow([
                "" if row.get(field) is None else
                RunMessage.prepare_value(row[field], application="csv")
                for field in fields])


def write_json(path, payload):
    from . import __version__

    document = {"metadata": {"created": datetime.now().isoformat(),
                             "version": __version__},
                "data": _jsonable(payload)}
    with open(path, "w", encoding="utf-8") as fp:
        json.dump(document, fp, sort_keys=True, indent=2,
                  ensure_ascii=False)
        fp.write("\n")


def write_result(result: ExperimentResult, out_dir, name):
    """
    Writes `<out_dir>/<kind>/<name>.csv` and `.json` for the result and
    for every bundled part. Returns the written paths.
    """
    paths = []
    for part in result.parts.values():
        paths.extend(write_result(part, out_dir, name))

    directory = os.path.join(out_dir, result.kind)
    os.makedirs(directory, exist_ok=True)
    csv_path = os.path.join(directory, f"{name}.csv")
    json_path = os.path.join(directory, f"{name}.json")

    write_csv(csv_path, result.config, result.rows(), result.fields())
    write_json(json_path, result.to_dict())
    return paths + [csv_path, json_path]


def run_experiment(kind, config: ExperimentConfig):
    """
    Runs the `kind` experiment and writes its outputs. Returns the
    result and the written paths.
    """
    try:
        cls = EXPERIMENTS[kind]
    except KeyError:
        raise InvalidConfigError(f"unknown experiment {kind!r}")

    result = cls(config).run()
    return result, write_result(result, config.out_dir, config.name)
