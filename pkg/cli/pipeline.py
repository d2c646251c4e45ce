"""
One runner per command. Each runner reads the resolved run configuration (and
the parsed arguments when called from the command line), writes its outputs
under output_dir and returns a RunOutcome for the display layer and exit code.
"""

from __future__ import annotations

import logging
import pathlib
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

from cli import file_ops
from cli.constants import (
    BOUND_SWEEP_CSV,
    DEFAULT_EMPIRICAL_RISK,
    GSRM_CSV,
    PROTOCOL_CSV,
    REPORT_NAME,
    TRAJECTORY_CSV,
)
from lib.errors import ConfigError
from lib.settings import SETTINGS_FILE_NAME, save_settings
from modules.certification.bounds import evaluate_bound, sweep_bound, write_rows_csv
from modules.certification.certificates import (
    CapacityFunctional,
    LyapunovWitness,
    check_bundle,
    first_failing,
    verdict_vector,
)
from modules.certification.gsrm import GsrmInstance, gsrm_expected, gsrm_minimize, gsrm_objective, gsrm_rows
from modules.structure.dynamics import (
    State,
    empirical_risk,
    kernel_from_dict,
    simulate,
    write_trajectory_csv,
)
from modules.structure.metamodel import MetaModel, TransformSpec, identity_transform
from modules.structure.regimes import SwitchingOperator
from modules.workflow_automation.fixtures import export_fixture, load_fixture, run_fixture, run_suite
from modules.workflow_automation.protocol import (
    ProtocolBudget,
    default_protocol_configs,
    protocol_settings,
    run_protocol,
)

log = logging.getLogger("smgi.cli")

_BOUND_PARAMS = {
    "pacbayes_basic": ("empirical_risk", "kl", "n", "delta"),
    "structural": ("empirical_risk", "kl", "n", "delta", "L", "B", "V0"),
}


@dataclass
class RunOutcome:
    command: str
    passed: bool
    files: list[str] = field(default_factory=list)
    summary: dict[str, Any] = field(default_factory=dict)


def _build(path: str, what: str, fn: Callable[[], Any]) -> Any:
    """Construct a domain object from an input document; malformed content is a configuration error."""
    try:
        return fn()
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"invalid {what}: {e}", path=path, field=what) from None


def _fixture_entry(settings: dict):
    return _build("", "fixture", lambda: load_fixture(settings))


def run_simulate(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    horizon = int(settings["horizon"])
    switching, witness = None, None
    if settings.get("fixture"):
        entry = _fixture_entry(settings)
        model, t, kernel, s0, witness = (entry.model, entry.transforms[0], entry.kernel, entry.probe_states[0],
                                         entry.witness)
    else:
        path, doc = file_ops.single_input(settings, "simulate")
        model = _build(path, "model", lambda: MetaModel.from_dict(doc["model"]))
        t = _build(path, "transform", lambda: TransformSpec.from_dict(doc["transform"])) if "transform" in doc \
            else identity_transform()
        kernel = _build(path, "kernel", lambda: kernel_from_dict(doc["kernel"]))
        s0 = _build(path, "s0", lambda: State.from_dict(doc["s0"])) if "s0" in doc else State()
        if "witness" in doc:
            witness = _build(path, "witness", lambda: LyapunovWitness.from_dict(doc["witness"]))
        if "switching" in doc:
            switching = _build(path, "switching", lambda: SwitchingOperator.from_dict(doc["switching"]))
        horizon = int(doc.get("horizon", horizon))
    traj = simulate(model, t, kernel, s0, horizon, settings["seed"], switching=switching, lyapunov=witness)
    write_trajectory_csv(traj, out / TRAJECTORY_CSV)
    counts: dict[str, int] = {}
    for k in traj.regimes:
        counts[str(k)] = counts.get(str(k), 0) + 1
    report = {"horizon": traj.horizon, "seed": traj.seed, "empirical_risk": empirical_risk(traj),
              "regime_counts": counts, "final_state": traj.states[-1].to_dict()}
    file_ops.write_json(out / REPORT_NAME, report)
    return RunOutcome("simulate", True, [TRAJECTORY_CSV, REPORT_NAME], report)


def _certify_document(path: str, doc: dict, settings: dict) -> tuple[dict, list]:
    model = _build(path, "model", lambda: MetaModel.from_dict(doc["model"]))
    raw = doc.get("transforms") or ([doc["transform"]] if "transform" in doc else [])
    transforms = _build(path, "transforms", lambda: [TransformSpec.from_dict(x) for x in raw]) or [identity_transform()]
    kernel = _build(path, "kernel", lambda: kernel_from_dict(doc["kernel"]))
    witness = _build(path, "witness", lambda: LyapunovWitness.from_dict(doc["witness"]))
    capacity = _build(path, "capacity", lambda: CapacityFunctional.from_dict(doc.get("capacity") or {}))
    s_star = _build(path, "s_star", lambda: frozenset(State.from_dict(s) for s in doc["s_star"]))
    ell = float(doc.get("lipschitz_ell", settings["lipschitz_ell"]))
    reports = [check_bundle(model, t, kernel, witness, ell, capacity, s_star,
                            n_probe=int(settings["closure_probes"]), n_mc=int(settings["drift_mc_samples"]),
                            seed=settings["seed"], workers=settings["workers"]) for t in transforms]
    verdicts = {k: all(verdict_vector(r)[k] for r in reports) for k in verdict_vector(reports[0])}
    return verdicts, reports


def run_certify(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    if settings.get("fixture"):
        entry = _fixture_entry(settings)
        verdicts, reports = run_fixture(entry, settings["seed"], int(settings["closure_probes"]),
                                        int(settings["drift_mc_samples"]), settings["workers"])
        head = {"fixture": entry.name, "expected": dict(entry.expected)}
    else:
        path, doc = file_ops.single_input(settings, "certify")
        verdicts, reports = _certify_document(path, doc, settings)
        head = {"input": path}
    report = {**head, "verdicts": verdicts, "first_failing": first_failing(verdicts),
              "bundles": [r.to_dict() for r in reports]}
    file_ops.write_json(out / REPORT_NAME, report)
    passed = all(verdicts.values())
    return RunOutcome("certify", passed, [REPORT_NAME], {**head, "verdicts": verdicts,
                                                         "first_failing": report["first_failing"]})


def _bound_params(settings: dict, args: Any) -> tuple[str, dict]:
    if args is not None and getattr(args, "command", None) == "bound":
        kind = args.preset
        params = {"empirical_risk": args.emp, "kl": args.kl, "n": args.n, "delta": settings["bound_delta"],
                  "L": args.L, "B": args.B, "V0": args.V0}
    else:
        path, doc = file_ops.single_input(settings, "bound")
        kind = str(doc.get("kind", "structural"))
        params = {"empirical_risk": DEFAULT_EMPIRICAL_RISK, "delta": settings["bound_delta"], **doc.get("params", {})}
    if kind not in _BOUND_PARAMS:
        raise ConfigError(f"bound kind must be one of {sorted(_BOUND_PARAMS)}", field="kind")
    return kind, {k: params[k] for k in _BOUND_PARAMS[kind] if k in params}


def run_bound(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    kind, params = _bound_params(settings, args)
    rep = _build("", "bound", lambda: evaluate_bound(kind, params))
    file_ops.write_json(out / REPORT_NAME, rep.to_dict())
    files = [REPORT_NAME]
    sweep = settings.get("bound_sweep") or {}
    if sweep:
        unknown = sorted(set(sweep) - set(_BOUND_PARAMS[kind]))
        if unknown:
            raise ConfigError(f"cannot sweep {unknown} for bound {kind}", field="bound_sweep")
        grid = {k: [v] for k, v in params.items()}
        grid.update({k: list(v) for k, v in sweep.items()})
        rows = _build("", "bound_sweep", lambda: sweep_bound(kind, grid))
        write_rows_csv(rows, out / BOUND_SWEEP_CSV)
        files.append(BOUND_SWEEP_CSV)
    return RunOutcome("bound", True, files, {"kind": kind, "total": rep.total,
                                             "confidence_term": rep.confidence_term, "drift_term": rep.drift_term})


def run_gsrm(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    path, doc = file_ops.single_input(settings, "gsrm")
    inst = _build(path, "instance", lambda: GsrmInstance.from_dict(doc))
    seq, value = _build(path, "gsrm_mode", lambda: gsrm_minimize(inst, settings["gsrm_mode"]))
    results = [(seq, value)]
    results += [(s, _build(path, "sequences", lambda s=s: gsrm_objective(inst, s))) for s in doc.get("sequences", [])]
    write_rows_csv(gsrm_rows(results), out / GSRM_CSV)
    report: dict[str, Any] = {"minimizer": list(seq), "value": value, "instance": inst.to_dict()}
    if "switching" in doc:
        op = _build(path, "switching", lambda: SwitchingOperator.from_dict(doc["switching"]))
        contexts = doc.get("contexts") or ["*"] * inst.horizon
        mean, radius = gsrm_expected(inst, op, contexts, int(settings["gsrm_mc_samples"]), settings["seed"])
        report["expected"] = {"mean": mean, "confidence_radius": radius}
    file_ops.write_json(out / REPORT_NAME, report)
    return RunOutcome("gsrm", True, [GSRM_CSV, REPORT_NAME], {"minimizer": list(seq), "value": value})


def run_fixtures(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    export = getattr(args, "export", None) if args is not None else None
    if export:
        name = f"{export}.json"
        file_ops.write_json(out / name, export_fixture(export, settings["seed"]))
        return RunOutcome("fixtures", True, [name], {"exported": export})
    suite = settings.get("suite") or "minimality"
    result = _build("", "suite", lambda: run_suite(suite, settings["seed"], settings["workers"],
                                                   int(settings["core_grid_per_axis"]),
                                                   settings["cert_update_divergence"]))
    file_ops.write_json(out / REPORT_NAME, result.to_dict())
    return RunOutcome("fixtures", result.all_certified, [REPORT_NAME], {
        "suite": suite, "rows": list(result.verdicts), "matrix": result.matrix(),
        "matches_expected": result.matches_expected, "checks": result.checks,
    })


def run_protocol_command(settings: dict, out: pathlib.Path, args: Any = None) -> RunOutcome:
    ps = protocol_settings(settings)
    budget = _build("", "protocol_steps", lambda: ProtocolBudget(ps["n_steps"], ps["n_seeds"]))
    smgi, baseline, axis = _build("", "protocol_levels",
                                  lambda: default_protocol_configs(ps["axis"], budget, ps["levels"]))
    smgi = replace(smgi, grid_per_axis=ps["grid_per_axis"])
    baseline = replace(baseline, grid_per_axis=ps["grid_per_axis"])
    report = run_protocol(smgi, baseline, axis, seed=settings["seed"], workers=settings["workers"])
    report.write_json(out / REPORT_NAME)
    report.write_csv(out / PROTOCOL_CSV)
    passed = report.first_failure["smgi"] is None and not report.anomalies
    runtimes = {f"{r.arm}@{r.level:g}": r.runtime_s for lv in report.levels for r in lv.values()}
    log.debug("protocol runtimes_s=%s", runtimes)
    return RunOutcome("protocol", passed, [REPORT_NAME, PROTOCOL_CSV], {
        "axis": axis.kind, "first_failure": report.first_failure, "anomalies": report.anomalies,
        "runtimes": runtimes,
    })


RUNNERS: dict[str, Callable[[dict, pathlib.Path, Any], RunOutcome]] = {
    "simulate": run_simulate,
    "certify": run_certify,
    "bound": run_bound,
    "gsrm": run_gsrm,
    "fixtures": run_fixtures,
    "protocol": run_protocol_command,
}


def run_command(settings: dict, args: Optional[Any] = None) -> RunOutcome:
    """Dispatch, then record the resolved configuration and the manifest next to the outputs."""
    out = file_ops.output_dir(settings)
    outcome = RUNNERS[settings["command"]](settings, out, args)
    save_settings(settings, out)
    outcome.files.append(SETTINGS_FILE_NAME)
    file_ops.write_manifest(out, outcome.files)
    log.info("command=%s pass=%s files=%d", outcome.command, outcome.passed, len(outcome.files))
    return outcome
