"""
Command-line front end.

    python -m causal_fusion validate --model fixtures/drug_trial_model.json
    python -m causal_fusion query --manifest fixtures/observational_pns.json --out results/observational_pns
    python -m causal_fusion bias-sweep --manifest fixtures/observational_pns.json --levels 6
    python -m causal_fusion bench --n-models 5 --runs 20 --out results/bench

Exit codes: 0 success, 1 domain diagnosis (incompatible data, zero-probability
evidence, unreachable selector band), 2 input error. Results go to files
under --out (the validation report to standard output); logs go to standard
error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
from pathlib import Path
from typing import Any, Optional, Sequence

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError, ValidationInfo, field_validator, model_validator

from .bench import (
    BenchConfig,
    bias_records_to_frame,
    records_to_frame,
    run_bias_experiment,
    run_fusion_experiment,
    summarize_bias,
    summarize_shrinks,
)
from .config import LOG_LEVEL
from .counterfactual import QuerySpec, aggregate_range
from .emcc import EmccConfig, emcc
from .errors import CausalFusionError, IncompatibilityError, SelectorBandError, UndefinedConditionalError
from .fusion import (
    SELECTOR_VAR,
    Selector,
    StudySpec,
    incremental_removal_selectors,
    learning_problem,
    partition_by_selector,
    unselected_count,
)
from .scm import PSCM, Dataset, load_model, validate_pscm
from .scm.tools import read_frame

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_DIAGNOSIS = 1
EXIT_INPUT = 2


# ============================================================================
# Manifests
# ============================================================================


def _resolve_path(value: Any, info: ValidationInfo) -> Any:
    base = (info.context or {}).get("base")
    if value is None or base is None:
        return value
    path = Path(value)
    return path if path.is_absolute() else Path(base) / path


class SelectorManifest(BaseModel):
    """A truth table over `scope` (row-major, last variable fastest) or an expression."""

    model_config = ConfigDict(frozen=True)

    scope: tuple[str, ...] = ()
    table: tuple[int, ...] = ()
    expression: Optional[str] = None

    @model_validator(mode="after")
    def _one_form(self) -> "SelectorManifest":
        if (self.expression is None) == (not self.table):
            raise ValueError("A selector is either a truth table (scope + table) or an expression")
        if self.table and not self.scope:
            raise ValueError("A selector table needs its scope")
        return self

    def build(self, model: PSCM) -> Selector:
        try:
            if self.expression is not None:
                return Selector.from_expression(model, self.expression)
            return Selector.from_table(model, self.scope, self.table)
        except (KeyError, ValueError) as e:
            raise InputError(f"Invalid selector: {e}") from e


class StudyManifest(BaseModel):
    model_config = ConfigDict(frozen=True, populate_by_name=True)

    name: str = Field(..., min_length=1)
    dataset: Path = Field(..., description="CSV of state names")
    intervened_vars: tuple[str, ...] = Field((), alias="intervenedVars")
    selector: Optional[SelectorManifest] = None
    n_unselected: Optional[int] = Field(None, ge=0, alias="nUnselected")
    selected_only: bool = Field(
        False, alias="selectedOnly", description="The CSV holds the S=1 records only; N_(S=0) comes from elsewhere"
    )
    local_chance_vars: tuple[str, ...] = Field((), alias="localChanceVars")

    @field_validator("dataset", mode="before")
    @classmethod
    def _resolve_dataset(cls, value: Any, info: ValidationInfo) -> Any:
        return _resolve_path(value, info)


class RunManifest(BaseModel):
    """Everything one `query` or `bias-sweep` invocation needs; relative paths resolve against the manifest."""

    model_config = ConfigDict(frozen=True, populate_by_name=True)

    model: Path
    studies: list[StudyManifest] = Field(..., min_length=1)
    query: Path
    emcc: EmccConfig = Field(default_factory=EmccConfig)
    out: Path = Path("results")
    p_s0: Optional[float] = Field(None, ge=0.0, lt=1.0, alias="pS0")
    n_s0: Optional[int] = Field(None, ge=0, alias="nS0")
    assume_worst_bias: bool = Field(False, alias="assumeWorstBias")

    @field_validator("model", "query", mode="before")
    @classmethod
    def _resolve_inputs(cls, value: Any, info: ValidationInfo) -> Any:
        return _resolve_path(value, info)

    @model_validator(mode="after")
    def _check_inputs(self) -> "RunManifest":
        missing = [str(p) for p in (self.model, self.query, *(s.dataset for s in self.studies)) if not p.is_file()]
        if missing:
            raise ValueError(f"Files not found: {missing}")
        names = [s.name for s in self.studies]
        if len(set(names)) != len(names):
            raise ValueError(f"Study names must be unique: {names}")
        given = sum(x is not None for x in (self.p_s0, self.n_s0)) + int(self.assume_worst_bias)
        if given > 1:
            raise ValueError("Give at most one of p_s0, n_s0 and assume_worst_bias")
        return self

    def provenance(self) -> dict:
        """Manifest content with files replaced by their SHA-256, independent of where they live."""

        def digest(path: Path) -> str:
            return hashlib.sha256(path.read_bytes()).hexdigest()

        studies = []
        for study in self.studies:
            entry = study.model_dump(mode="json", by_alias=True, exclude={"dataset"})
            entry["dataset"] = digest(study.dataset)
            studies.append(entry)
        return {
            "model": digest(self.model),
            "query": digest(self.query),
            "studies": studies,
            "emcc": self.emcc.model_dump(mode="json", by_alias=True),
            "pS0": self.p_s0,
            "nS0": self.n_s0,
            "assumeWorstBias": self.assume_worst_bias,
        }

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.provenance(), sort_keys=True).encode()).hexdigest()


class InputError(Exception):
    """Unreadable or ill-formed command-line input."""


def _read_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as e:
        raise InputError(f"Cannot read {path}: {e}") from e
    except json.JSONDecodeError as e:
        raise InputError(f"{path} is not valid JSON: {e}") from e


def load_manifest(args: argparse.Namespace) -> RunManifest:
    """Manifest from --manifest, overridden by the individual flags."""
    document: dict[str, Any] = {}
    base = Path.cwd()
    if args.manifest:
        document = _read_json(args.manifest)
        if not isinstance(document, dict):
            raise InputError(f"{args.manifest} must hold a JSON object")
        base = Path(args.manifest).resolve().parent
    if args.model:
        document["model"] = str(Path(args.model).resolve())
    if args.query:
        document["query"] = str(Path(args.query).resolve())
    if args.studies:
        studies_path = Path(args.studies).resolve()
        studies = _read_json(studies_path)
        if not isinstance(studies, list):
            raise InputError(f"{args.studies} must hold a JSON list of studies")
        for study in studies:
            if isinstance(study, dict) and "dataset" in study and not Path(study["dataset"]).is_absolute():
                study["dataset"] = str(studies_path.parent / study["dataset"])
        document["studies"] = studies
    emcc_settings = dict(document.get("emcc", {}))
    for flag, key in (("runs", "runs"), ("seed", "seed"), ("threads", "threads")):
        if getattr(args, flag) is not None:
            emcc_settings[key] = getattr(args, flag)
    document["emcc"] = emcc_settings
    if args.out:
        document["out"] = str(Path(args.out).resolve())
    elif "out" in document and not Path(document["out"]).is_absolute():
        document["out"] = str(base / document["out"])
    for flag, key in (("p_s0", "pS0"), ("n_s0", "nS0")):
        if getattr(args, flag) is not None:
            document[key] = getattr(args, flag)
    if args.assume_worst_bias:
        document["assumeWorstBias"] = True
    return RunManifest.model_validate(document, context={"base": base})


# ============================================================================
# Studies
# ============================================================================


def _split_selector_column(frame: pd.DataFrame) -> tuple[pd.DataFrame, Optional[int]]:
    """Records with S=0 only count towards N_(S=0); their V cells are ignored."""
    if SELECTOR_VAR not in frame.columns:
        return frame, None
    flags = frame[SELECTOR_VAR].astype(str).str.strip()
    if not flags.isin(["0", "1"]).all():
        raise InputError(f"Column {SELECTOR_VAR} must hold 0 or 1")
    counts = frame["count"].astype(int) if "count" in frame.columns else pd.Series(1, index=frame.index)
    n_unselected = int(counts[flags == "0"].sum())
    return frame[flags == "1"].drop(columns=[SELECTOR_VAR]).reset_index(drop=True), n_unselected


def build_study(model: PSCM, study: StudyManifest, manifest: RunManifest) -> StudySpec:
    frame, n_from_column = _split_selector_column(read_frame(study.dataset))
    data = Dataset.from_frame(frame, model=model)
    selector = study.selector.build(model) if study.selector is not None else None
    n_unselected = study.n_unselected
    if selector is not None and n_unselected is None:
        if n_from_column is not None:
            n_unselected = n_from_column
        elif study.selected_only:
            if manifest.p_s0 is None and manifest.n_s0 is None and not manifest.assume_worst_bias:
                raise InputError(
                    f"Study {study.name} holds selected records only: give --n-s0, --p-s0 or --assume-worst-bias"
                )
            n_unselected = unselected_count(
                data.total, n_s0=manifest.n_s0, p_s0=manifest.p_s0, assume_worst=manifest.assume_worst_bias
            )
    elif selector is None and n_from_column:
        raise InputError(f"Study {study.name} has unselected records but no selector")
    spec = StudySpec(
        name=study.name,
        dataset=data,
        intervened_vars=study.intervened_vars,
        selector=selector,
        n_unselected=n_unselected,
        local_chance_vars=study.local_chance_vars,
    )
    logger.info(
        f"Study {spec.name}: {data.total} records"
        + (f", do({', '.join(spec.intervened_vars)})" if spec.is_interventional else "")
        + (f", N_(S=0)={spec.biased().n_unselected}" if spec.is_biased else "")
    )
    return spec


def load_query(path: Path) -> QuerySpec:
    return QuerySpec.model_validate(_read_json(path))


# ============================================================================
# Output
# ============================================================================


def _provenance_line(manifest_hash: str, seed: int) -> str:
    return f"# manifest_hash={manifest_hash}, seed={seed}\n"


def write_json(path: Path, document: dict) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(document, sort_keys=True, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Wrote {path}")


def write_csv(path: Path, frame: pd.DataFrame, manifest_hash: str, seed: int) -> None:
    """CSV with a provenance comment first; fields quoted only when needed, `\\n` line ends."""
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8", newline="") as handle:
        handle.write(_provenance_line(manifest_hash, seed))
        frame.to_csv(handle, index=False, lineterminator="\n")
    logger.info(f"Wrote {path}")


# ============================================================================
# Commands
# ============================================================================


def cmd_validate(args: argparse.Namespace) -> int:
    model = load_model(args.model)
    report = validate_pscm(model)
    print(report.summary())
    return EXIT_OK if report.is_valid else EXIT_DIAGNOSIS


def _fit_and_query(model: PSCM, studies: Sequence[StudySpec], query: QuerySpec, config: EmccConfig):
    fit_model, data = learning_problem(model, studies)
    compatible = emcc(fit_model, data, config=config)
    return compatible, aggregate_range(compatible, query)


def cmd_query(args: argparse.Namespace) -> int:
    manifest = load_manifest(args)
    model = load_model(manifest.model)
    query = load_query(manifest.query)
    studies = [build_study(model, study, manifest) for study in manifest.studies]
    compatible, result = _fit_and_query(model, studies, query, manifest.emcc)

    manifest_hash = manifest.digest()
    seed = manifest.emcc.seed
    write_json(
        manifest.out / "result.json",
        {
            "manifest_hash": manifest_hash,
            "seed": seed,
            "query": query.model_dump(mode="json", by_alias=True),
            "range": list(result.range),
            "per_run": result.per_run,
            "run_indices": result.run_indices,
            "n_excluded": result.n_excluded,
            "n_undefined": result.n_undefined,
            "status_counts": compatible.status_counts(),
        },
    )
    write_csv(
        manifest.out / "runs.csv",
        pd.DataFrame({"run": result.run_indices, "value": result.per_run}),
        manifest_hash,
        seed,
    )
    logger.info(f"{query.kind} range [{result.lower:.4f}, {result.upper:.4f}] over {len(result.per_run)} runs")
    return EXIT_OK


def _sweep_levels(n_levels: int, limit: Optional[int]) -> list[int]:
    if limit is None or limit >= n_levels:
        return list(range(n_levels))
    return sorted(set(np.linspace(0, n_levels - 1, limit).round().astype(int).tolist()))


def cmd_bias_sweep(args: argparse.Namespace) -> int:
    """
    Selection levels from incremental record removal on the first study
    (observational and unbiased); the other studies are fused unchanged.
    """
    manifest = load_manifest(args)
    model = load_model(manifest.model)
    query = load_query(manifest.query)
    studies = [build_study(model, study, manifest) for study in manifest.studies]
    source = studies[0]
    if source.is_interventional or source.is_biased:
        raise InputError(f"The swept study {source.name} must be observational and unbiased")
    scope = tuple(v.strip() for v in args.scope.split(",")) if args.scope else None
    selectors = incremental_removal_selectors(model, source.dataset, scope)
    levels = [(selectors[k], None) for k in _sweep_levels(len(selectors), args.levels)]
    if manifest.assume_worst_bias:
        last = selectors[-1]
        n_selected = partition_by_selector(source.dataset, last).n_selected
        levels.append((last, unselected_count(n_selected, assume_worst=True)))

    manifest_hash = manifest.digest()
    seed = manifest.emcc.seed
    rows, summary = [], []
    for level, (selector, n_unselected) in enumerate(levels):
        if n_unselected is None:
            swept = source.model_copy(update={"selector": None if selector.array.all() else selector})
        else:
            selected = source.dataset.select(selector.mask(source.dataset))
            swept = StudySpec(name=source.name, dataset=selected, selector=selector, n_unselected=n_unselected)
        p_selected = swept.biased().p_selected
        _, result = _fit_and_query(model, [swept, *studies[1:]], query, manifest.emcc)
        logger.info(f"Level {level}: P(S=1)={p_selected:.3f}, range [{result.lower:.4f}, {result.upper:.4f}]")
        summary.append({"level": level, "p_selected": p_selected, "range": list(result.range)})
        rows += [
            {"level": level, "p_selected": p_selected, "run": i, "value": v, "lower": result.lower, "upper": result.upper}
            for i, v in zip(result.run_indices, result.per_run)
        ]

    write_csv(manifest.out / "bias_sweep.csv", pd.DataFrame(rows), manifest_hash, seed)
    write_json(
        manifest.out / "bias_sweep.json",
        {"manifest_hash": manifest_hash, "seed": seed, "query": query.model_dump(mode="json", by_alias=True), "levels": summary},
    )
    return EXIT_OK


def load_bench_config(args: argparse.Namespace) -> BenchConfig:
    document = _read_json(args.config) if args.config else {}
    if not isinstance(document, dict):
        raise InputError(f"{args.config} must hold a JSON object")
    for flag, key in (("n_models", "nModels"), ("runs", "runs"), ("seed", "seed"), ("threads", "threads")):
        if getattr(args, flag) is not None:
            document[key] = getattr(args, flag)
    return BenchConfig.model_validate(document)


def cmd_bench(args: argparse.Namespace) -> int:
    config = load_bench_config(args)
    out = Path(args.out or "results")
    config_hash = hashlib.sha256(config.model_dump_json(by_alias=True).encode()).hexdigest()

    def progress(done: int, total: int) -> None:
        logger.info(f"Bench progress: {done}/{total} models")

    if args.experiment == "bias":
        records = run_bias_experiment(config, progress)
        frame, summary = bias_records_to_frame(records), {"bins": summarize_bias(records)}
    else:
        records = run_fusion_experiment(config, progress)
        frame, summary = records_to_frame(records), {"shrinks": summarize_shrinks(records)}
    write_csv(out / f"bench_{args.experiment}.csv", frame, config_hash, config.seed)
    write_json(
        out / f"bench_{args.experiment}_summary.json",
        {
            "manifest_hash": config_hash,
            "seed": config.seed,
            "config": config.model_dump(mode="json", by_alias=True),
            "n_records": len(records),
            **summary,
        },
    )
    return EXIT_OK


# ============================================================================
# Entry point
# ============================================================================


def _add_run_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--manifest", help="RunManifest JSON (model, studies, query, emcc, out)")
    parser.add_argument("--model", help="Model JSON")
    parser.add_argument("--studies", help="JSON list of study manifests")
    parser.add_argument("--query", help="Query JSON")
    parser.add_argument("--runs", type=int, help="Number of EM runs")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--threads", type=int, help="Worker processes for the EM runs")
    parser.add_argument("--out", help="Output directory")
    parser.add_argument("--p-s0", dest="p_s0", type=float, help="P(S=0) for studies with selected records only")
    parser.add_argument("--n-s0", dest="n_s0", type=int, help="N_(S=0) for studies with selected records only")
    parser.add_argument(
        "--assume-worst-bias",
        action="store_true",
        help="Use the P(S=0) -> 1 limit for unknown unselected counts (not recommended)",
    )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="causal_fusion", description=__doc__.split("\n\n")[0].strip())
    parser.add_argument("--log-level", default=LOG_LEVEL, help="Logging level (default from CAUSAL_FUSION_LOG_LEVEL)")
    commands = parser.add_subparsers(dest="command", required=True)

    validate = commands.add_parser("validate", help="Check a model's structural invariants")
    validate.add_argument("--model", required=True, help="Model JSON")
    validate.set_defaults(handler=cmd_validate)

    query = commands.add_parser("query", help="Fuse the studies, run EMCC and bound the query")
    _add_run_flags(query)
    query.set_defaults(handler=cmd_query)

    sweep = commands.add_parser("bias-sweep", help="Query ranges under increasingly strong selection")
    _add_run_flags(sweep)
    sweep.add_argument("--levels", type=int, help="Number of selection levels kept (default: all)")
    sweep.add_argument("--scope", help="Comma-separated selector scope (default: all endogenous variables)")
    sweep.set_defaults(handler=cmd_bias_sweep)

    bench = commands.add_parser("bench", help="Run the random-model fusion or bias experiment")
    bench.add_argument("--config", help="BenchConfig JSON")
    bench.add_argument("--experiment", choices=("fusion", "bias"), default="fusion")
    bench.add_argument("--n-models", dest="n_models", type=int)
    bench.add_argument("--runs", type=int)
    bench.add_argument("--seed", type=int)
    bench.add_argument("--threads", type=int)
    bench.add_argument("--out", help="Output directory")
    bench.set_defaults(handler=cmd_bench)
    return parser


def _format_validation(error: ValidationError) -> str:
    return "\n".join(f"  - {' -> '.join(str(loc) for loc in e['loc']) or 'input'}: {e['msg']}" for e in error.errors())


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=str(args.log_level).upper(),
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
        force=True,
    )
    try:
        return args.handler(args)
    except ValidationError as e:
        logger.error(f"❌ Invalid input:\n{_format_validation(e)}")
        return EXIT_INPUT
    except (IncompatibilityError, UndefinedConditionalError, SelectorBandError) as e:
        logger.error(f"❌ {e}")
        return EXIT_DIAGNOSIS
    except (CausalFusionError, InputError, OSError) as e:
        logger.error(f"❌ {e}")
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
