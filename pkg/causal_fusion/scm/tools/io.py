"""
JSON and CSV persistence for models and datasets.
"""

import json
import logging
from pathlib import Path
from typing import Optional, Union

import pandas as pd
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ...errors import DataError, ModelError
from ..schemas import PSCM, CausalGraph, Dataset, Variable
from .canonical import build_canonical_pscm

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]


def model_to_json(model: PSCM) -> str:
    return model.model_dump_json(by_alias=True, exclude_none=True, exclude_defaults=True, indent=2)


class CanonicalModelSpec(BaseModel):
    """Endogenous DAG plus exogenous assignment; the equations are the canonical ones."""

    model_config = ConfigDict(frozen=True)

    variables: tuple[Variable, ...]
    arcs: tuple[tuple[str, str], ...] = ()
    exogenous: dict[str, str] = Field(..., description="Exogenous parent of every endogenous variable")

    def build(self) -> PSCM:
        graph = CausalGraph(nodes=tuple(v.name for v in self.variables), arcs=self.arcs)
        return build_canonical_pscm(graph, self.exogenous, self.variables)


def model_from_json(text: str) -> PSCM:
    """
    Parse a model document: a full PSCM, or a canonical specification
    (`variables`, `arcs`, `exogenous` and no `equations`). Pydantic errors
    are re-raised as ModelError with field paths.
    """
    try:
        document = json.loads(text)
    except json.JSONDecodeError as e:
        raise ModelError(f"Model document is not valid JSON: {e}") from e
    try:
        if isinstance(document, dict) and "exogenous" in document and "equations" not in document:
            return CanonicalModelSpec.model_validate(document).build()
        return PSCM.model_validate(document)
    except ValidationError as e:
        errors = [f"{' -> '.join(str(loc) for loc in error['loc'])}: {error['msg']}" for error in e.errors()]
        raise ModelError("Invalid model document:\n" + "\n".join(f"  - {line}" for line in errors)) from e


def load_model(path: PathLike) -> PSCM:
    model = model_from_json(Path(path).read_text(encoding="utf-8"))
    logger.info(f"Loaded model {path} ({len(model.endogenous)} endogenous, {len(model.exogenous)} exogenous)")
    return model


def dump_model(model: PSCM, path: PathLike) -> None:
    Path(path).write_text(model_to_json(model) + "\n", encoding="utf-8")


def read_frame(path: PathLike) -> pd.DataFrame:
    """Raw CSV cells as strings; `#` lines are provenance comments."""
    try:
        return pd.read_csv(path, dtype=str, keep_default_na=False, comment="#")
    except (OSError, pd.errors.ParserError, pd.errors.EmptyDataError) as e:
        raise DataError(f"Cannot read dataset {path}: {e}") from e


def load_dataset(path: PathLike, model: Optional[PSCM] = None) -> Dataset:
    """Read a CSV of state names (header = variable names, optional `count` column)."""
    data = Dataset.from_frame(read_frame(path), model=model)
    logger.info(f"Loaded {data.total} records ({len(data)} distinct) from {path}")
    return data


def dump_dataset(data: Dataset, path: PathLike, model: Optional[PSCM] = None) -> None:
    data.to_frame(model).to_csv(path, index=False)
