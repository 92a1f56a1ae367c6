from pathlib import Path

import numpy as np
import pytest

from causal_fusion.counterfactual import QuerySpec
from causal_fusion.scm import Dataset, FSCM, PSCM, StructuralEquation, Variable
from causal_fusion.scm.tools import load_dataset, load_model

FIXTURES = Path(__file__).resolve().parent.parent / "fixtures"


@pytest.fixture
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture
def drug_trial_model() -> PSCM:
    """Gender -> Treatment -> Survival, Gender -> Survival; U1 shared by Treatment and Survival."""
    return load_model(FIXTURES / "drug_trial_model.json")


@pytest.fixture
def two_variable_model() -> PSCM:
    """Treatment -> Survival with one shared 8-state U (u = t + 2j)."""
    return load_model(FIXTURES / "two_variable_model.json")


@pytest.fixture
def observational(drug_trial_model) -> Dataset:
    return load_dataset(FIXTURES / "drug_trial_observational.csv", drug_trial_model)


@pytest.fixture
def interventional(drug_trial_model) -> Dataset:
    return load_dataset(FIXTURES / "drug_trial_interventional.csv", drug_trial_model)


@pytest.fixture
def pns_query() -> QuerySpec:
    return QuerySpec(kind="PNS", cause="Treatment", effect="Survival", cause_state="drug", effect_state="survived")


@pytest.fixture
def chain_model() -> PSCM:
    """X -> Y with separate binary exogenous parents; Y copies X unless UY flips it."""
    return PSCM(
        variables=(
            Variable(name="X", cardinality=2, kind="endogenous"),
            Variable(name="Y", cardinality=2, kind="endogenous"),
            Variable(name="UX", cardinality=2, kind="exogenous"),
            Variable(name="UY", cardinality=2, kind="exogenous"),
        ),
        arcs=(("UX", "X"), ("X", "Y"), ("UY", "Y")),
        equations=(
            StructuralEquation(child="X", parent_order=("UX",), table=(0, 1)),
            StructuralEquation(child="Y", parent_order=("X", "UY"), table=(0, 1, 1, 0)),
        ),
    )


@pytest.fixture
def chain_fscm(chain_model) -> FSCM:
    return FSCM(pscm=chain_model, exo_pmfs={"UX": np.array([0.3, 0.7]), "UY": np.array([0.8, 0.2])})
