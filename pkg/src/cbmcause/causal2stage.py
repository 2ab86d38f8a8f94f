"""Two-stage treatment/confounder production model.

Stage one predicts the treatment ``T`` from the confounders ``W``; stage two
predicts the output ``Y`` from the inputs ``X``, the confounders and the
treatment. The interaction between treatment and inputs is left to the
stage-two regressor, which receives ``(X, W, T)`` as one feature vector.

Roles can be read off a discovered PAG with :func:`select_roles` or supplied
in a JSON role file ``{"treatment", "confounders", "inputs", "output"}``.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import numpy as np

from .dataset import Dataset, Role
from .graph import MixedGraph
from .regress import FeatureMismatch, FittedModel, Kind, RegressorSpec, fit, predict

FORMAT_VERSION = 1


class RoleError(Exception):
    pass


class AmbiguousTreatment(RoleError):
    def __init__(self, candidates: Sequence[str]):
        self.candidates = list(candidates)
        super().__init__(f"treatment is not unique; candidates: {self.candidates}")


class NoOutputNode(RoleError):
    pass


class TreatmentMode(str, enum.Enum):
    OBSERVED = "observed"
    IMPUTED = "imputed"


@dataclass(frozen=True)
class RoleBinding:
    treatment: str
    confounders: tuple[str, ...]
    inputs: tuple[str, ...]
    output: str

    def __post_init__(self):
        object.__setattr__(self, "confounders", tuple(self.confounders))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        w, x = set(self.confounders), set(self.inputs)
        if len(w) != len(self.confounders) or len(x) != len(self.inputs):
            raise RoleError("duplicate names in a role list")
        if self.treatment in x or self.treatment in w:
            raise RoleError("treatment must not appear among inputs or confounders")
        if self.output in x | w | {self.treatment}:
            raise RoleError("output must not appear among the other roles")
        if w & x:
            raise RoleError(f"inputs and confounders overlap: {sorted(w & x)}")

    @property
    def stage2_features(self) -> tuple[str, ...]:
        return (*self.inputs, *self.confounders, self.treatment)

    def to_json(self) -> dict:
        return {
            "treatment": self.treatment,
            "confounders": list(self.confounders),
            "inputs": list(self.inputs),
            "output": self.output,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "RoleBinding":
        try:
            return cls(doc["treatment"], tuple(doc.get("confounders", ())), tuple(doc.get("inputs", ())), doc["output"])
        except KeyError as exc:
            raise RoleError(f"role file lacks {exc.args[0]!r}") from None


def load_roles(path) -> RoleBinding:
    with open(Path(path), encoding="utf-8") as fh:
        return RoleBinding.from_json(json.load(fh))


def dump_roles(binding: RoleBinding, path) -> None:
    Path(path).write_text(json.dumps(binding.to_json(), indent=2) + "\n", encoding="utf-8")


def treatment_candidates(pag: MixedGraph, ds: Dataset, output: str) -> list[str]:
    """Engineering or treatment variables with an edge into the geological cluster."""
    geo = {c for c in ds.names_with_role(Role.GEOLOGICAL) if c in pag.nodes}
    eng = [c for c in ds.names_with_role(Role.ENGINEERING, Role.TREATMENT) if c in pag.nodes and c != output]
    return sorted(c for c in eng if pag.adjacent(c) & geo)


def select_roles(pag: MixedGraph, ds: Dataset, output: str) -> RoleBinding:
    """Assign treatment, confounder and input roles from a PAG.

    The treatment is the single engineering-side variable joined by an edge
    to a geological variable; the confounders are all geological variables
    and the inputs are every other factor. Names inside each role are sorted
    so the result does not depend on column order.

    Raises
    ------
    NoOutputNode
        ``output`` is not a node of ``pag``.
    AmbiguousTreatment
        Zero or several candidate treatments.
    """
    if output not in pag.nodes:
        raise NoOutputNode(f"{output!r} is not a node of the graph")
    cands = treatment_candidates(pag, ds, output)
    if len(cands) != 1:
        raise AmbiguousTreatment(cands)
    t = cands[0]
    factors = [c for c in ds.names if c in pag.nodes and c not in (t, output)]
    geo = set(ds.names_with_role(Role.GEOLOGICAL))
    w = sorted(c for c in factors if c in geo)
    x = sorted(c for c in factors if c not in geo)
    return RoleBinding(t, tuple(w), tuple(x), output)


def causal_variables(pag: MixedGraph, output: str, treatment: str | None = None) -> list[str]:
    """Variables adjacent to ``output``, plus ``treatment`` when given, in node order."""
    if output not in pag.nodes:
        raise NoOutputNode(f"{output!r} is not a node of the graph")
    keep = pag.adjacent(output) | ({treatment} if treatment else set())
    return [v for v in pag.nodes if v in keep and v != output]


@dataclass
class CausalModel:
    binding: RoleBinding
    psi1: FittedModel
    psi2: FittedModel
    explainer_kind: Kind

    def __post_init__(self):
        if self.psi1.feature_names != self.binding.confounders:
            raise FeatureMismatch("stage-one features must equal the confounders")
        if self.psi2.feature_names != self.binding.stage2_features:
            raise FeatureMismatch("stage-two features must equal inputs + confounders + treatment")

    @property
    def feature_names(self) -> tuple[str, ...]:
        return self.psi2.feature_names

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "binding": self.binding.to_json(),
            "explainer_kind": self.explainer_kind.value,
            "psi1": self.psi1.to_json(),
            "psi2": self.psi2.to_json(),
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "CausalModel":
        return cls(
            RoleBinding.from_json(doc["binding"]),
            FittedModel.from_json(doc["psi1"]),
            FittedModel.from_json(doc["psi2"]),
            Kind(doc["explainer_kind"]),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json())

    @classmethod
    def loads(cls, text: str) -> "CausalModel":
        return cls.from_json(json.loads(text))


def _require(ds: Dataset, names: Iterable[str]) -> None:
    missing = [c for c in names if c not in ds.names]
    if missing:
        raise FeatureMismatch(f"dataset lacks columns {missing}")


def fit_causal(ds_train: Dataset, binding: RoleBinding, spec: RegressorSpec) -> CausalModel:
    """Fit ``T ~ psi1(W)`` and ``Y ~ psi2(X, W, T)`` with the same regressor spec.

    With no confounders the first stage is the training mean of ``T``.
    """
    _require(ds_train, (*binding.stage2_features, binding.output))
    w = list(binding.confounders)
    psi1 = fit(spec, ds_train.matrix(w), ds_train.column(binding.treatment), w)
    feats = list(binding.stage2_features)
    psi2 = fit(spec, ds_train.matrix(feats), ds_train.column(binding.output), feats)
    return CausalModel(binding, psi1, psi2, spec.kind)


def stage2_matrix(m: CausalModel, ds: Dataset, mode: TreatmentMode | str = TreatmentMode.OBSERVED) -> np.ndarray:
    """Stage-two design matrix, with the treatment column recorded or imputed."""
    mode = TreatmentMode(mode)
    b = m.binding
    if mode is TreatmentMode.OBSERVED:
        _require(ds, b.stage2_features)
        return ds.matrix(list(b.stage2_features))
    _require(ds, (*b.inputs, *b.confounders))
    t_hat = predict(m.psi1, ds.matrix(list(b.confounders)))
    return np.column_stack([ds.matrix([*b.inputs, *b.confounders]), t_hat])


def predict_causal(m: CausalModel, ds: Dataset, treatment_mode: TreatmentMode | str = TreatmentMode.OBSERVED) -> np.ndarray:
    """Predict the output.

    ``"observed"`` feeds the recorded treatment to the second stage;
    ``"imputed"`` replaces it by the first-stage prediction from the
    confounders, as when the treatment is still a planned decision.
    """
    return predict(m.psi2, stage2_matrix(m, ds, treatment_mode))
