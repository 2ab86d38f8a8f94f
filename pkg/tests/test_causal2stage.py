import numpy as np
import pytest

from cbmcause.causal2stage import (
    AmbiguousTreatment,
    CausalModel,
    NoOutputNode,
    RoleBinding,
    RoleError,
    TreatmentMode,
    causal_variables,
    dump_roles,
    fit_causal,
    load_roles,
    predict_causal,
    select_roles,
    stage2_matrix,
    treatment_candidates,
)
from cbmcause.dataset import Dataset, Role, VariableMeta
from cbmcause.graph import parse_notation
from cbmcause.regress import FeatureMismatch, Kind, RegressorSpec, predict

ROLES = {"W1": Role.GEOLOGICAL, "W2": Role.GEOLOGICAL, "T": Role.TREATMENT, "X": Role.ENGINEERING, "Y": Role.OUTPUT}


def _ds(n=400, seed=0):
    rng = np.random.default_rng(seed)
    w1, w2, x = rng.normal(size=(3, n))
    t = 1.5 * w1 - w2 + 0.3 * rng.normal(size=n)
    y = 2 * t + w1 + 0.5 * x + 0.1 * rng.normal(size=n)
    cols = tuple(VariableMeta(k, r) for k, r in ROLES.items())
    return Dataset(cols, np.column_stack([w1, w2, t, x, y]))


PAG = parse_notation("W1 o-> T\nW2 o-> T\nT --> Y\nW1 o-> Y\nX o-> Y\n")


def test_select_roles_from_pag():
    ds = _ds()
    b = select_roles(PAG, ds, "Y")
    assert b == RoleBinding("T", ("W1", "W2"), ("X",), "Y")
    assert b.stage2_features == ("X", "W1", "W2", "T")
    assert treatment_candidates(PAG, ds, "Y") == ["T"]


def test_select_roles_errors():
    ds = _ds()
    with pytest.raises(NoOutputNode):
        select_roles(PAG, ds, "Z")
    pag = parse_notation("W1 o-> T\nW2 o-o X\nT --> Y\nX o-> Y\n")
    with pytest.raises(AmbiguousTreatment) as exc:
        select_roles(pag, ds, "Y")
    assert exc.value.candidates == ["T", "X"]
    none = parse_notation("T --> Y\nX o-> Y\n# nodes: W1 W2 T X Y\n")
    with pytest.raises(AmbiguousTreatment):
        select_roles(none, ds, "Y")


def test_causal_variables_keep_node_order():
    assert causal_variables(PAG, "Y") == ["W1", "T", "X"]
    pag = parse_notation("W2 o-> T\nW1 o-> Y\n")
    assert causal_variables(pag, "Y", "T") == ["T", "W1"]
    with pytest.raises(NoOutputNode):
        causal_variables(PAG, "Q")


def test_binding_validation_and_round_trip(tmp_path):
    with pytest.raises(RoleError):
        RoleBinding("T", ("W1",), ("W1",), "Y")
    with pytest.raises(RoleError):
        RoleBinding("T", ("T",), (), "Y")
    with pytest.raises(RoleError):
        RoleBinding("T", (), ("Y",), "Y")
    with pytest.raises(RoleError):
        RoleBinding("T", ("W1", "W1"), (), "Y")
    b = RoleBinding("T", ("W1", "W2"), ("X",), "Y")
    dump_roles(b, tmp_path / "r.json")
    assert load_roles(tmp_path / "r.json") == b
    with pytest.raises(RoleError):
        RoleBinding.from_json({"treatment": "T"})


def test_linear_two_stage_recovers_structure():
    ds = _ds()
    b = RoleBinding("T", ("W1", "W2"), ("X",), "Y")
    m = fit_causal(ds, b, RegressorSpec(Kind.LINEAR))
    np.testing.assert_allclose(m.psi1.params["coef"], [1.5, -1.0], atol=0.05)
    np.testing.assert_allclose(m.psi2.params["coef"], [0.5, 1.0, 0.0, 2.0], atol=0.05)
    obs = predict_causal(m, ds)
    imp = predict_causal(m, ds, "imputed")
    y = ds.column("Y")
    assert np.mean((obs - y) ** 2) < np.mean((imp - y) ** 2)
    X_imp = stage2_matrix(m, ds, TreatmentMode.IMPUTED)
    np.testing.assert_allclose(X_imp[:, -1], predict(m.psi1, ds.matrix(["W1", "W2"])))


def test_imputed_mode_does_not_need_the_treatment_column():
    ds = _ds()
    b = RoleBinding("T", ("W1", "W2"), ("X",), "Y")
    m = fit_causal(ds, b, RegressorSpec(Kind.LINEAR))
    no_t = ds.subset_columns(["W1", "W2", "X", "Y"])
    assert predict_causal(m, no_t, "imputed").shape == (ds.n,)
    with pytest.raises(FeatureMismatch):
        predict_causal(m, no_t, "observed")


def test_no_confounders_uses_treatment_mean():
    ds = _ds()
    b = RoleBinding("T", (), ("X",), "Y")
    m = fit_causal(ds, b, RegressorSpec(Kind.RANDOM_FOREST, {"trees": 3}))
    t_hat = stage2_matrix(m, ds, "imputed")[:, -1]
    np.testing.assert_allclose(t_hat, ds.column("T").mean())


def test_model_round_trip():
    ds = _ds(120)
    b = RoleBinding("T", ("W1",), ("X", "W2"), "Y")
    m = fit_causal(ds, b, RegressorSpec(Kind.RANDOM_FOREST, {"trees": 4}, 2))
    back = CausalModel.loads(m.dumps())
    assert back.binding == b and back.explainer_kind is Kind.RANDOM_FOREST
    for mode in TreatmentMode:
        assert np.array_equal(predict_causal(back, ds, mode), predict_causal(m, ds, mode))
    with pytest.raises(FeatureMismatch):
        CausalModel(b, m.psi2, m.psi2, Kind.RANDOM_FOREST)
