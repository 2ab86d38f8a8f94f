import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import integrate

from cbmcause.dataset import Role
from cbmcause.graph import Mark
from cbmcause.physics import (
    CBM21_LABELS,
    FORMULAS,
    PRESETS,
    AllZeroVolumes,
    CyclicSpec,
    DomainError,
    FractureWidthParams,
    GasContentParams,
    GasFlowParams,
    LinearGaussian,
    MechanismArityMismatch,
    Monotone,
    NodeSpec,
    PhysicsFormula,
    PoroBreakdownParams,
    ScmError,
    ScmSpec,
    breakdown_stress_classic,
    breakdown_stress_poro,
    fracture_width,
    gas_content,
    gas_production,
    mean_fracture_width,
    preset,
    random_linear_gaussian_spec,
    synth_scm,
    volume_balance,
    width_shape_mean,
)

pos = st.floats(0.1, 100.0)


def test_poro_breakdown_spot_value_and_domain():
    assert breakdown_stress_poro(PoroBreakdownParams(0.25, 30, 10, 1, 10, 5)) == pytest.approx(55.0, abs=1e-12)
    with pytest.raises(DomainError):
        breakdown_stress_poro(PoroBreakdownParams(1.0, 30, 10, 1, 10, 5))
    with pytest.raises(DomainError):
        breakdown_stress_poro(PoroBreakdownParams(0.25, 30, 10, 2.0, 10, 5))


def test_classic_breakdown_spot_value_and_vectorization():
    assert breakdown_stress_classic(30, 20, 5, 10) == 85
    out = breakdown_stress_classic(np.array([30.0, 10.0]), 20, 5, 10)
    np.testing.assert_array_equal(out, [85.0, 25.0])


@given(st.floats(0.0, 0.49), pos, pos, pos, pos, st.floats(0.0, 1.0))
def test_fracture_width_profile(v, dp, H, G, L, u):
    p0 = FractureWidthParams(0.0, 1.0, L, v, dp, H, G)
    w0 = (1 - v) * dp * H / G
    assert fracture_width(p0) == w0
    assert fracture_width(p0, "elliptic") == w0
    px = FractureWidthParams(u * L, 1.0, L, v, dp, H, G)
    assert 0.0 <= fracture_width(px, "elliptic") <= w0 * (1 + 1e-12)
    assert fracture_width(FractureWidthParams(L, 1.0, L, v, dp, H, G), "elliptic") == pytest.approx(0.0, abs=1e-12)


def test_fracture_width_domain():
    base = dict(t=1.0, L=10.0, v=0.3, dp_T=5.0, H=20.0, G=10.0)
    for bad in ({"x": 11.0}, {"x": -1.0}, {"x": 1.0, "G": 0.0}, {"x": 1.0, "L": 0.0}):
        kw = {**base, **bad}
        with pytest.raises(DomainError):
            fracture_width(FractureWidthParams(kw["x"], kw["t"], kw["L"], kw["v"], kw["dp_T"], kw["H"], kw["G"]))
    with pytest.raises(ValueError):
        fracture_width(FractureWidthParams(1.0, **base), profile="square")


def test_mean_width_matches_independent_quadrature():
    for profile in ("printed", "elliptic"):
        f = lambda x: fracture_width(FractureWidthParams(x, 0.0, 7.0, 0.3, 4.0, 12.0, 9.0), profile)  # noqa: E731
        ref, _ = integrate.quad(f, 0.0, 7.0, limit=200)
        assert mean_fracture_width(0.3, 4.0, 12.0, 9.0, profile) == pytest.approx(ref / 7.0, rel=1e-6)
    assert 0 < width_shape_mean("elliptic") < 1


def test_gas_production_forms():
    p = GasFlowParams(alpha=2.0, K=3.0, h=4.0, p_e=10.0, p_wf=4.0, B_g=1.5, mu_g=0.5, r_e=100.0, r_w=0.1, S=2.0)
    assert gas_production(p) == pytest.approx(2 * 3 * 4 * 6 / (1.5 * 0.5 * (math.log(1000.0) + 2.0)))
    assert gas_production(p, skin_inside_log=True) == pytest.approx(2 * 3 * 4 * 6 / (1.5 * 0.5 * math.log(1002.0)))
    with pytest.raises(DomainError):
        gas_production(GasFlowParams(1, 1, 1, 2, 1, 1, 1, 0.05, 0.1, 0))


def test_gas_content():
    p = GasContentParams(phi=0.1, S_g=0.8, p_e=5.0, T_0=293.0, p_0=0.1, T=310.0, Z=0.9, V_p=12.0)
    assert gas_content(p) == pytest.approx(0.1 * 0.8 * 5.0 * 293.0 / (0.1 * 310.0 * 0.9) + 12.0)
    with pytest.raises(DomainError):
        gas_content(GasContentParams(0.1, 0.8, 5.0, 293.0, 0.0, 310.0, 0.9, 12.0))


@given(st.floats(0, 1e4), st.floats(0, 1e4), st.floats(0, 1e4))
def test_volume_identities(qp, qs, qr):
    if qp + qs + qr == 0:
        with pytest.raises(AllZeroVolumes):
            volume_balance(qp, qs, qr)
        return
    vb = volume_balance(qp, qs, qr)
    assert vb.Q_f == qp + qs + qr
    assert vb.R_p + vb.R_s + vb.R_r == pytest.approx(1.0, abs=1e-12)
    assert vb.R_p * vb.Q_f == pytest.approx(qp, abs=1e-12 * vb.Q_f)


def test_volume_domain():
    with pytest.raises(DomainError):
        volume_balance(-1.0, 2.0, 3.0)


def test_mechanisms_evaluate_and_round_trip():
    from cbmcause.physics import mechanism_from_json

    noise = np.array([0.0, 1.0])
    lg = LinearGaussian({"a": 2.0}, 1.0, 0.5)
    np.testing.assert_allclose(lg.evaluate({"a": np.array([1.0, 2.0])}, noise), [3.0, 5.5])
    mo = Monotone("exp", {"a": 1.0}, 0.0, 0.0)
    np.testing.assert_allclose(mo.evaluate({"a": np.array([0.0, 1.0])}, noise), [1.0, math.e])
    pf = PhysicsFormula("breakdown_stress_classic", {"sigma_y": "a"}, {"sigma_x": 20, "sigma_t": 5, "p_s": 10},
                        {"sigma_y": (2.0, 0.0)})
    np.testing.assert_allclose(pf.evaluate({"a": np.array([15.0, 15.0])}, noise), [85.0, 85.0])
    for m in (lg, mo, pf):
        assert mechanism_from_json(m.to_json()) == m
    with pytest.raises(MechanismArityMismatch):
        PhysicsFormula("breakdown_stress_classic", {"sigma_y": "a"}, {"sigma_x": 20})
    with pytest.raises(ScmError):
        Monotone("square")
    assert set(FORMULAS) >= {"breakdown_stress_poro", "gas_production", "volume_ratio"}


def test_spec_validation():
    a = NodeSpec("A", Role.GEOLOGICAL, (), LinearGaussian())
    with pytest.raises(MechanismArityMismatch):
        NodeSpec("B", Role.GEOLOGICAL, ("A",), LinearGaussian())
    with pytest.raises(ScmError):
        ScmSpec((a, a))
    with pytest.raises(ScmError):
        ScmSpec((NodeSpec("B", "Output", ("Z",), LinearGaussian({"Z": 1.0})),))
    b = NodeSpec("B", Role.GEOLOGICAL, ("C",), LinearGaussian({"C": 1.0}))
    c = NodeSpec("C", Role.GEOLOGICAL, ("B",), LinearGaussian({"B": 1.0}))
    with pytest.raises(CyclicSpec):
        ScmSpec((b, c))


@pytest.mark.parametrize("name", sorted(PRESETS))
def test_presets_sample_round_trip_and_hide_latents(name):
    spec = preset(name, 3)
    assert ScmSpec.loads(spec.dumps()) == spec
    ds, dag = synth_scm(spec, 50)
    ds2, _ = synth_scm(spec, 50)
    assert ds == ds2
    hidden = set(spec.latents()) if spec.hide_latents else set()
    assert set(ds.names) == set(spec.names) - hidden
    assert set(dag.nodes) == set(spec.names)
    ds.output_name()


def test_preset_lookup_and_seed():
    assert preset("fig7").name == "FIG7"
    assert preset("FIG7", 5).seed == 5
    with pytest.raises(ScmError):
        preset("nope")
    assert set(CBM21_LABELS) == set(preset("CBM21").observed())


def test_sampling_follows_the_mechanisms():
    spec = preset("FIG8A")
    ds, _ = synth_scm(spec, 400, 1, hide_latents=False)
    qf = ds.column("Q_f")
    np.testing.assert_allclose(qf, ds.column("Q_p") + ds.column("Q_s") + ds.column("Q_r"), rtol=1e-12)
    np.testing.assert_allclose(ds.column("R_p"), ds.column("Q_p") / qf, rtol=1e-12)
    ds8, _ = synth_scm(preset("FIG8B"), 4000, 2)
    resid = ds8.column("p_F") - breakdown_stress_classic(ds8.column("sigma_y"), ds8.column("sigma_x"),
                                                         ds8.column("sigma_t"), ds8.column("p_s"))
    assert np.std(resid) == pytest.approx(0.5, rel=0.05)


def test_fig7_truth_has_the_confounded_pair():
    from cbmcause.graph import latent_projection

    spec = preset("FIG7")
    mag = latent_projection(spec.dag(), spec.observed())
    assert mag.mark_at("Q_p", "p_F") is Mark.ARROW and mag.mark_at("p_F", "Q_p") is Mark.ARROW


def test_random_linear_gaussian_spec():
    spec = random_linear_gaussian_spec(10, 2, 7)
    assert spec.names == [f"X{i}" for i in range(1, 11)]
    assert all(len(nd.parents) <= 2 for nd in spec.nodes)
    assert spec.node("X10").role is Role.OUTPUT
    assert random_linear_gaussian_spec(10, 2, 7) == spec
    with pytest.raises(ValueError):
        random_linear_gaussian_spec(0)
