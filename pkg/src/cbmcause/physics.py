"""Fracturing-engineering formulas and a structural causal model sampler.

The formula functions are pure and vectorised: every field of the parameter
records may be a float or a numpy array, and the result broadcasts.

:class:`ScmSpec` describes a ground-truth DAG with one mechanism per node.
:func:`synth_scm` samples it and returns the observed :class:`Dataset`
together with the full generating DAG (latent nodes included). Three presets
mirror the local structures of the fracturing domain; see :data:`PRESETS`.
"""

from __future__ import annotations

import dataclasses
import functools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy.integrate import quad

from .dataset import Dataset, Role, VariableMeta
from .graph import MixedGraph, NotADag, dag_from_parents

FORMAT_VERSION = 1


class PhysicsError(Exception):
    pass


class DomainError(PhysicsError, ValueError):
    pass


class AllZeroVolumes(DomainError):
    pass


class ScmError(PhysicsError):
    pass


class CyclicSpec(ScmError):
    pass


class MechanismArityMismatch(ScmError):
    pass


# ----------------------------------------------------------------------------
# formulas
# ----------------------------------------------------------------------------


def _scalar_or_array(x):
    x = np.asarray(x, dtype=float)
    return float(x) if x.ndim == 0 else x


@dataclass(frozen=True)
class PoroBreakdownParams:
    v: float
    S_V: float
    S_hi: float
    A_pe: float
    p_s: float
    sigma_T: float


def breakdown_stress_poro(p: PoroBreakdownParams):
    """Breakdown pressure of a poroelastic formation.

    ``p_F = (2 v/(1-v) S_V + 2 S_hi + A_pe p_s + sigma_T) / (2 - A_pe)``
    """
    v = np.asarray(p.v, dtype=float)
    a = np.asarray(p.A_pe, dtype=float)
    if np.any(v == 1.0):
        raise DomainError("Poisson ratio of 1 makes v/(1-v) undefined")
    if np.any(a == 2.0):
        raise DomainError("pore-pressure coefficient of 2 zeroes the denominator")
    num = 2.0 * (v / (1.0 - v)) * p.S_V + 2.0 * np.asarray(p.S_hi) + a * p.p_s + p.sigma_T
    return _scalar_or_array(num / (2.0 - a))


@dataclass(frozen=True)
class FractureWidthParams:
    x: float
    t: float
    L: float
    v: float
    dp_T: float
    H: float
    G: float


def _width_bracket(u, profile: str):
    u = np.asarray(u, dtype=float)
    if profile == "printed":
        root = np.sqrt(1.0 + u * u)
    elif profile == "elliptic":
        root = np.sqrt(np.clip(1.0 - u * u, 0.0, None))
    else:
        raise ValueError(f"unknown profile {profile!r}")
    b = u * np.arcsin(u) + root - math.pi * u / 2.0
    # the elliptic bracket vanishes at the tip; clip rounding noise below zero
    return np.clip(b, 0.0, None)


def fracture_width(p: FractureWidthParams, profile: str = "printed"):
    """Fracture width at position ``x`` along a fracture of length ``L``.

    ``W(0) = (1 - v) dp_T H / G`` and ``W(x) = W(0) * bracket(x/L) ** 0.25``.
    ``profile="printed"`` uses ``sqrt(1 + (x/L)**2)`` inside the bracket,
    ``profile="elliptic"`` the textbook ``sqrt(1 - (x/L)**2)``. The time
    argument is accepted for completeness and has no effect.
    """
    x = np.asarray(p.x, dtype=float)
    L = np.asarray(p.L, dtype=float)
    G = np.asarray(p.G, dtype=float)
    if np.any(G <= 0):
        raise DomainError("shear modulus must be positive")
    if np.any(L <= 0):
        raise DomainError("fracture length must be positive")
    if np.any(x < 0) or np.any(x > L):
        raise DomainError("position must satisfy 0 <= x <= L")
    w0 = (1.0 - np.asarray(p.v, dtype=float)) * p.dp_T * p.H / G
    return _scalar_or_array(w0 * _width_bracket(x / L, profile) ** 0.25)


@functools.lru_cache(maxsize=None)
def width_shape_mean(profile: str = "printed") -> float:
    """Average of ``bracket(u) ** 0.25`` over ``u`` in ``[0, 1]``."""
    val, _ = quad(lambda u: float(_width_bracket(u, profile)) ** 0.25, 0.0, 1.0)
    return val


def mean_fracture_width(v, dp_T, H, G, profile: str = "printed"):
    """Width averaged along the fracture, ``W(0) * mean(bracket ** 0.25)``."""
    if np.any(np.asarray(G) <= 0):
        raise DomainError("shear modulus must be positive")
    w0 = (1.0 - np.asarray(v, dtype=float)) * dp_T * H / np.asarray(G, dtype=float)
    return _scalar_or_array(w0 * width_shape_mean(profile))


@dataclass(frozen=True)
class GasFlowParams:
    alpha: float
    K: float
    h: float
    p_e: float
    p_wf: float
    B_g: float
    mu_g: float
    r_e: float
    r_w: float
    S: float


def gas_production(p: GasFlowParams, skin_inside_log: bool = False):
    """Radial-inflow gas rate.

    ``q_g = alpha K h (p_e - p_wf) / (B_g mu_g (ln(r_e/r_w) + S))``. With
    ``skin_inside_log=True`` the denominator uses ``ln(r_e/r_w + S)``
    instead.
    """
    r_e = np.asarray(p.r_e, dtype=float)
    r_w = np.asarray(p.r_w, dtype=float)
    if np.any(r_w <= 0) or np.any(r_e <= r_w):
        raise DomainError("radii must satisfy r_e > r_w > 0")
    if skin_inside_log:
        arg = r_e / r_w + p.S
        if np.any(arg <= 0):
            raise DomainError("log argument must be positive")
        flow = np.log(arg)
    else:
        flow = np.log(r_e / r_w) + p.S
    den = np.asarray(p.B_g, dtype=float) * p.mu_g * flow
    if np.any(den == 0):
        raise DomainError("zero denominator in gas rate")
    return _scalar_or_array(p.alpha * np.asarray(p.K) * p.h * (np.asarray(p.p_e) - p.p_wf) / den)


@dataclass(frozen=True)
class GasContentParams:
    phi: float
    S_g: float
    p_e: float
    T_0: float
    p_0: float
    T: float
    Z: float
    V_p: float


def gas_content(p: GasContentParams):
    """Free plus adsorbed gas, ``phi S_g p_e T_0 / (p_0 T Z) + V_p``."""
    den = np.asarray(p.p_0, dtype=float) * p.T * p.Z
    if np.any(den == 0):
        raise DomainError("p_0 * T * Z must be nonzero")
    return _scalar_or_array(np.asarray(p.phi) * p.S_g * p.p_e * p.T_0 / den + p.V_p)


@dataclass(frozen=True)
class VolumeBalance:
    Q_f: float
    R_p: float
    R_s: float
    R_r: float


def volume_balance(Q_p, Q_s, Q_r) -> VolumeBalance:
    """Total fluid volume and the prepad / sand-laden / remainder ratios."""
    qp, qs, qr = (np.asarray(q, dtype=float) for q in (Q_p, Q_s, Q_r))
    if np.any(qp < 0) or np.any(qs < 0) or np.any(qr < 0):
        raise DomainError("volumes must be nonnegative")
    qf = qp + qs + qr
    if np.any(qf == 0):
        raise AllZeroVolumes("all volumes are zero; ratios undefined")
    return VolumeBalance(*(_scalar_or_array(a) for a in (qf, qp / qf, qs / qf, qr / qf)))


def breakdown_stress_classic(sigma_y, sigma_x, sigma_t, p_s):
    """Breakdown pressure from horizontal stresses, ``3 sy - sx + st + ps``."""
    return _scalar_or_array(
        3.0 * np.asarray(sigma_y, dtype=float) - np.asarray(sigma_x) + np.asarray(sigma_t) + np.asarray(p_s)
    )


def prepad_volume(v, u_p, c1=1.0, c2=0.5, dp_T=1.0, H=1.0, G=1.0):
    """Prepad volume that opens a fracture wide enough for proppant.

    ``Q_p = c1 * W_avg(v) * (1 + c2 * u_p)``; the form is a modelling choice,
    only its inputs are fixed by the mechanism.
    """
    return _scalar_or_array(c1 * mean_fracture_width(v, dp_T, H, G) * (1.0 + c2 * np.asarray(u_p, dtype=float)))


def _volume_ratio(Q, Q_f):
    Q_f = np.asarray(Q_f, dtype=float)
    if np.any(Q_f == 0):
        raise AllZeroVolumes("total volume is zero")
    return np.asarray(Q, dtype=float) / Q_f


FORMULAS: dict[str, tuple[Callable, tuple[str, ...]]] = {
    "breakdown_stress_poro": (
        lambda **k: breakdown_stress_poro(PoroBreakdownParams(**k)),
        ("v", "S_V", "S_hi", "A_pe", "p_s", "sigma_T"),
    ),
    "breakdown_stress_classic": (breakdown_stress_classic, ("sigma_y", "sigma_x", "sigma_t", "p_s")),
    "gas_production": (
        lambda **k: gas_production(GasFlowParams(**k)),
        ("alpha", "K", "h", "p_e", "p_wf", "B_g", "mu_g", "r_e", "r_w", "S"),
    ),
    "gas_content": (
        lambda **k: gas_content(GasContentParams(**k)),
        ("phi", "S_g", "p_e", "T_0", "p_0", "T", "Z", "V_p"),
    ),
    "prepad_volume": (prepad_volume, ("v", "u_p", "c1", "c2", "dp_T", "H", "G")),
    "volume_total": (lambda Q_p, Q_s, Q_r: np.asarray(Q_p) + Q_s + Q_r, ("Q_p", "Q_s", "Q_r")),
    "volume_ratio": (_volume_ratio, ("Q", "Q_f")),
}


# ----------------------------------------------------------------------------
# mechanisms
# ----------------------------------------------------------------------------

LINKS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "identity": lambda s: s,
    "exp": np.exp,
    "tanh": np.tanh,
    "softplus": lambda s: np.logaddexp(0.0, s),
    "cube": lambda s: s**3,
}


@dataclass(frozen=True)
class LinearGaussian:
    """``intercept + sum(w * parent) + noise_sd * e``."""

    weights: Mapping[str, float] = field(default_factory=dict)
    intercept: float = 0.0
    noise_sd: float = 1.0

    def inputs(self) -> set[str]:
        return set(self.weights)

    def evaluate(self, parents: Mapping[str, np.ndarray], noise: np.ndarray) -> np.ndarray:
        out = np.full(noise.shape, float(self.intercept))
        for name in sorted(self.weights):
            out = out + self.weights[name] * parents[name]
        return out + self.noise_sd * noise

    def to_json(self) -> dict:
        return {"kind": "LinearGaussian", "weights": dict(sorted(self.weights.items())),
                "intercept": self.intercept, "noise_sd": self.noise_sd}


@dataclass(frozen=True)
class Monotone:
    """``link(intercept + sum(w * parent)) + noise_sd * e``."""

    link: str
    weights: Mapping[str, float] = field(default_factory=dict)
    intercept: float = 0.0
    noise_sd: float = 1.0

    def __post_init__(self):
        if self.link not in LINKS:
            raise ScmError(f"unknown link {self.link!r}")

    def inputs(self) -> set[str]:
        return set(self.weights)

    def evaluate(self, parents, noise):
        s = np.full(noise.shape, float(self.intercept))
        for name in sorted(self.weights):
            s = s + self.weights[name] * parents[name]
        return LINKS[self.link](s) + self.noise_sd * noise

    def to_json(self) -> dict:
        return {"kind": "Monotone", "link": self.link, "weights": dict(sorted(self.weights.items())),
                "intercept": self.intercept, "noise_sd": self.noise_sd}


@dataclass(frozen=True)
class PhysicsFormula:
    """One of :data:`FORMULAS` with arguments bound to parents or constants.

    ``inputs`` maps formula arguments to parent names; ``transforms`` may
    rescale a bound parent as ``scale * value + shift`` before the call.
    """

    which: str
    inputs: Mapping[str, str] = field(default_factory=dict)
    constants: Mapping[str, float] = field(default_factory=dict)
    transforms: Mapping[str, tuple[float, float]] = field(default_factory=dict)
    noise_sd: float = 0.0

    def __post_init__(self):
        if self.which not in FORMULAS:
            raise ScmError(f"unknown formula {self.which!r}")
        params = set(FORMULAS[self.which][1])
        bound = set(self.inputs) | set(self.constants)
        if set(self.inputs) & set(self.constants) or bound != params:
            raise MechanismArityMismatch(
                f"{self.which} takes {sorted(params)}; bound {sorted(self.inputs)} + {sorted(self.constants)}"
            )
        if not set(self.transforms) <= set(self.inputs):
            raise MechanismArityMismatch("transforms must name bound inputs")

    def inputs_set(self) -> set[str]:
        return set(self.inputs.values())

    def evaluate(self, parents, noise):
        kwargs = dict(self.constants)
        for arg, parent in self.inputs.items():
            val = parents[parent]
            if arg in self.transforms:
                scale, shift = self.transforms[arg]
                val = scale * val + shift
            kwargs[arg] = val
        out = np.broadcast_to(np.asarray(FORMULAS[self.which][0](**kwargs), dtype=float), noise.shape)
        return out + self.noise_sd * noise

    def to_json(self) -> dict:
        return {
            "kind": "PhysicsFormula",
            "which": self.which,
            "inputs": dict(sorted(self.inputs.items())),
            "constants": dict(sorted(self.constants.items())),
            "transforms": {k: list(v) for k, v in sorted(self.transforms.items())},
            "noise_sd": self.noise_sd,
        }


Mechanism = LinearGaussian | Monotone | PhysicsFormula


def _mechanism_parents(m: Mechanism) -> set[str]:
    return m.inputs_set() if isinstance(m, PhysicsFormula) else m.inputs()


def mechanism_from_json(doc: Mapping) -> Mechanism:
    kind = doc["kind"]
    if kind == "LinearGaussian":
        return LinearGaussian(dict(doc["weights"]), doc.get("intercept", 0.0), doc.get("noise_sd", 1.0))
    if kind == "Monotone":
        return Monotone(doc["link"], dict(doc["weights"]), doc.get("intercept", 0.0), doc.get("noise_sd", 1.0))
    if kind == "PhysicsFormula":
        return PhysicsFormula(
            doc["which"],
            dict(doc.get("inputs", {})),
            dict(doc.get("constants", {})),
            {k: tuple(v) for k, v in doc.get("transforms", {}).items()},
            doc.get("noise_sd", 0.0),
        )
    raise ScmError(f"unknown mechanism kind {kind!r}")


# ----------------------------------------------------------------------------
# SCM specification and sampling
# ----------------------------------------------------------------------------


@dataclass(frozen=True)
class NodeSpec:
    name: str
    role: Role
    parents: tuple[str, ...]
    mechanism: Mechanism
    latent: bool = False
    unit: str = ""

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        object.__setattr__(self, "role", Role.parse(self.role))
        if _mechanism_parents(self.mechanism) != set(self.parents):
            raise MechanismArityMismatch(
                f"node {self.name!r}: mechanism reads {sorted(_mechanism_parents(self.mechanism))}, "
                f"parents are {sorted(self.parents)}"
            )

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "role": self.role.value,
            "parents": list(self.parents),
            "mechanism": self.mechanism.to_json(),
            "latent": self.latent,
            "unit": self.unit,
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "NodeSpec":
        return cls(
            doc["name"], Role.parse(doc["role"]), tuple(doc.get("parents", ())),
            mechanism_from_json(doc["mechanism"]), bool(doc.get("latent", False)), doc.get("unit", ""),
        )


@dataclass(frozen=True)
class ScmSpec:
    nodes: tuple[NodeSpec, ...]
    seed: int = 0
    hide_latents: bool = True
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "nodes", tuple(self.nodes))
        names = [nd.name for nd in self.nodes]
        if len(set(names)) != len(names):
            raise ScmError("duplicate node names")
        known = set(names)
        for nd in self.nodes:
            missing = set(nd.parents) - known
            if missing:
                raise ScmError(f"node {nd.name!r} has unknown parents {sorted(missing)}")
        try:
            self.dag().topological_order()
        except NotADag as exc:
            raise CyclicSpec(str(exc)) from None

    @property
    def names(self) -> list[str]:
        return [nd.name for nd in self.nodes]

    def node(self, name: str) -> NodeSpec:
        for nd in self.nodes:
            if nd.name == name:
                return nd
        raise KeyError(name)

    def latents(self) -> list[str]:
        return [nd.name for nd in self.nodes if nd.latent]

    def observed(self) -> list[str]:
        return [nd.name for nd in self.nodes if not nd.latent]

    def dag(self) -> MixedGraph:
        return dag_from_parents({nd.name: nd.parents for nd in self.nodes}, self.names)

    def with_seed(self, seed: int) -> "ScmSpec":
        return dataclasses.replace(self, seed=seed)

    def to_json(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "name": self.name,
            "seed": self.seed,
            "hide_latents": self.hide_latents,
            "nodes": [nd.to_json() for nd in self.nodes],
        }

    @classmethod
    def from_json(cls, doc: Mapping) -> "ScmSpec":
        return cls(
            tuple(NodeSpec.from_json(d) for d in doc["nodes"]),
            int(doc.get("seed", 0)),
            bool(doc.get("hide_latents", True)),
            doc.get("name", ""),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)

    @classmethod
    def loads(cls, text: str) -> "ScmSpec":
        return cls.from_json(json.loads(text))


def synth_scm(
    spec: ScmSpec, n: int, seed: int | None = None, hide_latents: bool | None = None
) -> tuple[Dataset, MixedGraph]:
    """Sample ``n`` rows from ``spec``.

    Nodes are generated in topological order (ties broken by declaration
    order); each node draws one standard-normal noise vector of length ``n``
    from a single ``default_rng(seed)`` stream, in that order. Returns the
    dataset (latent columns dropped when ``hide_latents``) and the full DAG.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    seed = spec.seed if seed is None else seed
    hide = spec.hide_latents if hide_latents is None else hide_latents
    dag = spec.dag()
    rng = np.random.default_rng(seed)
    values: dict[str, np.ndarray] = {}
    for name in dag.topological_order():
        nd = spec.node(name)
        noise = rng.standard_normal(n)
        col = np.asarray(nd.mechanism.evaluate({p: values[p] for p in nd.parents}, noise), dtype=float)
        if not np.isfinite(col).all():
            raise DomainError(f"non-finite values generated for {name!r}")
        values[name] = col
    keep = [nd for nd in spec.nodes if not (hide and nd.latent)]
    meta = tuple(VariableMeta(nd.name, nd.role, nd.unit) for nd in keep)
    data = np.column_stack([values[nd.name] for nd in keep])
    return Dataset(meta, data), dag


# ----------------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------------

G_, E_, T_, O_ = Role.GEOLOGICAL, Role.ENGINEERING, Role.TREATMENT, Role.OUTPUT


def _fig8a() -> ScmSpec:
    ratio = lambda q: PhysicsFormula("volume_ratio", {"Q": q, "Q_f": "Q_f"})  # noqa: E731
    return ScmSpec(
        (
            NodeSpec("Q_r", E_, (), LinearGaussian({}, 100.0, 15.0), latent=True, unit="m3"),
            NodeSpec("Q_p", E_, ("Q_r",), LinearGaussian({"Q_r": 0.8}, 60.0, 12.0), unit="m3"),
            NodeSpec("Q_s", E_, ("Q_r",), LinearGaussian({"Q_r": 1.5}, 150.0, 25.0), unit="m3"),
            NodeSpec("Q_f", O_, ("Q_p", "Q_s", "Q_r"),
                     PhysicsFormula("volume_total", {"Q_p": "Q_p", "Q_s": "Q_s", "Q_r": "Q_r"}), unit="m3"),
            NodeSpec("R_p", E_, ("Q_p", "Q_f"), ratio("Q_p")),
            NodeSpec("R_s", E_, ("Q_s", "Q_f"), ratio("Q_s")),
            NodeSpec("R_r", E_, ("Q_r", "Q_f"), ratio("Q_r")),
        ),
        name="FIG8A",
    )


def _fig8b() -> ScmSpec:
    return ScmSpec(
        (
            NodeSpec("sigma_x", G_, (), LinearGaussian({}, 20.0, 2.0), unit="MPa"),
            NodeSpec("sigma_y", G_, ("sigma_x",), LinearGaussian({"sigma_x": 1.1}, 6.0, 2.0), unit="MPa"),
            NodeSpec("sigma_t", G_, (), LinearGaussian({}, 5.0, 1.0), unit="MPa"),
            NodeSpec("p_s", G_, (), LinearGaussian({}, 10.0, 1.5), unit="MPa"),
            NodeSpec(
                "p_F", O_, ("sigma_y", "sigma_x", "sigma_t", "p_s"),
                PhysicsFormula(
                    "breakdown_stress_classic",
                    {"sigma_y": "sigma_y", "sigma_x": "sigma_x", "sigma_t": "sigma_t", "p_s": "p_s"},
                    noise_sd=0.5,
                ),
                unit="MPa",
            ),
        ),
        name="FIG8B",
        hide_latents=False,
    )


def _fig7() -> ScmSpec:
    # v drives both the prepad volume and the breakdown stress; p_e drives gas
    # content and the production rate. Three noisy gas-content measurements
    # make a purely correlation-ranked input set redundant.
    gas_rate = PhysicsFormula(
        "gas_production",
        {"K": "K", "h": "h", "p_e": "p_e", "S": "p_F"},
        {"alpha": 1.0, "p_wf": 3.0, "B_g": 1.0, "mu_g": 1.0, "r_e": 200.0, "r_w": 0.1},
        {"S": (0.25, -55.0 * 0.25)},
        noise_sd=0.4,
    )
    content = PhysicsFormula(
        "gas_content",
        {"S_g": "S_g", "p_e": "p_e"},
        {"phi": 0.05, "T_0": 300.0, "p_0": 8.0, "T": 320.0, "Z": 0.9, "V_p": 0.0},
        noise_sd=0.004,
    )
    proxy = lambda sd: LinearGaussian({"S_c": 1.0}, 0.0, sd)  # noqa: E731
    return ScmSpec(
        (
            NodeSpec("v", G_, (), LinearGaussian({}, 0.25, 0.03), latent=True),
            NodeSpec("p_e", G_, (), LinearGaussian({}, 8.0, 1.5), latent=True, unit="MPa"),
            NodeSpec("u_p", E_, (), LinearGaussian({}, 1.0, 0.3)),
            NodeSpec("S_V", G_, (), LinearGaussian({}, 30.0, 3.0), unit="MPa"),
            NodeSpec(
                "Q_p", T_, ("v", "u_p"),
                PhysicsFormula("prepad_volume", {"v": "v", "u_p": "u_p"},
                               {"c1": 1.0, "c2": 0.5, "dp_T": 20.0, "H": 12.0, "G": 1.0}, noise_sd=5.0),
                unit="m3",
            ),
            NodeSpec(
                "p_F", G_, ("v", "S_V"),
                PhysicsFormula("breakdown_stress_poro", {"v": "v", "S_V": "S_V"},
                               {"S_hi": 10.0, "A_pe": 1.0, "p_s": 10.0, "sigma_T": 5.0}, noise_sd=1.0),
                unit="MPa",
            ),
            NodeSpec("S_g", G_, (), LinearGaussian({}, 0.6, 0.035)),
            NodeSpec("S_c", G_, ("S_g", "p_e"), content, unit="m3/t"),
            NodeSpec("Sc_log", G_, ("S_c",), proxy(0.003), unit="m3/t"),
            NodeSpec("Sc_core", G_, ("S_c",), proxy(0.003), unit="m3/t"),
            NodeSpec("Sc_desorb", G_, ("S_c",), proxy(0.003), unit="m3/t"),
            NodeSpec("K", G_, (), LinearGaussian({}, 1.0, 0.15), unit="mD"),
            NodeSpec("h", G_, (), LinearGaussian({}, 10.0, 1.2), unit="m"),
            NodeSpec("q_g", O_, ("K", "h", "p_e", "p_F"), gas_rate, unit="m3/d"),
        ),
        name="FIG7",
    )


#: long names of the 21-variable field layout, keyed by column abbreviation
CBM21_LABELS = {
    "Perf_Thick": "Perforated Interval Thickness",
    "Prop_Inte": "Proppant Intensity",
    "Tol_Prop": "Total Volume of Proppant",
    "Tol_Frac_Fild": "Total Volume of Fracturing Fluid",
    "Liq_Prep": "Liquid Volume of Prepad",
    "Max_Disp": "Maximum Displacement Volume",
    "Liq_Sand": "Liquid Volume of Sand-Loaden",
    "Max_Prop_Conc": "Maximum Proppant Concentration",
    "Break_Stre": "Breakdown Stress",
    "Liq_Raio_Sand": "Liquid Ratio of Sand-Loaden",
    "Max_Hori_Stre": "Maximum Horizontal Principal Stress",
    "Min_Hori_Stre": "Minimum Horizontal Principal Stress",
    "Liq_Raio_Prep": "Liquid Ratio of Prepad",
    "Vert_Stre": "Vertical Stress",
    "Gas_Cont": "Gas Content",
    "Rese_Stre": "Reservoir Stress",
    "Ratio_Desorp": "Ratio of Critical Desorption to Reservoir Stress",
    "Gas_Satu": "Gas Saturation",
    "Perm": "Permeability",
    "Avg_Prop_Conc": "Average Proppant Concentration",
    "Gas_Prod": "Gas Production",
}


def _cbm21() -> ScmSpec:
    # geological and engineering clusters joined only through the latent
    # Poisson ratio shared by prepad volume and breakdown stress
    lg = LinearGaussian
    ratio = lambda q: PhysicsFormula("volume_ratio", {"Q": q, "Q_f": "Tol_Frac_Fild"}, noise_sd=0.02)  # noqa: E731
    return ScmSpec(
        (
            NodeSpec("v", G_, (), lg({}, 0.25, 0.03), latent=True),
            NodeSpec("p_e", G_, (), lg({}, 8.0, 1.5), latent=True, unit="MPa"),
            NodeSpec("Q_r", E_, (), lg({}, 60.0, 10.0), latent=True, unit="m3"),
            NodeSpec("Perf_Thick", E_, (), lg({}, 6.0, 1.0), unit="m"),
            NodeSpec("Vert_Stre", G_, (), lg({}, 30.0, 3.0), unit="MPa"),
            NodeSpec("Min_Hori_Stre", G_, (), lg({}, 15.0, 2.0), unit="MPa"),
            NodeSpec("Max_Hori_Stre", G_, ("Min_Hori_Stre",), lg({"Min_Hori_Stre": 1.2}, 4.0, 1.5), unit="MPa"),
            NodeSpec(
                "Break_Stre", G_, ("v", "Vert_Stre", "Max_Hori_Stre", "Min_Hori_Stre"),
                lg({"v": 100.0, "Vert_Stre": 0.6, "Max_Hori_Stre": 0.5, "Min_Hori_Stre": -0.3}, 0.0, 1.0),
                unit="MPa",
            ),
            NodeSpec("u_p", E_, (), lg({}, 1.0, 0.3), latent=True),
            NodeSpec(
                "Liq_Prep", E_, ("v", "u_p"),
                PhysicsFormula("prepad_volume", {"v": "v", "u_p": "u_p"},
                               {"c1": 1.0, "c2": 0.5, "dp_T": 20.0, "H": 12.0, "G": 1.0}, noise_sd=5.0),
                unit="m3",
            ),
            NodeSpec("Liq_Sand", E_, ("Perf_Thick", "Q_r"), lg({"Perf_Thick": 40.0, "Q_r": 1.0}, 200.0, 30.0), unit="m3"),
            NodeSpec(
                "Tol_Frac_Fild", E_, ("Liq_Prep", "Liq_Sand", "Q_r"),
                PhysicsFormula("volume_total", {"Q_p": "Liq_Prep", "Q_s": "Liq_Sand", "Q_r": "Q_r"}, noise_sd=20.0),
                unit="m3",
            ),
            NodeSpec("Liq_Raio_Prep", E_, ("Liq_Prep", "Tol_Frac_Fild"), ratio("Liq_Prep")),
            NodeSpec("Liq_Raio_Sand", E_, ("Liq_Sand", "Tol_Frac_Fild"), ratio("Liq_Sand")),
            NodeSpec("Max_Disp", E_, ("Tol_Frac_Fild",), lg({"Tol_Frac_Fild": 0.01}, 4.0, 0.5), unit="m3/min"),
            NodeSpec("Tol_Prop", E_, ("Liq_Sand",), lg({"Liq_Sand": 0.1}, 10.0, 4.0), unit="m3"),
            NodeSpec("Prop_Inte", E_, ("Tol_Prop", "Perf_Thick"), lg({"Tol_Prop": 0.2, "Perf_Thick": -0.5}, 5.0, 0.5), unit="m3/m"),
            NodeSpec("Avg_Prop_Conc", E_, ("Tol_Prop",), lg({"Tol_Prop": 0.5}, 5.0, 2.0), unit="%"),
            NodeSpec("Max_Prop_Conc", E_, ("Avg_Prop_Conc",), Monotone("softplus", {"Avg_Prop_Conc": 0.3}, 1.0, 0.5), unit="%"),
            NodeSpec("Gas_Satu", G_, (), lg({}, 0.6, 0.05)),
            NodeSpec(
                "Gas_Cont", G_, ("Gas_Satu", "p_e"),
                PhysicsFormula("gas_content", {"S_g": "Gas_Satu", "p_e": "p_e"},
                               {"phi": 0.05, "T_0": 300.0, "p_0": 8.0, "T": 320.0, "Z": 0.9, "V_p": 10.0}, noise_sd=0.002),
                unit="m3/t",
            ),
            NodeSpec("Rese_Stre", G_, ("p_e",), lg({"p_e": 1.0}, 0.0, 0.5), unit="MPa"),
            NodeSpec("Ratio_Desorp", G_, ("Gas_Cont", "Rese_Stre"), lg({"Gas_Cont": 8.0, "Rese_Stre": -0.05}, -80.0, 0.05)),
            NodeSpec("Perm", G_, (), lg({}, 1.0, 0.15), unit="mD"),
            NodeSpec(
                "Gas_Prod", O_, ("Perm", "p_e", "Break_Stre", "Perf_Thick"),
                PhysicsFormula(
                    "gas_production",
                    {"K": "Perm", "h": "Perf_Thick", "p_e": "p_e", "S": "Break_Stre"},
                    {"alpha": 1.0, "p_wf": 3.0, "B_g": 1.0, "mu_g": 1.0, "r_e": 200.0, "r_w": 0.1},
                    {"S": (0.25, -55.0 * 0.25)},
                    noise_sd=0.4,
                ),
                unit="m3/d",
            ),
        ),
        name="CBM21",
    )


PRESET_FIG8A = _fig8a()
PRESET_FIG8B = _fig8b()
PRESET_FIG7 = _fig7()

PRESET_CBM21 = _cbm21()

PRESETS: dict[str, ScmSpec] = {
    "FIG8A": PRESET_FIG8A,
    "FIG8B": PRESET_FIG8B,
    "FIG7": PRESET_FIG7,
    "CBM21": PRESET_CBM21,
}

#: observed variables of PRESET_FIG7 that play the prepad-volume and
#: breakdown-stress parts
FIG7_TREATMENT = "Q_p"
FIG7_BREAKDOWN = "p_F"


def preset(name: str, seed: int = 0) -> ScmSpec:
    try:
        return PRESETS[name.upper()].with_seed(seed)
    except KeyError:
        raise ScmError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def random_linear_gaussian_spec(d: int, max_parents: int = 2, seed: int = 0, weight_range=(0.5, 1.5)) -> ScmSpec:
    """Random sparse linear-Gaussian SCM over ``X1 .. Xd``.

    Node ``j`` takes between 0 and ``min(max_parents, j - 1)`` parents drawn
    uniformly from earlier nodes; weights have random sign and magnitude in
    ``weight_range``; noise is standard normal. The last node is tagged as
    the output, the rest as geological factors.
    """
    if d < 1:
        raise ValueError("d must be positive")
    rng = np.random.default_rng(seed)
    lo, hi = weight_range
    names = [f"X{i + 1}" for i in range(d)]
    nodes = []
    for j, name in enumerate(names):
        k = int(rng.integers(0, min(max_parents, j) + 1))
        pa = sorted(rng.choice(j, size=k, replace=False).tolist()) if k else []
        weights = {names[i]: float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi)) for i in pa}
        role = O_ if j == d - 1 else G_
        nodes.append(NodeSpec(name, role, tuple(names[i] for i in pa), LinearGaussian(weights, 0.0, 1.0)))
    return ScmSpec(tuple(nodes), seed=seed, hide_latents=False, name=f"random-d{d}")
