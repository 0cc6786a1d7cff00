"""Network builders, task generators and the changing-weight reference learner.

Signed weight estimates live on the unit interval as ``s = (W + 4) / 8``, so
``W`` spans [-4, 4]. Boolean levels are 0 and ``HIGH`` (1 is not a legal
activation).
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from importlib import resources

import numpy as np

from . import subnet
from .errors import InvalidArgument
from .network import Netlist, Neuron, Synapse
from .optics import squash

HIGH = 0.9375
W_RANGE = 4.0
DEFAULT_ETA = 1.5
# the increment signal is 0.5 + ACC_GAIN * (eta / 8) * e * x; the accumulator divides it back out
ACC_GAIN = 8.0


def to_signal(w):
    return (np.asarray(w) + W_RANGE) / (2 * W_RANGE)


def from_signal(s):
    return 2 * W_RANGE * np.asarray(s) - W_RANGE


@dataclass(frozen=True)
class PlanTranTask:
    w: float
    seed: int = 0

    def __post_init__(self):
        if not -W_RANGE <= self.w <= W_RANGE:
            raise InvalidArgument(f"task weight {self.w} outside [-4, 4]")

    @classmethod
    def random(cls, seed: int) -> "PlanTranTask":
        return cls(float(np.random.default_rng([seed, 7]).uniform(-W_RANGE, W_RANGE)), seed)


@dataclass(frozen=True)
class BooleanFunction:
    table: tuple[int, int, int, int]  # outputs for (x1, x2) = 00, 01, 10, 11
    separable: bool = True
    name: str = ""

    def __call__(self, x1: int, x2: int) -> int:
        return self.table[2 * x1 + x2]


@dataclass(frozen=True)
class DataPair:
    x: tuple[float, ...]
    y: float


_NAMES = {
    (0, 0, 0, 0): "always-false", (1, 1, 1, 1): "always-true", (0, 0, 0, 1): "and", (0, 1, 1, 1): "or",
    (1, 1, 1, 0): "nand", (1, 0, 0, 0): "nor", (0, 0, 1, 1): "x1", (0, 1, 0, 1): "x2",
    (1, 1, 0, 0): "not-x1", (1, 0, 1, 0): "not-x2", (0, 0, 1, 0): "x1-and-not-x2",
    (0, 1, 0, 0): "not-x1-and-x2", (1, 0, 1, 1): "x1-or-not-x2", (1, 1, 0, 1): "not-x1-or-x2",
    (0, 1, 1, 0): "xor", (1, 0, 0, 1): "xnor",
}


def threshold_realizable(table) -> bool:
    """Exhaustive search for (w1, w2, b) with step(w1*x1 + w2*x2 + b) == table."""
    grid = np.arange(-2, 2.5, 0.5)
    pts = [(0, 0), (0, 1), (1, 0), (1, 1)]
    for w1, w2, b in itertools.product(grid, grid, grid):
        if all((w1 * a + w2 * c + b > 0) == bool(t) for (a, c), t in zip(pts, table)):
            return True
    return False


def all_boolean_functions() -> list[BooleanFunction]:
    return [BooleanFunction(t, threshold_realizable(t), _NAMES[t]) for t in itertools.product((0, 1), repeat=4)]


def enumerate_separable() -> list[BooleanFunction]:
    return [f for f in all_boolean_functions() if f.separable]


def boolean_function(name: str) -> BooleanFunction:
    for f in all_boolean_functions():
        if f.name == name:
            return f
    raise InvalidArgument(f"unknown Boolean function {name!r}")


def gen_plantran_data(task: PlanTranTask, n: int) -> list[DataPair]:
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    xs = np.random.default_rng([task.seed, 11]).random(n)
    ys = squash(task.w * xs)
    return [DataPair((float(x),), float(y)) for x, y in zip(xs, np.atleast_1d(ys))]


def gen_boolean_data(fn: BooleanFunction, n: int, seed: int = 0) -> list[DataPair]:
    if n < 1:
        raise InvalidArgument("n must be at least 1")
    bits = np.random.default_rng([seed, 13]).integers(0, 2, (n, 2))
    return [DataPair((HIGH * a, HIGH * b), HIGH * fn(a, b)) for a, b in bits]


def gen_product_data(n: int, seed: int = 0) -> list[DataPair]:
    uv = np.random.default_rng([seed, 17]).random((n, 2))
    return [DataPair((float(u), float(v)), float(u * v)) for u, v in uv]


# ---------------------------------------------------------------- Σ-∧ cell

def build_sigma_and(a: float = 1.0, b: float = 0.0, c: float = 0.0) -> Netlist:
    """Signal-times-signal cell: a product node plus a linear mixer a*uv + b*u + c*v."""
    neurons = [Neuron("u", "input"), Neuron("v", "input"), Neuron("p", "product", 1), Neuron("out", "sum-linear", 2)]
    syn = [Synapse("u", "p", 1.0), Synapse("v", "p", 1.0), Synapse("p", "out", a), Synapse("u", "out", b),
           Synapse("v", "out", c)]
    return Netlist(neurons, syn, ["u", "v"], ["out"], "sigma-and", "sigma-and")


# ---------------------------------------------------------------- uMULT

UMULT_BUDGET = subnet.Budget(13, 30, 3)
UMULT_TRAIN = subnet.TrainConfig(epochs=60, l2=3e-4)


def umult_spec(target_mse: float = 0.0026) -> subnet.SubTaskSpec:
    return subnet.SubTaskSpec("umult", lambda x: x[:, 0] * x[:, 1], 2, UMULT_BUDGET, target_mse,
                              output_kind="sum-linear", input_names=("u", "v"))


def build_umult(cfg: subnet.TrainConfig = UMULT_TRAIN) -> Netlist:
    net = subnet.train_subnet(umult_spec(), cfg)
    return Netlist(net.neurons, net.synapses, net.inputs, net.outputs, "generic-sp", "umult")


# ---------------------------------------------------------------- PlanTran

PLANTRAN_TRAIN = subnet.TrainConfig(epochs=150, l2=1e-5)


def _plant_sampler(rng: np.random.Generator, n: int) -> np.ndarray:
    s, x = rng.random(n), rng.random(n)
    y = squash(rng.uniform(-W_RANGE, W_RANGE, n) * x)
    return np.column_stack([s, x, y])


def forward_spec(target_mse: float = 5e-4) -> subnet.SubTaskSpec:
    """Prediction from the weight signal and the input."""
    return subnet.SubTaskSpec(
        "forward", lambda z: squash(from_signal(z[:, 0]) * z[:, 1]), 2, subnet.Budget(7, 18, 3), target_mse,
        output_kind="sum-squash", input_names=("s", "x"))


def increment_target(z: np.ndarray, eta: float) -> np.ndarray:
    s, x, y = z[:, 0], z[:, 1], z[:, 2]
    yhat = squash(from_signal(s) * x)
    e = (y - yhat) * yhat * (1 - yhat)
    return 0.5 + ACC_GAIN * (eta / (2 * W_RANGE)) * e * x


def increment_spec(eta: float = DEFAULT_ETA, target_mse: float = 5e-4) -> subnet.SubTaskSpec:
    """Error and gradient step in one fragment: 0.5 + gain * eta/8 * (y - yhat) yhat (1 - yhat) x."""
    # |(y - yhat) yhat (1 - yhat)| peaks at 4/27
    if not 0 < ACC_GAIN * eta * (4 / 27) / (2 * W_RANGE) < 0.5:
        raise InvalidArgument(f"eta {eta} would push the increment signal out of [0, 1)")
    return subnet.SubTaskSpec(
        "increment", lambda z: increment_target(z, eta), 3, subnet.Budget(21, 80, 3), target_mse,
        output_kind="sum-linear", input_names=("s", "x", "y"), sampler=_plant_sampler)


def accumulator_fragment(name: str = "acc") -> Netlist:
    """s <- s_prev + (inc - 0.5) / gain, starting from s = 0.5 (W = 0)."""
    neurons = [Neuron("prev", "input"), Neuron("inc", "input"),
               Neuron("s", "sum-linear", 1, -0.5 / ACC_GAIN, initial=0.5)]
    syn = [Synapse("prev", "s", 1.0), Synapse("inc", "s", 1.0 / ACC_GAIN)]
    return Netlist(neurons, syn, ["prev", "inc"], ["s"], name=name)


def plantran_plan() -> subnet.WiringPlan:
    return subnet.WiringPlan(
        wires=(subnet.Wire("acc/s", "acc/prev", 1), subnet.Wire("increment/out", "acc/inc", 0),
               subnet.Wire("acc/s", "forward/s", 1), subnet.Wire("acc/s", "increment/s", 1)),
        inputs=(("x", ("forward/x", "increment/x")), ("y", ("increment/y",))),
        outputs=(("yhat", "forward/out"),),
        encoding="generic-sp",
    )


def build_plantran(cfg: subnet.TrainConfig = PLANTRAN_TRAIN, eta: float = DEFAULT_ETA) -> Netlist:
    fwd = subnet.train_subnet(forward_spec(), cfg)
    inc = subnet.train_subnet(increment_spec(eta), cfg)
    return subnet.compose([fwd, inc, accumulator_fragment()], plantran_plan(), "plantran")


# ---------------------------------------------------------------- BooLean

def build_boolean(eta: float = DEFAULT_ETA) -> Netlist:
    """Three coupled single-parameter learners (w1, w2, bias) sharing one Σ-∧ forward/error path.

    The error (A - B) * g with A = y(1 - yhat), B = (1 - y) yhat and g = yhat (1 - yhat) is
    formed by product nodes, then pipelined through delay-1 registers into the accumulators.
    """
    if not eta > 0:
        raise InvalidArgument("eta must be positive")
    step = eta / (2 * W_RANGE)
    one = 1.0 / HIGH  # lamp weight giving a unit level
    n: list[Neuron] = [Neuron(i, "input") for i in ("x1", "x2", "y")]
    e: list[Synapse] = []

    def add(nid, kind, inbound, bias=0.0, initial=0.0):
        n.append(Neuron(nid, kind, 0, bias, initial))
        e.extend(Synapse(src, nid, w, d) for src, w, d in inbound)

    add("lamp", "sum-linear", [], bias=HIGH)
    add("p1", "product", [("s1", 1.0, 1), ("x1", 1.0, 0)])
    add("p2", "product", [("s2", 1.0, 1), ("x2", 1.0, 0)])
    add("ybar", "sum-linear", [("lamp", one, 0), ("y", -1.0, 0)])
    add("yhat", "sum-squash", [("p1", 8.0, 0), ("p2", 8.0, 0), ("sb", 8.0, 1), ("x1", -4.0, 0),
                               ("x2", -4.0, 0), ("lamp", -4.0 * one, 0)])
    add("comp", "sum-linear", [("lamp", one, 0), ("yhat", -1.0, 0)])
    add("bpart", "product", [("ybar", 1.0, 0), ("yhat", 1.0, 0)])
    add("apart", "product", [("y", 1.0, 0), ("comp", 1.0, 0)])
    add("slope", "product", [("yhat", 1.0, 0), ("comp", 1.0, 0)])
    # pipeline stage boundaries
    for src in ("apart", "bpart", "slope", "x1", "x2"):
        add(f"{src}_r", "sum-linear", [(src, 1.0, 1)])
    add("ag", "product", [("apart_r", 1.0, 0), ("slope_r", 1.0, 0)])
    add("bg", "product", [("bpart_r", 1.0, 0), ("slope_r", 1.0, 0)])
    for src in ("ag", "bg", "x1_r", "x2_r"):
        add(f"{src}_r", "sum-linear", [(src, 1.0, 1)])
    for part in ("ag", "bg"):
        for x in ("x1", "x2"):
            add(f"{part}{x}", "product", [(f"{part}_r", 1.0, 0), (f"{x}_r_r", 1.0, 0)])
    for src in ("agx1", "bgx1", "agx2", "bgx2", "ag_r", "bg_r"):
        add(f"{src}_r", "sum-linear", [(src, 1.0, 1)])
    add("s1", "sum-linear", [("s1", 1.0, 1), ("agx1_r", step, 0), ("bgx1_r", -step, 0)], initial=0.5)
    add("s2", "sum-linear", [("s2", 1.0, 1), ("agx2_r", step, 0), ("bgx2_r", -step, 0)], initial=0.5)
    add("sb", "sum-linear", [("sb", 1.0, 1), ("ag_r_r", step, 0), ("bg_r_r", -step, 0)], initial=0.5)
    return Netlist(n, e, ["x1", "x2", "y"], ["yhat"], "sigma-and", "boolean").with_layers()


# ---------------------------------------------------------------- golden fixtures

GOLDEN = ("umult", "plantran", "boolean", "sigma-and")


def load_golden(name: str) -> Netlist:
    if name not in GOLDEN:
        raise InvalidArgument(f"no golden netlist named {name!r}")
    text = resources.files("fwlnn").joinpath("fixtures", f"{name}.json").read_text()
    return Netlist.loads(text)


def save_golden(directory, names=GOLDEN) -> list[str]:
    """Rebuild the bundled netlists into ``directory`` (the package fixture dir by default in the CLI)."""
    from pathlib import Path

    out = []
    for name in names:
        path = Path(directory) / f"{name}.json"
        path.write_text(build(name).dumps() + "\n")
        out.append(str(path))
    return out


def build(name: str, eta: float = DEFAULT_ETA) -> Netlist:
    if name == "umult":
        return build_umult()
    if name == "plantran":
        return build_plantran(eta=eta)
    if name == "boolean":
        return build_boolean(eta)
    if name == "sigma-and":
        return build_sigma_and()
    raise InvalidArgument(f"unknown network {name!r}")


# ---------------------------------------------------------------- reference learner

@dataclass
class BaselineRecord:
    mse: np.ndarray
    nc: int | None
    weights: np.ndarray  # final weight estimate(s)


def baseline_online_backprop(task: PlanTranTask | BooleanFunction, eta: float, steps: int, seed: int = 0,
                             threshold: float = 0.02, window: int = 3, clip: bool = True) -> BaselineRecord:
    """Changing-weight online gradient descent on the same data stream the fixed-weight nets see.

    Weights start at 0 and, like the fixed-weight estimate, are kept inside [-4, 4].
    """
    from .harness import detect_convergence  # late import: harness depends on zoo

    if not (eta > 0 and steps > 0):
        raise InvalidArgument("eta and steps must be positive")
    if isinstance(task, PlanTranTask):
        data = gen_plantran_data(task, steps)
        w = np.zeros(1)
    else:
        data = gen_boolean_data(task, steps, seed)
        w = np.zeros(3)
    mse = np.empty(steps)
    for t, pair in enumerate(data):
        x = np.array(pair.x + ((HIGH,) if w.size == 3 else ()))
        # bias input matches the fixed-weight net's constant lamp: (8 sb - 4) * 1
        if w.size == 3:
            x[2] = 1.0
        yhat = squash(float(w @ x))
        mse[t] = (pair.y - yhat) ** 2
        w = w + eta * (pair.y - yhat) * yhat * (1 - yhat) * x
        if clip:
            w = np.clip(w, -W_RANGE, W_RANGE)
    return BaselineRecord(mse, detect_convergence(mse, threshold, window), w)
