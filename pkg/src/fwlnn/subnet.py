"""Sub-network method: train small feed-forward fragments, then wire them together.

Fragments are trained in exact float arithmetic (no pulse noise) as one
hidden layer of logsig units over an optionally sparse input connectivity,
feeding a single output neuron. ``compose`` splices fragments into one
netlist: a fragment input fed by a wire disappears and its outgoing synapses
are re-sourced from the wire's source with the wire's delay added.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import network, optics
from .errors import CompositionError, InvalidArgument, TrainingFailure
from .network import Netlist, Neuron, Synapse


@dataclass(frozen=True)
class Budget:
    max_neurons: int
    max_synapses: int
    layers: int

    def __post_init__(self):
        if min(self.max_neurons, self.max_synapses, self.layers) < 1:
            raise InvalidArgument("budget entries must be positive")


@dataclass(frozen=True)
class SubTaskSpec:
    name: str
    target: Callable[[np.ndarray], np.ndarray]  # (n, k) -> (n,)
    n_inputs: int
    budget: Budget
    target_mse: float
    low: tuple[float, ...] | None = None
    high: tuple[float, ...] | None = None
    output_kind: str = "sum-squash"
    # input indices seen by each hidden unit; None picks a budget-filling layout
    connectivity: tuple[tuple[int, ...], ...] | None = None
    input_names: tuple[str, ...] | None = None
    # draws (n, k) training points; None samples the box uniformly
    sampler: Callable[[np.random.Generator, int], np.ndarray] | None = field(default=None, compare=False)

    def __post_init__(self):
        if not self.target_mse > 0:
            raise InvalidArgument("target mse must be positive")
        if self.n_inputs < 1:
            raise InvalidArgument("a sub-task needs at least one input")
        if self.output_kind not in ("sum-squash", "sum-linear"):
            raise InvalidArgument(f"unsupported output kind {self.output_kind!r}")

    def names(self) -> tuple[str, ...]:
        return self.input_names or tuple(f"in{i}" for i in range(self.n_inputs))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        if self.sampler is not None:
            return np.asarray(self.sampler(rng, n), dtype=np.float64)
        lo = np.array(self.low if self.low is not None else [0.0] * self.n_inputs)
        hi = np.array(self.high if self.high is not None else [1.0] * self.n_inputs)
        return lo + (hi - lo) * rng.random((n, self.n_inputs))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.2
    epochs: int = 100
    batch: int = 32
    seed: int = 0
    init_scale: float = 0.5
    momentum: float = 0.9
    l2: float = 0.0  # penalty on output weights; small weights keep pulse noise small
    samples: int = 20000

    def __post_init__(self):
        if not (self.learning_rate > 0 and self.epochs > 0 and self.batch > 0 and self.init_scale > 0
                and self.samples > 0):
            raise InvalidArgument("training settings must be positive")
        if not 0.0 <= self.momentum < 1.0 or self.l2 < 0:
            raise InvalidArgument("momentum must lie in [0, 1) and l2 must be non-negative")


@dataclass(frozen=True)
class MseReport:
    mse: float
    max_abs_error: float
    n_samples: int


def default_connectivity(n_inputs: int, budget: Budget) -> tuple[tuple[int, ...], ...]:
    """Fill the synapse budget: every hidden unit gets one input round-robin,
    then the leftover synapses go to the first units until they see every input."""
    if budget.layers == 2:
        return ()
    hidden = budget.max_neurons - 1
    spare = budget.max_synapses - 2 * hidden
    if hidden < 1 or spare < 0:
        raise InvalidArgument(f"budget {budget} cannot hold a hidden layer")
    units = [[j % n_inputs] for j in range(hidden)]
    for u in units:
        for i in range(n_inputs):
            if spare and i not in u:
                u.append(i)
                spare -= 1
    return tuple(tuple(sorted(u)) for u in units)


class _Params:
    def __init__(self, mask: np.ndarray, rng: np.random.Generator, scale: float, linear: bool):
        h, k = mask.shape
        self.mask = mask
        self.w = rng.uniform(-scale, scale, (h, k)) * mask
        self.b = rng.uniform(-scale, scale, h)
        self.v = rng.uniform(-scale, scale, h)
        self.c = 0.0 if linear else float(rng.uniform(-scale, scale))
        self.linear = linear

    def forward(self, x: np.ndarray):
        hid = optics.squash(x @ self.w.T + self.b) if self.w.size else np.zeros((x.shape[0], 0))
        s = hid @ self.v + self.c
        return hid, (s if self.linear else optics.squash(s))

    def copy(self):
        other = object.__new__(_Params)
        other.__dict__ = {k: (v.copy() if isinstance(v, np.ndarray) else v) for k, v in self.__dict__.items()}
        return other


def _direct_params(k: int, rng, scale, linear):
    p = _Params(np.zeros((0, k)), rng, scale, linear)
    p.v = rng.uniform(-scale, scale, k)  # direct input-to-output weights
    return p


def train_subnet(spec: SubTaskSpec, cfg: TrainConfig = TrainConfig()) -> Netlist:
    """Minibatch gradient descent (with momentum) on a fixed sample; returns the best fragment seen."""
    rng = np.random.default_rng(cfg.seed)
    k = spec.n_inputs
    linear = spec.output_kind == "sum-linear"
    direct = spec.budget.layers == 2
    if direct:
        if spec.budget.max_synapses < k:
            raise InvalidArgument("budget too small for direct wiring")
        params = _direct_params(k, rng, cfg.init_scale, linear)
    else:
        conn = spec.connectivity if spec.connectivity is not None else default_connectivity(k, spec.budget)
        mask = np.zeros((len(conn), k))
        for j, ins in enumerate(conn):
            mask[j, list(ins)] = 1.0
        _check_budget(len(conn) + 1, int(mask.sum()) + len(conn), spec.budget)
        if spec.budget.layers != 3:
            raise InvalidArgument("only one hidden layer is supported")
        params = _Params(mask, rng, cfg.init_scale, linear)

    x = np.clip(spec.sample(rng, cfg.samples), 0.0, network.ACT_MAX)
    y = np.asarray(spec.target(x), dtype=np.float64)
    xv = np.clip(spec.sample(rng, 4096), 0.0, network.ACT_MAX)
    yv = np.asarray(spec.target(xv), dtype=np.float64)

    def loss(p):
        return float(np.mean((_predict(p, xv, direct) - yv) ** 2))

    best, best_loss = params.copy(), loss(params)
    vel = {name: np.zeros_like(np.asarray(getattr(params, name), dtype=float)) for name in ("w", "b", "v", "c")}
    n = x.shape[0]
    for _ in range(cfg.epochs):
        order = rng.permutation(n)
        for lo in range(0, n, cfg.batch):
            idx = order[lo:lo + cfg.batch]
            grads = _gradients(params, x[idx], y[idx], direct, cfg.l2)
            for name, g in grads.items():
                vel[name] = cfg.momentum * vel[name] - cfg.learning_rate * g
                setattr(params, name, getattr(params, name) + vel[name])
            params.w *= params.mask
        cur = loss(params)
        if cur < best_loss:
            best, best_loss = params.copy(), cur
    frag = _to_netlist(best, spec, direct)
    report = verify_subnet(frag, spec, 10_000, seed=cfg.seed + 1)
    if report.mse > spec.target_mse:
        raise TrainingFailure(f"sub-task {spec.name!r} missed its target {spec.target_mse}", report.mse)
    return frag


def _predict(p: _Params, x, direct):
    if direct:
        s = x @ p.v + p.c
        return s if p.linear else optics.squash(s)
    return p.forward(x)[1]


def _gradients(p: _Params, x, y, direct, l2):
    n = x.shape[0]
    if direct:
        s = x @ p.v + p.c
        out = s if p.linear else optics.squash(s)
        d = 2.0 * (out - y) / n
        if not p.linear:
            d = d * out * (1.0 - out)
        return {"v": x.T @ d + 2 * l2 * p.v, "c": d.sum(), "w": 0.0 * p.w, "b": 0.0 * p.b}
    hid, out = p.forward(x)
    d = 2.0 * (out - y) / n
    if not p.linear:
        d = d * out * (1.0 - out)
    dh = np.outer(d, p.v) * hid * (1.0 - hid)
    return {"v": hid.T @ d + 2 * l2 * p.v, "c": d.sum(), "w": (dh.T @ x) * p.mask, "b": dh.sum(axis=0)}


def _check_budget(neurons: int, synapses: int, budget: Budget):
    if neurons > budget.max_neurons or synapses > budget.max_synapses:
        raise InvalidArgument(f"{neurons} neurons / {synapses} synapses exceed budget {budget}")


def _to_netlist(p: _Params, spec: SubTaskSpec, direct: bool) -> Netlist:
    names = spec.names()
    neurons = [Neuron(nm, "input", 0) for nm in names]
    syn = []
    if direct:
        neurons.append(Neuron("out", spec.output_kind, 1, float(p.c)))
        syn += [Synapse(nm, "out", float(p.v[i])) for i, nm in enumerate(names)]
    else:
        h = p.w.shape[0]
        for j in range(h):
            neurons.append(Neuron(f"h{j}", "sum-squash", 1, float(p.b[j])))
            syn += [Synapse(names[i], f"h{j}", float(p.w[j, i])) for i in range(len(names)) if p.mask[j, i]]
        neurons.append(Neuron("out", spec.output_kind, 2, float(p.c)))
        syn += [Synapse(f"h{j}", "out", float(p.v[j])) for j in range(h)]
    net = Netlist(neurons, syn, names, ["out"], name=spec.name)
    st = net.stats()
    _check_budget(st.neurons, st.synapses, spec.budget)
    return net


def verify_subnet(fragment: Netlist, spec: SubTaskSpec, n_samples: int = 10_000, seed: int = 12345) -> MseReport:
    """Exact-execution error of a fragment against its sub-task on fresh points."""
    rng = np.random.default_rng(seed)
    x = np.clip(spec.sample(rng, n_samples), 0.0, network.ACT_MAX)
    got = network.evaluate_batch(fragment, x)[:, 0]
    err = got - np.asarray(spec.target(x), dtype=np.float64)
    return MseReport(float(np.mean(err ** 2)), float(np.max(np.abs(err))), n_samples)


@dataclass(frozen=True)
class Wire:
    src: str  # "fragment/neuron" producing the signal
    dst: str  # "fragment/input" consuming it
    delay: int = 0


@dataclass(frozen=True)
class WiringPlan:
    wires: tuple[Wire, ...] = ()
    # external input name -> fragment inputs it drives
    inputs: tuple[tuple[str, tuple[str, ...]], ...] = ()
    # external output name -> fragment neuron
    outputs: tuple[tuple[str, str], ...] = ()
    encoding: str = "generic-intensity"

    def to_json(self) -> dict:
        return {
            "edges": [{"from": w.src, "to": w.dst, "delay": w.delay} for w in self.wires],
            "bindings": {"inputs": {k: list(v) for k, v in self.inputs}, "outputs": dict(self.outputs)},
            "encoding": self.encoding,
        }

    @classmethod
    def from_json(cls, doc: dict) -> "WiringPlan":
        b = doc.get("bindings", {})
        return cls(tuple(Wire(e["from"], e["to"], int(e.get("delay", 0))) for e in doc.get("edges", [])),
                   tuple((k, tuple(v)) for k, v in b.get("inputs", {}).items()),
                   tuple(b.get("outputs", {}).items()), doc.get("encoding", "generic-intensity"))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)


def compose(fragments: Sequence[Netlist], plan: WiringPlan, name: str = "") -> Netlist:
    """Splice named fragments into one netlist with namespaced ids ``fragment/neuron``."""
    frag_names = [f.name for f in fragments]
    if len(set(frag_names)) != len(frag_names) or any(not n for n in frag_names):
        raise CompositionError("fragments need distinct, non-empty names")
    neurons: dict[str, Neuron] = {}
    kinds = {}
    for f in fragments:
        for n in f.neurons:
            qid = f"{f.name}/{n.id}"
            neurons[qid] = Neuron(qid, n.kind, n.layer, n.bias, n.initial)
            kinds[qid] = n.kind

    # every consumed fragment input maps to (source id, extra delay)
    feed: dict[str, tuple[str, int]] = {}
    for w in plan.wires:
        if w.src not in kinds:
            raise CompositionError(f"wire source {w.src!r} does not exist")
        if kinds.get(w.dst) != "input":
            raise CompositionError(f"wire target {w.dst!r} is not a fragment input")
        if w.dst in feed:
            raise CompositionError(f"fragment input {w.dst!r} is driven twice")
        if w.delay < 0:
            raise CompositionError(f"wire {w.src}->{w.dst} has negative delay")
        feed[w.dst] = (w.src, w.delay)
    ext_inputs = []
    for ext, ports in plan.inputs:
        for p in ports:
            if kinds.get(p) != "input":
                raise CompositionError(f"binding {ext!r} targets {p!r}, which is not a fragment input")
            if p in feed:
                raise CompositionError(f"fragment input {p!r} is both wired and bound")
            feed[p] = (ext, 0)
        ext_inputs.append(ext)
    if len(set(ext_inputs)) != len(ext_inputs) or set(ext_inputs) & set(kinds):
        raise CompositionError("external input names must be unique and not clash with neuron ids")
    dangling = [q for q, k in kinds.items() if k == "input" and q not in feed]
    if dangling:
        raise CompositionError(f"unconnected fragment inputs: {dangling}")

    def resolve(qid: str) -> tuple[str, int]:
        total, seen = 0, []
        while qid in feed:
            if qid in seen:
                raise CompositionError(f"wiring loop through inputs {seen}")
            seen.append(qid)
            qid, d = feed[qid]
            total += d
        return qid, total

    out_neurons = [Neuron(e, "input", 0) for e in ext_inputs]
    out_neurons += [n for q, n in neurons.items() if kinds[q] != "input"]
    synapses = []
    for f in fragments:
        for s in f.synapses:
            src, extra = resolve(f"{f.name}/{s.src}")
            synapses.append(Synapse(src, f"{f.name}/{s.dst}", s.weight, s.delay + extra))
    outputs = []
    for ext, q in plan.outputs:
        if q not in kinds or kinds[q] == "input":
            raise CompositionError(f"output binding {ext!r} names {q!r}, which is not a computing neuron")
        outputs.append(q)
    net = Netlist(out_neurons, synapses, ext_inputs, outputs, plan.encoding, name)
    diags = network.validate(net)
    if diags:
        raise CompositionError("; ".join(d.message for d in diags))
    return net.with_layers()
