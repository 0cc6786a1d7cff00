"""Recurrent netlists with per-synapse integer delays, executed one macro-step at a time.

Within a macro-step every zero-delay synapse is evaluated feed-forward (the
zero-delay subgraph must be acyclic); a synapse of delay ``d`` reads the value
its source produced ``d`` steps earlier.

Signal paths by encoding:

* ``generic-intensity``: every neuron drives one emitter with its activation
  as an analog level; synapses into one depth group form a single optical
  pass (``optics.matvec``) with the configured quantization and noise.
* ``generic-sp``: as above, but each neuron's emitter sends one Bernoulli
  pulse train per step, shared by all its outgoing synapses; detectors
  integrate the whole train.
* ``sigma-and``: every synapse carries its own pulse train drawn on a lane
  keyed by (seed, step, synapse index). Product neurons AND the attenuated
  trains of their two inputs; sum neurons integrate and re-emit.
"""

from __future__ import annotations

import json
from collections import defaultdict
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import networkx as nx
import numpy as np

from . import optics, pulse
from .errors import InvalidArgument
from .optics import IDEAL, NOISELESS, NoiseSpec, QuantizationSpec, WeightMask

NEURON_KINDS = ("input", "sum-squash", "sum-linear", "product")
ENCODINGS = ("generic-intensity", "generic-sp", "sigma-and")

# largest storable activation: signals live in [0, 1)
ACT_MAX = float(np.nextafter(1.0, 0.0))

_TAG_EMIT, _TAG_EDGE, _TAG_INIT = 1, 2, 3


@dataclass(frozen=True)
class Neuron:
    id: str
    kind: str
    layer: int = 0
    bias: float = 0.0
    initial: float = 0.0  # activation assumed for steps before the first


@dataclass(frozen=True)
class Synapse:
    src: str
    dst: str
    weight: float
    delay: int = 0


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str


@dataclass(frozen=True)
class NetStats:
    layers: int
    neurons: int  # excludes input neurons
    synapses: int
    inputs: int

    def as_tuple(self) -> tuple[int, int, int]:
        return (self.layers, self.neurons, self.synapses)


def _hex(x: float) -> str:
    return float(x).hex()


def _unhex(x) -> float:
    return float.fromhex(x) if isinstance(x, str) else float(x)


@dataclass(frozen=True, eq=False)
class Netlist:
    neurons: tuple[Neuron, ...]
    synapses: tuple[Synapse, ...]
    inputs: tuple[str, ...]
    outputs: tuple[str, ...]
    encoding: str = "generic-intensity"
    name: str = ""
    _plan: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "neurons", tuple(self.neurons))
        object.__setattr__(self, "synapses", tuple(self.synapses))
        object.__setattr__(self, "inputs", tuple(self.inputs))
        object.__setattr__(self, "outputs", tuple(self.outputs))
        if self.encoding not in ENCODINGS:
            raise InvalidArgument(f"unknown encoding {self.encoding!r}")

    def __eq__(self, other):
        if not isinstance(other, Netlist):
            return NotImplemented
        return (self.neurons, self.synapses, self.inputs, self.outputs, self.encoding, self.name) == (
            other.neurons, other.synapses, other.inputs, other.outputs, other.encoding, other.name)

    def neuron(self, nid: str) -> Neuron:
        return self.by_id()[nid]

    def by_id(self) -> dict[str, Neuron]:
        return {n.id: n for n in self.neurons}

    def inbound(self, nid: str) -> list[Synapse]:
        return [s for s in self.synapses if s.dst == nid]

    def stats(self) -> NetStats:
        n_in = sum(1 for n in self.neurons if n.kind == "input")
        layers = len({n.layer for n in self.neurons})
        return NetStats(layers, len(self.neurons) - n_in, len(self.synapses), n_in)

    def with_layers(self) -> "Netlist":
        """Copy with every neuron's layer set to its zero-delay depth."""
        depth = zero_delay_depth(self)
        return replace(self, neurons=tuple(replace(n, layer=depth[n.id]) for n in self.neurons),
                       _plan={})

    def renamed(self, name: str) -> "Netlist":
        return replace(self, name=name, _plan={})

    def is_feedforward(self) -> bool:
        return all(s.delay == 0 for s in self.synapses)

    def to_json(self) -> dict:
        return {
            "name": self.name,
            "encoding": self.encoding,
            "inputs": list(self.inputs),
            "outputs": list(self.outputs),
            "neurons": [{"id": n.id, "kind": n.kind, "layer": n.layer, "bias": _hex(n.bias),
                         "initial": _hex(n.initial)} for n in self.neurons],
            "synapses": [{"from": s.src, "to": s.dst, "weight": _hex(s.weight), "delay": s.delay}
                         for s in self.synapses],
        }

    @classmethod
    def from_json(cls, doc: dict) -> "Netlist":
        neurons = [Neuron(d["id"], d["kind"], int(d.get("layer", 0)), _unhex(d.get("bias", 0.0)),
                          _unhex(d.get("initial", 0.0))) for d in doc["neurons"]]
        synapses = [Synapse(d["from"], d["to"], _unhex(d["weight"]), int(d.get("delay", 0)))
                    for d in doc["synapses"]]
        return cls(neurons, synapses, doc["inputs"], doc["outputs"], doc.get("encoding", "generic-intensity"),
                   doc.get("name", ""))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1)

    @classmethod
    def loads(cls, text: str) -> "Netlist":
        return cls.from_json(json.loads(text))


def zero_delay_graph(net: Netlist) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(n.id for n in net.neurons)
    g.add_edges_from((s.src, s.dst) for s in net.synapses if s.delay == 0)
    return g


def zero_delay_depth(net: Netlist) -> dict[str, int]:
    """Longest zero-delay path ending at each neuron; sources have depth 0."""
    g = zero_delay_graph(net)
    depth = {}
    for nid in nx.topological_sort(g):
        preds = list(g.predecessors(nid))
        depth[nid] = 1 + max(depth[p] for p in preds) if preds else 0
    return depth


def validate(net: Netlist) -> list[Diagnostic]:
    """All invariant violations of ``net``; empty when the net is executable."""
    out: list[Diagnostic] = []
    ids = [n.id for n in net.neurons]
    seen = set()
    for nid in ids:
        if nid in seen:
            out.append(Diagnostic("duplicate-id", f"neuron id {nid!r} appears more than once"))
        seen.add(nid)
    for n in net.neurons:
        if n.kind not in NEURON_KINDS:
            out.append(Diagnostic("unknown-kind", f"neuron {n.id!r} has kind {n.kind!r}"))
        if not 0.0 <= n.initial < 1.0:
            out.append(Diagnostic("bad-initial", f"neuron {n.id!r} initial {n.initial} outside [0, 1)"))
    kinds = {n.id: n.kind for n in net.neurons}
    for i, s in enumerate(net.synapses):
        for end in (s.src, s.dst):
            if end not in kinds:
                out.append(Diagnostic("dangling-edge", f"synapse {i} ({s.src}->{s.dst}) references missing {end!r}"))
        if s.delay < 0 or int(s.delay) != s.delay:
            out.append(Diagnostic("bad-delay", f"synapse {i} has delay {s.delay}"))
        if kinds.get(s.dst) == "input":
            out.append(Diagnostic("input-has-inbound", f"synapse {i} drives input neuron {s.dst!r}"))
    for p in net.inputs:
        if kinds.get(p) != "input":
            out.append(Diagnostic("bad-port", f"input port {p!r} is not an input neuron"))
    for p in net.outputs:
        if p not in kinds:
            out.append(Diagnostic("bad-port", f"output port {p!r} does not exist"))
    for nid, k in kinds.items():
        if k == "input" and nid not in net.inputs:
            out.append(Diagnostic("bad-port", f"input neuron {nid!r} is not listed as an input"))
    arity = defaultdict(int)
    for s in net.synapses:
        arity[s.dst] += 1
    for nid, k in kinds.items():
        if k == "product" and arity[nid] != 2:
            out.append(Diagnostic("product-arity", f"product neuron {nid!r} has {arity[nid]} inbound synapses"))
    g = nx.DiGraph()
    g.add_nodes_from(kinds)
    g.add_edges_from((s.src, s.dst) for s in net.synapses if s.delay == 0 and s.src in kinds and s.dst in kinds)
    for comp in nx.strongly_connected_components(g):
        if len(comp) > 1 or any(g.has_edge(c, c) for c in comp):
            out.append(Diagnostic("zero-delay-cycle", f"zero-delay loop through {sorted(comp)}"))
    return out


def check(net: Netlist) -> None:
    diags = validate(net)
    if diags:
        raise InvalidArgument("invalid netlist: " + "; ".join(d.message for d in diags))


@dataclass(frozen=True)
class ExecConfig:
    np: int = pulse.DEFAULT_NP
    seed: int = 0
    quant: QuantizationSpec = IDEAL
    noise: NoiseSpec = NOISELESS
    encoding: str | None = None  # overrides the netlist's own encoding

    def __post_init__(self):
        if int(self.np) != self.np or self.np < 1:
            raise InvalidArgument(f"np must be a positive integer, got {self.np}")
        if self.encoding is not None and self.encoding not in ENCODINGS:
            raise InvalidArgument(f"unknown encoding {self.encoding!r}")

    @classmethod
    def exact(cls) -> "ExecConfig":
        """Float evaluation: analog levels, no quantization, no noise."""
        return cls(np=1, encoding="generic-intensity")


@dataclass
class NetState:
    """Delay lines: row ``k`` of each history holds the values from step ``step - 1 - k``."""

    step: int
    activations: np.ndarray  # (depth, neurons)
    emitted: np.ndarray  # (depth, neurons); what the emitter actually sent

    def buffer_depths(self, net: Netlist) -> dict[str, int]:
        deepest = defaultdict(int)
        for s in net.synapses:
            deepest[s.src] = max(deepest[s.src], s.delay)
        return {n.id: deepest[n.id] for n in net.neurons}


@dataclass
class Trace:
    output_ids: tuple[str, ...]
    outputs: list[dict[str, float]] = field(default_factory=list)
    taps: list[dict[str, float]] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.outputs)

    def matrix(self) -> np.ndarray:
        return np.array([[rec[o] for o in self.output_ids] for rec in self.outputs]).reshape(
            len(self.outputs), len(self.output_ids))


@dataclass
class _Group:
    members: np.ndarray  # neuron indices computed in this group
    kinds: list[str]
    columns: list[tuple[int, int]]  # (source index, delay) feeding the mask
    mask: WeightMask | None
    products: list[tuple[int, tuple[int, int, float, int], tuple[int, int, float, int]]]


def _compile(net: Netlist) -> dict:
    plan = net._plan
    if plan:
        return plan
    check(net)
    index = {n.id: i for i, n in enumerate(net.neurons)}
    depth = zero_delay_depth(net)
    max_delay = max([s.delay for s in net.synapses], default=0)
    inbound = defaultdict(list)
    for e, s in enumerate(net.synapses):
        inbound[index[s.dst]].append((index[s.src], s.delay, s.weight, e))
    groups = []
    for d in range(max(depth.values(), default=0) + 1):
        members = [index[n.id] for n in net.neurons if depth[n.id] == d and n.kind != "input"]
        if not members:
            continue
        sums = [i for i in members if net.neurons[i].kind != "product"]
        columns = sorted({(src, dl) for i in sums for (src, dl, _, _) in inbound[i]})
        col_of = {c: j for j, c in enumerate(columns)}
        w = np.zeros((len(sums), len(columns)))
        for r, i in enumerate(sums):
            for src, dl, wt, _ in inbound[i]:
                w[r, col_of[(src, dl)]] += wt
        mask = WeightMask.from_signed(w) if sums and columns else None
        prods = [(i, *inbound[i]) for i in members if net.neurons[i].kind == "product"]
        groups.append(_Group(np.array(sums, dtype=int), [net.neurons[i].kind for i in sums], columns, mask, prods))
    plan.update(
        index=index,
        depth=max(1, max_delay),
        groups=groups,
        inputs=np.array([index[p] for p in net.inputs], dtype=int),
        outputs=np.array([index[p] for p in net.outputs], dtype=int),
        bias=np.array([n.bias for n in net.neurons]),
        initial=np.array([n.initial for n in net.neurons]),
        inbound=dict(inbound),
    )
    return plan


def _clamp(x):
    return np.clip(x, 0.0, ACT_MAX)


def _emit_sp(values: np.ndarray, idx: Iterable[int], cfg: ExecConfig, tag: int, step: int) -> np.ndarray:
    out = []
    for v, i in zip(values, idx):
        t = pulse.uniforms(pulse.StreamId(cfg.seed, pulse.make_lane(tag, step, int(i))), cfg.np) < v
        out.append(t.mean())
    return np.array(out)


def initial_state(net: Netlist, cfg: ExecConfig | None = None) -> NetState:
    cfg = cfg or ExecConfig()
    plan = _compile(net)
    depth = plan["depth"]
    acts = np.tile(plan["initial"], (depth, 1))
    emitted = acts.copy()
    if _encoding(net, cfg) == "generic-sp":
        n = len(net.neurons)
        for k in range(depth):
            emitted[k] = _emit_sp(acts[k], range(n), cfg, _TAG_INIT, k)
    return NetState(0, acts, emitted)


def _encoding(net: Netlist, cfg: ExecConfig) -> str:
    return cfg.encoding or net.encoding


def _edge_train(value: float, edge: int, step: int, cfg: ExecConfig) -> pulse.PulseTrain:
    return pulse.encode(value, cfg.np, pulse.StreamId(cfg.seed, pulse.make_lane(_TAG_EDGE, step, edge)))


def step(net: Netlist, state: NetState, external: Sequence[float], cfg: ExecConfig,
         ) -> tuple[NetState, np.ndarray]:
    """Advance one macro-step; returns the new state and the output activations."""
    plan = _compile(net)
    ext = np.asarray(external, dtype=np.float64).reshape(-1)
    if ext.shape[0] != len(net.inputs):
        raise InvalidArgument(f"expected {len(net.inputs)} inputs, got {ext.shape[0]}")
    if not np.all((ext >= 0.0) & (ext < 1.0)):
        raise InvalidArgument("external inputs must lie in [0, 1)")
    enc = _encoding(net, cfg)
    t = state.step
    n = len(net.neurons)
    act = np.zeros(n)
    emit = np.zeros(n)
    act[plan["inputs"]] = ext
    if enc == "generic-sp":
        emit[plan["inputs"]] = _emit_sp(ext, plan["inputs"], cfg, _TAG_EMIT, t)
    else:
        emit[plan["inputs"]] = ext

    def past(src: int, delay: int, which: np.ndarray) -> float:
        return which[delay - 1, src]

    for g_no, g in enumerate(plan["groups"]):
        ordinal = t * 4096 + g_no
        if g.members.size:
            if enc == "sigma-and":
                sums = _sigma_sums(net, plan, g, act, state, t, cfg)
            else:
                x = np.array([emit[src] if d == 0 else past(src, d, state.emitted) for src, d in g.columns])
                q = cfg.quant if enc == "generic-intensity" else IDEAL
                sums = optics.matvec(g.mask, x, q, NOISELESS) if g.mask is not None else np.zeros(g.members.size)
            if cfg.noise.sigma > 0.0:
                sums = sums + _detector_noise(cfg.noise, ordinal, g.members.size)
            sums = sums + plan["bias"][g.members]
            vals = np.array([optics.squash(s) if k == "sum-squash" else s for s, k in zip(sums, g.kinds)])
            act[g.members] = _clamp(vals)
        for i, a, b in g.products:
            act[i] = _clamp(_product(a, b, enc, emit, act, state, t, cfg))
        done = np.concatenate([g.members, np.array([p[0] for p in g.products], dtype=int)])
        if enc == "generic-sp":
            emit[done] = _emit_sp(act[done], done, cfg, _TAG_EMIT, t)
        else:
            emit[done] = act[done]

    new = NetState(t + 1, np.vstack([act, state.activations[:-1]]), np.vstack([emit, state.emitted[:-1]]))
    return new, act[plan["outputs"]].copy()


def _detector_noise(noise: NoiseSpec, ordinal: int, m: int) -> np.ndarray:
    key = ((noise.seed & (2**64 - 1)) << 64) | ordinal
    return np.random.Generator(np.random.Philox(key=key)).normal(0.0, noise.sigma, m)


def _source_value(src: int, delay: int, act: np.ndarray, state: NetState) -> float:
    return act[src] if delay == 0 else state.activations[delay - 1, src]


def _sigma_sums(net, plan, g: _Group, act, state, t, cfg) -> np.ndarray:
    out = np.zeros(g.members.size)
    for r, i in enumerate(g.members):
        total = 0.0
        for src, d, w, e in plan["inbound"].get(i, []):
            total += w * pulse.decode(_edge_train(_source_value(src, d, act, state), e, t, cfg))
        out[r] = total
    return out


def _product(a, b, enc, emit, act, state, t, cfg) -> float:
    if enc == "sigma-and":
        trains = []
        for src, d, w, e in (a, b):
            if not 0.0 <= w <= 1.0:
                raise InvalidArgument(f"product synapse weight {w} cannot be realized by attenuation")
            trains.append(pulse.attenuate(_edge_train(_source_value(src, d, act, state), e, t, cfg), w))
        return pulse.decode(pulse.and_product(*trains))
    vals = [w * (emit[src] if d == 0 else state.emitted[d - 1, src]) for src, d, w, _ in (a, b)]
    return vals[0] * vals[1]


def run(net: Netlist, inputs: Sequence[Sequence[float]], cfg: ExecConfig, taps: Sequence[str] = (),
        state: NetState | None = None) -> Trace:
    """Fold ``step`` over an input sequence starting from the initial state."""
    plan = _compile(net)
    state = state or initial_state(net, cfg)
    tap_idx = [(tid, plan["index"][tid]) for tid in taps]
    trace = Trace(tuple(net.outputs))
    for x in inputs:
        state, out = step(net, state, x, cfg)
        trace.outputs.append(dict(zip(net.outputs, map(float, out))))
        if tap_idx:
            trace.taps.append({tid: float(state.activations[0, i]) for tid, i in tap_idx})
    return trace


def evaluate(net: Netlist, x: Sequence[float]) -> np.ndarray:
    """Exact single-step output of a feed-forward net."""
    _, out = step(net, initial_state(net, ExecConfig.exact()), x, ExecConfig.exact())
    return out


def evaluate_batch(net: Netlist, xs) -> np.ndarray:
    """Exact outputs of a feed-forward net for many input rows at once (vectorized)."""
    plan = _compile(net)
    if not net.is_feedforward():
        raise InvalidArgument("batch evaluation needs a feed-forward net")
    xs = np.atleast_2d(np.asarray(xs, dtype=np.float64))
    vals = np.zeros((xs.shape[0], len(net.neurons)))
    vals[:, plan["inputs"]] = xs
    for g in plan["groups"]:
        if g.members.size:
            w = g.mask.signed() if g.mask is not None else np.zeros((g.members.size, 0))
            cols = np.array([src for src, _ in g.columns], dtype=int)
            s = vals[:, cols] @ w.T + plan["bias"][g.members]
            for r, (i, k) in enumerate(zip(g.members, g.kinds)):
                vals[:, i] = _clamp(optics.squash(s[:, r]) if k == "sum-squash" else s[:, r])
        for i, a, b in g.products:
            vals[:, i] = _clamp(a[2] * vals[:, a[0]] * b[2] * vals[:, b[0]])
    return vals[:, plan["outputs"]]
