"""Circuit catalog, qubit-efficient loader and the quantum layer.

A circuit is a flat list of :class:`GateOp`. Rotation angles are bound
either to a layer input (:class:`Input`), a trainable parameter
(:class:`Param`) or a constant.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Tuple, Union

import numpy as np

from . import qsim
from .neural.layers import Layer, Parameter

SHIFT = np.pi / 2
SHIFT_CONSTANT = 0.5  # r in r*[f(x + pi/(4r)) - f(x - pi/(4r))]


@dataclass(frozen=True)
class Input:
    index: int


@dataclass(frozen=True)
class Param:
    index: int


@dataclass(frozen=True)
class Const:
    angle: float


Source = Union[Input, Param, Const]


@dataclass(frozen=True)
class GateOp:
    kind: str
    qubits: Tuple[int, ...]
    source: Optional[Source] = None


@dataclass(frozen=True)
class CircuitSpec:
    num_qubits: int
    gates: Tuple[GateOp, ...]
    num_inputs: int
    num_params: int
    name: str = ""

    def __post_init__(self):
        seen = set()
        for g in self.gates:
            if any(not 0 <= q < self.num_qubits for q in g.qubits):
                raise ValueError(f"gate {g} touches a qubit outside the register")
            if g.kind == "CZ":
                if len(g.qubits) != 2 or g.source is not None:
                    raise ValueError("CZ takes two qubits and no angle")
                continue
            if len(g.qubits) != 1 or g.source is None:
                raise ValueError(f"{g.kind} needs one qubit and an angle source")
            if isinstance(g.source, Input):
                if g.source.index >= self.num_inputs:
                    raise ValueError(f"input index {g.source.index} >= {self.num_inputs}")
                seen.add(g.source.index)
            elif isinstance(g.source, Param) and g.source.index >= self.num_params:
                raise ValueError(f"param index {g.source.index} >= {self.num_params}")
        missing = set(range(self.num_inputs)) - seen
        if missing:
            raise ValueError(f"inputs {sorted(missing)} are never loaded")

    @property
    def depth(self) -> int:
        """Longest per-qubit gate chain; CZ advances both of its qubits."""
        level = [0] * self.num_qubits
        for g in self.gates:
            new = max(level[q] for q in g.qubits) + 1
            for q in g.qubits:
                level[q] = new
        return max(level)

    @property
    def bound_gates(self) -> Tuple[int, ...]:
        """Indices of gates whose angle comes from an input or a parameter."""
        return tuple(
            i for i, g in enumerate(self.gates) if isinstance(g.source, (Input, Param))
        )

    @property
    def num_cz(self) -> int:
        return sum(g.kind == "CZ" for g in self.gates)

    def draw(self) -> str:
        """One text line per qubit; CZ shows as ``@`` on both wires."""
        rows = [[] for _ in range(self.num_qubits)]
        level = [0] * self.num_qubits
        for g in self.gates:
            col = max(level[q] for q in g.qubits)
            for q in g.qubits:
                while len(rows[q]) < col:
                    rows[q].append("")
            if g.kind == "CZ":
                for q in g.qubits:
                    rows[q].append("@")
                    level[q] = col + 1
            else:
                q = g.qubits[0]
                rows[q].append(f"{g.kind}({_source_label(g.source)})")
                level[q] = col + 1
        width = max(level)
        cells = [r + [""] * (width - len(r)) for r in rows]
        colw = [max(len(cells[q][c]) for q in range(self.num_qubits)) for c in range(width)]
        lines = []
        for q, r in enumerate(cells):
            body = "--".join(cell.center(colw[c], "-") for c, cell in enumerate(r))
            lines.append(f"q{q}: -{body}-")
        return "\n".join(lines)


def _source_label(src) -> str:
    if isinstance(src, Input):
        return f"x{src.index + 1}"
    if isinstance(src, Param):
        return f"t{src.index + 1}"
    return f"{src.angle:.3g}"


# --- catalog --------------------------------------------------------------

# Parameterized gate after each loading point cycles through this pattern;
# with three loading points it gives the RZ/RY/RZ of Circuit 6.
PARAM_GATE_CYCLE = ("RZ", "RY")

# Entangler layouts for the 4-qubit circuits 2 and 3.
CIRCUIT2_CZ_PAIRS = ((0, 1), (1, 2), (2, 3))
CIRCUIT3_CZ_PAIRS = ((0, 1), (1, 2), (2, 3), (3, 0))


def _ladder(num_qubits):
    return tuple((q, q + 1) for q in range(num_qubits - 1))


def _interleaved(num_qubits, loads, entangle_pairs):
    """RX(load) -> param gate -> CZ block, repeated; final CZ block omitted.

    ``loads[layer][qubit]`` is the input index loaded at that point.
    """
    gates = []
    p = 0
    n_layers = len(loads)
    for layer in range(n_layers):
        kind = PARAM_GATE_CYCLE[layer % len(PARAM_GATE_CYCLE)]
        for q in range(num_qubits):
            gates.append(GateOp("RX", (q,), Input(loads[layer][q])))
            gates.append(GateOp(kind, (q,), Param(p)))
            p += 1
        if layer < n_layers - 1:
            gates.extend(GateOp("CZ", pair) for pair in entangle_pairs)
    return gates, p


def build_qubit_efficient(num_qubits: int, num_loading_points: int) -> CircuitSpec:
    """Every qubit loads x_1..x_n through RX gates interleaved with trainable rotations."""
    if num_qubits < 1 or num_loading_points < 1:
        raise ValueError("need at least one qubit and one loading point")
    loads = [[j] * num_qubits for j in range(num_loading_points)]
    gates, k = _interleaved(num_qubits, loads, _ladder(num_qubits))
    return CircuitSpec(
        num_qubits,
        tuple(gates),
        num_loading_points,
        k,
        name=f"qubit-efficient(Q={num_qubits}, n={num_loading_points})",
    )


def _u_block(q, sources):
    return [GateOp(kind, (q,), src) for kind, src in zip(("RZ", "RY", "RZ"), sources)]


def _reuploading(layers: int, entangle: bool, name: str) -> CircuitSpec:
    # Each layer applies U(x) = RZ(x3)RY(x2)RZ(x1), then U(theta_i), per qubit.
    gates = []
    p = 0
    for layer in range(layers):
        for q in range(2):
            gates += _u_block(q, [Input(0), Input(1), Input(2)])
            gates += _u_block(q, [Param(p), Param(p + 1), Param(p + 2)])
            p += 3
        if entangle and layer < layers - 1:
            gates.append(GateOp("CZ", (0, 1)))
    return CircuitSpec(2, tuple(gates), 3, p, name=name)


def _circuit8() -> CircuitSpec:
    # Feature x_k enters through a rotation immediately followed by a
    # trainable rotation of the same axis, CZ between stages.
    kinds = ("RZ", "RY", "RZ")
    gates = []
    p = 0
    for stage, kind in enumerate(kinds):
        for q in range(2):
            gates.append(GateOp(kind, (q,), Input(stage)))
            gates.append(GateOp(kind, (q,), Param(p)))
            p += 1
        if stage < 2:
            gates.append(GateOp("CZ", (0, 1)))
    return CircuitSpec(2, tuple(gates), 3, p, name="circuit 8")


def _per_qubit_uploads(num_qubits, uploads, entangle_pairs, name) -> CircuitSpec:
    # Qubit q repeatedly loads feature x_q.
    loads = [list(range(num_qubits)) for _ in range(uploads)]
    gates, k = _interleaved(num_qubits, loads, entangle_pairs)
    return CircuitSpec(num_qubits, tuple(gates), num_qubits, k, name=name)


def _circuit3() -> CircuitSpec:
    gates = [GateOp("RX", (q,), Input(q)) for q in range(4)]
    p = 0
    for q in range(4):
        for kind in ("RZ", "RY", "RZ"):
            gates.append(GateOp(kind, (q,), Param(p)))
            p += 1
    gates += [GateOp("CZ", pair) for pair in CIRCUIT3_CZ_PAIRS]
    return CircuitSpec(4, tuple(gates), 4, p, name="circuit 3")


CATALOG_IDS = tuple(range(1, 11))


def build_catalog_circuit(circuit_id: int) -> CircuitSpec:
    if circuit_id == 1:
        return _per_qubit_uploads(2, 3, ((0, 1),), "circuit 1")
    if circuit_id == 2:
        return _per_qubit_uploads(4, 3, CIRCUIT2_CZ_PAIRS, "circuit 2")
    if circuit_id == 3:
        return _circuit3()
    if circuit_id == 4:
        return _per_qubit_uploads(2, 3, (), "circuit 4")
    if circuit_id == 5:
        return _per_qubit_uploads(2, 4, (), "circuit 5")
    if circuit_id == 6:
        spec = build_qubit_efficient(2, 3)
        return CircuitSpec(spec.num_qubits, spec.gates, spec.num_inputs, spec.num_params, "circuit 6")
    if circuit_id == 7:
        return _reuploading(1, False, "circuit 7")
    if circuit_id == 8:
        return _circuit8()
    if circuit_id == 9:
        return _reuploading(3, True, "circuit 9")
    if circuit_id == 10:
        return _reuploading(3, False, "circuit 10")
    raise ValueError(f"unknown circuit id {circuit_id}")


# --- evaluation -----------------------------------------------------------


def gate_angles(spec: CircuitSpec, z: np.ndarray, params: np.ndarray) -> np.ndarray:
    """Angle of every gate for each row of ``z``; shape ``(B, len(gates))``.

    CZ columns are zero and ignored.
    """
    z = np.atleast_2d(np.asarray(z, dtype=np.float64))
    if z.shape[1] != spec.num_inputs:
        raise ValueError(f"expected {spec.num_inputs} inputs, got {z.shape[1]}")
    params = np.asarray(params, dtype=np.float64)
    if params.shape != (spec.num_params,):
        raise ValueError(f"expected {spec.num_params} parameters, got shape {params.shape}")
    angles = np.zeros((z.shape[0], len(spec.gates)))
    for i, g in enumerate(spec.gates):
        src = g.source
        if isinstance(src, Input):
            angles[:, i] = z[:, src.index]
        elif isinstance(src, Param):
            angles[:, i] = params[src.index]
        elif isinstance(src, Const):
            angles[:, i] = src.angle
    return angles


def run_angles(
    spec: CircuitSpec,
    angles: np.ndarray,
    noise: Optional[qsim.NoiseChannel] = None,
    rng: Optional[np.random.Generator] = None,
) -> np.ndarray:
    """Final states for a batch of per-gate angle rows."""
    states = qsim.init_batch(spec.num_qubits, angles.shape[0])
    noisy = noise is not None and not noise.is_null
    for i, g in enumerate(spec.gates):
        if g.kind == "CZ":
            states = qsim.apply_cz_batch(states, *g.qubits)
            if noisy:
                states = qsim.depolarize_batch(states, g.qubits, noise.p2, rng)
        else:
            states = qsim.apply_rotation_batch(states, g.kind, g.qubits[0], angles[:, i])
            if noisy:
                states = qsim.depolarize_batch(states, g.qubits, noise.p1, rng)
    return states


class QuantumLayer(Layer):
    """Circuit as a network layer: inputs are rotation angles, outputs are <Y> per qubit.

    ``eval_mode`` is ``"analytic"`` or ``"shots"``. In shot mode every circuit
    evaluation (forward and parameter-shift) is sampled with ``shots`` shots.
    """

    def __init__(
        self,
        spec: CircuitSpec,
        params=None,
        seed: int = 0,
        eval_mode: str = "analytic",
        shots: int = 1000,
        noise: Optional[qsim.NoiseChannel] = None,
        name: str = "qlayer",
    ):
        self.spec = spec
        if params is None:
            params = np.random.default_rng(seed).uniform(0.0, 2 * np.pi, spec.num_params)
        params = np.array(params, dtype=np.float64)
        if params.shape != (spec.num_params,):
            raise ValueError(f"expected {spec.num_params} parameters")
        self.theta = Parameter(f"{name}.theta", params)
        self.name = name
        self.shots = shots
        self.eval_mode = eval_mode
        self.noise = noise
        self._rng = np.random.default_rng(seed + 1)
        self.evaluations = 0
        self._cache = None

    # convenience for the single-sample API
    @property
    def params(self) -> np.ndarray:
        return self.theta.value

    @property
    def output_dim(self) -> int:
        return self.spec.num_qubits

    def parameters(self):
        return [self.theta]

    def set_noise(self, noise: Optional[qsim.NoiseChannel]):
        self.noise = noise
        if noise is not None:
            self._rng = np.random.default_rng(noise.rng_seed)

    def _expectations(self, angles: np.ndarray) -> np.ndarray:
        noisy = self.noise is not None and not self.noise.is_null
        reps = self.noise.trajectories if noisy else 1
        self.evaluations += angles.shape[0] * reps
        total = 0.0
        for _ in range(reps):
            states = run_angles(self.spec, angles, self.noise if noisy else None, self._rng)
            if self.eval_mode == "analytic":
                total = total + qsim.expectations_batch(states)
            elif self.eval_mode == "shots":
                total = total + qsim.sample_expectations_batch(states, self.shots, self._rng)
            else:
                raise ValueError(f"unknown evaluation mode {self.eval_mode!r}")
        return total / reps if reps > 1 else total

    def evaluate(self, z) -> np.ndarray:
        """Expectation vectors for a batch ``(B, M)`` (no caching)."""
        return self._expectations(gate_angles(self.spec, z, self.theta.value))

    def forward(self, x, training: bool = False):
        x = np.asarray(x, dtype=np.float64)
        single = x.ndim == 1
        z = np.atleast_2d(x)
        out = self.evaluate(z)
        self._cache = z
        return out[0] if single else out

    def jacobians(self, z) -> Tuple[np.ndarray, np.ndarray]:
        """Parameter-shift Jacobians ``dE/dtheta (B, k, Q)`` and ``dE/dz (B, M, Q)``.

        Each bound gate occurrence is shifted on its own by +-pi/2, so the
        cost is two evaluations per bound gate per sample.
        """
        z = np.atleast_2d(np.asarray(z, dtype=np.float64))
        spec = self.spec
        base = gate_angles(spec, z, self.theta.value)
        bound = spec.bound_gates
        batch = z.shape[0]
        n_shift = len(bound)
        # rows ordered as (shift index, sign, sample)
        shifted = np.tile(base, (2 * n_shift, 1))
        for s, gi in enumerate(bound):
            shifted[(2 * s) * batch : (2 * s + 1) * batch, gi] += SHIFT
            shifted[(2 * s + 1) * batch : (2 * s + 2) * batch, gi] -= SHIFT
        ev = self._expectations(shifted).reshape(n_shift, 2, batch, spec.num_qubits)
        per_gate = SHIFT_CONSTANT * (ev[:, 0] - ev[:, 1])  # (n_shift, B, Q)
        d_theta = np.zeros((batch, spec.num_params, spec.num_qubits))
        d_z = np.zeros((batch, spec.num_inputs, spec.num_qubits))
        for s, gi in enumerate(bound):
            src = spec.gates[gi].source
            if isinstance(src, Param):
                d_theta[:, src.index] += per_gate[s]
            else:
                d_z[:, src.index] += per_gate[s]
        return d_theta, d_z

    def grad_params(self, z) -> np.ndarray:
        """``dE/dtheta`` for one sample, shape ``(k, Q)``."""
        return self.jacobians(z)[0][0]

    def grad_inputs(self, z) -> np.ndarray:
        """``dE/dz`` for one sample, shape ``(M, Q)``."""
        return self.jacobians(z)[1][0]

    def backward(self, grad):
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        grad = np.atleast_2d(np.asarray(grad, dtype=np.float64))
        d_theta, d_z = self.jacobians(self._cache)
        self.theta.grad += np.einsum("bkq,bq->k", d_theta, grad)
        return np.einsum("bmq,bq->bm", d_z, grad)


def forward(layer: QuantumLayer, z) -> np.ndarray:
    return layer.evaluate(np.atleast_2d(z))[0]


def grad_params(layer: QuantumLayer, z) -> np.ndarray:
    return layer.grad_params(z)


def grad_inputs(layer: QuantumLayer, z) -> np.ndarray:
    return layer.grad_inputs(z)
