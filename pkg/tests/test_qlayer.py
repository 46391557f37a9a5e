import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hqsl import qlayer, qsim
from hqsl.qlayer import CircuitSpec, Const, GateOp, Input, Param, QuantumLayer
from hqsl.qsim import Gate

CIRCUIT_COUNTS = {6: (6, 8), 7: (6, 6), 8: (6, 8), 9: (18, 20), 10: (18, 18)}


def fd_jacobians(layer, z, h=1e-5):
    """Central differences of the layer output w.r.t. theta and z (one sample)."""
    z = np.asarray(z, dtype=float)
    theta = layer.theta.value
    d_theta = np.zeros((theta.size, layer.output_dim))
    for i in range(theta.size):
        old = theta[i]
        theta[i] = old + h
        up = layer.evaluate(z[None])[0]
        theta[i] = old - h
        dn = layer.evaluate(z[None])[0]
        theta[i] = old
        d_theta[i] = (up - dn) / (2 * h)
    d_z = np.zeros((z.size, layer.output_dim))
    for j in range(z.size):
        e = np.zeros_like(z)
        e[j] = h
        d_z[j] = (layer.evaluate((z + e)[None])[0] - layer.evaluate((z - e)[None])[0]) / (2 * h)
    return d_theta, d_z


# --- catalog ---------------------------------------------------------------


@pytest.mark.parametrize("cid", sorted(CIRCUIT_COUNTS))
def test_circuit_params_and_depth(cid):
    spec = qlayer.build_catalog_circuit(cid)
    assert (spec.num_params, spec.depth) == CIRCUIT_COUNTS[cid]
    assert spec.num_inputs == 3 and spec.num_qubits == 2


def test_circuit7_and_10_have_no_entanglers():
    assert qlayer.build_catalog_circuit(7).num_cz == 0
    assert qlayer.build_catalog_circuit(10).num_cz == 0
    assert qlayer.build_catalog_circuit(9).num_cz == 2


@pytest.mark.parametrize("cid", qlayer.CATALOG_IDS)
def test_every_catalog_circuit_loads_all_inputs(cid):
    spec = qlayer.build_catalog_circuit(cid)
    loaded = {g.source.index for g in spec.gates if isinstance(g.source, Input)}
    assert loaded == set(range(spec.num_inputs))


def test_circuits_1_to_5_shapes():
    shapes = {cid: (s.num_qubits, s.num_inputs, s.num_params)
              for cid in range(1, 6) for s in [qlayer.build_catalog_circuit(cid)]}
    assert shapes == {1: (2, 2, 6), 2: (4, 4, 12), 3: (4, 4, 12), 4: (2, 2, 6), 5: (2, 2, 8)}


def test_unknown_circuit_id():
    with pytest.raises(ValueError):
        qlayer.build_catalog_circuit(11)


def test_circuit6_layout():
    spec = qlayer.build_catalog_circuit(6)
    kinds = [g.kind for g in spec.gates if g.qubits == (0,)]
    assert kinds == ["RX", "RZ", "RX", "RY", "RX", "RZ"]
    # two CZ blocks, none after the last loading point
    assert spec.gates[-1].kind != "CZ" and spec.num_cz == 2


def test_qubit_efficient_reproduces_circuit6():
    a = qlayer.build_qubit_efficient(2, 3)
    b = qlayer.build_catalog_circuit(6)
    assert a.gates == b.gates and a.num_params == b.num_params and a.num_inputs == b.num_inputs


def test_qubit_efficient_deep_and_single_qubit():
    assert qlayer.build_qubit_efficient(2, 6).num_params == 12
    assert qlayer.build_qubit_efficient(1, 3).num_cz == 0
    spec = qlayer.build_qubit_efficient(3, 4)
    assert spec.num_params == 12 and spec.num_inputs == 4


def test_spec_validation():
    with pytest.raises(ValueError):
        CircuitSpec(1, (GateOp("RX", (0,), Input(1)),), 1, 0)
    with pytest.raises(ValueError):  # input 1 never loaded
        CircuitSpec(1, (GateOp("RX", (0,), Input(0)),), 2, 0)
    with pytest.raises(ValueError):
        CircuitSpec(1, (GateOp("RY", (0,), Param(3)),), 0, 1)


def test_draw_one_line_per_qubit():
    text = qlayer.build_catalog_circuit(9).draw()
    lines = text.splitlines()
    assert len(lines) == 2 and all(line.startswith(f"q{i}") for i, line in enumerate(lines))
    assert "RZ(x1)" in lines[0] and "@" in lines[1]


# --- forward ---------------------------------------------------------------


def test_zero_input_zero_params_gives_zero():
    layer = QuantumLayer(qlayer.build_catalog_circuit(6), params=np.zeros(6))
    np.testing.assert_array_equal(qlayer.forward(layer, [0, 0, 0]), [0.0, 0.0])


def test_circuit6_against_hand_built_gate_list():
    rng = np.random.default_rng(5)
    z, th = rng.uniform(-3, 3, 3), rng.uniform(0, 6, 6)
    gates = []
    for layer, kind in enumerate(["RZ", "RY", "RZ"]):
        for q in range(2):
            gates.append(Gate("RX", q, angle=z[layer]))
            gates.append(Gate(kind, q, angle=th[2 * layer + q]))
        if layer < 2:
            gates.append(Gate("CZ", 1, 0))
    psi = qsim.init_state(2)
    for g in gates:
        psi = qsim.apply_gate(psi, g)
    ref = qsim.expectation_vector(psi)
    layer = QuantumLayer(qlayer.build_catalog_circuit(6), params=th)
    np.testing.assert_allclose(qlayer.forward(layer, z), ref, atol=1e-14)


def test_outputs_bounded():
    rng = np.random.default_rng(0)
    layer = QuantumLayer(qlayer.build_catalog_circuit(6), seed=1)
    out = layer.evaluate(rng.uniform(-10, 10, (500, 3)))
    assert out.shape == (500, 2) and np.all(np.abs(out) <= 1 + 1e-12)


@settings(max_examples=40, deadline=None)
@given(st.lists(st.floats(-20, 20), min_size=3, max_size=3), st.integers(0, 2), st.integers(0, 1000))
def test_two_pi_periodicity(z, j, seed):
    layer = QuantumLayer(qlayer.build_catalog_circuit(6), seed=seed)
    z = np.array(z)
    shifted = z.copy()
    shifted[j] += 2 * np.pi
    np.testing.assert_allclose(qlayer.forward(layer, shifted), qlayer.forward(layer, z), atol=1e-12)


def test_dimension_mismatch():
    layer = QuantumLayer(qlayer.build_catalog_circuit(6))
    with pytest.raises(ValueError):
        qlayer.forward(layer, [0.0, 1.0])
    with pytest.raises(ValueError):
        QuantumLayer(qlayer.build_catalog_circuit(6), params=np.zeros(5))


def test_shot_mode_close_to_analytic():
    spec = qlayer.build_catalog_circuit(7)
    exact = QuantumLayer(spec, seed=2)
    shots = QuantumLayer(spec, params=exact.params, eval_mode="shots", shots=20000, seed=2)
    z = np.random.default_rng(1).uniform(-2, 2, (20, 3))
    assert np.abs(shots.evaluate(z) - exact.evaluate(z)).max() < 5 / np.sqrt(20000)


def test_bad_eval_mode():
    layer = QuantumLayer(qlayer.build_catalog_circuit(7), eval_mode="tomography")
    with pytest.raises(ValueError):
        layer.evaluate(np.zeros((1, 3)))


# --- gradients -------------------------------------------------------------


def test_single_rx_input_gradient_is_minus_cos():
    spec = CircuitSpec(1, (GateOp("RX", (0,), Input(0)),), 1, 0)
    layer = QuantumLayer(spec)
    # <Y> = -sin z
    assert qlayer.grad_inputs(layer, [0.0])[0, 0] == pytest.approx(-1.0, abs=1e-14)
    for z in np.linspace(-3, 3, 7):
        assert qlayer.grad_inputs(layer, [z])[0, 0] == pytest.approx(-np.cos(z), abs=1e-14)


@pytest.mark.parametrize("cid", qlayer.CATALOG_IDS)
def test_parameter_shift_matches_finite_differences(cid):
    spec = qlayer.build_catalog_circuit(cid)
    rng = np.random.default_rng(cid)
    for trial in range(10):
        layer = QuantumLayer(spec, seed=trial)
        z = rng.uniform(-np.pi, np.pi, spec.num_inputs)
        fd_t, fd_z = fd_jacobians(layer, z)
        assert np.abs(qlayer.grad_params(layer, z) - fd_t).max() <= 1e-6
        assert np.abs(qlayer.grad_inputs(layer, z) - fd_z).max() <= 1e-6


def test_locality_on_product_state():
    layer = QuantumLayer(qlayer.build_catalog_circuit(6), params=np.zeros(6))
    g = qlayer.grad_params(layer, [0.0, 0.0, 0.0])
    # odd params sit on qubit 1; qubit 0's output cannot see them here
    np.testing.assert_allclose(g[1::2, 0], 0.0, atol=1e-15)
    np.testing.assert_allclose(g[0::2, 1], 0.0, atol=1e-15)


def test_const_gates_carry_no_gradient():
    spec = CircuitSpec(1, (GateOp("RY", (0,), Const(0.3)), GateOp("RX", (0,), Input(0)), GateOp("RZ", (0,), Param(0))), 1, 1)
    layer = QuantumLayer(spec, params=[0.4])
    fd_t, fd_z = fd_jacobians(layer, np.array([0.9]))
    np.testing.assert_allclose(qlayer.grad_params(layer, [0.9]), fd_t, atol=1e-8)
    np.testing.assert_allclose(qlayer.grad_inputs(layer, [0.9]), fd_z, atol=1e-8)


def test_evaluation_count_is_two_per_bound_gate():
    spec = qlayer.build_catalog_circuit(6)
    layer = QuantumLayer(spec)
    layer.jacobians(np.zeros((4, 3)))
    assert layer.evaluations == 4 * 2 * len(spec.bound_gates) == 4 * 2 * 12


def test_backward_chains_upstream_gradient():
    spec = qlayer.build_catalog_circuit(8)
    layer = QuantumLayer(spec, seed=3)
    rng = np.random.default_rng(0)
    z = rng.normal(size=(5, 3))
    w = rng.normal(size=(5, 2))
    layer.forward(z, training=True)
    dz = layer.backward(w)
    d_theta, d_z = layer.jacobians(z)
    np.testing.assert_allclose(dz, np.einsum("bmq,bq->bm", d_z, w), atol=1e-14)
    np.testing.assert_allclose(layer.theta.grad, np.einsum("bkq,bq->k", d_theta, w), atol=1e-14)


def test_backward_before_forward():
    with pytest.raises(RuntimeError):
        QuantumLayer(qlayer.build_catalog_circuit(6)).backward(np.ones((1, 2)))


def test_noisy_layer_averages_trajectories():
    spec = qlayer.build_catalog_circuit(6)
    clean = QuantumLayer(spec, seed=0)
    noisy = QuantumLayer(spec, params=clean.params, seed=0)
    noisy.set_noise(qsim.NoiseChannel(0.05, 0.05, rng_seed=1, trajectories=8))
    z = np.random.default_rng(2).uniform(-2, 2, (50, 3))
    diff = np.abs(noisy.evaluate(z) - clean.evaluate(z))
    assert 0 < diff.mean() < 0.5
    assert noisy.evaluations == 50 * 8
