"""
A two-qubit circuit as a network layer
======================================

Build the qubit-efficient circuit that loads a 3-dim feature vector onto
two qubits, evaluate it, and differentiate it with the parameter-shift rule.
"""
import numpy as np

from hqsl import qlayer

spec = qlayer.build_catalog_circuit(6)
print(spec.draw())
print(f"\nqubits {spec.num_qubits}, parameters {spec.num_params}, depth {spec.depth}\n")

# The same layout comes out of the general generator.
assert qlayer.build_qubit_efficient(2, 3).gates == spec.gates

###############################################################################
# Forward pass: one <Y> per qubit for every input row.
layer = qlayer.QuantumLayer(spec, seed=0)
z = np.array([[0.3, -1.2, 2.0], [1.0, 0.0, 0.5]])
print("outputs\n", layer.forward(z))

###############################################################################
# Parameter-shift Jacobians versus central differences.
jp, jz = layer.jacobians(z)
h = 1e-6
fd = np.empty_like(jz)
for j in range(3):
    up, dn = z.copy(), z.copy()
    up[:, j] += h
    dn[:, j] -= h
    fd[:, j] = (layer.forward(up) - layer.forward(dn)) / (2 * h)
print("max |shift - finite difference| on inputs:", np.abs(jz - fd).max())
print("circuit evaluations so far:", layer.evaluations)

###############################################################################
# Rotations are 2 pi periodic, so a huge shift of an input barely moves the
# output. This is what the Laplace defense relies on.
shifted = z + 4 * np.pi
print("output change after +4 pi:", np.abs(layer.forward(shifted) - layer.forward(z)).max())

###############################################################################
# Shot-based estimates converge on the analytic values.
shots = qlayer.QuantumLayer(spec, params=layer.theta.value, eval_mode="shots", shots=1000, seed=0)
print("1000-shot estimate\n", shots.forward(z))
