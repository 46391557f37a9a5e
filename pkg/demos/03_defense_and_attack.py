"""
Laplace noise against a reconstruction attack
=============================================

Train an image model with a quantum front and its classical twin, then add
Laplace noise with a large mean to the smashed data. The circuit barely
notices the noise, while the dense front and an attacker's decoder do.
"""
from hqsl import attack as atk
from hqsl import config as cfgmod
from hqsl import defense as dfn
from hqsl import experiments as ex
from hqsl.splitproto import evaluate

cfg = cfgmod.resolve({"variant": 2, "dataset": {"synthetic": "shapes", "n": 2000, "classes": 4}, "epochs": 8})
ds = ex.load_dataset(cfg)
quantum, _, _, test = ex.run_training(cfg, ds)
classical, _, _, _ = ex.run_training(dict(cfg, server_front="classical"), ds)

noise = dfn.LaplaceNoiseConfig.from_mu_over_pi(4, 0.01, seed=0)
print(f"expected fidelity at mu = 4 pi, b = 0.01: {dfn.expected_fidelity(noise.mu, noise.b):.5f}")

###############################################################################
# Accuracy with and without noise, and how far each front's output moves.
for name, m in (("quantum", quantum), ("classical", classical)):
    clean, noisy = evaluate(m, test)[1], evaluate(m, test, noise)[1]
    shift = dfn.mean_output_shift(m.server_front, m.client.forward(test.features), noise)
    print(f"{name:>9}: accuracy {clean:.3f} -> {noisy:.3f}, mean output shift {shift:.4f}")

###############################################################################
# The attacker feeds known images through a copy of the client, learns to
# invert smashed data, then decodes what the server would have seen.
rec, inf = ex.attack_images(cfg, quantum, test)
decoder = atk.build_attack_model(3, seed=0)
trace = atk.train_attack(decoder, rec, epochs=30)
print(f"decoder loss {trace[0]:.4f} -> {trace[-1]:.4f}")
report = atk.evaluate_attack(decoder, inf.x, quantum.client, noise)
for metric in report["baseline"]:
    print(f"{metric:>7}: no defense {report['baseline'][metric]:.3f}   defended {report['defended'][metric]:.3f}")
