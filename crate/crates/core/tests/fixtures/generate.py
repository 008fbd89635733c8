"""Regenerates the reference fixtures used by the integration tests.

    python3 crates/core/tests/fixtures/generate.py
"""

import json
from pathlib import Path

import numpy as np
from scipy.integrate import solve_ivp

HERE = Path(__file__).parent


def pendulum_rhs(_t, s, k=200.0, c=1.0, wall=np.pi / 4):
    theta, rate = s
    excess = abs(theta) - wall
    wall_moment = -np.sign(theta) * k * excess**2 if excess >= 0 else 0.0
    return [rate, -np.sin(theta) + wall_moment - c * rate * abs(rate)]


def pendulum_flow():
    starts = [[0.5, 1.0], [0.0, 0.0], [-0.3, 1.7], [0.79, -0.2], [-0.8, 2.0], [0.1, -1.9]]
    cases = []
    for x0 in starts:
        sol = solve_ivp(pendulum_rhs, (0.0, 0.1), x0, method="DOP853", rtol=1e-13, atol=1e-15)
        cases.append({"x": x0, "flow": sol.y[:, -1].tolist()})
    return {"dt": 0.1, "cases": cases}


def mlp_parity(seed=20240611):
    rng = np.random.default_rng(seed)
    widths = [2, 16, 16, 40]
    layers = []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        w = rng.normal(0.0, np.sqrt(2.0 / fan_in), size=(fan_out, fan_in))
        b = rng.normal(0.0, 0.1, size=fan_out)
        layers.append({"w": w.tolist(), "b": b.tolist(), "act": "relu"})
    inputs = np.column_stack([rng.uniform(-0.8, 0.8, 1000), rng.uniform(-2.0, 2.0, 1000)])
    h = inputs.T
    for layer in layers:
        h = np.maximum(np.array(layer["w"]) @ h + np.array(layer["b"])[:, None], 0.0)
    weights = {"input_dim": 2, "include_state": True, "output_dim": 40, "layers": layers}
    return weights, {"inputs": inputs.tolist(), "outputs": h.T.tolist()}


def main():
    (HERE / "pendulum_flow.json").write_text(json.dumps(pendulum_flow(), indent=1))
    weights, io = mlp_parity()
    (HERE / "mlp_weights.json").write_text(json.dumps(weights))
    (HERE / "mlp_forward.json").write_text(json.dumps(io))


if __name__ == "__main__":
    main()
