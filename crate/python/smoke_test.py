"""Smoke test for the Python bindings: solve, simulate and verify on small problems."""

import math
import tempfile

import pynemytskii as nm


def main():
    assert set(nm.presets()) == {"linear-heat", "cubic-tanh", "logistic-b"}

    heat = nm.Coefficients.preset("linear-heat")
    assert all(c["passed"] for c in heat.validate())
    assert heat.a(0.0) == 1.0

    custom = nm.Coefficients.from_json('{"beta": [0, 1, 0, 1], "gamma0": 1}')
    assert abs(custom.beta(2.0) - 10.0) < 1e-12

    mesh = nm.Mesh(-8.0, 8.0, 200)
    u0 = nm.GridFunction.gaussian(mesh, 0.0, 0.5)
    assert abs(u0.mass() - 1.0) < 1e-10

    traj = nm.solve(u0, heat, 1e-2, 0.5, checkpoint_every=10)
    assert len(traj) == 6
    assert traj.max_mass_drift < 1e-8 and traj.min_value >= -1e-12
    peak = max(traj.last().values)
    assert abs(peak - 1.0 / math.sqrt(2 * math.pi * 1.25)) < 5e-3, peak

    cubic = nm.Coefficients.preset("cubic-tanh")
    ctraj = nm.solve(u0, cubic, 1e-2, 0.5, checkpoint_every=10)
    assert nm.weak_form_residual(ctraj, cubic, 0.0, 2.0) < 1e-2

    xs = nm.sample_initial(u0, 2000, 1)
    times, ensembles = nm.simulate_decoupled(xs, traj, heat, 1e-2, 2)
    assert times == traj.times and len(ensembles[-1]) == 2000
    est = nm.kde(ensembles[-1], mesh)
    assert est.l1_distance(traj.last()) < 0.15

    sup = nm.superposition(traj, heat, u0, 4000, 3, 1e-2)
    assert sup["max_l1_distance"] < 0.1, sup

    same = nm.coupling_experiment(heat, traj, u0, 5, 200, [1e-2, 5e-3])
    assert same["sup_path_distance"] == 0.0

    cert = nm.lipschitz_certificate(ctraj, cubic, 3.0, n_pairs=2000, seed=1)
    assert cert["violation_rate"] == 0.0

    spike = nm.GridFunction(mesh, [1.0 if i == 100 else 0.0 for i in range(200)])
    mg = nm.maximal_function(spike, 0.5).values
    assert mg[100] == 1.0 and mg[101] == 1.0 / 3.0

    assert abs(nm.bounded_density_check(traj) - 1.0 / math.sqrt(2 * math.pi * 0.25)) < 5e-3

    try:
        nm.Mesh(0.0, 1.0, 2)
    except ValueError:
        pass
    else:
        raise AssertionError("mesh with 2 cells accepted")

    doc = (
        '{"name": "py", "coefficients": {"preset": "linear-heat"},'
        ' "mesh": {"x_min": -8, "x_max": 8, "n_cells": 200},'
        ' "solver": {"dt": 0.01, "t_final": 0.2}}'
    )
    assert '"newton_tol"' in nm.parse_config(doc)
    with tempfile.TemporaryDirectory() as out:
        code, summary = nm.run_scenario(doc, out)
        assert code == 0 and "status: PASS" in summary, summary

    print("python smoke test passed")


if __name__ == "__main__":
    main()
