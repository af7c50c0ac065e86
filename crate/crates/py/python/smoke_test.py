"""Smoke test for the noisectl extension module.

    pip install --no-build-isolation -e crates/py
    python crates/py/python/smoke_test.py
"""

import json
import math

import noisectl


def main():
    s3 = noisectl.NoiseSpec.polynomial(3)
    eta = s3.log_gain_eta(1.0)
    closed = 1 + 1 / 3 + 1 / 5 + 1 / 7 - math.log(2)
    assert abs(eta - closed) < 1e-12, eta

    bern = noisectl.NoiseSpec.discrete(1)
    assert abs(bern.log_gain_eta(0.5) + 0.5 * math.log(0.75)) < 1e-12
    try:
        bern.log_gain_eta(1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("sigma = 1 must be rejected for Bernoulli noise")

    ricker = noisectl.MapSpec.ricker(0.94)
    rep = noisectl.stabilize_zero_report(ricker, s3, 1.0)
    assert rep["satisfied"] and rep["margin"] > 0

    bh = noisectl.MapSpec.modified_beverton_holt()
    fixed = [p["x"] for p in bh.fixed_points(0.5, 10.0)]
    assert len(fixed) == 2 and abs(fixed[0] - 2) < 1e-9 and abs(fixed[1] - 4) < 1e-9

    config = {
        "map": json.loads(ricker.to_json()),
        "noise": json.loads(s3.to_json()),
        "scheme": {"scheme": "stabilize_zero", "sigma": 1.0},
        "x0": 0.5,
        "n_steps": 500,
        "n_runs": 16,
        "master_seed": 3,
    }
    exp = noisectl.Experiment(json.dumps(config))
    a = exp.run()
    exp.threads = 1
    b = exp.run(keep_values=True)
    assert a["summary"] == b["summary"]
    assert len(b["trajectories"]) == 16 and b["trajectories"][0]["values"][0] == 0.5
    print("summary:", {k: a["summary"][k] for k in ("n_runs", "converged", "convergence_fraction")})
    print("noisectl", noisectl.__version__, "smoke test passed")


if __name__ == "__main__":
    main()
