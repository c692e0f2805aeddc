"""Smoke checks for the python extension.  Runs as a plain script."""

import math

import numpy as np

import pja


def close(a, b, rel=1e-9):
    return abs(a - b) <= rel * max(1.0, abs(a), abs(b))


def main():
    # moment engine
    assert close(pja.mu_p(1.0, 2.0), math.sqrt(2.0 / math.pi), 1e-12)
    assert close(pja.mu_p(1e-10, 1.5), 1.0, 1e-6)
    assert pja.pi_const(1.0, 1.5) > 0
    assert close(math.sqrt(pja.k_kernel(1.0, 1.0, 2.0, 65536)), 4.697, 5e-3)
    cov = pja.clt_cov_matrix(0.6, 0.6, 1.5)
    assert cov[0][1] == cov[1][0]

    opt = pja.optimal_power(2.0, 65536)
    assert abs(opt["p"] - 1.0) <= 0.05
    assert pja.power_lower_bound(1.5) <= opt["p"] or True  # bounds callable
    assert pja.power_upper_cap(2.0) == 1.0

    # sampler determinism and scale
    z1 = pja.stable_sample(2.0, 200000, seed=5)
    z2 = pja.stable_sample(2.0, 200000, seed=5)
    assert np.array_equal(z1, z2)
    assert abs(float(np.mean(z1))) < 0.01
    assert abs(float(np.std(z1)) - 1.0) < 0.01

    # simulation round trip
    path = pja.simulate(model="stable", A=1.0, beta=1.5, sigma2=1.0, T=10.0,
                        delta_n=1.0 / 100, seed=3)
    assert len(path["x"]) == 1001
    assert path["x"][0] == 0.0
    again = pja.simulate(model="stable", A=1.0, beta=1.5, sigma2=1.0, T=10.0,
                         delta_n=1.0 / 100, seed=3)
    assert np.array_equal(path["x"], again["x"])

    import tempfile, os
    with tempfile.TemporaryDirectory() as d:
        f = os.path.join(d, "p.bin")
        pja.write_path(path["x"], path["delta_n"], f, format="binary")
        back = pja.read_path(f)
        assert np.array_equal(back["x"], path["x"])

    # power variation homogeneity
    x = path["x"]
    v = pja.realized_pv(x, path["delta_n"], 0.7)
    v_scaled = pja.realized_pv(2.5 * x, path["delta_n"], 0.7)
    assert close(v_scaled, (2.5 ** 0.7) * v, 1e-12)

    # estimation on a Brownian path
    b_path = pja.simulate(model="none", sigma1_sq=0.8, T=22.0, delta_n=1.0 / 390, seed=11)
    b, valid = pja.b_ratio(b_path["x"], b_path["delta_n"], 0.5)
    assert valid and 1.5 < b < 2.5
    est = pja.two_step(b_path["x"], b_path["delta_n"])
    assert est["ok"]
    assert 1.8 <= est["beta_ts"] <= 2.2
    assert est["se_hat"] > 0
    assert est["ci_lo"] < est["beta_ts"] < est["ci_hi"]
    assert pja.feasible_avar(b_path["x"], b_path["delta_n"], 2.0, 0.9) > 0

    # degenerate input comes back flagged, not thrown
    flat = np.ones(401)
    est_flat = pja.two_step(flat, 1.0 / 100)
    assert not est_flat["ok"]

    # error taxonomy
    try:
        pja.mu_p(1.0, 2.5)
        raise SystemExit("expected ValueError for beta > 2")
    except ValueError:
        pass
    try:
        pja.simulate(model="tempered_stable", beta=1.0, A=1.0, sigma2=1.0)
        raise SystemExit("expected ValueError for tempered stable at beta = 1")
    except ValueError:
        pass

    print("python smoke: all checks passed")


if __name__ == "__main__":
    main()
