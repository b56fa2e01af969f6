"""Smoke test for the physvac Python extension."""

import math
import tempfile

import physvac_py as pv


def main():
    d = pv.Domain(1, 0, 65)
    assert len(d) == 65 and d.shape == [65]

    prof = pv.Profile.parabolic(d, 2.0)
    assert prof.vacuum_constant > 0.0

    traj = pv.run(overrides=["domain.n_vertical=33", "solver.t_end=0.05", "solver.snapshot_stride=1"])
    energy = traj.energy()
    assert len(traj) >= 2 and len(energy["t"]) == len(traj)
    print(f"run: {traj.steps} steps, e_total {energy['e_total'][0]:.4e} -> {energy['e_total'][-1]:.4e}")

    t, r, _ = pv.affine_oracle(1.0, t_end=0.5)
    assert r[-1] > 1.0 and abs(t[-1] - 0.5) < 1e-12

    z = d.heights()
    u = [zi * (1.0 - zi) for zi in z]
    h = pv.hardy_ratio(d, u, 1)
    print(f"hardy parabola s=1 ratio {h['ratio']:.4f}")

    times, values, bound = pv.kelliptic([1.0, -2.0], lambda t: [math.cos(t), 0.5], 0.1, 0.01, 1.0)
    assert bound <= 1.0 + 1e-12 and len(values) == len(times)

    err = pv.xsolve_manufactured(pv.Domain(1, 0, 65), 0.1, 1e-3, 0.1)
    assert err < 1e-3, err

    ids = pv.check_identities(2, 8, 3)
    assert ids["cofactor_error"] < 1e-10

    with tempfile.TemporaryDirectory() as out:
        files = pv.run_to_disk(out, overrides=["domain.n_vertical=17", "solver.t_end=0.02"])
        assert any(f.endswith("energy.csv") for f in files)

    try:
        pv.Profile.custom(pv.Domain(1, 0, 4), 2.0, [1.0, 1.0, 1.0, 1.0])
    except ValueError:
        pass
    else:
        raise AssertionError("uniform density accepted")

    print("smoke test passed")


if __name__ == "__main__":
    main()
