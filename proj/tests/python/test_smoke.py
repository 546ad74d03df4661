import json
import sys

import numpy as np

import eitias


def test_theta_update_closed_form():
    t = np.linspace(0.0, 10.0, 11)
    eta = 1e-5
    lam = eitias.theta_update(t, 1.0, eta)
    assert np.allclose(lam, 0.5 * (eta + np.sqrt(eta**2 + 2 * t**2)), rtol=1e-12)


def test_least_squares_matches_numpy():
    rng = np.random.default_rng(3)
    A = rng.standard_normal((20, 30))
    b = rng.standard_normal(20)
    ref = np.linalg.solve(A.T @ A + np.eye(30), A.T @ b)
    for backend in ("normal-direct", "adjoint-direct", "lanczos-basis", "lanczos-nobasis"):
        x, _ = eitias.solve_least_squares(A, b, backend)
        assert np.linalg.norm(x - ref) <= 1e-6 * np.linalg.norm(ref)


def test_mesh_and_errors():
    mesh = eitias.make_mesh(8, 0.5, 200, 2.0)
    v, t = mesh["vertices"], mesh["triangles"]
    assert v.shape[1] == 2 and t.shape[1] == 3
    assert np.all(np.hypot(v[:, 0], v[:, 1]) <= 1.0 + 1e-12)
    try:
        eitias.make_mesh(8, 1.5, 200, 2.0)
    except ValueError:
        pass
    else:
        raise AssertionError("fill > 1 must be rejected")


def test_small_reconstruction():
    config = {
        "mesh_generation": {"electrodes": 8, "fill": 0.5, "target": 260, "grading": 2.0},
        "data_mesh": {"electrodes": 8, "fill": 0.5, "target": 700, "grading": 2.0},
        "forward": {"z0": 1e-2},
        "noise_percent": 0.5,
    }
    p = eitias.Problem(json.dumps(config))
    s = p.summary()
    data, omega = p.simulate(seed=7)
    assert data.shape == (s["measurements"],) and omega > 0
    r = p.reconstruct(data, omega)
    assert r["converged"]
    assert r["xi"].shape == (s["elements"],)
    assert r["zeta"].shape == (s["N"],)
    assert r["gibbs"][-1] < r["gibbs"][0]


if __name__ == "__main__":
    failed = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            try:
                fn()
                print("ok", name)
            except Exception as e:  # noqa: BLE001
                failed += 1
                print("FAIL", name, e)
    sys.exit(1 if failed else 0)
