import numpy as np
from scipy.optimize import minimize

from splinemove.lbfgs import lbfgs_minimize


def quadratic(n=10, seed=0):
    rng = np.random.default_rng(seed)
    Q, _ = np.linalg.qr(rng.normal(size=(n, n)))
    A = Q @ np.diag(np.linspace(1.0, 4.0, n)) @ Q.T
    b = rng.normal(size=n)
    return A, b, (lambda x: (0.5 * x @ A @ x - b @ x, A @ x - b))


def rosenbrock(x):
    f = 100.0 * (x[1] - x[0] ** 2) ** 2 + (1 - x[0]) ** 2
    g = np.array([-400.0 * x[0] * (x[1] - x[0] ** 2) - 2 * (1 - x[0]), 200.0 * (x[1] - x[0] ** 2)])
    return f, g


def test_quadratic_exact_minimizer():
    A, b, fun = quadratic()
    res = lbfgs_minimize(fun, np.zeros(10), gtol=1e-14, maxiter=20)
    assert res.nit <= 20
    assert np.max(np.abs(res.x - np.linalg.solve(A, b))) < 1e-10


def test_already_zero_objective_returns_start():
    x0 = np.array([0.3, -2.0])
    res = lbfgs_minimize(lambda x: (0.0, np.zeros(2)), x0, stop=lambda x, f, g: f == 0.0)
    assert res.nit == 0 and res.success
    assert np.array_equal(res.x, x0)


def test_rosenbrock():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), gtol=1e-12, maxiter=500)
    assert np.max(np.abs(res.x - 1.0)) < 1e-6
    # reference: scipy's L-BFGS-B on the same problem
    ref = minimize(lambda x: rosenbrock(x), [-1.2, 1.0], jac=True, method="L-BFGS-B",
                   options={"gtol": 1e-12, "ftol": 0, "maxiter": 500})
    assert np.max(np.abs(res.x - ref.x)) < 1e-6


def test_stop_callback_halts_early():
    _, _, fun = quadratic(seed=1)
    seen = []
    res = lbfgs_minimize(fun, np.ones(10), stop=lambda x, f, g: len(seen) >= 3,
                         callback=lambda it, x, f, g: seen.append(f))
    assert res.status == "stopped" and res.nit == 3
    assert all(a >= b for a, b in zip(seen, seen[1:]))


def test_maxiter_status():
    res = lbfgs_minimize(rosenbrock, np.array([-1.2, 1.0]), maxiter=3)
    assert res.status == "maxiter" and res.nit == 3
