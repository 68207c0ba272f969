import numpy as np


def random_instance(rng, n, p, unit=True):
    X = rng.standard_normal((n, p))
    if unit:
        X /= np.linalg.norm(X, axis=0)
    y = rng.standard_normal(n)
    return X, y


def orthonormal_design(rng, n, p):
    Q, _ = np.linalg.qr(rng.standard_normal((n, p)))
    return Q


ACCEPTANCE = []


def report(criterion, ok, detail):
    """Record and print one PASS/FAIL line for an acceptance check."""
    line = f"{'PASS' if ok else 'FAIL'} [{criterion}] {detail}"
    ACCEPTANCE.append(line)
    print(line)
    return ok
