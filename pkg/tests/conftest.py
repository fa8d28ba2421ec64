import numpy as np
import pytest

from lqgne.game import LQGame

GEX_Q = [np.array([[2.0, 1.0], [1.0, 1.0]]), np.array([[1.0, 0.0], [0.0, 2.0]])]
GEX_C = [np.array([-1.0, 0.0]), np.array([0.0, -1.0])]


def gex(A=((1.0, 1.0),), b=(0.5,), E=None, f=None, lower_bounds=None) -> LQGame:
    """Two players, one variable each: G=[[2,1],[0,2]], g=[-1,-1]."""
    A = np.asarray(A, dtype=float).reshape(-1, 2)
    return LQGame.from_arrays(GEX_Q, GEX_C, [1, 1], A, np.asarray(b, dtype=float), E, f, lower_bounds)


@pytest.fixture
def gex_game():
    return gex()


def small_random_game(rng: np.random.Generator, N=None, sizes=None, m=None, q=None,
                      box=None, symmetric=False) -> LQGame:
    """Monotone game feasible by construction, sized for brute-force enumeration.

    Uses numpy's own generator so it shares nothing with the package's instance
    recipe.
    """
    N = N or int(rng.integers(2, 4))
    sizes = sizes or [int(rng.integers(1, 3)) for _ in range(N)]
    n = sum(sizes)
    q = int(rng.integers(0, 2)) if q is None else q
    if box is None:
        box = 2 * n + 1 <= 8 and rng.random() < 0.5
    n_box = 2 * n if box else 0
    n_c = int(rng.integers(1, 8 - n_box + 1)) if m is None else m - n_box
    if symmetric:
        B = rng.normal(size=(n, n))
        Q = B.T @ B + 0.5 * np.eye(n)
        Qs = [Q] * N
    else:
        Qs = []
        for _ in range(N):
            B = rng.normal(size=(n, n))
            Qs.append(B.T @ B)
        G = np.vstack([Qs[i][sum(sizes[:i]):sum(sizes[:i + 1])] for i in range(N)])
        shift = max(-np.linalg.eigvalsh(0.5 * (G + G.T))[0], 0.0) + 0.5
        Qs = [Qi + shift * np.eye(n) for Qi in Qs]
    cs = [rng.normal(0, 5, n) for _ in range(N)]
    ub = rng.uniform(0.1, 1.0, n)
    lb = rng.uniform(-1.0, -0.1, n)
    x0 = rng.uniform(lb, ub)
    Ac = rng.normal(size=(n_c, n))
    bc = Ac @ x0 + rng.uniform(0.1, 0.5, n_c)
    E = rng.normal(size=(q, n))
    f = E @ x0
    if box:
        A = np.vstack([np.eye(n), -np.eye(n), Ac])
        b = np.concatenate([ub, -lb, bc])
        low = lb
    else:
        A, b, low = Ac, bc, None
    return LQGame.from_arrays(Qs, cs, sizes, A, b, E, f, low)


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
