import random

from hypothesis import HealthCheck, settings, strategies as st

settings.register_profile(
    "scalelab",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
    derandomize=True,
)
settings.load_profile("scalelab")


@st.composite
def images(draw, degree):
    """A uniformly shuffled permutation of range(degree), as a tuple."""
    seed = draw(st.integers(0, 2**32 - 1))
    pts = list(range(degree))
    random.Random(seed).shuffle(pts)
    return tuple(pts)


@st.composite
def generator_sets(draw, min_degree=2, max_degree=7, max_gens=3):
    n = draw(st.integers(min_degree, max_degree))
    k = draw(st.integers(1, max_gens))
    return n, [draw(images(n)) for _ in range(k)]


def closure(degree, gens):
    """Brute-force BFS closure; the independent oracle for group orders."""
    ident = tuple(range(degree))
    seen = {ident}
    frontier = [ident]
    while frontier:
        nxt = []
        for g in frontier:
            for s in gens:
                h = tuple(s[g[x]] for x in range(degree))
                if h not in seen:
                    seen.add(h)
                    nxt.append(h)
        frontier = nxt
    return seen


# acceptance lines, printed once at the end of the session
ACCEPTANCE: dict[int, str] = {}


def record(n: int, ok: bool, what: str, seconds: float, budget: float | None = None) -> bool:
    within = budget is None or seconds < budget
    status = "PASS" if ok and within else "FAIL"
    limit = f" (limit {budget:g} s)" if budget is not None else ""
    ACCEPTANCE[n] = f"[{status}] criterion {n:>2}: {what} [{seconds:.2f} s{limit}]"
    return ok and within


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])
