"""Machine-independent flop accounting.

One complex multiply-add counts as one flop. Solvers report their work
through :func:`add`; nothing is recorded unless a :class:`FlopCounter`
is active in the current context::

    with FlopCounter() as fc:
        equalize_tv_fast(...)
    print(fc.total)
"""

from contextvars import ContextVar

_active: ContextVar = ContextVar("mimo_osdm_flop_counters", default=())


class FlopCounter:
    """Context manager accumulating flops, broken down by tag."""

    def __init__(self):
        self.total = 0
        self.by_tag = {}
        self._token = None

    def __enter__(self):
        self._token = _active.set(_active.get() + (self,))
        return self

    def __exit__(self, *exc):
        _active.reset(self._token)
        self._token = None
        return False

    def _add(self, n, tag):
        self.total += n
        self.by_tag[tag] = self.by_tag.get(tag, 0) + n


def add(n, tag="misc"):
    """Charge ``n`` flops to every active counter (nested counters all see it)."""
    counters = _active.get()
    if not counters:
        return
    n = int(n)
    for c in counters:
        c._add(n, tag)


def matmul_flops(a, b, c):
    """Cost of an (a x b) @ (b x c) product."""
    return a * b * c


def gram_flops(rows, cols):
    """Cost of the Hermitian product X^H X for X of shape (rows, cols); one triangle."""
    return rows * cols * (cols + 1) // 2


def chol_flops(n):
    """Cost of a Hermitian factorization (Cholesky / LDL^H) of an n x n matrix."""
    return n * (n + 1) * (n + 2) // 6


def trisolve_flops(n, nrhs=1):
    """Cost of a forward plus backward substitution with an n x n factor."""
    return n * n * nrhs


def dense_mmse_flops(rows, cols, nrhs=1):
    """Cost of the dense MMSE solve (normal matrix, matched filter, factor, solve)."""
    return (
        gram_flops(rows, cols)
        + rows * cols * nrhs
        + chol_flops(cols)
        + trisolve_flops(cols, nrhs)
    )
