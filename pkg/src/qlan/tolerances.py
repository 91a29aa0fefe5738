"""Numerical tolerances shared by every module.

Defaults live in :data:`DEFAULT`. Callers override them for a block of code
with :func:`use` or :func:`scaled`; the active set is read with :func:`get`.
The override is stored in a context variable, so concurrent threads that do
not enter a context keep seeing the defaults.
"""

from __future__ import annotations

import contextlib
import contextvars
import dataclasses
from dataclasses import dataclass
from typing import Iterator


@dataclass(frozen=True)
class Tolerances:
    hermitian: float = 1e-10        # accepting an input as Hermitian
    density_hermitian: float = 1e-12
    trace: float = 1e-12
    faithful: float = 1e-10         # min eigenvalue of experiment states
    cluster: float = 1e-12          # eigenvalues closer than this form a cluster
    jacobi_offdiag: float = 1e-14
    jacobi_max_sweeps: int = 100
    probability: float = 1e-12      # row sums of classical tables
    atom_merge: float = 1e-12
    lp_reduced_cost: float = 1e-9
    word_time: float = 1e-15        # letters with |t| below this are dropped
    sufficiency: float = 1e-8
    span_rank: float = 1e-10        # relative singular-value cut for spans
    imaginary: float = 1e-12        # allowed imaginary residue of real forms
    unimodular: float = 1e-10
    fd_step: float = 1e-5
    membership: float = 1e-8

    def scaled(self, factor: float) -> "Tolerances":
        """Return a copy with every float tolerance multiplied by ``factor``.

        The finite-difference step and integer caps are left untouched.
        """
        if not factor > 0:
            raise ValueError(f"tolerance scale must be positive, got {factor}")
        changes = {}
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if isinstance(value, float) and f.name != "fd_step":
                changes[f.name] = value * factor
        return dataclasses.replace(self, **changes)

    def updated(self, **overrides: float) -> "Tolerances":
        names = {f.name for f in dataclasses.fields(self)}
        unknown = set(overrides) - names
        if unknown:
            raise KeyError(f"unknown tolerance(s): {sorted(unknown)}")
        for key, value in overrides.items():
            if not value > 0:
                raise ValueError(f"tolerance {key} must be positive, got {value}")
        return dataclasses.replace(self, **overrides)


DEFAULT = Tolerances()

_active: contextvars.ContextVar[Tolerances] = contextvars.ContextVar(
    "qlan_tolerances", default=DEFAULT
)


def get() -> Tolerances:
    return _active.get()


@contextlib.contextmanager
def use(tol: Tolerances) -> Iterator[Tolerances]:
    token = _active.set(tol)
    try:
        yield tol
    finally:
        _active.reset(token)


@contextlib.contextmanager
def scaled(factor: float) -> Iterator[Tolerances]:
    with use(get().scaled(factor)) as tol:
        yield tol
