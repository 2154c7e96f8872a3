from __future__ import annotations

import dataclasses
from dataclasses import dataclass


@dataclass(frozen=True)
class Tolerances:
    """Numerical tolerances shared by all modules.

    ``root`` is relative: the absolute root tolerance is ``root * a1``.
    """

    root: float = 1e-10
    caustic: float = 1e-8
    surface: float = 1e-12
    sep: float = 1e-9
    quad_rel: float = 1e-11
    quad_abs: float = 1e-13
    quad_max_nodes: int = 2**14
    close: float = 1e-9
    drift: float = 1e-9
    ode: float = 1e-12
    oracle_close: float = 1e-5

    def replace(self, **changes) -> Tolerances:
        return dataclasses.replace(self, **changes)

    @classmethod
    def names(cls) -> list[str]:
        return [f.name for f in dataclasses.fields(cls)]


DEFAULT = Tolerances()
