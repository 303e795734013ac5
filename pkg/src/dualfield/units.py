"""Scale constants carried through every formula (Lorentz-Heaviside)."""

from dataclasses import dataclass


@dataclass(frozen=True)
class Units:
    """Speed of light and reduced Planck constant.

    Desk-scale runs use ``c = hbar = 1``; any positive values are accepted
    and propagate symbolically through the mode normalisations.
    """

    c: float = 1.0
    hbar: float = 1.0

    def __post_init__(self):
        if not (self.c > 0 and self.hbar > 0):
            raise ValueError(f"units must be positive, got c={self.c}, hbar={self.hbar}")


NATURAL = Units()
