import math

GLOBULAR = "globular"
EXTENDED = "extended"


def classify_regime(beta: float, t: float, beta_cr: float) -> tuple[str, float]:
    """Return ``(regime, chi)`` with ``chi = (beta - beta_cr) sqrt(t)``.

    ``chi >= 1`` is globular; the boundary value belongs to the globular band.
    """
    chi = (beta - beta_cr) * math.sqrt(t)
    return (GLOBULAR if chi >= 1.0 else EXTENDED), chi
