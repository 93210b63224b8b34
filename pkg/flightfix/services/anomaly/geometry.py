import numpy as np


DEGENERATE_LEG = 1e-9


def point_to_leg_distance(p, a, b) -> float:
    """Height of triangle (a, b, p) over base ab, via Heron's formula.

    This is the distance from p to the infinite line through a and b; the
    projection of p is not required to fall inside the segment.
    """
    p = np.asarray(p, dtype=float)
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)

    pa = float(np.linalg.norm(p - a))
    base = float(np.linalg.norm(b - a))
    if base < DEGENERATE_LEG:
        return pa
    pb = float(np.linalg.norm(p - b))

    # Heron in Kahan's ordering (x >= y >= z) keeps needle triangles accurate
    x, y, z = sorted((pa, pb, base), reverse=True)
    radicand = (x + (y + z)) * (z - (x - y)) * (z + (x - y)) * (x + (y - z))
    area = 0.25 * np.sqrt(max(radicand, 0.0))
    return float(2.0 * area / base)
