"""Novikov series on the circle.

Inverts ``1 - t`` in the truncated Novikov ring, then computes the Novikov
homology of a closed 1-form on S^1, first with a nonzero class (homology
vanishes) and then with the exact form (ordinary homology returns).
"""

from fractions import Fraction

from morsefam import catalog
from morsefam.novikov import (
    CoeffLattice,
    NovikovElement,
    circle_one_form,
    from_morse,
    invert,
    novikov_homology,
)

lat = CoeffLattice(1, (-Fraction(1),))  # e^(1) has omega value -1, so it is small
one = NovikovElement.one(lat)
t = NovikovElement.monomial(lat, (1,))
u = one - t
for p in (-3, -6):
    inv = invert(u, p)
    print(f"1/(1 - t) known down to {p}: {inv!r}")
    print("  product agrees with 1:", (u * inv).agrees_with(one, Fraction(p)))

for omega in (1, 2, Fraction(1, 2)):
    H = novikov_homology(circle_one_form(omega), "Q", -10)
    print(f"[omega] = {omega}: ranks", {n: h.rank for n, h in sorted(H.items())})

H = novikov_homology(from_morse(catalog.circle_fiber()), "Z")
print("exact form:", {n: str(h.group) for n, h in sorted(H.items())})
