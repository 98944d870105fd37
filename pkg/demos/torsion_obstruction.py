"""Collapse at E^2 over Q but not over Z.

A flat family over RP^2: no delta_2, monodromy swapping two fiber
generators.  Rationally nothing happens after E^2; over the integers a
d_2 hits a Z/2.
"""

from morsefam import catalog
from morsefam.family import assemble, family_homology
from morsefam.spectral import SpectralSequence

D = catalog.rp2_swap()
ss = SpectralSequence(assemble(D))


def show(groups):
    return ", ".join(f"({p},{q}): {g}" for (p, q), g in sorted(groups.items()))


print("E^2:", show(ss.page(2).groups()))
print("E^3:", show(ss.page(3).groups()))  # d_2: E_{2,0} = Z/2 -> E_{0,1} = Z/2 is onto
print("collapse at E^2 over Q:", ss.collapses_at(2, rational=True))
print("collapse at E^2 over Z:", ss.collapses_at(2))
print("HF:", {m: str(g) for m, g in sorted(family_homology(assemble(D)).groups.items())})
