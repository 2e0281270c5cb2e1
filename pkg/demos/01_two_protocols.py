"""
Two ways to measure how much an energy changed
==============================================

A spin in an sz eigenstate, flipped by a Hadamard gate. Measuring sz before
and after gives a spread of differences; measuring the single observable
U^dagger sz U - sz once gives its eigenvalues instead.
"""

import numpy as np

from crinkit import crin, opalg, protocols as P

sz = np.diag([1.0, -1.0])
had = np.array([[1, 1], [1, -1]]) / np.sqrt(2)
up = np.diag([1.0, 0.0])

for name, make in (("two-point", P.tpm_povm), ("observable", P.obs_povm)):
    d = P.evaluate(make(sz, had), up)
    print(f"{name:10s}", [(round(z, 4), round(p, 4)) for z, p in d.atoms if p > 1e-12])

# Conservation: with H1 + H2 commuting with U the two changes must cancel.
# Only the one-shot observable keeps that bookkeeping on random instances.
u = opalg.haar_unitary(3, np.random.default_rng(1))
h1, h2 = opalg.conserved_pair(u, 1)
for name, make in (("two-point", P.tpm_povm), ("observable", P.obs_povm)):
    r = crin.check_conservation(make, h1, h2, u)
    print(f"{name:10s} conservation worst violation {r.worst_violation:.2e}")

# Commuting case: if H1 and its evolved copy commute, both routes coincide.
v = opalg.haar_unitary(3, np.random.default_rng(2))
h = v @ np.diag([0.0, 1.0, 2.5]) @ v.conj().T
swap = v @ np.eye(3)[[1, 0, 2]] @ v.conj().T
rho = np.eye(3) / 3
a = P.evaluate(P.tpm_povm(h, swap), rho)
b = P.evaluate(P.obs_povm(h, swap), rho)
print("commuting case TV distance", P.distribution_distance(a, b)[0])
