"""
A trapped ion as a spin-oscillator energy exchange
==================================================

Half a trap period of a spin-dependent force moves energy between the
oscillator and the spin. The two-point scheme reports oscillator jumps
and spin jumps that do not mirror each other; the one-shot observable does.
"""

import numpy as np

from crinkit import iontrap as I, protocols as P

p = I.IonParams()
d = I.derived(p)
print(f"coupling g = {d.g:.5f}, Poisson mean lambda = {d.lam:.5f}")

closed = I.fig1_closed_form(p)
print(f"two-point p(oscillator gains one quantum) = {closed['p_hho_I1_plus']:.5f}")
print(f"two-point p(spin loses about one quantum) = {closed['p_he_I1_minus']:.5f}")

# the same numbers from a truncated Fock model
m = I.fig1_matrix(p, n_max=64)
print(f"matrix route: {m['p_hho_I1_plus']:.5f} and {m['p_he_I1_minus']:.5f}, leakage {m['leakage']:.1e}")

# one-shot observable on the oscillator: Gaussian with mean -2 g Re(alpha) + g^2
ops = I.model_operators(p, 64, "adapted")
for alpha in (0, 1 - 1.5j):
    psi, _ = I.normalized_state(ops, alpha, -1)
    dist = P.evaluate(P.obs_povm(ops.h_ho, ops.u_tau), np.outer(psi, psi.conj()))
    g = I.obs_coherent_distribution(p, alpha)
    print(f"alpha={alpha}: moments {P.moments(dist)} vs mean {g.mean:.5f}, var {g.sd ** 2:.5f}")

q = I.fig5_quantities(p, 20j)
print(f"alpha=20i: uncertainty slack {q['slack']:.4f}, commutator {q['commutator']:.3f}")
print("spread of the variation:", I.sigma_delta_flag(p))
