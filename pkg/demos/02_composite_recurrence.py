"""Two driven qubits kicked once by a sx (x) sx coupling.

The kick at t0 is treated to first order in kappa. The survival of |00>
has a slow envelope whose frequency sets the recurrence time used for the
two-qubit phase tables; we compare first-order phases there with an exact
integration that applies exp(-i kappa sx sx) at t0.
"""

import numpy as np

from floqphase.oracle import integrate_composite
from floqphase.twoqubit import BASIS_STATES, CompositeParams, CompositeSystem, basis_vector, composite_rabi

params = CompositeParams.reference(omega_b=2.0, kappa=0.1)
system = CompositeSystem(params)
omega, T = composite_rabi(params, system=system)
print(f"slow frequency Omega = {omega:.7f}, recurrence T = {T / params.t_omega:.1f} t_omega")

# sample at whole drive periods so the fast drive phase drops out; the first
# order propagator is unitary only to O(kappa^2), so P may exceed 1 slightly
t = np.round(np.linspace(0, 1, 9) * T / params.t_omega) * params.t_omega
P = system.survival("00", t)
print("\n  t / T   P_00(t)")
for ti, pi in zip(t, P):
    print(f"  {ti / T:5.3f}  {pi:.6f}")

# first order against the exact kick, for two coupling strengths
for kappa in (0.1, 0.05):
    s = system.with_kappa(kappa)
    run = integrate_composite(params.with_kappa(kappa), T, t_eval=[T])
    print(f"\nkappa = {kappa}")
    for label in BASIS_STATES:
        rep = s.phases(label, T)
        exact = np.angle(run.overlap(basis_vector(label))[0])
        print(f"  |{label}>  first order {rep.total:+.5f}  exact {exact:+.5f}  diff {abs(rep.total - exact):.1e}")
