"""Phases of a driven two-level system.

H = eps sx + (F0 + A cos wt) sz, started in the lab ground state. We solve
the Floquet problem once per point, check it against a direct integration,
then split the total phase after one drive period into its dynamical and
geometric parts.
"""

import numpy as np

from floqphase.floquet import TwoLevelParams, evolution_operator_at, rabi_period, solve_floquet
from floqphase.oracle import integrate_single
from floqphase.phases import phase_report

p = TwoLevelParams.make(0.1, 2.0)
sol = solve_floquet(p)
print(f"eps = {p.epsilon}, omega = {p.omega}: cutoff M = {sol.cutoff}, residual {sol.residual:.1e}")
print(f"quasienergy Omega = {sol.omega_rabi:.6f}, propagator period 2 pi / Omega = "
      f"{rabi_period(sol) / p.t_omega:.2f} drive periods")

# the same propagator by brute force
t = np.linspace(0, 20 * p.t_omega, 50)
ref = integrate_single(p, t[-1], t_eval=t).U
print(f"max |U_floquet - U_ode| over 20 periods: {np.max(np.abs(evolution_operator_at(sol, t) - ref)):.1e}")

# phase decomposition after one period, for a few couplings
print("\n  eps     total    dynamical  geometric")
for eps in (0.05, 0.1, 0.2, 0.3, 0.4):
    r = phase_report(solve_floquet(TwoLevelParams.make(eps, 2.0)))
    print(f"  {eps:.2f}  {r.total:9.5f}  {r.dynamical:9.5f}  {r.geometric:9.5f}")

# the total phase is largest for slow drives
print("\n  omega   total phase at eps = 0.1")
for w in (1.0, 1.5, 2.0, 3.0, 5.0, 10.0):
    print(f"  {w:5.1f}  {phase_report(solve_floquet(TwoLevelParams.make(0.1, w))).total:9.5f}")
