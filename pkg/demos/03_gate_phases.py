"""Gate phases of the kicked pair at the recurrence time.

For each omega_b we tabulate the four basis-state phases, the conditional
phase phi00 - phi01 - phi10 + phi11 (which no single-qubit rotation can
remove) and whether the diagonal has the B(phi) = diag(e^{i phi}, 1, 1,
e^{-i phi}) form.
"""

from floqphase.twoqubit import CompositeParams, gate_extract

print(" omega_b  kappa    phi00    phi01    phi10    phi11   conditional  B-form")
for omega_b in (1.0, 2.0, 5.0, 8.0):
    for kappa in (0.0, 0.1):
        g = gate_extract(CompositeParams.reference(omega_b=omega_b, kappa=kappa))
        cols = "".join(f"{x:9.4f}" for x in g.phases)
        print(f"  {omega_b:5.1f}   {kappa:4.2f}{cols}   {g.conditional_phase:9.4f}     {g.is_B_form}")
