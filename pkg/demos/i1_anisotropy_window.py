"""Where does the quantum violation of the XXZ-type inequality die out?

Sweep the anisotropy Delta at N = 14, delta = 0.9 and compare the exact
ground energy of the Bell operator against the classical bound.  Violation
survives up to a critical Delta around 2.4 and is gone by Delta = 3.

All points are pure exact diagonalization (no training), so this runs in
seconds despite the 2^14-dimensional space: the operator conserves total
sigma^z and the ground state sits in the zero-magnetization sector.
"""

from bellvmc import build_i1_hamiltonian, classical_bound_i1, min_eigenpair

N, DELTA = 14, 0.9

print(f"N={N} delta={DELTA}")
print(f"{'Delta':>6} {'E0':>12} {'bound':>10} {'margin':>10}  violated")
previous = None
crossing = None
for i in range(11):
    aniso = 1.0 + 0.2 * i
    op = build_i1_hamiltonian(N, DELTA, aniso)
    bound = classical_bound_i1(N, DELTA, aniso)
    e0 = min_eigenpair(op, sector=0, seed=0).min_eigenvalue
    margin = bound - e0
    print(f"{aniso:6.1f} {e0:12.4f} {bound:10.1f} {margin:10.4f}  "
          f"{'yes' if margin > 0 else 'no'}")
    if previous is not None and previous > 0 >= margin:
        crossing = (aniso - 0.2, aniso)
    previous = margin

if crossing:
    print(f"\nviolation disappears between Delta = {crossing[0]:.1f} "
          f"and {crossing[1]:.1f}")
