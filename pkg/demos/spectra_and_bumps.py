"""Essential spectra of declared diagonals and their stability under bumps.

Run:  python3 demos/spectra_and_bumps.py
"""

from minatt import RankOneTerm, Vec, essential_spectrum, named_diagonal, weyl_check

# The essential spectrum of a declared diagonal is its accumulation set.
# Discrete eigenvalues are resolved from exact truncation eigenvalues, and
# anything too close to the essential set (or to a neighbour) is left
# unresolved instead of being reported with a made-up multiplicity.
rep = essential_spectrum(named_diagonal("one_plus_inv_n"))
print("diag(1 + 1/n):")
print(f"    essential            {rep.essential}")
print(f"    resolved discrete    {len(rep.discrete)} simple eigenvalues, "
      f"largest {rep.discrete[-1][0]}, smallest resolved {rep.discrete[0][0]:.12g}")
print()

rep = essential_spectrum(named_diagonal("alternating01"))
print("diag(0, 1, 0, 1, ...):")
print(f"    essential            {rep.essential}")
print(f"    resolved discrete    {rep.discrete}")
print()

# A finite-rank self-adjoint bump moves only discrete eigenvalues.  The
# check is twofold: declared essential sets before and after must agree
# exactly, and re-detecting accumulation points from raw truncation
# eigenvalues (no declarations consulted) must recover them.
op = named_diagonal("one_plus_inv_n")
bump = [RankOneTerm(-0.5, Vec.basis(5), Vec.basis(5))]
rep = weyl_check(op, bump)
print("after a rank-one bump of size 1/2 on coordinate 5:")
print(f"    essential before     {rep.essential_before}")
print(f"    essential after      {rep.essential_after}   (agree = {rep.agree})")
print(f"    detected before      {tuple(round(d, 6) for d in rep.detected_before)}")
print(f"    detected after       {tuple(round(d, 6) for d in rep.detected_after)}")
print(f"    detection matches declared points: {rep.detected_match}")
