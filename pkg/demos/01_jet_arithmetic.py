"""
Truncated power series
======================

Jets are the working currency of the package: every map is carried as its
Taylor coefficients up to a fixed order.
"""

import numpy as np

from loewner_pmp.jets import Jet, koebe_jet, reciprocal

D = 8
z = Jet.identity(D)

# products and powers truncate at the common order
a = z + 2 * z ** 2
print("(z + 2z^2)^2     =", np.round((a * a).coeffs.real, 12))

# the reciprocal of a jet vanishing at 0 is a Laurent jet with a simple pole
k = koebe_jet(D)
inv = reciprocal(k)
print("1/koebe pole     =", inv.pole_order)
print("1/koebe window   =", np.round(inv.window(-1, 3).real, 12))  # z^-1 - 2 + z

# composition requires the inner jet to fix the origin
w = z + z ** 2
print("(z^2) o (z+z^2)  =", np.round((z ** 2).compose(w).coeffs.real, 12))

# evaluation is plain polynomial evaluation; close to the closed form for small |z|
x = 0.1
print("koebe(0.1)       =", koebe_jet(30)(x), "closed form", x / (1 - x) ** 2)
