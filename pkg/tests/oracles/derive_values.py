"""Independent oracle for limit-map coefficients.

Integrates the pointwise Loewner ODE with scipy's DOP853 at tight
tolerances on a circle of initial points, then reads Taylor coefficients off
a discrete Fourier transform.  Shares nothing with the jet integrator except
the control definitions.  Output is pasted into test_loewner.py.
"""

import numpy as np
from scipy.integrate import solve_ivp

from loewner_pmp.controls import builtin_control, slit_control


def field(z, atoms):
    return sum(-w * z * (k + z) / (k - z) for k, w in atoms)


def flow(control, z0):
    z = np.asarray(z0, dtype=complex)
    for k, v in enumerate(control.values):
        a, b = control.breakpoints[k], control.breakpoints[k + 1]
        atoms = [(np.exp(1j * at.theta), at.weight) for at in v.atoms]

        def rhs(t, y):
            zz = y[: z.size] + 1j * y[z.size:]
            f = field(zz, atoms)
            return np.concatenate([f.real, f.imag])

        sol = solve_ivp(rhs, (a, b), np.concatenate([z.real, z.imag]), method="DOP853",
                        rtol=1e-13, atol=1e-15)
        z = sol.y[: z.size, -1] + 1j * sol.y[z.size:, -1]
    return z


def coefficients(control, count=6, r=0.25, points=64):
    w = r * np.exp(2j * np.pi * np.arange(points) / points)
    vals = np.exp(control.horizon) * flow(control, w)
    c = np.fft.fft(vals) / points
    return c[: count + 1] / r ** np.arange(count + 1)


if __name__ == "__main__":
    for name, ctrl in [
        ("random:7", builtin_control("random:7")),
        ("slit(0.3, 2.0, 4.1), T=3", slit_control([0.3, 2.0, 4.1], 3.0)),
    ]:
        print(name)
        for k, a in enumerate(coefficients(ctrl)):
            print(f"  a{k} = complex({float(a.real)!r}, {float(a.imag)!r})")
