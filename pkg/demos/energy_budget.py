"""Energy bookkeeping for the damped defocusing wave equation.

For u_tt - Lap u + alpha u + gamma u_t + u^3 = 0 the energy

    E(t) = 1/2 int |u_t|^2 + |grad u|^2 + alpha |u|^2 + int u^4 / 4

satisfies E(t) = E(0) - int_0^t int gamma |u_t|^2. The integrator carries the
dissipation integral as an extra ODE component, so the printed residual
measures integration error only. It shrinks like dt^4.

    python demos/energy_budget.py
"""

import numpy as np

from waverate.semigroup import cfl_limit
from waverate.semilinear import Nonlinearity, integrate, smooth_datum
from waverate.spectral import DampingProfile, Grid, make_operator


def main():
    grid = Grid.torus(2 * np.pi, 2 * np.pi, 16, 16)
    op = make_operator(grid, 1.0, DampingProfile.power_abs(2))
    nl = Nonlinearity.odd_power(3)
    u0 = smooth_datum(op, sigma=1.0, amplitude=1.0, seed=0)
    times = np.linspace(0, 20, 6)

    dt = 0.125 * cfl_limit(op)
    _, rep = integrate(op, nl, u0, dt, times[-1], times)
    print(f"open book 16x16, beta=2, f=u^3, dt={dt:.4f}")
    print(f"{'t':>5} {'E(t)':>12} {'dissipated':>12} {'residual/E0':>12}")
    for t, e, d, r in zip(rep.times, rep.E_values, rep.dissipation_integral, rep.residual):
        print(f"{t:5.1f} {e:12.6f} {d:12.6f} {r / rep.E_values[0]:12.2e}")

    print("\nresidual at t=20 against the step size")
    prev = None
    for frac in (0.4, 0.2, 0.1):
        _, rep = integrate(op, nl, u0, frac * cfl_limit(op), times[-1], times)
        err = abs(rep.residual[-1]) / rep.E_values[0]
        ratio = f"{prev / err:6.1f}x" if prev else ""
        print(f"  dt = {frac:.1f} CFL: {err:.2e} {ratio}")
        prev = err


if __name__ == "__main__":
    main()
