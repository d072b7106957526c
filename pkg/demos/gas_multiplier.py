"""
Gas network: reduced flow and multiplier recovery
=================================================

The gas preset couples pressures, fluxes and a Lagrange multiplier. The
flux component orthogonal to the constraint vanishes, the rest is an ODE,
and the multiplier can be recovered afterwards from the trajectory.
"""

import numpy as np

from phdae.models import preset
from phdae.reduce import gas_reduction
from phdae.sim import integrate, reconstruct_derivative

gas = preset("gas")
g = gas_reduction(gas)
print(f"blocks n1={g.n1}, n2={g.n2}, n3={g.n3}; reduced ODE of size {g.ode.n}")

# a smooth boundary input
u = lambda t: np.array([np.sin(2 * t)])

# consistent start: choose pressures and the free flux part, the rest follows
x0 = g.consistent_state(np.array([1.0, 0.5]), np.array([0.3, -0.2, 0.1]), u0=u(0.0))
g.check_consistency(x0, u(0.0))
print("initial state:", np.round(x0, 6))

# recover the multiplier from finite differences and compare to the exact formula
for h in (2e-2, 1e-2, 5e-3):
    tr = integrate(g.ode, g.ode_state(x0), h=h, u=u)
    x1, x22 = tr.states[:, :g.n1], tr.states[:, g.n1:]
    lam = g.multiplier(x1, x22, reconstruct_derivative(tr, slice(g.n1, g.ode.n)), tr.inputs)
    exact = np.array([g.consistent_multiplier(a, b, c) for a, b, c in zip(x1, x22, tr.inputs)])
    print(f"h = {h:.0e}: max multiplier error {np.abs(lam - exact).max():.3e}")

# a jump in the input makes the multiplier jump as well
t = np.linspace(0, 1, 101)
step = np.where(t < 0.5, 0.0, 1.0)[:, None]
print("input discontinuities flagged at samples:", g.input_discontinuities(t, step))
