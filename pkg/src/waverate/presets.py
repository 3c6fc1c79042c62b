"""Built-in configurations, one per acceptance experiment (``--config preset:NAME``)."""

PRESETS = {
    "conservative": """
[experiment]
kind = simulate
[geometry]
kind = circle
n1 = 64
alpha = 1
[damping]
kind = undamped
[numeric]
dt_fraction = 0.25
t_final = 100
n_samples = 101
sigma = 1
""",
    "energy_identity": """
[experiment]
kind = simulate
[geometry]
kind = open_book
n1 = 32
n2 = 32
[damping]
kind = power_abs
beta = 2
[nonlinearity]
kind = odd_power
p = 3
coefficient = 1
[numeric]
dt_fraction = 0.125
t_final = 50
n_samples = 51
sigma = 1
amplitude = 1
energy_tol = 1e-5
""",
    "gearhart_pruss": """
[experiment]
kind = decay
[geometry]
kind = circle_half
n1 = 64
[damping]
kind = strip
lo = 0
hi = 3.141592653589793
value = 1
[numeric]
decay = operator
shift = 1
t_final = 40
n_samples = 81
mu_min = 0.5
mu_max = 64
mu_count = 256
mu_grid = linear
""",
    "resolvent_beta2": """
[experiment]
kind = resolvent
[geometry]
kind = open_book
n1 = 256
n2 = 256
[damping]
kind = power_abs
beta = 2
[numeric]
use_blocks = true
k2_max = 128
mu_min = 4
mu_max = 64
mu_count = 16
mu_grid = resonance
""",
    "resolvent_beta1": """
[experiment]
kind = resolvent
[geometry]
kind = open_book
n1 = 256
n2 = 256
[damping]
kind = power_abs
beta = 1
[numeric]
use_blocks = true
k2_max = 128
mu_min = 4
mu_max = 64
mu_count = 16
mu_grid = resonance
""",
    "operator_decay": """
[experiment]
kind = decay
[geometry]
kind = open_book
n1 = 64
n2 = 512
[damping]
kind = power_abs
beta = 2
[numeric]
decay = operator
shift = 0
times = """ + ", ".join(f"{0.5 * 800 ** (i / 59):.12g}" for i in range(60)) + """
""",
    "nonlinear_decay": """
[experiment]
kind = decay
[geometry]
kind = open_book
n1 = 64
n2 = 64
alpha = 1
[damping]
kind = power_abs
beta = 2
[nonlinearity]
kind = odd_power
p = 3
coefficient = 1
[numeric]
decay = nonlinear
sigma = 1
amplitude = 1
t_final = 60
n_samples = 241
dt_fraction = 0.5
low_block = 1
edge_fraction = 0.5
""",
    "certified_bounds": """
[experiment]
kind = resolvent
[numeric]
mode = certify
instances = 50
n_modes = 12
""",
    "witness": """
[experiment]
kind = resolvent
[numeric]
mode = witness
""",
    "peanut_foliation": """
[experiment]
kind = foliation
[numeric]
foliation = peanut
sample_count = 1000
""",
    "torus_foliation": """
[experiment]
kind = foliation
[numeric]
foliation = torus_planes
sample_count = 1000
""",
    "sphere_foliation": """
[experiment]
kind = foliation
[numeric]
foliation = sphere
sample_count = 1000
""",
    "peanut_rays": """
[experiment]
kind = rays
[geometry]
kind = peanut
y_max = 3
[damping]
kind = band
edge = 0.8
[numeric]
epsilon = 0.5
n_rays = 1000
escape = true
""",
    "ikawa_equilateral": """
[experiment]
kind = ikawa
[geometry]
preset = equilateral
outer_radius = 2
""",
    "ikawa_collinear": """
[experiment]
kind = ikawa
[geometry]
preset = collinear
outer_radius = 2
""",
    "ikawa_two_disk": """
[experiment]
kind = ikawa
[geometry]
preset = two_disk
outer_radius = 2
""",
    "billiard_two_disk": """
[experiment]
kind = rays
[geometry]
kind = disk_with_holes
outer_radius = 2
preset = two_disk
[damping]
kind = annulus
inner_radius = 1.8
[numeric]
epsilon = 0.5
n_rays = 1000
""",
    "convolution_polynomial": """
[experiment]
kind = convolution
[numeric]
case = polynomial
rate = 2
sigma = 1
""",
    "convolution_stretched": """
[experiment]
kind = convolution
[numeric]
case = stretched
c = 1
gamma = 0.5
sigma = 1
""",
    "convolution_divergent": """
[experiment]
kind = convolution
[numeric]
case = polynomial
rate = 0.5
sigma = 1
""",
    "gcc_open_book": """
[experiment]
kind = rays
[geometry]
kind = flat_torus
[damping]
kind = power_abs
beta = 1
[numeric]
epsilon = 1e-3
n_rays = 10000
refine = true
""",
}
