"""
Numeric defaults for the incentives app.

Every value can be overridden through an environment variable (or the
project's env_var.env file) without touching code.
"""
import os


def _env_float(name, default):
    return float(os.getenv(name, str(default)))


def _env_int(name, default):
    return int(os.getenv(name, str(default)))


# Lower clamp applied to every investment (keeps Log utilities finite)
X_MIN = _env_float('MECH_X_MIN', 1e-9)

# Nash-equilibrium solver
NE_MAX_ITERS = _env_int('MECH_NE_MAX_ITERS', 10000)
NE_TOL = _env_float('MECH_NE_TOL', 1e-10)
NE_DAMPING = _env_float('MECH_NE_DAMPING', 0.5)

# Direct mechanisms
DIRECT_TOL = _env_float('MECH_DIRECT_TOL', 1e-12)
M2_LAMBDA_HI = _env_float('MECH_M2_LAMBDA_HI', 1e6)
BRACKET_EXPANSIONS = _env_int('MECH_BRACKET_EXPANSIONS', 12)

# Iterative mechanisms
KAPPA_D = _env_float('MECH_KAPPA_D', 0.05)
PHI = _env_float('MECH_PHI', 0.3)
LAMBDA_MIN = _env_float('MECH_LAMBDA_MIN', 1e-6)
P_CAP_FRACTION = _env_float('MECH_P_CAP_FRACTION', 0.99)
ITER_MAX_ITERS = _env_int('MECH_ITER_MAX_ITERS', 1000)
ITER_CONV_TOL = _env_float('MECH_ITER_CONV_TOL', 1e-8)

# Continuous-time integration
ODE_KAPPA_LAMBDA = _env_float('MECH_ODE_KAPPA_LAMBDA', 1.0)
ODE_DT = _env_float('MECH_ODE_DT', 1e-3)
ODE_T_END = _env_float('MECH_ODE_T_END', 50.0)
ODE_RECORD_EVERY = _env_int('MECH_ODE_RECORD_EVERY', 100)

# Uniqueness diagnostics
UNIQUENESS_SAMPLES = _env_int('MECH_UNIQUENESS_SAMPLES', 100)
UNIQUENESS_SEED = _env_int('MECH_UNIQUENESS_SEED', 20240601)
PD_TOLERANCE = _env_float('MECH_PD_TOLERANCE', 1e-10)

# Output
CSV_FLOAT_FORMAT = os.getenv('MECH_CSV_FLOAT_FORMAT', '%.17g')
