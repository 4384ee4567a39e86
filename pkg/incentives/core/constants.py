# Utility families
FAMILY_LOG = 'log'
FAMILY_POWER = 'power'
FAMILY_QUADRATIC = 'quadratic'
UTILITY_FAMILIES = (FAMILY_LOG, FAMILY_POWER, FAMILY_QUADRATIC)

# Designer objectives
OBJECTIVE_WELFARE = 'welfare'
OBJECTIVE_LINEAR_GLOBAL = 'linear_global'
OBJECTIVE_KINDS = (OBJECTIVE_WELFARE, OBJECTIVE_LINEAR_GLOBAL)

# Mechanisms
MECH_IM1 = 'im1'
MECH_IM2 = 'im2'
MECH_M1 = 'm1'
MECH_M2 = 'm2'
MECH_NONE = 'none'
ITERATIVE_MECHANISMS = (MECH_IM1, MECH_IM2)
DIRECT_MECHANISMS = (MECH_M1, MECH_M2)

# Finite-difference steps
FD_STEP_JACOBIAN = 1e-6

# Convergence-speed proxy: distance to the limit as a fraction of its size
CONVERGENCE_FRACTION = 0.01
REPORTED_STEPS_RANGE = '10-15'

# Exponential-rate fit window
FIT_MIN_DISTANCE = 1e-8
FIT_MAX_FRACTION = 0.5
FIT_MIN_SAMPLES = 10

# Command exit codes
EXIT_OK = 0
EXIT_USAGE = 1
EXIT_LOAD = 2
EXIT_NUMERICAL = 3
