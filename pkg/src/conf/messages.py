NOT_SQUARE = 'Matrix must be square'
NOT_FINITE = 'Matrix or vector contains non-finite entries'
DIMENSION_MISMATCH = 'Incompatible matrix dimensions'
TAU_NOT_POSITIVE = 'Sampling period must be positive'
EIG_NOT_CONVERGED = 'Eigenvalue iteration did not converge'
LYAPUNOV_SINGULAR = 'Discrete Lyapunov equation is singular (eigenvalue product equal to one)'
Q_NOT_PD = 'Lyapunov weight Q must be symmetric positive definite'
PROBABILITY_OUT_OF_RANGE = 'Probability must lie in [0, 1]'
SHAPE_NOT_POSITIVE = 'Beta shape parameters must be positive'
JACOBIAN_NOT_FINITE = 'Non-finite function value while differencing'
NEWTON_DIVERGED = 'Newton iteration for the equilibrium did not converge'

UNKNOWN_PLANT = 'Unknown plant'
UNKNOWN_OVERRIDE = 'Override key does not exist for this plant'
TIME_OUT_OF_HORIZON = 'Time lies outside the plant horizon'
HORIZON_NOT_MULTIPLE = 'Horizon must be an integer multiple of the sampling period'

NON_FINITE_ERROR = 'Tracking error must be finite'
COEFFS_LENGTH = 'Difference controller needs L coefficients a and L + 1 coefficients b'
CHANNEL_LAYOUT = 'Controller channels do not match the plant inputs/outputs'
PARAMS_LENGTH = 'Parameter vector length does not match the controller family'

EMPTY_BOX = 'Parameter box must be non-empty with lo <= hi'
EMPTY_ELITES = 'Elite set must not be empty'
ESTIMATION_ABORTED = 'Trajectory evaluation failed; estimation aborted'

CONFIG_NOT_FOUND = 'Config file not found and not a known plant name'
CONFIG_INVALID = 'Config file is not valid'
CONTROLLER_MISSING = 'A controller is required: use --controller or --kp/--ki/--kd'
CONTROLLER_INVALID = 'Controller description is not valid'
