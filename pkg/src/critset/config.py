"""critset configuration."""

# Matroid combinatorics
MAX_EDGE_ENUMERATION_N = 12  # Largest n for which edges of the projective closure are listed
CACHE_SIZE = 256  # Entries kept by each memoized per-family computation

# Discriminant guards
NEAR_DISC_REL = 1e-12   # |f_C(x)| below this times max(1, |x|) counts as on the discriminant
NEAR_DISC_TOL = 1e-6    # Minimum |f_C| allowed along a transport segment, relative to |x|

# Critical point solver
RESIDUAL_TOL = 1e-11       # Gradient residual, scaled by 1 + |a| / min|f|
DEDUP_TOL = 1e-8           # Relative distance under which two roots are the same point
DEGENERACY_TOL = 1e-10     # |Hess| below this times its term scale marks a degenerate point
ROOT_CLUSTER_TOL = 1e-6    # Companion roots closer than this form one multiple root
NEWTON_MAX_ITER = 100
NEWTON_MAX_HALVINGS = 60
MULTISTART_FACTOR = 200    # Seeds per expected critical point
DEFAULT_SEED = 20240607

# Parameter homotopy from a real positive start fiber
HOMOTOPY_INITIAL_STEP = 0.02
HOMOTOPY_MAX_STEP = 0.1
HOMOTOPY_MIN_STEP = 1e-10
HOMOTOPY_CORRECTOR_ITER = 5
HOMOTOPY_START_ATTEMPTS = 20  # Random real fibers tried before giving up

# Invariant checks
IDENTITY_TOL = 1e-8        # Norm, orthogonality, Hessian/Jacobian and spectrum identities
RELATION_TOL = 1e-10       # Marked-element relations
GENERATOR_TOL = 1e-9       # Lagrangian generator residuals
FINITE_DIFF_TOL = 1e-6     # Finite-difference Hessian and chart Jacobians
FINITE_DIFF_STEP = 1e-3    # Difference step as a fraction of the distance to the nearest pole
RESIDUE_TOL = 1e-7         # Residue form comparison across the two models
REALITY_TOL = 1e-10        # |Im u| for real-positive data
SPECTRUM_RETRIES = 5

# Transport
ODE_TOL = 1e-9
MIXED_PARTIAL_TOL = 1e-5
