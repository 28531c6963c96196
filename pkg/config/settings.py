import os
from dotenv import load_dotenv

load_dotenv()

# Logging / outputs
LOG_LEVEL = os.getenv("BERGMAN_LOG_LEVEL", "INFO").upper()
OUT_DIR = os.getenv("BERGMAN_OUT_DIR", "out")

# Reproducibility
SEED = int(os.getenv("BERGMAN_SEED", "20240101"))
THREADS = int(os.getenv("BERGMAN_THREADS", "1"))

# Quadrature
GRADING = float(os.getenv("BERGMAN_GRADING", "0.9"))

# Bergman tree
NET_CAP = int(os.getenv("BERGMAN_NET_CAP", "200000"))
MIN_KUBE_NODES = int(os.getenv("BERGMAN_MIN_KUBE_NODES", "10"))

TREE_DEFAULTS = {
    1: {
        "R": float(os.getenv("BERGMAN_R_D1", "0.7")),
        "delta": float(os.getenv("BERGMAN_DELTA_D1", "0.35")),
        "depth": int(os.getenv("BERGMAN_DEPTH_D1", "4")),
    },
    2: {
        "R": float(os.getenv("BERGMAN_R_D2", "0.9")),
        "delta": float(os.getenv("BERGMAN_DELTA_D2", "0.45")),
        "depth": int(os.getenv("BERGMAN_DEPTH_D2", "2")),
    },
}

# Characteristics
REFINE_STEP = int(os.getenv("BERGMAN_REFINE_STEP", "2"))
APEX_LEVELS = int(os.getenv("BERGMAN_APEX_LEVELS", "8"))

# Operator norms
POWER_TOL = float(os.getenv("BERGMAN_POWER_TOL", "1e-6"))
POWER_MAXITER = int(os.getenv("BERGMAN_POWER_MAXITER", "10000"))
DENSE_LIMIT = int(os.getenv("BERGMAN_DENSE_LIMIT", "2000"))
NEAR_SINGULAR = float(os.getenv("BERGMAN_NEAR_SINGULAR", "1e-6"))

# Luxembourg solver
LUX_RTOL = float(os.getenv("BERGMAN_LUX_RTOL", "1e-10"))
LUX_MAX_DOUBLINGS = int(os.getenv("BERGMAN_LUX_MAX_DOUBLINGS", "1000"))
