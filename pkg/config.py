# Configuration file for the LCPG solver and benchmark harness

import os
from dotenv import load_dotenv

# Load environment variables from .env file
load_dotenv()

class Config:
    # Interior-point subsolver
    IPM_KAPPA = float(os.getenv('IPM_KAPPA', 0.25))
    IPM_GAMMA = float(os.getenv('IPM_GAMMA', 0.25))
    IPM_TAU0 = float(os.getenv('IPM_TAU0', 1.0))
    IPM_RADIUS = float(os.getenv('IPM_RADIUS', 10.0))
    IPM_MAX_NEWTON = int(os.getenv('IPM_MAX_NEWTON', 200))  # per centering call
    IPM_EXACT_EPS = float(os.getenv('IPM_EXACT_EPS', 1e-9))
    DUAL_RESIDUAL_TOL = float(os.getenv('DUAL_RESIDUAL_TOL', 1e-6))  # relative to |grad f0|

    # First-order subsolver
    PD_MAX_ITER = int(os.getenv('PD_MAX_ITER', 20000))
    DUAL_RADIUS = float(os.getenv('DUAL_RADIUS', 1e4))

    # Outer loop
    FEAS_TOL = float(os.getenv('FEAS_TOL', 1e-9))
    INEXACT_EPS_SCALE = float(os.getenv('INEXACT_EPS_SCALE', 0.5))
    DEFAULT_SEED = int(os.getenv('DEFAULT_SEED', 0))
    DEFAULT_K = int(os.getenv('DEFAULT_K', 100))

    # Benchmarks and output
    BENCH_WORKERS = int(os.getenv('BENCH_WORKERS', 1))
    OUTPUT_FOLDER = os.getenv('OUTPUT_FOLDER', 'outputs')
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'INFO')

class DevelopmentConfig(Config):
    LOG_LEVEL = os.getenv('LOG_LEVEL', 'DEBUG')

class ProductionConfig(Config):
    BENCH_WORKERS = int(os.getenv('BENCH_WORKERS', os.cpu_count() or 1))

class TestingConfig(Config):
    TESTING = True
    LOG_LEVEL = 'WARNING'
    DEFAULT_K = 20
    PD_MAX_ITER = 5000
    OUTPUT_FOLDER = os.getenv('OUTPUT_FOLDER', 'outputs_test')

# Configuration dictionary
config = {
    'development': DevelopmentConfig,
    'production': ProductionConfig,
    'testing': TestingConfig,
    'default': DevelopmentConfig
}

def get_config(env=None):
    env = env or os.getenv('LCPG_ENV', 'development')
    return config.get(env, config['default'])
