"""Traveling waves of a nonlocal inhomogeneous KPP equation and balanced growth paths
of a knowledge-diffusion mean-field game."""

from .alpha import LearningTech, Power, Tabulated
from .config import NumericsConfig, RunConfig
from .errors import (BgpWavesError, BracketError, ConfigError, DivergenceError, DomainError,
                     FeasibilityError, FitError, NoWave, NoWaveAtHeight, NonConvergence,
                     NumericError, RangeError, ToleranceError, UnresolvedTail)
from .kpp import (Kernel, WaveSolution, critical_crossings, critical_wave, decay_diagnostics, residual, shoot,
                  solve_wave, solve_wave_from_left_point, wave_family)
from .mfg import (BgpSolution, Classification, ModelParams, TruncationScheme, bgp_critical,
                  bgp_supercritical, feasibility, reconstruct_bgp)
from .profiles import Grid, Profile, make_grid, weighted_integral
from .verify import CheckReport, check_bgp, check_wave, oracle_bvp

__version__ = "0.1.0"
