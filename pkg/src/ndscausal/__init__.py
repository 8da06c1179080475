"""Causality and impulse-freeness of networked descriptor systems, tested
one subsystem at a time."""

from .constructibility import ConstructibilityReport, FeedbackGain, report
from .generator import GenProfile, gen_model, gen_subsystem
from .linalg import DEFAULT_TOL, ConditionReport, Tol
from .lumped import condition_i_lumped, condition_ii_lumped, lumped_lft, verdict, well_posed
from .model import NdsModel, Scm, Subsystem, load, save, validate
from .scalable import connection_independent, theorem1_check, theorem2_check
from .synthesis import SynthesisResult, apply_feedback, synthesize_feedback, synthesize_phi

__version__ = "0.1.0"
