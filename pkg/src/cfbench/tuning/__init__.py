"""Hyper-parameter search and early stopping."""

from .early_stopping import CONTINUE, STOP, EarlyStopping, early_stop_step
from .space import Categorical, Integer, LogReal, Real, sample_uniform, spec_from_dict, validate_assignment
from .study import Journal, Outcome, StudyResult, Trial, best_trial, run_study
from .tpe import suggest

__all__ = [
    "EarlyStopping", "early_stop_step", "CONTINUE", "STOP",
    "Integer", "Real", "LogReal", "Categorical", "sample_uniform", "spec_from_dict",
    "validate_assignment", "suggest", "run_study", "best_trial",
    "Trial", "Outcome", "StudyResult", "Journal",
]
