"""Compressible barotropic Navier-Stokes in a periodic channel with Navier-slip walls.

Modules: ``mesh`` (grid, stencils, norms), ``lame`` (Lame operator with
slip/no-slip rows, solves, eigenpairs), ``transport`` (finite-volume
continuity), ``dynamics`` (split time stepping and energy ledger),
``experiments`` (vanishing-slip sweep and rate fits), ``mms``
(manufactured-solution checks), ``config`` and ``cli``.
"""
from .dynamics import FluidState, PhysParams, StepControl, run, step
from .experiments import SweepSetup, fit_rate, friction_sweep
from .lame import LameParams, NoSlipBC, SlipBC, solve_lame
from .mesh import Grid, ScalarField, VectorField, build_grid

__version__ = "0.1.0"

__all__ = ["FluidState", "PhysParams", "StepControl", "run", "step", "SweepSetup", "fit_rate",
           "friction_sweep", "LameParams", "NoSlipBC", "SlipBC", "solve_lame", "Grid",
           "ScalarField", "VectorField", "build_grid"]
