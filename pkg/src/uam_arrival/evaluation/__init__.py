"""Closed-loop evaluation: scenarios, randomized studies, noise, metrics and densities."""
from .export import (read_trajectory_csv, render_frames, render_trajectories_svg,
                     write_trajectory_csv)
from .kde import (DegenerateSampleError, GridSpec, KDEResult, read_kde_csv, silverman_bandwidth,
                  spatial_kde, write_kde_csv)
from .metrics import RunMetrics, aggregate, compute_run_metrics
from .noise import NoiseModel, apply_position_noise, perception
from .runner import (TRAJECTORY_COLUMNS, ActorPolicy, RunResult, ScriptedPolicy, build_world,
                     min_separation, run_schedule, simulate, straight_to_vertiport)
from .scenarios import (StudyCell, StudyResult, format_table, run_poisson_scenario, run_seeds,
                        run_simulation_study, run_wave_scenario)
