"""Phase factors of periodically driven two-level systems."""

__version__ = "0.1.0"

from .floquet import Drive, FloquetSolution, TwoLevelParams, solve_floquet  # noqa: E402
from .phases import InitialState, PhaseReport, phase_report, sweep_grid  # noqa: E402
from .qpseries import QPSeries  # noqa: E402
from .twoqubit import CompositeParams, CompositeSystem, Delta, Periodic  # noqa: E402

__all__ = [
    "Drive",
    "TwoLevelParams",
    "FloquetSolution",
    "solve_floquet",
    "InitialState",
    "PhaseReport",
    "phase_report",
    "sweep_grid",
    "QPSeries",
    "CompositeParams",
    "CompositeSystem",
    "Delta",
    "Periodic",
]
