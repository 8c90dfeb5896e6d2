from .experiment import ExperimentConfig, RunManifest, SweepSpec, SweepVariable, load_experiment_config
from .records import ECHO_COLUMNS, EchoRecord, FitResult, frame_to_records, records_to_frame
from .spin import F1, F2, F3, MW, SpinParams, TransitionLabel

__all__ = [
    'ExperimentConfig',
    'RunManifest',
    'SweepSpec',
    'SweepVariable',
    'load_experiment_config',
    'ECHO_COLUMNS',
    'EchoRecord',
    'FitResult',
    'frame_to_records',
    'records_to_frame',
    'F1',
    'F2',
    'F3',
    'MW',
    'SpinParams',
    'TransitionLabel',
]
