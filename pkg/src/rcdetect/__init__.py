"""Reservoir-computing detection and localization of disturbances in networked dynamical systems."""

__version__ = "0.1.0"

from .detector import (DetectorConfig, TrainedDetector, calibrate_noise_floor, detect, localize,
                       mse_report, train)
from .models import LotkaVolterra, WilsonCowan, simulate
from .netgen import generate

__all__ = ["DetectorConfig", "TrainedDetector", "calibrate_noise_floor", "detect", "localize",
           "mse_report", "train", "LotkaVolterra", "WilsonCowan", "simulate", "generate", "__version__"]
