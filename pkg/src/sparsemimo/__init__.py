"""Sparse wideband MIMO array synthesis for near-field imaging."""

from .errors import SynthError
from .imaging import (ImageField, ImageGrid, RectInfo, SensingMatrix, bp_image,
                      build_sensing_matrix, project_max_axis, project_max_range)
from .metrics import MetricsReport, compare_images, image_entropy
from .model import (C0, ArrayTopology, FrequencyGrid, Point3, ScatteredField, Scene,
                    forward_scatter, wavenumber, wavenumbers)
from .psf import PsfReport, psf_analyze

__version__ = "0.1.0"
