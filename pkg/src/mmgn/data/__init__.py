from .fields import (
    GridField,
    ObservationSet,
    denormalize_coords,
    normalize_coords,
    normalized_lattice,
    physical_lattice,
)
from .io import (
    FieldFormatError,
    read_field,
    read_observations,
    write_field,
    write_observations,
)
from .sampling import NoiseSpec, SamplingSpec, add_noise, count_bounds, sample_task
from .synthetic import KINDS, generate_synthetic
