"""Shape complementarity fields and their spectral energy landscapes."""

from . import backend, oracle, scenes
from .descriptor import (
    BoundaryProjection,
    ComplexField,
    IntegrationPolicy,
    KernelSpec,
    QuadratureError,
    SampleGrid,
    VectorField,
    affinity_field,
    indicator_field,
    kernel_eval,
    point_membership,
    read_field,
    vector_density,
    write_field,
)
from .energy import (
    Configuration,
    EnergyEval,
    PartAsset,
    evaluate,
    rotational_gradient,
    score_at,
    score_field,
    translational_gradient,
)
from .scenes import SCENES, box_mesh, build_pair_assets, extrude_polygon, get_scene, grid_for_pair, icosphere, lbracket
from .solids import Polygon2, Solid, SolidError, TriangleMesh, bounding_box, load_solid, unsigned_distance
from .spectral import (
    Spectrum,
    TruncatedSpectrum,
    VectorSpectrum,
    forward_dft,
    inverse_dft,
    ranked_truncate,
    read_spectrum,
    rotate_reflect_spectrum,
    truncate,
    write_spectrum,
    zero_padded,
)

__version__ = "0.1.0"
