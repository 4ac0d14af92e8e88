"""prismmap: 2:1 photospheres to n-gonal prism maps, plus label-based
evaluation of cognition backends on the rendered faces."""

from .errors import (
    AspectRatioError,
    AuthError,
    BackendError,
    ConfigurationError,
    ImageDecodeError,
    InconsistencyError,
    InvalidFovError,
    InvalidPolygonError,
    NarrowFovError,
    PrismMapError,
    QuotaExceededError,
    ReplayMissError,
    TransportError,
    ValidationError,
)
from .geometry import (
    Direction,
    FaceGeometry,
    SphericalCoord,
    central_angle_deg,
    direction_to_spherical,
    equator_coverage,
    face_grid_lonlat,
    face_pixel_to_spherical,
    lonlat_to_equirect,
    lonlat_to_xyz,
    normalize_longitude,
    spherical_to_direction,
    spherical_to_equirect,
    xyz_to_lonlat,
)
from .labels import (
    BackendDescriptor,
    LabelObservation,
    PositivesList,
    RateLimiter,
    RemoteBackend,
    ReplayBackend,
    StubBackend,
    find_fiducials,
    load_label_dump,
    normalize_label,
    obtain_labels,
    positives_for_map,
    write_label_dump,
)
from .metrics import (
    AggregateReport,
    ExperimentSample,
    SampleEvaluation,
    TruthSet,
    confusion,
    evaluate_from_files,
    load_truth_file,
    negatives,
    prf1,
    report_to_csv,
    report_to_json,
    run_experiment,
    vocabulary,
)
from .reproject import (
    EquirectImage,
    PrismMap,
    PrismMapConfig,
    TABLE2_SWEEP,
    content_id,
    face_source_coords,
    load_photosphere,
    render_face,
    render_prism_map,
    sample,
    table2_configs,
    validate_photosphere,
    write_prism_map,
)

__version__ = "0.1.0"
