from .geometry import (
    DESCRIPTOR_FIELDS,
    candidate_descriptors,
    convex_hull,
    cosine,
    polygon_centroid,
    select_tip,
    vertex_descriptor,
)
from .silhouette import (
    TEMPLATES,
    Silhouette,
    instrument_silhouette,
    load_references,
    localize_tip,
    measure_reference,
    rasterize_convex,
    read_silhouettes,
    rle_decode,
    rle_encode,
    rotate,
    silhouette_candidates,
    to_global,
    wedge_polygon,
    write_references,
    write_silhouettes,
)
from .trajectory import TipTrajectory
