"""Urban tree analytics engine: per-tree ecosystem services, street-level
environmental scores, eco-routing, planting simulation and photogrammetric
measurement."""

from .dendrometry import (
    CameraProfile,
    MeasurementContext,
    SegmentationMask,
    camera_constant_from_calibration,
    camera_constant_from_exif,
    measure_tree,
    scale_factor,
)
from .ecoservices import (
    AllometricModel,
    ArchetypeKey,
    CarbonResult,
    CoolingResult,
    agb_to_co2e,
    archetype_performance,
    classify_archetypes,
    compute_agb,
    cooling_metrics,
)
from .greening import PlantingScenario, SimulationOutcome, hex_pack, simulate_planting
from .ingest import (
    RasterScene,
    RoadNetwork,
    Snapshot,
    SpeciesInfo,
    TreeRecord,
    build_snapshot,
    load_census,
    load_raster,
    load_roads,
    load_snapshot,
    save_snapshot,
)
from .routing import (
    DhcWeights,
    EmissionsModel,
    RoadGraph,
    RoutePlan,
    build_graph,
    dhc_route,
    emissions_factor,
    route_with_fallback,
    serenity_loop,
    serenity_route,
)
from .scoring import (
    ScoringWeights,
    SegmentAttributes,
    aggregate_segment_attributes,
    quantile_transform,
    seq_score,
    serenity_score,
)

__version__ = "0.1.0"

__all__ = [
    "AllometricModel",
    "ArchetypeKey",
    "CameraProfile",
    "CarbonResult",
    "CoolingResult",
    "DhcWeights",
    "EmissionsModel",
    "MeasurementContext",
    "PlantingScenario",
    "RasterScene",
    "RoadGraph",
    "RoadNetwork",
    "RoutePlan",
    "ScoringWeights",
    "SegmentAttributes",
    "SegmentationMask",
    "SimulationOutcome",
    "Snapshot",
    "SpeciesInfo",
    "TreeRecord",
    "agb_to_co2e",
    "aggregate_segment_attributes",
    "archetype_performance",
    "build_graph",
    "build_snapshot",
    "camera_constant_from_calibration",
    "camera_constant_from_exif",
    "classify_archetypes",
    "compute_agb",
    "cooling_metrics",
    "dhc_route",
    "emissions_factor",
    "hex_pack",
    "load_census",
    "load_raster",
    "load_roads",
    "load_snapshot",
    "measure_tree",
    "quantile_transform",
    "route_with_fallback",
    "save_snapshot",
    "scale_factor",
    "seq_score",
    "serenity_loop",
    "serenity_route",
    "serenity_score",
    "simulate_planting",
]
