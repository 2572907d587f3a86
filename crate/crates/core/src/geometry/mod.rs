//! Admissible domains and driving fields, the flow map and its moving domain,
//! and the set/field distances used to compare shapes.

pub mod domain;
pub mod flow_map;
pub mod hausdorff;
pub mod moving;
pub mod polygon;
pub mod velocity;

pub use domain::{DomainCertificate, DomainParams, DomainSpec, HoldAll, RadialCoeffs};
pub use flow_map::{integrate_flow_map, FlowMap, Mat2, TimeGrid};
pub use hausdorff::{
    field_distance_c1, hausdorff_distance, interior_set, polygon_hausdorff, HausdorffOptions,
    HausdorffReport, InteriorSet, DEFAULT_C1_GRID,
};
pub use moving::{verify_compact_inclusion, MovingDomain, BOUNDARY_SAMPLES};
pub use polygon::Polygon;
pub use velocity::{DrivingField, FieldSample, Profile, StreamBump, VelocityFieldSpec, VelocityParams};
