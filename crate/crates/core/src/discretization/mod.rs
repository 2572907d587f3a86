//! Moving triangulations, the P2–P1 Taylor–Hood pair, quadrature, Piola
//! transforms, assembly of the weak forms and space-time integration.

pub mod assembly;
pub mod element;
pub mod export;
pub mod integrate;
pub mod locate;
pub mod mesh;
pub mod moving_mesh;
pub mod piola;
pub mod quadrature;

pub use assembly::{LayerGeometry, discrete_divergence_norm};
pub use locate::PointLocator;
pub use integrate::{spacetime_integrate, FlowState, QuadPoint, SpacetimeIntegral};
pub use mesh::{build_reference_mesh, MeshResolution, P2Layout, TriMesh};
pub use moving_mesh::{transport_mesh, MovingMesh, DEFAULT_QUALITY_FLOOR};
pub use piola::{piola_apply, PiolaDirection};
pub use quadrature::TriangleRule;
