use super::moving_mesh::MovingMesh;
use crate::error::{Error, Result};
use crate::geometry::flow_map::{det, inverse, matvec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PiolaDirection {
    /// Pull a layer field back to the reference mesh: det(∇φ) (∇φ)⁻¹ u∘φ.
    Forward,
    /// Push a reference field forward to a layer: the inverse map P_{φ⁻¹}.
    Inverse,
}

/// Nodal Piola transform between the reference mesh and layer `layer`.
///
/// Node `n` of the reference mesh corresponds to node `n` of every layer, so
/// composition with φ is a relabelling and only the Jacobian factor acts.
pub fn piola_apply(mm: &MovingMesh, direction: PiolaDirection, field: &[[f64; 2]], layer: usize) -> Result<Vec<[f64; 2]>> {
    let jac = mm
        .node_flow
        .jacobians
        .get(layer)
        .ok_or_else(|| Error::InvalidInput(format!("no Jacobian samples for layer {layer}")))?;
    if jac.len() != field.len() {
        return Err(Error::InvalidInput(format!(
            "field has {} nodes but {} Jacobian samples are stored",
            field.len(),
            jac.len()
        )));
    }
    Ok(field
        .iter()
        .zip(jac)
        .map(|(u, f)| {
            let d = det(f);
            match direction {
                PiolaDirection::Forward => {
                    let v = matvec(&inverse(f), *u);
                    [d * v[0], d * v[1]]
                }
                PiolaDirection::Inverse => {
                    let v = matvec(f, *u);
                    [v[0] / d, v[1] / d]
                }
            }
        })
        .collect())
}
