use serde::{Deserialize, Serialize};

use super::{BodyError, BodyModel};

/// Joints from a torso-adjacent root down to a contacting joint.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainSpec {
    pub part: String,
    pub joints: Vec<usize>,
}

impl ChainSpec {
    pub fn is_empty(&self) -> bool {
        self.joints.is_empty()
    }
}

/// Walks up from the joint driving `part` until the next joint would be a
/// torso joint. Torso parts yield an empty chain.
pub fn kinematic_chain(model: &BodyModel, part: &str) -> Result<ChainSpec, BodyError> {
    let mut joints = Vec::new();
    if let Some(mut j) = model.part_joint(part)? {
        if !model.is_torso(j) {
            joints.push(j);
            while let Some(p) = model.parent(j) {
                if model.is_torso(p) {
                    break;
                }
                joints.push(p);
                j = p;
            }
        }
    }
    joints.reverse();
    Ok(ChainSpec {
        part: part.to_string(),
        joints,
    })
}
