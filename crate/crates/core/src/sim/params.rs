use serde::{Deserialize, Serialize};

use super::types::{Pose4, ToteGeometry};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkspaceBounds {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl WorkspaceBounds {
    pub fn contains(&self, p: &Pose4) -> bool {
        let v = [p.x, p.y, p.z];
        (0..3).all(|i| v[i] >= self.min[i] && v[i] <= self.max[i])
    }

    pub fn clamp(&self, mut p: Pose4) -> Pose4 {
        p.x = p.x.clamp(self.min[0], self.max[0]);
        p.y = p.y.clamp(self.min[1], self.max[1]);
        p.z = p.z.clamp(self.min[2], self.max[2]);
        p
    }
}

/// Physical constants and geometry of the tote world. Lengths in meters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimParams {
    /// Per-tick end-effector travel limit.
    pub max_step: f64,
    pub max_yaw_step: f64,
    pub attach_radius: f64,
    pub contact_radius: f64,
    pub flip_depth: f64,
    pub lift_height: f64,
    pub yaw_tolerance: f64,
    pub position_tolerance: f64,
    pub hover_height: f64,
    pub object_size: [f64; 3],
    /// Top height of the object while it stands on its side.
    pub upright_height: f64,
    /// How far the center travels when a standing object tips over.
    pub fall_offset: f64,
    /// Characteristic radius of the quasi-static push model.
    pub push_radius: f64,
    /// Fraction of yaw misalignment removed per tick while shoved against a wall.
    pub wall_align_rate: f64,
    /// Footprint-to-wall gap below which the object counts as touching the wall.
    pub wall_contact_gap: f64,
    pub picking_tote: ToteGeometry,
    pub packing_tote: ToteGeometry,
    pub workspace: WorkspaceBounds,
    /// Rest pose outside both totes.
    pub home: Pose4,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            max_step: 0.01,
            max_yaw_step: 0.1,
            attach_radius: 0.02,
            contact_radius: 0.02,
            flip_depth: 0.03,
            lift_height: 0.10,
            yaw_tolerance: 0.15,
            position_tolerance: 0.02,
            hover_height: 0.15,
            object_size: [0.06, 0.04, 0.02],
            upright_height: 0.04,
            fall_offset: 0.03,
            push_radius: 0.04,
            wall_align_rate: 0.2,
            wall_contact_gap: 0.004,
            picking_tote: ToteGeometry {
                origin: [0.0, 0.0],
                width: 0.40,
                depth: 0.30,
                wall_height: 0.10,
            },
            packing_tote: ToteGeometry {
                origin: [0.50, 0.0],
                width: 0.40,
                depth: 0.30,
                wall_height: 0.10,
            },
            workspace: WorkspaceBounds {
                min: [-0.10, -0.10, 0.0],
                max: [1.00, 0.40, 0.40],
            },
            home: Pose4::new(0.45, 0.15, 0.20, 0.0),
        }
    }
}

impl SimParams {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("max_step", self.max_step),
            ("max_yaw_step", self.max_yaw_step),
            ("attach_radius", self.attach_radius),
            ("contact_radius", self.contact_radius),
            ("flip_depth", self.flip_depth),
            ("lift_height", self.lift_height),
            ("yaw_tolerance", self.yaw_tolerance),
            ("position_tolerance", self.position_tolerance),
            ("hover_height", self.hover_height),
            ("upright_height", self.upright_height),
            ("push_radius", self.push_radius),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(format!("sim.{name} must be positive, got {v}"));
            }
        }
        if self.object_size.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err("sim.object_size components must be positive".into());
        }
        if !(0.0..=1.0).contains(&self.wall_align_rate) {
            return Err("sim.wall_align_rate must lie in [0, 1]".into());
        }
        if !self.picking_tote.is_valid() || !self.packing_tote.is_valid() {
            return Err("tote width, depth and wall height must be positive".into());
        }
        if !self.picking_tote.disjoint_from(&self.packing_tote) {
            return Err("picking and packing totes overlap".into());
        }
        if !self.workspace.contains(&self.home) {
            return Err("home pose lies outside the workspace".into());
        }
        if self.hover_height <= self.picking_tote.wall_height.max(self.packing_tote.wall_height) {
            return Err("hover height must clear the tote walls".into());
        }
        Ok(())
    }
}
