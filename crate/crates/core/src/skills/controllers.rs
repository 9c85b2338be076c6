//! Scripted stand-ins for the per-skill action heads.

use crate::sim::{
    distance_to_object, postconditions, quadrant_center, top_height, yaw_error,
    Action, GoalSpec, Observation, ObjectState, Pose4, SimParams, Suction, ToteMembership,
};

use super::path::Path;
use super::{PlanContext, SkillController};

/// Cup height above the object top when suction fires.
const GRASP_CLEARANCE: f64 = 0.005;
/// Tip height while sliding objects around.
const PUSH_Z: f64 = 0.01;
/// Travel height for moves inside one tote.
const LOW_HOVER: f64 = 0.05;
/// How far outside a face a push starts.
const PUSH_LEAD: f64 = 0.012;
/// Lateral contact offset used to turn an object.
const TURN_OFFSET: f64 = 0.018;
/// Planar offset of the press point from the object center.
const PRESS_OFFSET: f64 = 0.012;
/// Press depth below the top of a standing object.
const PRESS_DEPTH: f64 = 0.036;
/// Final stretch of a lift, crept over ten ticks.
const LIFT_CREEP: f64 = 0.001;

fn clamp01(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(0.0, 1.0)
    }
}

fn grasp_height(p: &SimParams, obj: &ObjectState) -> f64 {
    obj.pose.z + top_height(p, obj) + GRASP_CLEARANCE
}

/// Free object as the planner should see it: dropped if currently held.
fn released(obj: &ObjectState) -> ObjectState {
    let mut o = *obj;
    if o.attached {
        o.attached = false;
        o.grip = None;
        o.pose.z = 0.0;
    }
    o
}

/// Hover, descend, fire suction once. Returns the grip height offset.
fn grasp(path: &mut Path, p: &SimParams, obj: &ObjectState, tempo: f64) -> f64 {
    let z = grasp_height(p, obj);
    path.transit(obj.pose.x, obj.pose.y, p.hover_height, z + 0.03)
        .move_z(z, 0.5 * p.max_step * tempo)
        .suction(Suction::Activate);
    z - obj.pose.z
}

fn unit(v: [f64; 2]) -> Option<[f64; 2]> {
    let n = v[0].hypot(v[1]);
    (n > 1e-9).then(|| [v[0] / n, v[1] / n])
}

pub struct FlipController;

impl FlipController {
    /// Direction the object should fall: away from the wall it leans on, or
    /// toward open space.
    fn fall_direction(p: &SimParams, obs: &Observation, goal: &GoalSpec) -> [f64; 2] {
        let o = obs.object.pose;
        if obs.against_wall {
            let [hx, hy] = obs.object.aabb_half();
            let [x0, x1] = p.picking_tote.x_range();
            let [y0, y1] = p.picking_tote.y_range();
            let gaps = [
                (o.x - hx - x0, [1.0, 0.0]),
                (x1 - o.x - hx, [-1.0, 0.0]),
                (o.y - hy - y0, [0.0, 1.0]),
                (y1 - o.y - hy, [0.0, -1.0]),
            ];
            let mut best = gaps[0];
            for g in gaps {
                if g.0 < best.0 {
                    best = g;
                }
            }
            return best.1;
        }
        let toward = match obs.tote {
            ToteMembership::Packing => [goal.target_pose.x, goal.target_pose.y],
            ToteMembership::Picking => p.picking_tote.center(),
            ToteMembership::Neither => p.packing_tote.center(),
        };
        unit([toward[0] - o.x, toward[1] - o.y]).unwrap_or([1.0, 0.0])
    }
}

impl SkillController for FlipController {
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        if !obs.object.upright {
            return Vec::new();
        }
        let mut path = Path::new(obs.robot, p.max_step);
        if obs.object.attached {
            path.suction(Suction::Release);
        }
        let obj = released(&obs.object);
        let dir = Self::fall_direction(p, obs, goal);
        let px = obj.pose.x - dir[0] * PRESS_OFFSET;
        let py = obj.pose.y - dir[1] * PRESS_OFFSET;
        let top = obj.pose.z + p.upright_height;
        let r = path.cur();
        let above = (r.x - px).hypot(r.y - py) < 1e-3 && r.z <= top + 0.02 + 1e-9;
        if !above {
            path.transit(px, py, p.hover_height, top + 0.02);
        }
        // Leaning objects give way sooner than free-standing ones.
        let rate = if obs.against_wall { 0.4 } else { 0.15 };
        path.move_z((top - PRESS_DEPTH).max(0.0), rate * p.max_step * ctx.tempo)
            .move_z(top + 0.04, p.max_step);
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool {
        postconditions(params, obs, goal).flip
    }

    fn completion(&self, obs: &Observation, _goal: &GoalSpec, params: &SimParams) -> f64 {
        if obs.object.upright {
            clamp01(obs.object.press_depth / params.flip_depth)
        } else {
            1.0
        }
    }
}

pub struct PickController;

impl SkillController for PickController {
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        // once attached, always finish the lift
        if !obs.object.attached && self.satisfied(obs, goal, p) {
            return Vec::new();
        }
        let mut path = Path::new(obs.robot, p.max_step);
        let dz = match obs.object.grip {
            Some(g) if obs.object.attached => g.dz,
            _ => grasp(&mut path, p, &obs.object, ctx.tempo),
        };
        let top = p.lift_height + 0.01 + dz;
        path.move_z(top - LIFT_CREEP, 0.5 * p.max_step * ctx.tempo)
            .move_z(top, LIFT_CREEP / 10.0);
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool {
        postconditions(params, obs, goal).pick
    }

    fn completion(&self, obs: &Observation, _goal: &GoalSpec, params: &SimParams) -> f64 {
        if obs.object.attached {
            clamp01(obs.object.pose.z / params.lift_height)
        } else {
            0.0
        }
    }
}

pub struct PackController;

impl SkillController for PackController {
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        if self.satisfied(obs, goal, p) {
            return Vec::new();
        }
        let mut path = Path::new(obs.robot, p.max_step);
        let (dz, offset) = match obs.object.grip {
            Some(g) if obs.object.attached => (g.dz, g.offset),
            _ => (grasp(&mut path, p, &obs.object, ctx.tempo), [0.0, 0.0]),
        };
        let [cx, cy] = quadrant_center(p, goal.corner);
        let carry = p.hover_height + top_height(p, &obs.object);
        // The tip keeps yaw zero, so the grip offset is already in world axes.
        path.transit(cx - offset[0], cy - offset[1], carry, dz + 0.05)
            .move_z(dz, 0.5 * p.max_step * ctx.tempo)
            .suction(Suction::Release)
            .move_z(dz + 0.05, p.max_step);
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool {
        postconditions(params, obs, goal).pack
    }

    /// Zero until the held object has left the picking tote, then the
    /// fraction of the way to the quadrant center.
    fn completion(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> f64 {
        if !obs.object.attached || obs.tote == ToteMembership::Picking {
            return 0.0;
        }
        let [cx, cy] = quadrant_center(params, goal.corner);
        let [x1, ym] = [params.picking_tote.x_range()[1], params.picking_tote.center()[1]];
        let span = (cx - x1).hypot(cy - ym);
        let d = (obs.object.pose.x - cx).hypot(obs.object.pose.y - cy);
        clamp01(1.0 - d / span)
    }
}

pub struct PushOrientationController;

impl PushOrientationController {
    const MAX_PUSH_TICKS: usize = 60;
    const FINE_YAW: f64 = 0.02;
}

impl SkillController for PushOrientationController {
    /// Pushes a long face off-center so the object turns toward the goal
    /// yaw, picking the side whose push also moves it toward the goal. The
    /// push length comes from rolling the contact model forward.
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        let obj = released(&obs.object);
        let err = yaw_error(&obj, goal);
        // keeps refining inside the tolerance when asked to
        if obs.object.upright || err.abs() < Self::FINE_YAW {
            return Vec::new();
        }
        let [_, b] = obj.half_extents();
        let o = obj.pose;
        let to_goal = unit([goal.target_pose.x - o.x, goal.target_pose.y - o.y]).unwrap_or([0.0, 0.0]);
        let (s, c) = o.yaw.sin_cos();
        let mut best_side = 1.0;
        let mut best_score = f64::NEG_INFINITY;
        for side in [1.0, -1.0] {
            // the tip travels along body -y for side +1
            let dir = [s * side, -c * side];
            let score = dir[0] * to_goal[0] + dir[1] * to_goal[1];
            if score > best_score + 1e-12 {
                best_score = score;
                best_side = side;
            }
        }
        let side = best_side;
        let offset = TURN_OFFSET * side * err.signum();
        let start = obj.to_world([offset, side * (b + PUSH_LEAD)]);
        let dir = [s * side, -c * side];

        let mut path = Path::tracking(obs.robot, p, obj);
        if obs.object.attached {
            path.suction(Suction::Release);
        }
        path.transit(start[0], start[1], LOW_HOVER.max(path.cur().z.min(p.hover_height)), PUSH_Z);
        let step = 0.5 * p.max_step * ctx.tempo;
        let mut best = (err.abs(), path.len(), path.cur(), *path.object().unwrap());
        let mut touched = false;
        for _ in 0..Self::MAX_PUSH_TICKS {
            let cur = path.cur();
            let next = Pose4::new(cur.x + dir[0] * step, cur.y + dir[1] * step, cur.z, cur.yaw);
            path.move_to(next, step);
            let now = *path.object().unwrap();
            let e = yaw_error(&now, goal).abs();
            if e < best.0 - 1e-12 {
                best = (e, path.len(), path.cur(), now);
            }
            let gap = distance_to_object(p, &now, &path.cur());
            touched |= gap < 1e-6;
            if e < Self::FINE_YAW || e > best.0 + 0.05 || (touched && gap > PUSH_LEAD) {
                break;
            }
        }
        path.truncate(best.1, best.2, Some(best.3));
        path.move_z(LOW_HOVER, p.max_step);
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool {
        postconditions(params, obs, goal).push_orientation
    }

    fn completion(&self, obs: &Observation, goal: &GoalSpec, _params: &SimParams) -> f64 {
        clamp01(1.0 - yaw_error(&obs.object, goal).abs() / std::f64::consts::PI)
    }
}

pub struct PushPositionController;

impl SkillController for PushPositionController {
    /// Two straight pushes through the center, one per body axis, each
    /// running a little past the target so the tote walls square it up.
    fn plan(&self, obs: &Observation, goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        if obs.object.upright {
            return Vec::new();
        }
        let mut path = Path::tracking(obs.robot, p, released(&obs.object));
        if obs.object.attached {
            path.suction(Suction::Release);
        }
        let speed = 0.5 * p.max_step * ctx.tempo;
        for axis in 0..2 {
            let obj = *path.object().unwrap();
            let d = obj.to_body(goal.target_pose.xy());
            let delta = d[axis];
            // refines inside the goal tolerance down to 2 mm
            if delta.abs() < 0.002 {
                continue;
            }
            let sgn = delta.signum();
            let half = obj.half_extents()[axis];
            let mut a = [0.0; 2];
            let mut z = [0.0; 2];
            a[axis] = -sgn * (half + PUSH_LEAD);
            z[axis] = -sgn * half + delta + sgn * 0.008;
            let a = obj.to_world(a);
            let z = obj.to_world(z);
            let travel = LOW_HOVER.max(path.cur().z.min(p.hover_height));
            path.transit(a[0], a[1], travel, PUSH_Z)
                .move_to(Pose4::new(z[0], z[1], PUSH_Z, 0.0), speed)
                .move_z(LOW_HOVER, p.max_step);
        }
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> bool {
        postconditions(params, obs, goal).push_position
    }

    fn completion(&self, obs: &Observation, goal: &GoalSpec, params: &SimParams) -> f64 {
        let d = obs.object.pose.planar_distance(&goal.target_pose);
        clamp01(1.0 - d / params.packing_tote.diagonal())
    }
}

/// Moves the robot back to its rest pose. Not part of the default skill
/// set; used to exercise skill-set expansion.
pub struct RetreatController;

impl SkillController for RetreatController {
    fn plan(&self, obs: &Observation, _goal: &GoalSpec, ctx: &PlanContext) -> Vec<Action> {
        let p = ctx.params;
        let mut path = Path::new(obs.robot, p.max_step);
        path.retreat(p.home, p.hover_height);
        path.into_actions()
    }

    fn satisfied(&self, obs: &Observation, _goal: &GoalSpec, params: &SimParams) -> bool {
        obs.robot.distance(&params.home) < 1e-3
    }

    fn completion(&self, obs: &Observation, _goal: &GoalSpec, params: &SimParams) -> f64 {
        clamp01(1.0 - obs.robot.distance(&params.home) / params.packing_tote.diagonal())
    }
}
