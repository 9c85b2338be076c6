//! Deterministic planar tote world.
//!
//! Two totes sit side by side: objects start in the picking tote and are
//! packed into a goal quadrant of the packing tote. The end effector is a
//! suction tip that moves at most `max_step` per tick. Everything that is
//! not suction is kinematic: standing objects tip over when pressed deep
//! enough from above, lying objects are shoved by the tip and stop at the
//! tote walls.

mod params;
mod types;

pub use params::{SimParams, WorkspaceBounds};
pub use types::*;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scenario::{ScenarioConfig, SpawnRegion};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("target ({x:.3}, {y:.3}, {z:.3}) leaves the workspace")]
    OutOfWorkspace { x: f64, y: f64, z: f64 },
    #[error("action target is not finite")]
    InvalidAction,
}

/// Movement below this is treated as no movement.
const EPS: f64 = 1e-12;
/// A tip less than this far inside the footprint still pushes. Wall
/// squaring after a push can rotate the face slightly past the tip.
const EMBED_DEPTH: f64 = 5e-4;

/// One tick of the trace log.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub tick: u64,
    pub robot: Pose4,
    pub suction: i8,
    pub suction_on: bool,
    pub object: Pose4,
    pub upright: bool,
    pub attached: bool,
    pub contact: bool,
}

#[derive(Clone, Debug, Default)]
pub struct Simulator {
    pub params: SimParams,
}

impl Simulator {
    pub fn new(params: SimParams) -> Self {
        Self { params }
    }

    pub fn goal(&self, corner: Corner, source: GoalSource) -> GoalSpec {
        goal_for(&self.params, corner, source)
    }

    /// Samples the initial world for a scenario. Same inputs give the same world.
    pub fn spawn(&self, scenario: &ScenarioConfig, seed: u64) -> Result<WorldState, SimError> {
        let p = &self.params;
        let tote = p.picking_tote;
        let [x0, x1] = tote.x_range();
        let [y0, y1] = tote.y_range();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);

        let [ymin, ymax] = scenario.spawn.yaw;
        let magnitude = sample(&mut rng, ymin, ymax);
        let yaw = if rng.random_bool(0.5) { magnitude } else { -magnitude };
        let mut object = ObjectState {
            pose: Pose4::new(0.0, 0.0, 0.0, yaw),
            size: p.object_size,
            upright: false,
            attached: false,
            press_depth: 0.0,
            grip: None,
        };
        let [hx, hy] = object.aabb_half();

        let (x, y, upright) = match scenario.spawn.region {
            SpawnRegion::Central | SpawnRegion::CentralStanding => {
                let x = sample(&mut rng, x0 + 0.3 * tote.width, x0 + 0.7 * tote.width);
                let y = sample(&mut rng, y0 + 0.3 * tote.depth, y0 + 0.7 * tote.depth);
                let standing = scenario.spawn.region == SpawnRegion::CentralStanding;
                (x, y, scenario.spawn.upright.unwrap_or(standing))
            }
            SpawnRegion::Edge => {
                // Leaning against the left wall of the picking tote.
                let y = sample(&mut rng, y0 + 0.25 * tote.depth, y0 + 0.75 * tote.depth);
                (x0 + hx + 0.25 * p.wall_contact_gap, y, scenario.spawn.upright.unwrap_or(true))
            }
            SpawnRegion::Box => {
                let (Some([bx0, bx1]), Some([by0, by1])) = (scenario.spawn.x, scenario.spawn.y)
                else {
                    return Err(SimError::InvalidScenario(
                        "box spawn region needs x and y ranges".into(),
                    ));
                };
                if bx0 > bx1 || by0 > by1 {
                    return Err(SimError::InvalidScenario("spawn box ranges are reversed".into()));
                }
                if bx0 - hx < x0 || bx1 + hx > x1 || by0 - hy < y0 || by1 + hy > y1 {
                    return Err(SimError::InvalidScenario(
                        "spawn box lies outside the picking tote".into(),
                    ));
                }
                let x = sample(&mut rng, bx0, bx1);
                let y = sample(&mut rng, by0, by1);
                (x, y, scenario.spawn.upright.unwrap_or(false))
            }
        };
        if x - hx < x0 - 1e-9 || x + hx > x1 + 1e-9 || y - hy < y0 - 1e-9 || y + hy > y1 + 1e-9 {
            return Err(SimError::InvalidScenario(
                "spawn region does not fit inside the picking tote".into(),
            ));
        }
        object.pose.x = x;
        object.pose.y = y;
        object.upright = upright;

        Ok(WorldState {
            tick: 0,
            robot: p.home,
            suction_on: false,
            object,
            picking: p.picking_tote,
            packing: p.packing_tote,
            goal: goal_for(p, scenario.goal, scenario.goal_source),
            rng_seed: seed,
        })
    }

    /// Advances the world by one tick.
    ///
    /// A rejected action still consumes the tick but leaves everything else
    /// untouched.
    pub fn step(&self, world: &mut WorldState, action: &Action) -> Result<(), SimError> {
        let p = &self.params;
        if !action.target.is_finite() {
            world.tick += 1;
            return Err(SimError::InvalidAction);
        }
        let next = move_toward(&world.robot, &action.target, p.max_step, p.max_yaw_step);
        if !p.workspace.contains(&next) {
            world.tick += 1;
            return Err(SimError::OutOfWorkspace {
                x: next.x,
                y: next.y,
                z: next.z,
            });
        }
        let prev = world.robot;
        world.robot = next;

        match action.suction {
            Suction::Activate => {
                world.suction_on = true;
                if !world.object.attached && can_attach(p, &world.object, &next) {
                    let obj = &mut world.object;
                    let (s, c) = next.yaw.sin_cos();
                    let dx = obj.pose.x - next.x;
                    let dy = obj.pose.y - next.y;
                    obj.attached = true;
                    obj.press_depth = 0.0;
                    obj.grip = Some(Grip {
                        offset: [c * dx + s * dy, -s * dx + c * dy],
                        dz: next.z - obj.pose.z,
                        dyaw: obj.pose.yaw - next.yaw,
                    });
                }
            }
            Suction::Release => {
                world.suction_on = false;
                if world.object.attached {
                    release(p, &mut world.object);
                }
            }
            Suction::Hold => {}
        }

        if world.object.attached {
            follow(&mut world.object, &next);
        } else {
            world.object = interact(p, &world.object, &prev, &next);
        }
        world.tick += 1;
        Ok(())
    }

    /// Applies a scheduled disturbance. The tick counter is not touched.
    pub fn apply_disturbance(&self, world: &mut WorldState, kind: &DisturbanceKind) {
        let p = &self.params;
        match kind {
            DisturbanceKind::ResetObjectToWall => {
                world.suction_on = false;
                let obj = &mut world.object;
                obj.attached = false;
                obj.grip = None;
                obj.upright = true;
                obj.press_depth = 0.0;
                obj.pose.z = 0.0;
                let [hx, hy] = obj.aabb_half();
                let [x0, _] = p.picking_tote.x_range();
                let [y0, y1] = p.picking_tote.y_range();
                obj.pose.x = x0 + hx + 0.25 * p.wall_contact_gap;
                obj.pose.y = obj.pose.y.clamp(y0 + hy, y1 - hy);
            }
            DisturbanceKind::TeleportObject { pose } => {
                let obj = &mut world.object;
                obj.attached = false;
                obj.grip = None;
                obj.upright = false;
                obj.press_depth = 0.0;
                obj.pose = Pose4::new(pose.x, pose.y, pose.z.max(0.0), pose.yaw);
                obj.pose = p.workspace.clamp(obj.pose);
                let (settled, _) = settle(p, obj);
                *obj = settled;
            }
            DisturbanceKind::DetachSuction => {
                world.suction_on = false;
                if world.object.attached {
                    release(p, &mut world.object);
                }
            }
        }
    }

    pub fn observe(&self, world: &WorldState) -> Observation {
        let p = &self.params;
        let obj = world.object;
        Observation {
            tick: world.tick,
            robot: world.robot,
            suction_on: world.suction_on,
            object: obj,
            contact: obj.attached
                || distance_to_object(p, &obj, &world.robot) <= p.contact_radius,
            tote: tote_membership(p, &obj),
            against_wall: obj.upright && touches_picking_wall(p, &obj),
            goal: world.goal.corner,
        }
    }

    pub fn postconditions(&self, world: &WorldState) -> Postconditions {
        postconditions(&self.params, &self.observe(world), &world.goal)
    }

    pub fn trace_row(&self, world: &WorldState, suction: Suction) -> TraceRow {
        let obs = self.observe(world);
        TraceRow {
            tick: world.tick,
            robot: world.robot,
            suction: suction.value(),
            suction_on: world.suction_on,
            object: world.object.pose,
            upright: world.object.upright,
            attached: world.object.attached,
            contact: obs.contact,
        }
    }
}

fn sample(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    if hi > lo {
        rng.random_range(lo..hi)
    } else {
        lo
    }
}

/// Goal pose for a corner: the object lying flush in that corner of the
/// packing tote, aligned with the tote axes.
pub fn goal_for(p: &SimParams, corner: Corner, source: GoalSource) -> GoalSpec {
    let tote = p.packing_tote;
    let [a, b] = [p.object_size[0] / 2.0, p.object_size[1] / 2.0];
    let [sx, sy] = corner.signs();
    let [x0, x1] = tote.x_range();
    let [y0, y1] = tote.y_range();
    let x = if sx < 0.0 { x0 + a } else { x1 - a };
    let y = if sy < 0.0 { y0 + b } else { y1 - b };
    GoalSpec {
        corner,
        target_pose: Pose4::new(x, y, 0.0, 0.0),
        source,
    }
}

/// Maps a free-text instruction such as "pack it in the top left corner".
pub fn goal_from_instruction(p: &SimParams, text: &str) -> Result<GoalSpec, String> {
    let t = text.to_ascii_lowercase();
    let top = t.contains("top") || t.contains("upper");
    let bottom = t.contains("bottom") || t.contains("lower");
    let left = t.contains("left");
    let right = t.contains("right");
    let corner = match (top, bottom, left, right) {
        (true, false, true, false) => Corner::TopLeft,
        (true, false, false, true) => Corner::TopRight,
        (false, true, true, false) => Corner::BottomLeft,
        (false, true, false, true) => Corner::BottomRight,
        _ => return Err(format!("cannot resolve a single corner from `{text}`")),
    };
    Ok(goal_for(p, corner, GoalSource::Language))
}

/// Maps a goal patch rectangle `[x0, y0, x1, y1]`, drawn in packing-tote
/// coordinates, to the quadrant holding its center.
pub fn goal_from_patch(p: &SimParams, patch: [f64; 4]) -> Result<GoalSpec, String> {
    let tote = p.packing_tote;
    let cx = (patch[0] + patch[2]) / 2.0;
    let cy = (patch[1] + patch[3]) / 2.0;
    if !tote.contains(cx, cy) {
        return Err("goal patch center lies outside the packing tote".into());
    }
    let [mx, my] = tote.center();
    let corner = match (cx < mx, cy >= my) {
        (true, true) => Corner::TopLeft,
        (false, true) => Corner::TopRight,
        (true, false) => Corner::BottomLeft,
        (false, false) => Corner::BottomRight,
    };
    Ok(goal_for(p, corner, GoalSource::ImagePatch))
}

/// Quadrant of the packing tote belonging to `corner`, as `[x0, x1, y0, y1]`.
pub fn goal_quadrant(p: &SimParams, corner: Corner) -> [f64; 4] {
    let tote = p.packing_tote;
    let [x0, x1] = tote.x_range();
    let [y0, y1] = tote.y_range();
    let [mx, my] = tote.center();
    let [sx, sy] = corner.signs();
    let (qx0, qx1) = if sx < 0.0 { (x0, mx) } else { (mx, x1) };
    let (qy0, qy1) = if sy < 0.0 { (y0, my) } else { (my, y1) };
    [qx0, qx1, qy0, qy1]
}

pub fn quadrant_center(p: &SimParams, corner: Corner) -> [f64; 2] {
    let [x0, x1, y0, y1] = goal_quadrant(p, corner);
    [(x0 + x1) / 2.0, (y0 + y1) / 2.0]
}

pub fn in_goal_quadrant(p: &SimParams, corner: Corner, x: f64, y: f64) -> bool {
    let [x0, x1, y0, y1] = goal_quadrant(p, corner);
    x >= x0 && x <= x1 && y >= y0 && y <= y1
}

pub fn tote_membership(p: &SimParams, obj: &ObjectState) -> ToteMembership {
    if p.picking_tote.contains(obj.pose.x, obj.pose.y) {
        ToteMembership::Picking
    } else if p.packing_tote.contains(obj.pose.x, obj.pose.y) {
        ToteMembership::Packing
    } else {
        ToteMembership::Neither
    }
}

pub fn top_height(p: &SimParams, obj: &ObjectState) -> f64 {
    if obj.upright {
        p.upright_height
    } else {
        obj.size[2]
    }
}

/// Euclidean distance from the tip to the object's box.
pub fn distance_to_object(p: &SimParams, obj: &ObjectState, tip: &Pose4) -> f64 {
    let [a, b] = obj.half_extents();
    let q = obj.to_body(tip.xy());
    let dx = (q[0].abs() - a).max(0.0);
    let dy = (q[1].abs() - b).max(0.0);
    let z0 = obj.pose.z;
    let z1 = z0 + top_height(p, obj);
    let dz = (z0 - tip.z).max(tip.z - z1).max(0.0);
    (dx * dx + dy * dy + dz * dz).sqrt()
}

pub fn touches_picking_wall(p: &SimParams, obj: &ObjectState) -> bool {
    let tote = p.picking_tote;
    if !tote.contains(obj.pose.x, obj.pose.y) {
        return false;
    }
    let [hx, hy] = obj.aabb_half();
    let [x0, x1] = tote.x_range();
    let [y0, y1] = tote.y_range();
    let gaps = [
        obj.pose.x - hx - x0,
        x1 - obj.pose.x - hx,
        obj.pose.y - hy - y0,
        y1 - obj.pose.y - hy,
    ];
    gaps.iter().any(|g| *g <= p.wall_contact_gap)
}

fn can_attach(p: &SimParams, obj: &ObjectState, tip: &Pose4) -> bool {
    if obj.upright && touches_picking_wall(p, obj) {
        // Only the face pressed against the wall is flat enough for the cup.
        return false;
    }
    let top = Pose4::new(obj.pose.x, obj.pose.y, obj.pose.z + top_height(p, obj), 0.0);
    tip.distance(&top) <= p.attach_radius
}

fn follow(obj: &mut ObjectState, tip: &Pose4) {
    let Some(g) = obj.grip else { return };
    let (s, c) = tip.yaw.sin_cos();
    obj.pose = Pose4::new(
        tip.x + c * g.offset[0] - s * g.offset[1],
        tip.y + s * g.offset[0] + c * g.offset[1],
        (tip.z - g.dz).max(0.0),
        tip.yaw + g.dyaw,
    );
}

fn release(p: &SimParams, obj: &mut ObjectState) {
    obj.attached = false;
    obj.grip = None;
    obj.pose.z = 0.0;
    let (settled, _) = settle(p, obj);
    *obj = settled;
}

fn move_toward(from: &Pose4, to: &Pose4, max_step: f64, max_yaw_step: f64) -> Pose4 {
    let dx = to.x - from.x;
    let dy = to.y - from.y;
    let dz = to.z - from.z;
    let d = (dx * dx + dy * dy + dz * dz).sqrt();
    let scale = if d > max_step { max_step / d } else { 1.0 };
    let dyaw = wrap_angle(to.yaw - from.yaw).clamp(-max_yaw_step, max_yaw_step);
    Pose4::new(
        from.x + dx * scale,
        from.y + dy * scale,
        from.z + dz * scale,
        from.yaw + dyaw,
    )
}

/// Contact response of a free object to one tick of tip motion.
///
/// Pure: the controllers roll their own pushes through this to plan.
pub fn interact(p: &SimParams, obj: &ObjectState, prev: &Pose4, tip: &Pose4) -> ObjectState {
    let mut out = *obj;
    if obj.attached {
        return out;
    }
    let top = obj.pose.z + top_height(p, obj);
    let inside_now = obj.footprint_contains(tip.xy(), 0.0) && tip.z < top;

    if obj.upright && inside_now {
        let depth = top - tip.z;
        out.press_depth = out.press_depth.max(depth);
        if out.press_depth > p.flip_depth {
            tip_over(p, &mut out, tip);
            return settle(p, &out).0;
        }
        return out;
    }

    let moved = (tip.x - prev.x).hypot(tip.y - prev.y) > EPS;
    let was_embedded = obj.footprint_contains(prev.xy(), EMBED_DEPTH) && prev.z < top;
    if inside_now && moved && !was_embedded {
        out = push(p, obj, prev, tip);
    }
    settle(p, &out).0
}

fn tip_over(p: &SimParams, obj: &mut ObjectState, tip: &Pose4) {
    let mut dir = [obj.pose.x - tip.x, obj.pose.y - tip.y];
    let n = dir[0].hypot(dir[1]);
    if n < 1e-6 {
        dir = [1.0, 0.0];
    } else {
        dir = [dir[0] / n, dir[1] / n];
    }
    obj.pose.x += dir[0] * p.fall_offset;
    obj.pose.y += dir[1] * p.fall_offset;
    obj.pose.z = 0.0;
    obj.upright = false;
    obj.press_depth = 0.0;
}

/// Quasi-static point push: the face the tip crossed is pushed back along
/// its normal until the tip sits on it, then the object rotates about the
/// contact point in proportion to the lateral offset of the contact.
fn push(p: &SimParams, obj: &ObjectState, prev: &Pose4, tip: &Pose4) -> ObjectState {
    let half = obj.half_extents();
    let q0 = obj.to_body(prev.xy());
    let q = obj.to_body(tip.xy());
    let axis = entry_axis(half, q0, q);
    let other = 1 - axis;
    let s = if q0[axis].abs() >= half[axis] {
        q0[axis].signum()
    } else if q[axis] >= 0.0 {
        1.0
    } else {
        -1.0
    };
    let pen = half[axis] - s * q[axis];
    let mut t_body = [0.0; 2];
    t_body[axis] = -s * pen;
    let mut r_body = [0.0; 2];
    r_body[axis] = s * half[axis];
    r_body[other] = q[other];
    let offset = q[other];
    let torque = r_body[0] * t_body[1] - r_body[1] * t_body[0];
    let dtheta = torque / (p.push_radius * p.push_radius + offset * offset);

    let (s, c) = obj.pose.yaw.sin_cos();
    let t_world = [c * t_body[0] - s * t_body[1], s * t_body[0] + c * t_body[1]];
    let mut out = *obj;
    let cx = obj.pose.x + t_world[0];
    let cy = obj.pose.y + t_world[1];
    // Rotate about the tip, which now lies on the contacted face.
    let (sr, cr) = dtheta.sin_cos();
    let rx = cx - tip.x;
    let ry = cy - tip.y;
    out.pose = Pose4::new(
        tip.x + cr * rx - sr * ry,
        tip.y + sr * rx + cr * ry,
        obj.pose.z,
        obj.pose.yaw + dtheta,
    );
    out
}

/// Keeps a free object inside whichever tote holds its center. Returns
/// whether a wall had to stop it.
pub fn settle(p: &SimParams, obj: &ObjectState) -> (ObjectState, bool) {
    let mut out = *obj;
    if obj.attached {
        return (out, false);
    }
    let tote = if p.picking_tote.contains(obj.pose.x, obj.pose.y) {
        p.picking_tote
    } else if p.packing_tote.contains(obj.pose.x, obj.pose.y) {
        p.packing_tote
    } else {
        out.pose = p.workspace.clamp(out.pose);
        return (out, false);
    };
    let [hx, hy] = out.aabb_half();
    let [x0, x1] = tote.x_range();
    let [y0, y1] = tote.y_range();
    let nx = clamp_span(out.pose.x, x0 + hx, x1 - hx);
    let ny = clamp_span(out.pose.y, y0 + hy, y1 - hy);
    let hit = (nx - out.pose.x).abs() > 1e-9 || (ny - out.pose.y).abs() > 1e-9;
    out.pose.x = nx;
    out.pose.y = ny;
    if hit && !out.upright {
        // Shoved flush against a wall: the footprint squares up with it.
        let quarter = std::f64::consts::FRAC_PI_2;
        let aligned = (out.pose.yaw / quarter).round() * quarter;
        out.pose.yaw = wrap_angle(aligned + (out.pose.yaw - aligned) * (1.0 - p.wall_align_rate));
        let [hx, hy] = out.aabb_half();
        out.pose.x = clamp_span(out.pose.x, x0 + hx, x1 - hx);
        out.pose.y = clamp_span(out.pose.y, y0 + hy, y1 - hy);
    }
    (out, hit)
}

/// Axis of the face a segment `q0 -> q1` (body frame) crossed to get inside.
fn entry_axis(half: [f64; 2], q0: [f64; 2], q1: [f64; 2]) -> usize {
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..2 {
        let d = q1[k] - q0[k];
        let t = if d.abs() > EPS {
            ((-half[k] - q0[k]) / d).min((half[k] - q0[k]) / d)
        } else if q0[k].abs() < half[k] {
            f64::NEG_INFINITY
        } else {
            f64::INFINITY
        };
        if t > best.0 {
            best = (t, k);
        }
    }
    if best.0 == f64::NEG_INFINITY {
        // started inside both slabs: fall back to the shallower face
        let pen = [half[0] - q1[0].abs(), half[1] - q1[1].abs()];
        return if pen[0] <= pen[1] { 0 } else { 1 };
    }
    best.1
}

fn clamp_span(v: f64, lo: f64, hi: f64) -> f64 {
    if lo > hi {
        (lo + hi) / 2.0
    } else {
        v.clamp(lo, hi)
    }
}

pub fn yaw_error(obj: &ObjectState, goal: &GoalSpec) -> f64 {
    wrap_angle(obj.pose.yaw - goal.target_pose.yaw)
}

pub fn postconditions(p: &SimParams, obs: &Observation, goal: &GoalSpec) -> Postconditions {
    let obj = &obs.object;
    let resting = !obj.attached;
    Postconditions {
        flip: !obj.upright,
        pick: (obj.attached && obj.pose.z >= p.lift_height) || obs.tote != ToteMembership::Picking,
        pack: resting && in_goal_quadrant(p, goal.corner, obj.pose.x, obj.pose.y),
        push_orientation: yaw_error(obj, goal).abs() <= p.yaw_tolerance,
        push_position: obj.pose.planar_distance(&goal.target_pose) <= p.position_tolerance,
    }
}
