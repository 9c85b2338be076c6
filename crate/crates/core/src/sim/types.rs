use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// Wraps an angle into `(-π, π]`.
pub fn wrap_angle(a: f64) -> f64 {
    let mut r = a % (2.0 * PI);
    if r <= -PI {
        r += 2.0 * PI;
    } else if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// End-effector or object pose: planar position, height and heading.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose4 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub yaw: f64,
}

impl Pose4 {
    pub fn new(x: f64, y: f64, z: f64, yaw: f64) -> Self {
        Self {
            x,
            y,
            z,
            yaw: wrap_angle(yaw),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite() && self.z.is_finite() && self.yaw.is_finite()
    }

    pub fn planar_distance(&self, other: &Pose4) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    pub fn distance(&self, other: &Pose4) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        let dz = self.z - other.z;
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.x, self.y]
    }
}

/// Relative suction command: a change event, not an absolute state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Suction {
    Release,
    #[default]
    Hold,
    Activate,
}

impl Suction {
    pub fn value(self) -> i8 {
        match self {
            Suction::Release => -1,
            Suction::Hold => 0,
            Suction::Activate => 1,
        }
    }
}

impl From<Suction> for i8 {
    fn from(s: Suction) -> i8 {
        s.value()
    }
}

impl TryFrom<i8> for Suction {
    type Error = String;

    fn try_from(v: i8) -> Result<Self, Self::Error> {
        match v {
            -1 => Ok(Suction::Release),
            0 => Ok(Suction::Hold),
            1 => Ok(Suction::Activate),
            other => Err(format!("suction must be -1, 0 or 1, got {other}")),
        }
    }
}

/// One control tick: an absolute end-effector target plus a suction event.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub target: Pose4,
    pub suction: Suction,
}

impl Action {
    pub fn hold_at(target: Pose4) -> Self {
        Self {
            target,
            suction: Suction::Hold,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToteGeometry {
    /// Lower-left interior corner.
    pub origin: [f64; 2],
    pub width: f64,
    pub depth: f64,
    pub wall_height: f64,
}

impl ToteGeometry {
    pub fn x_range(&self) -> [f64; 2] {
        [self.origin[0], self.origin[0] + self.width]
    }

    pub fn y_range(&self) -> [f64; 2] {
        [self.origin[1], self.origin[1] + self.depth]
    }

    pub fn center(&self) -> [f64; 2] {
        [
            self.origin[0] + self.width / 2.0,
            self.origin[1] + self.depth / 2.0,
        ]
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let [x0, x1] = self.x_range();
        let [y0, y1] = self.y_range();
        x >= x0 && x <= x1 && y >= y0 && y <= y1
    }

    pub fn diagonal(&self) -> f64 {
        self.width.hypot(self.depth)
    }

    fn overlaps(&self, other: &ToteGeometry) -> bool {
        let [ax0, ax1] = self.x_range();
        let [ay0, ay1] = self.y_range();
        let [bx0, bx1] = other.x_range();
        let [by0, by1] = other.y_range();
        ax0 < bx1 && bx0 < ax1 && ay0 < by1 && by0 < ay1
    }

    pub fn is_valid(&self) -> bool {
        self.width > 0.0 && self.depth > 0.0 && self.wall_height > 0.0
    }

    pub(crate) fn disjoint_from(&self, other: &ToteGeometry) -> bool {
        !self.overlaps(other)
    }
}

/// Rigid transform of a held object relative to the suction tip.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grip {
    pub offset: [f64; 2],
    pub dz: f64,
    pub dyaw: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ObjectState {
    pub pose: Pose4,
    /// Footprint width and depth, and lying height.
    pub size: [f64; 3],
    /// Standing on its side; has to be flipped down.
    pub upright: bool,
    pub attached: bool,
    /// Deepest downward press applied to the standing object so far.
    pub press_depth: f64,
    pub grip: Option<Grip>,
}

impl ObjectState {
    pub fn half_extents(&self) -> [f64; 2] {
        [self.size[0] / 2.0, self.size[1] / 2.0]
    }

    /// Half-extents of the axis-aligned box around the rotated footprint.
    pub fn aabb_half(&self) -> [f64; 2] {
        let [a, b] = self.half_extents();
        let (s, c) = self.pose.yaw.sin_cos();
        [a * c.abs() + b * s.abs(), a * s.abs() + b * c.abs()]
    }

    pub fn to_body(&self, p: [f64; 2]) -> [f64; 2] {
        let dx = p[0] - self.pose.x;
        let dy = p[1] - self.pose.y;
        let (s, c) = self.pose.yaw.sin_cos();
        [c * dx + s * dy, -s * dx + c * dy]
    }

    pub fn to_world(&self, b: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.pose.yaw.sin_cos();
        [
            self.pose.x + c * b[0] - s * b[1],
            self.pose.y + s * b[0] + c * b[1],
        ]
    }

    /// Strictly inside the footprint, shrunk by `margin`.
    pub fn footprint_contains(&self, p: [f64; 2], margin: f64) -> bool {
        let [a, b] = self.half_extents();
        let q = self.to_body(p);
        q[0].abs() < a - margin && q[1].abs() < b - margin
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Corner {
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
}

impl Corner {
    pub const ALL: [Corner; 4] = [
        Corner::TopLeft,
        Corner::TopRight,
        Corner::BottomLeft,
        Corner::BottomRight,
    ];

    pub fn code(self) -> &'static str {
        match self {
            Corner::TopLeft => "tl",
            Corner::TopRight => "tr",
            Corner::BottomLeft => "bl",
            Corner::BottomRight => "br",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Signs of the corner direction from the tote center.
    pub fn signs(self) -> [f64; 2] {
        match self {
            Corner::TopLeft => [-1.0, 1.0],
            Corner::TopRight => [1.0, 1.0],
            Corner::BottomLeft => [-1.0, -1.0],
            Corner::BottomRight => [1.0, -1.0],
        }
    }
}

impl fmt::Display for Corner {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Corner {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "tl" | "top_left" => Ok(Corner::TopLeft),
            "tr" | "top_right" => Ok(Corner::TopRight),
            "bl" | "bottom_left" => Ok(Corner::BottomLeft),
            "br" | "bottom_right" => Ok(Corner::BottomRight),
            other => Err(format!("unknown goal corner `{other}` (expected tl, tr, bl or br)")),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalSource {
    #[default]
    Language,
    ImagePatch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub corner: Corner,
    pub target_pose: Pose4,
    pub source: GoalSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToteMembership {
    Picking,
    Packing,
    Neither,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub tick: u64,
    pub robot: Pose4,
    pub suction_on: bool,
    pub object: ObjectState,
    pub picking: ToteGeometry,
    pub packing: ToteGeometry,
    pub goal: GoalSpec,
    pub rng_seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum DisturbanceKind {
    ResetObjectToWall,
    TeleportObject { pose: Pose4 },
    DetachSuction,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DisturbanceEvent {
    pub at_tick: u64,
    pub kind: DisturbanceKind,
}

/// Snapshot handed to estimators and controllers.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub tick: u64,
    pub robot: Pose4,
    pub suction_on: bool,
    pub object: ObjectState,
    pub contact: bool,
    pub tote: ToteMembership,
    pub against_wall: bool,
    pub goal: Corner,
}

/// Per-skill success predicates of the pick-and-pack task.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Postconditions {
    pub flip: bool,
    pub pick: bool,
    pub pack: bool,
    pub push_orientation: bool,
    pub push_position: bool,
}

impl Postconditions {
    pub fn all(&self) -> bool {
        self.flip && self.pick && self.pack && self.push_orientation && self.push_position
    }
}
