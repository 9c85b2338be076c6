use crate::sim::{interact, Action, ObjectState, Pose4, SimParams, Suction};

/// Builds waypoint plans whose consecutive targets are never further apart
/// than the simulator's per-tick travel, so a noise-free robot tracks them
/// exactly.
///
/// Optionally carries a free object along and predicts how the planned
/// motion moves it.
#[derive(Clone, Debug)]
pub struct Path {
    cur: Pose4,
    max_step: f64,
    actions: Vec<Action>,
    tracked: Option<(SimParams, ObjectState)>,
}

impl Path {
    pub fn new(start: Pose4, max_step: f64) -> Self {
        Self {
            cur: start,
            max_step,
            actions: Vec::new(),
            tracked: None,
        }
    }

    /// Same as [`Path::new`], but every appended tick is also applied to
    /// `obj` through the contact model.
    pub fn tracking(start: Pose4, params: &SimParams, obj: ObjectState) -> Self {
        let mut p = Self::new(start, params.max_step);
        p.tracked = Some((params.clone(), obj));
        p
    }

    pub fn cur(&self) -> Pose4 {
        self.cur
    }

    pub fn object(&self) -> Option<&ObjectState> {
        self.tracked.as_ref().map(|(_, o)| o)
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    fn push(&mut self, target: Pose4, suction: Suction) {
        if let Some((params, obj)) = &mut self.tracked {
            *obj = interact(params, obj, &self.cur, &target);
        }
        self.cur = target;
        self.actions.push(Action { target, suction });
    }

    /// Straight line to `target` at `speed` meters per tick (capped at the
    /// travel limit).
    pub fn move_to(&mut self, target: Pose4, speed: f64) -> &mut Self {
        let speed = speed.min(self.max_step);
        let from = self.cur;
        let d = from.distance(&target);
        if d < 1e-12 {
            return self;
        }
        let n = (d / speed - 1e-9).ceil().max(1.0) as usize;
        for k in 1..=n {
            let f = k as f64 / n as f64;
            let p = if k == n {
                target
            } else {
                Pose4::new(
                    from.x + (target.x - from.x) * f,
                    from.y + (target.y - from.y) * f,
                    from.z + (target.z - from.z) * f,
                    target.yaw,
                )
            };
            self.push(p, Suction::Hold);
        }
        self
    }

    pub fn move_z(&mut self, z: f64, speed: f64) -> &mut Self {
        let mut t = self.cur;
        t.z = z;
        self.move_to(t, speed)
    }

    /// Up to `travel_z` (if below it), across, then down to `z`.
    pub fn transit(&mut self, x: f64, y: f64, travel_z: f64, z: f64) -> &mut Self {
        let planar = (self.cur.x - x).hypot(self.cur.y - y);
        if planar > 1e-9 {
            if self.cur.z < travel_z {
                self.move_z(travel_z, self.max_step);
            }
            let mut t = self.cur;
            t.x = x;
            t.y = y;
            self.move_to(t, self.max_step);
        }
        self.move_z(z, self.max_step)
    }

    pub fn suction(&mut self, s: Suction) -> &mut Self {
        let here = self.cur;
        self.push(here, s);
        self
    }

    pub fn wait(&mut self, ticks: usize) -> &mut Self {
        for _ in 0..ticks {
            let here = self.cur;
            self.push(here, Suction::Hold);
        }
        self
    }

    /// Clears the totes and returns to `home`.
    pub fn retreat(&mut self, home: Pose4, hover: f64) -> &mut Self {
        self.transit(home.x, home.y, hover.max(home.z), home.z)
    }

    pub fn into_actions(self) -> Vec<Action> {
        self.actions
    }

    pub fn actions(&self) -> &[Action] {
        &self.actions
    }

    pub fn truncate(&mut self, len: usize, cur: Pose4, obj: Option<ObjectState>) {
        self.actions.truncate(len);
        self.cur = cur;
        if let (Some((_, o)), Some(new)) = (&mut self.tracked, obj) {
            *o = new;
        }
    }
}
