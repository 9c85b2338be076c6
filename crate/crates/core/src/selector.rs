//! Progress-guided skill selection.
//!
//! For a single demonstrated ordering the selector walks the ordering and
//! returns the first skill whose progress is below its threshold, and within
//! it the first segment whose progress is also below the segment's upper
//! bound. With several orderings, every ordering is drawn as a polyline in
//! progress space and the one nearest to the current progress vector is
//! used.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SelectError {
    #[error("progress has {got} components, expected {expected}")]
    DimensionMismatch { got: usize, expected: usize },
    #[error("skill {0} in the ordering is out of range")]
    UnknownSkill(usize),
    #[error("no orderings given")]
    EmptyOrderings,
    #[error("ordering is empty")]
    EmptyOrdering,
    #[error("skill {0} appears twice in an ordering")]
    RepeatedSkill(usize),
    #[error("unknown selection strategy `{0}`")]
    UnknownStrategy(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "decision", rename_all = "snake_case")]
pub enum Decision {
    /// Run segment `segment` (0-based) of skill `skill`.
    Execute { skill: usize, segment: usize },
    Complete,
}

impl Decision {
    pub fn skill(&self) -> Option<usize> {
        match self {
            Decision::Execute { skill, .. } => Some(*skill),
            Decision::Complete => None,
        }
    }
}

impl fmt::Display for Decision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Decision::Execute { skill, segment } => write!(f, "execute {skill}.{segment}"),
            Decision::Complete => f.write_str("complete"),
        }
    }
}

/// Progress values, one per skill, each in [0, 1].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProgressVector(Vec<f64>);

impl ProgressVector {
    /// Clamps every component into [0, 1]; NaN becomes 0.
    pub fn new(values: Vec<f64>) -> Self {
        Self(
            values
                .into_iter()
                .map(|v| if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) })
                .collect(),
        )
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

fn check_dim(rho: &[f64], n: usize) -> Result<(), SelectError> {
    if rho.len() != n {
        return Err(SelectError::DimensionMismatch {
            got: rho.len(),
            expected: n,
        });
    }
    Ok(())
}

/// Decision for one ordering. `bounds[i]` are skill `i`'s segment upper
/// bounds; single-segment skills have `[1.0]`.
pub fn select_single(
    rho: &[f64],
    ordering: &[usize],
    thresholds: &[f64],
    bounds: &[Vec<f64>],
) -> Result<Decision, SelectError> {
    let n = thresholds.len();
    check_dim(rho, n)?;
    check_dim(&vec![0.0; bounds.len()], n)?;
    for &skill in ordering {
        if skill >= n {
            return Err(SelectError::UnknownSkill(skill));
        }
        let r = rho[skill];
        let theta = thresholds[skill];
        if r >= theta {
            continue;
        }
        let segment = bounds[skill]
            .iter()
            .position(|&b| r < theta.min(b))
            .unwrap_or(bounds[skill].len().saturating_sub(1));
        return Ok(Decision::Execute { skill, segment });
    }
    Ok(Decision::Complete)
}

/// One demonstrated ordering as a polyline in progress space.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProgressTrajectory {
    pub ordering: Vec<usize>,
    pub vertices: Vec<Vec<f64>>,
}

/// Demonstrated orderings with the canonical per-skill progress levels they
/// were drawn from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SequenceLibrary {
    pub skills: Vec<String>,
    /// Canonical pre-execution progress per skill; 1 for skills no ordering uses.
    pub alphas: Vec<f64>,
    /// Canonical segment upper bounds per skill.
    pub bounds: Vec<Vec<f64>>,
    pub trajectories: Vec<ProgressTrajectory>,
}

impl SequenceLibrary {
    pub fn dim(&self) -> usize {
        self.alphas.len()
    }

    pub fn len(&self) -> usize {
        self.trajectories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectories.is_empty()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("library serializes")
    }

    pub fn from_toml_str(text: &str) -> Result<Self, String> {
        let lib: Self = toml::from_str(text).map_err(|e| e.to_string())?;
        lib.validate()?;
        Ok(lib)
    }

    pub fn validate(&self) -> Result<(), String> {
        let n = self.dim();
        if self.trajectories.is_empty() {
            return Err("library has no trajectories".into());
        }
        if self.bounds.len() != n || self.skills.len() != n {
            return Err("skills, alphas and bounds differ in length".into());
        }
        for t in &self.trajectories {
            if t.vertices.iter().any(|v| v.len() != n) {
                return Err("trajectory vertex has the wrong dimension".into());
            }
            if t.vertices.is_empty() {
                return Err("trajectory without vertices".into());
            }
        }
        Ok(())
    }
}

/// Builds one canonical polyline per distinct ordering, in first-seen order.
///
/// Each polyline starts at the canonical levels (1 for skills outside the
/// ordering) and raises one skill at a time to 1, passing through the
/// interior segment bounds of segmented skills.
pub fn build_trajectory_map(
    skills: &[String],
    orderings: &[Vec<usize>],
    alphas: &[f64],
    bounds: &[Vec<f64>],
) -> Result<SequenceLibrary, SelectError> {
    let n = alphas.len();
    check_dim(&vec![0.0; bounds.len()], n)?;
    check_dim(&vec![0.0; skills.len()], n)?;
    if orderings.is_empty() {
        return Err(SelectError::EmptyOrderings);
    }
    let mut seen: Vec<&Vec<usize>> = Vec::new();
    let mut trajectories = Vec::new();
    for ord in orderings {
        if ord.is_empty() {
            return Err(SelectError::EmptyOrdering);
        }
        for (k, &s) in ord.iter().enumerate() {
            if s >= n {
                return Err(SelectError::UnknownSkill(s));
            }
            if ord[..k].contains(&s) {
                return Err(SelectError::RepeatedSkill(s));
            }
        }
        if seen.contains(&ord) {
            continue;
        }
        seen.push(ord);
        let mut v: Vec<f64> = (0..n)
            .map(|i| if ord.contains(&i) { alphas[i] } else { 1.0 })
            .collect();
        let mut vertices = vec![v.clone()];
        for &s in ord {
            let interior = bounds[s].len().saturating_sub(1);
            for &b in &bounds[s][..interior] {
                if b > v[s] {
                    v[s] = b;
                    vertices.push(v.clone());
                }
            }
            v[s] = 1.0;
            vertices.push(v.clone());
        }
        trajectories.push(ProgressTrajectory {
            ordering: ord.clone(),
            vertices,
        });
    }
    let alphas = (0..n)
        .map(|i| if seen.iter().any(|o| o.contains(&i)) { alphas[i] } else { 1.0 })
        .collect();
    Ok(SequenceLibrary {
        skills: skills.to_vec(),
        alphas,
        bounds: bounds.to_vec(),
        trajectories,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct PolylineHit {
    pub distance: f64,
    pub point: Vec<f64>,
    pub edge: usize,
}

/// Nearest point of a polyline to `rho`. Ties go to the lower edge index.
pub fn point_to_polyline_distance(rho: &[f64], traj: &ProgressTrajectory) -> PolylineHit {
    let vs = &traj.vertices;
    if vs.len() == 1 {
        return PolylineHit {
            distance: dist(rho, &vs[0]),
            point: vs[0].clone(),
            edge: 0,
        };
    }
    let mut best: Option<PolylineHit> = None;
    for (e, w) in vs.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        let mut ab2 = 0.0;
        let mut dot = 0.0;
        for i in 0..rho.len() {
            let d = b[i] - a[i];
            ab2 += d * d;
            dot += (rho[i] - a[i]) * d;
        }
        let t = if ab2 > 0.0 { (dot / ab2).clamp(0.0, 1.0) } else { 0.0 };
        let p: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect();
        let d = dist(rho, &p);
        if best.as_ref().is_none_or(|h| d < h.distance) {
            best = Some(PolylineHit {
                distance: d,
                point: p,
                edge: e,
            });
        }
    }
    best.expect("at least one edge")
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Index and distance of the nearest trajectory; ties go to the earlier one.
pub fn nearest_sequence(rho: &[f64], lib: &SequenceLibrary) -> Result<(usize, f64), SelectError> {
    check_dim(rho, lib.dim())?;
    let mut best = (0, f64::INFINITY);
    for (i, t) in lib.trajectories.iter().enumerate() {
        let d = point_to_polyline_distance(rho, t).distance;
        if d < best.1 {
            best = (i, d);
        }
    }
    if lib.trajectories.is_empty() {
        return Err(SelectError::EmptyOrderings);
    }
    Ok(best)
}

/// Selection against the nearest demonstrated ordering.
pub fn select_multi(
    rho: &[f64],
    lib: &SequenceLibrary,
    thresholds: &[f64],
) -> Result<Decision, SelectError> {
    let (i, _) = nearest_sequence(rho, lib)?;
    select_single(rho, &lib.trajectories[i].ordering, thresholds, &lib.bounds)
}

/// A selection policy driven once per control cycle. May keep state across
/// cycles of one episode.
pub trait SkillSelector: Send {
    /// Returns the decision and the index of the trajectory it followed.
    fn select(
        &mut self,
        rho: &[f64],
        lib: &SequenceLibrary,
        thresholds: &[f64],
    ) -> Result<(Decision, usize), SelectError>;
}

/// Always follows the library's first ordering.
#[derive(Clone, Debug, Default)]
pub struct SingleSelector;

impl SkillSelector for SingleSelector {
    fn select(
        &mut self,
        rho: &[f64],
        lib: &SequenceLibrary,
        thresholds: &[f64],
    ) -> Result<(Decision, usize), SelectError> {
        let t = lib.trajectories.first().ok_or(SelectError::EmptyOrderings)?;
        Ok((select_single(rho, &t.ordering, thresholds, &lib.bounds)?, 0))
    }
}

/// Follows whichever ordering is nearest at every cycle.
#[derive(Clone, Debug, Default)]
pub struct NearestSelector;

impl SkillSelector for NearestSelector {
    fn select(
        &mut self,
        rho: &[f64],
        lib: &SequenceLibrary,
        thresholds: &[f64],
    ) -> Result<(Decision, usize), SelectError> {
        let (i, _) = nearest_sequence(rho, lib)?;
        let d = select_single(rho, &lib.trajectories[i].ordering, thresholds, &lib.bounds)?;
        Ok((d, i))
    }
}

/// Nearest-ordering selection that sticks to the ordering it followed last
/// unless another one is closer by more than `margin`.
#[derive(Clone, Debug)]
pub struct HysteresisSelector {
    pub margin: f64,
    pinned: Option<usize>,
}

impl HysteresisSelector {
    pub fn new(margin: f64) -> Self {
        Self {
            margin,
            pinned: None,
        }
    }

    pub fn pinned(&self) -> Option<usize> {
        self.pinned
    }
}

impl SkillSelector for HysteresisSelector {
    fn select(
        &mut self,
        rho: &[f64],
        lib: &SequenceLibrary,
        thresholds: &[f64],
    ) -> Result<(Decision, usize), SelectError> {
        let (best, d_best) = nearest_sequence(rho, lib)?;
        let choice = match self.pinned {
            Some(p) if p < lib.len() && p != best => {
                let d_pinned = point_to_polyline_distance(rho, &lib.trajectories[p]).distance;
                if d_best < d_pinned - self.margin {
                    best
                } else {
                    p
                }
            }
            _ => best,
        };
        self.pinned = Some(choice);
        let d = select_single(rho, &lib.trajectories[choice].ordering, thresholds, &lib.bounds)?;
        Ok((d, choice))
    }
}

/// Builds a selector by name: `single`, `nearest` or `hysteresis`.
pub fn selector_by_name(name: &str, margin: f64) -> Result<Box<dyn SkillSelector>, SelectError> {
    match name {
        "single" => Ok(Box::new(SingleSelector)),
        "nearest" => Ok(Box::new(NearestSelector)),
        "hysteresis" => Ok(Box::new(HysteresisSelector::new(margin))),
        other => Err(SelectError::UnknownStrategy(other.to_string())),
    }
}
