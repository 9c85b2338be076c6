//! Online progress estimation.
//!
//! Two estimators share the [`ProgressEstimator`] trait: an oracle that reads
//! the simulator's postconditions and controller completion fractions, and a
//! k-nearest-neighbor regressor fitted on annotated demonstrations.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::AnnotatedDemo;
use crate::selector::SequenceLibrary;
use crate::sim::{
    distance_to_object, yaw_error, GoalSpec, Observation, SimParams, ToteMembership, WorldState,
};
use crate::skills::PolicyBank;

pub const FEATURE_DIM: usize = 18;
pub const KNN_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_K: usize = 5;

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("no training steps")]
    EmptyDataset,
    #[error("demo {demo} has {got} skills, expected {expected}")]
    InconsistentDimension {
        demo: usize,
        got: usize,
        expected: usize,
    },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("snapshot: {0}")]
    Snapshot(String),
    #[error("unknown estimator `{0}` (expected oracle or knn)")]
    UnknownEstimator(String),
    #[error("{0}")]
    Mismatch(String),
}

/// Maps the current state to a progress vector, one value per skill.
/// Implementations hold no per-episode state.
pub trait ProgressEstimator: Send + Sync {
    fn name(&self) -> &'static str;
    fn dim(&self) -> usize;
    fn estimate(&self, world: &WorldState, obs: &Observation, goal: &GoalSpec) -> Vec<f64>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Oracle,
    Knn,
}

impl std::str::FromStr for EstimatorKind {
    type Err = EstimatorError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "oracle" => Ok(Self::Oracle),
            "knn" => Ok(Self::Knn),
            other => Err(EstimatorError::UnknownEstimator(other.to_string())),
        }
    }
}

/// Fixed-order observation features, each in [0, 1].
///
/// Object x, y, yaw and height scaled to the workspace;
/// upright, against-wall, attached and suction flags; tote one-hot
/// (picking, packing, neither); planar distance to the goal target over
/// the workspace diagonal; yaw error over pi; tip distance to the object
/// over the diagonal; goal corner one-hot.
pub fn featurize(p: &SimParams, obs: &Observation, goal: &GoalSpec) -> [f64; FEATURE_DIM] {
    let ws = &p.workspace;
    let o = &obs.object;
    let diag = ((ws.max[0] - ws.min[0]).powi(2) + (ws.max[1] - ws.min[1]).powi(2)).sqrt();
    let unit = |v: f64| if v.is_finite() { v.clamp(0.0, 1.0) } else { 0.0 };
    let flag = |b: bool| if b { 1.0 } else { 0.0 };
    let mut f = [0.0; FEATURE_DIM];
    f[0] = unit((o.pose.x - ws.min[0]) / (ws.max[0] - ws.min[0]));
    f[1] = unit((o.pose.y - ws.min[1]) / (ws.max[1] - ws.min[1]));
    f[2] = unit((crate::sim::wrap_angle(o.pose.yaw) + PI) / (2.0 * PI));
    f[3] = unit((o.pose.z - ws.min[2]) / (ws.max[2] - ws.min[2]));
    f[4] = flag(o.upright);
    f[5] = flag(obs.against_wall);
    f[6] = flag(o.attached);
    f[7] = flag(obs.suction_on);
    let tote = match obs.tote {
        ToteMembership::Picking => 8,
        ToteMembership::Packing => 9,
        ToteMembership::Neither => 10,
    };
    f[tote] = 1.0;
    f[11] = unit(o.pose.planar_distance(&goal.target_pose) / diag);
    f[12] = unit(yaw_error(o, goal).abs() / PI);
    f[13] = unit(distance_to_object(p, o, &obs.robot) / diag);
    f[14 + goal.corner.index()] = 1.0;
    f
}

/// Progress read off the true state.
///
/// A skill whose postcondition holds is at 1. Otherwise its value sits in
/// the range of its first unfinished segment, from that segment's lower
/// bound towards its upper bound (capped at the threshold) by the
/// controller's completion fraction, and always strictly below both.
pub struct OracleEstimator {
    bank: PolicyBank,
    params: SimParams,
    alphas: Vec<f64>,
    bounds: Vec<Vec<f64>>,
}

/// Share of a segment's range the oracle may cover before the
/// postcondition holds.
const ORACLE_SPAN: f64 = 0.9;

impl OracleEstimator {
    pub fn new(
        bank: PolicyBank,
        params: SimParams,
        alphas: Vec<f64>,
        bounds: Vec<Vec<f64>>,
    ) -> Result<Self, EstimatorError> {
        let n = bank.len();
        if alphas.len() != n || bounds.len() != n {
            return Err(EstimatorError::Mismatch(format!(
                "oracle for {n} skills given {} alphas and {} bound rows",
                alphas.len(),
                bounds.len()
            )));
        }
        for (i, b) in bounds.iter().enumerate() {
            if b.len() != bank.skills()[i].segments.len() {
                return Err(EstimatorError::Mismatch(format!(
                    "skill {i} has {} segments but {} bounds",
                    bank.skills()[i].segments.len(),
                    b.len()
                )));
            }
        }
        Ok(Self {
            bank,
            params,
            alphas,
            bounds,
        })
    }

    pub fn from_library(
        bank: PolicyBank,
        params: SimParams,
        lib: &SequenceLibrary,
    ) -> Result<Self, EstimatorError> {
        Self::new(bank, params, lib.alphas.clone(), lib.bounds.clone())
    }

    pub fn progress(&self, obs: &Observation, goal: &GoalSpec) -> Vec<f64> {
        let p = &self.params;
        (0..self.bank.len())
            .map(|i| {
                let theta = self.bank.skills()[i].threshold;
                let Some(j) = (0..self.bounds[i].len())
                    .find(|&j| !self.bank.segment_satisfied(i, j, obs, goal, p).unwrap_or(false))
                else {
                    return 1.0;
                };
                let lo = if j == 0 { self.alphas[i] } else { self.bounds[i][j - 1] };
                let upper = self.bounds[i][j].min(theta);
                let phi = self
                    .bank
                    .controller(i, j)
                    .map(|c| c.completion(obs, goal, p))
                    .unwrap_or(0.0)
                    .clamp(0.0, 1.0);
                let r = lo + (upper - lo).max(0.0) * ORACLE_SPAN * phi;
                r.min(upper - 1e-6).clamp(0.0, 1.0)
            })
            .collect()
    }
}

impl ProgressEstimator for OracleEstimator {
    fn name(&self) -> &'static str {
        "oracle"
    }

    fn dim(&self) -> usize {
        self.bank.len()
    }

    fn estimate(&self, _world: &WorldState, obs: &Observation, goal: &GoalSpec) -> Vec<f64> {
        self.progress(obs, goal)
    }
}

/// Nearest-neighbor regressor over featurized demo steps.
///
/// Features are min/max scaled with constants from the training set.
/// Prediction is the mean label of the `k` nearest stored points by
/// Euclidean distance; equal distances go to the earlier stored point. A
/// plain linear scan; a spatial index would slot in behind `neighbors`.
#[derive(Clone, Debug, PartialEq)]
pub struct KnnEstimator {
    k: usize,
    params: SimParams,
    skills: Vec<String>,
    lo: [f64; FEATURE_DIM],
    span: [f64; FEATURE_DIM],
    raw: Vec<[f64; FEATURE_DIM]>,
    scaled: Vec<[f64; FEATURE_DIM]>,
    labels: Vec<Vec<f64>>,
}

#[derive(Serialize, Deserialize)]
struct KnnSnapshot {
    schema_version: u32,
    k: usize,
    params: SimParams,
    skills: Vec<String>,
    features: Vec<Vec<f64>>,
    labels: Vec<Vec<f64>>,
}

impl KnnEstimator {
    pub fn fit(
        demos: &[AnnotatedDemo],
        k: usize,
        params: &SimParams,
    ) -> Result<Self, EstimatorError> {
        let first = demos.first().ok_or(EstimatorError::EmptyDataset)?;
        let n = first.demo.skills.len();
        let mut raw = Vec::new();
        let mut labels = Vec::new();
        for (di, a) in demos.iter().enumerate() {
            if a.demo.skills.len() != n || a.progress.iter().any(|r| r.len() != n) {
                return Err(EstimatorError::InconsistentDimension {
                    demo: di,
                    got: a.demo.skills.len(),
                    expected: n,
                });
            }
            for (s, row) in a.demo.steps.iter().zip(&a.progress) {
                raw.push(featurize(params, &s.obs, &a.demo.goal));
                labels.push(row.iter().map(|v| v.clamp(0.0, 1.0)).collect());
            }
        }
        Self::from_parts(k, params.clone(), first.demo.skills.clone(), raw, labels)
    }

    fn from_parts(
        k: usize,
        params: SimParams,
        skills: Vec<String>,
        raw: Vec<[f64; FEATURE_DIM]>,
        labels: Vec<Vec<f64>>,
    ) -> Result<Self, EstimatorError> {
        if k == 0 {
            return Err(EstimatorError::InvalidK);
        }
        if raw.is_empty() {
            return Err(EstimatorError::EmptyDataset);
        }
        let mut lo = [f64::INFINITY; FEATURE_DIM];
        let mut hi = [f64::NEG_INFINITY; FEATURE_DIM];
        for f in &raw {
            for d in 0..FEATURE_DIM {
                lo[d] = lo[d].min(f[d]);
                hi[d] = hi[d].max(f[d]);
            }
        }
        let mut span = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            span[d] = hi[d] - lo[d];
        }
        let mut est = Self {
            k,
            params,
            skills,
            lo,
            span,
            raw: Vec::new(),
            scaled: Vec::new(),
            labels,
        };
        est.scaled = raw.iter().map(|f| est.scale(f)).collect();
        est.raw = raw;
        Ok(est)
    }

    fn scale(&self, f: &[f64; FEATURE_DIM]) -> [f64; FEATURE_DIM] {
        let mut out = [0.0; FEATURE_DIM];
        for d in 0..FEATURE_DIM {
            out[d] = if self.span[d] > 0.0 {
                ((f[d] - self.lo[d]) / self.span[d]).clamp(0.0, 1.0)
            } else {
                0.0
            };
        }
        out
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn skills(&self) -> &[String] {
        &self.skills
    }

    /// Indices of the `k` nearest stored points, nearest first.
    pub fn neighbors(&self, features: &[f64; FEATURE_DIM]) -> Vec<usize> {
        let q = self.scale(features);
        let k = self.k.min(self.scaled.len());
        // best k so far, sorted by (distance, index)
        let mut best: Vec<(f64, usize)> = Vec::with_capacity(k + 1);
        for (i, f) in self.scaled.iter().enumerate() {
            let mut d = 0.0;
            for j in 0..FEATURE_DIM {
                let t = f[j] - q[j];
                d += t * t;
            }
            if best.len() == k {
                let worst = best[k - 1];
                if (d, i) >= worst {
                    continue;
                }
                best.pop();
            }
            let at = best.partition_point(|&e| e < (d, i));
            best.insert(at, (d, i));
        }
        best.into_iter().map(|(_, i)| i).collect()
    }

    pub fn predict_features(&self, features: &[f64; FEATURE_DIM]) -> Vec<f64> {
        let idx = self.neighbors(features);
        let n = self.skills.len();
        let mut out = vec![0.0; n];
        for &i in &idx {
            for (o, v) in out.iter_mut().zip(&self.labels[i]) {
                *o += v;
            }
        }
        out.iter().map(|v| (v / idx.len() as f64).clamp(0.0, 1.0)).collect()
    }

    pub fn predict(&self, obs: &Observation, goal: &GoalSpec) -> Vec<f64> {
        self.predict_features(&featurize(&self.params, obs, goal))
    }

    pub fn to_json(&self) -> String {
        let snap = KnnSnapshot {
            schema_version: KNN_SCHEMA_VERSION,
            k: self.k,
            params: self.params.clone(),
            skills: self.skills.clone(),
            features: self.raw.iter().map(|f| f.to_vec()).collect(),
            labels: self.labels.clone(),
        };
        serde_json::to_string(&snap).expect("snapshot serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, EstimatorError> {
        let snap: KnnSnapshot =
            serde_json::from_str(text).map_err(|e| EstimatorError::Snapshot(e.to_string()))?;
        if snap.schema_version != KNN_SCHEMA_VERSION {
            return Err(EstimatorError::Snapshot(format!(
                "schema_version {} is not supported (expected {KNN_SCHEMA_VERSION})",
                snap.schema_version
            )));
        }
        if snap.features.len() != snap.labels.len() {
            return Err(EstimatorError::Snapshot("feature and label counts differ".into()));
        }
        let n = snap.skills.len();
        let mut raw = Vec::with_capacity(snap.features.len());
        for (f, l) in snap.features.iter().zip(&snap.labels) {
            let f: [f64; FEATURE_DIM] = f.as_slice().try_into().map_err(|_| {
                EstimatorError::Snapshot(format!("feature with {} entries", f.len()))
            })?;
            if l.len() != n {
                return Err(EstimatorError::Snapshot(format!("label with {} entries", l.len())));
            }
            raw.push(f);
        }
        Self::from_parts(snap.k, snap.params, snap.skills, raw, snap.labels)
    }
}

impl ProgressEstimator for KnnEstimator {
    fn name(&self) -> &'static str {
        "knn"
    }

    fn dim(&self) -> usize {
        self.skills.len()
    }

    fn estimate(&self, _world: &WorldState, obs: &Observation, goal: &GoalSpec) -> Vec<f64> {
        self.predict(obs, goal)
    }
}
