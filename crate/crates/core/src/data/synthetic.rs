use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use super::{Dataset, Label};
use crate::error::{MknnError, Result};

/// Two-class, two-dimensional manifold generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SyntheticKind {
    /// Interleaved half circles.
    TwoArcs,
    /// An outer arch around a mirrored S.
    ArchAndS,
    /// Concentric circles.
    Circles,
    /// Two arcs with bridging points in the gap between them.
    NoisyGap,
}

impl SyntheticKind {
    pub const ALL: [SyntheticKind; 4] = [
        SyntheticKind::TwoArcs,
        SyntheticKind::ArchAndS,
        SyntheticKind::Circles,
        SyntheticKind::NoisyGap,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticKind::TwoArcs => "two-arcs",
            SyntheticKind::ArchAndS => "arch-and-s",
            SyntheticKind::Circles => "circles",
            SyntheticKind::NoisyGap => "noisy-gap",
        }
    }

    /// Point on the class curve for a parameter `t` in `[0, 1]`.
    pub fn curve_point(self, class: Label, t: f64) -> [f64; 2] {
        match (self, class) {
            (SyntheticKind::TwoArcs | SyntheticKind::NoisyGap, 1) => {
                let a = PI * t;
                [a.cos(), a.sin()]
            }
            (SyntheticKind::TwoArcs | SyntheticKind::NoisyGap, _) => {
                let a = PI * t;
                [1.0 - a.cos(), 0.5 - a.sin()]
            }
            (SyntheticKind::ArchAndS, 1) => {
                let a = PI * t;
                [2.0 * a.cos(), 2.0 * a.sin()]
            }
            (SyntheticKind::ArchAndS, _) => {
                let s = 2.0 * t - 1.0;
                [-0.7 * (PI * s).sin(), 0.9 + 0.7 * s]
            }
            (SyntheticKind::Circles, c) => {
                let r = if c == 1 { 1.0 } else { 2.0 };
                let a = 2.0 * PI * t;
                [r * a.cos(), r * a.sin()]
            }
        }
    }

    /// Gap segments `(class-1 end, class-2 end)` that bridging points fill.
    fn gaps(self) -> Vec<([f64; 2], [f64; 2])> {
        match self {
            SyntheticKind::TwoArcs | SyntheticKind::NoisyGap => {
                vec![([0.0, 1.0], [0.0, 0.5]), ([1.0, 0.0], [1.0, -0.5])]
            }
            SyntheticKind::ArchAndS => [0.25, 0.75]
                .iter()
                .map(|&t| {
                    let s = self.curve_point(2, t);
                    let r = (s[0] * s[0] + s[1] * s[1]).sqrt();
                    ([2.0 * s[0] / r, 2.0 * s[1] / r], s)
                })
                .collect(),
            SyntheticKind::Circles => vec![([1.0, 0.0], [2.0, 0.0]), ([-1.0, 0.0], [-2.0, 0.0])],
        }
    }
}

impl fmt::Display for SyntheticKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticKind {
    type Err = MknnError;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| MknnError::UnknownKind(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticSpec {
    pub kind: SyntheticKind,
    pub points_per_class: usize,
    /// Standard deviation of the isotropic Gaussian jitter.
    pub noise: f64,
    /// Per-class count of points placed in the gap instead of on the curve.
    pub bridge_points: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// Defaults to no bridging points, except `NoisyGap` which bridges a
    /// fiftieth of each class (at least one point).
    pub fn new(kind: SyntheticKind, points_per_class: usize, noise: f64, seed: u64) -> Self {
        let bridge_points = match kind {
            SyntheticKind::NoisyGap => (points_per_class / 50).max(1),
            _ => 0,
        };
        Self {
            kind,
            points_per_class,
            noise,
            bridge_points,
            seed,
        }
    }

    pub fn with_bridges(mut self, bridge_points: usize) -> Self {
        self.bridge_points = bridge_points;
        self
    }
}

pub fn make_synthetic(
    kind: SyntheticKind,
    points_per_class: usize,
    noise: f64,
    seed: u64,
) -> Result<Dataset> {
    make_synthetic_with(&SyntheticSpec::new(kind, points_per_class, noise, seed))
}

/// Generates a fully labeled two-class 2-D dataset: class 1 rows first, then
/// class 2, each exactly `points_per_class` long.
pub fn make_synthetic_with(spec: &SyntheticSpec) -> Result<Dataset> {
    if spec.points_per_class < 10 {
        return Err(MknnError::param("points_per_class", "must be at least 10"));
    }
    if !(spec.noise >= 0.0 && spec.noise.is_finite()) {
        return Err(MknnError::param("noise", "must be finite and nonnegative"));
    }
    if spec.bridge_points >= spec.points_per_class {
        return Err(MknnError::param(
            "bridge_points",
            "must be smaller than points_per_class",
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let jitter = Normal::new(0.0, spec.noise).expect("validated noise");
    let gaps = spec.kind.gaps();
    let on_curve = spec.points_per_class - spec.bridge_points;

    let mut samples = Vec::with_capacity(4 * spec.points_per_class);
    let mut labels = Vec::with_capacity(2 * spec.points_per_class);
    for class in 1..=2 as Label {
        for _ in 0..on_curve {
            let p = spec.kind.curve_point(class, rng.random::<f64>());
            push_jittered(&mut samples, p, &jitter, spec.noise, &mut rng);
        }
        for b in 0..spec.bridge_points {
            let (a1, a2) = gaps[b % gaps.len()];
            let (near, far) = if class == 1 { (a1, a2) } else { (a2, a1) };
            let u = 0.5 * rng.random::<f64>();
            let p = [
                near[0] + u * (far[0] - near[0]),
                near[1] + u * (far[1] - near[1]),
            ];
            push_jittered(&mut samples, p, &jitter, spec.noise, &mut rng);
        }
        labels.extend(std::iter::repeat_n(Some(class), spec.points_per_class));
    }
    Dataset::from_flat(samples, 2, labels)
}

fn push_jittered(
    out: &mut Vec<f64>,
    p: [f64; 2],
    jitter: &Normal<f64>,
    noise: f64,
    rng: &mut ChaCha8Rng,
) {
    if noise > 0.0 {
        out.push(p[0] + jitter.sample(rng));
        out.push(p[1] + jitter.sample(rng));
    } else {
        out.extend_from_slice(&p);
    }
}
