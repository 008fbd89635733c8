//! Damped pendulum bouncing between compliant walls, and its dataset generators.
//!
//! `θ̈ = −sin θ + F_k + F_c`, with the wall moment
//! `F_k = −sign(θ) k (|θ| − θ_w)²` once `|θ| ≥ θ_w` and the quadratic damper
//! `F_c = −sign(θ̇) c θ̇²`. The discrete-time map advances the ODE by `dt` with
//! classical RK4 split into `substeps` equal steps.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::Bounds;
use crate::dataset::{Provenance, TransitionDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PendulumParams {
    pub wall_stiffness: f64,
    pub damping: f64,
    pub wall_angle: f64,
    pub dt: f64,
    pub substeps: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        PendulumParams {
            wall_stiffness: 200.0,
            damping: 1.0,
            wall_angle: std::f64::consts::FRAC_PI_4,
            dt: 0.1,
            substeps: 10,
        }
    }
}

fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

impl PendulumParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.wall_stiffness > 0.0
            && self.damping >= 0.0
            && self.dt > 0.0
            && self.wall_angle > 0.0
            && self.substeps >= 1
            && [self.wall_stiffness, self.damping, self.dt, self.wall_angle]
                .iter()
                .all(|v| v.is_finite());
        if ok {
            Ok(())
        } else {
            Err(Error::Spec(format!("invalid pendulum parameters: {self:?}")))
        }
    }

    pub fn wall_moment(&self, theta: f64) -> f64 {
        let excess = theta.abs() - self.wall_angle;
        if excess >= 0.0 {
            -sign(theta) * self.wall_stiffness * excess * excess
        } else {
            0.0
        }
    }

    pub fn damping_moment(&self, rate: f64) -> f64 {
        -sign(rate) * self.damping * rate * rate
    }

    /// Angular acceleration at `(θ, θ̇)`.
    pub fn acceleration(&self, theta: f64, rate: f64) -> f64 {
        -theta.sin() + self.wall_moment(theta) + self.damping_moment(rate)
    }

    fn deriv(&self, s: [f64; 2]) -> [f64; 2] {
        [s[1], self.acceleration(s[0], s[1])]
    }

    /// One application of the discrete-time map.
    pub fn step(&self, x: [f64; 2]) -> [f64; 2] {
        let h = self.dt / self.substeps as f64;
        let mut s = x;
        for _ in 0..self.substeps {
            let k1 = self.deriv(s);
            let k2 = self.deriv([s[0] + 0.5 * h * k1[0], s[1] + 0.5 * h * k1[1]]);
            let k3 = self.deriv([s[0] + 0.5 * h * k2[0], s[1] + 0.5 * h * k2[1]]);
            let k4 = self.deriv([s[0] + h * k3[0], s[1] + h * k3[1]]);
            for i in 0..2 {
                s[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        s
    }

    /// Slice adapter for [`step`](Self::step).
    pub fn step_slice(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != 2 {
            return Err(Error::DimensionMismatch {
                expected: 2,
                got: x.len(),
            });
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteInput);
        }
        Ok(self.step([x[0], x[1]]).to_vec())
    }

    pub fn energy(&self, x: [f64; 2]) -> f64 {
        0.5 * x[1] * x[1] + (1.0 - x[0].cos())
    }
}

/// One-step map `x ↦ f(x)`, used as ground truth by the evaluator.
pub fn pendulum_step(params: &PendulumParams, x: [f64; 2]) -> [f64; 2] {
    params.step(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetKind {
    UniformGrid,
    GaussianCloud,
    Trajectories,
}

impl std::str::FromStr for DatasetKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" | "uniform_grid" => Ok(DatasetKind::UniformGrid),
            "gaussian" | "gaussian_cloud" => Ok(DatasetKind::GaussianCloud),
            "traj" | "trajectories" => Ok(DatasetKind::Trajectories),
            other => Err(Error::Spec(format!("unknown dataset kind `{other}`"))),
        }
    }
}

fn default_border() -> usize {
    100
}

fn default_trajectories() -> usize {
    100
}

fn default_bounds() -> Bounds {
    Bounds::pendulum_default()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetSpec {
    pub kind: DatasetKind,
    pub size: usize,
    #[serde(default = "default_bounds")]
    pub bounds: Bounds,
    /// Peak of the Gaussian cloud; defaults to the box midpoint.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub center: Option<Vec<f64>>,
    /// Per-axis standard deviation of the Gaussian cloud; defaults to a quarter of each side.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub std: Option<Vec<f64>>,
    #[serde(default = "default_border")]
    pub border_count: usize,
    #[serde(default = "default_trajectories")]
    pub n_trajectories: usize,
    #[serde(default)]
    pub seed: u64,
}

impl DatasetSpec {
    pub fn new(kind: DatasetKind, size: usize, seed: u64) -> Self {
        DatasetSpec {
            kind,
            size,
            bounds: Bounds::pendulum_default(),
            center: None,
            std: None,
            border_count: default_border(),
            n_trajectories: default_trajectories(),
            seed,
        }
    }

    pub fn uniform(size: usize) -> Self {
        Self::new(DatasetKind::UniformGrid, size, 0)
    }

    pub fn gaussian(size: usize, center: [f64; 2], seed: u64) -> Self {
        let mut s = Self::new(DatasetKind::GaussianCloud, size, seed);
        s.center = Some(center.to_vec());
        s
    }

    pub fn trajectories(size: usize, seed: u64) -> Self {
        Self::new(DatasetKind::Trajectories, size, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bounds.dim() != 2 {
            return Err(Error::Spec("the pendulum state is two-dimensional".into()));
        }
        self.bounds.check_nondegenerate()?;
        match self.kind {
            DatasetKind::UniformGrid => {
                if self.size < 4 {
                    return Err(Error::Spec("a uniform grid needs at least 4 points".into()));
                }
            }
            DatasetKind::GaussianCloud => {
                if self.border_count < 4 {
                    return Err(Error::Spec("border_count must be at least 4".into()));
                }
                if self.size < self.border_count {
                    return Err(Error::Spec(format!(
                        "size {} is smaller than border_count {}",
                        self.size, self.border_count
                    )));
                }
                let tol = 1e-12 * self.bounds.diagonal();
                if let Some(c) = &self.center {
                    let inside = c.len() == 2
                        && c.iter()
                            .enumerate()
                            .all(|(d, v)| *v >= self.bounds.lo[d] - tol && *v <= self.bounds.hi[d] + tol);
                    if !inside {
                        return Err(Error::Spec(format!("gaussian center {c:?} outside the bounds")));
                    }
                }
                if let Some(s) = &self.std {
                    if s.len() != 2 || s.iter().any(|v| !(*v > 0.0)) {
                        return Err(Error::Spec("gaussian std must be two positive numbers".into()));
                    }
                }
            }
            DatasetKind::Trajectories => {
                if self.n_trajectories == 0 || self.size < self.n_trajectories {
                    return Err(Error::Spec(format!(
                        "size {} cannot be split over {} trajectories",
                        self.size, self.n_trajectories
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Samples states according to `spec` and pairs each with its image under the map.
pub fn generate(spec: &DatasetSpec, params: &PendulumParams) -> Result<TransitionDataset> {
    spec.validate()?;
    params.validate()?;
    let (states, targets) = match spec.kind {
        DatasetKind::UniformGrid => {
            let side = (spec.size as f64).sqrt().floor() as usize;
            if side * side != spec.size {
                log::info!(
                    "uniform grid rounds {} down to {side}x{side} = {}",
                    spec.size,
                    side * side
                );
            }
            let states = spec.bounds.grid(&[side, side]);
            let targets = map_all(params, &states);
            (states, targets)
        }
        DatasetKind::GaussianCloud => {
            let mut states = border_points(&spec.bounds, spec.border_count);
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let center = spec.center.clone().unwrap_or_else(|| spec.bounds.midpoint());
            let std = spec
                .std
                .clone()
                .unwrap_or_else(|| (0..2).map(|d| spec.bounds.width(d) / 4.0).collect());
            let normals: Vec<Normal<f64>> = (0..2)
                .map(|d| Normal::new(center[d], std[d]).expect("validated std"))
                .collect();
            while states.len() < spec.size {
                let x: Vec<f64> = normals.iter().map(|n| n.sample(&mut rng)).collect();
                if spec.bounds.contains(&x) {
                    states.push(x);
                }
            }
            let targets = map_all(params, &states);
            (states, targets)
        }
        DatasetKind::Trajectories => {
            let steps = spec.size / spec.n_trajectories;
            if steps * spec.n_trajectories != spec.size {
                log::info!(
                    "{} trajectories of {steps} steps give {} samples",
                    spec.n_trajectories,
                    steps * spec.n_trajectories
                );
            }
            let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
            let starts: Vec<[f64; 2]> = (0..spec.n_trajectories)
                .map(|_| {
                    [
                        rng.random_range(spec.bounds.lo[0]..=spec.bounds.hi[0]),
                        rng.random_range(spec.bounds.lo[1]..=spec.bounds.hi[1]),
                    ]
                })
                .collect();
            let runs: Vec<_> = starts
                .par_iter()
                .map(|&x0| {
                    let mut xs = Vec::with_capacity(steps);
                    let mut ys = Vec::with_capacity(steps);
                    let mut x = x0;
                    for _ in 0..steps {
                        let y = params.step(x);
                        xs.push(x.to_vec());
                        ys.push(y.to_vec());
                        x = y;
                    }
                    (xs, ys)
                })
                .collect();
            runs.into_iter().fold((Vec::new(), Vec::new()), |(mut a, mut b), (xs, ys)| {
                a.extend(xs);
                b.extend(ys);
                (a, b)
            })
        }
    };
    let ds = TransitionDataset::new(states, targets)?;
    Ok(ds.with_provenance(Provenance {
        generator: format!("pendulum/{}", kind_label(spec.kind)),
        seed: Some(spec.seed),
        details: serde_json::json!({ "spec": spec, "params": params }),
    }))
}

fn kind_label(kind: DatasetKind) -> &'static str {
    match kind {
        DatasetKind::UniformGrid => "uniform",
        DatasetKind::GaussianCloud => "gaussian",
        DatasetKind::Trajectories => "trajectories",
    }
}

fn map_all(params: &PendulumParams, states: &[Vec<f64>]) -> Vec<Vec<f64>> {
    states
        .par_iter()
        .map(|x| params.step([x[0], x[1]]).to_vec())
        .collect()
}

/// `count` points on the perimeter of a 2-D box: the four corners plus the
/// rest shared among the sides in proportion to their lengths.
pub fn border_points(bounds: &Bounds, count: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = (&bounds.lo, &bounds.hi);
    let corners = [
        [lo[0], lo[1]],
        [hi[0], lo[1]],
        [hi[0], hi[1]],
        [lo[0], hi[1]],
    ];
    let lengths = [
        bounds.width(0),
        bounds.width(1),
        bounds.width(0),
        bounds.width(1),
    ];
    let total: f64 = lengths.iter().sum();
    // each side owns its start corner; distribute by largest remainder
    let quota: Vec<f64> = lengths.iter().map(|l| l / total * count as f64).collect();
    let mut per_side: Vec<usize> = quota.iter().map(|q| (q.floor() as usize).max(1)).collect();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        (quota[b] - quota[b].floor())
            .partial_cmp(&(quota[a] - quota[a].floor()))
            .unwrap()
            .then(a.cmp(&b))
    });
    let mut assigned: usize = per_side.iter().sum();
    let mut i = 0;
    while assigned < count {
        per_side[order[i % 4]] += 1;
        assigned += 1;
        i += 1;
    }
    while assigned > count {
        let side = (0..4).max_by_key(|&s| per_side[s]).unwrap();
        per_side[side] -= 1;
        assigned -= 1;
    }
    let mut out = Vec::with_capacity(count);
    for s in 0..4 {
        let a = corners[s];
        let b = corners[(s + 1) % 4];
        let k = per_side[s];
        for j in 0..k {
            let t = j as f64 / k as f64;
            out.push(vec![a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equilibrium_is_fixed() {
        let p = PendulumParams::default();
        assert_eq!(p.step([0.0, 0.0]), [0.0, 0.0]);
    }

    #[test]
    fn wall_engaged_acceleration() {
        // −sin(0.8) − 200 (0.8 − π/4)²
        let p = PendulumParams::default();
        let expected = -(0.8f64).sin() - 200.0 * (0.8 - std::f64::consts::FRAC_PI_4).powi(2);
        assert!((p.acceleration(0.8, 0.0) - expected).abs() < 1e-15);
        assert!((p.acceleration(0.8, 0.0) + 0.7600).abs() < 1e-4);
    }

    #[test]
    fn damped_free_swing_acceleration() {
        let p = PendulumParams::default();
        assert_eq!(p.wall_moment(0.5), 0.0);
        assert_eq!(p.damping_moment(1.0), -1.0);
        assert!((p.acceleration(0.5, 1.0) + 1.479_425_538_604_203).abs() < 1e-12);
    }

    #[test]
    fn odd_symmetry() {
        let p = PendulumParams::default();
        for x in [[0.3, 1.1], [0.9, -1.7], [-0.2, 0.05], [1.0, 2.0]] {
            let a = p.step(x);
            let b = p.step([-x[0], -x[1]]);
            assert!((a[0] + b[0]).abs() < 1e-12 && (a[1] + b[1]).abs() < 1e-12);
        }
    }

    #[test]
    fn energy_decreases_away_from_walls() {
        let p = PendulumParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let mut checked = 0;
        while checked < 1000 {
            let x = [rng.random_range(-0.7..0.7), rng.random_range(-1.0..1.0)];
            let y = p.step(x);
            if x[1] == 0.0 || y[0].abs() >= p.wall_angle || x[0].abs() >= p.wall_angle {
                continue;
            }
            // stay clear of the wall for the whole step
            let mid = PendulumParams { dt: p.dt / 2.0, substeps: p.substeps / 2, ..p }.step(x);
            if mid[0].abs() >= p.wall_angle {
                continue;
            }
            assert!(p.energy(y) < p.energy(x), "{x:?}");
            checked += 1;
        }
    }

    #[test]
    fn uniform_grid_size() {
        let ds = generate(&DatasetSpec::uniform(900), &PendulumParams::default()).unwrap();
        assert_eq!(ds.len(), 900);
        let b = Bounds::pendulum_default();
        assert!(ds.states().iter().all(|x| b.contains(x)));
    }

    #[test]
    fn gaussian_has_border_and_interior() {
        let spec = DatasetSpec::gaussian(1000, [0.0, 2.0], 3);
        let ds = generate(&spec, &PendulumParams::default()).unwrap();
        assert_eq!(ds.len(), 1000);
        let b = Bounds::pendulum_default();
        assert!(ds.states().iter().all(|x| b.contains(x)));
        let on_border = |x: &Vec<f64>| {
            x[0] == b.lo[0] || x[0] == b.hi[0] || x[1] == b.lo[1] || x[1] == b.hi[1]
        };
        assert!(ds.states()[..100].iter().all(on_border));
        for c in [[-0.8, -2.0], [0.8, -2.0], [0.8, 2.0], [-0.8, 2.0]] {
            assert!(ds.states()[..100].iter().any(|x| x[0] == c[0] && x[1] == c[1]));
        }
    }

    #[test]
    fn border_counts_are_exact() {
        for n in [4, 5, 37, 100, 101] {
            assert_eq!(border_points(&Bounds::pendulum_default(), n).len(), n);
        }
    }

    #[test]
    fn trajectories_shape() {
        let ds = generate(&DatasetSpec::trajectories(1000, 1), &PendulumParams::default()).unwrap();
        assert_eq!(ds.len(), 1000);
        // consecutive samples chain within a trajectory
        for t in 0..9 {
            assert_eq!(ds.targets()[t], ds.states()[t + 1]);
        }
        assert_ne!(ds.targets()[9], ds.states()[10]);
    }

    #[test]
    fn generation_is_reproducible() {
        let p = PendulumParams::default();
        for spec in [
            DatasetSpec::gaussian(500, [0.8, 0.0], 12),
            DatasetSpec::trajectories(600, 12),
        ] {
            let a = generate(&spec, &p).unwrap();
            let b = generate(&spec, &p).unwrap();
            assert_eq!(a, b);
        }
        let a = generate(&DatasetSpec::gaussian(500, [0.8, 0.0], 1), &p).unwrap();
        let b = generate(&DatasetSpec::gaussian(500, [0.8, 0.0], 2), &p).unwrap();
        assert_ne!(a, b);
    }

    #[test]
    fn spec_errors() {
        let p = PendulumParams::default();
        assert!(matches!(
            generate(&DatasetSpec::gaussian(50, [0.0, 0.0], 0), &p),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            generate(&DatasetSpec::gaussian(500, [3.0, 0.0], 0), &p),
            Err(Error::Spec(_))
        ));
        assert!(matches!(
            generate(&DatasetSpec::trajectories(50, 0), &p),
            Err(Error::Spec(_))
        ));
    }
}
