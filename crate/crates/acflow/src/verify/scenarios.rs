//! The two-dimensional experiment library: spinodal decomposition, bubble
//! merging and bubble shrinking, plus documented (not executed) 3-D
//! mean-curvature setups.
//!
//! Parameter conventions: the experiments set μ = ν = γ = 1 together with two
//! quartic-potential coefficients written ambiguously in the source material;
//! they are interpreted here as ρ = λ = 1 and stay overridable through the
//! run configuration. η defaults to 1.

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::fem::Spaces;
use crate::model::PhysParams;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    Spinodal,
    BubbleMerge,
    BubbleShrink,
}

impl ScenarioKind {
    pub fn parse(name: &str) -> Result<Self> {
        match name {
            "spinodal" => Ok(ScenarioKind::Spinodal),
            "bubble_merge" => Ok(ScenarioKind::BubbleMerge),
            "bubble_shrink" => Ok(ScenarioKind::BubbleShrink),
            other => Err(Error::invalid(format!(
                "unknown scenario '{other}' (expected spinodal, bubble_merge, bubble_shrink)"
            ))),
        }
    }
}

#[derive(Clone, Debug)]
pub enum Phi0 {
    /// Uniform random nodal values in [-amp, amp].
    Random { amp: f64 },
    /// 1 + Σ tanh((r_i - dist_i) / width).
    TanhBubbles {
        centers: Vec<[f64; 2]>,
        radii: Vec<f64>,
        width: f64,
    },
}

#[derive(Clone, Debug)]
pub struct Scenario {
    pub kind: ScenarioKind,
    pub name: &'static str,
    pub x_range: (f64, f64),
    pub y_range: (f64, f64),
    /// Default cells per side (paper-scale).
    pub nx: usize,
    pub ny: usize,
    pub params: PhysParams,
    pub horizon: f64,
    pub dt: f64,
    pub phi0: Phi0,
    /// Random velocity amplitude (uniform per nodal dof).
    pub u0_amp: f64,
    pub snapshot_times: Vec<f64>,
    pub default_seed: u64,
}

pub fn scenario_library(kind: ScenarioKind) -> Scenario {
    let base = PhysParams {
        mu: 1.0,
        gamma: 1.0,
        nu: 1.0,
        rho: 1.0,
        lambda: 1.0,
        sigma: 1.0,
        kappa: 0.01,
        eta: 1.0,
    };
    match kind {
        ScenarioKind::Spinodal => Scenario {
            kind,
            name: "spinodal",
            x_range: (0.0, 1.5),
            y_range: (0.0, 1.5),
            nx: 96,
            ny: 96,
            params: PhysParams {
                sigma: 100.0,
                ..base
            },
            horizon: 2.0,
            dt: 0.01,
            phi0: Phi0::Random { amp: 0.001 },
            u0_amp: 1.0,
            snapshot_times: vec![0.0, 0.3, 1.0, 2.0],
            default_seed: 20240842,
        },
        ScenarioKind::BubbleMerge => Scenario {
            kind,
            name: "bubble_merge",
            x_range: (0.0, 1.5),
            y_range: (0.0, 1.5),
            nx: 96,
            ny: 96,
            params: PhysParams { sigma: 10.0, ..base },
            horizon: 0.4,
            dt: 0.01,
            phi0: Phi0::TanhBubbles {
                centers: vec![[0.5, 0.75], [1.0, 0.75]],
                radii: vec![0.25, 0.25],
                width: 0.02,
            },
            u0_amp: 1.0,
            snapshot_times: vec![0.0, 0.1, 0.2, 0.4],
            default_seed: 20240843,
        },
        ScenarioKind::BubbleShrink => Scenario {
            kind,
            name: "bubble_shrink",
            x_range: (0.0, 2.0 * std::f64::consts::PI),
            y_range: (0.0, 2.0 * std::f64::consts::PI),
            nx: 64,
            ny: 64,
            params: PhysParams { sigma: 10.0, ..base },
            horizon: 1.2,
            dt: 0.01,
            phi0: Phi0::TanhBubbles {
                centers: vec![
                    [std::f64::consts::PI - 0.8, std::f64::consts::PI],
                    [std::f64::consts::PI + 1.7, std::f64::consts::PI],
                ],
                radii: vec![1.4, 0.5],
                width: 0.06,
            },
            u0_amp: 1.0,
            snapshot_times: vec![0.0, 0.5, 0.8, 1.2],
            default_seed: 20240844,
        },
    }
}

impl Phi0 {
    pub fn eval(&self, x: f64, y: f64) -> Option<f64> {
        match self {
            Phi0::Random { .. } => None,
            Phi0::TanhBubbles {
                centers,
                radii,
                width,
            } => {
                let mut v = 1.0;
                for (c, r) in centers.iter().zip(radii) {
                    let d = ((x - c[0]) * (x - c[0]) + (y - c[1]) * (y - c[1])).sqrt();
                    v += ((r - d) / width).tanh();
                }
                Some(v)
            }
        }
    }
}

impl Scenario {
    /// Nodal initial data (phase field and raw velocity) for the given mesh,
    /// reproducible from the seed.
    pub fn initial_nodal_data(&self, spaces: &Spaces, seed: u64) -> (Vec<f64>, Vec<f64>) {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let phi = match &self.phi0 {
            Phi0::Random { amp } => spaces
                .scalar
                .node_coords
                .iter()
                .map(|_| rng.random_range(-amp..=*amp))
                .collect(),
            Phi0::TanhBubbles { .. } => spaces
                .scalar
                .node_coords
                .iter()
                .map(|&[x, y]| self.phi0.eval(x, y).unwrap())
                .collect(),
        };
        let u_raw: Vec<f64> = (0..spaces.vel.n_dofs)
            .map(|_| rng.random_range(-self.u0_amp..=self.u0_amp))
            .collect();
        (phi, u_raw)
    }
}

/// Documented three-dimensional mean-curvature setups. The solver is
/// two-dimensional; these records exist so the configurations are preserved
/// in the scenario format.
pub mod three_dimensional {
    /// Sphere of radius 0.35 centered in the unit cube, interface width
    /// 0.04·√2, horizon 0.2 at k = 0.01.
    pub const SPHERE: &str = "phi0(x,y,z) = tanh((0.35 - |x - c|)/(0.04 sqrt(2))), c = (0.5,0.5,0.5), \
         D = [0,1]^3, sigma = 10, kappa = 0.01, T = 0.2, k = 0.01, h = 1/64";
    /// Dumbbell/toroidal initial shape built from two spherical caps joined
    /// by a cylinder.
    pub const DUMBBELL: &str = "piecewise tanh caps at x = 0.4 and x = 1.6 (radius R1) joined by a \
         cylinder of radius R2 about the x-axis; same parameters as the sphere";
}
