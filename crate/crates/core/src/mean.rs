//! Expected system matrices, estimated by Monte Carlo.
//!
//! Entries such as `E[R(1−δ)]` mix correlated log- and logit-normals and have
//! no closed form, so every entry is a sample mean with its standard error.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::dynamics::{JointState, SystemLayout, SystemMatrices};
use crate::error::{CoreError, Result};
use crate::latent::{JointDraw, LatentDistribution};

pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const DEFAULT_SEED: u64 = 12345;
pub const MIN_SAMPLES: usize = 10_000;

/// Sample means of the draw components themselves.
#[derive(Debug, Clone, PartialEq)]
pub struct MeanDraw {
    pub lambda0: Vec<f64>,
    pub lambda1: Vec<f64>,
    pub delta: Vec<f64>,
    pub r_ill: Vec<f64>,
    pub r_liq: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanMatrices {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub g: DMatrix<f64>,
    pub se_a: DMatrix<f64>,
    pub se_b: DMatrix<f64>,
    pub se_f: DMatrix<f64>,
    pub se_g: DMatrix<f64>,
    pub layout: SystemLayout,
    pub n_ill: usize,
    pub n_liq: usize,
    pub draw: MeanDraw,
    pub samples: usize,
    pub seed: u64,
}

/// Running mean and sum of squared deviations (Welford).
struct Moments {
    mean: Vec<f64>,
    m2: Vec<f64>,
    count: f64,
}

impl Moments {
    fn new(n: usize) -> Self {
        Self {
            mean: vec![0.0; n],
            m2: vec![0.0; n],
            count: 0.0,
        }
    }

    fn push(&mut self, xs: impl Iterator<Item = f64>) {
        self.count += 1.0;
        for ((m, s), x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(xs) {
            let d = x - *m;
            *m += d / self.count;
            *s += d * (x - *m);
        }
    }

    fn std_errors(&self) -> Vec<f64> {
        let n = self.count;
        self.m2
            .iter()
            .map(|s| if n > 1.0 { (s / (n - 1.0) / n).max(0.0).sqrt() } else { 0.0 })
            .collect()
    }
}

fn flatten(d: &JointDraw) -> impl Iterator<Item = f64> + '_ {
    d.lambda0
        .iter()
        .chain(&d.lambda1)
        .chain(&d.delta)
        .chain(&d.r_ill)
        .chain(&d.r_liq)
        .copied()
}

/// Averages [`crate::dynamics::build_matrices`] over `samples` draws from a
/// stream seeded with `seed`.
pub fn mean_matrices(dist: &LatentDistribution, layout: SystemLayout, samples: usize, seed: u64) -> Result<MeanMatrices> {
    if samples < MIN_SAMPLES {
        return Err(CoreError::Argument(format!(
            "at least {MIN_SAMPLES} samples are needed, got {samples}"
        )));
    }
    let (m, q) = (dist.n_ill(), dist.n_liq());
    let mut sys = SystemMatrices::zeros(layout, m, q);
    let sizes = [sys.a.len(), sys.b.len(), sys.f.len(), sys.g.len()];
    let mut mats = Moments::new(sizes.iter().sum());
    let mut comps = Moments::new(4 * m + q);

    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (mut eps, mut z) = (Vec::new(), Vec::new());
    for _ in 0..samples {
        dist.sample_latent(&mut rng, &mut eps, &mut z);
        let draw = dist.draw_from_latent(&z);
        sys.fill(&draw);
        mats.push(
            sys.a
                .iter()
                .chain(sys.b.iter())
                .chain(sys.f.iter())
                .chain(sys.g.iter())
                .copied(),
        );
        comps.push(flatten(&draw));
    }

    let se = mats.std_errors();
    let unpack = |src: &[f64], like: &DMatrix<f64>, offset: usize| {
        DMatrix::from_column_slice(like.nrows(), like.ncols(), &src[offset..offset + like.len()])
    };
    let offs = [0, sizes[0], sizes[0] + sizes[1], sizes[0] + sizes[1] + sizes[2]];
    let c = &comps.mean;
    Ok(MeanMatrices {
        a: unpack(&mats.mean, &sys.a, offs[0]),
        b: unpack(&mats.mean, &sys.b, offs[1]),
        f: unpack(&mats.mean, &sys.f, offs[2]),
        g: unpack(&mats.mean, &sys.g, offs[3]),
        se_a: unpack(&se, &sys.a, offs[0]),
        se_b: unpack(&se, &sys.b, offs[1]),
        se_f: unpack(&se, &sys.f, offs[2]),
        se_g: unpack(&se, &sys.g, offs[3]),
        layout,
        n_ill: m,
        n_liq: q,
        draw: MeanDraw {
            lambda0: c[..m].to_vec(),
            lambda1: c[m..2 * m].to_vec(),
            delta: c[2 * m..3 * m].to_vec(),
            r_ill: c[3 * m..4 * m].to_vec(),
            r_liq: c[4 * m..].to_vec(),
        },
        samples,
        seed,
    })
}

impl MeanMatrices {
    /// Mean matrices of a degenerate distribution that always produces
    /// `draw` (standard errors are zero).
    pub fn from_draw(draw: &JointDraw, layout: SystemLayout) -> Self {
        let sys = crate::dynamics::build_matrices(draw, layout);
        let zeros = |m: &DMatrix<f64>| DMatrix::zeros(m.nrows(), m.ncols());
        MeanMatrices {
            se_a: zeros(&sys.a),
            se_b: zeros(&sys.b),
            se_f: zeros(&sys.f),
            se_g: zeros(&sys.g),
            a: sys.a,
            b: sys.b,
            f: sys.f,
            g: sys.g,
            layout,
            n_ill: draw.n_ill(),
            n_liq: draw.n_liq(),
            draw: MeanDraw {
                lambda0: draw.lambda0.clone(),
                lambda1: draw.lambda1.clone(),
                delta: draw.delta.clone(),
                r_ill: draw.r_ill.clone(),
                r_liq: draw.r_liq.clone(),
            },
            samples: 1,
            seed: 0,
        }
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn control_dim(&self) -> usize {
        self.b.ncols()
    }

    /// `Ā x + B̄ u`.
    pub fn step(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        mat_vec2(&self.a, x, &self.b, u)
    }

    /// `F̄ x + Ḡ u`.
    pub fn output(&self, x: &[f64], u: &[f64]) -> Vec<f64> {
        mat_vec2(&self.f, x, &self.g, u)
    }

    /// The illiquid-only system embedded in a joint one (identical entries,
    /// since the illiquid block does not depend on liquid quantities).
    pub fn illiquid_part(&self) -> MeanMatrices {
        if self.layout == SystemLayout::IlliquidOnly {
            return self.clone();
        }
        let m = self.n_ill;
        let xs = 1..1 + 2 * m;
        let us = self.n_liq..self.n_liq + m;
        let ys = 1..1 + 4 * m;
        let sub = |mat: &DMatrix<f64>, r: &std::ops::Range<usize>, c: &std::ops::Range<usize>| {
            mat.view((r.start, c.start), (r.len(), c.len())).into_owned()
        };
        MeanMatrices {
            a: sub(&self.a, &xs, &xs),
            b: sub(&self.b, &xs, &us),
            f: sub(&self.f, &ys, &xs),
            g: sub(&self.g, &ys, &us),
            se_a: sub(&self.se_a, &xs, &xs),
            se_b: sub(&self.se_b, &xs, &us),
            se_f: sub(&self.se_f, &ys, &xs),
            se_g: sub(&self.se_g, &ys, &us),
            layout: SystemLayout::IlliquidOnly,
            n_ill: m,
            n_liq: self.n_liq,
            draw: self.draw.clone(),
            samples: self.samples,
            seed: self.seed,
        }
    }

    /// Next mean joint state; only valid for the joint layout.
    pub fn step_joint(&self, x: &JointState, u: &crate::dynamics::Control) -> JointState {
        JointState::from_slice(&self.step(&x.to_vec(), &u.to_vec()))
    }
}

fn mat_vec2(a: &DMatrix<f64>, x: &[f64], b: &DMatrix<f64>, u: &[f64]) -> Vec<f64> {
    (0..a.nrows())
        .map(|r| {
            (0..a.ncols()).map(|c| a[(r, c)] * x[c]).sum::<f64>()
                + (0..b.ncols()).map(|c| b[(r, c)] * u[c]).sum::<f64>()
        })
        .collect()
}

/// Memoizes [`mean_matrices`] per (distribution, layout, sample count, seed).
/// Owned by the caller; there is no global cache.
#[derive(Debug, Default)]
pub struct MeanMatrixCache {
    entries: HashMap<CacheKey, Arc<MeanMatrices>>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
struct CacheKey {
    params: Vec<u64>,
    layout: SystemLayout,
    samples: usize,
    seed: u64,
}

impl MeanMatrixCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get_or_compute(
        &mut self,
        dist: &LatentDistribution,
        layout: SystemLayout,
        samples: usize,
        seed: u64,
    ) -> Result<Arc<MeanMatrices>> {
        let l = dist.layout();
        let params = dist
            .mean()
            .iter()
            .chain(dist.cov().iter())
            .map(|v| v.to_bits())
            .chain([dist.n_ill() as u64, dist.n_liq() as u64])
            .chain([&l.lambda, &l.delta, &l.ret_ill, &l.ret_liq].into_iter().flat_map(|r| [r.start as u64, r.end as u64]))
            .collect();
        let key = CacheKey {
            params,
            layout,
            samples,
            seed,
        };
        if let Some(hit) = self.entries.get(&key) {
            return Ok(Arc::clone(hit));
        }
        let mm = Arc::new(mean_matrices(dist, layout, samples, seed)?);
        self.entries.insert(key, Arc::clone(&mm));
        Ok(mm)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}
