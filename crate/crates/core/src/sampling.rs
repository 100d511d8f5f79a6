//! Seeded random spectra inside the Garding cones.
//!
//! Positive vectors receive bounded negative perturbations and are then
//! filtered through [`cone_membership`], which gives coverage right up to
//! the cone boundary.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::functionals::pointwise;
use crate::geometry::Geometry;
use crate::symfun::{cone_membership_with, default_floor};

#[derive(Debug, Clone)]
pub struct ConeSampler {
    rng: ChaCha8Rng,
    n: usize,
    k: usize,
    /// Entries are drawn in `(0, 1]` and then shifted by up to `-spread`.
    pub spread: f64,
}

impl ConeSampler {
    pub fn new(seed: u64, n: usize, k: usize) -> Self {
        Self { rng: ChaCha8Rng::seed_from_u64(seed), n, k, spread: 1.0 }
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    fn candidate(&mut self) -> Vec<f64> {
        let n = self.n;
        let mut v: Vec<f64> = (0..n).map(|_| self.rng.gen_range(1e-3..1.0)).collect();
        // perturb a random number of entries negatively
        let m = self.rng.gen_range(0..=n);
        for _ in 0..m {
            let i = self.rng.gen_range(0..n);
            v[i] -= self.rng.gen_range(0.0..self.spread);
        }
        let scale = 10f64.powf(self.rng.gen_range(-1.0..1.0));
        v.iter_mut().for_each(|x| *x *= scale);
        v
    }

    /// Next spectrum in `Gamma_k^+`.
    pub fn sample(&mut self) -> Vec<f64> {
        loop {
            let v = self.candidate();
            if cone_membership_with(&v, default_floor).contains(self.k) {
                return v;
            }
        }
    }

    /// Next spectrum in `Gamma_k^+` whose largest entry is positive.
    pub fn sample_with_positive_max(&mut self) -> Vec<f64> {
        loop {
            let v = self.sample();
            if v.iter().cloned().fold(f64::NEG_INFINITY, f64::max) > 0.0 {
                return v;
            }
        }
    }

    /// Uniform vector in `[-1, 1]^n`, regardless of cone membership.
    pub fn sample_unconstrained(&mut self) -> Vec<f64> {
        (0..self.n).map(|_| self.rng.gen_range(-1.0..1.0)).collect()
    }
}

/// Zonal field `sum_{j=1}^{modes} a_j cos(j theta)` with `a_j` uniform in `(-amplitude/j, amplitude/j)`.
pub fn zonal_perturbation(rng: &mut impl Rng, nodes: &[f64], modes: usize, amplitude: f64) -> Vec<f64> {
    let a: Vec<f64> = (1..=modes).map(|j| rng.gen_range(-amplitude..amplitude) / j as f64).collect();
    nodes
        .iter()
        .map(|th| a.iter().enumerate().map(|(j, c)| c * ((j + 1) as f64 * th).cos()).sum())
        .collect()
}

/// First zonal perturbation whose metric lies in `Gamma_k^+` at every node.
pub fn admissible_zonal(
    geom: &Geometry<f64>,
    rng: &mut impl Rng,
    k: usize,
    modes: usize,
    amplitude: f64,
    max_tries: usize,
) -> Option<Vec<f64>> {
    (0..max_tries).find_map(|_| {
        let u = zonal_perturbation(rng, geom.nodes(), modes, amplitude);
        pointwise(geom, &geom.derivatives(&u), k, 0).admissible().then_some(u)
    })
}
