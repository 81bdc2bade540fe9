//! Independent reference implementations for the integration tests.
//!
//! Nothing here calls into the solver's operator or kernel code: kernels,
//! pair targets and fragment counts are recomputed from their definitions
//! with plain loops.

#![allow(dead_code)]

use colbreak::{Grid, KernelVariant};

#[derive(Debug, Clone, Copy)]
pub struct Physics {
    pub variant: KernelVariant,
    pub k: f64,
    pub omega: f64,
    pub sigma: f64,
    /// `None` for volume-dependent probability `(small, large, crossover)`.
    pub e: Option<f64>,
    pub e_vol: (f64, f64, f64),
    /// `None` means elastic collisions.
    pub theta: Option<f64>,
}

impl Physics {
    pub fn kernel(&self, u: f64, v: f64) -> f64 {
        match self.variant {
            KernelVariant::Constant => self.k,
            KernelVariant::KineticTheory => {
                self.k * (u.powf(1.0 / 3.0) + v.powf(1.0 / 3.0)) * (u * v).powf(0.5)
                    / (u + v).powf(1.5)
            }
            KernelVariant::SingularBound => {
                self.k * ((1.0 + u) * (1.0 + v)).powf(self.omega) / (u + v).powf(self.sigma)
            }
            KernelVariant::UniquenessClass => self.k / (u + v).powf(self.sigma),
            KernelVariant::Product => self.k * u * v,
        }
    }

    pub fn coalescence(&self, u: f64, v: f64) -> f64 {
        match self.e {
            Some(e) => e,
            None => {
                let (small, large, crossover) = self.e_vol;
                (large + (small - large) * (-(u + v) / crossover).exp()).clamp(0.0, 1.0)
            }
        }
    }
}

/// Pivots and widths read straight from the cell edges.
pub fn pivots(grid: &Grid) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let edges = grid.edges();
    let x = edges.windows(2).map(|w| (w[0] * w[1]).sqrt()).collect();
    let dx = edges.windows(2).map(|w| w[1] - w[0]).collect();
    (edges, x, dx)
}

/// Fragment counts per cell for a pair of total volume `s`, power-law
/// daughter density, rescaled so `Σ b_l x_l = s`.
pub fn fragments(edges: &[f64], x: &[f64], s: f64, theta: f64) -> Vec<f64> {
    let p = theta + 1.0;
    let mut b = vec![0.0; x.len()];
    let mut mass = 0.0;
    for l in 0..x.len() {
        let (lo, hi) = (edges[l], edges[l + 1].min(s));
        if lo >= s {
            break;
        }
        // ∫_lo^hi (θ+2) μ^θ / s^{θ+1} dμ
        b[l] = (theta + 2.0) / p * (hi.powf(p) - lo.powf(p)) / s.powf(p);
        mass += b[l] * x[l];
    }
    for v in &mut b {
        *v *= s / mass;
    }
    b
}

/// `(dg/dt, gross)` where `gross[l]` sums the magnitudes of every
/// contribution to cell `l`.
pub fn naive_rhs(grid: &Grid, ph: &Physics, g: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (edges, x, dx) = pivots(grid);
    let m = x.len();
    let n = grid.n();
    let mut d = vec![0.0; m];
    let mut gross = vec![0.0; m];
    let mut add = |l: usize, v: f64, d: &mut Vec<f64>| {
        d[l] += v;
        gross[l] += v.abs();
    };
    for i in 0..m {
        for j in 0..m {
            let s = x[i] + x[j];
            if s >= n {
                continue;
            }
            let k = ph.kernel(x[i], x[j]);
            let e = ph.coalescence(x[i], x[j]);
            let events = 0.5 * k * g[i] * dx[i] * g[j] * dx[j];

            // death, counted once per ordered pair for cell i
            add(i, -k * g[i] * g[j] * dx[j], &mut d);

            // coalescence birth
            let coag = e * events;
            if s >= x[m - 1] {
                add(m - 1, coag * s / x[m - 1] / dx[m - 1], &mut d);
            } else {
                let mut l = 0;
                while x[l + 1] <= s {
                    l += 1;
                }
                let w = (x[l + 1] - s) / (x[l + 1] - x[l]);
                add(l, coag * w / dx[l], &mut d);
                add(l + 1, coag * (1.0 - w) / dx[l + 1], &mut d);
            }

            // breakage birth
            let brk = (1.0 - e) * events;
            if brk == 0.0 {
                continue;
            }
            match ph.theta {
                None => {
                    add(i, brk / dx[i], &mut d);
                    add(j, brk / dx[j], &mut d);
                }
                Some(theta) => {
                    for (l, b) in fragments(&edges, &x, s, theta).into_iter().enumerate() {
                        if b != 0.0 {
                            add(l, brk * b / dx[l], &mut d);
                        }
                    }
                }
            }
        }
    }
    (d, gross)
}
