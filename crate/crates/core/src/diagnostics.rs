//! Moments, the weighted `S`-norm, the a-priori bound certificate, tail
//! masses and the weighted distance used in the contraction estimate.
//!
//! All functions are pure reads over states.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::operators::State;

fn check_len(grid: &Grid, s: &State) -> Result<()> {
    if s.len() == grid.len() {
        Ok(())
    } else {
        Err(Error::LengthMismatch {
            expected: grid.len(),
            got: s.len(),
        })
    }
}

/// `M_q = Σ x_i^q g_i Δ_i`
pub fn moment(s: &State, grid: &Grid, q: f64) -> Result<f64> {
    check_len(grid, s)?;
    Ok(moment_unchecked(&s.g, grid, q))
}

fn moment_unchecked(g: &[f64], grid: &Grid, q: f64) -> f64 {
    grid.cells()
        .iter()
        .zip(g)
        .map(|(c, g)| c.volume.powf(q) * g * c.width)
        .sum()
}

/// `‖g‖_S = M₀ + M₁ + M_{−2σ}`, with `|g|` in place of `g`.
pub fn s_norm(s: &State, grid: &Grid, sigma: f64) -> Result<f64> {
    check_len(grid, s)?;
    Ok(grid
        .cells()
        .iter()
        .zip(&s.g)
        .map(|(c, g)| (1.0 + c.volume + c.volume.powf(-2.0 * sigma)) * g.abs() * c.width)
        .sum())
}

/// Moments at one instant, keyed by exponent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRecord {
    pub t: f64,
    pub exponents: Vec<f64>,
    pub values: Vec<f64>,
}

impl MomentRecord {
    /// `{−2σ, −σ, 0, 1}` followed by `extras`.
    pub fn compute(s: &State, grid: &Grid, sigma: f64, extras: &[f64]) -> Result<Self> {
        check_len(grid, s)?;
        let exponents: Vec<f64> = [-2.0 * sigma, -sigma, 0.0, 1.0]
            .into_iter()
            .chain(extras.iter().copied())
            .collect();
        let values = exponents
            .iter()
            .map(|&q| moment_unchecked(&s.g, grid, q))
            .collect();
        Ok(Self {
            t: s.t,
            exponents,
            values,
        })
    }

    pub fn get(&self, q: f64) -> Option<f64> {
        self.exponents
            .iter()
            .position(|&e| e == q)
            .map(|i| self.values[i])
    }

    pub fn number(&self) -> f64 {
        self.values[2]
    }

    pub fn mass(&self) -> f64 {
        self.values[3]
    }
}

/// Constants of the a-priori `S`-norm bound on `[0, T]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundCertificate {
    pub initial_norm: f64,
    pub k: f64,
    pub omega: f64,
    pub sigma: f64,
    pub eta_2sigma: f64,
    pub t_end: f64,
    pub a: f64,
    pub b: f64,
    pub p1: f64,
    pub p: f64,
}

/// `a = k η(2σ) 2^{2ω} ‖g‖`, `b = ½ k η(2σ) 2^{2ω} ‖g‖²`,
/// `P₁ = e^{aT}‖g‖ + (b/a)(e^{aT} − 1)`, `P = 2P₁ + 3‖g‖`.
pub fn bound_certificate(
    initial_norm: f64,
    k: f64,
    omega: f64,
    sigma: f64,
    eta_2sigma: f64,
    t_end: f64,
) -> Result<BoundCertificate> {
    for (name, v) in [
        ("‖g_in‖_S", initial_norm),
        ("k", k),
        ("ω", omega),
        ("σ", sigma),
        ("η(2σ)", eta_2sigma),
        ("T", t_end),
    ] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "{name} must be finite and ≥ 0, got {v}"
            )));
        }
    }
    let c = k * eta_2sigma * 4f64.powf(omega);
    let a = c * initial_norm;
    let b = 0.5 * c * initial_norm * initial_norm;
    let at = a * t_end;
    // (b/a)(e^{aT} − 1) = bT · expm1(aT)/(aT), finite as a → 0
    let ramp = if at == 0.0 {
        b * t_end
    } else {
        b * t_end * at.exp_m1() / at
    };
    let p1 = at.exp() * initial_norm + ramp;
    Ok(BoundCertificate {
        initial_norm,
        k,
        omega,
        sigma,
        eta_2sigma,
        t_end,
        a,
        b,
        p1,
        p: 2.0 * p1 + 3.0 * initial_norm,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub pass: bool,
    pub bound: f64,
    /// `(t, P(T) − ‖g(t)‖_S)` per checkpoint.
    pub margins: Vec<(f64, f64)>,
    pub min_margin: f64,
    /// Index of the first checkpoint above the bound.
    pub first_violation: Option<usize>,
}

/// Compares every state against `P(T)`.
pub fn check_bound<'a, I>(states: I, grid: &Grid, cert: &BoundCertificate) -> Result<BoundCheck>
where
    I: IntoIterator<Item = &'a State>,
{
    let mut margins = Vec::new();
    let mut first_violation = None;
    for (idx, s) in states.into_iter().enumerate() {
        let margin = cert.p - s_norm(s, grid, cert.sigma)?;
        if margin < 0.0 && first_violation.is_none() {
            first_violation = Some(idx);
        }
        margins.push((s.t, margin));
    }
    let min_margin = margins
        .iter()
        .map(|&(_, m)| m)
        .fold(f64::INFINITY, f64::min);
    Ok(BoundCheck {
        pass: first_violation.is_none(),
        bound: cert.p,
        margins,
        min_margin,
        first_violation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TailMass {
    pub lambda: f64,
    /// `Σ_{x_i ≥ λ} (1 + x_i^{−σ}) g_i Δ_i`
    pub value: f64,
    /// `[1/λ + λ^{−1−σ}] M₁(g_in)`
    pub majorant: f64,
}

pub fn tail_mass(
    s: &State,
    grid: &Grid,
    lambda: f64,
    sigma: f64,
    initial_mass: f64,
) -> Result<TailMass> {
    check_len(grid, s)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("λ must be positive, got {lambda}")));
    }
    let value = grid
        .cells()
        .iter()
        .zip(&s.g)
        .filter(|(c, _)| c.volume >= lambda)
        .map(|(c, g)| (1.0 + c.volume.powf(-sigma)) * g * c.width)
        .sum();
    Ok(TailMass {
        lambda,
        value,
        majorant: (1.0 / lambda + lambda.powf(-1.0 - sigma)) * initial_mass,
    })
}

/// `Ξ = Σ (1 + x_i^{−σ}) |g_i − h_i| Δ_i`
pub fn weighted_distance(g: &State, h: &State, grid: &Grid, sigma: f64) -> Result<f64> {
    check_len(grid, g)?;
    check_len(grid, h)?;
    Ok(grid
        .cells()
        .iter()
        .zip(g.g.iter().zip(&h.g))
        .map(|(c, (a, b))| (1.0 + c.volume.powf(-sigma)) * (a - b).abs() * c.width)
        .sum())
}

/// `C = k (2‖g‖ + 2‖h‖ + η(σ)‖g‖ + ½η(σ)‖h‖)` from the `S`-norm suprema.
pub fn contraction_rate(g_sup: f64, h_sup: f64, k: f64, eta_sigma: f64) -> f64 {
    k * (2.0 * g_sup + 2.0 * h_sup + eta_sigma * g_sup + 0.5 * eta_sigma * h_sup)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DistanceRecord {
    pub t: f64,
    pub xi: f64,
    pub rate: f64,
}
