//! Collision kernels, coalescence probabilities and daughter distributions,
//! plus a lattice checker for the growth and integrability hypotheses the
//! solver relies on.
//!
//! Every evaluator here is a pure function of an immutable, `Copy` model value.

use serde::{Deserialize, Serialize};

use crate::error::{require_positive_volume, Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelVariant {
    /// `Ψ = k`
    Constant,
    /// `Ψ = k (μ^{1/3} + ν^{1/3}) (μν)^{1/2} (μ+ν)^{-3/2}`
    KineticTheory,
    /// `Ψ = k (1+μ)^ω (1+ν)^ω / (μ+ν)^σ`, the growth bound itself.
    SingularBound,
    /// `Ψ = k / (μ+ν)^σ`
    UniquenessClass,
    /// `Ψ = k μν`; outside the admissible growth class.
    Product,
}

impl KernelVariant {
    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Constant => "constant",
            KernelVariant::KineticTheory => "kinetic_theory",
            KernelVariant::SingularBound => "singular_bound",
            KernelVariant::UniquenessClass => "uniqueness_class",
            KernelVariant::Product => "product",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        [
            KernelVariant::Constant,
            KernelVariant::KineticTheory,
            KernelVariant::SingularBound,
            KernelVariant::UniquenessClass,
            KernelVariant::Product,
        ]
        .into_iter()
        .find(|v| v.name() == name)
    }
}

/// A collision kernel together with the constants `(k_bound, ω, σ)` of its
/// growth bound `Ψ ≤ k_bound (1+μ)^ω (1+ν)^ω / (μ+ν)^σ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KernelModel {
    pub variant: KernelVariant,
    pub k: f64,
    pub omega: f64,
    pub sigma: f64,
    pub bound_k: f64,
}

/// Checks `σ ∈ (0, 1/2)`, `0 ≤ ω < 1` and `0 ≤ ω − σ < 1`, returning one
/// message per violated constraint.
pub fn kernel_exponent_violations(omega: f64, sigma: f64) -> Vec<String> {
    let mut out = Vec::new();
    if !(sigma > 0.0 && sigma < 0.5) {
        out.push(format!("σ ∈ (0, 1/2) required (hypothesis 2.1), got σ = {sigma}"));
    }
    if !((0.0..1.0).contains(&omega)) {
        out.push(format!("0 ≤ ω < 1 required (hypothesis 2.1), got ω = {omega}"));
    }
    let gap = omega - sigma;
    if !((0.0..1.0).contains(&gap)) {
        out.push(format!(
            "0 ≤ ω − σ < 1 required (hypothesis 2.1), got ω − σ = {gap}"
        ));
    }
    out
}

impl KernelModel {
    /// Builds a kernel with the variant's default bound constant.
    pub fn new(variant: KernelVariant, k: f64, omega: f64, sigma: f64) -> Result<Self> {
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "rate constant k must be finite and ≥ 0, got {k}"
            )));
        }
        let violations = kernel_exponent_violations(omega, sigma);
        if !violations.is_empty() {
            return Err(Error::InvalidParameter(violations.join("; ")));
        }
        let bound_k = match variant {
            // (μ^{1/3}+ν^{1/3}) ≤ 2^{2/3} s^{1/3} and (μν)^{1/2} ≤ s/2 give
            // Ψ ≤ k 2^{-1/3} s^{-1/6}, which sits under the bound for σ ≥ 1/6.
            KernelVariant::KineticTheory => k * 2f64.powf(-1.0 / 3.0),
            _ => k,
        };
        Ok(Self {
            variant,
            k,
            omega,
            sigma,
            bound_k,
        })
    }

    pub fn with_bound_constant(mut self, bound_k: f64) -> Result<Self> {
        if !(bound_k >= 0.0 && bound_k.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "bound constant must be finite and ≥ 0, got {bound_k}"
            )));
        }
        self.bound_k = bound_k;
        Ok(self)
    }

    /// Same kernel with rate and bound constants multiplied by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.k *= factor;
        self.bound_k *= factor;
        self
    }

    /// `Ψ(μ, ν)`; errors on nonpositive volumes.
    pub fn eval(&self, mu: f64, nu: f64) -> Result<f64> {
        require_positive_volume("μ", mu)?;
        require_positive_volume("ν", nu)?;
        Ok(self.rate(mu, nu))
    }

    /// Unchecked evaluation for volumes already known to be positive.
    /// Every binary operation is commutative in its two volume arguments, so
    /// the result is bit-identical under `(μ, ν) ↔ (ν, μ)`.
    pub(crate) fn rate(&self, mu: f64, nu: f64) -> f64 {
        let s = mu + nu;
        match self.variant {
            KernelVariant::Constant => self.k,
            KernelVariant::KineticTheory => {
                let cube = mu.cbrt() + nu.cbrt();
                self.k * cube * (mu * nu).sqrt() / (s * s.sqrt())
            }
            KernelVariant::SingularBound => {
                let growth = (1.0 + mu).powf(self.omega) * (1.0 + nu).powf(self.omega);
                self.k * growth / s.powf(self.sigma)
            }
            KernelVariant::UniquenessClass => self.k / s.powf(self.sigma),
            KernelVariant::Product => self.k * (mu * nu),
        }
    }

    /// Right-hand side of the growth bound at `(μ, ν)`.
    pub fn growth_bound(&self, mu: f64, nu: f64) -> f64 {
        let growth = (1.0 + mu).powf(self.omega) * (1.0 + nu).powf(self.omega);
        self.bound_k * growth / (mu + nu).powf(self.sigma)
    }
}

/// Probability `E(μ, ν)` that a collision ends in coalescence; breakage
/// happens with the complementary probability `1 − E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "variant", rename_all = "snake_case")]
pub enum CoalescenceProbability {
    Constant { value: f64 },
    /// `E = large + (small − large) exp(−(μ+ν)/crossover)`: tends to `small`
    /// for small colliding pairs and to `large` for big ones.
    VolumeDependent {
        small: f64,
        large: f64,
        crossover: f64,
    },
}

impl CoalescenceProbability {
    pub fn constant(value: f64) -> Result<Self> {
        let p = CoalescenceProbability::Constant { value };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must lie in [0, 1], got {v}"
                )))
            }
        };
        match *self {
            CoalescenceProbability::Constant { value } => unit("E", value),
            CoalescenceProbability::VolumeDependent {
                small,
                large,
                crossover,
            } => {
                unit("E(small)", small)?;
                unit("E(large)", large)?;
                if crossover > 0.0 && crossover.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidParameter(format!(
                        "crossover volume must be positive, got {crossover}"
                    )))
                }
            }
        }
    }

    pub fn eval(&self, mu: f64, nu: f64) -> f64 {
        match *self {
            CoalescenceProbability::Constant { value } => value,
            CoalescenceProbability::VolumeDependent {
                small,
                large,
                crossover,
            } => {
                let e = large + (small - large) * (-(mu + nu) / crossover).exp();
                e.clamp(0.0, 1.0)
            }
        }
    }

    pub fn complement(&self, mu: f64, nu: f64) -> f64 {
        1.0 - self.eval(mu, nu)
    }

    /// True when `E ≡ 1`, i.e. breakage never happens.
    pub fn is_pure_coalescence(&self) -> bool {
        matches!(*self, CoalescenceProbability::Constant { value } if value == 1.0)
            || matches!(*self, CoalescenceProbability::VolumeDependent { small, large, .. } if small == 1.0 && large == 1.0)
    }
}

/// Power-law daughter distribution
/// `P(μ|ν;τ) = (θ+2) μ^θ / (ν+τ)^{θ+1}` on `0 < μ ≤ ν+τ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DaughterModel {
    theta: f64,
}

impl DaughterModel {
    /// Rejects `θ ∉ (−1, 0]`: for `θ ≤ −1` the fragment count diverges.
    pub fn new(theta: f64) -> Result<Self> {
        if theta > -1.0 && theta <= 0.0 {
            Ok(Self { theta })
        } else {
            Err(Error::InvalidParameter(format!(
                "θ ∈ (−1,0] required (infeasible fragment count), got θ = {theta}"
            )))
        }
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn eval(&self, mu: f64, nu: f64, tau: f64) -> Result<f64> {
        require_positive_volume("μ", mu)?;
        require_positive_volume("ν", nu)?;
        require_positive_volume("τ", tau)?;
        Ok(self.density(mu, nu + tau))
    }

    pub(crate) fn density(&self, mu: f64, total: f64) -> f64 {
        if mu > total {
            0.0
        } else {
            (self.theta + 2.0) * mu.powf(self.theta) / total.powf(self.theta + 1.0)
        }
    }

    /// `∫₀^x μ^q P(μ|ν;τ) dμ` in closed form.
    pub fn partial_moment(&self, q: f64, x: f64, nu: f64, tau: f64) -> Result<f64> {
        require_positive_volume("ν", nu)?;
        require_positive_volume("τ", tau)?;
        let total = nu + tau;
        if !(x > 0.0 && x <= total) {
            return Err(Error::Domain(format!(
                "upper limit x must lie in (0, ν+τ] = (0, {total}], got {x}"
            )));
        }
        self.moment_to(q, x, total)
    }

    pub(crate) fn moment_to(&self, q: f64, x: f64, total: f64) -> Result<f64> {
        let p = self.theta + q + 1.0;
        if p <= 0.0 {
            return Err(Error::DivergentMoment(format!(
                "∫ μ^q P dμ diverges at 0 for q = {q}, θ = {}",
                self.theta
            )));
        }
        Ok((self.theta + 2.0) * x.powf(p) / (p * total.powf(self.theta + 1.0)))
    }

    /// Expected number of fragments per breakage event, `(θ+2)/(θ+1)`.
    pub fn fragment_count(&self) -> f64 {
        (self.theta + 2.0) / (self.theta + 1.0)
    }

    /// `η(r) = (θ+2)/(θ−r+1)`, the constant in
    /// `∫₀^ν μ^{-r} P(μ|ν−τ;τ) dμ ≤ η(r) ν^{-r}`.
    pub fn eta(&self, r: f64) -> Result<f64> {
        let denom = self.theta - r + 1.0;
        if denom <= 0.0 {
            return Err(Error::DivergentMoment(format!(
                "η(r) requires θ − r + 1 > 0, got θ = {}, r = {r}",
                self.theta
            )));
        }
        Ok((self.theta + 2.0) / denom)
    }

    /// Singularity exponent of `P` at small fragment volume.
    pub fn tau2(&self) -> f64 {
        -self.theta
    }

    /// `k′(λ) = (θ+2)/λ^{1+θ}` for the bound `P(μ|ν;τ) ≤ k′(λ) μ^{−τ2}`.
    pub fn k_prime(&self, lambda: f64) -> f64 {
        (self.theta + 2.0) / lambda.powf(1.0 + self.theta)
    }
}

/// Outcome of a breaking collision.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fragmentation {
    PowerLaw(DaughterModel),
    /// Both colliding particles leave unchanged.
    Elastic,
}

impl Fragmentation {
    pub fn power_law(&self) -> Option<&DaughterModel> {
        match self {
            Fragmentation::PowerLaw(d) => Some(d),
            Fragmentation::Elastic => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    KernelGrowth,
    CoalescenceFloor,
    NegativeMoment,
    FragmentSingularity,
    UniquenessKernel,
}

impl Hypothesis {
    pub const ALL: [Hypothesis; 5] = [
        Hypothesis::KernelGrowth,
        Hypothesis::CoalescenceFloor,
        Hypothesis::NegativeMoment,
        Hypothesis::FragmentSingularity,
        Hypothesis::UniquenessKernel,
    ];

    pub fn id(self) -> &'static str {
        match self {
            Hypothesis::KernelGrowth => "2.1",
            Hypothesis::CoalescenceFloor => "2.2",
            Hypothesis::NegativeMoment => "2.3",
            Hypothesis::FragmentSingularity => "2.6",
            Hypothesis::UniquenessKernel => "2.7",
        }
    }

    pub fn description(self) -> &'static str {
        match self {
            Hypothesis::KernelGrowth => "Ψ(μ,ν) ≤ k (1+μ)^ω (1+ν)^ω / (μ+ν)^σ",
            Hypothesis::CoalescenceFloor => "E(μ,ν) ≥ (η(2σ)−2)/(η(2σ)−1) on (0,1)²",
            Hypothesis::NegativeMoment => "∫₀^ν μ^{-r} P(μ|ν−τ;τ) dμ ≤ η(r) ν^{-r} for r ∈ {σ, 2σ}",
            Hypothesis::FragmentSingularity => {
                "P(μ|ν;τ) ≤ k′(λ) μ^{−τ2} for ν+τ > λ, μ < λ, with τ2 + σ < 1"
            }
            Hypothesis::UniquenessKernel => "Ψ(μ,ν) ≤ k / (μ+ν)^σ",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum HypothesisStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisRecord {
    pub id: String,
    pub hypothesis: Hypothesis,
    pub statement: String,
    pub status: HypothesisStatus,
    /// Sample point attaining the worst ratio (volumes, and `λ` or `r` where relevant).
    pub worst_point: Option<Vec<f64>>,
    /// Largest `lhs / rhs` seen; pass iff it stays within `1 + slack`.
    pub worst_ratio: f64,
    pub samples: usize,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssumptionReport {
    pub records: Vec<HypothesisRecord>,
}

impl AssumptionReport {
    pub fn get(&self, h: Hypothesis) -> &HypothesisRecord {
        self.records
            .iter()
            .find(|r| r.hypothesis == h)
            .expect("every hypothesis is recorded")
    }

    pub fn passes(&self, h: Hypothesis) -> bool {
        self.get(h).status == HypothesisStatus::Pass
    }

    /// Hypotheses among `required` whose status is `Fail`.
    pub fn failures(&self, required: &[Hypothesis]) -> Vec<Hypothesis> {
        required
            .iter()
            .copied()
            .filter(|&h| self.get(h).status == HypothesisStatus::Fail)
            .collect()
    }
}

/// Log-spaced sample lattice used by [`check_assumptions`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePlan {
    pub lo: f64,
    pub hi: f64,
    pub points_per_decade: usize,
    /// `λ` values for the fragment-singularity bound.
    pub lambdas: Vec<f64>,
    pub slack: f64,
}

impl Default for SamplePlan {
    fn default() -> Self {
        Self {
            lo: 1e-6,
            hi: 1e6,
            points_per_decade: 4,
            lambdas: (-6..=6).map(|e| 10f64.powi(e)).collect(),
            slack: 1e-12,
        }
    }
}

impl SamplePlan {
    pub fn lattice(&self) -> Vec<f64> {
        let decades = (self.hi / self.lo).log10();
        let count = (decades * self.points_per_decade as f64).round() as usize;
        let ln_lo = self.lo.ln();
        let step = (self.hi / self.lo).ln() / count as f64;
        (0..=count).map(|i| (ln_lo + step * i as f64).exp()).collect()
    }
}

struct Worst {
    ratio: f64,
    point: Option<Vec<f64>>,
    samples: usize,
}

impl Worst {
    fn new() -> Self {
        Self {
            ratio: 0.0,
            point: None,
            samples: 0,
        }
    }

    fn observe(&mut self, lhs: f64, rhs: f64, point: impl FnOnce() -> Vec<f64>) {
        self.samples += 1;
        let ratio = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        let ratio = if ratio.is_nan() { f64::INFINITY } else { ratio };
        if self.point.is_none() || ratio > self.ratio {
            self.ratio = ratio;
            self.point = Some(point());
        }
    }

    fn into_record(self, h: Hypothesis, slack: f64, note: Option<String>) -> HypothesisRecord {
        let status = if self.ratio <= 1.0 + slack {
            HypothesisStatus::Pass
        } else {
            HypothesisStatus::Fail
        };
        record(h, status, self.ratio, self.point, self.samples, note)
    }
}

fn record(
    h: Hypothesis,
    status: HypothesisStatus,
    worst_ratio: f64,
    worst_point: Option<Vec<f64>>,
    samples: usize,
    note: Option<String>,
) -> HypothesisRecord {
    HypothesisRecord {
        id: h.id().to_string(),
        hypothesis: h,
        statement: h.description().to_string(),
        status,
        worst_point,
        worst_ratio,
        samples,
        note,
    }
}

fn failed_without_samples(h: Hypothesis, note: String) -> HypothesisRecord {
    record(h, HypothesisStatus::Fail, f64::INFINITY, None, 0, Some(note))
}

/// Evaluates both sides of each hypothesis on the sample lattice.
///
/// Failures are report entries, never errors. The negative-moment bound uses
/// the closed-form partial moment rather than quadrature.
pub fn check_assumptions(
    kernel: &KernelModel,
    coalescence: &CoalescenceProbability,
    fragmentation: &Fragmentation,
    plan: &SamplePlan,
) -> AssumptionReport {
    let lattice = plan.lattice();
    let sigma = kernel.sigma;
    let mut records = Vec::with_capacity(5);

    // kernel growth
    let mut w = Worst::new();
    for &mu in &lattice {
        for &nu in &lattice {
            w.observe(kernel.rate(mu, nu), kernel.growth_bound(mu, nu), || vec![mu, nu]);
        }
    }
    records.push(w.into_record(Hypothesis::KernelGrowth, plan.slack, None));

    // coalescence floor on (0,1)²
    records.push(match fragmentation {
        Fragmentation::Elastic => record(
            Hypothesis::CoalescenceFloor,
            HypothesisStatus::NotApplicable,
            0.0,
            None,
            0,
            Some("elastic collisions carry no fragment density".into()),
        ),
        Fragmentation::PowerLaw(d) => match d.eta(2.0 * sigma) {
            Err(e) => failed_without_samples(Hypothesis::CoalescenceFloor, e.to_string()),
            Ok(eta) => {
                let floor = (eta - 2.0) / (eta - 1.0);
                let mut w = Worst::new();
                let small: Vec<f64> = lattice.iter().copied().filter(|&v| v < 1.0).collect();
                for &mu in &small {
                    for &nu in &small {
                        w.observe(floor, coalescence.eval(mu, nu), || vec![mu, nu]);
                    }
                }
                w.into_record(
                    Hypothesis::CoalescenceFloor,
                    plan.slack,
                    Some(format!("η(2σ) = {eta}, floor = {floor}")),
                )
            }
        },
    });

    // negative-moment bound at r = σ and r = 2σ
    records.push(match fragmentation {
        Fragmentation::Elastic => record(
            Hypothesis::NegativeMoment,
            HypothesisStatus::NotApplicable,
            0.0,
            None,
            0,
            Some("elastic collisions carry no fragment density".into()),
        ),
        Fragmentation::PowerLaw(d) => {
            let mut w = Worst::new();
            let mut divergent = None;
            for r in [sigma, 2.0 * sigma] {
                let eta = match d.eta(r) {
                    Ok(eta) => eta,
                    Err(e) => {
                        divergent = Some(e.to_string());
                        continue;
                    }
                };
                for &nu in &lattice {
                    for &tau in lattice.iter().take_while(|&&t| t < nu) {
                        let total = (nu - tau) + tau;
                        let lhs = d
                            .moment_to(-r, nu.min(total), total)
                            .unwrap_or(f64::INFINITY);
                        w.observe(lhs, eta * nu.powf(-r), || vec![nu, tau, r]);
                    }
                }
            }
            match divergent {
                Some(note) => failed_without_samples(Hypothesis::NegativeMoment, note),
                None => w.into_record(Hypothesis::NegativeMoment, plan.slack, None),
            }
        }
    });

    // fragment singularity bound
    records.push(match fragmentation {
        Fragmentation::Elastic => record(
            Hypothesis::FragmentSingularity,
            HypothesisStatus::NotApplicable,
            0.0,
            None,
            0,
            Some("elastic collisions carry no fragment density".into()),
        ),
        Fragmentation::PowerLaw(d) => {
            let tau2 = d.tau2();
            if tau2 + sigma >= 1.0 {
                failed_without_samples(
                    Hypothesis::FragmentSingularity,
                    format!("τ2 + σ < 1 required, got τ2 = {tau2}, σ = {sigma}"),
                )
            } else {
                let mut w = Worst::new();
                for &lambda in &plan.lambdas {
                    let kp = d.k_prime(lambda);
                    for &mu in lattice.iter().take_while(|&&m| m < lambda) {
                        let rhs = kp * mu.powf(-tau2);
                        for &nu in &lattice {
                            for &tau in &lattice {
                                if nu + tau > lambda {
                                    w.observe(d.density(mu, nu + tau), rhs, || {
                                        vec![mu, nu, tau, lambda]
                                    });
                                }
                            }
                        }
                    }
                }
                w.into_record(Hypothesis::FragmentSingularity, plan.slack, None)
            }
        }
    });

    // uniqueness-class kernel
    let mut w = Worst::new();
    for &mu in &lattice {
        for &nu in &lattice {
            let rhs = kernel.bound_k / (mu + nu).powf(sigma);
            w.observe(kernel.rate(mu, nu), rhs, || vec![mu, nu]);
        }
    }
    records.push(w.into_record(Hypothesis::UniquenessKernel, plan.slack, None));

    AssumptionReport { records }
}
