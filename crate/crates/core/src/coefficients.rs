//! Coefficient functions of the porous-medium Fokker–Planck equation
//!
//! ```text
//! ∂t u + div(E b(u) u) − Δβ(u) = 0,     a(r) = β(r)/r,  a(0) = β'(0)
//! ```
//!
//! and numerical validators for the standing assumptions on them: `β` is
//! C¹ with `β(0) = 0` and strongly monotone with constant `γ₀`, `E` is
//! bounded with bounded negative divergence, `b` is C¹, bounded and
//! nonnegative, and `a` is locally Lipschitz.
//!
//! All callables are pure and shared behind `Arc`, so a [`CoefficientSet`]
//! can be cloned freely and used from several threads.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Pure scalar callable.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Below this magnitude `a(r)` is taken as `β'(0)` instead of `β(r)/r`.
pub const DEFAULT_EPSILON_A: f64 = 1e-8;

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 3] = ["linear-heat", "cubic-tanh", "logistic-b"];

/// Interval on which presets certify the Lipschitz constant of `a`.
pub const DEFAULT_LIPSCHITZ_INTERVAL: (f64, f64) = (-5.0, 5.0);

const DERIV_REL_TOL: f64 = 1e-6;
const DIV_TOL: f64 = 1e-5;
const LATTICE_POINTS: usize = 65;

fn central_difference(f: &dyn Fn(f64) -> f64, x: f64) -> f64 {
    let h = 1e-5 * x.abs().max(1.0);
    (f(x + h) - f(x - h)) / (2.0 * h)
}

/// The nonlinearity `β` together with its derivative and monotonicity constant.
#[derive(Clone)]
pub struct BetaFunction {
    eval: ScalarFn,
    deriv: ScalarFn,
    gamma0: f64,
}

impl BetaFunction {
    pub fn new(eval: ScalarFn, deriv: ScalarFn, gamma0: f64) -> Result<Self> {
        if !(gamma0 > 0.0 && gamma0.is_finite()) {
            return Err(Error::config(format!(
                "beta.gamma0 must be positive and finite, got {gamma0}"
            )));
        }
        Ok(Self { eval, deriv, gamma0 })
    }

    /// `β(r) = Σ c_k r^k`. The constant coefficient must vanish.
    pub fn polynomial(coeffs: &[f64], gamma0: f64) -> Result<Self> {
        if coeffs.len() < 2 {
            return Err(Error::config("beta polynomial needs at least a linear coefficient"));
        }
        if coeffs[0] != 0.0 {
            return Err(Error::config(format!(
                "beta polynomial must satisfy beta(0) = 0, constant term is {}",
                coeffs[0]
            )));
        }
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::config("beta polynomial coefficients must be finite"));
        }
        let c: Arc<[f64]> = coeffs.into();
        let dc: Arc<[f64]> = coeffs.iter().enumerate().skip(1).map(|(k, ck)| k as f64 * ck).collect();
        Self::new(
            Arc::new(move |r| horner(&c, r)),
            Arc::new(move |r| horner(&dc, r)),
            gamma0,
        )
    }

    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }
}

impl fmt::Debug for BetaFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BetaFunction")
            .field("gamma0", &self.gamma0)
            .finish_non_exhaustive()
    }
}

fn horner(coeffs: &[f64], r: f64) -> f64 {
    coeffs.iter().rev().fold(0.0, |acc, c| acc * r + c)
}

/// `a(r) = β(r)/r`, continued by `β'(0)` on `|r| ≤ epsilon_a`.
#[derive(Clone, Debug)]
pub struct DiffusionA {
    beta: BetaFunction,
    epsilon_a: f64,
}

impl DiffusionA {
    pub fn new(beta: BetaFunction, epsilon_a: f64) -> Result<Self> {
        if !(epsilon_a > 0.0 && epsilon_a.is_finite()) {
            return Err(Error::config("epsilon_a must be positive"));
        }
        Ok(Self { beta, epsilon_a })
    }

    /// Evaluate without a finiteness check. Hot loops use this.
    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        if r.abs() > self.epsilon_a {
            self.beta.eval(r) / r
        } else {
            self.beta.deriv(0.0)
        }
    }

    pub fn epsilon_a(&self) -> f64 {
        self.epsilon_a
    }

    pub fn beta(&self) -> &BetaFunction {
        &self.beta
    }
}

/// Bounded nonnegative rate `b`.
#[derive(Clone)]
pub struct RateB {
    eval: ScalarFn,
    deriv: ScalarFn,
    sup_bound: f64,
}

impl RateB {
    pub fn new(eval: ScalarFn, deriv: ScalarFn, sup_bound: f64) -> Result<Self> {
        if !(sup_bound >= 0.0 && sup_bound.is_finite()) {
            return Err(Error::config("b.sup_bound must be nonnegative and finite"));
        }
        Ok(Self { eval, deriv, sup_bound })
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            deriv: Arc::new(|_| 0.0),
            sup_bound: 0.0,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::config("constant b must be nonnegative"));
        }
        Self::new(Arc::new(move |_| value), Arc::new(|_| 0.0), value)
    }

    /// `scale / (1 + r²)`.
    pub fn rational(scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config("rational b scale must be nonnegative"));
        }
        Self::new(
            Arc::new(move |r| scale / (1.0 + r * r)),
            Arc::new(move |r| {
                let q = 1.0 + r * r;
                -2.0 * scale * r / (q * q)
            }),
            scale,
        )
    }

    /// `scale / (1 + exp(−rate·r))`.
    pub fn logistic(scale: f64, rate: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite() && rate.is_finite()) {
            return Err(Error::config("logistic b needs nonnegative scale and finite rate"));
        }
        Self::new(
            Arc::new(move |r| scale / (1.0 + (-rate * r).exp())),
            Arc::new(move |r| {
                let s = 1.0 / (1.0 + (-rate * r).exp());
                scale * rate * s * (1.0 - s)
            }),
            scale,
        )
    }

    #[inline]
    pub fn eval(&self, r: f64) -> f64 {
        (self.eval)(r)
    }

    pub fn deriv(&self, r: f64) -> f64 {
        (self.deriv)(r)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn is_zero(&self) -> bool {
        self.sup_bound == 0.0
    }
}

impl fmt::Debug for RateB {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RateB")
            .field("sup_bound", &self.sup_bound)
            .finish_non_exhaustive()
    }
}

/// Bounded drift field `E` on the real line, with its divergence.
#[derive(Clone)]
pub struct DriftField {
    eval: ScalarFn,
    div: ScalarFn,
    sup_bound: f64,
    div_neg_bound: f64,
}

impl DriftField {
    pub fn new(eval: ScalarFn, div: ScalarFn, sup_bound: f64, div_neg_bound: f64) -> Result<Self> {
        if !(sup_bound >= 0.0 && sup_bound.is_finite()) {
            return Err(Error::config("E.sup_bound must be nonnegative and finite"));
        }
        if !(div_neg_bound >= 0.0 && div_neg_bound.is_finite()) {
            return Err(Error::config("E.div_neg_bound must be nonnegative and finite"));
        }
        Ok(Self {
            eval,
            div,
            sup_bound,
            div_neg_bound,
        })
    }

    pub fn zero() -> Self {
        Self {
            eval: Arc::new(|_| 0.0),
            div: Arc::new(|_| 0.0),
            sup_bound: 0.0,
            div_neg_bound: 0.0,
        }
    }

    pub fn constant(value: f64) -> Result<Self> {
        if !value.is_finite() {
            return Err(Error::config("constant E must be finite"));
        }
        Self::new(Arc::new(move |_| value), Arc::new(|_| 0.0), value.abs(), 0.0)
    }

    /// `E(x) = −scale·tanh(x)`.
    pub fn neg_tanh(scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config("neg-tanh scale must be nonnegative"));
        }
        Self::new(
            Arc::new(move |x: f64| -scale * x.tanh()),
            Arc::new(move |x: f64| {
                let c = x.cosh();
                -scale / (c * c)
            }),
            scale,
            scale,
        )
    }

    /// `E(x) = scale·sin(x)·exp(−x²)`.
    pub fn sin_gauss(scale: f64) -> Result<Self> {
        if !(scale >= 0.0 && scale.is_finite()) {
            return Err(Error::config("sin-gauss scale must be nonnegative"));
        }
        // sup |sin x e^{-x²}| ≈ 0.397 at x ≈ 0.653; the divergence is ≥ −0.31
        Self::new(
            Arc::new(move |x: f64| scale * x.sin() * (-x * x).exp()),
            Arc::new(move |x: f64| scale * (x.cos() - 2.0 * x * x.sin()) * (-x * x).exp()),
            0.4 * scale,
            scale,
        )
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    pub fn div(&self, x: f64) -> f64 {
        (self.div)(x)
    }

    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    pub fn div_neg_bound(&self) -> f64 {
        self.div_neg_bound
    }
}

impl fmt::Debug for DriftField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DriftField")
            .field("sup_bound", &self.sup_bound)
            .field("div_neg_bound", &self.div_neg_bound)
            .finish_non_exhaustive()
    }
}

/// The full tuple `(β, a, b, E)` plus a certified local Lipschitz constant for `a`.
#[derive(Clone, Debug)]
pub struct CoefficientSet {
    pub name: String,
    pub beta: BetaFunction,
    pub a: DiffusionA,
    pub b: RateB,
    pub drift: DriftField,
    pub lipschitz_a_local: f64,
    pub lipschitz_interval: (f64, f64),
}

impl CoefficientSet {
    pub fn new(
        name: impl Into<String>,
        beta: BetaFunction,
        b: RateB,
        drift: DriftField,
        lipschitz_a_local: f64,
        lipschitz_interval: (f64, f64),
    ) -> Result<Self> {
        if !(lipschitz_a_local >= 0.0 && lipschitz_a_local.is_finite()) {
            return Err(Error::config("lipschitz_a_local must be nonnegative and finite"));
        }
        if !(lipschitz_interval.0 < lipschitz_interval.1) {
            return Err(Error::config("lipschitz interval must be nondegenerate"));
        }
        let a = DiffusionA::new(beta.clone(), DEFAULT_EPSILON_A)?;
        Ok(Self {
            name: name.into(),
            beta,
            a,
            b,
            drift,
            lipschitz_a_local,
            lipschitz_interval,
        })
    }

    /// Coefficients with a polynomial `β`; the Lipschitz constant of `a` on
    /// `interval` is bounded termwise from the coefficients.
    pub fn with_polynomial_beta(
        name: impl Into<String>,
        beta_coeffs: &[f64],
        gamma0: f64,
        b: RateB,
        drift: DriftField,
        interval: (f64, f64),
    ) -> Result<Self> {
        let beta = BetaFunction::polynomial(beta_coeffs, gamma0)?;
        let reach = interval.0.abs().max(interval.1.abs());
        // a(r) = Σ_{k≥1} c_k r^{k-1}, so |a'| ≤ Σ_{k≥2} (k-1)|c_k| reach^{k-2}
        let lip = beta_coeffs
            .iter()
            .enumerate()
            .skip(2)
            .map(|(k, c)| (k - 1) as f64 * c.abs() * reach.powi(k as i32 - 2))
            .sum();
        Self::new(name, beta, b, drift, lip, interval)
    }

    /// `a(r)`, rejecting non-finite input.
    pub fn eval_a(&self, r: f64) -> Result<f64> {
        if !r.is_finite() {
            return Err(Error::domain(format!("a(r) requires finite r, got {r}")));
        }
        Ok(self.a.eval(r))
    }

    pub fn gamma0(&self) -> f64 {
        self.beta.gamma0()
    }

    /// `sup |E| · sup b`, the bound on the transport velocity.
    pub fn transport_bound(&self) -> f64 {
        self.drift.sup_bound() * self.b.sup_bound()
    }
}

/// Look up a named coefficient preset.
pub fn preset(name: &str) -> Result<CoefficientSet> {
    match name {
        "linear-heat" => CoefficientSet::with_polynomial_beta(
            name,
            &[0.0, 1.0],
            1.0,
            RateB::zero(),
            DriftField::zero(),
            DEFAULT_LIPSCHITZ_INTERVAL,
        ),
        "cubic-tanh" => CoefficientSet::with_polynomial_beta(
            name,
            &[0.0, 1.0, 0.0, 1.0],
            1.0,
            RateB::rational(1.0)?,
            DriftField::neg_tanh(1.0)?,
            DEFAULT_LIPSCHITZ_INTERVAL,
        ),
        "logistic-b" => CoefficientSet::with_polynomial_beta(
            name,
            &[0.0, 2.0],
            2.0,
            RateB::logistic(1.0, 1.0)?,
            DriftField::sin_gauss(1.0)?,
            DEFAULT_LIPSCHITZ_INTERVAL,
        ),
        other => Err(Error::config(format!(
            "unknown coefficient preset {other:?}; valid presets: {}",
            PRESET_NAMES.join(", ")
        ))),
    }
}

/// Which standing assumption a check refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Condition {
    /// `β(0) = 0`.
    BetaVanishesAtZero,
    /// `β ∈ C¹`: supplied derivative agrees with finite differences.
    BetaDerivative,
    /// Strong monotonicity with constant `γ₀`.
    BetaMonotone,
    /// `a ≥ γ₀`.
    NonDegenerate,
    /// `|E| ≤ sup_bound`.
    DriftBounded,
    /// `(div E)⁻ ≤ div_neg_bound`.
    DriftDivergenceNegativePart,
    /// Supplied divergence agrees with finite differences.
    DriftDivergenceConsistent,
    /// Pointwise `|div E|` bound standing in for `L² + L∞`.
    DriftDivergenceSurrogate,
    /// `0 ≤ b ≤ sup_bound`.
    RateBounded,
    /// `b ∈ C¹`.
    RateDerivative,
    /// `a` Lipschitz on the declared interval.
    ALipschitz,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::BetaVanishesAtZero => "beta(0)=0",
            Condition::BetaDerivative => "beta C1",
            Condition::BetaMonotone => "beta strongly monotone",
            Condition::NonDegenerate => "a >= gamma0 (non-degenerate)",
            Condition::DriftBounded => "E bounded",
            Condition::DriftDivergenceNegativePart => "(div E)^- bounded",
            Condition::DriftDivergenceConsistent => "div E consistent",
            Condition::DriftDivergenceSurrogate => "div E surrogate check",
            Condition::RateBounded => "0 <= b <= sup",
            Condition::RateDerivative => "b C1",
            Condition::ALipschitz => "a locally Lipschitz",
        }
    }
}

/// One line of a [`ValidationReport`].
#[derive(Clone, Debug)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub passed: bool,
    /// Worst-case slack; nonnegative exactly when `passed`.
    pub margin: f64,
    /// Point or pair where the worst case was attained.
    pub witness: Vec<f64>,
    /// Auxiliary observed quantity (empirical constant, sup norm, …).
    pub observed: f64,
    pub note: Option<&'static str>,
}

#[derive(Clone, Debug)]
pub struct ValidationReport {
    pub range: (f64, f64),
    pub n_samples: usize,
    pub seed: u64,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, condition: Condition) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.condition == condition)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

/// Tracks the minimum of a margin together with its witness.
struct Worst {
    margin: f64,
    witness: Vec<f64>,
}

impl Worst {
    fn new() -> Self {
        Self {
            margin: f64::INFINITY,
            witness: Vec::new(),
        }
    }

    fn offer(&mut self, margin: f64, witness: &[f64]) {
        // NaN margins always win so that they surface as failures
        if margin < self.margin || margin.is_nan() && !self.margin.is_nan() {
            self.margin = margin;
            self.witness = witness.to_vec();
        }
    }

    fn into_check(self, condition: Condition, observed: f64) -> ConditionCheck {
        ConditionCheck {
            condition,
            passed: self.margin >= 0.0,
            margin: self.margin,
            witness: self.witness,
            observed,
            note: None,
        }
    }
}

/// Check the standing assumptions on a sample of `range`.
///
/// Points are `n_samples` uniform draws plus a fixed lattice; pairs are
/// `n_samples` uniform pairs plus all lattice pairs. Both spatial (`E`) and
/// density (`β`, `a`, `b`) arguments are drawn from the same range. The
/// result is a deterministic function of `seed`.
pub fn validate_conditions(
    coeffs: &CoefficientSet,
    range: (f64, f64),
    n_samples: usize,
    seed: u64,
) -> Result<ValidationReport> {
    let (lo, hi) = range;
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::config(format!("validation range [{lo}, {hi}] is degenerate")));
    }
    if n_samples < 2 {
        return Err(Error::config("validation needs at least 2 samples"));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let lattice: Vec<f64> = (0..LATTICE_POINTS)
        .map(|i| lo + (hi - lo) * i as f64 / (LATTICE_POINTS - 1) as f64)
        .collect();
    let mut points: Vec<f64> = (0..n_samples).map(|_| rng.random_range(lo..hi)).collect();
    points.extend_from_slice(&lattice);

    let mut pairs: Vec<(f64, f64)> = (0..n_samples)
        .map(|_| (rng.random_range(lo..hi), rng.random_range(lo..hi)))
        .collect();
    for i in 0..lattice.len() {
        for j in i + 1..lattice.len() {
            pairs.push((lattice[i], lattice[j]));
        }
    }

    let gamma0 = coeffs.gamma0();
    let mut checks = Vec::new();

    // beta(0) = 0 and derivative consistency
    let b0 = coeffs.beta.eval(0.0);
    checks.push(ConditionCheck {
        condition: Condition::BetaVanishesAtZero,
        passed: b0 == 0.0,
        margin: if b0 == 0.0 { 0.0 } else { -b0.abs() },
        witness: vec![0.0],
        observed: b0,
        note: None,
    });

    let beta_eval = |r: f64| coeffs.beta.eval(r);
    let mut worst = Worst::new();
    for &r in &points {
        let d = coeffs.beta.deriv(r);
        let fd = central_difference(&beta_eval, r);
        let rel = (d - fd).abs() / d.abs().max(f64::MIN_POSITIVE);
        worst.offer(DERIV_REL_TOL - rel, &[r]);
    }
    checks.push(worst.into_check(Condition::BetaDerivative, DERIV_REL_TOL));

    // monotonicity: margin = min difference quotient − γ₀
    let mut worst = Worst::new();
    let mut min_quotient = f64::INFINITY;
    for &(r1, r2) in &pairs {
        if r1 == r2 {
            continue;
        }
        let dr = r1 - r2;
        let q = (coeffs.beta.eval(r1) - coeffs.beta.eval(r2)) * dr / (dr * dr);
        min_quotient = min_quotient.min(q);
        worst.offer(q - gamma0, &[r1, r2]);
    }
    checks.push(worst.into_check(Condition::BetaMonotone, min_quotient));

    // a ≥ γ₀
    let mut worst = Worst::new();
    let mut min_a = f64::INFINITY;
    for &r in &points {
        let a = coeffs.a.eval(r);
        min_a = min_a.min(a);
        worst.offer(a - gamma0 * (1.0 - 1e-12), &[r]);
    }
    checks.push(worst.into_check(Condition::NonDegenerate, min_a));

    // drift
    let drift = &coeffs.drift;
    let mut bounded = Worst::new();
    let mut neg = Worst::new();
    let mut consistent = Worst::new();
    let mut max_abs = 0.0f64;
    let mut max_div = 0.0f64;
    let drift_eval = |x: f64| drift.eval(x);
    for &x in &points {
        let e = drift.eval(x);
        max_abs = max_abs.max(e.abs());
        bounded.offer(drift.sup_bound() - e.abs(), &[x]);
        let div = drift.div(x);
        max_div = max_div.max(div.abs());
        neg.offer(drift.div_neg_bound() - (-div).max(0.0), &[x]);
        let fd = central_difference(&drift_eval, x);
        let err = (div - fd).abs() / div.abs().max(1.0);
        consistent.offer(DIV_TOL - err, &[x]);
    }
    checks.push(bounded.into_check(Condition::DriftBounded, max_abs));
    checks.push(neg.into_check(Condition::DriftDivergenceNegativePart, drift.div_neg_bound()));
    checks.push(consistent.into_check(Condition::DriftDivergenceConsistent, DIV_TOL));
    checks.push(ConditionCheck {
        condition: Condition::DriftDivergenceSurrogate,
        passed: max_div.is_finite(),
        margin: if max_div.is_finite() { 0.0 } else { f64::NEG_INFINITY },
        witness: Vec::new(),
        observed: max_div,
        note: Some("surrogate check: pointwise |div E| bound on the range replaces L2+Linf"),
    });

    // rate
    let rate = &coeffs.b;
    let rate_eval = |r: f64| rate.eval(r);
    let mut bounded = Worst::new();
    let mut deriv = Worst::new();
    let mut max_b = 0.0f64;
    for &r in &points {
        let v = rate.eval(r);
        max_b = max_b.max(v);
        bounded.offer(v.min(rate.sup_bound() - v), &[r]);
        let fd = central_difference(&rate_eval, r);
        let d = rate.deriv(r);
        deriv.offer(DERIV_REL_TOL - (d - fd).abs() / d.abs().max(1.0), &[r]);
    }
    checks.push(bounded.into_check(Condition::RateBounded, max_b));
    checks.push(deriv.into_check(Condition::RateDerivative, DERIV_REL_TOL));

    // a Lipschitz on range ∩ declared interval
    let (ilo, ihi) = coeffs.lipschitz_interval;
    let (llo, lhi) = if lo.max(ilo) < hi.min(ihi) {
        (lo.max(ilo), hi.min(ihi))
    } else {
        (ilo, ihi)
    };
    let lip = coeffs.lipschitz_a_local;
    let mut worst = Worst::new();
    let mut max_slope = 0.0f64;
    let lip_pairs = (0..n_samples)
        .map(|_| (rng.random_range(llo..lhi), rng.random_range(llo..lhi)))
        .collect::<Vec<_>>();
    for (r1, r2) in lip_pairs {
        if r1 == r2 {
            continue;
        }
        let (a1, a2) = (coeffs.a.eval(r1), coeffs.a.eval(r2));
        let slack = 1e-12 * a1.abs().max(a2.abs()).max(1.0);
        let diff = (a1 - a2).abs();
        max_slope = max_slope.max(diff / (r1 - r2).abs());
        worst.offer(lip * (r1 - r2).abs() + slack - diff, &[r1, r2]);
    }
    checks.push(worst.into_check(Condition::ALipschitz, max_slope));

    Ok(ValidationReport {
        range,
        n_samples,
        seed,
        checks,
    })
}
