//! I.i.d. potential families: sampling, scaling transforms, exact moments,
//! and the log-MGF `Lambda(lambda) = -ln E[exp(-lambda V)]`.
//!
//! `Lambda` is what lets annealed estimators integrate the disorder out
//! exactly, so for every supported spec it is a closed form, never a sampled
//! quantity. Discrete marginals stay discrete under all scalings (atoms map
//! through the transform); the exponential family keeps closed forms under
//! raw and multiplicative scaling, while its `ln(gamma V + 1)` transform has
//! an exact mean via the exponential integral E1 but no elementary `Lambda`.

use alloc::vec::Vec;
use core::fmt;

#[allow(unused_imports)] // test builds resolve f64 math through std instead
use num_traits::Float;
use serde::{Deserialize, Serialize};

use crate::lattice::BoxRegion;
use crate::rng::{self, TAG_FIELD};

/// Marginal distribution family of the unscaled draw.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Point mass at `c >= 0`.
    Constant { c: f64 },
    /// Value `b` with probability `p`, else `a`.
    Bernoulli { p: f64, a: f64, b: f64 },
    /// Exponential with the given rate (mean `1/rate`).
    Exponential { rate: f64 },
    /// Value `v1` with probability `p`, else `v0`.
    TwoPoint { p: f64, v0: f64, v1: f64 },
}

/// How the family draw `X` is turned into the potential value `V`.
///
/// `Example3` and `Example4` are self-contained two-point laws in `gamma`
/// (`P[V=1] = gamma` resp. `P[V=1/gamma] = gamma^(1/3)` with the bulk at
/// `gamma`); they specify the marginal completely and ignore the family.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scaling {
    /// `V = X`.
    Raw,
    /// `V = gamma * X`.
    GammaScaled { gamma: f64 },
    /// `V = ln(gamma * X + 1)`.
    Log1pGamma { gamma: f64 },
    /// `P[V=0] = 1-gamma`, `P[V=1] = gamma`.
    Example3 { gamma: f64 },
    /// `P[V=gamma] = 1-gamma^(1/3)`, `P[V=1/gamma] = gamma^(1/3)`.
    Example4 { gamma: f64 },
}

impl Scaling {
    pub fn gamma(&self) -> Option<f64> {
        match *self {
            Scaling::Raw => None,
            Scaling::GammaScaled { gamma }
            | Scaling::Log1pGamma { gamma }
            | Scaling::Example3 { gamma }
            | Scaling::Example4 { gamma } => Some(gamma),
        }
    }
}

/// A named i.i.d. marginal with its scaling mode.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PotentialSpec {
    pub family: Family,
    pub scaling: Scaling,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SpecError {
    InvalidParam(&'static str),
    /// The law puts no mass on `(0, inf)`; every estimator would be trivial.
    NoPositiveMass,
    /// No closed-form log-MGF for this family/scaling combination.
    UnsupportedLogMgf,
    /// Quenched estimators need a finite mean.
    InfiniteMean,
}

impl fmt::Display for SpecError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpecError::InvalidParam(what) => write!(f, "invalid potential parameter: {}", what),
            SpecError::NoPositiveMass => {
                write!(f, "potential must satisfy P[V > 0] > 0")
            }
            SpecError::UnsupportedLogMgf => {
                write!(f, "no closed-form log-MGF for this family/scaling combination")
            }
            SpecError::InfiniteMean => write!(f, "this operation requires E[V] < infinity"),
        }
    }
}

impl core::error::Error for SpecError {}

/// The scaled marginal in a form that moments and sampling share.
enum Marginal {
    /// `(value, probability)` atoms, probabilities summing to 1.
    Atoms(Vec<(f64, f64)>),
    /// Exponential with the given rate (any multiplicative scaling absorbed).
    Exponential { rate: f64 },
    /// `ln(gamma X + 1)` with `X ~ Exp(rate)`.
    Log1pExponential { rate: f64, gamma: f64 },
}

impl PotentialSpec {
    pub fn constant(c: f64) -> Self {
        PotentialSpec { family: Family::Constant { c }, scaling: Scaling::Raw }
    }

    pub fn bernoulli(p: f64, a: f64, b: f64) -> Self {
        PotentialSpec { family: Family::Bernoulli { p, a, b }, scaling: Scaling::Raw }
    }

    pub fn exponential(rate: f64) -> Self {
        PotentialSpec { family: Family::Exponential { rate }, scaling: Scaling::Raw }
    }

    pub fn two_point(p: f64, v0: f64, v1: f64) -> Self {
        PotentialSpec { family: Family::TwoPoint { p, v0, v1 }, scaling: Scaling::Raw }
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }

    pub fn validate(&self) -> Result<(), SpecError> {
        match self.family {
            Family::Constant { c } => {
                if !(c >= 0.0) || !c.is_finite() {
                    return Err(SpecError::InvalidParam("constant c must be finite and >= 0"));
                }
            }
            Family::Bernoulli { p, a, b } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(SpecError::InvalidParam("bernoulli p must lie in [0,1]"));
                }
                if !(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite()) {
                    return Err(SpecError::InvalidParam("bernoulli values must be finite and >= 0"));
                }
            }
            Family::Exponential { rate } => {
                if !(rate > 0.0) || !rate.is_finite() {
                    return Err(SpecError::InvalidParam("exponential rate must be finite and > 0"));
                }
            }
            Family::TwoPoint { p, v0, v1 } => {
                if !(0.0..=1.0).contains(&p) {
                    return Err(SpecError::InvalidParam("two_point p must lie in [0,1]"));
                }
                if !(v0 >= 0.0 && v1 >= 0.0 && v0.is_finite() && v1.is_finite()) {
                    return Err(SpecError::InvalidParam("two_point values must be finite and >= 0"));
                }
            }
        }
        if let Some(g) = self.scaling.gamma() {
            if !(g > 0.0) || !g.is_finite() {
                return Err(SpecError::InvalidParam("scaling gamma must be finite and > 0"));
            }
            if matches!(self.scaling, Scaling::Example3 { .. } | Scaling::Example4 { .. })
                && g > 1.0
            {
                return Err(SpecError::InvalidParam("example scalings need gamma <= 1"));
            }
        }
        match self.marginal() {
            Marginal::Atoms(atoms) => {
                let pos: f64 = atoms.iter().filter(|(v, _)| *v > 0.0).map(|(_, p)| p).sum();
                if pos <= 0.0 {
                    return Err(SpecError::NoPositiveMass);
                }
            }
            Marginal::Exponential { .. } | Marginal::Log1pExponential { .. } => {}
        }
        Ok(())
    }

    fn marginal(&self) -> Marginal {
        match self.scaling {
            Scaling::Example3 { gamma } => {
                return Marginal::Atoms(alloc::vec![(0.0, 1.0 - gamma), (1.0, gamma)]);
            }
            Scaling::Example4 { gamma } => {
                let q = gamma.powf(1.0 / 3.0);
                return Marginal::Atoms(alloc::vec![(gamma, 1.0 - q), (1.0 / gamma, q)]);
            }
            _ => {}
        }
        let raw_atoms: Option<Vec<(f64, f64)>> = match self.family {
            Family::Constant { c } => Some(alloc::vec![(c, 1.0)]),
            Family::Bernoulli { p, a, b } => Some(alloc::vec![(a, 1.0 - p), (b, p)]),
            Family::TwoPoint { p, v0, v1 } => Some(alloc::vec![(v0, 1.0 - p), (v1, p)]),
            Family::Exponential { .. } => None,
        };
        match (raw_atoms, self.scaling) {
            (Some(atoms), scaling) => {
                let mapped = atoms
                    .into_iter()
                    .map(|(v, p)| {
                        let tv = match scaling {
                            Scaling::Raw => v,
                            Scaling::GammaScaled { gamma } => gamma * v,
                            Scaling::Log1pGamma { gamma } => (gamma * v).ln_1p(),
                            Scaling::Example3 { .. } | Scaling::Example4 { .. } => unreachable!(),
                        };
                        (tv, p)
                    })
                    .collect();
                Marginal::Atoms(mapped)
            }
            (None, scaling) => {
                let rate = match self.family {
                    Family::Exponential { rate } => rate,
                    _ => unreachable!(),
                };
                match scaling {
                    Scaling::Raw => Marginal::Exponential { rate },
                    // gamma * Exp(rate) = Exp(rate / gamma)
                    Scaling::GammaScaled { gamma } => Marginal::Exponential { rate: rate / gamma },
                    Scaling::Log1pGamma { gamma } => Marginal::Log1pExponential { rate, gamma },
                    Scaling::Example3 { .. } | Scaling::Example4 { .. } => unreachable!(),
                }
            }
        }
    }

    /// Exact mean of the scaled marginal (`+inf` is representable).
    pub fn mean(&self) -> f64 {
        match self.marginal() {
            Marginal::Atoms(atoms) => atoms.iter().map(|(v, p)| v * p).sum(),
            Marginal::Exponential { rate } => 1.0 / rate,
            // E[ln(1 + gamma X)] = e^(rate/gamma) E1(rate/gamma)
            Marginal::Log1pExponential { rate, gamma } => expx_e1(rate / gamma),
        }
    }

    /// `Lambda(lambda) = -ln E[exp(-lambda V)]` for `lambda >= 0`.
    ///
    /// Nondecreasing, concave, `Lambda(0) = 0`, slope `E[V]` at the origin.
    pub fn log_mgf(&self, lambda: f64) -> Result<f64, SpecError> {
        assert!(lambda >= 0.0, "log_mgf needs lambda >= 0");
        match self.marginal() {
            Marginal::Atoms(atoms) => {
                let e: f64 = atoms.iter().map(|(v, p)| p * (-lambda * v).exp()).sum();
                Ok(-e.ln())
            }
            Marginal::Exponential { rate } => Ok((lambda / rate).ln_1p()),
            Marginal::Log1pExponential { .. } => Err(SpecError::UnsupportedLogMgf),
        }
    }

    /// Whether `log_mgf` has a closed form for this spec.
    pub fn has_closed_log_mgf(&self) -> bool {
        !matches!(self.marginal(), Marginal::Log1pExponential { .. })
    }

    /// Point mass check (annealed and quenched estimates coincide).
    pub fn is_degenerate(&self) -> bool {
        match self.marginal() {
            Marginal::Atoms(atoms) => {
                let mut value = None;
                for (v, p) in atoms {
                    if p > 0.0 {
                        match value {
                            None => value = Some(v),
                            Some(prev) if prev != v => return false,
                            _ => {}
                        }
                    }
                }
                true
            }
            _ => false,
        }
    }

    /// One inverse-CDF draw from the scaled marginal, `u` uniform in `[0,1)`.
    pub fn sample(&self, u: f64) -> f64 {
        match self.marginal() {
            Marginal::Atoms(atoms) => {
                let mut acc = 0.0;
                for (v, p) in &atoms {
                    acc += p;
                    if u < acc {
                        return *v;
                    }
                }
                atoms.last().map(|(v, _)| *v).unwrap_or(0.0)
            }
            Marginal::Exponential { rate } => -(-u).ln_1p() / rate,
            Marginal::Log1pExponential { rate, gamma } => {
                (gamma * (-(-u).ln_1p() / rate)).ln_1p()
            }
        }
    }

    /// The spec for `ln(V + 1)`, when the transform stays inside the
    /// representable scalings (raw and multiplicative inputs).
    pub fn log1p_transformed(&self) -> Result<PotentialSpec, SpecError> {
        let scaling = match self.scaling {
            Scaling::Raw => Scaling::Log1pGamma { gamma: 1.0 },
            Scaling::GammaScaled { gamma } => Scaling::Log1pGamma { gamma },
            _ => return Err(SpecError::InvalidParam("log1p transform needs raw or gamma_scaled input")),
        };
        Ok(PotentialSpec { family: self.family.clone(), scaling })
    }

    /// The distributional limit of `V_gamma / gamma` as `gamma` shrinks, used
    /// for scaling-sweep targets. `None` when the scaling has no gamma role.
    pub fn small_gamma_limit(&self) -> Option<PotentialSpec> {
        match self.scaling {
            Scaling::Raw => None,
            Scaling::GammaScaled { .. } | Scaling::Log1pGamma { .. } => {
                Some(PotentialSpec { family: self.family.clone(), scaling: Scaling::Raw })
            }
            Scaling::Example3 { .. } => Some(PotentialSpec::constant(0.0)),
            Scaling::Example4 { .. } => Some(PotentialSpec::constant(1.0)),
        }
    }
}

/// Curated pairs `(V, W)` with `V` more variable than `W` (same mean), i.e.
/// `E[h(V)] <= E[h(W)]` for all increasing concave `h`. Used by ordering
/// tests expecting `alpha_V <= alpha_W`.
pub fn more_variable_pairs() -> Vec<(PotentialSpec, PotentialSpec)> {
    alloc::vec![
        // a law is more variable than the point mass at its mean
        (PotentialSpec::exponential(2.0), PotentialSpec::constant(0.5)),
        (PotentialSpec::bernoulli(0.5, 0.0, 1.0), PotentialSpec::constant(0.5)),
        // mean-preserving spread of a two-point law
        (PotentialSpec::bernoulli(0.5, 0.0, 1.0), PotentialSpec::two_point(0.5, 0.25, 0.75)),
    ]
}

/// `e^x E1(x)` for `x > 0`: series below 1, continued fraction above.
pub fn expx_e1(x: f64) -> f64 {
    assert!(x > 0.0, "expx_e1 needs x > 0");
    const EULER: f64 = 0.577_215_664_901_532_9;
    if x < 1.0 {
        // E1(x) = -euler - ln x + sum_{k>=1} (-1)^(k+1) x^k / (k k!)
        let mut sum = 0.0;
        let mut term = 1.0;
        for k in 1..200 {
            term *= -x / k as f64;
            let add = -term / k as f64;
            sum += add;
            if add.abs() < 1e-18 * (1.0 + sum.abs()) {
                break;
            }
        }
        (-EULER - x.ln() + sum) * x.exp()
    } else {
        // e^x E1(x) = 1/(x+1 - 1^2/(x+3 - 2^2/(x+5 - ...)))  (Lentz)
        let tiny = 1e-300;
        let mut f = tiny;
        let mut c = f;
        let mut d = 0.0;
        for k in 0..400u32 {
            let (a, b) = if k == 0 {
                (1.0, x + 1.0)
            } else {
                (-(k as f64) * (k as f64), x + 2.0 * k as f64 + 1.0)
            };
            d = b + a * d;
            if d.abs() < tiny {
                d = tiny;
            }
            c = b + a / c;
            if c.abs() < tiny {
                c = tiny;
            }
            d = 1.0 / d;
            let delta = c * d;
            f *= delta;
            if (delta - 1.0).abs() < 1e-16 {
                break;
            }
        }
        f
    }
}

/// Values attached to the sites of a finite box, in flat index order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalarField {
    box_region: BoxRegion,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(box_region: BoxRegion, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), box_region.site_count(), "one value per box site");
        ScalarField { box_region, values }
    }

    pub fn constant(box_region: BoxRegion, value: f64) -> Self {
        let n = box_region.site_count();
        ScalarField::new(box_region, alloc::vec![value; n])
    }

    pub fn box_region(&self) -> &BoxRegion {
        &self.box_region
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value_at(&self, index: usize) -> f64 {
        self.values[index]
    }

    pub fn get(&self, site: &crate::lattice::Site) -> Option<f64> {
        self.box_region.index_of(site).map(|i| self.values[i])
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> ScalarField {
        ScalarField {
            box_region: self.box_region.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::infinity(), f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::neg_infinity(), f64::max)
    }
}

/// Samples an i.i.d. field over the box.
///
/// Each lattice site draws from a stream keyed by its coordinates (not its
/// box index), so enlarging the box extends a realization instead of
/// reshuffling it, and any parallel fill equals the sequential one.
pub fn sample_field(spec: &PotentialSpec, box_region: &BoxRegion, seed: u64) -> ScalarField {
    let n = box_region.site_count();
    let mut values = Vec::with_capacity(n);
    for site in box_region.sites() {
        let u = rng::unit_draw(seed, TAG_FIELD, rng::site_stream_index(&site.coords));
        values.push(spec.sample(u));
    }
    ScalarField::new(box_region.clone(), values)
}
