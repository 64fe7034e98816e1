//! Scenario ground motion: a simplified attenuation relation plus spatially
//! correlated lognormal residuals sampled through a Cholesky factor.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{NetworkCase, Point};

/// A straight fault rupture and its source/site parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FaultScenario {
    pub trace: [Point; 2],
    pub magnitude: f64,
    pub vs30: f64,
    pub sigma_ln: f64,
}

impl Default for FaultScenario {
    fn default() -> Self {
        FaultScenario {
            trace: [Point::new(0.0, 50.0), Point::new(40.0, 60.0)],
            magnitude: 8.0,
            vs30: 760.0,
            sigma_ln: 0.6,
        }
    }
}

impl FaultScenario {
    pub fn validate(&self) -> Result<()> {
        if !(4.0..=9.5).contains(&self.magnitude) {
            return Err(Error::Config(format!("magnitude {} outside [4, 9.5]", self.magnitude)));
        }
        if !(self.vs30 > 0.0 && self.vs30.is_finite()) {
            return Err(Error::Config("vs30 must be positive".into()));
        }
        // zero sigma is accepted for deterministic median runs
        if !(self.sigma_ln >= 0.0 && self.sigma_ln.is_finite()) {
            return Err(Error::Config("sigma_ln must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationModel {
    /// Correlation length, km.
    pub range_km: f64,
}

impl Default for CorrelationModel {
    fn default() -> Self {
        CorrelationModel { range_km: 40.0 }
    }
}

impl CorrelationModel {
    pub fn rho(&self, h: f64) -> f64 {
        (-3.0 * h / self.range_km).exp()
    }

    pub fn validate(&self) -> Result<()> {
        if self.range_km > 0.0 && self.range_km.is_finite() {
            Ok(())
        } else {
            Err(Error::Config("correlation range must be positive".into()))
        }
    }
}

/// Median ground motion model: `ln PGA[g]` from magnitude, distance and site.
pub trait GroundMotionModel {
    fn ln_median(&self, magnitude: f64, distance_km: f64, vs30: f64) -> f64;
}

/// `ln PGA = c0 + c1 (M-6) + c2 (M-6)^2 - c3 ln sqrt(R^2 + h^2) + c4 ln(760 / vs30)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplifiedAttenuation {
    pub c0: f64,
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    /// Near-source saturation depth, km.
    pub h: f64,
}

impl Default for SimplifiedAttenuation {
    /// Gives roughly 0.29 g at 10 km from an M8 rupture on rock, decaying
    /// to about 0.08 g at 50 km.
    fn default() -> Self {
        SimplifiedAttenuation { c0: -0.2, c1: 1.0, c2: -0.1, c3: 1.0, c4: 0.6, h: 10.0 }
    }
}

impl SimplifiedAttenuation {
    pub fn validate(&self) -> Result<()> {
        let all = [self.c0, self.c1, self.c2, self.c3, self.c4, self.h];
        if all.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("attenuation coefficients must be finite".into()));
        }
        if self.c3 <= 0.0 || self.h <= 0.0 {
            return Err(Error::Config("attenuation needs c3 > 0 and h > 0".into()));
        }
        Ok(())
    }
}

impl GroundMotionModel for SimplifiedAttenuation {
    fn ln_median(&self, magnitude: f64, distance_km: f64, vs30: f64) -> f64 {
        let dm = magnitude - 6.0;
        let r = (distance_km * distance_km + self.h * self.h).sqrt();
        self.c0 + self.c1 * dm + self.c2 * dm * dm - self.c3 * r.ln() + self.c4 * (760.0 / vs30).ln()
    }
}

/// Distance from a site to the closest point of the rupture segment.
pub fn fault_distance(site: Point, trace: [Point; 2]) -> f64 {
    let [a, b] = trace;
    let (dx, dy) = (b.x - a.x, b.y - a.y);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return site.distance(a);
    }
    let t = (((site.x - a.x) * dx + (site.y - a.y) * dy) / len2).clamp(0.0, 1.0);
    site.distance(Point::new(a.x + t * dx, a.y + t * dy))
}

pub fn correlation_matrix(sites: &[Point], model: &CorrelationModel) -> DMatrix<f64> {
    let n = sites.len();
    DMatrix::from_fn(n, n, |i, j| if i == j { 1.0 } else { model.rho(sites[i].distance(sites[j])) })
}

/// Lower Cholesky factor, retrying with diagonal jitter 1e-10, 2e-10, ...
/// up to 1e-6 when the matrix is only semi-definite.
pub fn cholesky_with_jitter(matrix: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if let Some(ch) = matrix.clone().cholesky() {
        return Ok(ch.l());
    }
    let n = matrix.nrows();
    let mut jitter = 1e-10;
    while jitter <= 1e-6 {
        let m = matrix + DMatrix::identity(n, n) * jitter;
        if let Some(ch) = m.cholesky() {
            log::debug!("correlation matrix factorized with jitter {jitter:e}");
            return Ok(ch.l());
        }
        jitter *= 2.0;
    }
    Err(Error::Hazard("correlation matrix is not positive definite even with 1e-6 jitter".into()))
}

/// PGA in g at every component of a case (lines get their midpoint value;
/// nothing downstream reads it).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntensityField {
    pga: Vec<f64>,
}

impl IntensityField {
    pub fn new(pga: Vec<f64>) -> Result<Self> {
        if let Some(v) = pga.iter().find(|v| !(v.is_finite() && **v > 0.0)) {
            return Err(Error::Hazard(format!("non-positive or non-finite PGA {v}")));
        }
        Ok(IntensityField { pga })
    }

    pub fn uniform(case: &NetworkCase, pga: f64) -> Self {
        IntensityField { pga: vec![pga; case.components().len()] }
    }

    pub fn pga(&self, component: usize) -> f64 {
        self.pga[component]
    }

    pub fn values(&self) -> &[f64] {
        &self.pga
    }

    pub fn to_named(&self, case: &NetworkCase) -> Vec<(String, f64)> {
        case.components().iter().zip(&self.pga).map(|(c, v)| (c.id.clone(), *v)).collect()
    }
}

/// Pre-factorized sampler for one (case, fault, correlation) combination.
///
/// Components sharing a location (a bus and its generator/load) share one
/// site, so the correlation matrix stays non-singular in the common case.
#[derive(Clone, Debug)]
pub struct FieldSampler {
    site_of: Vec<usize>,
    ln_median: Vec<f64>,
    factor: DMatrix<f64>,
    sigma: f64,
}

impl FieldSampler {
    pub fn new(
        case: &NetworkCase,
        fault: &FaultScenario,
        gmm: &dyn GroundMotionModel,
        corr: &CorrelationModel,
    ) -> Result<Self> {
        fault.validate()?;
        corr.validate()?;
        let mut sites: Vec<Point> = Vec::new();
        let mut site_of = Vec::with_capacity(case.components().len());
        for comp in case.components() {
            let idx = match sites.iter().position(|p| *p == comp.location) {
                Some(i) => i,
                None => {
                    sites.push(comp.location);
                    sites.len() - 1
                }
            };
            site_of.push(idx);
        }
        if sites.is_empty() {
            return Err(Error::Hazard("no sites to sample".into()));
        }
        let ln_median = sites
            .iter()
            .map(|s| gmm.ln_median(fault.magnitude, fault_distance(*s, fault.trace), fault.vs30))
            .collect::<Vec<_>>();
        if ln_median.iter().any(|v| !v.is_finite()) {
            return Err(Error::Hazard("ground motion model returned a non-finite median".into()));
        }
        let factor = cholesky_with_jitter(&correlation_matrix(&sites, corr))?;
        Ok(FieldSampler { site_of, ln_median, factor, sigma: fault.sigma_ln })
    }

    pub fn site_count(&self) -> usize {
        self.ln_median.len()
    }

    /// Median PGA at every component.
    pub fn median_field(&self) -> IntensityField {
        IntensityField { pga: self.site_of.iter().map(|&s| self.ln_median[s].exp()).collect() }
    }

    /// Correlated standard-normal residuals, one per unique site.
    pub fn sample_residuals<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_iterator(self.site_count(), (0..self.site_count()).map(|_| rng.sample(StandardNormal)));
        &self.factor * z
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<IntensityField> {
        let eps = self.sample_residuals(rng);
        let pga = self.site_of.iter().map(|&s| (self.ln_median[s] + self.sigma * eps[s]).exp()).collect();
        IntensityField::new(pga)
    }
}

/// One-shot convenience around [`FieldSampler`].
pub fn sample_field<R: Rng + ?Sized>(
    case: &NetworkCase,
    fault: &FaultScenario,
    gmm: &dyn GroundMotionModel,
    corr: &CorrelationModel,
    rng: &mut R,
) -> Result<IntensityField> {
    FieldSampler::new(case, fault, gmm, corr)?.sample(rng)
}
