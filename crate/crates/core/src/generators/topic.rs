//! Latent topic process: a drifted Gaussian walk `Y_t` over the latent space
//! that emits words close to the current topic.

use std::str::FromStr;

use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use super::points::{sq_dist, PointCloud};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct MixtureComponent {
    pub weight: f64,
    pub mean: Vec<f64>,
    /// Isotropic standard deviation.
    pub std: f64,
}

/// Mixture of isotropic Gaussians used as the topic density `w(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    components: Vec<MixtureComponent>,
    dim: usize,
}

impl GaussianMixture {
    pub fn new(components: Vec<MixtureComponent>) -> Result<Self> {
        let dim = components
            .first()
            .map(|c| c.mean.len())
            .ok_or_else(|| Error::InvalidConfig("mixture needs at least one component".into()))?;
        for c in &components {
            if c.mean.len() != dim || dim == 0 {
                return Err(Error::InvalidConfig("mixture components differ in dimension".into()));
            }
            if !(c.weight > 0.0) || !(c.std > 0.0) || c.mean.iter().any(|m| !m.is_finite()) {
                return Err(Error::InvalidConfig(
                    "mixture weights and scales must be positive and finite".into(),
                ));
            }
        }
        let total: f64 = components.iter().map(|c| c.weight).sum();
        let components = components
            .into_iter()
            .map(|c| MixtureComponent {
                weight: c.weight / total,
                ..c
            })
            .collect();
        Ok(Self { components, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn components(&self) -> &[MixtureComponent] {
        &self.components
    }

    fn log_terms(&self, x: &[f64]) -> Vec<f64> {
        let d = self.dim as f64;
        self.components
            .iter()
            .map(|c| {
                let s2 = c.std * c.std;
                c.weight.ln()
                    - 0.5 * d * (2.0 * std::f64::consts::PI * s2).ln()
                    - sq_dist(x, &c.mean) / (2.0 * s2)
            })
            .collect()
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let t = self.log_terms(x);
        let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        m + t.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
    }

    /// `∇ log w(x) = Σ_k r_k(x) (μ_k - x) / s_k²` with responsibilities `r_k`.
    pub fn grad_log_density(&self, x: &[f64]) -> Vec<f64> {
        let t = self.log_terms(x);
        let m = t.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = t.iter().map(|v| (v - m).exp()).collect();
        let z: f64 = w.iter().sum();
        let mut g = vec![0.0; self.dim];
        for (c, wk) in self.components.iter().zip(&w) {
            let r = wk / z / (c.std * c.std);
            for (gi, (mi, xi)) in g.iter_mut().zip(c.mean.iter().zip(x)) {
                *gi += r * (mi - xi);
            }
        }
        g
    }

    pub fn sample(&self, r: &mut Rng) -> Vec<f64> {
        let u: f64 = r.random();
        let mut acc = 0.0;
        let mut chosen = &self.components[self.components.len() - 1];
        for c in &self.components {
            acc += c.weight;
            if u < acc {
                chosen = c;
                break;
            }
        }
        chosen
            .mean
            .iter()
            .map(|m| {
                let z: f64 = StandardNormal.sample(r);
                m + chosen.std * z
            })
            .collect()
    }
}

/// Parses `weight@m1,m2,...@std` components separated by `;`.
impl FromStr for GaussianMixture {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("bad mixture spec {s:?}; expected weight@m1,m2@std;..."));
        let mut comps = Vec::new();
        for part in s.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let f: Vec<&str> = part.split('@').collect();
            if f.len() != 3 {
                return Err(bad());
            }
            let weight = f[0].trim().parse().map_err(|_| bad())?;
            let mean = f[1]
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()
                .map_err(|_| bad())?;
            let std = f[2].trim().parse().map_err(|_| bad())?;
            comps.push(MixtureComponent { weight, mean, std });
        }
        Self::new(comps)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicModelConfig {
    /// Step scale σ: jump covariance σ²·I and drift σ²·∇log w.
    pub sigma: f64,
    /// Emission scale σ̄.
    pub sigma_bar: f64,
    /// Per-word non-metric frequencies α_i.
    pub alpha: Vec<f64>,
    pub density: GaussianMixture,
    /// Initial topic; drawn from the density when absent.
    pub start: Option<Vec<f64>>,
}

impl TopicModelConfig {
    /// Second moment of the jump kernel, `d·σ²` for the isotropic Gaussian.
    pub fn sigma0(&self) -> f64 {
        self.density.dim() as f64 * self.sigma * self.sigma
    }

    fn validate(&self, points: &PointCloud) -> Result<()> {
        if !(self.sigma > 0.0) || !(self.sigma_bar > 0.0) {
            return Err(Error::InvalidConfig("sigma and sigma_bar must be positive".into()));
        }
        if self.alpha.len() != points.len() {
            return Err(Error::InvalidConfig(format!(
                "{} alpha values for {} words",
                self.alpha.len(),
                points.len()
            )));
        }
        if self.alpha.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
            return Err(Error::InvalidConfig("alpha values must be positive".into()));
        }
        if self.density.dim() != points.dim() {
            return Err(Error::InvalidConfig("density and points differ in dimension".into()));
        }
        if let Some(s) = &self.start {
            if s.len() != points.dim() {
                return Err(Error::InvalidConfig("start has the wrong dimension".into()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TopicWalk {
    pub tokens: Vec<u32>,
    /// Row-major latent states, present when requested.
    pub latent: Option<Vec<f64>>,
}

/// Emission log-weights `log α_i - ‖x_i - y‖²/σ̄²` sampled in log space.
fn emit(points: &PointCloud, log_alpha: &[f64], sb2: f64, y: &[f64], buf: &mut [f64], r: &mut Rng) -> Result<u32> {
    let mut m = f64::NEG_INFINITY;
    for (i, b) in buf.iter_mut().enumerate() {
        *b = log_alpha[i] - sq_dist(points.row(i), y) / sb2;
        m = m.max(*b);
    }
    if !m.is_finite() {
        return Err(Error::EmissionUnderflow(y.to_vec()));
    }
    let mut z = 0.0;
    for b in buf.iter_mut() {
        *b = (*b - m).exp();
        z += *b;
    }
    let u = r.random::<f64>() * z;
    let mut acc = 0.0;
    for (i, b) in buf.iter().enumerate() {
        acc += b;
        if u < acc {
            return Ok(i as u32);
        }
    }
    // u landed in the rounding gap at the top; take the last positive weight.
    Ok(buf.iter().rposition(|&b| b > 0.0).unwrap_or(0) as u32)
}

/// Runs the topic process for `steps` steps, emitting one token per step.
pub fn topic_walk(
    points: &PointCloud,
    config: &TopicModelConfig,
    steps: usize,
    seed: u64,
    keep_latent: bool,
) -> Result<TopicWalk> {
    config.validate(points)?;
    let mut r = rng::seeded(seed);
    let d = points.dim();
    let s2 = config.sigma * config.sigma;
    let sb2 = config.sigma_bar * config.sigma_bar;
    let log_alpha: Vec<f64> = config.alpha.iter().map(|a| a.ln()).collect();
    let mut y = match &config.start {
        Some(s) => s.clone(),
        None => config.density.sample(&mut r),
    };
    let mut buf = vec![0.0; points.len()];
    let mut tokens = Vec::with_capacity(steps);
    let mut latent = keep_latent.then(|| Vec::with_capacity(steps * d));
    for t in 0..steps {
        if t > 0 {
            let g = config.density.grad_log_density(&y);
            for (yi, gi) in y.iter_mut().zip(&g) {
                let z: f64 = StandardNormal.sample(&mut r);
                *yi += s2 * gi + config.sigma * z;
            }
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::EmissionUnderflow(y));
        }
        tokens.push(emit(points, &log_alpha, sb2, &y, &mut buf, &mut r)?);
        if let Some(l) = latent.as_mut() {
            l.extend_from_slice(&y);
        }
    }
    Ok(TopicWalk { tokens, latent })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_points(n: usize) -> PointCloud {
        PointCloud::from_rows(&(0..n).map(|i| vec![i as f64]).collect::<Vec<_>>()).unwrap()
    }

    fn flat(dim: usize) -> GaussianMixture {
        // a single very wide component has a negligible gradient near the origin
        GaussianMixture::new(vec![MixtureComponent {
            weight: 1.0,
            mean: vec![0.0; dim],
            std: 1e6,
        }])
        .unwrap()
    }

    #[test]
    fn mixture_gradient_matches_finite_differences() {
        let m: GaussianMixture = "0.3@0,0@0.5; 0.7@1,-1@1.2".parse().unwrap();
        let x = [0.4, 0.1];
        let g = m.grad_log_density(&x);
        for k in 0..2 {
            let h = 1e-6;
            let mut xp = x;
            let mut xm = x;
            xp[k] += h;
            xm[k] -= h;
            let fd = (m.log_density(&xp) - m.log_density(&xm)) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-7, "{fd} vs {}", g[k]);
        }
    }

    #[test]
    fn mixture_density_integrates_to_one() {
        let m: GaussianMixture = "1@0@0.5;2@2@0.3".parse().unwrap();
        let h = 1e-3;
        let total: f64 = (-5000..7000).map(|k| m.log_density(&[k as f64 * h]).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6);
    }

    #[test]
    fn bad_mixture_spec() {
        assert!("1@0".parse::<GaussianMixture>().is_err());
        assert!("1@0@-1".parse::<GaussianMixture>().is_err());
        assert!("".parse::<GaussianMixture>().is_err());
    }

    #[test]
    fn point_mass_limit_emits_start_word() {
        let pc = line_points(10);
        let cfg = TopicModelConfig {
            sigma: 1e-9,
            sigma_bar: 1e-3,
            alpha: vec![1.0; 10],
            density: flat(1),
            start: Some(vec![5.0]),
        };
        let w = topic_walk(&pc, &cfg, 500, 3, false).unwrap();
        assert!(w.tokens.iter().all(|&t| t == 5));
    }

    #[test]
    fn emission_ratio_follows_alpha() {
        // y equidistant from words 0 and 1; word 2 far away
        let pc = PointCloud::from_rows(&[vec![-1.0], vec![1.0], vec![50.0]]).unwrap();
        let cfg = TopicModelConfig {
            sigma: 1e-12,
            sigma_bar: 2.0,
            alpha: vec![1.0, 4.0, 1.0],
            density: flat(1),
            start: Some(vec![0.0]),
        };
        let w = topic_walk(&pc, &cfg, 200_000, 5, false).unwrap();
        let c0 = w.tokens.iter().filter(|&&t| t == 0).count() as f64;
        let c1 = w.tokens.iter().filter(|&&t| t == 1).count() as f64;
        assert!(w.tokens.iter().all(|&t| t != 2));
        let ratio = c1 / c0;
        // binomial sd of the ratio is about 0.03
        assert!((ratio - 4.0).abs() < 0.15, "ratio {ratio}");
    }

    #[test]
    fn non_finite_latent_is_reported() {
        let pc = line_points(3);
        let cfg = TopicModelConfig {
            sigma: 1.0,
            sigma_bar: 1.0,
            alpha: vec![1.0; 3],
            density: flat(1),
            start: Some(vec![f64::INFINITY]),
        };
        assert!(matches!(
            topic_walk(&pc, &cfg, 3, 0, false),
            Err(Error::EmissionUnderflow(_))
        ));
    }

    #[test]
    fn seeded_and_sigma0() {
        let pc = PointCloud::uniform_cube(6, 2, 1).unwrap();
        let cfg = TopicModelConfig {
            sigma: 0.1,
            sigma_bar: 0.3,
            alpha: vec![1.0; 6],
            density: "1@0.5,0.5@0.3".parse().unwrap(),
            start: None,
        };
        assert!((cfg.sigma0() - 0.02).abs() < 1e-15);
        let a = topic_walk(&pc, &cfg, 300, 9, true).unwrap();
        let b = topic_walk(&pc, &cfg, 300, 9, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.latent.unwrap().len(), 600);
    }
}
