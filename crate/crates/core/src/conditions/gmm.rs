//! Random Gaussian-mixture heat sources.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Rect;
use crate::error::{Error, Result};
use crate::field::{Grid, ScalarField};

pub const MAX_COMPONENTS: usize = 20;
/// Sigma bounds as fractions of the support size along each axis.
pub const SIGMA_FRACTION: (f64, f64) = (0.05, 0.3);

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianComponent {
    pub amplitude: f64,
    pub mean: [f64; 2],
    pub sigma: [f64; 2],
}

impl GaussianComponent {
    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let dx = x - self.mean[0];
        let dy = y - self.mean[1];
        self.amplitude
            * (-(dx * dx) / (2.0 * self.sigma[0] * self.sigma[0])
                - (dy * dy) / (2.0 * self.sigma[1] * self.sigma[1]))
                .exp()
    }
}

/// A heat-source distribution: a sum of anisotropic Gaussians confined to
/// `support`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianMixtureSpec {
    pub seed: u64,
    pub support: Rect,
    pub components: Vec<GaussianComponent>,
}

impl GaussianMixtureSpec {
    pub fn validate(&self) -> Result<()> {
        self.support.validate()?;
        let k = self.components.len();
        if k == 0 || k > MAX_COMPONENTS {
            return Err(Error::InvalidSpec(format!(
                "mixture needs 1..={MAX_COMPONENTS} components, got {k}"
            )));
        }
        for (n, c) in self.components.iter().enumerate() {
            if !(c.amplitude >= 0.0 && c.amplitude.is_finite()) {
                return Err(Error::InvalidSpec(format!(
                    "component {n}: amplitude {} must be finite and >= 0",
                    c.amplitude
                )));
            }
            if !(c.sigma[0] > 0.0 && c.sigma[1] > 0.0)
                || !c.sigma[0].is_finite()
                || !c.sigma[1].is_finite()
            {
                return Err(Error::InvalidSpec(format!(
                    "component {n}: sigmas must be positive"
                )));
            }
            if !self.support.contains(c.mean[0], c.mean[1]) {
                return Err(Error::InvalidSpec(format!(
                    "component {n}: mean {:?} outside the support",
                    c.mean
                )));
            }
        }
        Ok(())
    }

    /// Value at a point; zero outside the support.
    pub fn value_at(&self, x: f64, y: f64) -> f64 {
        if !self.support.contains(x, y) {
            return 0.0;
        }
        self.components.iter().map(|c| c.eval(x, y)).sum()
    }

    pub fn evaluate(&self, grid: &Grid) -> Result<ScalarField> {
        ScalarField::from_fn(*grid, |x, y| self.value_at(x, y))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let spec: GaussianMixtureSpec = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }
}

/// Draws a mixture with `k ~ U{k_min..=k_max}` components: means uniform in
/// `support`, per-axis sigmas uniform in `SIGMA_FRACTION` × support size,
/// amplitudes uniform in `amp_range`. Deterministic per seed.
pub fn sample_gmm(
    seed: u64,
    k_min: usize,
    k_max: usize,
    grid: &Grid,
    support: Rect,
    amp_range: (f64, f64),
) -> Result<(GaussianMixtureSpec, ScalarField)> {
    if !(1 <= k_min && k_min <= k_max && k_max <= MAX_COMPONENTS) {
        return Err(Error::InvalidSpec(format!(
            "need 1 <= k_min <= k_max <= {MAX_COMPONENTS}, got {k_min}..{k_max}"
        )));
    }
    support.validate()?;
    let domain = Rect::of_grid(grid);
    if !domain.contains_rect(&support) {
        return Err(Error::InvalidSpec(format!(
            "support {support:?} lies outside the grid extents"
        )));
    }
    let (amp_lo, amp_hi) = amp_range;
    if !(amp_lo >= 0.0 && amp_lo <= amp_hi && amp_hi.is_finite()) {
        return Err(Error::InvalidSpec(format!(
            "amplitude range {amp_range:?} must satisfy 0 <= lo <= hi"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let k = rng.gen_range(k_min..=k_max);
    let (w, h) = (support.width(), support.height());
    let uniform = |rng: &mut ChaCha8Rng, lo: f64, hi: f64| lo + (hi - lo) * rng.gen::<f64>();
    let components = (0..k)
        .map(|_| {
            let mean = [
                uniform(&mut rng, support.x0, support.x1),
                uniform(&mut rng, support.y0, support.y1),
            ];
            let sigma = [
                uniform(&mut rng, SIGMA_FRACTION.0 * w, SIGMA_FRACTION.1 * w),
                uniform(&mut rng, SIGMA_FRACTION.0 * h, SIGMA_FRACTION.1 * h),
            ];
            let amplitude = uniform(&mut rng, amp_lo, amp_hi);
            GaussianComponent {
                amplitude,
                mean,
                sigma,
            }
        })
        .collect();
    let spec = GaussianMixtureSpec {
        seed,
        support,
        components,
    };
    let field = spec.evaluate(grid)?;
    Ok((spec, field))
}

/// Trapezoidal integral of a field over its grid.
pub fn integrated_power(field: &ScalarField) -> f64 {
    let g = field.grid();
    let mut total = 0.0;
    for j in 0..g.ny {
        let wy = if j == 0 || j + 1 == g.ny { 0.5 } else { 1.0 };
        for i in 0..g.nx {
            let wx = if i == 0 || i + 1 == g.nx { 0.5 } else { 1.0 };
            total += wx * wy * field.at(i, j);
        }
    }
    total * g.hx() * g.hy()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn chip() -> Rect {
        Rect::new(0.3, 0.1, 0.7, 0.5)
    }

    #[test]
    fn value_at_mean_is_amplitude() {
        let spec = GaussianMixtureSpec {
            seed: 0,
            support: Rect::new(0.0, 0.0, 1.0, 1.0),
            components: vec![GaussianComponent {
                amplitude: 7.5,
                mean: [0.5, 0.25],
                sigma: [0.1, 0.2],
            }],
        };
        let g = Grid::new(3, 5, 1.0, 1.0, (0.0, 0.0)).unwrap();
        let f = spec.evaluate(&g).unwrap();
        assert_eq!(f.at(1, 1), 7.5);
    }

    #[test]
    fn same_seed_is_bit_identical() {
        let g = Grid::unit_square(32).unwrap();
        let (s1, f1) = sample_gmm(42, 1, 20, &g, chip(), (10.0, 100.0)).unwrap();
        let (s2, f2) = sample_gmm(42, 1, 20, &g, chip(), (10.0, 100.0)).unwrap();
        assert_eq!(s1, s2);
        assert!(f1
            .values()
            .iter()
            .zip(f2.values())
            .all(|(a, b)| a.to_bits() == b.to_bits()));
        let (s3, _) = sample_gmm(43, 1, 20, &g, chip(), (10.0, 100.0)).unwrap();
        assert_ne!(s1, s3);
    }

    #[test]
    fn three_components_match_per_node_oracle() {
        let spec = GaussianMixtureSpec {
            seed: 9,
            support: Rect::new(0.0, 0.0, 1.0, 1.0),
            components: vec![
                GaussianComponent {
                    amplitude: 3.0,
                    mean: [0.2, 0.3],
                    sigma: [0.1, 0.15],
                },
                GaussianComponent {
                    amplitude: 1.5,
                    mean: [0.7, 0.6],
                    sigma: [0.05, 0.2],
                },
                GaussianComponent {
                    amplitude: 0.25,
                    mean: [0.5, 0.9],
                    sigma: [0.3, 0.08],
                },
            ],
        };
        let g = Grid::unit_square(8).unwrap();
        let f = spec.evaluate(&g).unwrap();
        for j in 0..8 {
            for i in 0..8 {
                let (x, y) = (i as f64 / 7.0, j as f64 / 7.0);
                let mut oracle = 0.0;
                for (a, mx, my, sx, sy) in [
                    (3.0, 0.2, 0.3, 0.1, 0.15),
                    (1.5, 0.7, 0.6, 0.05, 0.2),
                    (0.25, 0.5, 0.9, 0.3, 0.08),
                ] {
                    let ex = (x - mx) * (x - mx) / (2.0 * sx * sx);
                    let ey = (y - my) * (y - my) / (2.0 * sy * sy);
                    oracle += a * (-(ex + ey)).exp();
                }
                assert!((f.at(i, j) - oracle).abs() <= 1e-14 * oracle.max(1.0));
            }
        }
    }

    #[test]
    fn confined_to_support() {
        let g = Grid::unit_square(33).unwrap();
        let (_, f) = sample_gmm(5, 3, 3, &g, chip(), (1.0, 2.0)).unwrap();
        for j in 0..33 {
            for i in 0..33 {
                if !chip().contains(g.x(i), g.y(j)) {
                    assert_eq!(f.at(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn invalid_requests() {
        let g = Grid::unit_square(8).unwrap();
        let empty = Rect::new(0.3, 0.3, 0.3, 0.5);
        assert!(matches!(
            sample_gmm(1, 1, 3, &g, empty, (0.0, 1.0)),
            Err(Error::InvalidSpec(_))
        ));
        assert!(sample_gmm(1, 0, 3, &g, chip(), (0.0, 1.0)).is_err());
        assert!(sample_gmm(1, 3, 21, &g, chip(), (0.0, 1.0)).is_err());
        assert!(sample_gmm(1, 4, 3, &g, chip(), (0.0, 1.0)).is_err());
        assert!(sample_gmm(1, 1, 3, &g, Rect::new(0.5, 0.5, 1.5, 0.8), (0.0, 1.0)).is_err());
    }

    #[test]
    fn json_round_trip_and_validation() {
        let g = Grid::unit_square(8).unwrap();
        let (spec, _) = sample_gmm(77, 1, 20, &g, chip(), (1.0, 5.0)).unwrap();
        let back = GaussianMixtureSpec::from_json(&spec.to_json().unwrap()).unwrap();
        assert_eq!(back, spec);
        assert!(GaussianMixtureSpec::from_json("{\"seed\": 1}").is_err());
        let mut bad = spec.clone();
        bad.components[0].sigma[1] = 0.0;
        assert!(GaussianMixtureSpec::from_json(&bad.to_json().unwrap()).is_err());
    }

    #[test]
    fn power_of_constant() {
        let g = Grid::new(5, 9, 2.0, 0.5, (0.0, 0.0)).unwrap();
        let f = ScalarField::constant(g, 3.0);
        assert!((integrated_power(&f) - 3.0).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fields_nonnegative_and_component_count_bounded(seed in any::<u64>(), kmin in 1usize..20) {
            let g = Grid::unit_square(16).unwrap();
            let (spec, f) = sample_gmm(seed, kmin, 20, &g, chip(), (0.0, 50.0)).unwrap();
            prop_assert!(spec.components.len() >= kmin && spec.components.len() <= 20);
            prop_assert!(f.values().iter().all(|&v| v >= 0.0));
            prop_assert!(spec.validate().is_ok());
        }

        #[test]
        fn amplitude_increase_is_monotone(seed in any::<u64>(), which in 0usize..20, bump in 0.1f64..10.0) {
            let g = Grid::unit_square(16).unwrap();
            let (spec, f) = sample_gmm(seed, 1, 20, &g, chip(), (1.0, 5.0)).unwrap();
            let mut louder = spec.clone();
            let n = which % louder.components.len();
            louder.components[n].amplitude += bump;
            let f2 = louder.evaluate(&g).unwrap();
            for j in 0..16 {
                for i in 0..16 {
                    let contrib = if chip().contains(g.x(i), g.y(j)) {
                        spec.components[n].eval(g.x(i), g.y(j))
                    } else { 0.0 };
                    let delta = contrib * bump / spec.components[n].amplitude;
                    if delta > 1e-12 * f.at(i, j).max(1.0) {
                        prop_assert!(f2.at(i, j) > f.at(i, j));
                    } else {
                        prop_assert!(f2.at(i, j) >= f.at(i, j));
                    }
                }
            }
        }
    }
}
