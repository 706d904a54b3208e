// SPDX-License-Identifier: Apache-2.0

//! Travel-time densities between gate pairs and their Bayesian update.
//!
//! Travel times over one gate pair are modelled as Normal(mu, sigma^2) with
//! an inverse-gamma prior on sigma^2. The conjugate posterior yields a
//! Student-t predictive, which is then approximated by a shifted inverse-gamma
//! density over the travel time: shape twice the posterior shape (same tail
//! decay), scale chosen to reproduce the predictive variance, and location
//! chosen so the mode sits on the running mean.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use statrs::function::gamma::{gamma_ur, ln_gamma};

use super::GateId;
use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real", default)]
pub struct TravelParams<T> {
    /// Support of the initial uniform density, seconds.
    pub dt_max: T,
    pub prior_shape: T,
    pub prior_scale: T,
    /// Samples needed before a pair leaves the uniform density.
    pub n_min: usize,
}

impl<T: Real> Default for TravelParams<T> {
    fn default() -> Self {
        Self { dt_max: T::lit(120.0), prior_shape: T::lit(3.0), prior_scale: T::lit(2.0), n_min: 5 }
    }
}

/// Inverse-gamma density `IG(shape, scale)` shifted by `location` and
/// truncated to `(0, upper]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InvGamma<T> {
    pub shape: T,
    pub scale: T,
    pub location: T,
    pub upper: T,
}

impl<T: Real> InvGamma<T> {
    /// Untruncated log density.
    pub fn ln_pdf(&self, x: T) -> f64 {
        let (a, b, z) = (self.shape.f64(), self.scale.f64(), (x - self.location).f64());
        if z <= 0.0 {
            return f64::NEG_INFINITY;
        }
        a * b.ln() - ln_gamma(a) - (a + 1.0) * z.ln() - b / z
    }

    /// Untruncated CDF.
    pub fn cdf(&self, x: T) -> f64 {
        let z = (x - self.location).f64();
        if z <= 0.0 {
            return 0.0;
        }
        gamma_ur(self.shape.f64(), self.scale.f64() / z)
    }

    pub fn mode(&self) -> T {
        self.location + self.scale / (self.shape + T::one())
    }

    /// Density renormalised over `(0, upper]`.
    pub fn pdf(&self, x: T) -> T {
        if x <= T::zero() || x > self.upper {
            return T::zero();
        }
        let mass = self.cdf(self.upper) - self.cdf(T::zero());
        if mass <= 0.0 {
            return T::zero();
        }
        T::lit(self.ln_pdf(x).exp() / mass)
    }

    /// Density divided by its largest value on `(0, upper]`.
    pub fn relative(&self, x: T) -> T {
        if x <= T::zero() || x > self.upper {
            return T::zero();
        }
        let peak = self.mode().min(self.upper);
        let peak = if peak > T::zero() { peak } else { self.upper.min(self.location + self.scale) };
        let r = (self.ln_pdf(x) - self.ln_pdf(peak)).exp();
        if r.is_finite() {
            T::lit(r.min(1.0))
        } else {
            T::zero()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum TravelDensity<T> {
    Uniform { max: T },
    InvGamma(InvGamma<T>),
}

impl<T: Real> TravelDensity<T> {
    pub fn pdf(&self, x: T) -> T {
        match self {
            Self::Uniform { max } => {
                if x > T::zero() && x <= *max {
                    T::one() / *max
                } else {
                    T::zero()
                }
            }
            Self::InvGamma(ig) => ig.pdf(x),
        }
    }

    /// Density scaled into `[0, 1]` by its mode value.
    pub fn relative(&self, x: T) -> T {
        match self {
            Self::Uniform { max } => {
                if x > T::zero() && x <= *max {
                    T::one()
                } else {
                    T::zero()
                }
            }
            Self::InvGamma(ig) => ig.relative(x),
        }
    }
}

/// Posterior state of one gate pair.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Real")]
pub struct PairState<T> {
    pub n: usize,
    pub mu_tt: T,
    /// Posterior inverse-gamma shape of the travel-time variance.
    pub a: T,
    /// Posterior inverse-gamma scale of the travel-time variance.
    pub b: T,
}

impl<T: Real> PairState<T> {
    fn prior(params: &TravelParams<T>) -> Self {
        Self { n: 0, mu_tt: T::zero(), a: params.prior_shape, b: params.prior_scale }
    }

    /// Variance of the Student-t posterior predictive.
    pub fn predictive_variance(&self) -> T {
        let n = T::of_usize(self.n.max(1));
        self.b * (T::one() + T::one() / n) / (self.a - T::one())
    }
}

/// Batch conjugate update: returns `(a, b, mean)` after observing `samples`.
pub fn conjugate_posterior<T: Real>(prior_shape: T, prior_scale: T, samples: &[T]) -> (T, T, T) {
    if samples.is_empty() {
        return (prior_shape, prior_scale, T::zero());
    }
    let n = T::of_usize(samples.len());
    let mean = samples.iter().copied().sum::<T>() / n;
    let ss: T = samples.iter().map(|&x| (x - mean) * (x - mean)).sum();
    let half = T::lit(0.5);
    (prior_shape + n * half, prior_scale + ss * half, mean)
}

#[derive(Clone, Debug, PartialEq)]
pub struct TravelTimeModel<T> {
    pub params: TravelParams<T>,
    pairs: BTreeMap<(GateId, GateId), PairState<T>>,
}

impl<T: Real> TravelTimeModel<T> {
    /// Every pair starts uniform over `(0, dt_max]`.
    pub fn uniform(params: TravelParams<T>) -> Self {
        Self { params, pairs: BTreeMap::new() }
    }

    pub fn from_pairs(
        params: TravelParams<T>,
        pairs: impl IntoIterator<Item = ((GateId, GateId), PairState<T>)>,
    ) -> Self {
        Self { params, pairs: pairs.into_iter().collect() }
    }

    pub fn pairs(&self) -> impl Iterator<Item = (&(GateId, GateId), &PairState<T>)> {
        self.pairs.iter()
    }

    pub fn state(&self, pair: (GateId, GateId)) -> Option<&PairState<T>> {
        self.pairs.get(&pair)
    }

    pub fn is_informed(&self, pair: (GateId, GateId)) -> bool {
        self.pairs.get(&pair).is_some_and(|s| s.n >= self.params.n_min)
    }

    pub fn density(&self, pair: Option<(GateId, GateId)>) -> TravelDensity<T> {
        let uniform = TravelDensity::Uniform { max: self.params.dt_max };
        let Some(state) = pair.and_then(|p| self.pairs.get(&p)) else {
            return uniform;
        };
        if state.n < self.params.n_min {
            return uniform;
        }
        let shape = T::lit(2.0) * state.a;
        let var = state.predictive_variance().max(T::lit(1e-12));
        let scale = (shape - T::one()) * (var * (shape - T::lit(2.0))).sqrt();
        TravelDensity::InvGamma(InvGamma {
            shape,
            scale,
            location: state.mu_tt - scale / (shape + T::one()),
            upper: self.params.dt_max,
        })
    }

    /// Temporal likelihood of a transition taking `dt` seconds, in `[0, 1]`.
    pub fn p3(&self, dt: T, pair: Option<(GateId, GateId)>) -> Result<T> {
        if !(dt > T::zero()) {
            return Err(Error::NonPositiveTravelTime(dt.f64()));
        }
        Ok(self.density(pair).relative(dt))
    }

    /// Sequential conjugate update of one pair with new travel times.
    pub fn update_temporal(&self, pair: (GateId, GateId), dts: &[T]) -> Self {
        let mut next = self.clone();
        if dts.is_empty() {
            return next;
        }
        let p = &self.params;
        let old = self.pairs.get(&pair).copied().unwrap_or_else(|| PairState::prior(p));
        let (n_old, m) = (T::of_usize(old.n), T::of_usize(dts.len()));
        let total = n_old + m;
        let mu = (n_old * old.mu_tt + dts.iter().copied().sum::<T>()) / total;
        let half = T::lit(0.5);
        let ss_old = (old.b - p.prior_scale) / half;
        let shift = old.mu_tt - mu;
        let ss = ss_old + n_old * shift * shift + dts.iter().map(|&x| (x - mu) * (x - mu)).sum::<T>();
        next.pairs.insert(
            pair,
            PairState {
                n: old.n + dts.len(),
                mu_tt: mu,
                a: p.prior_shape + total * half,
                b: p.prior_scale + ss * half,
            },
        );
        next
    }

    /// Groups `(from, to, dt)` samples by pair and updates each.
    pub fn update_all(&self, samples: &[(GateId, GateId, T)]) -> Self {
        let mut grouped: BTreeMap<(GateId, GateId), Vec<T>> = BTreeMap::new();
        for &(f, t, dt) in samples {
            grouped.entry((f, t)).or_default().push(dt);
        }
        grouped.into_iter().fold(self.clone(), |model, (pair, dts)| model.update_temporal(pair, &dts))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let n = n + n % 2;
        let h = (hi - lo) / n as f64;
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += f(lo + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        s * h / 3.0
    }

    #[test]
    fn uniform_density_is_flat() {
        let m = TravelTimeModel::<f64>::uniform(TravelParams::default());
        for dt in [0.1, 3.0, 60.0, 120.0] {
            assert_eq!(m.p3(dt, Some((0, 1))).unwrap(), 1.0);
        }
        assert_eq!(m.p3(120.5, Some((0, 1))).unwrap(), 0.0);
        assert!(m.p3(0.0, None).is_err());
        assert!(m.p3(-1.0, None).unwrap_err().to_string().contains("non-causal pair"));
    }

    #[test]
    fn inverse_gamma_relative_density_against_grid() {
        let ig: InvGamma<f64> = InvGamma { shape: 3.0, scale: 4.0, location: 0.0, upper: 120.0 };
        assert_eq!(ig.mode(), 1.0);
        assert!((ig.relative(1.0) - 1.0).abs() < 1e-15);
        // Grid oracle: direct evaluation of x^(-a-1) exp(-b/x), peak found numerically.
        let raw = |x: f64| x.powf(-4.0) * (-4.0 / x).exp();
        let peak = (1..200_000).map(|i| raw(i as f64 * 1e-5)).fold(0.0, f64::max);
        let expected = raw(2.0) / peak;
        assert!((ig.relative(2.0) - expected).abs() < 1e-9);
        assert!((ig.relative(2.0) - 0.461_816_006_183_165_7).abs() < 1e-12);
    }

    #[test]
    fn truncated_density_integrates_to_one() {
        let dens = [
            InvGamma { shape: 3.0, scale: 4.0, location: 0.0, upper: 120.0 },
            InvGamma { shape: 12.0, scale: 20.0, location: -0.5, upper: 120.0 },
            InvGamma { shape: 40.0, scale: 80.0, location: 1.0, upper: 30.0 },
        ];
        for ig in dens {
            let mass = simpson(|x| ig.pdf(x), 1e-9, ig.upper, 2_000_000);
            assert!((mass - 1.0).abs() < 1e-6, "{ig:?}: {mass}");
        }
        let mass = simpson(|x| TravelDensity::Uniform { max: 120.0 }.pdf(x), 1e-12, 120.0, 1000);
        assert!((mass - 1.0).abs() < 1e-6);
    }

    #[test]
    fn conjugate_arithmetic() {
        // Samples with mean 3 and squared deviations summing to 6.
        let samples = [3.0 - 3f64.sqrt(), 3.0 + 3f64.sqrt(), 3.0, 3.0];
        let (a, b, mu) = conjugate_posterior(3.0, 2.0, &samples);
        assert_eq!(a, 5.0);
        assert!((b - 5.0).abs() < 1e-12);
        assert!((mu - 3.0).abs() < 1e-12);
        assert!((b / (a - 1.0) - 1.25).abs() < 1e-12);
    }

    #[test]
    fn sequential_update_matches_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let normal = Normal::new(7.0, 0.8).unwrap();
        let xs: Vec<f64> = (0..30).map(|_| normal.sample(&mut rng)).collect();
        let model = TravelTimeModel::uniform(TravelParams::default());
        let seq = model
            .update_temporal((0, 1), &xs[..4])
            .update_temporal((0, 1), &xs[4..17])
            .update_temporal((0, 1), &xs[17..]);
        let (a, b, mu) = conjugate_posterior(3.0, 2.0, &xs);
        let s = seq.state((0, 1)).unwrap();
        assert_eq!(s.n, 30);
        assert!((s.a - a).abs() < 1e-12 && (s.b - b).abs() < 1e-9 && (s.mu_tt - mu).abs() < 1e-12);
    }

    #[test]
    fn stays_uniform_below_n_min() {
        let model: TravelTimeModel<f64> =
            TravelTimeModel::uniform(TravelParams::default()).update_temporal((0, 1), &[2.0, 2.1, 1.9, 2.2]);
        assert!(matches!(model.density(Some((0, 1))), TravelDensity::Uniform { .. }));
        let model = model.update_temporal((0, 1), &[2.0]);
        assert!(matches!(model.density(Some((0, 1))), TravelDensity::InvGamma(_)));
        assert!((model.p3(model.state((0, 1)).unwrap().mu_tt, Some((0, 1))).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn predictive_mode_recovers_mean() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let normal = Normal::new(10.0, 1.0).unwrap();
        let xs: Vec<f64> = (0..200).map(|_| normal.sample(&mut rng)).collect();
        let model = TravelTimeModel::uniform(TravelParams::default()).update_temporal((2, 3), &xs);
        let TravelDensity::InvGamma(ig) = model.density(Some((2, 3))) else { panic!("still uniform") };
        assert!((ig.mode() - 10.0).abs() < 0.2, "mode {}", ig.mode());
        // Variance of the fitted density equals the predictive variance.
        let var = ig.scale * ig.scale / ((ig.shape - 1.0).powi(2) * (ig.shape - 2.0));
        let want = model.state((2, 3)).unwrap().predictive_variance();
        assert!((var - want).abs() < 1e-9 * want);
    }

    proptest::proptest! {
        #[test]
        fn p3_is_a_unit_interval_value(dt in 0.001f64..200.0, mu in 0.5f64..60.0, sd in 0.05f64..10.0, n in 5usize..50) {
            let xs: Vec<f64> = (0..n).map(|i| mu + sd * ((i as f64 * 0.7).sin())).collect();
            let model = TravelTimeModel::uniform(TravelParams::default()).update_temporal((0, 0), &xs);
            let p = model.p3(dt, Some((0, 0))).unwrap();
            proptest::prop_assert!((0.0..=1.0).contains(&p));
        }
    }
}
