//! Poissonian model of the wavelength-multiplexed pair source: per-channel
//! pair rates, singles, accidental coincidences, and the derived PGR and CAR.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qcore::random::{derive_seed, seeded_rng, SimRng};

pub const DEFAULT_SLOPE_MIN: f64 = 45.5;
pub const DEFAULT_SLOPE_MAX: f64 = 92.0;
pub const DEFAULT_CHANNEL_PAIRS: usize = 6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceParams {
    pub pump_power_mw: f64,
    /// Pair-rate slope per channel pair, MHz/mW.
    pub slopes_mhz_per_mw: Vec<f64>,
    pub rep_period_ns: f64,
    pub window_ns: f64,
    pub eta_signal: f64,
    pub eta_idler: f64,
    /// Histogram extends to this many repetition periods on each side.
    pub side_periods: usize,
}

/// Slopes evenly spaced across the reported range.
pub fn default_slopes() -> Vec<f64> {
    let n = DEFAULT_CHANNEL_PAIRS;
    (0..n)
        .map(|j| DEFAULT_SLOPE_MIN + (DEFAULT_SLOPE_MAX - DEFAULT_SLOPE_MIN) * j as f64 / (n - 1) as f64)
        .collect()
}

impl Default for SourceParams {
    fn default() -> Self {
        Self {
            pump_power_mw: 0.1,
            slopes_mhz_per_mw: default_slopes(),
            rep_period_ns: 10.0,
            window_ns: 1.0,
            eta_signal: 0.2,
            eta_idler: 0.2,
            side_periods: 1,
        }
    }
}

impl SourceParams {
    pub fn validate(&self) -> Result<()> {
        let nonneg = |name: &'static str, v: f64| {
            if v.is_finite() && v >= 0.0 {
                Ok(())
            } else {
                Err(Error::OutOfRange { name, value: v, min: 0.0, max: f64::INFINITY })
            }
        };
        nonneg("pump_power_mw", self.pump_power_mw)?;
        for &k in &self.slopes_mhz_per_mw {
            nonneg("slope_mhz_per_mw", k)?;
        }
        nonneg("rep_period_ns", self.rep_period_ns)?;
        nonneg("window_ns", self.window_ns)?;
        for (name, eta) in [("eta_signal", self.eta_signal), ("eta_idler", self.eta_idler)] {
            if !(0.0..=1.0).contains(&eta) {
                return Err(Error::OutOfRange { name, value: eta, min: 0.0, max: 1.0 });
            }
        }
        if self.window_ns <= 0.0 || self.window_ns >= self.rep_period_ns {
            return Err(Error::InvalidParameter(format!(
                "window {} ns must be positive and shorter than the repetition period {} ns",
                self.window_ns, self.rep_period_ns
            )));
        }
        if self.slopes_mhz_per_mw.is_empty() {
            return Err(Error::InvalidParameter("at least one channel pair slope is required".into()));
        }
        if self.side_periods == 0 {
            return Err(Error::InvalidParameter("side_periods must be at least 1".into()));
        }
        Ok(())
    }

    pub fn with_power(&self, pump_power_mw: f64) -> Self {
        Self { pump_power_mw, ..self.clone() }
    }

    fn slope(&self, channel_pair: usize) -> Result<f64> {
        self.slopes_mhz_per_mw.get(channel_pair).copied().ok_or(Error::OutOfRange {
            name: "channel_pair",
            value: channel_pair as f64,
            min: 0.0,
            max: self.slopes_mhz_per_mw.len() as f64 - 1.0,
        })
    }

    /// Generated pair rate in Hz.
    pub fn pair_rate_hz(&self, channel_pair: usize) -> Result<f64> {
        Ok(self.slope(channel_pair)? * 1e6 * self.pump_power_mw)
    }

    /// Expected CAR, `1/(R τ)`; detection efficiencies cancel.
    pub fn expected_car(&self, channel_pair: usize) -> Result<f64> {
        let rate = self.pair_rate_hz(channel_pair)?;
        if rate == 0.0 {
            return Err(Error::UndefinedCar);
        }
        Ok(1.0 / (rate * self.window_ns * 1e-9))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistogramBin {
    pub delay_ns: f64,
    pub counts: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountRecord {
    pub channel_pair: usize,
    pub pump_power_mw: f64,
    pub duration_s: f64,
    /// Signal singles rate, counts/s.
    pub n_s: f64,
    /// Idler singles rate, counts/s.
    pub n_i: f64,
    /// Accidental-subtracted coincidence rate, counts/s.
    pub n_c: f64,
    pub rep_period_ns: f64,
    /// Coincidences in window-wide bins.
    pub histogram: Vec<HistogramBin>,
    pub seed: u64,
}

impl CountRecord {
    fn bin_at(&self, delay_ns: f64) -> Option<u64> {
        self.histogram.iter().find(|b| (b.delay_ns - delay_ns).abs() < 1e-9).map(|b| b.counts)
    }

    pub fn c_max(&self) -> Option<u64> {
        self.bin_at(0.0)
    }

    /// Mean of the side peaks at `±rep_period`.
    pub fn c_acc(&self) -> Option<f64> {
        let l = self.bin_at(-self.rep_period_ns)?;
        let r = self.bin_at(self.rep_period_ns)?;
        Some((l + r) as f64 / 2.0)
    }
}

/// Klyshko pair-generation rate `N_s N_i / N_c`, in Hz.
pub fn pgr(record: &CountRecord) -> Result<f64> {
    pgr_from_rates(record.n_s, record.n_i, record.n_c)
}

pub fn pgr_from_rates(n_s: f64, n_i: f64, n_c: f64) -> Result<f64> {
    if n_c <= 0.0 {
        return Err(Error::ZeroCoincidences);
    }
    Ok(n_s * n_i / n_c)
}

/// `(C_max - C_acc) / C_acc` from the zero-delay and side peaks.
pub fn car(record: &CountRecord) -> Result<f64> {
    let c_max = record
        .c_max()
        .ok_or_else(|| Error::InvalidParameter("histogram lacks the zero-delay bin".into()))?;
    let c_acc = record
        .c_acc()
        .ok_or_else(|| Error::InvalidParameter("histogram lacks the side-peak bins".into()))?;
    car_from_peaks(c_max as f64, c_acc)
}

pub fn car_from_peaks(c_max: f64, c_acc: f64) -> Result<f64> {
    if c_acc <= 0.0 {
        return Err(Error::UndefinedCar);
    }
    Ok((c_max - c_acc) / c_acc)
}

fn poisson(rng: &mut SimRng, mean: f64) -> u64 {
    if mean <= 0.0 {
        0
    } else {
        Poisson::new(mean).expect("finite mean").sample(rng) as u64
    }
}

/// Samples singles and a coincidence histogram for one channel pair.
///
/// Pairs split into both-detected, signal-only and idler-only Poisson
/// draws. Each histogram peak carries accidentals with mean
/// `N_s N_i τ T`; the zero-delay peak adds the true coincidences.
pub fn simulate_counts(params: &SourceParams, channel_pair: usize, duration_s: f64, seed: u64) -> Result<CountRecord> {
    params.validate()?;
    if !(duration_s > 0.0 && duration_s.is_finite()) {
        return Err(Error::OutOfRange { name: "duration_s", value: duration_s, min: 0.0, max: f64::INFINITY });
    }
    let mu = params.pair_rate_hz(channel_pair)? * duration_s;
    let (es, ei) = (params.eta_signal, params.eta_idler);
    let mut rng = seeded_rng(seed);
    let both = poisson(&mut rng, es * ei * mu);
    let s_only = poisson(&mut rng, es * (1.0 - ei) * mu);
    let i_only = poisson(&mut rng, (1.0 - es) * ei * mu);
    let n_s = (both + s_only) as f64 / duration_s;
    let n_i = (both + i_only) as f64 / duration_s;
    let acc_mean = n_s * n_i * params.window_ns * 1e-9 * duration_s;

    let mut hist_rng = seeded_rng(derive_seed(seed, 1));
    let reach = params.side_periods as i64;
    let histogram: Vec<HistogramBin> = (-reach..=reach)
        .map(|k| {
            let acc = poisson(&mut hist_rng, acc_mean);
            HistogramBin { delay_ns: k as f64 * params.rep_period_ns, counts: acc + if k == 0 { both } else { 0 } }
        })
        .collect();

    let mut record = CountRecord {
        channel_pair,
        pump_power_mw: params.pump_power_mw,
        duration_s,
        n_s,
        n_i,
        n_c: 0.0,
        rep_period_ns: params.rep_period_ns,
        histogram,
        seed,
    };
    let c_max = record.c_max().unwrap_or(0) as f64;
    let c_acc = record.c_acc().unwrap_or(0.0);
    record.n_c = ((c_max - c_acc) / duration_s).clamp(0.0, n_s.min(n_i));
    Ok(record)
}

/// Records at each pump power, seeded per point.
pub fn power_sweep(
    params: &SourceParams,
    channel_pair: usize,
    powers_mw: &[f64],
    duration_s: f64,
    seed: u64,
) -> Result<Vec<CountRecord>> {
    powers_mw
        .iter()
        .enumerate()
        .map(|(k, &p)| simulate_counts(&params.with_power(p), channel_pair, duration_s, derive_seed(seed, k as u64)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_examples() {
        assert_eq!(pgr_from_rates(1e5, 1e5, 1e3).unwrap(), 1e7);
        assert_eq!(pgr_from_rates(1e5, 1e5, 0.0), Err(Error::ZeroCoincidences));
        assert_eq!(car_from_peaks(210.0, 10.0).unwrap(), 20.0);
        assert_eq!(car_from_peaks(210.0, 0.0), Err(Error::UndefinedCar));
    }

    #[test]
    fn default_slopes_span_range() {
        let s = default_slopes();
        assert_eq!(s.len(), 6);
        assert_eq!(s[0], 45.5);
        assert!((s[5] - 92.0).abs() < 1e-12);
    }

    #[test]
    fn zero_power_gives_nothing() {
        let rec = simulate_counts(&SourceParams::default().with_power(0.0), 0, 1.0, 1).unwrap();
        assert_eq!((rec.n_s, rec.n_i, rec.n_c), (0.0, 0.0, 0.0));
        assert!(rec.histogram.iter().all(|b| b.counts == 0));
        assert!(pgr(&rec).is_err());
        assert!(car(&rec).is_err());
    }

    #[test]
    fn pgr_tracks_slope() {
        let p = SourceParams::default().with_power(1.0);
        let rec = simulate_counts(&p, 0, 1.0, 7).unwrap();
        let rate = pgr(&rec).unwrap();
        assert!((rate / 45.5e6 - 1.0).abs() < 0.05, "{rate}");
    }

    #[test]
    fn side_peaks_at_rep_period() {
        let p = SourceParams { side_periods: 2, ..SourceParams::default() };
        let rec = simulate_counts(&p, 3, 0.5, 2).unwrap();
        let delays: Vec<f64> = rec.histogram.iter().map(|b| b.delay_ns).collect();
        assert_eq!(delays, vec![-20.0, -10.0, 0.0, 10.0, 20.0]);
        for w in delays.windows(2) {
            assert_eq!(w[1] - w[0], p.rep_period_ns);
        }
    }

    #[test]
    fn deterministic() {
        let p = SourceParams::default();
        assert_eq!(simulate_counts(&p, 2, 1.0, 5).unwrap(), simulate_counts(&p, 2, 1.0, 5).unwrap());
        assert_ne!(simulate_counts(&p, 2, 1.0, 5).unwrap(), simulate_counts(&p, 2, 1.0, 6).unwrap());
    }

    #[test]
    fn car_above_twenty_at_low_power() {
        let p = SourceParams::default();
        for j in 0..6 {
            let rec = simulate_counts(&p, j, 1.0, 100 + j as u64).unwrap();
            assert!(car(&rec).unwrap() > 20.0);
            assert!(rec.n_c <= rec.n_s.min(rec.n_i));
        }
    }

    #[test]
    fn invalid_params() {
        let p = SourceParams { window_ns: 10.0, ..SourceParams::default() };
        assert!(p.validate().is_err());
        let p = SourceParams { eta_idler: 1.5, ..SourceParams::default() };
        assert!(p.validate().is_err());
        assert!(simulate_counts(&SourceParams::default(), 6, 1.0, 1).is_err());
    }
}
