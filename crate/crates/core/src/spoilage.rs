//! Crop damage model: abiotic regime classification, cumulative spoilage
//! accrual, mold growth with UV-C inactivation, and market-value loss.
//!
//! The regime thresholds follow the published storage damage matrix
//! (weight loss above 32 degC in dry air, sprouting at 0-2 degC in humid air,
//! rotting when hot and humid); the per-day rates are calibration parameters
//! anchored by the scenario harness.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Mold level implanted whenever humidity crosses the growth threshold;
/// spores are assumed ubiquitous.
pub const MOLD_SEED: f64 = 0.001;

/// Mold index above which black mold is visible enough to depress price.
pub const DEFAULT_MOLD_VISIBLE_THRESHOLD: f64 = 0.1;

/// Market-value penalty for visible black mold, percent of the unspoiled
/// fraction (midpoint of the reported 25-30% range).
pub const BLACK_MOLD_PENALTY_PCT: f64 = 27.5;

#[derive(Debug, Error)]
pub enum SpoilageError {
    #[error("non-finite input: {0}")]
    NonFinite(&'static str),
    #[error("dt must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("D90 dose must be > 0, got {0}")]
    BadD90(f64),
    #[error("UV-C intensity must be >= 0, got {0}")]
    NegativeIntensity(f64),
    #[error("invalid spoilage rates: {0}")]
    BadRates(String),
}

/// Storage damage regime for one (temperature, humidity) pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Regime {
    Safe,
    WeightLoss,
    Sprouting,
    Rotting,
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let s = match self {
            Regime::Safe => "Safe",
            Regime::WeightLoss => "WeightLoss",
            Regime::Sprouting => "Sprouting",
            Regime::Rotting => "Rotting",
        };
        f.write_str(s)
    }
}

/// Cumulative crop damage. All fields only ever grow, except `mold_index`,
/// which UV-C exposure may knock back.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SpoilageLedger {
    /// Percent of initial mass lost to desiccation, in [0, 100].
    pub weight_loss_pct: f64,
    /// Percent of bulbs rotted, in [0, 100].
    pub rot_pct: f64,
    /// Percent of bulbs sprouted, in [0, 100].
    pub sprout_pct: f64,
    /// Mold colonization, 0 = none, 1 = fully colonized.
    pub mold_index: f64,
}

impl SpoilageLedger {
    /// Categories accrue independently; overlap is ignored and the sum capped.
    pub fn total_spoilage_pct(&self) -> f64 {
        (self.weight_loss_pct + self.rot_pct + self.sprout_pct).min(100.0)
    }
}

/// A pathogen population tracked relative to its inoculum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathogenPopulation {
    /// Population relative to inoculum, >= 0.
    pub rel_cfu: f64,
    /// UV-C fluence for one decade of inactivation, J/m^2.
    pub d90_dose_j_m2: f64,
}

impl PathogenPopulation {
    pub fn new(d90_dose_j_m2: f64) -> Result<Self, SpoilageError> {
        if !(d90_dose_j_m2 > 0.0) {
            return Err(SpoilageError::BadD90(d90_dose_j_m2));
        }
        Ok(Self {
            rel_cfu: 1.0,
            d90_dose_j_m2,
        })
    }

    /// Apply a UV-C exposure interval to the population.
    pub fn irradiate(&mut self, intensity_w_m2: f64, dt_s: f64) -> Result<(), SpoilageError> {
        self.rel_cfu *= uvc_survival(intensity_w_m2, dt_s, self.d90_dose_j_m2)?;
        Ok(())
    }
}

/// Per-regime accrual rates plus the mold dynamics constants.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpoilageRates {
    /// %/day while the WeightLoss regime is active.
    pub weight_loss_pct_per_day: f64,
    /// %/day while the Sprouting regime is active.
    pub sprout_pct_per_day: f64,
    /// %/day while the Rotting regime is active.
    pub rot_pct_per_day: f64,
    /// Extra rot %/day per unit mold index, active in any regime.
    pub rot_pathogen_coupling: f64,
    /// Logistic mold growth rate, per day.
    pub mold_growth_rate_per_day: f64,
    /// Humidity above which mold grows, %RH.
    pub mold_rh_threshold_pct: f64,
}

impl Default for SpoilageRates {
    fn default() -> Self {
        Self {
            weight_loss_pct_per_day: 0.5,
            sprout_pct_per_day: 0.4,
            // Anchored by the harness calibration on the monsoon baseline.
            rot_pct_per_day: 0.19,
            rot_pathogen_coupling: 0.31,
            mold_growth_rate_per_day: 1.0,
            mold_rh_threshold_pct: 75.0,
        }
    }
}

impl SpoilageRates {
    pub fn validate(&self) -> Result<(), SpoilageError> {
        let fields = [
            ("weight_loss_pct_per_day", self.weight_loss_pct_per_day),
            ("sprout_pct_per_day", self.sprout_pct_per_day),
            ("rot_pct_per_day", self.rot_pct_per_day),
            ("rot_pathogen_coupling", self.rot_pathogen_coupling),
            ("mold_growth_rate_per_day", self.mold_growth_rate_per_day),
            ("mold_rh_threshold_pct", self.mold_rh_threshold_pct),
        ];
        for (name, v) in fields {
            if !v.is_finite() || v < 0.0 {
                return Err(SpoilageError::BadRates(format!(
                    "{name} must be finite and >= 0, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// Classify a (temperature, humidity) pair into its damage regime.
///
/// WeightLoss: temp > 32 and rh < 60. Sprouting: temp in [0, 2] and rh > 70.
/// Rotting: temp > 32 and rh > 70. Everything else is Safe.
pub fn classify_regime(temp_c: f64, rh_pct: f64) -> Result<Regime, SpoilageError> {
    if !(temp_c.is_finite() && rh_pct.is_finite()) {
        return Err(SpoilageError::NonFinite("classify_regime input"));
    }
    let regime = if temp_c > 32.0 && rh_pct > 70.0 {
        Regime::Rotting
    } else if temp_c > 32.0 && rh_pct < 60.0 {
        Regime::WeightLoss
    } else if (0.0..=2.0).contains(&temp_c) && rh_pct > 70.0 {
        Regime::Sprouting
    } else {
        Regime::Safe
    };
    Ok(regime)
}

/// Surviving fraction of a pathogen population after one exposure interval.
///
/// Log-linear dose response: `10^(-fluence / D90)` with fluence =
/// intensity * dt. Exactly 0.1 at one D90 of fluence.
pub fn uvc_survival(
    intensity_w_m2: f64,
    dt_s: f64,
    d90_dose_j_m2: f64,
) -> Result<f64, SpoilageError> {
    if !(intensity_w_m2.is_finite() && dt_s.is_finite()) {
        return Err(SpoilageError::NonFinite("uvc_survival input"));
    }
    if intensity_w_m2 < 0.0 {
        return Err(SpoilageError::NegativeIntensity(intensity_w_m2));
    }
    if !(d90_dose_j_m2 > 0.0) {
        return Err(SpoilageError::BadD90(d90_dose_j_m2));
    }
    let fluence = intensity_w_m2 * dt_s;
    Ok(10f64.powf(-fluence / d90_dose_j_m2))
}

/// Advance the mold index by one step.
///
/// Above the humidity threshold the index is seeded to at least [`MOLD_SEED`]
/// and grows logistically; the UV-C survival factor then scales it down.
/// Mold never decreases through any other path.
pub fn step_mold(
    ledger: &SpoilageLedger,
    rh_pct: f64,
    uvc_survival_factor: f64,
    rates: &SpoilageRates,
    dt_s: f64,
) -> Result<f64, SpoilageError> {
    if !(rh_pct.is_finite() && uvc_survival_factor.is_finite()) {
        return Err(SpoilageError::NonFinite("step_mold input"));
    }
    if dt_s <= 0.0 {
        return Err(SpoilageError::NonPositiveDt(dt_s));
    }
    rates.validate()?;
    let dt_days = dt_s / 86_400.0;
    let mut m = ledger.mold_index;
    if rh_pct >= rates.mold_rh_threshold_pct {
        m = m.max(MOLD_SEED);
        m += rates.mold_growth_rate_per_day * m * (1.0 - m) * dt_days;
    }
    m *= uvc_survival_factor.clamp(0.0, 1.0);
    Ok(m.clamp(0.0, 1.0))
}

/// Accrue regime damage plus pathogen-driven rot for one step.
pub fn step_spoilage(
    ledger: &SpoilageLedger,
    temp_c: f64,
    rh_pct: f64,
    rates: &SpoilageRates,
    dt_s: f64,
) -> Result<SpoilageLedger, SpoilageError> {
    if dt_s <= 0.0 {
        return Err(SpoilageError::NonPositiveDt(dt_s));
    }
    rates.validate()?;
    let regime = classify_regime(temp_c, rh_pct)?;
    let dt_days = dt_s / 86_400.0;
    let mut next = *ledger;
    match regime {
        Regime::WeightLoss => next.weight_loss_pct += rates.weight_loss_pct_per_day * dt_days,
        Regime::Sprouting => next.sprout_pct += rates.sprout_pct_per_day * dt_days,
        Regime::Rotting => next.rot_pct += rates.rot_pct_per_day * dt_days,
        Regime::Safe => {}
    }
    // Pathogen-driven rot advances in any regime.
    next.rot_pct += rates.rot_pathogen_coupling * ledger.mold_index * dt_days;
    next.weight_loss_pct = next.weight_loss_pct.min(100.0);
    next.sprout_pct = next.sprout_pct.min(100.0);
    next.rot_pct = next.rot_pct.min(100.0);
    Ok(next)
}

/// Market-value loss: total spoilage plus the black-mold penalty on the
/// unspoiled remainder once mold is visible. Capped at 100%.
pub fn market_value_loss_pct(ledger: &SpoilageLedger) -> f64 {
    market_value_loss_pct_with(ledger, DEFAULT_MOLD_VISIBLE_THRESHOLD)
}

/// [`market_value_loss_pct`] with an explicit visibility threshold.
pub fn market_value_loss_pct_with(ledger: &SpoilageLedger, mold_visible_threshold: f64) -> f64 {
    let total = ledger.total_spoilage_pct();
    let mut loss = total;
    if ledger.mold_index > mold_visible_threshold {
        loss += BLACK_MOLD_PENALTY_PCT / 100.0 * (100.0 - total);
    }
    loss.min(100.0)
}

/// Spoilage-gas source term, ppm per second, proportional to the
/// instantaneous rot accrual rate and the stored mass.
pub fn gas_emission_rate(
    rot_rate_pct_per_s: f64,
    onion_mass_kg: f64,
    emission_coeff_ppm_per_pct_kg: f64,
) -> f64 {
    let rate = rot_rate_pct_per_s.max(0.0)
        * onion_mass_kg.max(0.0)
        * emission_coeff_ppm_per_pct_kg.max(0.0);
    rate.max(0.0)
}
