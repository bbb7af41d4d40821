use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Minimum number of check-ins for a venue to receive a busiest hour.
pub const MIN_TEMPORAL_CHECKINS: u32 = 6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TimeSeries24 {
    pub counts: [u32; 24],
}

impl TimeSeries24 {
    pub fn from_hours<I: IntoIterator<Item = u32>>(hours: I) -> Self {
        let mut counts = [0u32; 24];
        for h in hours {
            counts[(h % 24) as usize] += 1;
        }
        TimeSeries24 { counts }
    }

    pub fn total(&self) -> u32 {
        self.counts.iter().sum()
    }

    pub fn smoothed(&self, kernel: &GaussianKernel) -> [f64; 24] {
        kernel.smooth(&self.counts)
    }
}

/// Circular Gaussian kernel over the hours of a day, normalized to sum 1.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianKernel {
    pub sigma_hours: f64,
    pub half_width: u32,
}

impl Default for GaussianKernel {
    fn default() -> Self {
        GaussianKernel {
            sigma_hours: 1.0,
            half_width: 3,
        }
    }
}

impl GaussianKernel {
    pub fn weights(&self) -> Vec<f64> {
        let hw = self.half_width as i32;
        let raw: Vec<f64> = (-hw..=hw)
            .map(|k| (-(k * k) as f64 / (2.0 * self.sigma_hours * self.sigma_hours)).exp())
            .collect();
        let z: f64 = raw.iter().sum();
        raw.into_iter().map(|w| w / z).collect()
    }

    pub fn smooth(&self, counts: &[u32; 24]) -> [f64; 24] {
        let w = self.weights();
        let hw = self.half_width as i64;
        let mut out = [0.0; 24];
        for (h, slot) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for (j, wk) in w.iter().enumerate() {
                let src = (h as i64 + j as i64 - hw).rem_euclid(24) as usize;
                acc += wk * counts[src] as f64;
            }
            *slot = acc;
        }
        out
    }
}

/// Hour of the smoothed maximum; ties go to the earliest hour.
pub fn busiest_hour(ts: &TimeSeries24, kernel: &GaussianKernel) -> Result<u8> {
    let total = ts.total();
    if total < MIN_TEMPORAL_CHECKINS {
        return Err(Error::BelowThreshold(total));
    }
    let s = ts.smoothed(kernel);
    let mut best = 0;
    for h in 1..24 {
        if s[h] > s[best] {
            best = h;
        }
    }
    Ok(best as u8)
}

/// Named half-open hour range `[start, end)`, wrapping past midnight when
/// `end <= start`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TemporalPeriod {
    pub name: String,
    pub start: u8,
    pub end: u8,
}

impl TemporalPeriod {
    pub fn new(name: &str, start: u8, end: u8) -> Self {
        TemporalPeriod {
            name: name.to_string(),
            start,
            end,
        }
    }

    pub fn contains(&self, hour: u8) -> bool {
        if self.start < self.end {
            hour >= self.start && hour < self.end
        } else {
            hour >= self.start || hour < self.end
        }
    }
}

/// Period table plus the subset of periods that become catalog features.
///
/// The JSON form is the `periods.json` override file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodTable {
    pub periods: Vec<TemporalPeriod>,
    /// Period names left out of the feature catalog.
    #[serde(default)]
    pub exclude_from_features: Vec<String>,
}

impl Default for PeriodTable {
    fn default() -> Self {
        let p = TemporalPeriod::new;
        PeriodTable {
            periods: vec![
                p("Daytime", 6, 18),
                p("Morning", 6, 11),
                p("Breakfast", 7, 10),
                p("Midday", 10, 14),
                p("Lunch", 11, 13),
                p("Afternoon", 13, 17),
                p("Nighttime", 18, 6),
                p("Dinner", 18, 21),
                p("Late evening", 20, 2),
                p("Midnight", 22, 2),
                p("Early morning", 2, 6),
            ],
            exclude_from_features: vec!["Daytime".to_string()],
        }
    }
}

impl PeriodTable {
    pub fn validate(&self) -> Result<()> {
        for p in &self.periods {
            if p.start > 23 || p.end > 24 || p.start == p.end {
                return Err(Error::Config(format!(
                    "period `{}` has an invalid range {}-{}",
                    p.name, p.start, p.end
                )));
            }
        }
        for name in &self.exclude_from_features {
            if !self.periods.iter().any(|p| &p.name == name) {
                return Err(Error::Config(format!("excluded period `{name}` is not defined")));
            }
        }
        Ok(())
    }

    /// Every period whose range contains `hour`.
    pub fn periods_of(&self, hour: u8) -> Vec<&TemporalPeriod> {
        self.periods.iter().filter(|p| p.contains(hour)).collect()
    }

    /// Indices into `periods` that are catalog features.
    pub fn feature_periods(&self) -> Vec<usize> {
        self.periods
            .iter()
            .enumerate()
            .filter(|(_, p)| !self.exclude_from_features.contains(&p.name))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Periods of the default table containing `hour`.
pub fn periods_of(hour: u8) -> Vec<String> {
    PeriodTable::default()
        .periods_of(hour)
        .into_iter()
        .map(|p| p.name.clone())
        .collect()
}
