//! Canonical variable names used by the regression models and the
//! synthetic generators.

pub const ARTHRITIS: &str = "arthritis";
pub const ASTHMA: &str = "asthma";
pub const DIABETES: &str = "diabetes";
pub const HEART_DISEASE: &str = "heart_disease";
pub const OBESITY: &str = "obesity";
pub const STROKE: &str = "stroke";

pub const POVERTY: &str = "poverty";
pub const UNEMPLOYMENT: &str = "unemployment";
pub const CRIME: &str = "crime";
pub const SMOKING: &str = "smoking";
pub const MALE: &str = "male_pct";
pub const AGE67: &str = "age67_pct";
pub const POPULATION: &str = "population";

pub const CONDITIONS: [&str; 6] = [ARTHRITIS, ASTHMA, DIABETES, HEART_DISEASE, OBESITY, STROKE];

pub const INDICATORS: [&str; 7] = [POVERTY, UNEMPLOYMENT, CRIME, SMOKING, MALE, AGE67, POPULATION];

/// Tract-level means and standard deviations from the Memphis study
/// (N = 178): arthritis .. stroke, affinity, then the indicators.
pub const MEMPHIS_MEAN_SD: [(&str, f64, f64); 14] = [
    (ARTHRITIS, 26.776, 5.780),
    (ASTHMA, 10.961, 1.776),
    (DIABETES, 15.642, 5.962),
    (HEART_DISEASE, 7.388, 2.558),
    (OBESITY, 38.544, 7.991),
    (STROKE, 4.878, 2.254),
    ("affinity", 2.960, 2.584),
    (CRIME, 47.970, 33.420),
    (POVERTY, 28.864, 16.624),
    (UNEMPLOYMENT, 15.729, 9.315),
    (SMOKING, 25.376, 7.194),
    (AGE67, 9.135, 4.959),
    (MALE, 48.073, 5.920),
    (POPULATION, 3634.107, 1718.732),
];

pub fn memphis_mean_sd(name: &str) -> Option<(f64, f64)> {
    MEMPHIS_MEAN_SD.iter().find(|(n, _, _)| *n == name).map(|&(_, m, s)| (m, s))
}
