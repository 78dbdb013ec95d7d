//! Seeded generators: ARMA-type simulations for tests and a synthetic
//! pet-population dataset standing in for the real indicator tables.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::preprocess::{Column, FeatureTable, Role, Schema, TimeSeries};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn white_noise<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

/// ARMA(p, q) with unit-variance Gaussian shocks and `burn` discarded warm-up steps.
pub fn arma<R: Rng>(rng: &mut R, phi: &[f64], theta: &[f64], n: usize, burn: usize) -> Vec<f64> {
    let total = n + burn;
    let eps = white_noise(rng, total);
    let mut y = vec![0.0; total];
    for t in 0..total {
        let mut v = eps[t];
        for (i, p) in phi.iter().enumerate() {
            if t > i {
                v += p * y[t - i - 1];
            }
        }
        for (j, th) in theta.iter().enumerate() {
            if t > j {
                v += th * eps[t - j - 1];
            }
        }
        y[t] = v;
    }
    y.split_off(burn)
}

/// Cumulative sum starting from `start`; `n` shocks give `n` levels.
pub fn integrate(xs: &[f64], start: f64) -> Vec<f64> {
    xs.iter()
        .scan(start, |acc, x| {
            *acc += x;
            Some(*acc)
        })
        .collect()
}

pub fn random_walk<R: Rng>(rng: &mut R, n: usize) -> Vec<f64> {
    integrate(&white_noise(rng, n), 0.0)
}

pub const PET_INDICATORS: [&str; 9] = [
    "urban_income",
    "urban_consumption",
    "urbanization_rate",
    "pop_65_plus",
    "ratio_65_plus",
    "single_pop_15_plus",
    "single_ratio_15_plus",
    "pet_policies",
    "new_vet_drugs",
];

pub const PET_TARGETS: [&str; 2] = ["cats", "dogs"];

pub fn pet_schema() -> Schema {
    Schema {
        indicators: PET_INDICATORS.iter().map(|s| s.to_string()).collect(),
        targets: PET_TARGETS.iter().map(|s| s.to_string()).collect(),
    }
}

/// Synthetic annual indicator table with two pet-population targets.
///
/// Indicators follow smooth growth curves with small noise (policy and
/// drug-approval counts are rounded to integers). Targets (in 10,000s) are a
/// linear trend plus a period-2 alternation plus a saturating `tanh` response
/// to income; dogs also carry a linear drag from population ageing.
pub fn pet_dataset(seed: u64, start_year: i64, n_years: usize) -> FeatureTable {
    let mut rng = rng(seed);
    let mut noise = move || -> f64 { StandardNormal.sample(&mut rng) };
    let n = n_years;
    let ts: Vec<f64> = (0..n).map(|t| t as f64).collect();

    let income: Vec<f64> = ts
        .iter()
        .map(|&t| 10_500.0 * (0.085 * t).exp() * (1.0 + 0.008 * noise()))
        .collect();
    let consumption: Vec<f64> = income
        .iter()
        .enumerate()
        .map(|(i, &v)| 0.62 * v + 900.0 + 5.0 * i as f64 * noise().abs() + 60.0 * noise())
        .collect();
    let urbanization: Vec<f64> = ts
        .iter()
        .map(|&t| 43.0 + 1.35 * t - 0.012 * t * t + 0.15 * noise())
        .collect();
    let pop65: Vec<f64> = ts
        .iter()
        .map(|&t| 10_000.0 + 520.0 * t + 9.0 * t * t + 40.0 * noise())
        .collect();
    let ratio65: Vec<f64> = ts.iter().map(|&t| 7.7 + 0.36 * t + 0.05 * noise()).collect();
    let single_pop: Vec<f64> = ts
        .iter()
        .map(|&t| 16_000.0 + 420.0 * t + 120.0 * noise())
        .collect();
    let single_ratio: Vec<f64> = ts.iter().map(|&t| 15.0 + 0.33 * t + 0.1 * noise()).collect();
    let policies: Vec<f64> = ts
        .iter()
        .map(|&t| (2.0 + 0.55 * t + 1.6 * (0.9 * t).sin() + 0.6 * noise()).round().max(0.0))
        .collect();
    let vet_drugs: Vec<f64> = ts
        .iter()
        .map(|&t| (42.0 + 2.4 * t + 9.0 * (0.55 * t).sin() + 2.5 * noise()).round().max(0.0))
        .collect();

    let z = |xs: &[f64]| -> Vec<f64> {
        let m = crate::mean(xs);
        let s = crate::pop_variance(xs).sqrt().max(f64::MIN_POSITIVE);
        xs.iter().map(|x| (x - m) / s).collect()
    };
    let inc_z = z(&income);
    let age_z = z(&ratio65);

    let cats: Vec<f64> = (0..n)
        .map(|i| {
            let season = if i % 2 == 0 { 140.0 } else { -140.0 };
            3_000.0 + 60.0 * ts[i] + 1_400.0 * (1.2 * inc_z[i]).tanh() + season + 30.0 * noise()
        })
        .collect();
    let dogs: Vec<f64> = (0..n)
        .map(|i| {
            let season = if i % 2 == 0 { -110.0 } else { 110.0 };
            4_300.0 + 45.0 * ts[i] + 900.0 * inc_z[i].tanh() - 60.0 * age_z[i] + season + 40.0 * noise()
        })
        .collect();

    let years: Vec<i64> = (0..n as i64).map(|t| start_year + t).collect();
    let mut columns = Vec::new();
    let series = [
        income,
        consumption,
        urbanization,
        pop65,
        ratio65,
        single_pop,
        single_ratio,
        policies,
        vet_drugs,
    ];
    for (name, vals) in PET_INDICATORS.iter().zip(series) {
        columns.push(Column {
            name: name.to_string(),
            role: Role::Indicator,
            series: TimeSeries::new(years.clone(), vals).expect("finite synthetic values"),
        });
    }
    for (name, vals) in PET_TARGETS.iter().zip([cats, dogs]) {
        columns.push(Column {
            name: name.to_string(),
            role: Role::Target,
            series: TimeSeries::new(years.clone(), vals).expect("finite synthetic values"),
        });
    }
    FeatureTable::new(years, columns).expect("aligned synthetic columns")
}
