//! Chi-square goodness-of-fit checks of question-category and
//! topic-category distributions within correctly-predicted item subsets.

use serde::{Deserialize, Serialize};

use crate::error::{AuditError, Result};

/// Which metadata field a distribution check covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetadataField {
    Competency,
    TopicCategory,
}

impl MetadataField {
    pub fn label(&self) -> &'static str {
        match self {
            MetadataField::Competency => "competency",
            MetadataField::TopicCategory => "topic_category",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Uniform,
    Skewed,
}

/// Result of testing one subset's category counts against uniformity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryDistribution {
    pub label: String,
    pub field: MetadataField,
    pub categories: Vec<String>,
    pub observed: Vec<usize>,
    pub statistic: f64,
    pub df: usize,
    pub p_value: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    /// Set when any expected count is below 5, where the chi-square
    /// approximation is unreliable.
    pub low_count_warning: bool,
}

// --- Regularized incomplete gamma (series + continued fraction) -----------

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7.
    #[allow(clippy::excessive_precision)]
    const COEFFS: [f64; 9] = [
        0.99999999999980993,
        676.5203681218851,
        -1259.1392167224028,
        771.32342877765313,
        -176.61502916214059,
        12.507343278686905,
        -0.13857109526572012,
        9.9843695780195716e-6,
        1.5056327351493116e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        pi.ln() - (pi * x).sin().ln() - ln_gamma(1.0 - x)
    } else {
        let x = x - 1.0;
        let mut acc = COEFFS[0];
        for (i, &c) in COEFFS.iter().enumerate().skip(1) {
            acc += c / (x + i as f64);
        }
        let t = x + 7.5;
        0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
    }
}

fn gamma_p_series(a: f64, x: f64) -> f64 {
    let mut term = 1.0 / a;
    let mut sum = term;
    let mut n = a;
    for _ in 0..500 {
        n += 1.0;
        term *= x / n;
        sum += term;
        if term.abs() < sum.abs() * 1e-16 {
            break;
        }
    }
    sum * (-x + a * x.ln() - ln_gamma(a)).exp()
}

fn gamma_q_continued_fraction(a: f64, x: f64) -> f64 {
    // Lentz's algorithm for the continued-fraction form of Q(a, x).
    let tiny = 1e-300;
    let mut b = x + 1.0 - a;
    let mut c = 1.0 / tiny;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..500 {
        let an = -(i as f64) * (i as f64 - a);
        b += 2.0;
        d = an * d + b;
        if d.abs() < tiny {
            d = tiny;
        }
        c = b + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    (-x + a * x.ln() - ln_gamma(a)).exp() * h
}

/// Regularized upper incomplete gamma Q(a, x) = Γ(a, x) / Γ(a).
fn gamma_q(a: f64, x: f64) -> f64 {
    assert!(a > 0.0 && x >= 0.0);
    if x == 0.0 {
        1.0
    } else if x < a + 1.0 {
        (1.0 - gamma_p_series(a, x)).clamp(0.0, 1.0)
    } else {
        gamma_q_continued_fraction(a, x).clamp(0.0, 1.0)
    }
}

/// Survival function of the chi-square distribution with `df` degrees of
/// freedom: `P(X >= x)`.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    assert!(df >= 1);
    if x <= 0.0 {
        1.0
    } else {
        gamma_q(df as f64 / 2.0, x / 2.0)
    }
}

/// Pearson goodness-of-fit statistic against uniform expected counts.
pub fn chi_square_statistic_uniform(observed: &[usize]) -> f64 {
    let total: usize = observed.iter().sum();
    let expected = total as f64 / observed.len() as f64;
    observed
        .iter()
        .map(|&o| {
            let d = o as f64 - expected;
            d * d / expected
        })
        .sum()
}

/// Chi-square goodness-of-fit of `observed` counts against the uniform
/// distribution over `categories` (the categories present in the parent
/// cluster). `observed` is aligned with `categories` and may contain zeros.
pub fn metadata_distribution(
    label: &str,
    field: MetadataField,
    categories: &[String],
    observed: &[usize],
    threshold: f64,
) -> Result<CategoryDistribution> {
    if categories.len() != observed.len() {
        return Err(AuditError::Analysis(
            "categories and observed counts must align".into(),
        ));
    }
    if categories.len() < 2 {
        return Err(AuditError::Analysis(format!(
            "test undefined over {} category(ies) in the parent cluster",
            categories.len()
        )));
    }
    let total: usize = observed.iter().sum();
    if total == 0 {
        return Err(AuditError::Analysis("empty subset".into()));
    }
    let statistic = chi_square_statistic_uniform(observed);
    let df = categories.len() - 1;
    let p_value = chi_square_sf(statistic, df);
    let expected = total as f64 / categories.len() as f64;
    Ok(CategoryDistribution {
        label: label.to_string(),
        field,
        categories: categories.to_vec(),
        observed: observed.to_vec(),
        statistic,
        df,
        p_value,
        threshold,
        verdict: if p_value > threshold {
            Verdict::Uniform
        } else {
            Verdict::Skewed
        },
        low_count_warning: expected < 5.0,
    })
}
