//! Exponentially scaled modified Bessel function of order zero.

/// Switch-over point between the power series and the asymptotic expansion.
const SERIES_LIMIT: f64 = 30.0;

/// `ln(I0(x) · e^{-x})` for `x >= 0`.
///
/// Small arguments use the ascending series of `I0`; large arguments use
/// the asymptotic expansion `e^x / sqrt(2πx) · Σ ((2k-1)!!)² / (k! (8x)^k)`,
/// truncated at its smallest term.
pub fn ln_i0e(x: f64) -> f64 {
    let x = x.abs();
    if x < SERIES_LIMIT {
        series(x)
    } else {
        asymptotic(x)
    }
}

fn series(x: f64) -> f64 {
    let q = 0.25 * x * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= q / (k * k);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    sum.ln() - x
}

fn asymptotic(x: f64) -> f64 {
    let mut term = 1.0;
    let mut sum = 1.0;
    for k in 1..60 {
        let kf = k as f64;
        let next = term * (2.0 * kf - 1.0).powi(2) / (kf * 8.0 * x);
        if next >= term {
            break;
        }
        term = next;
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
    }
    sum.ln() - 0.5 * (2.0 * std::f64::consts::PI * x).ln()
}

/// `I0(x) · e^{-|x|}`.
pub fn i0e(x: f64) -> f64 {
    ln_i0e(x).exp()
}
