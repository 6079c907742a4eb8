//! The constants `A_n = ((2n+2)^{n/2} + 2 n^{n/2})^{2/n}` (conjectured sharp
//! bound for `lambda_2`) and `B_n = 2^{2/n} (2n+2)` (proved bound), and the
//! ratio `A_n / B_n`, which lies in `[2^{-2/n}, 1)` and tends to 1.
//!
//! Writing `q = (n / (2n+2))^{n/2}`, one has `A_n = (2n+2)(1 + 2q)^{2/n}`, so
//! `A_n / B_n = 2^{-2/n} (1 + 2q)^{2/n}`. Both margins are evaluated from this
//! form with `ln_1p` / `exp_m1`, which keeps them meaningful long after `q`
//! drops below machine epsilon.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// `A_n`, `B_n` and the ratio with both of its margins.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundPair {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub ratio: f64,
    /// `2^{-2/n}`.
    pub lower_bound: f64,
    /// `1 - A_n / B_n`.
    pub upper_margin: f64,
    /// `A_n / B_n - 2^{-2/n}`.
    pub lower_margin: f64,
}

impl BoundPair {
    /// Both inequalities `2^{-2/n} <= A_n / B_n < 1`.
    pub fn holds(&self) -> bool {
        self.upper_margin > 0.0 && self.lower_margin >= 0.0 && self.ratio < 1.0 && self.ratio >= self.lower_bound
    }
}

/// `n * ln(n / (2n+2)) / 2 = ln q`.
fn log_q(n: f64) -> f64 {
    // n / (2n+2) = (1 - 1/(n+1)) / 2
    0.5 * n * ((-1.0 / (n + 1.0)).ln_1p() - std::f64::consts::LN_2)
}

/// Closed-form constants for `n >= 2`.
pub fn bound_constants(n: usize) -> Result<BoundPair> {
    if n < 2 {
        return Err(Error::Domain(format!("bound constants need n >= 2, got {n}")));
    }
    let nf = n as f64;
    let e = 2.0 / nf;
    let top = 2.0 * nf + 2.0;
    let two_q = 2.0 * log_q(nf).exp();
    // (2/n) ln(1 + 2q)
    let lift = e * two_q.ln_1p();

    // Direct powers are exact for small even n (A_2 = 10, B_2 = 12); beyond
    // that the logarithmic form is used.
    let direct = top.powf(nf / 2.0) + 2.0 * nf.powf(nf / 2.0);
    let a = if n.is_multiple_of(2) && direct < 2f64.powi(53) {
        direct.powf(e)
    } else {
        top * lift.exp()
    };
    let b = e.exp2() * top;
    let lower_bound = (-e).exp2();
    let ratio = (lift - e * std::f64::consts::LN_2).exp();
    Ok(BoundPair {
        n,
        a,
        b,
        ratio,
        lower_bound,
        upper_margin: -(lift - e * std::f64::consts::LN_2).exp_m1(),
        lower_margin: lower_bound * lift.exp_m1(),
    })
}

/// One row per `n = 2..=n_max`; fails if an inequality is violated or the
/// ratio at `n_max` does not exceed `1 - 10 / n_max`.
pub fn ratio_table(n_max: usize) -> Result<Vec<BoundPair>> {
    if n_max < 2 {
        return Err(Error::Domain(format!("n_max must be >= 2, got {n_max}")));
    }
    let rows: Vec<BoundPair> = (2..=n_max).map(bound_constants).collect::<Result<_>>()?;
    if let Some(bad) = rows.iter().find(|r| !r.holds()) {
        return Err(Error::Numeric(format!(
            "ratio inequality fails at n = {}: ratio {}, lower bound {}",
            bad.n, bad.ratio, bad.lower_bound
        )));
    }
    let last = rows.last().expect("n_max >= 2");
    let witness = 1.0 - 10.0 / n_max as f64;
    if !(last.ratio > witness) {
        return Err(Error::Numeric(format!(
            "ratio {} at n = {n_max} does not exceed {witness}",
            last.ratio
        )));
    }
    Ok(rows)
}
