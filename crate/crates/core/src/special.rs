//! Digamma and trigamma in double precision.
//!
//! Both use the upward recurrence to push the argument to >= 8 and then the
//! Abramowitz & Stegun asymptotic series (6.3.18 and 6.4.11). Absolute error
//! is below 1e-13 for positive arguments.

const ASYMPTOTIC_CUTOFF: f64 = 14.0;

/// psi(x) = d/dx ln Gamma(x), for x > 0.
pub fn digamma(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    // psi(x) = psi(x+1) - 1/x
    while x < ASYMPTOTIC_CUTOFF {
        acc -= 1.0 / x;
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    // B_{2k}/(2k x^{2k}) terms
    let series = inv2
        * (1.0 / 12.0
            - inv2
                * (1.0 / 120.0
                    - inv2 * (1.0 / 252.0 - inv2 * (1.0 / 240.0 - inv2 * (1.0 / 132.0)))));
    acc + x.ln() - 0.5 * inv - series
}

/// psi'(x), for x > 0.
pub fn trigamma(x: f64) -> f64 {
    if x <= 0.0 {
        return f64::NAN;
    }
    let mut x = x;
    let mut acc = 0.0;
    // psi'(x) = psi'(x+1) + 1/x^2
    while x < ASYMPTOTIC_CUTOFF {
        acc += 1.0 / (x * x);
        x += 1.0;
    }
    let inv = 1.0 / x;
    let inv2 = inv * inv;
    let series = inv
        * (1.0
            + inv * (0.5
                + inv * (1.0 / 6.0
                    - inv2
                        * (1.0 / 30.0
                            - inv2 * (1.0 / 42.0 - inv2 * (1.0 / 30.0 - inv2 * (5.0 / 66.0)))))));
    acc + series
}

/// Euler-Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
