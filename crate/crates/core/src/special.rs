//! Log-domain helpers for quantities that underflow or cancel in direct form.

/// `ln(1 - e^{-a})` for `a > 0`, accurate for both tiny and large `a`.
pub fn ln_one_minus_exp_neg(a: f64) -> f64 {
    if a <= std::f64::consts::LN_2 {
        (-(-a).exp_m1()).ln()
    } else {
        (-(-a).exp()).ln_1p()
    }
}

/// `(ln(1 + x) - x) / x^2` without cancellation for small `|x|`.
pub fn ln_1p_minus_x_over_sq(x: f64) -> f64 {
    if x.abs() < 1e-2 {
        // -1/2 + x/3 - x^2/4 + ...; |x|^9/11 < 1e-18 at the cutoff.
        let mut sum = 0.0;
        let mut pow = 1.0;
        for k in 0..9 {
            let sign = if k % 2 == 0 { -1.0 } else { 1.0 };
            sum += sign * pow / (k as f64 + 2.0);
            pow *= x;
        }
        sum
    } else {
        (x.ln_1p() - x) / (x * x)
    }
}

/// `(e^x - 1) / x` without cancellation for small `|x|`.
pub fn exprel(x: f64) -> f64 {
    if x.abs() < 1e-5 {
        1.0 + x / 2.0 + x * x / 6.0
    } else {
        x.exp_m1() / x
    }
}

/// Bernoulli function `B(z) = z / (e^z - 1)`, with `B(0) = 1`.
pub fn bernoulli(z: f64) -> f64 {
    if z > 700.0 {
        z * (-z).exp()
    } else {
        1.0 / exprel(z)
    }
}
