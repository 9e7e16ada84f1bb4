//! Standard normal helpers with stable tails.

use libm::erfc;
use statrs::function::erf::erfc_inv;
use std::f64::consts::{PI, SQRT_2};

/// Upper tail `P(Z > x)`.
pub fn sf(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

pub fn cdf(x: f64) -> f64 {
    sf(-x)
}

/// `x` with `P(Z > x) = p`.
pub fn isf(p: f64) -> f64 {
    SQRT_2 * erfc_inv(2.0 * p)
}

pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// `ln P(Z > x)`, accurate far into the upper tail.
pub fn ln_sf(x: f64) -> f64 {
    if x < 30.0 {
        sf(x).ln()
    } else {
        let x2 = x * x;
        -0.5 * x2 - (x * (2.0 * PI).sqrt()).ln() + (1.0 - 1.0 / x2 + 3.0 / (x2 * x2)).ln()
    }
}

/// `ln(P(a < Z < b))` for `a < b`, without cancellation in either tail.
pub fn ln_prob(a: f64, b: f64) -> f64 {
    if a > 0.0 {
        let pa = ln_sf(a);
        let pb = ln_sf(b);
        pa + (-(pb - pa).exp()).ln_1p()
    } else if b < 0.0 {
        let pa = ln_sf(-a);
        let pb = ln_sf(-b);
        pb + (-(pa - pb).exp()).ln_1p()
    } else {
        (-sf(-a) - sf(b)).ln_1p()
    }
}

/// Inverse-transform draw from `N(0, 1)` truncated to `[l, u]` using one
/// uniform `v` in `[0, 1)`. The map is monotone in `v`, so shared uniforms
/// give common random numbers across different bounds.
pub fn truncated(l: f64, u: f64, v: f64) -> f64 {
    if l > 0.0 {
        upper_tail(l, u, v)
    } else if u < 0.0 {
        -upper_tail(-u, -l, 1.0 - v)
    } else {
        let cl = cdf(l);
        let cu = cdf(u);
        let p = cl + (cu - cl) * v;
        (-isf(p)).clamp(l, u)
    }
}

fn upper_tail(l: f64, u: f64, v: f64) -> f64 {
    let pl = sf(l);
    if pl > 1e-300 {
        let pu = sf(u);
        let x = isf(pl - (pl - pu) * v);
        if x.is_finite() {
            return x.clamp(l, u);
        }
    }
    // Rayleigh approximation of the far tail
    let c = 0.5 * l * l;
    let f = (c - 0.5 * u * u).exp_m1();
    (2.0 * (c - (f * v).ln_1p())).sqrt().clamp(l, u)
}
