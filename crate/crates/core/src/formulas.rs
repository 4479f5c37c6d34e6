//! Scalar functions and explicit constants.

use serde::{Deserialize, Serialize};
use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};

pub const ASINH1: f64 = 0.881_373_587_019_543_f64;
/// Right end of the domain of F.
pub const F_SUP: f64 = 2.0 * ASINH1;

/// 1 - sinh(asinh(1) - d), computed without cancellation.
fn one_minus_sinh_below(d: f64) -> f64 {
    // sinh(a - d) = cosh d - √2 sinh d when sinh a = 1, cosh a = √2.
    let h = (0.5 * d).sinh();
    -2.0 * h * h + SQRT_2 * d.sinh()
}

/// F(x) = x/2 + asinh(sinh(x/2)/√(1 − sinh²(x/2))), which equals x/2 + atanh(sinh(x/2)).
pub fn f(x: f64) -> Result<f64> {
    if !(x > 0.0 && x < F_SUP) {
        return Err(Error::Domain(format!("F is defined on (0, 2 asinh 1), got {x}")));
    }
    Ok(f_gap(F_SUP - x))
}

/// F(2 asinh 1 − eps), accurate for tiny `eps`.
pub fn f_gap(eps: f64) -> f64 {
    let x = F_SUP - eps;
    if eps > 0.5 {
        return 0.5 * x + (0.5 * x).sinh().atanh();
    }
    let one_minus = one_minus_sinh_below(0.5 * eps);
    let s = 1.0 - one_minus;
    // atanh(s) = ½ ln((1 + s)/(1 − s))
    0.5 * x + 0.5 * ((1.0 + s) / one_minus).ln()
}

/// F(2 asinh 1 − e^{−l}); keeps working once the gap underflows.
pub fn f_loggap(l: f64) -> f64 {
    if l < 700.0 {
        return f_gap((-l).exp());
    }
    // 1 − sinh(a − d) ≈ √2 d with d = eps/2, so atanh(s) ≈ ½ ln(2/(√2 eps/2)).
    0.5 * F_SUP + 0.5 * ((2.0 * SQRT_2).ln() + l)
}

/// G = F⁻¹ on (0, ∞), by bisection.
pub fn g(x: f64) -> f64 {
    assert!(x > 0.0, "G needs x > 0");
    if x > 30.0 {
        return F_SUP - (-g_loggap(x)).exp();
    }
    // F(y) > y, so G(x) < x.
    let mut hi = x.min(F_SUP);
    let mut lo = hi * 0.25;
    while f_gap(F_SUP - lo) >= x {
        lo *= 0.25;
    }
    for _ in 0..2000 {
        let mid = if hi > 4.0 * lo { (lo * hi).sqrt() } else { 0.5 * (lo + hi) };
        if mid <= lo || mid >= hi {
            break;
        }
        if f_gap(F_SUP - mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-16 * hi {
            break;
        }
    }
    0.5 * (lo + hi)
}

/// −ln(2 asinh 1 − G(x)), by bisection; the gap itself underflows for large x.
pub fn g_loggap(x: f64) -> f64 {
    assert!(x > 0.0, "G needs x > 0");
    let mut lo = -F_SUP.ln();
    let mut hi = 2.0 * x + 10.0;
    for _ in 0..400 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f_loggap(mid) < x {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Collar width w = asinh(1/sinh(l/2)).
pub fn collar_width(l: f64) -> f64 {
    assert!(l > 0.0);
    (1.0 / (0.5 * l).sinh()).asinh()
}

/// Lower bound R(θ) for the length of an arc of the dome with bending θ at a vertex.
pub fn r_bound(theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < PI) {
        return Err(Error::Domain(format!("R needs 0 < θ < π, got {theta}")));
    }
    let t = (0.5 * theta).tan();
    Ok(if theta > 0.5 * PI {
        2.0 * (1.0 / t).asinh()
    } else {
        2.0 * (theta.sin() / t).asinh()
    })
}

/// Largest perimeter of a hyperbolic triangle with a side C opposite the angle γ.
pub fn isosceles_max_perimeter(c: f64, gamma: f64) -> Result<f64> {
    if !(c > 0.0) || !(gamma > 0.0 && gamma < PI) {
        return Err(Error::Domain(format!("need C > 0 and 0 < γ < π, got C={c}, γ={gamma}")));
    }
    Ok(c + 2.0 * ((0.5 * c).sinh() / (0.5 * gamma).sin()).asinh())
}

/// θ ≥ 2 acos(sinh(L/2)).
pub fn arc_angle_lower(l: f64) -> Result<f64> {
    if !(0.0..=F_SUP).contains(&l) {
        return Err(Error::Domain(format!("need 0 ≤ L ≤ 2 asinh 1, got {l}")));
    }
    if l == 0.0 {
        return Ok(PI);
    }
    let one_minus = one_minus_sinh_below(ASINH1 - 0.5 * l);
    // 2 acos(1 − u) = 4 asin(√(u/2))
    Ok(4.0 * (0.5 * one_minus).max(0.0).sqrt().min(1.0).asin())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PaperConstants {
    #[serde(rename = "K")]
    pub k_qi: f64,
    #[serde(rename = "K0")]
    pub k0: f64,
    #[serde(rename = "Kprime")]
    pub kp: f64,
    #[serde(rename = "K0prime")]
    pub k0p: f64,
    #[serde(rename = "Phi")]
    pub phi: f64,
    pub k: f64,
    pub m: f64,
    #[serde(rename = "G_asinh1")]
    pub g_asinh1: f64,
}

pub fn bp_k() -> f64 {
    4.0 + (3.0 + 2.0 * SQRT_2).ln()
}

pub fn lift_m() -> f64 {
    (std::f64::consts::E * std::f64::consts::E).acosh()
}

pub fn constants() -> PaperConstants {
    let ga = g(ASINH1);
    let k0 = 2.0 * PI + ga;
    PaperConstants {
        k_qi: k0 / ga,
        k0,
        kp: (2.0 * PI + 2.0 * ASINH1) / (2.0 * ASINH1),
        k0p: 2.0 * PI + 2.0 * ASINH1,
        phi: (4.0 / (5.0 * SQRT_2 + 3.0)).asin(),
        k: bp_k(),
        m: lift_m(),
        g_asinh1: ga,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LiftConstants {
    pub g: f64,
    #[serde(rename = "L")]
    pub l: f64,
    #[serde(rename = "L0")]
    pub l0: f64,
}

pub fn lift_constants(nu: f64) -> Result<LiftConstants> {
    if !(nu > 0.0) {
        return Err(Error::Domain(format!("ν must be positive, got {nu}")));
    }
    let gv = 0.5 * (-lift_m()).exp() * (-PI * PI / (2.0 * nu)).exp();
    if gv <= 0.0 {
        return Err(Error::Domain(format!("g(ν) underflows at ν={nu}")));
    }
    let gg = g(gv);
    Ok(LiftConstants { g: gv, l: (2.0 * PI + gg) / gg, l0: 2.0 * PI + gg })
}

/// ln M = ln(4·10⁸) + 70·e^{ln N}; kept symbolic once e^{ln N} overflows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "lowercase")]
pub enum LogM {
    Value { log_m: f64 },
    Symbolic { ln_base: f64, factor: f64, log_n: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QcConstants {
    pub log_n: f64,
    pub log_m: LogM,
    #[serde(rename = "K")]
    pub k: f64,
    #[serde(rename = "C")]
    pub c: f64,
}

/// ln N(K, C) = 1546 K⁴ max{C, 1}.
pub fn log_n(k: f64, c: f64) -> f64 {
    1546.0 * k.powi(4) * c.max(1.0)
}

pub fn qc_constants_log(nu: f64) -> Result<QcConstants> {
    let lc = lift_constants(nu)?;
    let k = (2.0 * SQRT_2 * (bp_k() + PI * PI / (2.0 * nu))).max(lc.l);
    let c = lc.l0;
    let ln = log_n(k, c);
    let ln_base = (4e8f64).ln();
    let log_m = if ln < 700.0 {
        LogM::Value { log_m: ln_base + 70.0 * ln.exp() }
    } else {
        LogM::Symbolic { ln_base, factor: 70.0, log_n: ln }
    };
    Ok(QcConstants { log_n: ln, log_m, k, c })
}
