//! Bessel functions of the first kind, integer order, |x| <= 20.

use crate::error::{Error, Result};

pub const DOMAIN: f64 = 20.0;

/// Location of the first maximum of J1.
pub const J1_ARGMAX: f64 = 1.841_183_781_340_659_3;

/// J1(x) to ~1e-14 absolute on the supported domain.
pub fn bessel_j1(x: f64) -> Result<f64> {
    bessel_jn(1, x)
}

pub fn bessel_j0(x: f64) -> Result<f64> {
    bessel_jn(0, x)
}

/// J_n(x): power series for small arguments, Miller's backward recurrence
/// normalized by `J0 + 2 sum J_2k = 1` otherwise.
pub fn bessel_jn(n: usize, x: f64) -> Result<f64> {
    if !x.is_finite() || x.abs() > DOMAIN {
        return Err(Error::Domain { arg: "x", value: x, domain: "|x| <= 20" });
    }
    let sign = if x < 0.0 && n % 2 == 1 { -1.0 } else { 1.0 };
    let ax = x.abs();
    let v = if ax <= 4.0 { series(n, ax) } else { miller(n, ax) };
    Ok(sign * v)
}

fn series(n: usize, x: f64) -> f64 {
    let h = 0.5 * x;
    let mut term = 1.0;
    for k in 1..=n {
        term *= h / k as f64;
    }
    let q = -h * h;
    let mut sum = term;
    for m in 1..60 {
        term *= q / (m as f64 * (m + n) as f64);
        sum += term;
        if term.abs() < 1e-17 * sum.abs().max(1e-300) {
            break;
        }
    }
    sum
}

fn miller(n: usize, x: f64) -> f64 {
    let top = n.max(x.ceil() as usize);
    let m = 2 * ((top + 30 + (160.0 * top as f64).sqrt() as usize) / 2);
    let tox = 2.0 / x;
    let (mut bjp, mut bj) = (0.0f64, 1.0f64);
    let (mut ans, mut sum) = (0.0f64, 0.0f64);
    let mut add = false;
    for j in (1..=m).rev() {
        let bjm = j as f64 * tox * bj - bjp;
        bjp = bj;
        bj = bjm;
        if bj.abs() > 1e100 {
            bj *= 1e-100;
            bjp *= 1e-100;
            ans *= 1e-100;
            sum *= 1e-100;
        }
        if add {
            sum += bj;
        }
        add = !add;
        if j == n {
            ans = bjp;
        }
    }
    if n == 0 {
        ans = bj;
    }
    sum = 2.0 * sum - bj;
    ans / sum
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    // (1/pi) int_0^pi cos(n t - x sin t) dt; the trapezoid rule is spectrally
    // accurate for this periodic integrand.
    fn integral_oracle(n: usize, x: f64) -> f64 {
        let m = 4000;
        let h = PI / m as f64;
        let f = |t: f64| (n as f64 * t - x * t.sin()).cos();
        let mut s = 0.5 * (f(0.0) + f(PI));
        for i in 1..m {
            s += f(i as f64 * h);
        }
        s * h / PI
    }

    #[test]
    fn matches_integral_representation() {
        for n in 0..4 {
            let mut x = -20.0;
            while x <= 20.0 {
                let v = bessel_jn(n, x).unwrap();
                let o = integral_oracle(n, x);
                assert!((v - o).abs() < 1e-12, "n={n} x={x}: {v} vs {o}");
                x += 0.173;
            }
        }
    }

    #[test]
    fn series_and_recurrence_agree_at_switch() {
        for n in 0..3 {
            let a = series(n, 4.0);
            let b = miller(n, 4.0);
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn small_argument_is_linear() {
        assert_eq!(bessel_j1(0.0).unwrap(), 0.0);
        let x = 1e-4;
        assert!((bessel_j1(x).unwrap() - x / 2.0).abs() < 1e-12);
    }

    #[test]
    fn global_maximum() {
        let (xm, fm) = crate::numerics::golden_max(|x| bessel_j1(x).unwrap(), 0.5, 3.0, 1e-10);
        assert!((xm - J1_ARGMAX).abs() < 1e-6);
        assert!((fm - 0.5819).abs() < 1e-4);
    }

    #[test]
    fn domain_is_enforced() {
        assert!(matches!(bessel_j1(20.5), Err(Error::Domain { .. })));
        assert!(bessel_j1(f64::NAN).is_err());
    }
}
