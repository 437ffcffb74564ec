//! Quadrature, 1-D optimization, and small curve fits.

use crate::error::{Error, Result};

const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Four-point Gauss-Legendre rule on `[a, b]`.
#[inline]
pub fn gauss4(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    let h = 0.5 * (b - a);
    let m = 0.5 * (b + a);
    let mut s = 0.0;
    for i in 0..4 {
        s += GL4_W[i] * f(m + h * GL4_X[i]);
    }
    s * h
}

/// Composite four-point Gauss-Legendre with `panels` equal panels.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, panels: usize) -> f64 {
    let n = panels.max(1);
    let h = (b - a) / n as f64;
    (0..n).map(|i| gauss4(&f, a + i as f64 * h, a + (i + 1) as f64 * h)).sum()
}

const INV_PHI: f64 = 0.618_033_988_749_894_9;

/// Golden-section search for a maximum of a unimodal `f` on `[a, b]`.
pub fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d);
        }
    }
    if fc > fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Bisection root of a continuous `f` with a sign change on `[a, b]`.
pub fn bisect(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    let mut fa = f(a);
    let fb = f(b);
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(Error::Fit(format!("no sign change on [{a}, {b}]")));
    }
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 || (b - a) < tol {
            return Ok(m);
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    Ok(0.5 * (a + b))
}

/// Least-squares fit of `y = c + a cos(x) + b sin(x)`.
/// Returns `(offset, amplitude, phase)` with `y = offset + amplitude cos(x - phase)`.
pub fn fit_sinusoid(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 3 {
        return Err(Error::Fit("need at least three points".into()));
    }
    let mut ata = nalgebra::Matrix3::<f64>::zeros();
    let mut aty = nalgebra::Vector3::<f64>::zeros();
    for (&xi, &yi) in x.iter().zip(y) {
        let row = nalgebra::Vector3::new(1.0, xi.cos(), xi.sin());
        ata += row * row.transpose();
        aty += row * yi;
    }
    let sol = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::Fit("singular sinusoid design matrix".into()))?;
    let amp = sol[1].hypot(sol[2]);
    Ok((sol[0], amp, sol[2].atan2(sol[1])))
}

/// Dominant oscillation frequency of uniformly sampled data, found by
/// maximizing the explained variance of a least-squares sinusoid
/// `c + a cos(2 pi f t) + b sin(2 pi f t)` over `f`: a coarse scan followed by
/// golden-section refinement. `dt` in ns, result in GHz.
pub fn dominant_frequency(y: &[f64], dt: f64, f_max: f64) -> Result<f64> {
    let n = y.len();
    if n < 8 {
        return Err(Error::Fit("too few samples".into()));
    }
    let mean = y.iter().sum::<f64>() / n as f64;
    let total: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    if total <= 0.0 {
        return Err(Error::Fit("flat signal".into()));
    }
    let t: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
    let explained = |f: f64| {
        let x: Vec<f64> = t.iter().map(|&ti| 2.0 * std::f64::consts::PI * f * ti).collect();
        match fit_sinusoid(&x, y) {
            Ok((c, a, p)) => {
                let r: f64 = x.iter().zip(y).map(|(xi, yi)| (yi - c - a * (xi - p).cos()).powi(2)).sum();
                1.0 - r / total
            }
            Err(_) => f64::NEG_INFINITY,
        }
    };
    let span = n as f64 * dt;
    let df = 0.1 / span;
    let mut best = (0.0, f64::NEG_INFINITY);
    let mut f = df;
    while f <= f_max {
        let e = explained(f);
        if e > best.1 {
            best = (f, e);
        }
        f += df;
    }
    let (f, _) = golden_max(explained, (best.0 - df).max(0.0), best.0 + df, 1e-7 * best.0.max(1e-6));
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_is_exact_for_degree_seven() {
        let v = gauss4(|x| x.powi(7) + 3.0 * x.powi(6), 0.0, 1.0);
        assert!((v - (1.0 / 8.0 + 3.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn golden_finds_parabola_peak() {
        let (x, _) = golden_max(|x| -(x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-8);
    }

    #[test]
    fn sinusoid_fit_recovers_phase() {
        let x: Vec<f64> = (0..12).map(|i| i as f64 * 0.5).collect();
        let y: Vec<f64> = x.iter().map(|&v| 0.2 + 0.7 * (v - 1.1).cos()).collect();
        let (c, a, p) = fit_sinusoid(&x, &y).unwrap();
        assert!((c - 0.2).abs() < 1e-12 && (a - 0.7).abs() < 1e-12 && (p - 1.1).abs() < 1e-12);
    }

    #[test]
    fn frequency_of_cosine() {
        let y: Vec<f64> = (0..400).map(|i| (2.0 * std::f64::consts::PI * 0.0123 * i as f64 * 0.5).cos()).collect();
        let f = dominant_frequency(&y, 0.5, 0.2).unwrap();
        assert!((f - 0.0123).abs() < 1e-6, "{f}");
    }
}
