//! Bessel functions of integer order 0, 1 and 2.
//!
//! `J_n`: power series below 2, Miller backward recurrence up to 25 and the
//! Hankel asymptotic expansion beyond. `K_n`: logarithmic series below 2 and
//! Steed's continued fraction above. `I_n`: the all-positive power series.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use super::{NumericsError, Result};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
const SERIES_LIMIT: f64 = 2.0;
const MILLER_LIMIT: f64 = 25.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselEval {
    pub order: u32,
    pub argument: f64,
    pub value: f64,
    pub derivative: f64,
}

fn check_order(order: u32) -> Result<()> {
    if order > 2 {
        return Err(NumericsError::Domain(format!(
            "Bessel order {order} not supported (0, 1 or 2)"
        )));
    }
    Ok(())
}

/// Bessel function of the first kind `J_order(x)` and its derivative.
pub fn bessel_j(order: u32, x: f64) -> Result<BesselEval> {
    check_order(order)?;
    if !x.is_finite() || x < 0.0 {
        return Err(NumericsError::Domain(format!("J_n requires finite x >= 0, got {x}")));
    }
    let j = j012(x);
    let n = order as usize;
    let derivative = if x == 0.0 {
        [0.0, 0.5, 0.0][n]
    } else {
        match n {
            0 => -j[1],
            1 => j[0] - j[1] / x,
            _ => j[1] - 2.0 * j[2] / x,
        }
    };
    Ok(BesselEval { order, argument: x, value: j[n], derivative })
}

/// Modified Bessel function of the second kind `K_order(x)` and its derivative.
pub fn bessel_k(order: u32, x: f64) -> Result<BesselEval> {
    check_order(order)?;
    if !x.is_finite() || x <= 0.0 {
        return Err(NumericsError::Domain(format!("K_n requires finite x > 0, got {x}")));
    }
    let k = k012(x);
    let n = order as usize;
    let derivative = match n {
        0 => -k[1],
        1 => -k[0] - k[1] / x,
        _ => -k[1] - 2.0 * k[2] / x,
    };
    Ok(BesselEval { order, argument: x, value: k[n], derivative })
}

/// Modified Bessel function of the first kind `I_order(x)` and its derivative.
pub fn bessel_i(order: u32, x: f64) -> Result<BesselEval> {
    check_order(order)?;
    if !x.is_finite() || x < 0.0 {
        return Err(NumericsError::Domain(format!("I_n requires finite x >= 0, got {x}")));
    }
    let i = i012(x);
    let n = order as usize;
    let derivative = if x == 0.0 {
        [0.0, 0.5, 0.0][n]
    } else {
        match n {
            0 => i[1],
            1 => i[0] - i[1] / x,
            _ => i[1] - 2.0 * i[2] / x,
        }
    };
    Ok(BesselEval { order, argument: x, value: i[n], derivative })
}

/// `[J0, J1, J2]` at `x >= 0`. No argument checking.
pub fn j012(x: f64) -> [f64; 3] {
    if x < SERIES_LIMIT {
        [j_series(0, x), j_series(1, x), j_series(2, x)]
    } else if x <= MILLER_LIMIT {
        j_miller(x)
    } else {
        let j0 = j_hankel(0, x);
        let j1 = j_hankel(1, x);
        [j0, j1, 2.0 * j1 / x - j0]
    }
}

/// `[K0, K1, K2]` at `x > 0`. No argument checking.
pub fn k012(x: f64) -> [f64; 3] {
    let (k0, k1) = if x <= SERIES_LIMIT { k01_series(x) } else { k01_steed(x) };
    [k0, k1, k0 + 2.0 * k1 / x]
}

/// `[I0, I1, I2]` at `x >= 0`. No argument checking.
pub fn i012(x: f64) -> [f64; 3] {
    [i_series(0, x), i_series(1, x), i_series(2, x)]
}

fn factorial(n: u32) -> f64 {
    (1..=n).map(f64::from).product()
}

fn j_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(n as i32) / factorial(n);
    let mut sum = term;
    let q = -half * half;
    for k in 1..200 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term.abs() <= 1e-17 * sum.abs() {
            break;
        }
    }
    sum
}

fn i_series(n: u32, x: f64) -> f64 {
    let half = 0.5 * x;
    let mut term = half.powi(n as i32) / factorial(n);
    let mut sum = term;
    let q = half * half;
    for k in 1..2000 {
        term *= q / (k as f64 * (k + n) as f64);
        sum += term;
        if term <= 1e-17 * sum {
            break;
        }
    }
    sum
}

fn j_miller(x: f64) -> [f64; 3] {
    let start = 2 * ((x + 25.0 + 4.0 * x.sqrt()) as usize / 2 + 1);
    let two_over_x = 2.0 / x;
    let mut next = 0.0_f64;
    let mut cur = 1e-30_f64;
    let mut out = [0.0; 3];
    let mut norm = 0.0;
    for k in (1..=start).rev() {
        // cur holds j_k, next holds j_{k+1}
        if k <= 2 {
            out[k] = cur;
        }
        if k % 2 == 0 {
            norm += 2.0 * cur;
        }
        let prev = k as f64 * two_over_x * cur - next;
        next = cur;
        cur = prev;
        if cur.abs() > 1e250 {
            let s = 1e-250;
            cur *= s;
            next *= s;
            norm *= s;
            out.iter_mut().for_each(|v| *v *= s);
        }
    }
    out[0] = cur;
    norm += cur;
    [out[0] / norm, out[1] / norm, out[2] / norm]
}

fn j_hankel(n: u32, x: f64) -> f64 {
    let mu = 4.0 * f64::from(n * n);
    let inv8x = 1.0 / (8.0 * x);
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0_f64;
    let mut last = f64::INFINITY;
    for k in 1..60 {
        let odd = (2 * k - 1) as f64;
        term *= (mu - odd * odd) * inv8x / k as f64;
        if term.abs() > last {
            break;
        }
        last = term.abs();
        // a_k / x^k with alternating sign pattern for P (even k) and Q (odd k)
        match k % 4 {
            1 => q += term,
            2 => p -= term,
            3 => q -= term,
            _ => p += term,
        }
        if term.abs() < 1e-17 {
            break;
        }
    }
    let chi = x - (f64::from(n) * FRAC_PI_2 + FRAC_PI_4);
    (2.0 / (PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
}

fn k01_series(x: f64) -> (f64, f64) {
    let half = 0.5 * x;
    let ln_half = half.ln();
    let q = half * half;
    let [i0, i1, _] = i012(x);

    // K0 = -(ln(x/2) + gamma) I0 + sum_{k>=1} q^k/(k!)^2 H_k
    let mut term = 1.0;
    let mut harmonic = 0.0;
    let mut s0 = 0.0;
    for k in 1..100 {
        let kf = k as f64;
        term *= q / (kf * kf);
        harmonic += 1.0 / kf;
        s0 += term * harmonic;
        if term * harmonic < 1e-18 * s0.abs() {
            break;
        }
    }
    let k0 = -(ln_half + EULER_GAMMA) * i0 + s0;

    // K1 = 1/x + ln(x/2) I1 - (x/4) sum_{k>=0} q^k/(k!(k+1)!) (psi(k+1) + psi(k+2))
    let mut term = 1.0;
    let mut h_k = 0.0;
    let mut s1 = 0.0;
    for k in 0..100 {
        let kf = k as f64;
        if k > 0 {
            term *= q / (kf * (kf + 1.0));
            h_k += 1.0 / kf;
        }
        let psi_sum = 2.0 * (-EULER_GAMMA) + h_k + h_k + 1.0 / (kf + 1.0);
        let contrib = term * psi_sum;
        s1 += contrib;
        if k > 2 && contrib.abs() < 1e-18 * s1.abs() {
            break;
        }
    }
    let k1 = 1.0 / x + ln_half * i1 - 0.25 * x * s1;
    (k0, k1)
}

/// Steed's continued-fraction evaluation of `K_0` and `K_1` for `x >= 2`.
fn k01_steed(x: f64) -> (f64, f64) {
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..10_000 {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh = (b * d - 1.0) * delh;
        h += delh;
        let dels = q * delh;
        s += dels;
        if (dels / s).abs() < 1e-17 {
            break;
        }
    }
    h *= a1;
    let k0 = (PI / (2.0 * x)).sqrt() * (-x).exp() / s;
    let k1 = k0 * (x + 0.5 - h) / x;
    (k0, k1)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    // Reference values from an independent 40-digit evaluation.
    const J_REF: &[(u32, f64, f64)] = &[
        (0, 0.05, 0.999_375_097_649_468_6),
        (0, 1.0, 0.765_197_686_557_966_6),
        (0, 5.0, -0.177_596_771_314_338_3),
        (0, 20.0, 0.167_024_664_340_583_15),
        (0, 50.0, 0.055_812_327_669_251_815),
        (1, 0.5, 0.242_268_457_674_873_9),
        (1, 2.0, 0.576_724_807_756_873_4),
        (1, 10.0, 0.043_472_746_168_861_44),
        (1, 30.0, -0.118_751_062_616_622_94),
        (1, 100.0, -0.077_145_352_014_112_16),
        (2, 0.05, 3.124_349_009_193_844_7e-4),
        (2, 2.0, 0.352_834_028_615_637_7),
        (2, 10.0, 0.254_630_313_685_120_6),
        (2, 100.0, -0.021_528_757_344_505_366),
    ];

    const K_REF: &[(u32, f64, f64)] = &[
        (0, 0.05, 3.114_234_029_471_99),
        (0, 1.0, 0.421_024_438_240_708_33),
        (0, 2.0, 0.113_893_872_749_533_43),
        (0, 5.0, 0.003_691_098_334_042_594_3),
        (0, 50.0, 3.410_167_749_789_495_5e-23),
        (1, 0.5, 1.656_441_120_003_300_9),
        (1, 1.0, 0.601_907_230_197_234_6),
        (1, 2.0, 0.139_865_881_816_522_43),
        (1, 10.0, 1.864_877_345_382_558_5e-5),
        (1, 100.0, 4.679_853_735_636_909e-45),
        (2, 0.05, 799.501_207_064_772_2),
        (2, 1.0, 1.624_838_898_635_177_5),
        (2, 20.0, 6.329_543_612_292_228e-10),
    ];

    #[test]
    fn j_matches_reference() {
        for &(n, x, v) in J_REF {
            let got = bessel_j(n, x).unwrap().value;
            assert!(rel(got, v) < 1e-12, "J{n}({x}) = {got}, want {v}");
        }
    }

    #[test]
    fn k_matches_reference() {
        for &(n, x, v) in K_REF {
            let got = bessel_k(n, x).unwrap().value;
            assert!(rel(got, v) < 1e-12, "K{n}({x}) = {got}, want {v}");
        }
    }

    #[test]
    fn j_small_argument_limits() {
        assert!((bessel_j(0, 1e-9).unwrap().value - 1.0).abs() < 1e-15);
        assert!(bessel_j(1, 1e-9).unwrap().value.abs() < 1e-9);
        assert_eq!(bessel_j(0, 0.0).unwrap().value, 1.0);
        assert_eq!(bessel_j(1, 0.0).unwrap().derivative, 0.5);
    }

    #[test]
    fn first_zero_of_j0() {
        let j0 = bessel_j(0, 2.404_825_557_695_773).unwrap().value;
        assert!(j0.abs() < 1e-15, "{j0}");
    }

    #[test]
    fn k0_at_one() {
        let k = bessel_k(0, 1.0).unwrap();
        assert!(rel(k.value, 0.421_024_438_240_708_34) < 1e-14);
    }

    #[test]
    fn k_recurrence_at_two() {
        let [k0, k1, k2] = k012(2.0);
        assert!(rel(k2, k0 + k1) < 1e-10);
    }

    #[test]
    fn branches_agree_at_seams() {
        for &x in &[SERIES_LIMIT, MILLER_LIMIT] {
            let lo = x * (1.0 - 1e-12);
            let hi = x * (1.0 + 1e-12);
            let a = j012(lo);
            let b = j012(hi);
            for n in 0..3 {
                assert!((a[n] - b[n]).abs() < 1e-10, "J{n} seam at {x}");
            }
        }
        // direct comparison of both branches at the seam, not just continuity
        let x = SERIES_LIMIT;
        let m = j_miller(x);
        for n in 0..3u32 {
            assert!((j_series(n, x) - m[n as usize]).abs() < 1e-13);
        }
        let x = MILLER_LIMIT;
        let m = j_miller(x);
        for n in 0..2u32 {
            assert!((j_hankel(n, x) - m[n as usize]).abs() < 1e-12);
        }
        let (s0, s1) = k01_series(SERIES_LIMIT);
        let (c0, c1) = k01_steed(SERIES_LIMIT);
        assert!(rel(s0, c0) < 1e-12 && rel(s1, c1) < 1e-12);
    }

    #[test]
    fn k_signs_and_asymptote() {
        for i in 1..400 {
            let x = 0.05 * i as f64;
            for n in 0..3 {
                let k = bessel_k(n, x).unwrap();
                assert!(k.value > 0.0 && k.derivative < 0.0);
            }
        }
        for &x in &[10.0, 30.0, 100.0, 300.0] {
            let lead = (PI / (2.0 * x)).sqrt() * (-x).exp();
            for n in 0..3u32 {
                let ratio = bessel_k(n, x).unwrap().value / lead;
                let mu = 4.0 * f64::from(n * n);
                // first omitted-term bound of the asymptotic series
                let bound = (mu - 1.0).abs() / (8.0 * x) + (mu - 1.0).abs() * (mu - 9.0).abs() / (128.0 * x * x);
                assert!((ratio - 1.0).abs() <= bound + 1e-12, "n={n} x={x} ratio={ratio}");
            }
        }
    }

    #[test]
    fn wronskian_identities() {
        let mut x = 0.1;
        while x <= 50.0 {
            let i = i012(x);
            let k = k012(x);
            let ip = [i[1], i[0] - i[1] / x, i[1] - 2.0 * i[2] / x];
            let kp = [-k[1], -k[0] - k[1] / x, -k[1] - 2.0 * k[2] / x];
            for n in 0..3 {
                let w = i[n] * kp[n] - ip[n] * k[n];
                assert!(rel(w, -1.0 / x) < 1e-10, "n={n} x={x} w={w}");
            }
            x *= 1.07;
        }
    }

    #[test]
    fn j_recurrence_and_wronskian_like_identity() {
        // J_{n-1} + J_{n+1} = 2n/x J_n, and J0 J1' - J0' J1 = J0^2 + J1^2 - J0 J1 / x.
        let mut x = 0.05;
        while x <= 100.0 {
            let [j0, j1, j2] = j012(x);
            assert!((j0 + j2 - 2.0 * j1 / x).abs() < 1e-10, "x={x}");
            let d1 = bessel_j(1, x).unwrap().derivative;
            let d0 = bessel_j(0, x).unwrap().derivative;
            let lhs = j0 * d1 - d0 * j1;
            let rhs = j0 * j0 + j1 * j1 - j0 * j1 / x;
            assert!((lhs - rhs).abs() < 1e-10);
            x *= 1.05;
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(bessel_k(0, 0.0).is_err());
        assert!(bessel_k(1, -1.0).is_err());
        assert!(bessel_j(0, f64::NAN).is_err());
        assert!(bessel_j(3, 1.0).is_err());
        assert!(bessel_i(0, f64::INFINITY).is_err());
    }
}
