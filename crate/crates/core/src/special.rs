//! Spherical Bessel functions, Legendre polynomials and smooth cutoff
//! primitives.

/// `j_0(x), ..., j_lmax(x)`.
///
/// Upward recurrence when `x > lmax`, Miller's downward recurrence
/// otherwise, normalized through `sum (2l+1) j_l^2 = 1`.
pub fn sph_j(lmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    let ax = x.abs();
    if ax == 0.0 {
        out[0] = 1.0;
        return out;
    }
    if ax < 1e-3 {
        // leading terms of the power series
        let x2 = x * x;
        let mut lead = 1.0;
        for (l, o) in out.iter_mut().enumerate() {
            if l > 0 {
                lead *= x / (2 * l + 1) as f64;
            }
            let a = (2 * l + 3) as f64;
            let b = (2 * l + 5) as f64;
            *o = lead * (1.0 - x2 / (2.0 * a) + x2 * x2 / (8.0 * a * b));
        }
        return out;
    }
    let (s, c) = x.sin_cos();
    let j0 = s / x;
    let j1 = s / (x * x) - c / x;
    if ax > lmax as f64 {
        out[0] = j0;
        if lmax >= 1 {
            out[1] = j1;
        }
        for l in 1..lmax {
            out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
        }
        return out;
    }
    let start = lmax + 20 + (ax as usize) + ((40.0 * (lmax as f64 + ax)).sqrt() as usize);
    let mut jp1 = 0.0;
    let mut jl = 1.0;
    let mut sum = 0.0;
    for l in (0..=start).rev() {
        if l <= lmax {
            out[l] = jl;
        }
        sum += (2 * l + 1) as f64 * jl * jl;
        if l == 0 {
            break;
        }
        let jm1 = (2 * l + 1) as f64 / x * jl - jp1;
        jp1 = jl;
        jl = jm1;
        if jl.abs() > 1e100 {
            jl *= 1e-100;
            jp1 *= 1e-100;
            sum *= 1e-200;
            for o in out.iter_mut() {
                *o *= 1e-100;
            }
        }
    }
    let mut scale = 1.0 / sum.sqrt();
    // fix the overall sign from whichever closed form is better conditioned
    if j0.abs() >= j1.abs() {
        if (out[0] * scale).signum() != j0.signum() {
            scale = -scale;
        }
    } else if lmax >= 1 && (out[1] * scale).signum() != j1.signum() {
        scale = -scale;
    } else if lmax == 0 && (out[0] * scale).signum() != j0.signum() {
        scale = -scale;
    }
    for o in out.iter_mut() {
        *o *= scale;
    }
    out
}

/// `y_0(x), ..., y_lmax(x)` by upward recurrence (stable for the irregular solution).
pub fn sph_y(lmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    let (s, c) = x.sin_cos();
    out[0] = -c / x;
    if lmax >= 1 {
        out[1] = -c / (x * x) - s / x;
    }
    for l in 1..lmax {
        out[l + 1] = (2 * l + 1) as f64 / x * out[l] - out[l - 1];
    }
    out
}

/// Decaying Riccati function `z k_l(z)` normalized so that it equals `e^{-z}` for `l = 0`,
/// together with its derivative in `z`.
pub fn riccati_k(l: usize, z: f64) -> (f64, f64) {
    // e^{-z} sum_j a_j (2z)^{-j}, a_j = (l+j)!/(j!(l-j)!)
    let mut val = 0.0;
    let mut der = 0.0;
    let mut a = 1.0;
    for j in 0..=l {
        if j > 0 {
            a *= ((l + j) * (l - j + 1)) as f64 / j as f64;
        }
        let t = a * (2.0 * z).powi(-(j as i32));
        val += t;
        der += -(j as f64) * t / z;
    }
    let e = (-z).exp();
    (e * val, e * (der - val))
}

/// `P_0(x), ..., P_lmax(x)`.
pub fn legendre(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    legendre_into(x, &mut p);
    p
}

pub fn legendre_into(x: f64, p: &mut [f64]) {
    if p.is_empty() {
        return;
    }
    p[0] = 1.0;
    if p.len() > 1 {
        p[1] = x;
    }
    for l in 1..p.len() - 1 {
        p[l + 1] = ((2 * l + 1) as f64 * x * p[l] - l as f64 * p[l - 1]) / (l + 1) as f64;
    }
}

/// `e^{-1/t}` for `t > 0`, zero otherwise. Every derivative vanishes at `t = 0`.
pub fn flat(t: f64) -> f64 {
    if t <= 0.0 {
        0.0
    } else {
        (-1.0 / t).exp()
    }
}

/// Smooth transition from 1 (t ≤ 0) to 0 (t ≥ 1).
pub fn smooth_step(t: f64) -> f64 {
    if t <= 0.0 {
        return 1.0;
    }
    if t >= 1.0 {
        return 0.0;
    }
    let a = flat(1.0 - t);
    let b = flat(t);
    a / (a + b)
}

/// Compact bump `exp(1 - 1/(1 - s^2))` on `|s| < 1`, equal to 1 at the origin.
pub fn bump(s: f64) -> f64 {
    let s2 = s * s;
    if s2 >= 1.0 {
        0.0
    } else {
        (1.0 - 1.0 / (1.0 - s2)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn j_closed(l: usize, x: f64) -> f64 {
        let (s, c) = x.sin_cos();
        match l {
            0 => s / x,
            1 => s / (x * x) - c / x,
            2 => (3.0 / (x * x) - 1.0) * s / x - 3.0 * c / (x * x),
            3 => (15.0 / x.powi(3) - 6.0 / x) * s / x - (15.0 / (x * x) - 1.0) * c / x,
            _ => unreachable!(),
        }
    }

    #[test]
    fn bessel_low_orders_match_closed_forms() {
        for &x in &[0.7, 1.3, 2.0, 4.9, 11.0, 35.0] {
            let j = sph_j(30, x);
            for l in 0..4 {
                assert!((j[l] - j_closed(l, x)).abs() < 1e-13, "l={l} x={x}");
            }
            let y = sph_y(2, x);
            assert!((y[1] + x.cos() / (x * x) + x.sin() / x).abs() < 1e-13);
        }
    }

    #[test]
    fn bessel_wronskian_holds() {
        for &x in &[0.3, 2.5, 9.0, 40.0] {
            let l = 12;
            let j = sph_j(l + 1, x);
            let y = sph_y(l + 1, x);
            for m in 0..l {
                // j_{m+1} y_m - j_m y_{m+1} = 1/x^2
                let w = j[m + 1] * y[m] - j[m] * y[m + 1];
                assert!((w * x * x - 1.0).abs() < 1e-10, "m={m} x={x} w={w}");
            }
        }
    }

    #[test]
    fn bessel_small_argument_series() {
        let x = 1e-4;
        let j = sph_j(5, x);
        assert!((j[0] - x.sin() / x).abs() < 3e-16);
        assert!((j[2] - x * x / 15.0 * (1.0 - x * x / 14.0)).abs() < 1e-24);
    }

    #[test]
    fn bessel_zero_of_j0_uses_j1_sign() {
        let x = std::f64::consts::PI;
        let j = sph_j(10, x);
        assert!((j[1] - j_closed(1, x)).abs() < 1e-14);
    }

    #[test]
    fn riccati_k_derivative_is_consistent() {
        for l in 0..5 {
            let z = 1.7;
            let h = 1e-5;
            let (v, d) = riccati_k(l, z);
            let fd = (riccati_k(l, z + h).0 - riccati_k(l, z - h).0) / (2.0 * h);
            assert!((d - fd).abs() < 1e-8 * v.abs().max(1.0));
            // satisfies u'' = (l(l+1)/z^2 + 1) u
            let upp = (riccati_k(l, z + h).0 - 2.0 * v + riccati_k(l, z - h).0) / (h * h);
            let rhs = ((l * (l + 1)) as f64 / (z * z) + 1.0) * v;
            assert!((upp - rhs).abs() < 1e-4 * rhs.abs());
        }
    }

    #[test]
    fn legendre_values() {
        let p = legendre(4, 0.5);
        assert!((p[2] - (3.0 * 0.25 - 1.0) / 2.0).abs() < 1e-15);
        assert!((p[3] - (5.0 * 0.125 - 1.5) / 2.0).abs() < 1e-15);
    }

    #[test]
    fn smooth_step_is_flat_at_ends() {
        assert_eq!(smooth_step(0.0), 1.0);
        assert_eq!(smooth_step(1.0), 0.0);
        assert_eq!(smooth_step(1e-3), 1.0);
        assert!((smooth_step(0.5) - 0.5).abs() < 1e-15);
    }
}
