//! Quadrature rules behind the near-field pair weights and the exterior tail.

use std::f64::consts::PI;

/// Gauss–Legendre nodes and weights on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut xs = vec![0.0; n];
    let mut ws = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, x);
            for k in 2..=n {
                let k = k as f64;
                let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { x } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (x * pn - pm) / (x * x - 1.0);
            let dx = pn / dp;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        xs[i] = -x;
        ws[i] = w;
        xs[n - 1 - i] = x;
        ws[n - 1 - i] = w;
    }
    (xs, ws)
}

/// Integrate `f` over `[a, b]` split at the sorted `breaks`, `order` points per piece.
pub fn integrate_pieces(breaks: &[f64], order: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let (xs, ws) = gauss_legendre(order);
    let mut total = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b - a <= 0.0 {
            continue;
        }
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        let mut piece = 0.0;
        for (x, wt) in xs.iter().zip(&ws) {
            piece += wt * f(mid + half * x);
        }
        total += half * piece;
    }
    total
}

/// `∫_0^1 ∫_k^{k+1} |x - y|^q dy dx` for integer `k >= 1`, in closed form.
pub fn cell_pair_moment_1d(k: u64, q: f64) -> f64 {
    let k = k as f64;
    let f = |r: f64| if r <= 0.0 { 0.0 } else { r.powf(q + 2.0) };
    (f(k + 1.0) - 2.0 * f(k) + f(k - 1.0)) / ((q + 1.0) * (q + 2.0))
}

/// `∫_{C_0} ∫_{C_δ} |x - y|^q dy dx` for unit cells in the plane, `q > -2`, `δ ≠ 0`.
///
/// Rewritten as `∫ |w|^q Λ(w - δ) dw` with the tent `Λ(v) = Π(1 - |v_a|)_+` and
/// integrated in polar coordinates on each of the four unit squares where the tent
/// is bilinear; the radial integral is exact, the angular one Gauss–Legendre.
pub fn cell_pair_moment_2d(delta: [i64; 2], q: f64, order: usize) -> f64 {
    let d = [delta[0] as f64, delta[1] as f64];
    let mut total = 0.0;
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            // square between d and d + s (per axis)
            let lo = [d[0].min(d[0] + sx), d[1].min(d[1] + sy)];
            // tent 1 - |w_a - d_a| = (1 + s_a d_a) - s_a w_a on this square
            let (a1, b1) = (1.0 + sx * d[0], -sx);
            let (a2, b2) = (1.0 + sy * d[1], -sy);
            let poly = [a1 * a2, b1 * a2, a1 * b2, b1 * b2];
            total += square_polar_integral(lo, q, poly, order);
        }
    }
    total
}

fn wrap_angle(t: f64) -> f64 {
    let mut t = t;
    while t <= -PI {
        t += 2.0 * PI;
    }
    while t > PI {
        t -= 2.0 * PI;
    }
    t
}

/// `∫_S |w|^q (c0 + c1 w1 + c2 w2 + c3 w1 w2) dw` over the unit square `S = lo + [0,1]^2`
/// whose interior does not contain the origin.
fn square_polar_integral(lo: [f64; 2], q: f64, c: [f64; 4], order: usize) -> f64 {
    let hi = [lo[0] + 1.0, lo[1] + 1.0];
    let centre = [lo[0] + 0.5, lo[1] + 0.5];
    let phi = centre[1].atan2(centre[0]);
    let mut angles: Vec<f64> = Vec::with_capacity(4);
    for cx in [lo[0], hi[0]] {
        for cy in [lo[1], hi[1]] {
            if cx == 0.0 && cy == 0.0 {
                continue;
            }
            angles.push(wrap_angle(cy.atan2(cx) - phi));
        }
    }
    angles.sort_by(f64::total_cmp);
    angles.dedup();
    let e2 = q + 2.0;
    let e3 = q + 3.0;
    let e4 = q + 4.0;
    integrate_pieces(&angles, order, |t| {
        let th = t + phi;
        let (sn, cs) = th.sin_cos();
        let dir = [cs, sn];
        let mut tmin: f64 = 0.0;
        let mut tmax = f64::INFINITY;
        for a in 0..2 {
            if dir[a].abs() < 1e-300 {
                if lo[a] > 0.0 || hi[a] < 0.0 {
                    return 0.0;
                }
                continue;
            }
            let (t1, t2) = (lo[a] / dir[a], hi[a] / dir[a]);
            let (t1, t2) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            tmin = tmin.max(t1);
            tmax = tmax.min(t2);
        }
        if !(tmax > tmin) {
            return 0.0;
        }
        let pw = |e: f64| {
            let lo = if tmin > 0.0 { tmin.powf(e) } else { 0.0 };
            (tmax.powf(e) - lo) / e
        };
        c[0] * pw(e2) + (c[1] * cs + c[2] * sn) * pw(e3) + c[3] * cs * sn * pw(e4)
    })
}

/// Integral of `sgn(x1 + r cos θ) r^{-1-σ}` over `r >= rho`.
pub fn signed_ray_integral(x1: f64, cos: f64, rho: f64, sigma: f64) -> f64 {
    if cos.abs() < 1e-300 {
        return sgn(x1) * rho.powf(-sigma) / sigma;
    }
    let r_star = -x1 / cos;
    let after = sgn(cos);
    if r_star > rho {
        let before = -after;
        let (a, b) = (rho.powf(-sigma), r_star.powf(-sigma));
        (before * (a - b) + after * b) / sigma
    } else {
        after * rho.powf(-sigma) / sigma
    }
}

pub fn sgn(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_integrates_polynomials() {
        for n in [1, 2, 5, 8, 16, 32] {
            let (x, w) = gauss_legendre(n);
            let sw: f64 = w.iter().sum();
            assert!((sw - 2.0).abs() < 1e-13, "n={n}");
            let deg = 2 * n - 1;
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
            assert!((got - exact).abs() < 1e-12);
            let even = 2 * n - 2;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(even as i32)).sum();
            assert!((got - 2.0 / (even as f64 + 1.0)).abs() < 1e-12, "n={n}");
        }
    }

    /// Brute-force midpoint double integral for a smooth (q >= 0) 1D moment.
    #[test]
    fn moment_1d_matches_brute_force() {
        let q = 0.7;
        for k in 1..4u64 {
            let n = 2000;
            let mut s = 0.0;
            for a in 0..n {
                let x = (a as f64 + 0.5) / n as f64;
                for b in 0..n {
                    let y = k as f64 + (b as f64 + 0.5) / n as f64;
                    s += (y - x).powf(q);
                }
            }
            s /= (n * n) as f64;
            assert!((s - cell_pair_moment_1d(k, q)).abs() < 1e-6 * s, "k={k}");
        }
    }

    /// With q = 0 the moment is the product of the cell areas.
    #[test]
    fn moment_2d_area_identity() {
        for d in [[1, 0], [0, 1], [1, 1], [2, -1], [-2, 2]] {
            let v = cell_pair_moment_2d(d, 0.0, 16);
            assert!((v - 1.0).abs() < 1e-12, "{d:?}: {v}");
        }
        // q = 2: ∫∫ |x-y|^2 = |δ|^2 + 2 * (1/6) per axis
        for d in [[1i64, 0], [1, 1], [2, 3]] {
            let v = cell_pair_moment_2d(d, 2.0, 16);
            let exact = (d[0] * d[0] + d[1] * d[1]) as f64 + 2.0 / 6.0;
            assert!((v - exact).abs() < 1e-11, "{d:?}: {v} vs {exact}");
        }
    }

    #[test]
    fn moment_2d_singular_converges() {
        let q = -1.6;
        for d in [[1i64, 0], [1, 1], [2, 1]] {
            let a = cell_pair_moment_2d(d, q, 8);
            let b = cell_pair_moment_2d(d, q, 16);
            assert!(a.is_finite() && a > 0.0);
            assert!((a - b).abs() <= 1e-4 * b, "{d:?}");
        }
    }

    #[test]
    fn signed_ray_matches_numeric() {
        let sigma = 0.8;
        for &(x1, cs, rho) in &[(0.3, -0.5, 0.2), (0.3, -0.5, 1.0), (-0.3, 0.9, 0.1), (0.0, 0.4, 0.3)] {
            let exact = signed_ray_integral(x1, cs, rho, sigma);
            // substitute r = rho / u, u in (0, 1]
            let n = 200_000;
            let mut s = 0.0;
            for k in 0..n {
                let u = (k as f64 + 0.5) / n as f64;
                let r = rho / u;
                s += sgn(x1 + r * cs) * r.powf(-1.0 - sigma) * rho / (u * u);
            }
            s /= n as f64;
            assert!((s - exact).abs() < 1e-3 * exact.abs().max(1.0), "{x1} {cs} {rho}: {s} vs {exact}");
        }
    }
}
