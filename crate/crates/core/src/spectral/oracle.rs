//! Separation-of-variables sloshing modes of a rectangular tank `(0,1) x (0,Ly) x (-depth,0)`.

use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxMode {
    pub m: usize,
    pub n: usize,
    pub wavenumber: f64,
    pub lambda: f64,
}

/// The `count` lowest modes `Lambda_mn = k tanh(k depth)`, `k = pi sqrt(m^2 + (n/Ly)^2)`,
/// sorted by eigenvalue then `(m, n)`.
pub fn box_sloshing_modes(ly: f64, depth: f64, count: usize) -> Vec<BoxMode> {
    let mut modes = Vec::with_capacity(count * count);
    for m in 0..count {
        for n in 0..count {
            let k = PI * ((m * m) as f64 + (n as f64 / ly).powi(2)).sqrt();
            modes.push(BoxMode { m, n, wavenumber: k, lambda: k * (k * depth).tanh() });
        }
    }
    modes.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then((a.m, a.n).cmp(&(b.m, b.n))));
    modes.truncate(count);
    modes
}

pub fn box_sloshing_eigenvalues(ly: f64, depth: f64, count: usize) -> Vec<f64> {
    box_sloshing_modes(ly, depth, count).iter().map(|m| m.lambda).collect()
}

/// Mode value at `x`, normalized to unit `L2` norm on the free surface.
pub fn box_mode_value(mode: &BoxMode, ly: f64, depth: f64, x: [f64; 3]) -> f64 {
    let c = |i: usize| if i == 0 { 1.0 } else { 0.5 };
    let norm = (ly * c(mode.m) * c(mode.n)).sqrt();
    let k = mode.wavenumber;
    // cosh(k (x3 + d)) / cosh(k d) written to avoid overflow for deep tanks
    let vertical = if k == 0.0 {
        1.0
    } else {
        ((k * x[2]).exp() + (-k * (x[2] + 2.0 * depth)).exp()) / (1.0 + (-2.0 * k * depth).exp())
    };
    (mode.m as f64 * PI * x[0]).cos() * (mode.n as f64 * PI * x[1] / ly).cos() * vertical / norm
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn unit_box_values() {
        let v = box_sloshing_eigenvalues(1.0, 1.0, 6);
        assert_eq!(v[0], 0.0);
        let e = PI * PI.tanh();
        assert_relative_eq!(v[1], e, max_relative = 1e-15);
        assert_relative_eq!(v[2], e, max_relative = 1e-15);
        assert_relative_eq!(e, 3.129881, epsilon = 1e-6);
        let s2 = PI * 2f64.sqrt();
        assert_relative_eq!(v[3], s2 * s2.tanh(), max_relative = 1e-15);
    }

    #[test]
    fn deep_limit_and_symmetry() {
        let v = box_sloshing_eigenvalues(1.0, 50.0, 3);
        assert_relative_eq!(v[1], PI, max_relative = 1e-12);
        let modes = box_sloshing_modes(1.0, 1.0, 10);
        for a in &modes {
            if let Some(b) = modes.iter().find(|b| b.m == a.n && b.n == a.m) {
                assert_eq!(a.lambda, b.lambda);
            }
        }
    }

    #[test]
    fn mode_normalization_on_surface() {
        let modes = box_sloshing_modes(1.5, 0.7, 5);
        for md in &modes {
            // midpoint rule on the free surface
            let n = 400;
            let mut s = 0.0;
            for i in 0..n {
                for j in 0..n {
                    let x = [(i as f64 + 0.5) / n as f64, 1.5 * (j as f64 + 0.5) / n as f64, 0.0];
                    s += box_mode_value(md, 1.5, 0.7, x).powi(2);
                }
            }
            s *= 1.5 / (n * n) as f64;
            assert_relative_eq!(s, 1.0, max_relative = 1e-4);
        }
    }
}
