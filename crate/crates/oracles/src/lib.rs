//! Reference solutions written independently of the solver crates.
//!
//! Nothing here touches the solver's assembly or linear algebra; every
//! quantity is derived from closed forms, scalar recurrences or plain
//! `Vec<f64>` matrix arithmetic.

use std::f64::consts::PI;

/// Coefficients of the interval eigenproblem
/// `−ωu'' + αωu = λu` on `(0, L)` with `ω∂ₙu + νβu = λu` at both ends.
#[derive(Debug, Clone, Copy)]
pub struct IntervalProblem {
    pub length: f64,
    pub alpha: f64,
    pub beta: f64,
    pub omega: f64,
    pub nu: f64,
}

impl IntervalProblem {
    /// Number of eigenvalues of the linear-element pencil on `n_cells`
    /// uniform cells that lie strictly below `lambda`.
    ///
    /// Uses the three-term recurrence for the pivots of the tridiagonal
    /// matrix `A − λM`; by Sylvester's law of inertia the number of
    /// negative pivots equals the count.
    pub fn discrete_count_below(&self, n_cells: usize, lambda: f64) -> usize {
        let h = self.length / n_cells as f64;
        let n = n_cells + 1;
        let (w, aw, nb) = (self.omega, self.alpha * self.omega, self.nu * self.beta);
        let diag = |i: usize| {
            let end = i == 0 || i == n - 1;
            let (k, m) = if end {
                (w / h, h / 3.0)
            } else {
                (2.0 * w / h, 2.0 * h / 3.0)
            };
            let (kb, mb) = if end { (nb, 1.0) } else { (0.0, 0.0) };
            k + aw * m + kb - lambda * (m + mb)
        };
        let off = -w / h + aw * h / 6.0 - lambda * h / 6.0;
        let mut count = 0;
        let mut pivot = diag(0);
        for i in 0..n {
            if i > 0 {
                let prev = if pivot == 0.0 {
                    f64::EPSILON * (1.0 + off.abs())
                } else {
                    pivot
                };
                pivot = diag(i) - off * off / prev;
            }
            if pivot < 0.0 {
                count += 1;
            }
        }
        count
    }

    /// The `count` lowest eigenvalues of the discrete pencil, by bisection
    /// on the inertia count.
    pub fn discrete_eigenvalues(&self, n_cells: usize, count: usize) -> Vec<f64> {
        let mut upper = 1.0;
        while self.discrete_count_below(n_cells, upper) < count {
            upper *= 2.0;
        }
        (0..count)
            .map(|j| {
                let (mut lo, mut hi) = (0.0, upper);
                for _ in 0..200 {
                    let mid = 0.5 * (lo + hi);
                    if self.discrete_count_below(n_cells, mid) > j {
                        hi = mid;
                    } else {
                        lo = mid;
                    }
                    if hi - lo <= 1e-15 * hi {
                        break;
                    }
                }
                0.5 * (lo + hi)
            })
            .collect()
    }

    /// Boundary mismatch at `x = L` of the solution started at `x = 0`
    /// with `u(0) = 1` and the left boundary condition imposed.
    pub fn shooting_residual(&self, lambda: f64) -> f64 {
        let (w, l) = (self.omega, self.length);
        let u0 = 1.0;
        let du0 = (self.nu * self.beta - lambda) / w;
        let k2 = (lambda - self.alpha * w) / w;
        let (u, du) = if k2 > 0.0 {
            let k = k2.sqrt();
            (
                u0 * (k * l).cos() + du0 / k * (k * l).sin(),
                -u0 * k * (k * l).sin() + du0 * (k * l).cos(),
            )
        } else if k2 < 0.0 {
            let k = (-k2).sqrt();
            (
                u0 * (k * l).cosh() + du0 / k * (k * l).sinh(),
                u0 * k * (k * l).sinh() + du0 * (k * l).cosh(),
            )
        } else {
            (u0 + du0 * l, du0)
        };
        w * du + (self.nu * self.beta - lambda) * u
    }

    /// The `count` lowest eigenvalues of the continuous problem: sign
    /// changes of the shooting residual on a fine scan, refined by
    /// bisection.
    pub fn eigenvalues(&self, count: usize) -> Vec<f64> {
        let mut roots = Vec::new();
        let step = 1e-3 * self.omega / (self.length * self.length);
        let mut lo = 0.0;
        let mut r_lo = self.shooting_residual(lo);
        while roots.len() < count {
            let hi = lo + step;
            let r_hi = self.shooting_residual(hi);
            if r_lo == 0.0 {
                roots.push(lo);
            } else if r_lo * r_hi < 0.0 {
                let (mut a, mut b, mut ra) = (lo, hi, r_lo);
                for _ in 0..200 {
                    let m = 0.5 * (a + b);
                    let rm = self.shooting_residual(m);
                    if rm == 0.0 {
                        a = m;
                        b = m;
                        break;
                    }
                    if ra * rm < 0.0 {
                        b = m;
                    } else {
                        a = m;
                        ra = rm;
                    }
                }
                roots.push(0.5 * (a + b));
            }
            lo = hi;
            r_lo = r_hi;
        }
        roots
    }
}

/// Dense row-major square matrix product.
fn matmul(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    (0..n)
        .map(|i| (0..n).map(|j| (0..n).map(|k| a[i][k] * b[k][j]).sum()).collect())
        .collect()
}

/// Matrix exponential by scaling and squaring with a degree-20 Taylor
/// polynomial.
pub fn expm(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let n = a.len();
    let norm = a
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let squarings = if norm > 0.5 {
        (norm / 0.5).log2().ceil() as u32
    } else {
        0
    };
    let scale = 0.5f64.powi(squarings as i32);
    let scaled: Vec<Vec<f64>> = a.iter().map(|r| r.iter().map(|x| x * scale).collect()).collect();
    let identity: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    let mut result = identity.clone();
    let mut term = identity;
    for k in 1..=20 {
        term = matmul(&term, &scaled);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for (r, t) in result.iter_mut().zip(&term) {
            for (x, y) in r.iter_mut().zip(t) {
                *x += y;
            }
        }
    }
    for _ in 0..squarings {
        result = matmul(&result, &result);
    }
    result
}

/// One modal coefficient `a` coupled to an exponential-kernel memory
/// `μ(s) = λ₀e^{−δs}` truncated at age `S`, with zero initial history:
///
/// `a' = −ℓa − g m`, `m = ∫₀^S μ(s) b(s) ds`, `∂ₜb + ∂ₛb = a`, `b(0) = 0`.
///
/// For `t < S` the history at age `S` is `B(t) = ∫₀ᵗ a`, which closes the
/// system `m' = −δm + a ∫₀^S μ − μ(S) B`, `B' = a`.
#[derive(Debug, Clone, Copy)]
pub struct ExponentialMode {
    pub ell: f64,
    pub coupling: f64,
    pub lambda0: f64,
    pub delta: f64,
    pub horizon: f64,
}

impl ExponentialMode {
    /// `a(t)` for `a(0) = a0`; requires `t ≤ horizon`.
    pub fn solve(&self, a0: f64, t: f64) -> f64 {
        assert!(t <= self.horizon, "closed form holds only before the horizon");
        let tail = self.lambda0 * (-self.delta * self.horizon).exp();
        let mass = (self.lambda0 - tail) / self.delta;
        let generator = [
            vec![-self.ell, -self.coupling, 0.0],
            vec![mass, -self.delta, -tail],
            vec![1.0, 0.0, 0.0],
        ];
        let scaled: Vec<Vec<f64>> = generator.iter().map(|r| r.iter().map(|x| x * t).collect()).collect();
        expm(&scaled)[0][0] * a0
    }
}

/// Integrated history `η^t(s)` along characteristics: `∫_{t−s}^t u` for
/// `s ≤ t`, and `η₀(s − t) + ∫₀ᵗ u` for `s > t`. `primitive` is
/// `U(τ) = ∫₀^τ u`.
pub fn characteristic_history(t: f64, s: f64, initial: impl Fn(f64) -> f64, primitive: impl Fn(f64) -> f64) -> f64 {
    if s <= t {
        primitive(t) - primitive(t - s)
    } else {
        initial(s - t) + primitive(t)
    }
}

/// Dirichlet spectrum `(kπ/l)²` of an interval of length `l`.
pub fn interval_dirichlet(l: f64, k: usize) -> f64 {
    (k as f64 * PI / l).powi(2)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn neumann_limit_of_shooting() {
        // A huge boundary coefficient pins the ends.
        let p = IntervalProblem {
            length: 1.0,
            alpha: 0.0,
            beta: 1e9,
            omega: 1.0,
            nu: 1.0,
        };
        let ev = p.eigenvalues(3);
        for (k, e) in ev.iter().enumerate() {
            let exact = interval_dirichlet(1.0, k + 1);
            assert!((e - exact).abs() / exact < 1e-6, "{e} vs {exact}");
        }
    }

    #[test]
    fn discrete_converges_to_continuous() {
        let p = IntervalProblem {
            length: 1.0,
            alpha: 1.0,
            beta: 2.0,
            omega: 0.5,
            nu: 0.5,
        };
        let exact = p.eigenvalues(3);
        let coarse = p.discrete_eigenvalues(32, 3);
        let fine = p.discrete_eigenvalues(64, 3);
        for j in 0..3 {
            let ratio = (coarse[j] - exact[j]).abs() / (fine[j] - exact[j]).abs();
            assert!((ratio - 4.0).abs() < 0.2, "mode {j}: ratio {ratio}");
        }
    }

    #[test]
    fn constant_mode_when_rates_match() {
        let p = IntervalProblem {
            length: 1.0,
            alpha: 0.4,
            beta: 0.4,
            omega: 0.5,
            nu: 0.5,
        };
        assert!((p.eigenvalues(1)[0] - 0.2).abs() < 1e-10);
        assert!((p.discrete_eigenvalues(8, 1)[0] - 0.2).abs() < 1e-12);
    }

    #[test]
    fn expm_of_rotation() {
        let t = 1.3;
        let e = expm(&[vec![0.0, -t], vec![t, 0.0]]);
        assert!((e[0][0] - t.cos()).abs() < 1e-14);
        assert!((e[1][0] - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn memoryless_mode_decays_exponentially() {
        let m = ExponentialMode {
            ell: 0.7,
            coupling: 0.0,
            lambda0: 1.0,
            delta: 1.0,
            horizon: 5.0,
        };
        assert!((m.solve(2.0, 1.5) - 2.0 * (-1.05f64).exp()).abs() < 1e-14);
    }

    #[test]
    fn characteristic_branches() {
        let u = |t: f64| t * t / 2.0;
        assert_eq!(characteristic_history(2.0, 1.0, |_| 0.0, u), 2.0 - 0.5);
        assert_eq!(characteristic_history(1.0, 3.0, |s| 10.0 * s, u), 20.0 + 0.5);
    }
}
