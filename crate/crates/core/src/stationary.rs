//! Stationary angular transport system of the switched linear PDMP.
//!
//! The angle process `(Theta_t, I_t)` on the circle has mode densities
//! `rho_i` (with respect to angle measure) satisfying the balance equations
//!
//! ```text
//! d/dtheta [ v_i(theta) rho_i(theta) ] = k_{1-i} rho_{1-i}(theta) - k_i rho_i(theta)
//! ```
//!
//! with periodic closure and total mass one, where `v_i` is the angular
//! velocity of mode `i`. The system is discretized with second-order central
//! differences on a uniform grid, so the computed densities satisfy the
//! discrete balance operator to roundoff. The circle is folded (ordering
//! 0, n-1, 1, n-2, ...) to turn the cyclic stencil into a plain banded
//! matrix, which is factored by banded LU with partial pivoting. The
//! stationary density is the kernel vector of the balance operator and is
//! extracted by inverse iteration, then normalized to unit mass.

use alloc::vec;
use alloc::vec::Vec;


use crate::error::QuadratureError;
use crate::linalg2::omega;
use crate::switched_linear::{angular_velocity, radial_rate, SwitchedLinearSystem};

const TWO_PI: f64 = core::f64::consts::TAU;
const BAND: usize = 5;

/// Grid densities for both modes plus the trapezoid value of the growth
/// functional on that grid.
#[derive(Debug)]
pub(crate) struct StationarySolution {
    pub thetas: Vec<f64>,
    pub rho0: Vec<f64>,
    pub rho1: Vec<f64>,
    pub lambda: f64,
}

pub(crate) fn solve_stationary(
    system: &SwitchedLinearSystem,
    n: usize,
) -> Result<StationarySolution, QuadratureError> {
    if n < 64 || n % 2 != 0 {
        return Err(QuadratureError::GridTooSmall);
    }
    omega(system.matrix(0)).map_err(|_| QuadratureError::VanishingAngularVelocity)?;
    omega(system.matrix(1)).map_err(|_| QuadratureError::VanishingAngularVelocity)?;

    let h = TWO_PI / n as f64;
    let thetas: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    let v = [
        thetas.iter().map(|&t| angular_velocity(system.matrix(0), t)).collect::<Vec<f64>>(),
        thetas.iter().map(|&t| angular_velocity(system.matrix(1), t)).collect::<Vec<f64>>(),
    ];
    for vi in &v {
        let max = vi.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if vi.iter().any(|x| x.abs() < 1e-12 * max) {
            return Err(QuadratureError::VanishingAngularVelocity);
        }
    }
    let (k0, k1) = system.rates();

    let (rho0, rho1) = if is_constant(&v[0]) && is_constant(&v[1]) {
        // Both modes are rigid rotations; the stationary density is flat with
        // mode weights proportional to the holding times.
        let c0 = k1 / (TWO_PI * (k0 + k1));
        let c1 = k0 / (TWO_PI * (k0 + k1));
        (vec![c0; n], vec![c1; n])
    } else {
        solve_kernel(n, h, &v, k0, k1)?
    };

    let mut lambda = 0.0;
    for j in 0..n {
        lambda += radial_rate(system.matrix(0), thetas[j]) * rho0[j]
            + radial_rate(system.matrix(1), thetas[j]) * rho1[j];
    }
    lambda *= h;

    Ok(StationarySolution {
        thetas,
        rho0,
        rho1,
        lambda,
    })
}

fn is_constant(v: &[f64]) -> bool {
    let first = v[0];
    v.iter().all(|&x| (x - first).abs() <= 1e-13 * first.abs())
}

/// Normalizes `a`, removes its component from `b`, normalizes the rest.
/// False when either vector degenerates.
fn orthonormalize(a: &mut [f64], b: &mut [f64]) -> bool {
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(na > 0.0) || !na.is_finite() {
        return false;
    }
    for x in a.iter_mut() {
        *x /= na;
    }
    let dot: f64 = a.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
    for (x, y) in a.iter().zip(b.iter_mut()) {
        *y -= dot * x;
    }
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if !(nb > 0.0) || !nb.is_finite() {
        return false;
    }
    for y in b.iter_mut() {
        *y /= nb;
    }
    true
}

/// Folded position of circle node `j`: nodes are interleaved from both ends
/// so cyclic neighbours stay within distance two and the stencil fits in a
/// band of half-width 5 (two unknowns per node).
fn fold_pos(j: usize, n: usize) -> usize {
    if j < n.div_ceil(2) {
        2 * j
    } else {
        2 * (n - 1 - j) + 1
    }
}

fn solve_kernel(
    n: usize,
    h: f64,
    v: &[Vec<f64>; 2],
    k0: f64,
    k1: f64,
) -> Result<(Vec<f64>, Vec<f64>), QuadratureError> {
    let nn = 2 * n;
    let idx = |j: usize, i: usize| 2 * fold_pos(j, n) + i;
    let k = [k0, k1];

    let mut banded = Banded::new(nn, BAND, BAND);
    let inv_2h = 1.0 / (2.0 * h);
    for j in 0..n {
        let jp = (j + 1) % n;
        let jm = (j + n - 1) % n;
        for i in 0..2 {
            let row = idx(j, i);
            banded.add(row, idx(jp, i), v[i][jp] * inv_2h);
            banded.add(row, idx(jm, i), -v[i][jm] * inv_2h);
            banded.add(row, idx(j, i), k[i]);
            banded.add(row, idx(j, 1 - i), -k[1 - i]);
        }
    }

    let apply = |x: &[f64], out: &mut [f64]| {
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            for i in 0..2 {
                out[idx(j, i)] = (v[i][jp] * x[idx(jp, i)] - v[i][jm] * x[idx(jm, i)]) * inv_2h
                    + k[i] * x[idx(j, i)]
                    - k[1 - i] * x[idx(j, 1 - i)];
            }
        }
    };

    let lu = banded.factor();

    // On an even periodic grid the central-difference balance operator has a
    // two-dimensional kernel: the stationary density, and its image under
    // the Nyquist twist rho -> (-1)^j rho (the twisted equations are the
    // balance system of the reversed angular flow). The kernel plane is
    // extracted by two-column inverse subspace iteration through the
    // pivot-guarded factorization; orthonormalization keeps both directions
    // alive even when one guarded pivot is much smaller than the other. The
    // stationary density is the kernel combination with unit mass and zero
    // alternating mass (the alternating sum of the true density is an
    // alternating sum of an analytic periodic function, hence negligible,
    // while the twisted component carries full alternating mass).
    let mut alt_signs = vec![0.0; nn];
    for j in 0..n {
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        alt_signs[idx(j, 0)] = sign;
        alt_signs[idx(j, 1)] = sign;
    }
    let mut w1 = vec![1.0; nn];
    let mut w2 = alt_signs.clone();
    for _ in 0..2 {
        lu.solve(&mut w1);
        lu.solve(&mut w2);
        if !orthonormalize(&mut w1, &mut w2) {
            return Err(QuadratureError::SingularSystem);
        }
    }

    let mass_of = |x: &[f64]| -> f64 { x.iter().sum::<f64>() * h };
    let alt_of = |x: &[f64]| -> f64 { x.iter().zip(&alt_signs).map(|(a, s)| a * s).sum() };
    let s = [
        [mass_of(&w1), mass_of(&w2)],
        [alt_of(&w1), alt_of(&w2)],
    ];
    let det = s[0][0] * s[1][1] - s[0][1] * s[1][0];
    let scale2 = (s[0][0].abs() + s[0][1].abs()) * (s[1][0].abs() + s[1][1].abs());
    if !det.is_finite() || det.abs() <= 1e-10 * scale2 {
        return Err(QuadratureError::SingularSystem);
    }
    // Coefficients for mass 1, alternating mass 0.
    let mu1 = s[1][1] / det;
    let mu2 = -s[1][0] / det;
    let mut x: Vec<f64> = w1
        .iter()
        .zip(&w2)
        .map(|(a, b)| mu1 * a + mu2 * b)
        .collect();

    let mass = mass_of(&x);
    if !(mass.is_finite()) || mass == 0.0 {
        return Err(QuadratureError::SingularSystem);
    }
    for t in x.iter_mut() {
        *t /= mass;
    }

    // The true density is strictly positive; anything beyond a roundoff-size
    // undershoot means the grid did not resolve the transport balance.
    let max = x.iter().fold(0.0f64, |m, t| m.max(*t));
    if x.iter().any(|&t| t < -1e-8 * max) {
        return Err(QuadratureError::SingularSystem);
    }
    for t in x.iter_mut() {
        if *t < 0.0 {
            *t = 0.0;
        }
    }

    let mut residual = vec![0.0; nn];
    apply(&x, &mut residual);
    let res_max = residual.iter().fold(0.0f64, |m, t| m.max(t.abs()));
    let scale = banded.max_abs_entry * max;
    if res_max > 1e-9 * scale {
        return Err(QuadratureError::SingularSystem);
    }

    let mut rho0 = vec![0.0; n];
    let mut rho1 = vec![0.0; n];
    for j in 0..n {
        rho0[j] = x[idx(j, 0)];
        rho1[j] = x[idx(j, 1)];
    }
    Ok((rho0, rho1))
}

/// Banded matrix in LAPACK-style storage with room for partial-pivoting
/// fill: entry (i, j) lives at band row `kl + ku + i - j` of column `j`.
struct Banded {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    max_abs_entry: f64,
}

struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    ldab: usize,
    data: Vec<f64>,
    ipiv: Vec<usize>,
}

impl Banded {
    fn new(n: usize, kl: usize, ku: usize) -> Self {
        let ldab = 2 * kl + ku + 1;
        Banded {
            n,
            kl,
            ku,
            ldab,
            data: vec![0.0; ldab * n],
            max_abs_entry: 0.0,
        }
    }

    #[inline]
    fn at(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(i + self.ku >= j && j + self.kl >= i);
        &mut self.data[j * self.ldab + (self.kl + self.ku + i - j)]
    }

    fn add(&mut self, i: usize, j: usize, value: f64) {
        *self.at(i, j) += value;
        self.max_abs_entry = self.max_abs_entry.max(value.abs());
    }

    fn factor(&self) -> BandedLu {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let mut data = self.data.clone();
        let mut ipiv = vec![0usize; n];
        let scale = data.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        // Floor for exactly singular pivots; large enough to keep the solve
        // finite, small enough that inverse iteration still lands on the
        // kernel.
        let floor = scale * 1e-100 + f64::MIN_POSITIVE;
        let ind = |i: usize, j: usize| j * ldab + (kl + ku + i - j);
        // Pivoting fills the upper triangle out to kl + ku superdiagonals.
        let upper = kl + ku;
        for j in 0..n {
            let i_max = (j + kl).min(n - 1);
            let mut p = j;
            let mut best = 0.0f64;
            for i in j..=i_max {
                let val = data[ind(i, j)].abs();
                if val > best {
                    best = val;
                    p = i;
                }
            }
            ipiv[j] = p;
            let k_max = (j + upper).min(n - 1);
            if p != j {
                for kcol in j..=k_max {
                    data.swap(ind(j, kcol), ind(p, kcol));
                }
            }
            let mut piv = data[ind(j, j)];
            if piv.abs() < floor {
                piv = if piv < 0.0 { -floor } else { floor };
                data[ind(j, j)] = piv;
            }
            for i in j + 1..=i_max {
                let l = data[ind(i, j)] / piv;
                data[ind(i, j)] = l;
                if l != 0.0 {
                    for kcol in j + 1..=k_max {
                        let ajk = data[ind(j, kcol)];
                        if ajk != 0.0 {
                            data[ind(i, kcol)] -= l * ajk;
                        }
                    }
                }
            }
        }
        BandedLu {
            n,
            kl,
            ku,
            ldab,
            data,
            ipiv,
        }
    }
}

impl BandedLu {
    fn solve(&self, b: &mut [f64]) {
        let (n, kl, ku, ldab) = (self.n, self.kl, self.ku, self.ldab);
        let get = |i: usize, j: usize| -> f64 { self.data[j * ldab + (kl + ku + i - j)] };
        for j in 0..n {
            let p = self.ipiv[j];
            if p != j {
                b.swap(p, j);
            }
            let bj = b[j];
            if bj != 0.0 {
                let i_max = (j + kl).min(n - 1);
                for i in j + 1..=i_max {
                    b[i] -= get(i, j) * bj;
                }
            }
        }
        for j in (0..n).rev() {
            let k_max = (j + kl + ku).min(n - 1);
            let mut s = b[j];
            for kcol in j + 1..=k_max {
                s -= get(j, kcol) * b[kcol];
            }
            b[j] = s / get(j, j);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg2::TraceZeroMatrix2;

    /// Dense Gaussian elimination with partial pivoting, used as the oracle
    /// for the banded factorization.
    fn dense_solve(a: &[Vec<f64>], b: &[f64]) -> Vec<f64> {
        let n = b.len();
        let mut m: Vec<Vec<f64>> = a.to_vec();
        let mut x = b.to_vec();
        for j in 0..n {
            let p = (j..n).max_by(|&r, &s| m[r][j].abs().total_cmp(&m[s][j].abs())).unwrap();
            m.swap(j, p);
            x.swap(j, p);
            for i in j + 1..n {
                let l = m[i][j] / m[j][j];
                for k in j..n {
                    m[i][k] -= l * m[j][k];
                }
                x[i] -= l * x[j];
            }
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for k in j + 1..n {
                s -= m[j][k] * x[k];
            }
            x[j] = s / m[j][j];
        }
        x
    }

    #[test]
    fn banded_lu_matches_dense_oracle() {
        let n = 40;
        let (kl, ku) = (5, 5);
        let mut banded = Banded::new(n, kl, ku);
        let mut dense = vec![vec![0.0; n]; n];
        // Deterministic pseudo-random band entries.
        let mut state = 0x1234_5678_9abc_def0u64;
        for i in 0..n {
            for j in i.saturating_sub(kl)..(i + ku + 1).min(n) {
                let r = crate::rng::splitmix64(&mut state);
                let val = ((r >> 11) as f64 / 9.0e15) - 0.5;
                banded.add(i, j, val);
                dense[i][j] += val;
            }
            // Keep it comfortably nonsingular.
            banded.add(i, i, 4.0);
            dense[i][i] += 4.0;
        }
        let b: Vec<f64> = (0..n).map(|i| (i as f64 * 0.37).sin()).collect();
        let lu = banded.factor();
        let mut x = b.clone();
        lu.solve(&mut x);
        let expect = dense_solve(&dense, &b);
        for (xi, ei) in x.iter().zip(&expect) {
            assert!((xi - ei).abs() < 1e-10, "{xi} vs {ei}");
        }
    }

    #[test]
    fn fold_keeps_cyclic_neighbours_close() {
        for n in [64usize, 65, 128, 511, 512] {
            for j in 0..n {
                let d = fold_pos(j, n) as isize - fold_pos((j + 1) % n, n) as isize;
                assert!(d.abs() <= 2, "n={n} j={j}");
            }
            let mut seen = vec![false; n];
            for j in 0..n {
                seen[fold_pos(j, n)] = true;
            }
            assert!(seen.iter().all(|&s| s));
        }
    }

    #[test]
    fn rotation_pair_density_is_flat() {
        let r1 = TraceZeroMatrix2::new(0.0, -1.0, 1.0);
        let r2 = TraceZeroMatrix2::new(0.0, -2.0, 2.0);
        let sys = SwitchedLinearSystem::new(r1, r2, 1.0, 1.0).unwrap();
        let sol = solve_stationary(&sys, 128).unwrap();
        let flat = 1.0 / (4.0 * core::f64::consts::PI);
        for j in 0..128 {
            assert!((sol.rho0[j] - flat).abs() < 1e-15);
            assert!((sol.rho1[j] - flat).abs() < 1e-15);
        }
        assert!(sol.lambda.abs() < 1e-14);
    }

    #[test]
    fn generic_pair_solves_balance_to_roundoff() {
        let a0 = TraceZeroMatrix2::new(0.0, -1.0, 1.0);
        let a1 = TraceZeroMatrix2::new(1.0, -2.0, 1.0);
        let sys = SwitchedLinearSystem::new(a0, a1, 1.0, 2.0).unwrap();
        let sol = solve_stationary(&sys, 256).unwrap();
        let n = 256;
        let h = TWO_PI / n as f64;
        // Mass one.
        let mass: f64 = sol.rho0.iter().chain(sol.rho1.iter()).sum::<f64>() * h;
        assert!((mass - 1.0).abs() < 1e-12);
        // Balance residual through the same central-difference operator.
        let mut worst = 0.0f64;
        for j in 0..n {
            let jp = (j + 1) % n;
            let jm = (j + n - 1) % n;
            for (i, (rho, other)) in
                [(&sol.rho0, &sol.rho1), (&sol.rho1, &sol.rho0)].into_iter().enumerate()
            {
                let m = sys.matrix(i as u8);
                let vp = angular_velocity(m, sol.thetas[jp]);
                let vm = angular_velocity(m, sol.thetas[jm]);
                let flux = (vp * rho[jp] - vm * rho[jm]) / (2.0 * h);
                let k_self = sys.rate(i as u8);
                let k_other = sys.rate(1 - i as u8);
                worst = worst.max((flux - (k_other * other[j] - k_self * rho[j])).abs());
            }
        }
        assert!(worst < 1e-10, "residual {worst}");
        // Positive everywhere.
        assert!(sol.rho0.iter().all(|&x| x >= 0.0));
        assert!(sol.rho1.iter().all(|&x| x > 0.0 || x == 0.0));
    }

    #[test]
    fn spectral_violation_is_reported() {
        let bad = TraceZeroMatrix2::new(1.0, 0.5, 0.5);
        let good = TraceZeroMatrix2::new(0.0, -1.0, 1.0);
        let sys = SwitchedLinearSystem::new(bad, good, 1.0, 1.0).unwrap();
        assert_eq!(
            solve_stationary(&sys, 128).unwrap_err(),
            QuadratureError::VanishingAngularVelocity
        );
    }

    #[test]
    fn grid_floor_is_enforced() {
        let r = TraceZeroMatrix2::new(0.0, -1.0, 1.0);
        let sys = SwitchedLinearSystem::new(r, r, 1.0, 1.0).unwrap();
        assert_eq!(solve_stationary(&sys, 32).unwrap_err(), QuadratureError::GridTooSmall);
    }
}
