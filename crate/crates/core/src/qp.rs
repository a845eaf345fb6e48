//! Operator-splitting solver for small dense convex QPs
//!
//! ```text
//!     minimize    1/2 x' P x + q' x
//!     subject to  l <= A x <= u
//! ```
//!
//! ADMM with over-relaxation on the `(x, z)` splitting, followed by an
//! active-set polish that solves the reduced KKT system to machine precision
//! when the identified active set is consistent.

use crate::linalg::{dot, lu_solve, norm_inf, Cholesky, DMat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdmmSettings {
    pub rho: f64,
    pub sigma: f64,
    pub alpha: f64,
    /// Equality rows use `rho * eq_rho_scale`.
    pub eq_rho_scale: f64,
    pub eps_abs: f64,
    pub eps_rel: f64,
    pub eps_infeasible: f64,
    pub max_iterations: usize,
    pub check_every: usize,
    /// Rebalance `rho` from the primal/dual residual ratio at each check.
    pub adaptive_rho: bool,
    pub polish: bool,
    /// Violation allowed on a polished point before it is discarded.
    pub polish_feasibility: f64,
}

impl Default for AdmmSettings {
    fn default() -> Self {
        Self {
            rho: 0.1,
            sigma: 1e-6,
            alpha: 1.6,
            eq_rho_scale: 1e3,
            eps_abs: 1e-8,
            eps_rel: 1e-8,
            eps_infeasible: 1e-4,
            max_iterations: 2000,
            check_every: 10,
            adaptive_rho: true,
            polish: true,
            polish_feasibility: 1e-10,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    Solved,
    /// A primal infeasibility certificate was found.
    Infeasible,
    /// Iteration cap hit without meeting the tolerances.
    MaxIterations,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpResult {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub status: QpStatus,
    pub iterations: usize,
    pub polished: bool,
    /// Largest bound violation of `A x` in the original (unscaled) rows.
    pub max_violation: f64,
}

#[derive(Debug, Clone)]
pub struct DenseQp {
    pub p: DMat,
    pub q: Vec<f64>,
    pub a: DMat,
    pub l: Vec<f64>,
    pub u: Vec<f64>,
}

impl DenseQp {
    pub fn objective(&self, x: &[f64]) -> f64 {
        0.5 * dot(x, &self.p.mul_vec(x)) + dot(&self.q, x)
    }

    pub fn max_violation(&self, x: &[f64]) -> f64 {
        self.a
            .mul_vec(x)
            .iter()
            .enumerate()
            .map(|(i, &ax)| (self.l[i] - ax).max(ax - self.u[i]).max(0.0))
            .fold(0.0, f64::max)
    }

    pub fn solve(&self, s: &AdmmSettings) -> QpResult {
        let n = self.q.len();
        let m = self.l.len();

        // equilibrate constraint rows to unit infinity norm
        let mut a = self.a.clone();
        let mut l = self.l.clone();
        let mut u = self.u.clone();
        let mut row_scale = vec![1.0; m];
        for i in 0..m {
            let r = norm_inf(a.row(i));
            if r > 0.0 {
                let d = 1.0 / r;
                row_scale[i] = d;
                for j in 0..n {
                    a[(i, j)] *= d;
                }
                l[i] *= d;
                u[i] *= d;
            }
        }

        let mut rho_base = s.rho;
        let mut rho = self.rho_vector(&l, &u, rho_base, s);
        let mut chol = self.factor(&a, &rho, s);

        let mut x = vec![0.0; n];
        let mut z = vec![0.0; m];
        let mut y = vec![0.0; m];
        let mut y_prev_check = y.clone();
        let mut status = QpStatus::MaxIterations;
        let mut iterations = 0;

        for it in 1..=s.max_iterations {
            iterations = it;
            let w: Vec<f64> = (0..m).map(|i| rho[i] * z[i] - y[i]).collect();
            let atw = a.tr_mul_vec(&w);
            let rhs: Vec<f64> = (0..n).map(|j| s.sigma * x[j] - self.q[j] + atw[j]).collect();
            let x_tilde = chol.solve(&rhs);
            let z_tilde = a.mul_vec(&x_tilde);
            for j in 0..n {
                x[j] = s.alpha * x_tilde[j] + (1.0 - s.alpha) * x[j];
            }
            for i in 0..m {
                let zr = s.alpha * z_tilde[i] + (1.0 - s.alpha) * z[i];
                let zn = (zr + y[i] / rho[i]).clamp(l[i], u[i]);
                y[i] += rho[i] * (zr - zn);
                z[i] = zn;
            }

            if it % s.check_every == 0 || it == s.max_iterations {
                let ax = a.mul_vec(&x);
                let r_prim = norm_inf(&ax.iter().zip(&z).map(|(p, q)| p - q).collect::<Vec<_>>());
                let px = self.p.mul_vec(&x);
                let aty = a.tr_mul_vec(&y);
                let r_dual = norm_inf(
                    &(0..n).map(|j| px[j] + self.q[j] + aty[j]).collect::<Vec<_>>(),
                );
                let eps_p = s.eps_abs + s.eps_rel * norm_inf(&ax).max(norm_inf(&z));
                let eps_d = s.eps_abs
                    + s.eps_rel * norm_inf(&px).max(norm_inf(&aty)).max(norm_inf(&self.q));
                if r_prim <= eps_p && r_dual <= eps_d {
                    status = QpStatus::Solved;
                    break;
                }
                let dy: Vec<f64> = y.iter().zip(&y_prev_check).map(|(a, b)| a - b).collect();
                if certifies_infeasibility(&a, &l, &u, &dy, s.eps_infeasible) {
                    status = QpStatus::Infeasible;
                    break;
                }
                y_prev_check.clone_from(&y);

                if s.adaptive_rho {
                    let tiny = 1e-30;
                    let prim = r_prim / norm_inf(&ax).max(norm_inf(&z)).max(tiny);
                    let dual = r_dual / norm_inf(&px).max(norm_inf(&aty)).max(norm_inf(&self.q)).max(tiny);
                    let new_rho = (rho_base * (prim / dual.max(tiny)).sqrt()).clamp(1e-6, 1e6);
                    if new_rho > 5.0 * rho_base || new_rho < 0.2 * rho_base {
                        rho_base = new_rho;
                        rho = self.rho_vector(&l, &u, rho_base, s);
                        chol = self.factor(&a, &rho, s);
                    }
                }
            }
        }

        // unscale duals back to the original rows
        let y_orig: Vec<f64> = (0..m).map(|i| y[i] * row_scale[i]).collect();
        let mut result = QpResult {
            max_violation: self.max_violation(&x),
            x,
            y: y_orig,
            status,
            iterations,
            polished: false,
        };
        if s.polish && status != QpStatus::Infeasible {
            if let Some((xp, yp)) = self.polish(&a, &l, &u, &z, &y, &row_scale) {
                let viol = self.max_violation(&xp);
                if viol <= s.polish_feasibility {
                    result.x = xp;
                    result.y = yp;
                    result.max_violation = viol;
                    result.polished = true;
                    result.status = QpStatus::Solved;
                }
            }
        }
        result
    }

    fn rho_vector(&self, l: &[f64], u: &[f64], rho: f64, s: &AdmmSettings) -> Vec<f64> {
        l.iter()
            .zip(u)
            .map(|(lo, hi)| if lo == hi { rho * s.eq_rho_scale } else { rho })
            .collect()
    }

    fn factor(&self, a: &DMat, rho: &[f64], s: &AdmmSettings) -> Cholesky {
        let mut kkt = self.p.clone();
        kkt.add_assign(&a.weighted_gram(rho));
        for i in 0..kkt.rows {
            kkt[(i, i)] += s.sigma;
        }
        Cholesky::factor(&kkt).expect("ADMM system is SPD by construction")
    }

    /// Active-set polish. Starts from the active set suggested by the ADMM
    /// iterate, solves the reduced KKT system, then repairs the guess one row at
    /// a time (drop the worst wrong-signed multiplier, else add the most violated
    /// row) until the point satisfies the KKT conditions.
    #[allow(clippy::too_many_arguments)]
    fn polish(
        &self,
        a: &DMat,
        l: &[f64],
        u: &[f64],
        z: &[f64],
        y: &[f64],
        row_scale: &[f64],
    ) -> Option<(Vec<f64>, Vec<f64>)> {
        let m = l.len();
        // side: 0 equality, -1 lower bound, +1 upper bound
        let mut active: Vec<(usize, i8)> = Vec::new();
        for i in 0..m {
            if l[i] == u[i] {
                active.push((i, 0));
            } else if z[i] - l[i] < -y[i] {
                active.push((i, -1));
            } else if u[i] - z[i] < y[i] {
                active.push((i, 1));
            }
        }
        let tol = 1e-9;
        for _ in 0..30 {
            let (x, mult) = self.solve_reduced(a, l, u, &active)?;
            let wrong = active
                .iter()
                .zip(&mult)
                .enumerate()
                .filter_map(|(k, (&(_, side), &yi))| match side {
                    -1 if yi > tol => Some((k, yi)),
                    1 if yi < -tol => Some((k, -yi)),
                    _ => None,
                })
                .max_by(|p, q| p.1.total_cmp(&q.1));
            if let Some((k, _)) = wrong {
                active.remove(k);
                continue;
            }
            let ax = a.mul_vec(&x);
            let mut worst: Option<(usize, i8, f64)> = None;
            for i in 0..m {
                if active.iter().any(|&(r, _)| r == i) {
                    continue;
                }
                let (v, side) = if l[i] - ax[i] > ax[i] - u[i] {
                    (l[i] - ax[i], -1)
                } else {
                    (ax[i] - u[i], 1)
                };
                if v > tol && worst.is_none_or(|w| v > w.2) {
                    worst = Some((i, side, v));
                }
            }
            if let Some((i, side, _)) = worst {
                active.push((i, side));
                continue;
            }
            let mut y_full = vec![0.0; m];
            for (&(row, _), yi) in active.iter().zip(&mult) {
                y_full[row] = yi * row_scale[row];
            }
            return Some((x, y_full));
        }
        None
    }

    /// Equality-constrained QP on `active`, via a slightly regularized KKT
    /// system plus iterative refinement. Returns `(x, multipliers)`.
    fn solve_reduced(&self, a: &DMat, l: &[f64], u: &[f64], active: &[(usize, i8)]) -> Option<(Vec<f64>, Vec<f64>)> {
        let n = self.q.len();
        let na = active.len();
        let dim = n + na;
        let delta = 1e-11;
        let mut k = DMat::zeros(dim, dim);
        for r in 0..n {
            for c in 0..n {
                k[(r, c)] = self.p[(r, c)];
            }
        }
        for (ai, &(row, _)) in active.iter().enumerate() {
            for c in 0..n {
                k[(n + ai, c)] = a[(row, c)];
                k[(c, n + ai)] = a[(row, c)];
            }
        }
        let mut k_reg = k.clone();
        for r in 0..n {
            k_reg[(r, r)] += delta;
        }
        for r in n..dim {
            k_reg[(r, r)] -= delta;
        }
        let mut rhs = vec![0.0; dim];
        for j in 0..n {
            rhs[j] = -self.q[j];
        }
        for (ai, &(row, side)) in active.iter().enumerate() {
            rhs[n + ai] = if side > 0 { u[row] } else { l[row] };
        }
        let mut sol = lu_solve(&k_reg, &rhs)?;
        for _ in 0..5 {
            let ks = k.mul_vec(&sol);
            let res: Vec<f64> = rhs.iter().zip(&ks).map(|(b, v)| b - v).collect();
            if norm_inf(&res) < 1e-15 {
                break;
            }
            let corr = lu_solve(&k_reg, &res)?;
            for (s, c) in sol.iter_mut().zip(&corr) {
                *s += c;
            }
        }
        Some((sol[..n].to_vec(), sol[n..].to_vec()))
    }
}

fn certifies_infeasibility(a: &DMat, l: &[f64], u: &[f64], dy: &[f64], eps: f64) -> bool {
    let ndy = norm_inf(dy);
    if ndy < 1e-12 {
        return false;
    }
    let atdy = a.tr_mul_vec(dy);
    if norm_inf(&atdy) > eps * ndy {
        return false;
    }
    let mut support = 0.0;
    for i in 0..dy.len() {
        if dy[i] > 0.0 {
            if u[i].is_infinite() {
                return false;
            }
            support += u[i] * dy[i];
        } else if dy[i] < 0.0 {
            if l[i].is_infinite() {
                return false;
            }
            support += l[i] * dy[i];
        }
    }
    support < -eps * ndy
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dm(rows: usize, cols: usize, v: &[f64]) -> DMat {
        DMat {
            rows,
            cols,
            data: v.to_vec(),
        }
    }

    #[test]
    fn solves_textbook_problem() {
        // min 1/2 x^2 + 1/2 y^2 + x  s.t. x + 2y >= 1  ->  (-0.6, 0.8)
        let qp = DenseQp {
            p: DMat::identity(2),
            q: vec![1.0, 0.0],
            a: dm(1, 2, &[1.0, 2.0]),
            l: vec![1.0],
            u: vec![f64::INFINITY],
        };
        let r = qp.solve(&AdmmSettings::default());
        assert_eq!(r.status, QpStatus::Solved);
        assert!((r.x[0] + 0.6).abs() < 1e-12 && (r.x[1] - 0.8).abs() < 1e-12);
    }

    #[test]
    fn detects_infeasible_bounds() {
        // x >= 1 and x <= -1
        let qp = DenseQp {
            p: DMat::identity(1),
            q: vec![0.0],
            a: dm(2, 1, &[1.0, 1.0]),
            l: vec![1.0, f64::NEG_INFINITY],
            u: vec![f64::INFINITY, -1.0],
        };
        let r = qp.solve(&AdmmSettings::default());
        assert_eq!(r.status, QpStatus::Infeasible);
    }

    #[test]
    fn equality_constrained() {
        // min |x|^2 s.t. x0 + x1 + x2 = 3 -> (1,1,1)
        let qp = DenseQp {
            p: DMat::identity(3),
            q: vec![0.0; 3],
            a: dm(1, 3, &[1.0, 1.0, 1.0]),
            l: vec![3.0],
            u: vec![3.0],
        };
        let r = qp.solve(&AdmmSettings::default());
        assert_eq!(r.status, QpStatus::Solved);
        for v in r.x {
            assert!((v - 1.0).abs() < 1e-12);
        }
    }
}
