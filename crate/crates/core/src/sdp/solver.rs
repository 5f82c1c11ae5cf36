//! Infeasible-start primal-dual interior point method with Nesterov-Todd
//! scaling and Mehrotra predictor-corrector steps.
//!
//! The equality constraints are removed up front: a rank-revealing SVD of
//! `A` gives a particular solution `v_p` and an orthonormal null-space basis
//! `N`, and the iteration runs over `v = v_p + N w`. Dependent rows drop out
//! of the SVD; inconsistent ones are reported as infeasible. The Newton step
//! is solved by a QR factorization of the scaled constraint operator rather
//! than by forming its normal matrix, which keeps the dual residual accurate
//! when the blocks approach singularity.
//!
//! Dual problem used for reporting:
//!
//! ```text
//! maximize    b^T y - sum_j <F_j0, Z_j>
//! subject to  A^T y + F*(Z) = c,   Z_j PSD,   F*(Z)_i = sum_j <F_ji, Z_j>
//! ```

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use super::{eig_floor, SdpProblem};
use crate::error::Result;

#[derive(Clone, Debug)]
pub struct SdpOptions {
    pub feas_tol: f64,
    pub gap_tol: f64,
    pub max_iter: usize,
    /// Initial primal point, projected onto the equality constraints; the
    /// slack is shifted to be positive definite.
    pub warm_start: Option<DVector<f64>>,
    pub record_trace: bool,
}

impl Default for SdpOptions {
    fn default() -> Self {
        SdpOptions {
            feas_tol: 1e-8,
            gap_tol: 1e-8,
            max_iter: 200,
            warm_start: None,
            record_trace: false,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SdpStatus {
    Optimal,
    Infeasible,
    Unbounded,
    MaxIterations,
}

/// Per-iteration diagnostics. For infeasible iterates the duality gap
/// splits as `primal - dual = complementarity + residual_correction`, with
/// `complementarity = sum <S_j, Z_j> >= 0`.
#[derive(Clone, Debug)]
pub struct IterateRecord {
    pub iteration: usize,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub complementarity: f64,
    pub residual_correction: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub primal_step: f64,
    pub dual_step: f64,
}

#[derive(Clone, Debug)]
pub struct SdpSolution {
    pub status: SdpStatus,
    pub v: DVector<f64>,
    pub y: DVector<f64>,
    pub z: Vec<DMatrix<f64>>,
    pub objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    /// Smallest eigenvalue of each `F_j(v)`.
    pub min_eigenvalues: Vec<f64>,
    /// Largest absolute entry of `A v - b`.
    pub equality_residual: f64,
    pub iterations: usize,
    pub message: String,
    pub trace: Vec<IterateRecord>,
}

/// Feasibility and relative-gap levels at which a run that stalls or breaks
/// down numerically still counts as solved, judged on its best iterate.
const ACCEPT_FEAS: f64 = 1e-7;
const ACCEPT_GAP: f64 = 1e-6;

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

fn svec_len(n: usize) -> usize {
    n * (n + 1) / 2
}

/// Upper triangle with off-diagonals scaled by `sqrt 2`, so that
/// `svec(A) . svec(B) = <A, B>` for symmetric matrices.
fn svec_into(m: &DMatrix<f64>, out: &mut [f64]) {
    let n = m.nrows();
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            out[k] = if i == j { m[(i, j)] } else { std::f64::consts::SQRT_2 * m[(i, j)] };
            k += 1;
        }
    }
}

fn smat(v: &[f64], n: usize) -> DMatrix<f64> {
    let mut m = DMatrix::zeros(n, n);
    let mut k = 0;
    for j in 0..n {
        for i in 0..=j {
            if i == j {
                m[(i, i)] = v[k];
            } else {
                let x = v[k] / std::f64::consts::SQRT_2;
                m[(i, j)] = x;
                m[(j, i)] = x;
            }
            k += 1;
        }
    }
    m
}

/// Affine matrix map over the reduced variables `w`.
struct ReducedBlock {
    f0: DMatrix<f64>,
    terms: Vec<(usize, DMatrix<f64>)>,
}

impl ReducedBlock {
    fn size(&self) -> usize {
        self.f0.nrows()
    }

    fn linear(&self, w: &DVector<f64>) -> DMatrix<f64> {
        let n = self.size();
        let mut out = DMatrix::zeros(n, n);
        for (k, m) in &self.terms {
            out += m * w[*k];
        }
        out
    }
}

struct Reduced {
    vp: DVector<f64>,
    null: DMatrix<f64>,
    c: DVector<f64>,
    blocks: Vec<ReducedBlock>,
}

impl Reduced {
    fn dim(&self) -> usize {
        self.null.ncols()
    }

    fn adjoint(&self, z: &[DMatrix<f64>]) -> DVector<f64> {
        let mut out = DVector::zeros(self.dim());
        for (blk, zj) in self.blocks.iter().zip(z) {
            for (k, m) in &blk.terms {
                out[*k] += inner(m, zj);
            }
        }
        out
    }
}

/// `None` when `A v = b` has no solution.
fn reduce(problem: &SdpProblem) -> Option<Reduced> {
    let n = problem.num_vars();
    let p = problem.num_equalities();
    let (vp, null) = if p == 0 {
        (DVector::zeros(n), DMatrix::identity(n, n))
    } else {
        // Pad to a square matrix so the SVD returns a full right basis.
        let rows = p.max(n);
        let mut a = DMatrix::zeros(rows, n);
        a.view_mut((0, 0), (p, n)).copy_from(&problem.a);
        let mut b = DVector::zeros(rows);
        b.rows_mut(0, p).copy_from(&problem.b);
        let svd = a.svd(true, true);
        let (u, vt) = (svd.u?, svd.v_t?);
        let sigma = svd.singular_values;
        let smax = sigma.max();
        let cut = 1e-10 * smax.max(f64::MIN_POSITIVE);
        let mut vp = DVector::zeros(n);
        let mut null_cols = Vec::new();
        for i in 0..sigma.len() {
            let row = vt.row(i).transpose();
            if sigma[i] > cut {
                vp += &row * (u.column(i).dot(&b) / sigma[i]);
            } else {
                null_cols.push(row);
            }
        }
        let resid = (&problem.a * &vp - &problem.b).amax();
        if resid > 1e-9 * (1.0 + problem.b.amax()) {
            return None;
        }
        let null = if null_cols.is_empty() {
            DMatrix::zeros(n, 0)
        } else {
            DMatrix::from_columns(&null_cols)
        };
        (vp, null)
    };
    let k = null.ncols();
    let blocks = problem
        .blocks
        .iter()
        .map(|blk| {
            let f0 = blk.evaluate(&vp);
            let s = blk.size();
            let mut terms = Vec::new();
            for col in 0..k {
                let mut m = DMatrix::zeros(s, s);
                for (i, fi) in &blk.terms {
                    let coef = null[(*i, col)];
                    if coef != 0.0 {
                        m += fi * coef;
                    }
                }
                if m.amax() > 1e-15 {
                    terms.push((col, sym(m)));
                }
            }
            ReducedBlock { f0: sym(f0), terms }
        })
        .collect();
    Some(Reduced {
        c: null.transpose() * &problem.c,
        vp,
        null,
        blocks,
    })
}

struct Scaling {
    /// `G^{-1} S G^{-T} = G^T Z G = diag(d)`.
    g: DMatrix<f64>,
    g_inv: DMatrix<f64>,
    d: DVector<f64>,
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Option<Scaling> {
    let ls = s.clone().cholesky()?.l();
    let lz = z.clone().cholesky()?.l();
    let svd = (lz.transpose() * &ls).svd(false, true);
    let qt = svd.v_t?;
    let d = svd.singular_values;
    if d.iter().any(|v| !(*v > 0.0)) {
        return None;
    }
    let n = s.nrows();
    let ls_inv = ls.solve_lower_triangular(&DMatrix::identity(n, n))?;
    let dh = d.map(f64::sqrt);
    let g_inv = DMatrix::from_diagonal(&dh) * &qt * ls_inv;
    let g = &ls * qt.transpose() * DMatrix::from_diagonal(&dh.map(|v| 1.0 / v));
    Some(Scaling { g, g_inv, d })
}

/// Largest `alpha` with `diag(d) + alpha dx` PSD.
fn scaled_max_step(d: &DVector<f64>, dx: &DMatrix<f64>) -> f64 {
    let n = d.len();
    let dh = d.map(|v| 1.0 / v.sqrt());
    let m = DMatrix::from_fn(n, n, |i, j| dx[(i, j)] * dh[i] * dh[j]);
    let lam = SymmetricEigen::new(sym(m)).eigenvalues.min();
    if lam >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / lam
    }
}

struct Direction {
    dw: DVector<f64>,
    ds: Vec<DMatrix<f64>>,
    dz: Vec<DMatrix<f64>>,
    /// Scaled directions `G^{-1} dS G^{-T}` and `G^T dZ G`.
    ds_hat: Vec<DMatrix<f64>>,
    dz_hat: Vec<DMatrix<f64>>,
}

/// Merit, reduced variables, dual blocks and iteration of the best iterate.
type BestIterate = (f64, DVector<f64>, Vec<DMatrix<f64>>, usize);

pub fn solve_sdp(problem: &SdpProblem, opts: &SdpOptions) -> Result<SdpSolution> {
    problem.validate()?;
    let n = problem.num_vars();
    let Some(red) = reduce(problem) else {
        let z = problem.blocks.iter().map(|b| DMatrix::zeros(b.size(), b.size())).collect();
        return Ok(finish(
            problem,
            None,
            SdpStatus::Infeasible,
            DVector::zeros(n),
            z,
            0,
            "inconsistent equality constraints".into(),
            Vec::new(),
        ));
    };
    let k = red.dim();
    let dim: usize = red.blocks.iter().map(|b| b.size()).sum();
    let rows: usize = red.blocks.iter().map(|b| svec_len(b.size())).sum();
    let to_v = |w: &DVector<f64>| &red.vp + &red.null * w;

    let mut w = match &opts.warm_start {
        Some(v0) if v0.len() == n => red.null.transpose() * (v0 - &red.vp),
        _ => DVector::zeros(k),
    };
    let mut s: Vec<DMatrix<f64>> = red
        .blocks
        .iter()
        .map(|blk| {
            let f = &blk.f0 + blk.linear(&w);
            let lam = SymmetricEigen::new(f.clone()).eigenvalues.min();
            let shift = if lam < 1.0 { 1.0 - lam } else { 0.0 };
            f + DMatrix::identity(blk.size(), blk.size()) * shift
        })
        .collect();
    let zscale = 1.0 + problem.c.amax();
    let mut z: Vec<DMatrix<f64>> = red
        .blocks
        .iter()
        .map(|blk| DMatrix::identity(blk.size(), blk.size()) * zscale)
        .collect();

    let base_obj = problem.c.dot(&red.vp);
    let fnorm = 1.0 + red.blocks.iter().map(|b| b.f0.norm()).sum::<f64>();
    let cnorm = 1.0 + problem.c.norm();
    let mut trace = Vec::new();
    let mut steps = (0.0, 0.0);
    let mut stalled = 0;
    let mut best: Option<BestIterate> = None;

    let fallback = |best: Option<BestIterate>,
                    w: DVector<f64>,
                    z: Vec<DMatrix<f64>>,
                    it: usize,
                    reason: &str,
                    trace: Vec<IterateRecord>| {
        match best {
            Some((merit, bw, bz, bit)) if merit <= 1.0 => finish(
                problem,
                Some(&red),
                SdpStatus::Optimal,
                to_v(&bw),
                bz,
                bit,
                format!("converged to acceptable accuracy ({reason} afterwards)"),
                trace,
            ),
            _ => finish(problem, Some(&red), SdpStatus::MaxIterations, to_v(&w), z, it, reason.into(), trace),
        }
    };

    for it in 0..=opts.max_iter {
        let rs: Vec<DMatrix<f64>> = red
            .blocks
            .iter()
            .zip(&s)
            .map(|(blk, sj)| &blk.f0 + blk.linear(&w) - sj)
            .collect();
        let fz = red.adjoint(&z);
        let rc = &red.c - &fz;
        let pobj = base_obj + red.c.dot(&w);
        let f0z: f64 = red.blocks.iter().zip(&z).map(|(b, zj)| inner(&b.f0, zj)).sum();
        let dobj = base_obj - f0z;
        let comp: f64 = s.iter().zip(&z).map(|(a, b)| inner(a, b)).sum();
        let mu = if dim > 0 { comp / dim as f64 } else { 0.0 };
        let pres = rs.iter().map(|m| m.norm()).sum::<f64>() / fnorm;
        let dres = rc.norm() / cnorm;
        let correction = w.dot(&rc) + rs.iter().zip(&z).map(|(a, b)| inner(a, b)).sum::<f64>();
        if opts.record_trace {
            trace.push(IterateRecord {
                iteration: it,
                primal_objective: pobj,
                dual_objective: dobj,
                complementarity: comp,
                residual_correction: correction,
                primal_residual: pres,
                dual_residual: dres,
                primal_step: steps.0,
                dual_step: steps.1,
            });
        }

        let gap_rel = (pobj - dobj).abs() / (1.0 + pobj.abs() + dobj.abs());
        let merit = (pres.max(dres) / ACCEPT_FEAS).max(gap_rel / ACCEPT_GAP);
        if best.as_ref().map_or(true, |b| merit < b.0) {
            best = Some((merit, w.clone(), z.clone(), it));
        }
        if pres <= opts.feas_tol && dres <= opts.feas_tol && gap_rel <= opts.gap_tol {
            return Ok(finish(problem, Some(&red), SdpStatus::Optimal, to_v(&w), z, it, "converged".into(), trace));
        }
        // Farkas ray: F*(Z) negligible against a growing -<F0, Z>.
        if -f0z > 0.0 && (fz.norm() <= 1e-8 * -f0z || -f0z > cnorm / opts.feas_tol) && pres > opts.feas_tol {
            return Ok(finish(problem, Some(&red), SdpStatus::Infeasible, to_v(&w), z, it, "dual objective diverged".into(), trace));
        }
        if pobj < -fnorm.max(cnorm) / opts.feas_tol && pres <= 1e-6 {
            return Ok(finish(problem, Some(&red), SdpStatus::Unbounded, to_v(&w), z, it, "primal objective diverged".into(), trace));
        }
        if it == opts.max_iter {
            break;
        }
        if dim == 0 {
            // No conic constraint: bounded only if the objective vanishes on the null space.
            let status = if red.c.norm() <= opts.feas_tol * cnorm { SdpStatus::Optimal } else { SdpStatus::Unbounded };
            return Ok(finish(problem, Some(&red), status, to_v(&w), z, it, "no PSD blocks".into(), trace));
        }

        let scal: Option<Vec<Scaling>> = s.iter().zip(&z).map(|(sj, zj)| nt_scaling(sj, zj)).collect();
        let Some(scal) = scal else {
            return Ok(fallback(best, w, z, it, "lost positive definiteness", trace));
        };

        // Scaled operator J: column k stacks svec(G^{-1} F_k G^{-T}) over blocks.
        let mut jac = DMatrix::zeros(rows, k);
        let mut off = 0;
        let mut buf = vec![0.0; rows];
        for (blk, sc) in red.blocks.iter().zip(&scal) {
            let len = svec_len(blk.size());
            for (col, m) in &blk.terms {
                let mh = sym(&sc.g_inv * m * sc.g_inv.transpose());
                svec_into(&mh, &mut buf[..len]);
                for r in 0..len {
                    jac[(off + r, *col)] = buf[r];
                }
            }
            off += len;
        }
        let qr = jac.clone().qr();
        let rmat = qr.r();
        let rdiag_max = (0..k).map(|i| rmat[(i, i)].abs()).fold(0.0, f64::max);
        if (0..k).any(|i| rmat[(i, i)].abs() <= 1e-14 * rdiag_max) && k > 0 {
            return Ok(fallback(best, w, z, it, "singular Newton system", trace));
        }
        let rs_hat: Vec<DMatrix<f64>> = scal
            .iter()
            .zip(&rs)
            .map(|(sc, r)| sym(&sc.g_inv * r * sc.g_inv.transpose()))
            .collect();

        let direction = |rhs: &[DMatrix<f64>]| -> Option<Direction> {
            let t_hat: Vec<DMatrix<f64>> = scal
                .iter()
                .zip(rhs)
                .map(|(sc, rj)| {
                    let nn = sc.d.len();
                    DMatrix::from_fn(nn, nn, |i, j| 2.0 * rj[(i, j)] / (sc.d[i] + sc.d[j]))
                })
                .collect();
            let mut stacked = DVector::zeros(rows);
            let mut off = 0;
            for (th, rh) in t_hat.iter().zip(&rs_hat) {
                let len = svec_len(th.nrows());
                svec_into(&(th - rh), &mut stacked.as_mut_slice()[off..off + len]);
                off += len;
            }
            let q = jac.transpose() * stacked - &rc;
            // (J^T J) dw = q with J = QR: R^T R dw = q.
            let tmp = rmat.transpose().solve_lower_triangular(&q)?;
            let dw = rmat.solve_upper_triangular(&tmp)?;
            if dw.iter().any(|x| !x.is_finite()) {
                return None;
            }
            let jdw = &jac * &dw;
            let mut ds_hat = Vec::with_capacity(scal.len());
            let mut dz_hat = Vec::with_capacity(scal.len());
            let mut ds = Vec::with_capacity(scal.len());
            let mut dz = Vec::with_capacity(scal.len());
            let mut off = 0;
            for ((sc, th), rh) in scal.iter().zip(&t_hat).zip(&rs_hat) {
                let nn = sc.d.len();
                let len = svec_len(nn);
                let dsh = smat(&jdw.as_slice()[off..off + len], nn) + rh;
                let dzh = th - &dsh;
                ds.push(sym(&sc.g * &dsh * sc.g.transpose()));
                dz.push(sym(sc.g_inv.transpose() * &dzh * &sc.g_inv));
                ds_hat.push(dsh);
                dz_hat.push(dzh);
                off += len;
            }
            Some(Direction { dw, ds, dz, ds_hat, dz_hat })
        };
        let step_len = |dirs: &[DMatrix<f64>]| {
            scal.iter().zip(dirs).map(|(sc, dx)| scaled_max_step(&sc.d, dx)).fold(f64::INFINITY, f64::min)
        };

        // Predictor
        let r_aff: Vec<DMatrix<f64>> = scal.iter().map(|sc| -DMatrix::from_diagonal(&sc.d.map(|x| x * x))).collect();
        let Some(aff) = direction(&r_aff) else {
            return Ok(fallback(best, w, z, it, "singular Newton system", trace));
        };
        let ap = step_len(&aff.ds_hat).min(1.0);
        let ad = step_len(&aff.dz_hat).min(1.0);
        let mu_aff: f64 = s
            .iter()
            .zip(&aff.ds)
            .zip(z.iter().zip(&aff.dz))
            .map(|((sj, dsj), (zj, dzj))| inner(&(sj + dsj * ap), &(zj + dzj * ad)))
            .sum::<f64>()
            / dim as f64;
        let sigma = if mu > 0.0 { (mu_aff / mu).clamp(0.0, 1.0).powi(3) } else { 0.0 };

        // Corrector
        let r_cor: Vec<DMatrix<f64>> = scal
            .iter()
            .zip(aff.ds_hat.iter().zip(&aff.dz_hat))
            .map(|(sc, (dsh, dzh))| {
                let nn = sc.d.len();
                DMatrix::identity(nn, nn) * (sigma * mu)
                    - DMatrix::from_diagonal(&sc.d.map(|x| x * x))
                    - sym(dsh * dzh)
            })
            .collect();
        let Some(dir) = direction(&r_cor) else {
            return Ok(fallback(best, w, z, it, "singular Newton system", trace));
        };
        let ap = (0.98 * step_len(&dir.ds_hat)).min(1.0);
        let ad = (0.98 * step_len(&dir.dz_hat)).min(1.0);
        steps = (ap, ad);
        w += &dir.dw * ap;
        for (sj, dsj) in s.iter_mut().zip(&dir.ds) {
            *sj = sym(&*sj + dsj * ap);
        }
        for (zj, dzj) in z.iter_mut().zip(&dir.dz) {
            *zj = sym(&*zj + dzj * ad);
        }
        if ap < 1e-10 && ad < 1e-10 {
            stalled += 1;
            if stalled >= 5 {
                return Ok(fallback(best, w, z, it + 1, "step length collapsed", trace));
            }
        } else {
            stalled = 0;
        }
    }
    Ok(fallback(best, w, z, opts.max_iter, "iteration limit", trace))
}

#[allow(clippy::too_many_arguments)]
fn finish(
    problem: &SdpProblem,
    red: Option<&Reduced>,
    status: SdpStatus,
    v: DVector<f64>,
    z: Vec<DMatrix<f64>>,
    iterations: usize,
    message: String,
    trace: Vec<IterateRecord>,
) -> SdpSolution {
    // Equality multipliers: least-squares fit of A^T y = c - F*(Z).
    let mut fz = DVector::zeros(problem.num_vars());
    for (blk, zj) in problem.blocks.iter().zip(&z) {
        for (i, m) in &blk.terms {
            fz[*i] += inner(m, zj);
        }
    }
    let p = problem.num_equalities();
    let y = if p > 0 {
        problem
            .a
            .transpose()
            .svd(true, true)
            .solve(&(&problem.c - &fz), 1e-12)
            .unwrap_or_else(|_| DVector::zeros(p))
    } else {
        DVector::zeros(0)
    };
    let objective = problem.c.dot(&v);
    let dual_objective = match red {
        Some(r) => {
            problem.c.dot(&r.vp)
                - r.blocks.iter().zip(&z).map(|(b, zj)| inner(&b.f0, zj)).sum::<f64>()
        }
        None => f64::NAN,
    };
    let min_eigenvalues = problem
        .blocks
        .iter()
        .map(|b| eig_floor(&b.evaluate(&v)).unwrap_or(f64::NAN))
        .collect();
    let equality_residual = if p > 0 { (&problem.a * &v - &problem.b).amax() } else { 0.0 };
    SdpSolution {
        status,
        objective,
        dual_objective,
        gap: objective - dual_objective,
        min_eigenvalues,
        equality_residual,
        v,
        y,
        z,
        iterations,
        message,
        trace,
    }
}
