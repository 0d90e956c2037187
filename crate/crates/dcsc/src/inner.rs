//! Inner ADMM for the regularized splitting subproblem: the elementwise
//! l1 proximal update, the matrix-free conjugate-gradient solve of the
//! Kronecker-sum graph system, and the sweep that chains them.

use crate::coeffs::CoeffMapSet;
use crate::error::{Error, Result};
use crate::graph::{DualGraphPrior, GraphPrior};
use ndarray::{Array2, ArrayView2, Zip};
use rayon::prelude::*;

/// Conjugate-gradient settings with relative-residual stopping.
#[derive(Debug, Clone)]
pub struct CgConfig {
    pub tol: f64,
    pub max_iter: usize,
    /// Optional diagonal (Jacobi) preconditioner.
    pub jacobi: bool,
}

impl Default for CgConfig {
    fn default() -> Self {
        CgConfig { tol: 1e-5, max_iter: 500, jacobi: false }
    }
}

impl CgConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) {
            return Err(Error::Parameter(format!("cg tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter < 1 {
            return Err(Error::Parameter("cg max_iter must be >= 1".into()));
        }
        Ok(())
    }
}

/// sign(v) * max(|v| - t, 0)
pub fn soft_threshold(value: f64, threshold: f64) -> Result<f64> {
    if threshold < 0.0 {
        return Err(Error::Parameter(format!("threshold must be nonnegative, got {threshold}")));
    }
    Ok(shrink(value, threshold))
}

#[inline]
fn shrink(v: f64, t: f64) -> f64 {
    if v > t {
        v - t
    } else if v < -t {
        v + t
    } else {
        0.0
    }
}

/// Closed-form minimizer of
///   lambda ||y||_1 + rho/2 ||x - y + u||^2 + eta/2 ||y - z + v||^2:
/// soft threshold of the penalty-weighted average at lambda/(rho+eta).
pub fn y_update(
    x: &CoeffMapSet,
    u: &CoeffMapSet,
    z: &CoeffMapSet,
    v: &CoeffMapSet,
    lambda: f64,
    rho: f64,
    eta: f64,
) -> Result<CoeffMapSet> {
    if lambda < 0.0 {
        return Err(Error::Parameter(format!("lambda must be nonnegative, got {lambda}")));
    }
    if !(rho > 0.0) || !(eta > 0.0) {
        return Err(Error::Parameter(format!("penalties must be positive, got rho={rho}, eta={eta}")));
    }
    if !x.same_shape(u) || !x.same_shape(z) || !x.same_shape(v) {
        return Err(Error::Dimension("y_update operands differ in shape".into()));
    }
    let denom = rho + eta;
    let t = lambda / denom;
    let mut out = x.clone();
    let mut data = out.data_mut().view_mut();
    Zip::from(&mut data)
        .and(u.data())
        .and(z.data())
        .and(v.data())
        .for_each(|o, &uu, &zz, &vv| {
            let mid = (rho * (*o + uu) + eta * (zz - vv)) / denom;
            *o = shrink(mid, t);
        });
    Ok(out)
}

/// Applies (alpha Lc (x) I + beta I (x) Lr + eta I) to a map, matrix-free:
/// alpha Z Lc + beta Lr Z + eta Z.
pub fn kron_operator_apply(
    z: ArrayView2<f64>,
    prior: &DualGraphPrior,
    eta: f64,
) -> Result<Array2<f64>> {
    if !prior.dims_match(z.nrows(), z.ncols()) {
        return Err(Error::Dimension(format!(
            "prior graphs are {}x{} but map is {}x{}",
            prior.row.size(),
            prior.column.size(),
            z.nrows(),
            z.ncols()
        )));
    }
    let mut out = GraphPrior::Dual(prior.clone()).apply(z);
    Zip::from(&mut out).and(&z).for_each(|o, &zz| *o += eta * zz);
    Ok(out)
}

/// Matrix-free preconditioned conjugate gradient with relative-residual
/// stopping; verifies the true residual before declaring convergence.
fn cg_solve(
    apply: &dyn Fn(ArrayView2<f64>) -> Array2<f64>,
    b: ArrayView2<f64>,
    x0: Option<ArrayView2<f64>>,
    diag: Option<&Array2<f64>>,
    cfg: &CgConfig,
) -> Result<(Array2<f64>, usize)> {
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok((Array2::zeros(b.raw_dim()), 0));
    }
    let mut x = match x0 {
        Some(w) => w.to_owned(),
        None => Array2::zeros(b.raw_dim()),
    };
    let mut r = &b.to_owned() - &apply(x.view());
    let precond = |r: &Array2<f64>| -> Array2<f64> {
        match diag {
            Some(d) => {
                let mut out = r.clone();
                Zip::from(&mut out).and(d).for_each(|o, &dv| *o /= dv);
                out
            }
            None => r.clone(),
        }
    };
    let mut zvec = precond(&r);
    let mut p = zvec.clone();
    let mut rz: f64 = r.iter().zip(zvec.iter()).map(|(a, b)| a * b).sum();
    let mut iterations = 0usize;

    loop {
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm / b_norm <= cfg.tol {
            // guard against residual-recursion drift
            let true_r = &b.to_owned() - &apply(x.view());
            let true_norm = true_r.iter().map(|v| v * v).sum::<f64>().sqrt();
            if true_norm / b_norm <= cfg.tol {
                return Ok((x, iterations));
            }
            r = true_r;
            zvec = precond(&r);
            p = zvec.clone();
            rz = r.iter().zip(zvec.iter()).map(|(a, b)| a * b).sum();
        }
        if iterations >= cfg.max_iter {
            return Err(Error::CgDiverged { residual: r_norm / b_norm, iterations });
        }
        let ap = apply(p.view());
        let pap: f64 = p.iter().zip(ap.iter()).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(Error::CgDiverged { residual: r_norm / b_norm, iterations });
        }
        let alpha = rz / pap;
        Zip::from(&mut x).and(&p).for_each(|xx, &pp| *xx += alpha * pp);
        Zip::from(&mut r).and(&ap).for_each(|rr, &aa| *rr -= alpha * aa);
        zvec = precond(&r);
        let rz_new: f64 = r.iter().zip(zvec.iter()).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        Zip::from(&mut p).and(&zvec).for_each(|pp, &z2| *pp = z2 + beta * *pp);
        iterations += 1;
    }
}

/// Solves (graph operator + eta I) z_k = eta (y_k + v_k) for every filter
/// by matrix-free CG; the K systems are independent and run in parallel.
/// When the prior is inert the system collapses to z = y + v exactly.
/// Returns the solution and the total CG iteration count.
pub fn z_update(
    y: &CoeffMapSet,
    v: &CoeffMapSet,
    prior: &GraphPrior,
    eta: f64,
    cfg: &CgConfig,
    warm: Option<&CoeffMapSet>,
) -> Result<(CoeffMapSet, usize)> {
    if !(eta > 0.0) {
        return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
    }
    cfg.validate()?;
    if !y.same_shape(v) {
        return Err(Error::Dimension("y and v shapes differ".into()));
    }
    if !prior.dims_match(y.height(), y.width()) {
        return Err(Error::Dimension("prior graphs do not match map shape".into()));
    }

    if prior.is_inert() {
        let mut z = y.clone();
        Zip::from(z.data_mut()).and(v.data()).for_each(|zz, &vv| *zz += vv);
        return Ok((z, 0));
    }

    let diag = if cfg.jacobi {
        let mut d = prior.diagonal(y.height(), y.width());
        d.mapv_inplace(|x| x + eta);
        Some(d)
    } else {
        None
    };
    let apply = |t: ArrayView2<f64>| -> Array2<f64> {
        let mut out = prior.apply(t);
        Zip::from(&mut out).and(&t).for_each(|o, &tt| *o += eta * tt);
        out
    };

    let solves: Result<Vec<(Array2<f64>, usize)>> = (0..y.filters())
        .into_par_iter()
        .map(|k| {
            let b = Array2::from_shape_fn((y.height(), y.width()), |idx| {
                eta * (y.map(k)[idx] + v.map(k)[idx])
            });
            cg_solve(&apply, b.view(), warm.map(|w| w.map(k)), diag.as_ref(), cfg)
        })
        .collect();
    let solves = solves?;

    let mut z = CoeffMapSet::zeros(y.filters(), y.height(), y.width())?;
    let mut total = 0;
    for (k, (map, iters)) in solves.into_iter().enumerate() {
        z.map_mut(k).assign(&map);
        total += iters;
    }
    Ok((z, total))
}

/// Splitting state carried across outer iterations: the graph-side
/// variable, its scaled multipliers, and the inner penalty.
#[derive(Debug, Clone)]
pub struct InnerState {
    pub z: CoeffMapSet,
    pub v: CoeffMapSet,
    pub eta: f64,
    pub sweeps_run: usize,
}

impl InnerState {
    pub fn new(filters: usize, height: usize, width: usize, eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::Parameter(format!("eta must be positive, got {eta}")));
        }
        Ok(InnerState {
            z: CoeffMapSet::zeros(filters, height, width)?,
            v: CoeffMapSet::zeros(filters, height, width)?,
            eta,
            sweeps_run: 0,
        })
    }
}

/// One or more warm-started inner sweeps: prox update of y, CG solve of z,
/// then the exact multiplier step v <- v + y - z. Returns the new y and
/// the total CG iterations spent.
pub fn inner_admm_step(
    x: &CoeffMapSet,
    u: &CoeffMapSet,
    state: &mut InnerState,
    prior: &GraphPrior,
    lambda: f64,
    rho: f64,
    sweeps: usize,
    cfg: &CgConfig,
) -> Result<(CoeffMapSet, usize)> {
    if sweeps < 1 {
        return Err(Error::Parameter("inner sweeps must be >= 1".into()));
    }
    if !x.same_shape(u) || !x.same_shape(&state.z) {
        return Err(Error::Dimension("inner state does not match outer maps".into()));
    }
    let mut y = None;
    let mut total_cg = 0;
    for _ in 0..sweeps {
        let y_new = y_update(x, u, &state.z, &state.v, lambda, rho, state.eta)?;
        let (z_new, iters) = z_update(&y_new, &state.v, prior, state.eta, cfg, Some(&state.z))?;
        // v' = v + y' - z', kept exact for the multiplier identity
        Zip::from(state.v.data_mut())
            .and(y_new.data())
            .and(z_new.data())
            .for_each(|vv, &yy, &zz| *vv = (*vv + yy) - zz);
        state.z = z_new;
        state.sweeps_run += 1;
        total_cg += iters;
        y = Some(y_new);
    }
    Ok((y.expect("at least one sweep"), total_cg))
}
