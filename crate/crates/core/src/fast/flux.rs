//! FFT evaluation of the collision flux and its divergence.

use nalgebra::{Matrix3, Vector3};
use rayon::prelude::*;

use super::fft3::C64;
use super::plan::{ConvolutionPlan, OutputKind, SourceKind};
use crate::error::{Error, Result};
use crate::grid::{d_plus, log_gradient, GhostPolicy, ScalarField, VectorField};

/// `p_i = h³ f_i Σ_j ω(v_i, v_j) f_j (D_i − D_j)` over interior nodes, by convolution.
pub fn collision_flux_fast(f: &ScalarField, plan: &ConvolutionPlan, f_min: f64) -> Result<VectorField> {
    let grid = *f.grid();
    if &grid != plan.grid() {
        return Err(Error::Config("field grid does not match the convolution plan".into()));
    }
    let n0 = grid.n0();
    let len = grid.len();
    let d = log_gradient(f, f_min);
    let dv = d.values();
    let mask = grid.interior_mask();
    let fm: Vec<f64> = f.values().iter().zip(&mask).map(|(x, &m)| if m { *x } else { 0.0 }).collect();
    let nodes: Vec<Vector3<f64>> = (0..len).map(|i| grid.node(i)).collect();
    let speeds: Vec<f64> = nodes.iter().map(|v| v.norm()).collect();

    let spectra: Vec<Vec<C64>> = plan
        .sources
        .par_iter()
        .map(|&(ni, kind)| {
            let nn = &plan.n_nodes[ni];
            let field: Vec<f64> = (0..len)
                .map(|i| {
                    if fm[i] == 0.0 {
                        return 0.0;
                    }
                    let base = nn[i] * fm[i];
                    let (q, extra) = match kind {
                        SourceKind::F0(q) => (q, 1.0),
                        SourceKind::F1(q, b) => (q, dv[i][b]),
                        SourceKind::G0(q, b) => (q, nodes[i][b]),
                        SourceKind::G1(q) => (q, nodes[i].dot(&dv[i])),
                    };
                    base * extra * speeds[i].powi(q as i32)
                })
                .collect();
            plan.fft.forward(&field, n0)
        })
        .collect();

    let slen = plan.fft.spectrum_len();
    let fields: Vec<Vec<f64>> = plan
        .program
        .par_iter()
        .map(|contribs| {
            let mut acc = vec![C64::new(0.0, 0.0); slen];
            for c in contribs {
                let k = &plan.kernel_spectra[c.kernel];
                let s = &spectra[c.source];
                if plan.kernel_odd[c.kernel] {
                    // i·K·S
                    for ((a, kk), ss) in acc.iter_mut().zip(k).zip(s) {
                        let t = c.coeff * kk;
                        a.re -= t * ss.im;
                        a.im += t * ss.re;
                    }
                } else {
                    for ((a, kk), ss) in acc.iter_mut().zip(k).zip(s) {
                        let t = c.coeff * kk;
                        a.re += t * ss.re;
                        a.im += t * ss.im;
                    }
                }
            }
            plan.fft.inverse(&mut acc, n0)
        })
        .collect();

    let h3 = grid.cell_volume();
    let mut out = vec![Vector3::zeros(); len];
    out.par_iter_mut().enumerate().for_each(|(i, p)| {
        if !mask[i] || f.values()[i] == 0.0 {
            return;
        }
        let v = nodes[i];
        let s = speeds[i];
        let pw = [1.0, 0.0, s * s, 0.0, s * s * s * s];
        let mut a_mat = Matrix3::zeros();
        let mut b_vec = Vector3::zeros();
        for (o, &(mi, kind)) in plan.outputs.iter().enumerate() {
            let base = fields[o][i] * plan.m_nodes[mi][i];
            match kind {
                OutputKind::A(pp, a, b) => a_mat[(a, b)] += base * pw[pp as usize],
                OutputKind::B(pp, a) => b_vec[a] += base * pw[pp as usize],
                OutputKind::X(pp, b) => {
                    let x = base * pw[pp as usize];
                    for a in 0..3 {
                        a_mat[(a, b)] += v[a] * x;
                    }
                }
                OutputKind::Y(pp) => b_vec += v * (base * pw[pp as usize]),
            }
        }
        *p = (a_mat * dv[i] - b_vec) * (h3 * f.values()[i]);
    });
    VectorField::from_values(grid, out)
}

/// Divergence of [`collision_flux_fast`] with zero ghosts.
pub fn collision_rhs_fast(f: &ScalarField, plan: &ConvolutionPlan, f_min: f64) -> Result<ScalarField> {
    let p = collision_flux_fast(f, plan, f_min)?;
    Ok(d_plus(&p, &GhostPolicy::ZeroExtend))
}
