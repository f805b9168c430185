use std::time::Instant;

use spectral_collision::direct::{collision_flux_direct, collision_rhs_direct, flux_scale, DEFAULT_LOG_FLOOR};
use spectral_collision::fast::{collision_flux_fast, collision_rhs_fast, Beta, ConvolutionPlan, TermTable};
use spectral_collision::kernels::builtin;
use spectral_collision::{ScalarField, Vector3, VelocityGrid};

fn lumpy(g: VelocityGrid) -> ScalarField {
    ScalarField::from_fn(g, |v| {
        (-(v - Vector3::new(0.5, 0.2, -0.1)).norm_squared() / 0.5).exp()
            + 0.6 * (-(v + Vector3::new(0.4, -0.3, 0.2)).norm_squared() / 0.3).exp()
    })
}

fn max_diff(a: &[Vector3<f64>], b: &[Vector3<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).amax()).fold(0.0, f64::max)
}

#[test]
fn oracle_kernel_small_grids() {
    let table = TermTable::build().unwrap();
    let k = builtin::gaussian_ss_oracle();
    for (l, n0) in [(3.0, 8), (3.0, 10)] {
        let g = VelocityGrid::new(l, n0).unwrap();
        let f = lumpy(g);
        let plan = ConvolutionPlan::new(&g, &k, &table).unwrap();
        let t = Instant::now();
        let pf = collision_flux_fast(&f, &plan, DEFAULT_LOG_FLOOR).unwrap();
        let tf = t.elapsed();
        let t = Instant::now();
        let pd = collision_flux_direct(&f, &k, DEFAULT_LOG_FLOOR);
        let td = t.elapsed();
        let scale = flux_scale(&f, &k);
        let err = max_diff(pf.values(), pd.values()) / pd.max_abs();
        println!("{n0}: {plan:?} fast {tf:?} direct {td:?} rel {err:e} scale {scale:e}");
        assert!(err <= 1e-10, "relative flux difference {err:e}");
        let rf = collision_rhs_fast(&f, &plan, DEFAULT_LOG_FLOOR).unwrap();
        let rd = collision_rhs_direct(&f, &k, DEFAULT_LOG_FLOOR);
        let e = rf.values().iter().zip(rd.values()).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(e <= 1e-10 * rd.max_abs());
    }
}

#[test]
fn plan_bookkeeping() {
    let table = TermTable::build().unwrap();
    let g = VelocityGrid::new(4.0, 16).unwrap();
    let k = builtin::gaussian_ss_relaxation();
    let plan = ConvolutionPlan::new(&g, &k, &table).unwrap();
    assert_eq!(plan.mode_pairs(1), 3);
    assert_eq!(plan.mode_pairs(2), 3);
    assert!(plan.padded_size() >= 32);
    assert_eq!(plan.kernel_spectra_for(Beta::One), 1);
    println!("{plan:?} transforms {:?}", plan.transforms_per_call());
}
