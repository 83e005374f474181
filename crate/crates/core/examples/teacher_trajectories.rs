//! Probability-flow trajectories from the analytic mixture teacher.
//!
//! Checks one single-Gaussian solve against its closed form, then writes a
//! small HKDT dataset and a sheet of states along the first trajectories.

use hkd::numcore::Tensor;
use hkd::persist::{read_dataset, write_contact_sheet, write_dataset};
use hkd::teacher::{generate_dataset, pf_ode_solve, GmmSpec, Schedule};

fn main() -> hkd::Result<()> {
    let sched = Schedule::default();
    let mu = Tensor::from_fn(&[1, 4, 4], |i| (i as f64 * 0.4).sin() * 0.5);
    let single = GmmSpec::single(mu.clone(), 0.3)?;
    let x0 = Tensor::from_fn(&[1, 4, 4], |i| (i as f64 * 1.7).cos() * 3.0);
    let k = ((0.09 + sched.epsilon.powi(2)) / (0.09 + sched.horizon.powi(2))).sqrt();
    let exact = Tensor::from_fn(&[1, 4, 4], |i| mu.data()[i] + k * (x0.data()[i] - mu.data()[i]));
    for n in [16, 64, 256] {
        let end = pf_ode_solve(&x0, sched.horizon, sched.epsilon, &single, &sched, n)?.pop().expect("n + 1 states");
        println!("rk4 steps {n:>3}: max error {:.3e}", end.max_abs_diff(&exact));
    }

    let gmm = GmmSpec::procedural([1, 16, 16], 8, 0.2, 1)?;
    let ds = generate_dataset(&gmm, &sched, 16, 9, 32, 0)?;
    let dir = common::out_dir("teacher");
    let path = dir.join("trajectories.hkdt");
    write_dataset(&path, &ds)?;
    assert_eq!(read_dataset(&path)?, ds);
    println!("{} trajectories x {} states -> {}", ds.n_traj(), ds.n_grid(), path.display());

    let (trajs, grids): (Vec<usize>, Vec<usize>) = (0..4).flat_map(|i| (0..ds.n_grid()).map(move |k| (i, k))).unzip();
    let sheet = dir.join("trajectories.png");
    write_contact_sheet(&sheet, &ds.gather(&trajs, &grids)?, ds.n_grid())?;
    println!("times {:?}\nsheet -> {}", ds.times, sheet.display());
    Ok(())
}

mod common;
