//! Solve the double well and inspect its discrete variable representation:
//! eigenvalues, tunneling splittings, position matrix, DVR elements.

use dwell::dvr::dvr_from_spectrum;
use dwell::spectrum::{position_matrix, solve_spectrum, GridSpec, PotentialSpec};

fn main() {
    let potential = PotentialSpec::new(1.4).expect("valid barrier");
    let grid = GridSpec::default_for(&potential);
    let spectrum = solve_spectrum(&potential, &grid, 4).expect("spectrum");

    println!("double well, barrier height 1.4 (internal units)");
    println!("minima at +-{:.4}", potential.minima_separation / 2.0);
    println!();
    println!("lowest levels:");
    for (n, e) in spectrum.energies.iter().enumerate() {
        println!("  E{} = {:+.8}", n + 1, e);
    }
    let spl = spectrum.splittings();
    println!("tunneling splittings: D1 = {:.6e}, D2 = {:.6e}", spl[0], spl[1]);
    println!("interdoublet gap    : {:.6}", spectrum.mean_doublet_gap());
    println!();

    let q = position_matrix(&spectrum);
    println!("position matrix <m|q|n>:");
    for m in 0..4 {
        let row: Vec<String> = (0..4).map(|n| format!("{:+.5}", q[(m, n)])).collect();
        println!("  [{}]", row.join(", "));
    }
    let b = 0.5 * (q[(0, 3)] - q[(1, 2)]);
    println!("cross-doublet asymmetry b = {:+.5e}", b);
    println!();

    let basis = dvr_from_spectrum(&spectrum).expect("dvr");
    println!("DVR position eigenvalues: {:?}", basis.lambda);
    println!("transition elements Delta (zero diagonal):");
    for mu in 0..4 {
        let row: Vec<String> = (0..4)
            .map(|nu| format!("{:+.5}", basis.delta[(mu, nu)]))
            .collect();
        println!("  [{}]", row.join(", "));
    }
    println!("on-site energies F: {:?}", basis.onsite);
}
