//! Decay rate vs the number of retained levels: static truncation converges
//! with two doublets, resonant driving pulls higher states in.
//!
//! Writes rate_vs_N.csv to the working directory.

use std::io::Write;

use dwell::bath::{BathModel, QSource, QTable};
use dwell::dvr::dvr_from_spectrum;
use dwell::kernels::{DriveSpec, KernelSet};
use dwell::rates::{averaged_rates, decay_rate};
use dwell::spectrum::{solve_spectrum, GridSpec, PotentialSpec};

fn main() {
    let potential = PotentialSpec::new(1.4).expect("valid barrier");
    let bath = BathModel::new(0.1, 10.0, 0.1).expect("bath");
    let levels = [2usize, 4, 6, 8];

    let mut static_rates = Vec::new();
    let mut driven_rates = Vec::new();
    for &n in &levels {
        let spectrum =
            solve_spectrum(&potential, &GridSpec::default_for(&potential), n).expect("spectrum");
        let basis = dvr_from_spectrum(&spectrum).expect("dvr");
        let min_xi2 = basis
            .lambda
            .windows(2)
            .map(|w| (w[1] - w[0]).powi(2))
            .fold(f64::INFINITY, f64::min);
        let table = QTable::auto(&bath, min_xi2);

        let ks0 = KernelSet::new(basis.clone(), DriveSpec::none(), QSource::Tabulated(table.clone()));
        let r0 = decay_rate(&averaged_rates(&ks0).expect("rates")).expect("decay").rate;
        static_rates.push(r0);

        let drive = DriveSpec::sinusoidal(1.0, 0.815).expect("drive");
        let ks1 = KernelSet::new(basis, drive, QSource::Tabulated(table));
        let r1 = decay_rate(&averaged_rates(&ks1).expect("rates")).expect("decay").rate;
        driven_rates.push(r1);
        println!("N = {n}: static {r0:.5e}, driven {r1:.5e}");
    }

    let rel = |a: f64, b: f64| ((a - b) / b).abs();
    println!(
        "static  |G(4)-G(8)|/G(8) = {:.4}",
        rel(static_rates[1], static_rates[3])
    );
    println!(
        "driven  |G(4)-G(8)|/G(8) = {:.4}",
        rel(driven_rates[1], driven_rates[3])
    );

    let mut file = std::fs::File::create("rate_vs_N.csv").expect("create csv");
    writeln!(file, "N,Gamma_static,Gamma_driven").expect("write");
    for (i, &n) in levels.iter().enumerate() {
        writeln!(file, "{},{:.11e},{:.11e}", n, static_rates[i], driven_rates[i]).expect("write");
    }
    println!("wrote rate_vs_N.csv");
}
