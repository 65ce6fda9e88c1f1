//! The high-temperature cluster-path series, order by order: at high
//! temperature the corrections beyond the sequential order stay small.

use dwell::bath::{BathModel, QSource};
use dwell::dvr::dvr_from_spectrum;
use dwell::kernels::{DriveSpec, KernelSet};
use dwell::rates::{decay_rate, enumerate_cluster_paths, higher_order_rates};
use dwell::spectrum::{solve_spectrum, GridSpec, PotentialSpec};

fn main() {
    let potential = PotentialSpec::new(1.4).expect("valid barrier");
    let spectrum =
        solve_spectrum(&potential, &GridSpec::default_for(&potential), 4).expect("spectrum");
    let basis = dvr_from_spectrum(&spectrum).expect("dvr");

    println!("cluster paths from the lowest left state:");
    for n_jumps in [2usize, 3, 4] {
        let paths = enumerate_cluster_paths(n_jumps, &basis, 0);
        println!("  {} jumps: {} paths", n_jumps, paths.len());
    }
    println!();

    for temp in [1.0, 1.5, 2.0] {
        let bath = BathModel::new(0.1, 10.0, temp).expect("bath");
        let ks = KernelSet::new(basis.clone(), DriveSpec::none(), QSource::HighTemp(bath));
        print!("T = {temp}:");
        let mut prev = None;
        for n_max in [2usize, 4, 6] {
            let rm = higher_order_rates(&ks, n_max).expect("series");
            let rate = decay_rate(&rm).expect("decay").rate;
            match prev {
                None => print!("  G({n_max}) = {rate:.5e}"),
                Some(p) => print!(
                    "  G({n_max}) = {rate:.5e} ({:+.2}%)",
                    (rate / p - 1.0) * 100.0
                ),
            }
            prev = Some(rate);
        }
        println!();
    }
    println!();
    println!("(the series is only meaningful for temperatures of order the well frequency)");
}
