//! Averaged transfer rate vs drive amplitude at resonance, for a warm and a
//! cold bath. The cold curve develops its maximum at finite amplitude.
//!
//! Writes rates_vs_s.csv to the working directory.

use std::io::Write;

use dwell::bath::{BathModel, QSource, QTable};
use dwell::dvr::dvr_from_spectrum;
use dwell::kernels::{DriveSpec, KernelSet};
use dwell::rates::{averaged_rates, decay_rate};
use dwell::spectrum::{solve_spectrum, GridSpec, PotentialSpec};

fn main() {
    let potential = PotentialSpec::new(1.4).expect("valid barrier");
    let spectrum =
        solve_spectrum(&potential, &GridSpec::default_for(&potential), 4).expect("spectrum");
    let basis = dvr_from_spectrum(&spectrum).expect("dvr");
    let omega = spectrum.mean_doublet_gap();
    println!("resonant drive at Omega = {:.4}", omega);

    let temps = [0.1, 0.02];
    let n_points = 26;
    let mut columns: Vec<Vec<f64>> = Vec::new();
    for &temp in &temps {
        let bath = BathModel::new(0.1, 10.0, temp).expect("bath");
        let table = QTable::auto(&bath, 2.8);
        let mut rates = Vec::with_capacity(n_points);
        for i in 0..n_points {
            let s = 2.5 * i as f64 / (n_points - 1) as f64;
            let drive = if s == 0.0 {
                DriveSpec::none()
            } else {
                DriveSpec::sinusoidal(s, omega).expect("drive")
            };
            let ks = KernelSet::new(basis.clone(), drive, QSource::Tabulated(table.clone()));
            let rate = decay_rate(&averaged_rates(&ks).expect("rates")).expect("decay");
            rates.push(rate.rate);
        }
        let peak = rates
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap();
        println!(
            "T = {:5.2}: rate(0) = {:.4e}, peak {:.4e} at s = {:.2}",
            temp,
            rates[0],
            peak.1,
            2.5 * peak.0 as f64 / (n_points - 1) as f64
        );
        columns.push(rates);
    }

    let mut file = std::fs::File::create("rates_vs_s.csv").expect("create csv");
    writeln!(file, "s,Gamma_T0.1,Gamma_T0.02").expect("write");
    for i in 0..n_points {
        let s = 2.5 * i as f64 / (n_points - 1) as f64;
        writeln!(
            file,
            "{:.6},{:.11e},{:.11e}",
            s, columns[0][i], columns[1][i]
        )
        .expect("write");
    }
    println!("wrote rates_vs_s.csv");
}
