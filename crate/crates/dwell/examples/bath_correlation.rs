//! The Ohmic bath correlation function Q(t): quadrature against closed form,
//! the high-temperature asymptote, and a CSV dump of the working table.

use dwell::bath::{
    bath_correlation, bath_correlation_closed, high_temp_q, BathModel, QTable,
};

fn main() {
    let bath = BathModel::new(0.1, 10.0, 0.5).expect("valid bath");

    println!("t        Q' (quad)      Q' (closed)    Q'' (quad)     (gamma/pi) atan(wc t)");
    for &t in &[0.1, 0.5, 1.0, 3.0, 10.0] {
        let q = bath_correlation(t, &bath).expect("quadrature");
        let qc = bath_correlation_closed(t, &bath);
        let atan = (bath.gamma / std::f64::consts::PI) * (bath.omega_c * t).atan();
        println!(
            "{:6.2}  {:+.10e}  {:+.10e}  {:+.10e}  {:+.10e}",
            t, q.re, qc.re, q.im, atan
        );
    }

    println!();
    println!("high-temperature asymptote at T = 2 (slope should approach gamma*T):");
    let hot = BathModel::new(0.1, 10.0, 2.0).expect("valid bath");
    for &t in &[10.0, 20.0, 40.0] {
        let exact = bath_correlation_closed(t, &hot);
        let approx = high_temp_q(t, &hot);
        println!(
            "  t = {:5.1}: exact Q' = {:.6}, high-T Q' = {:.6}",
            t, exact.re, approx.re
        );
    }

    let table = QTable::build(&bath, 0.005, 20.0);
    let path = std::env::temp_dir().join("dwell_qtable.csv");
    let file = std::fs::File::create(&path).expect("create csv");
    table.dump_csv(std::io::BufWriter::new(file)).expect("dump");
    println!();
    println!("table with {} samples written to {}", table.len(), path.display());
}
