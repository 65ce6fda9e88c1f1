//! Thin command-line front end: `simulate <config-file> [--mode M] [--out DIR]`.

use std::path::PathBuf;
use std::process::ExitCode;

use dwell::cli::{parse_config, run_sweep, Mode};

fn usage() -> ! {
    eprintln!("usage: simulate <config-file> [--mode M] [--out DIR]");
    eprintln!("modes: gme | markov | avg-rates | higher-order | rate-vs-n");
    std::process::exit(1);
}

fn main() -> ExitCode {
    let mut args = std::env::args().skip(1);
    let mut config_path: Option<PathBuf> = None;
    let mut mode_override: Option<Mode> = None;
    let mut out_override: Option<PathBuf> = None;

    while let Some(arg) = args.next() {
        match arg.as_str() {
            "--mode" => match args.next().map(|m| m.parse::<Mode>()) {
                Some(Ok(m)) => mode_override = Some(m),
                Some(Err(e)) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(1);
                }
                None => usage(),
            },
            "--out" => match args.next() {
                Some(dir) => out_override = Some(PathBuf::from(dir)),
                None => usage(),
            },
            "--help" | "-h" => usage(),
            other if config_path.is_none() => config_path = Some(PathBuf::from(other)),
            _ => usage(),
        }
    }
    let config_path = match config_path {
        Some(p) => p,
        None => usage(),
    };

    let text = match std::fs::read_to_string(&config_path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", config_path.display());
            return ExitCode::from(1);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    if let Some(m) = mode_override {
        cfg.mode = m;
    }
    let out_dir = out_override
        .or_else(|| cfg.out.clone())
        .unwrap_or_else(|| PathBuf::from("."));

    match run_sweep(&cfg, &out_dir) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
