use stochwave::cli::{execute, parse_config, RunConfig};
use stochwave::output::{
    strip_timestamp, ResultFile, CONVERGENCE_COLUMNS, FIT_COLUMNS, SINGLE_RUN_COLUMNS, TRACE_COLUMNS, VELOCITY_COLUMNS,
};

fn run(args: &str) -> (RunConfig, String) {
    let cfg = parse_config(std::iter::once("stochwave").chain(args.split_whitespace())).unwrap();
    let text = execute(&cfg, Some(1)).unwrap();
    (cfg, text)
}

fn is_scientific(cell: &str) -> bool {
    matches!(cell, "nan" | "inf") || (cell.contains('e') && cell.parse::<f64>().is_ok())
}

#[test]
fn trace_schema() {
    let (cfg, text) = run("trace --M 8 --T 0.5 --seed 4 --schemes STM,SEM");
    let file = ResultFile::parse(&text).unwrap();
    assert_eq!(file.columns, TRACE_COLUMNS);
    assert_eq!(file.config, cfg);
    assert_eq!(file.header_value("experiment"), Some("trace"));
    assert_eq!(file.header_value("noise_truncation"), Some("313"));
    assert_eq!(file.header_value("quadrature_points"), Some("3"));
    assert_eq!(file.header_value("samples"), Some("8"));
    assert!(text.starts_with(&format!("# stochwave {}\n", env!("CARGO_PKG_VERSION"))));

    // 51 time points per scheme, schemes in request order.
    assert_eq!(file.rows.len(), 2 * 51);
    assert_eq!(file.rows[0][1], "STM");
    assert_eq!(file.rows[51][1], "SEM");
    let t = file.column("time").unwrap();
    assert_eq!((t[0], t[50]), (0.0, 0.5));
    for row in &file.rows {
        assert!(is_scientific(&row[0]) && is_scientific(&row[2]) && is_scientific(&row[3]), "{row:?}");
    }

    assert_eq!(file.fit_columns, FIT_COLUMNS);
    assert_eq!(file.fits.len(), 2);
    let target: f64 = file.fits[0][2].parse().unwrap();
    assert!((target - 5.552495930937336e-3).abs() < 1e-15);
}

#[test]
fn convergence_schema() {
    let (cfg, text) = run(
        "convergence-space --M 4 --ladder 2^-2..2^-4 --reference 2^-5 --k 2^-6 --T 0.25 --seed 2 --schemes STM,CNM",
    );
    let file = ResultFile::parse(&text).unwrap();
    assert_eq!(file.columns, CONVERGENCE_COLUMNS);
    assert_eq!(file.config, cfg);
    assert_eq!(file.rows.len(), 6);
    assert_eq!(file.column("resolution").unwrap()[..3], [0.25, 0.125, 0.0625]);
    assert!(file.column("ms_error").unwrap().iter().all(|e| *e > 0.0));
    assert!(file.column("diverged").unwrap().iter().all(|d| *d == 0.0));
    let schemes: Vec<_> = file.fits.iter().map(|f| f[0].as_str()).collect();
    assert_eq!(schemes, ["STM", "CNM"]);
    let target: f64 = file.fits[0][2].parse().unwrap();
    assert!((target - 1.0 / 3.0).abs() < 1e-15);
}

#[test]
fn velocity_columns_are_opt_in() {
    let (_, text) = run(
        "convergence-time --M 4 --h 2^-3 --ladder 2^-3..2^-5 --reference 2^-6 --T 0.25 --seed 2 --schemes STM --record-velocity",
    );
    let file = ResultFile::parse(&text).unwrap();
    let expected: Vec<_> = CONVERGENCE_COLUMNS.iter().chain(&VELOCITY_COLUMNS).collect();
    assert_eq!(file.columns.iter().collect::<Vec<_>>(), expected);
    assert!(file.column("velocity_error").unwrap().iter().all(|e| *e > 0.0));
}

#[test]
fn single_run_schema() {
    let (cfg, text) = run("single-run --h 2^-3 --k 2^-4 --T 0.5 --seed 3 --schemes CNM");
    let file = ResultFile::parse(&text).unwrap();
    assert_eq!(file.columns, SINGLE_RUN_COLUMNS);
    assert_eq!(file.config, cfg);
    assert_eq!(file.rows.len(), 9);
    assert!(file.rows.iter().all(|r| r[1] == "CNM"));
    assert!(file.fits.is_empty());
}

#[test]
fn custom_problem_round_trips_through_the_echo() {
    let (cfg, text) = run("single-run --f -u^3 --g 1 --V 0.25*u^4 --u0 sin(pi*x) --v0 0 --h 2^-3 --k 2^-5 --T 0.25 --seed 5");
    assert_eq!(cfg.problem, "custom");
    let file = ResultFile::parse(&text).unwrap();
    assert_eq!(file.config, cfg);
    assert_eq!(strip_timestamp(&execute(&file.config, None).unwrap()), strip_timestamp(&text));
}

#[test]
fn malformed_files_are_rejected() {
    assert!(ResultFile::parse("").is_err());
    assert!(ResultFile::parse("time,scheme\n0,STM\n").is_err());
    let (_, text) = run("single-run --h 2^-3 --k 2^-4 --T 0.25 --seed 3");
    let broken: String = text.lines().filter(|l| !l.starts_with("# config")).map(|l| format!("{l}\n")).collect();
    assert!(ResultFile::parse(&broken).is_err());
}
