// Writing a result file from a TOML configuration and reading it back.

use stochwave::cli::{execute, RunConfig};
use stochwave::output::{emit, ResultFile};

const CONFIG: &str = r#"
command = "convergence-time"
problem = "sine-gordon-multiplicative"
schemes = ["STM", "SEM"]
h = 0.0625
ladder = [0.125, 0.0625, 0.03125]
reference = 0.0078125
t_end = 0.5
samples = 16
seed = 99

[noise]
kind = "white"
"#;

fn main() -> stochwave::Result<()> {
    let cfg = RunConfig::from_toml(CONFIG)?;
    let text = execute(&cfg, None)?;
    let path = std::env::temp_dir().join("stochwave-example.csv");
    emit(&text, Some(&path))?;

    let file = ResultFile::read(&path)?;
    println!("{}: columns {:?}", path.display(), file.columns);
    println!("seed {} and J = {}", file.config.seed, file.header_value("noise_truncation").unwrap_or("?"));
    let errors = file.column("ms_error")?;
    for (row, e) in file.rows.iter().zip(errors) {
        println!("  {} {} {e:.4e}", row[1], row[0]);
    }
    for fit in &file.fits {
        println!("  {} slope {}", fit[0], fit[1]);
    }
    assert_eq!(file.config, cfg);
    Ok(())
}
