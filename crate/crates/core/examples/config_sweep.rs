//! A sweep driven by a TOML config, written to CSV the way the CLI does.

use rbc_lab::cli::execute_sweep;
use rbc_lab::config::RunConfig;

const CONFIG: &str = r#"
name = "example"
L = [16, 32]
p = [0.25, 0.5, 0.75]
n_traj = 200
master_seed = 9
"#;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = RunConfig::parse(CONFIG)?;
    println!("resolved config:\n{}", cfg.to_toml());
    let dir = std::env::temp_dir().join("rbc-lab-config-sweep");
    let ds = execute_sweep(&cfg, &dir, "example", 0)?;
    let csv = dir.join("sweep.csv");
    ds.save(&csv)?;
    println!("{}", std::fs::read_to_string(&csv)?);
    Ok(())
}
