//! Run a subset of the identity suite from an in-memory configuration, the
//! same way `wfnls verify-identities --config run.toml` does.

use wavefront_nls::experiments::{verify_identities, Command, RunConfig};
use wavefront_nls::Result;

const CONFIG: &str = r#"
[grid]
points = 1024
half_width = 40.0

[run]
checks = "plancherel,inversion,window_closed_form,pairing_t0_value,free_duhamel"
"#;

fn main() -> Result<()> {
    let mut cfg = RunConfig::parse(CONFIG, RunConfig::defaults(Command::VerifyIdentities))?;
    cfg.apply_override("window.b=0.5")?;
    let report = verify_identities(&cfg)?;
    report.write_text(std::io::stdout().lock())?;
    Ok(())
}
