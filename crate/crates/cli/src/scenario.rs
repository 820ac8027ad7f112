use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use choreo_core::runtime::{run_scenario, RuntimeError, Scenario};
use choreo_core::simnet::write_log;

use crate::config::load;
use crate::output::{ensure_dir, write_atomic};

pub fn run(config: &Path, out: &Path, seed: Option<u64>, enforce: bool) -> Result<ExitCode> {
    let mut scenario: Scenario = load(config)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let outcome = run_scenario(&scenario).map_err(|e| match e {
        RuntimeError::InvalidScenario { field, msg } => anyhow!("{}: field `{field}`: {msg}", config.display()),
        other => anyhow!("{}: {other}", config.display()),
    })?;
    ensure_dir(out)?;
    let mut log = Vec::new();
    write_log(&mut log, &outcome.log)?;
    write_atomic(out, "events.jsonl", &log)?;
    write_atomic(out, "controller_state.json", serde_json::to_string_pretty(&outcome.state)?.as_bytes())?;
    write_atomic(out, "assertions.json", serde_json::to_string_pretty(&outcome.assertions)?.as_bytes())?;

    let failed: Vec<_> = outcome.assertions.iter().filter(|a| !a.passed).collect();
    for a in &outcome.assertions {
        let tag = if a.passed { "PASS" } else { "FAIL" };
        println!("{tag} {} — {}", serde_json::to_string(&a.assertion)?, a.detail);
    }
    println!("{} events -> {}", outcome.log.len(), out.join("events.jsonl").display());
    if failed.is_empty() || !enforce {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!("{} assertion(s) failed:", failed.len());
    for a in failed {
        eprintln!("  {}: {}", serde_json::to_string(&a.assertion)?, a.detail);
    }
    Ok(ExitCode::from(1))
}
