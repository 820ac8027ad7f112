use std::path::Path;
use std::process::ExitCode;

use anyhow::{anyhow, Result};
use choreo_core::detectors::DetectorKind;
use choreo_core::qos::{sweep_thresholds, QosError, SweepSpec};
use serde_json::json;

use crate::config::load;
use crate::output::{ensure_dir, write_atomic};

pub fn run(config: &Path, out: &Path, seed: Option<u64>) -> Result<ExitCode> {
    let mut spec: SweepSpec = load(config)?;
    if let Some(s) = seed {
        spec.seed = s;
    }
    let result = sweep_thresholds(&spec).map_err(|e| match e {
        QosError::InvalidSpec { field, msg } => anyhow!("{}: field `{field}`: {msg}", config.display()),
        other => anyhow!("{}: {other}", config.display()),
    })?;
    ensure_dir(out)?;
    let mut detectors = Vec::new();
    for kind in DetectorKind::ALL {
        let Some(first) = result.for_kind(kind).next() else { continue };
        let file = format!("{kind}.csv");
        write_atomic(out, &file, result.to_csv(kind).as_bytes())?;
        let reports: Vec<_> = result.for_kind(kind).collect();
        detectors.push(json!({
            "kind": kind,
            "csv": file,
            "points": reports.len(),
            "censored_points": reports.iter().filter(|r| r.censored).count(),
            "run_metadata": first.run_metadata,
        }));
        println!("{kind}: {} points -> {}", reports.len(), out.join(&file).display());
    }
    let metadata = json!({
        "mode": "benchmark",
        "master_seed": spec.seed,
        "sampling_period": spec.sampling_period(),
        "spec": spec,
        "detectors": detectors,
    });
    write_atomic(out, "metadata.json", serde_json::to_string_pretty(&metadata)?.as_bytes())?;
    Ok(ExitCode::SUCCESS)
}
