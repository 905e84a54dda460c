use crate::output::{load_config, suite_status, ConfigRecord, Manifest, OutRoot, RunDir};
use crate::Status;
use anyhow::Result;
use ricci_entropy::scenario::zoo;
use ricci_entropy::verify::{run_suite, suite};
use std::path::PathBuf;

/// Runs `suite_name` on the built-ins selected by `selection` (`none` for no
/// built-ins) and on every scenario file in `configs`.
pub fn cmd_verify(suite_name: &str, selection: &str, configs: &[PathBuf], root: &OutRoot) -> Result<Status> {
    suite(suite_name)?;
    let mut scenarios = if selection == "none" { Vec::new() } else { zoo(selection)? };
    let mut records = Vec::new();
    for sc in &scenarios {
        records.push(ConfigRecord::new(sc, None, None)?);
    }
    for path in configs {
        let (sc, raw) = load_config(path)?;
        records.push(ConfigRecord::new(&sc, Some(path), Some(&raw))?);
        scenarios.push(sc);
    }
    if scenarios.is_empty() {
        anyhow::bail!("no scenarios selected");
    }
    let label = format!("verify-{}-{}", suite_name, selection.replace(',', "+"));
    let mut dir = RunDir::create(root.path.join(label))?;
    let mut manifest = Manifest::new(records);
    let report = manifest
        .timings
        .time("suite", || run_suite(&[suite_name.to_string()], &scenarios));
    let report = match report {
        Ok(r) => r,
        Err(e) => {
            let err = anyhow::Error::from(e);
            manifest.finish(&mut dir, crate::classify(&err) as u8)?;
            return Err(err);
        }
    };
    print!("{}", report.table());
    dir.write_suite(&report)?;
    let status = suite_status(&report);
    manifest.finish(&mut dir, status as u8)?;
    println!("wrote {}", dir.path.display());
    Ok(status)
}
