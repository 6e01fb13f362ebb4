//! Writes the built-in scenarios and the network A run configuration.
//!
//! `cargo run -p pro-sim --example export -- <repo root>`

use std::fs;
use std::path::PathBuf;

use pro_core::metrics::BudgetSpec;
use pro_core::policy::RuleKind;
use pro_sim::canonical::{self, Size};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let root = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| ".".into()));
    let dir = root.join("scenarios");
    fs::create_dir_all(&dir)?;
    for sc in canonical::all(1, Size::FULL)? {
        fs::write(dir.join(format!("{}.json", sc.name)), serde_json::to_string_pretty(&sc)? + "\n")?;
    }
    let cfg = canonical::base_config(RuleKind::A, None);
    fs::create_dir_all(root.join("configs"))?;
    fs::write(root.join("configs/network_a.toml"), toml::to_string(&cfg)?)?;

    // the same with SMS spend priced in and budgeted, as after the s2 change
    let mut sms = cfg;
    sms.metrics.push(canonical::metric("sms_dollars").ok_or("no sms metric")?);
    sms.weights.get_or_insert_with(Vec::new).push(1.0);
    sms.budgets.push(BudgetSpec::new("sms_dollars", 20.0));
    fs::write(root.join("configs/network_a_sms.toml"), toml::to_string(&sms)?)?;
    Ok(())
}
