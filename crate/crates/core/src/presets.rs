//! Named experiment presets: the accuracy-table grid over datasets, modes
//! and client counts, plus labeled-ratio / K / T_l sweeps. Every preset is
//! a plain key=value override set on top of the config defaults.

use std::collections::BTreeMap;

#[derive(Debug, Clone)]
pub struct Preset {
    pub name: String,
    pub dataset: String,
    pub settings: Vec<(&'static str, String)>,
}

impl Preset {
    pub fn to_map(&self) -> BTreeMap<String, String> {
        let mut map = BTreeMap::new();
        map.insert("dataset".to_string(), self.dataset.clone());
        for (k, v) in &self.settings {
            map.insert((*k).to_string(), v.clone());
        }
        map
    }
}

const DATASETS: &[&str] = &["cora", "citeseer", "synthetic60"];
const MODES: &[&str] = &["local", "fedavg", "fedgl", "spreadfgl"];
const CLIENT_COUNTS: &[usize] = &[6, 9, 12, 15];

fn base(name: String, dataset: &str, mode: &str, clients: usize) -> Preset {
    let servers = if mode == "spreadfgl" { 3 } else { 1 };
    let mut settings = vec![
        ("mode", mode.to_string()),
        ("clients", clients.to_string()),
        ("servers", servers.to_string()),
        ("topology", "ring".to_string()),
        ("labeled_ratio", "0.3".to_string()),
    ];
    // An unweighted trace penalty dominates the cross-entropy; run the
    // regularizer at a small coefficient.
    if mode == "spreadfgl" {
        settings.push(("trace_lambda", "0.001".to_string()));
    }
    // The big citation graphs use the cheap end of the stable K range.
    if dataset != "synthetic60" {
        settings.push(("kappa", "10".to_string()));
    }
    Preset {
        name,
        dataset: dataset.to_string(),
        settings,
    }
}

pub fn all() -> Vec<Preset> {
    let mut out = Vec::new();
    // Accuracy-table grid.
    for &ds in DATASETS {
        for &mode in MODES {
            for &m in CLIENT_COUNTS {
                out.push(base(format!("{ds}-{mode}-m{m}"), ds, mode, m));
            }
        }
    }
    // Labeled-ratio sweep.
    for &ds in &["cora", "citeseer"] {
        for pct in [20usize, 30, 40, 50, 60] {
            let mut p = base(format!("{ds}-spreadfgl-m6-ratio{pct}"), ds, "spreadfgl", 6);
            p.settings
                .retain(|(k, _)| *k != "labeled_ratio");
            p.settings
                .push(("labeled_ratio", format!("{}", pct as f64 / 100.0)));
            out.push(p);
        }
    }
    // Imputation-interval sweep.
    for kappa in [1usize, 2, 5, 10, 20] {
        let mut p = base(format!("cora-spreadfgl-m6-kappa{kappa}"), "cora", "spreadfgl", 6);
        p.settings.retain(|(k, _)| *k != "kappa");
        p.settings.push(("kappa", kappa.to_string()));
        out.push(p);
    }
    // Local-steps sweep.
    for tl in [1usize, 5, 10, 20, 50] {
        let mut p = base(format!("cora-spreadfgl-m6-tl{tl}"), "cora", "spreadfgl", 6);
        p.settings.push(("local_steps", tl.to_string()));
        out.push(p);
    }
    out
}

pub fn find(name: &str) -> Option<Preset> {
    all().into_iter().find(|p| p.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn names_are_unique() {
        let presets = all();
        let mut names: Vec<&str> = presets.iter().map(|p| p.name.as_str()).collect();
        names.sort_unstable();
        let before = names.len();
        names.dedup();
        assert_eq!(names.len(), before);
    }

    #[test]
    fn every_preset_resolves_to_a_valid_config() {
        for p in all() {
            let spec = crate::config::build_run_spec(&p.to_map())
                .unwrap_or_else(|e| panic!("preset {}: {e}", p.name));
            assert!(spec.cfg.rounds > 0);
        }
    }

    #[test]
    fn table_cell_preset_exists() {
        let p = find("cora-spreadfgl-m6").expect("preset registered");
        assert_eq!(p.dataset, "cora");
        let spec = crate::config::build_run_spec(&p.to_map()).unwrap();
        assert_eq!(spec.cfg.clients, 6);
        assert_eq!(spec.cfg.servers, 3);
    }
}
