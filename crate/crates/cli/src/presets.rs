//! Built-in experiment presets. The TOML files live in `presets/` and are
//! compiled in, so `experiment fig3` works from any directory.

use crate::config::ExperimentConfig;
use crate::CliError;

pub const PRESETS: [(&str, &str); 9] = [
    ("fig1", include_str!("../presets/fig1.toml")),
    ("fig2", include_str!("../presets/fig2.toml")),
    ("fig3", include_str!("../presets/fig3.toml")),
    ("fig4", include_str!("../presets/fig4.toml")),
    ("fig5", include_str!("../presets/fig5.toml")),
    ("fig6", include_str!("../presets/fig6.toml")),
    ("fig7", include_str!("../presets/fig7.toml")),
    ("fig8", include_str!("../presets/fig8.toml")),
    ("jd-european", include_str!("../presets/jd-european.toml")),
];

pub fn preset_source(id: &str) -> Option<&'static str> {
    PRESETS.iter().find(|(name, _)| *name == id).map(|(_, src)| *src)
}

pub fn load_preset(id: &str) -> Result<ExperimentConfig, CliError> {
    let src = preset_source(id).ok_or_else(|| {
        let known: Vec<&str> = PRESETS.iter().map(|(n, _)| *n).collect();
        CliError::Config(format!("unknown experiment {id:?}; known: {}", known.join(", ")))
    })?;
    let cfg = ExperimentConfig::from_toml(src)?;
    if cfg.id != id {
        return Err(CliError::Config(format!("preset {id}: id field says {:?}", cfg.id)));
    }
    Ok(cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_preset_parses_and_validates() {
        for (id, _) in PRESETS {
            let cfg = load_preset(id).unwrap_or_else(|e| panic!("{id}: {e}"));
            assert!(!cfg.description.is_empty(), "{id} has no description");
        }
    }

    #[test]
    fn unknown_preset_lists_known_ids() {
        let err = load_preset("fig99").unwrap_err().to_string();
        assert!(err.contains("fig3"));
    }
}
