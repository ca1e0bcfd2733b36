use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{
    gen_gaussian_mixture_pair, gen_two_moons_pair, load_features_csv, Domain, LabeledDataset,
    ShiftSpec,
};
use crate::error::{HommError, Result};
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Mixture,
    Moons,
    Csv,
}

/// Where the source and target data come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    pub dataset: DatasetKind,
    pub rotation_deg: f64,
    pub translation: Vec<f64>,
    pub scale: f64,
    pub class_count: usize,
    pub samples_per_class: usize,
    pub noise_std: f64,
    pub dim: usize,
    pub radius: f64,
    pub radius_step: f64,
    pub anisotropy: f64,
    pub data_seed: u64,
    /// Used when `dataset = "csv"`; both files need a `label` column.
    pub source_csv: String,
    pub target_csv: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        let spec = ShiftSpec::default();
        Self {
            dataset: DatasetKind::Mixture,
            rotation_deg: 40.0,
            translation: spec.translation,
            scale: spec.scale,
            class_count: spec.class_count,
            samples_per_class: spec.samples_per_class,
            noise_std: spec.noise_std,
            dim: spec.dim,
            radius: spec.radius,
            radius_step: spec.radius_step,
            anisotropy: spec.anisotropy,
            data_seed: spec.seed,
            source_csv: String::new(),
            target_csv: String::new(),
        }
    }
}

impl DataConfig {
    pub fn shift_spec(&self) -> ShiftSpec {
        ShiftSpec {
            rotation: self.rotation_deg.to_radians(),
            translation: self.translation.clone(),
            scale: self.scale,
            class_count: self.class_count,
            samples_per_class: self.samples_per_class,
            noise_std: self.noise_std,
            seed: self.data_seed,
            dim: self.dim,
            radius: self.radius,
            radius_step: self.radius_step,
            anisotropy: self.anisotropy,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.dataset {
            DatasetKind::Mixture | DatasetKind::Moons => self.shift_spec().validate(),
            DatasetKind::Csv => {
                for (field, value) in [("source_csv", &self.source_csv), ("target_csv", &self.target_csv)] {
                    if value.is_empty() {
                        return Err(HommError::config(field, "required when dataset = \"csv\""));
                    }
                }
                Ok(())
            }
        }
    }

    /// One-line description for the run manifest.
    pub fn describe(&self) -> String {
        match self.dataset {
            DatasetKind::Mixture | DatasetKind::Moons => format!(
                "{} pair, rotation {} deg, scale {}, {} x {} samples, noise {}, data seed {}",
                if self.dataset == DatasetKind::Mixture { "gaussian mixture" } else { "two moons" },
                self.rotation_deg,
                self.scale,
                self.class_count,
                self.samples_per_class,
                self.noise_std,
                self.data_seed
            ),
            DatasetKind::Csv => format!("source {}, target {}", self.source_csv, self.target_csv),
        }
    }

    /// Source and target datasets. Relative CSV paths resolve against `base`.
    pub fn load(&self, base: &Path) -> Result<(LabeledDataset, LabeledDataset)> {
        self.validate()?;
        match self.dataset {
            DatasetKind::Mixture => gen_gaussian_mixture_pair(&self.shift_spec()),
            DatasetKind::Moons => gen_two_moons_pair(&self.shift_spec()),
            DatasetKind::Csv => Ok((
                load_features_csv(base.join(&self.source_csv), Domain::Source)?,
                load_features_csv(base.join(&self.target_csv), Domain::Target)?,
            )),
        }
    }
}

/// The whole configuration file: training knobs and data keys side by side
/// in one flat table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    #[serde(flatten)]
    pub data: DataConfig,
}

impl RunConfig {
    /// Every key the file may contain.
    pub fn known_keys() -> Vec<String> {
        let table = toml::Table::try_from(RunConfig::default()).expect("default config serializes");
        table.keys().cloned().collect()
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let known = Self::known_keys();
        if let Some(unknown) = table.keys().find(|k| !known.contains(k)) {
            return Err(HommError::config(unknown.as_str(), "unknown key"));
        }
        for (key, value) in &table {
            // Deserializing through the flattened struct loses the key name,
            // so type errors are reported per key here.
            let mut probe = toml::Table::new();
            probe.insert(key.clone(), value.clone());
            if let Err(e) = toml::Value::Table(probe).try_into::<RunConfig>() {
                return Err(HommError::config(key.as_str(), e.message().to_string()));
            }
        }
        let config: RunConfig = toml::Value::Table(table)
            .try_into()
            .map_err(|e| HommError::config("config", e.message().to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| HommError::config("config", e.to_string()))?;
        Self::from_table(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.data.validate()
    }

    pub fn to_table(&self) -> toml::Table {
        toml::Table::try_from(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_defaults() {
        assert_eq!(RunConfig::from_toml_str("").unwrap(), RunConfig::default());
    }

    #[test]
    fn integers_are_accepted_for_reals() {
        let c = RunConfig::from_toml_str("lambda_d = 100\nrotation_deg = 30\nN = 5\nhidden = [8]").unwrap();
        assert_eq!(c.train.lambda_d, 100.0);
        assert_eq!(c.data.rotation_deg, 30.0);
        assert_eq!(c.train.n_samples, 5);
        assert_eq!(c.train.hidden, vec![8]);
    }

    #[test]
    fn bad_keys_and_values_name_the_field() {
        for (text, field) in [
            ("eta = 1.5", "eta"),
            ("etaa = 0.5", "etaa"),
            ("batch_size = \"big\"", "batch_size"),
            ("loss_variant = \"cubic\"", "loss_variant"),
            ("dataset = \"csv\"", "source_csv"),
            ("scale = -1.0", "scale"),
        ] {
            match RunConfig::from_toml_str(text) {
                Err(HommError::Config { field: f, .. }) => assert_eq!(f, field, "{text}"),
                other => panic!("{text}: {other:?}"),
            }
        }
    }

    #[test]
    fn table_round_trip() {
        let mut c = RunConfig::default();
        c.train.lambda_d = 123.456e-7;
        c.train.learning_rate = 0.1 + 0.2;
        c.data.translation = vec![0.5, -1.0];
        let text = toml::to_string(&c.to_table()).unwrap();
        assert_eq!(RunConfig::from_toml_str(&text).unwrap(), c);
    }
}
