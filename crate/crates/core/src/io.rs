//! Process image: signal values latched at a scan boundary.

use std::collections::BTreeMap;

use serde::Serialize;
use thiserror::Error;

use crate::chart::{Chart, SignalKind};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum IoError {
    #[error("analog signal `{name}` has non-finite value {value}")]
    NonFinite { name: String, value: f64 },
    #[error("signal `{0}` is declared by the chart but missing from the image")]
    Missing(String),
    #[error("signal `{0}` is not a declared input of the chart")]
    Unexpected(String),
}

/// Boolean and analog signal values. Analog values are always finite.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct IoImage {
    bools: BTreeMap<String, bool>,
    analogs: BTreeMap<String, f64>,
}

impl IoImage {
    pub fn new() -> Self {
        Self::default()
    }

    /// All declared inputs of `chart` at their zero value (false / 0.0).
    pub fn zero_inputs(chart: &Chart) -> Self {
        let mut image = IoImage::new();
        for sig in &chart.signals {
            match sig.kind {
                SignalKind::BoolInput => image.set_bool(&sig.name, false),
                SignalKind::AnalogInput => {
                    image.analogs.insert(sig.name.clone(), 0.0);
                }
                SignalKind::BoolOutput => {}
            }
        }
        image
    }

    pub fn with_bool(mut self, name: &str, value: bool) -> Self {
        self.set_bool(name, value);
        self
    }

    /// Panics on a non-finite value; use [`IoImage::set_analog`] for
    /// untrusted data.
    pub fn with_analog(mut self, name: &str, value: f64) -> Self {
        self.set_analog(name, value).expect("finite analog value");
        self
    }

    pub fn set_bool(&mut self, name: &str, value: bool) {
        self.bools.insert(name.to_owned(), value);
    }

    pub fn set_analog(&mut self, name: &str, value: f64) -> Result<(), IoError> {
        if !value.is_finite() {
            return Err(IoError::NonFinite { name: name.to_owned(), value });
        }
        self.analogs.insert(name.to_owned(), value);
        Ok(())
    }

    pub fn bool(&self, name: &str) -> Option<bool> {
        self.bools.get(name).copied()
    }

    pub fn analog(&self, name: &str) -> Option<f64> {
        self.analogs.get(name).copied()
    }

    pub fn bools(&self) -> impl Iterator<Item = (&str, bool)> {
        self.bools.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn analogs(&self) -> impl Iterator<Item = (&str, f64)> {
        self.analogs.iter().map(|(k, v)| (k.as_str(), *v))
    }

    /// Checks that the image carries exactly the chart's declared inputs,
    /// each with the right kind.
    pub fn check_inputs(&self, chart: &Chart) -> Result<(), IoError> {
        for sig in &chart.signals {
            let present = match sig.kind {
                SignalKind::BoolInput => self.bools.contains_key(&sig.name),
                SignalKind::AnalogInput => self.analogs.contains_key(&sig.name),
                SignalKind::BoolOutput => continue,
            };
            if !present {
                return Err(IoError::Missing(sig.name.clone()));
            }
        }
        for name in self.bools.keys() {
            if chart.signal(name).map(|s| s.kind) != Some(SignalKind::BoolInput) {
                return Err(IoError::Unexpected(name.clone()));
            }
        }
        for name in self.analogs.keys() {
            if chart.signal(name).map(|s| s.kind) != Some(SignalKind::AnalogInput) {
                return Err(IoError::Unexpected(name.clone()));
            }
        }
        Ok(())
    }
}
