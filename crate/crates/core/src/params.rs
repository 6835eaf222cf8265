//! Loosely typed parameter maps used to configure named strategies.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Number(f64),
    Vector(Vec<f64>),
    Text(String),
}

pub type ParamMap = BTreeMap<String, ParamValue>;

/// Typed reader over a [`ParamMap`] that rejects keys nobody asked for.
pub struct ParamReader<'a> {
    owner: &'a str,
    map: &'a ParamMap,
    seen: Vec<&'a str>,
}

impl<'a> ParamReader<'a> {
    pub fn new(owner: &'a str, map: &'a ParamMap) -> Self {
        Self {
            owner,
            map,
            seen: Vec::new(),
        }
    }

    fn field(&self, key: &str) -> String {
        format!("{}.{}", self.owner, key)
    }

    pub fn number(&mut self, key: &'a str, default: f64) -> Result<f64> {
        self.seen.push(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Number(x)) if x.is_finite() => Ok(*x),
            Some(other) => Err(Error::validation(
                &self.field(key),
                format!("expected a finite number, got {other:?}"),
            )),
        }
    }

    pub fn vec3(&mut self, key: &'a str, default: Vec3) -> Result<Vec3> {
        self.seen.push(key);
        match self.map.get(key) {
            None => Ok(default),
            Some(ParamValue::Vector(v)) if v.len() == 3 && v.iter().all(|x| x.is_finite()) => {
                Ok([v[0], v[1], v[2]])
            }
            Some(other) => Err(Error::validation(
                &self.field(key),
                format!("expected a 3-vector, got {other:?}"),
            )),
        }
    }

    pub fn vector(&mut self, key: &'a str) -> Result<Option<Vec<f64>>> {
        self.seen.push(key);
        match self.map.get(key) {
            None => Ok(None),
            Some(ParamValue::Vector(v)) => Ok(Some(v.clone())),
            Some(other) => Err(Error::validation(
                &self.field(key),
                format!("expected a list of numbers, got {other:?}"),
            )),
        }
    }

    /// Fails if the map holds keys that were never read.
    pub fn finish(self) -> Result<()> {
        for key in self.map.keys() {
            if !self.seen.contains(&key.as_str()) {
                return Err(Error::validation(
                    &self.field(key),
                    format!("unknown key; accepted keys: {}", self.seen.join(", ")),
                ));
            }
        }
        Ok(())
    }
}

pub fn num(x: f64) -> ParamValue {
    ParamValue::Number(x)
}

pub fn vec3(v: Vec3) -> ParamValue {
    ParamValue::Vector(v.to_vec())
}
