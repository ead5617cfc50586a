//! JSON document for a [`DistortionProfile`].
//!
//! ```json
//! {
//!   "version": 1,
//!   "dims": { "width": 512, "height": 512 },
//!   "center": [256.0, 256.0],
//!   "f0": 0.0625,
//!   "cubic": [a3, a2, a1, a0],
//!   "r_max": 362.03867196751236,
//!   "table": [[0.0, 0.0], [1.0, 0.0001], ...],
//!   "provenance": "free text"
//! }
//! ```
//!
//! `cubic` holds the `Δφ(r)` extension polynomial, highest order first.
//! `table` samples `(r, Δr)` at 1-px steps and must describe a strictly
//! increasing `r + Δr`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::write_atomic;
use crate::distortion_profile::DistortionProfile;
use crate::error::{Error, Result};

pub const PROFILE_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Dims {
    pub width: usize,
    pub height: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub version: u32,
    pub dims: Dims,
    pub center: [f64; 2],
    pub f0: f64,
    pub cubic: Vec<f64>,
    pub r_max: f64,
    pub table: Vec<[f64; 2]>,
    #[serde(default)]
    pub provenance: String,
}

impl ProfileDocument {
    pub fn from_profile(profile: &DistortionProfile, provenance: impl Into<String>) -> Self {
        let (width, height) = profile.dims();
        let (cx, cy) = profile.center();
        Self {
            version: PROFILE_VERSION,
            dims: Dims { width, height },
            center: [cx, cy],
            f0: profile.f0(),
            cubic: profile.coefficients().to_vec(),
            r_max: profile.r_max(),
            table: profile
                .sampled_table()
                .into_iter()
                .map(|(r, d)| [r, d])
                .collect(),
            provenance: provenance.into(),
        }
    }

    /// Validates the document and rebuilds the profile it describes.
    pub fn into_profile(self) -> Result<DistortionProfile> {
        if self.version != PROFILE_VERSION {
            return Err(Error::Version {
                found: self.version,
                expected: PROFILE_VERSION,
            });
        }
        for (i, w) in self.table.windows(2).enumerate() {
            let [r0, d0] = w[0];
            let [r1, d1] = w[1];
            if !(r1 > r0) {
                return Err(Error::Format(format!(
                    "table radii not increasing at row {}",
                    i + 1
                )));
            }
            if !(r1 + d1 > r0 + d0) {
                return Err(Error::NonMonotone(format!(
                    "table r + Δr decreases between r = {r0} and r = {r1}"
                )));
            }
        }
        let profile = DistortionProfile::new(
            (self.dims.width, self.dims.height),
            (self.center[0], self.center[1]),
            self.f0,
            self.cubic,
        )?;
        if (profile.r_max() - self.r_max).abs() > 1e-9 * self.r_max.abs().max(1.0) {
            return Err(Error::Format(format!(
                "r_max {} does not match dims (expected {})",
                self.r_max,
                profile.r_max()
            )));
        }
        if self.table.len() != profile.table().len() {
            return Err(Error::Format(format!(
                "table has {} rows, expected {}",
                self.table.len(),
                profile.table().len()
            )));
        }
        for (i, ([r, d], expect)) in self.table.iter().zip(profile.table()).enumerate() {
            if *r != i as f64 || (d - expect).abs() > 1e-9 * expect.abs().max(1.0) {
                return Err(Error::Format(format!(
                    "table row {i} ({r}, {d}) disagrees with the polynomial ({i}, {expect})"
                )));
            }
        }
        Ok(profile)
    }
}

pub fn profile_to_json(profile: &DistortionProfile, provenance: &str) -> String {
    serde_json::to_string_pretty(&ProfileDocument::from_profile(profile, provenance))
        .expect("profile document serializes")
}

fn parse_document(text: &str) -> Result<ProfileDocument> {
    let value: serde_json::Value =
        serde_json::from_str(text).map_err(|e| Error::Format(e.to_string()))?;
    let version = value
        .get("version")
        .and_then(serde_json::Value::as_u64)
        .ok_or_else(|| Error::Format("missing integer field `version`".into()))?;
    if version != PROFILE_VERSION as u64 {
        return Err(Error::Version {
            found: u32::try_from(version).unwrap_or(u32::MAX),
            expected: PROFILE_VERSION,
        });
    }
    serde_json::from_value(value).map_err(|e| Error::Format(e.to_string()))
}

pub fn profile_from_json(text: &str) -> Result<DistortionProfile> {
    parse_document(text)?.into_profile()
}

pub fn save_profile(path: &Path, profile: &DistortionProfile, provenance: &str) -> Result<()> {
    let text = profile_to_json(profile, provenance);
    write_atomic(path, |w| {
        w.write_all(text.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))
    })
}

pub fn read_profile_document(path: &Path) -> Result<ProfileDocument> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_document(&text)
}

pub fn load_profile(path: &Path) -> Result<DistortionProfile> {
    read_profile_document(path)?.into_profile()
}
