//! Registry file, rewritten atomically (temp file then rename).
//!
//! | offset | size | field |
//! |---|---|---|
//! | 0 | 4 | magic `EPSR` |
//! | 4 | 4 | version (u32 LE, 1) |
//! | 8 | 4 | minimum enrollment frames (u32) |
//! | 12 | 4 | EPS settings length J (u32) |
//! | 16 | J | EPS settings, JSON |
//! | 16+J | 4 | template count N (u32) |
//! | 20+J | 4 | centroid length D (u32) |
//! | 24+J | N × (38 + 8D) | templates, ascending device id |
//!
//! Each template: device id (u16), enrollment frame count (u32), enrolled-at
//! (u64), dispersion (f64), calibrated threshold (f64), centroid (D × f64).
//! All integers and floats are little-endian.

use std::io::Write;
use std::path::Path;

use super::template::FingerprintTemplate;
use super::{Registry, RegistryConfig};
use crate::eps::EpsConfig;
use crate::error::{Error, Result};

pub const REGISTRY_MAGIC: [u8; 4] = *b"EPSR";
pub const REGISTRY_VERSION: u32 = 1;

pub fn registry_bytes(r: &Registry) -> Result<Vec<u8>> {
    let mut b = Vec::new();
    b.extend_from_slice(&REGISTRY_MAGIC);
    b.extend_from_slice(&REGISTRY_VERSION.to_le_bytes());
    b.extend_from_slice(&(r.config.min_enroll_frames as u32).to_le_bytes());
    let eps = serde_json::to_vec(&r.config.eps)?;
    b.extend_from_slice(&(eps.len() as u32).to_le_bytes());
    b.extend_from_slice(&eps);
    b.extend_from_slice(&(r.len() as u32).to_le_bytes());
    let d = 2 * r.config.eps.n_fft;
    b.extend_from_slice(&(d as u32).to_le_bytes());
    for t in r.templates() {
        if t.centroid.len() != d {
            return Err(Error::validation(format!(
                "template {} has the wrong centroid length",
                t.device_id
            )));
        }
        b.extend_from_slice(&t.device_id.to_le_bytes());
        b.extend_from_slice(&t.n_enroll_frames.to_le_bytes());
        b.extend_from_slice(&t.enrolled_at.to_le_bytes());
        b.extend_from_slice(&t.dispersion.to_le_bytes());
        b.extend_from_slice(&t.calibrated_tau.to_le_bytes());
        for v in &t.centroid {
            b.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(b)
}

pub fn save_registry(r: &Registry, path: &Path) -> Result<()> {
    let bytes = registry_bytes(r)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    {
        let mut f = std::fs::File::create(&tmp)?;
        f.write_all(&bytes)?;
        f.sync_all()?;
    }
    std::fs::rename(&tmp, path)?;
    Ok(())
}

struct Cur<'a> {
    b: &'a [u8],
    at: usize,
}

impl Cur<'_> {
    fn take(&mut self, n: usize, what: &str) -> Result<&[u8]> {
        if self.b.len() - self.at < n {
            return Err(Error::parse(
                self.at as u64,
                format!("registry truncated in {what}"),
            ));
        }
        let s = &self.b[self.at..self.at + n];
        self.at += n;
        Ok(s)
    }
    fn u16(&mut self, w: &str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2, w)?.try_into().unwrap()))
    }
    fn u32(&mut self, w: &str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4, w)?.try_into().unwrap()))
    }
    fn u64(&mut self, w: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8, w)?.try_into().unwrap()))
    }
    fn f64(&mut self, w: &str) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8, w)?.try_into().unwrap()))
    }
}

pub fn registry_from_bytes(b: &[u8]) -> Result<Registry> {
    let mut c = Cur { b, at: 0 };
    if c.take(4, "magic")? != REGISTRY_MAGIC {
        return Err(Error::parse(0, "not a registry file (bad magic)"));
    }
    let v = c.u32("version")?;
    if v != REGISTRY_VERSION {
        return Err(Error::parse(4, format!("unsupported registry version {v}")));
    }
    let min = c.u32("minimum enrollment frames")? as usize;
    let j = c.u32("settings length")? as usize;
    let at = c.at;
    let eps: EpsConfig = serde_json::from_slice(c.take(j, "settings")?)
        .map_err(|e| Error::parse(at as u64, format!("EPS settings: {e}")))?;
    let n = c.u32("template count")?;
    let at = c.at;
    let d = c.u32("centroid length")? as usize;
    if d != 2 * eps.n_fft {
        return Err(Error::parse(
            at as u64,
            format!("centroid length {d} does not match FFT size {}", eps.n_fft),
        ));
    }
    let mut r = Registry::new(RegistryConfig {
        min_enroll_frames: min,
        eps,
    })?;
    let mut last: Option<u16> = None;
    for _ in 0..n {
        let at = c.at;
        let device_id = c.u16("device id")?;
        if last.is_some_and(|l| l >= device_id) {
            return Err(Error::parse(
                at as u64,
                "templates are not in ascending id order",
            ));
        }
        last = Some(device_id);
        let n_enroll_frames = c.u32("frame count")?;
        let enrolled_at = c.u64("enrolled at")?;
        let dispersion = c.f64("dispersion")?;
        let calibrated_tau = c.f64("threshold")?;
        let centroid = (0..d)
            .map(|_| c.f64("centroid"))
            .collect::<Result<Vec<_>>>()?;
        r.insert_loaded(FingerprintTemplate {
            device_id,
            centroid,
            dispersion,
            enrolled_at,
            n_enroll_frames,
            calibrated_tau,
        });
    }
    if c.at != b.len() {
        return Err(Error::parse(
            c.at as u64,
            "trailing bytes after the last template",
        ));
    }
    Ok(r)
}

pub fn load_registry(path: &Path) -> Result<Registry> {
    registry_from_bytes(&std::fs::read(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_byte_identical() {
        let mut r = Registry::new(RegistryConfig::default()).unwrap();
        let d = 2 * r.config.eps.n_fft;
        let v: Vec<Vec<f64>> = (0..20)
            .map(|k| (0..d).map(|i| ((i * 7 + k) % 13) as f64 + 1.0).collect())
            .collect();
        r.enroll_eps(4, &v, 17).unwrap();
        r.enroll_eps(2, &v[..20], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("reg.epsr");
        save_registry(&r, &p).unwrap();
        let a = std::fs::read(&p).unwrap();
        let back = load_registry(&p).unwrap();
        assert_eq!(
            back.templates().collect::<Vec<_>>(),
            r.templates().collect::<Vec<_>>()
        );
        save_registry(&back, &p).unwrap();
        assert_eq!(a, std::fs::read(&p).unwrap());
        assert!(!dir.path().join("reg.epsr.tmp").exists());
        assert!(registry_from_bytes(&a[..a.len() - 1]).is_err());
        let mut bad = a.clone();
        bad[0] = b'X';
        assert!(registry_from_bytes(&bad).is_err());
    }
}
