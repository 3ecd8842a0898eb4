//! Device identity registry: enrollment, rogue screening, claimed-identity
//! verification and per-frame continuous authentication.
//!
//! Decisions are pure functions of a registry snapshot. Mutations and audit
//! appends follow a single-writer contract.

pub mod audit;
pub mod roc;
pub mod store;
pub mod template;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use audit::{hash_frames, hash_vectors, AuditEvent, AuditLog};
pub use roc::{render_roc, roc_sweep, RocPoint};
pub use store::{
    load_registry, registry_bytes, registry_from_bytes, save_registry, REGISTRY_MAGIC,
    REGISTRY_VERSION,
};
pub use template::{AuthDecision, FingerprintTemplate, Screening, Verdict, TAU_CLIP};

use crate::classifier::{argmax, Mode};
use crate::eps::{EpsConfig, EpsGenerator};
use crate::error::{Error, Result};
use crate::sim::IQFrame;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RegistryConfig {
    pub min_enroll_frames: usize,
    pub eps: EpsConfig,
}

impl Default for RegistryConfig {
    fn default() -> Self {
        RegistryConfig {
            min_enroll_frames: 20,
            eps: EpsConfig::default(),
        }
    }
}

/// Which model names the best-matching device during verification.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchBackend {
    #[default]
    Centroid,
    Cnn,
}

/// A continuous-authentication session opened by an accepted verification.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub session_id: String,
    pub claimed_id: u16,
}

impl Session {
    pub fn bind(session_id: impl Into<String>, opening: &AuthDecision) -> Result<Self> {
        if opening.verdict != Verdict::Accepted {
            return Err(Error::validation(format!(
                "session for device {} requires an accepted verification",
                opening.claimed_id
            )));
        }
        Ok(Session {
            session_id: session_id.into(),
            claimed_id: opening.claimed_id,
        })
    }
}

pub struct Registry {
    pub config: RegistryConfig,
    templates: BTreeMap<u16, FingerprintTemplate>,
    generator: EpsGenerator<f64>,
    audit: Option<AuditLog>,
    cnn: Option<(crate::Cnn, Vec<u16>)>,
}

impl Registry {
    pub fn new(config: RegistryConfig) -> Result<Self> {
        if config.min_enroll_frames == 0 {
            return Err(Error::validation(
                "minimum enrollment frames must be positive",
            ));
        }
        let generator = EpsGenerator::new(config.eps.clone())?;
        Ok(Registry {
            config,
            templates: BTreeMap::new(),
            generator,
            audit: None,
            cnn: None,
        })
    }

    pub fn with_audit_log(mut self, log: AuditLog) -> Self {
        self.audit = Some(log);
        self
    }

    pub fn audit_log(&self) -> Option<&AuditLog> {
        self.audit.as_ref()
    }

    fn log(&self, e: AuditEvent) -> Result<()> {
        match &self.audit {
            Some(a) => a.append(&e),
            None => Ok(()),
        }
    }

    /// Use a trained CNN (classes in `class_ids` order) to pick the matched device.
    pub fn set_cnn_backend(&mut self, model: crate::Cnn, class_ids: Vec<u16>) -> Result<()> {
        if model.config.n_classes != class_ids.len() {
            return Err(Error::validation(
                "class id list does not match the model's outputs",
            ));
        }
        self.cnn = Some((model, class_ids));
        Ok(())
    }

    pub fn backend(&self) -> MatchBackend {
        if self.cnn.is_some() {
            MatchBackend::Cnn
        } else {
            MatchBackend::Centroid
        }
    }

    pub fn len(&self) -> usize {
        self.templates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.templates.is_empty()
    }

    pub fn template(&self, id: u16) -> Option<&FingerprintTemplate> {
        self.templates.get(&id)
    }

    pub fn templates(&self) -> impl Iterator<Item = &FingerprintTemplate> {
        self.templates.values()
    }

    pub(crate) fn insert_loaded(&mut self, t: FingerprintTemplate) {
        self.templates.insert(t.device_id, t);
    }

    /// Flattened EPS of a frame (I row then Q row).
    pub fn eps_vector(&self, frame: &IQFrame) -> Result<Vec<f64>> {
        Ok(self.generator.eps_of_frame(frame)?.to_flat())
    }

    /// Enroll from raw frames. Re-enrolling an id replaces its template.
    pub fn enroll(
        &mut self,
        device_id: u16,
        frames: &[IQFrame],
        enrolled_at: u64,
    ) -> Result<&FingerprintTemplate> {
        if let Some(f) = frames
            .iter()
            .find(|f| f.device_id.is_some_and(|d| d != device_id))
        {
            return Err(Error::validation(format!(
                "enrollment frames for device {device_id} include a frame labelled {}",
                f.device_id.unwrap()
            )));
        }
        self.check_count(device_id, frames.len())?;
        let eps: Vec<Vec<f64>> = frames
            .par_iter()
            .map(|f| self.eps_vector(f))
            .collect::<Result<_>>()?;
        let hash = hash_frames(frames);
        self.insert(device_id, &eps, enrolled_at, hash)
    }

    /// Enroll from precomputed flattened EPS vectors.
    pub fn enroll_eps(
        &mut self,
        device_id: u16,
        eps: &[Vec<f64>],
        enrolled_at: u64,
    ) -> Result<&FingerprintTemplate> {
        self.check_count(device_id, eps.len())?;
        let n = 2 * self.config.eps.n_fft;
        if eps.iter().any(|e| e.len() != n) {
            return Err(Error::validation(format!(
                "enrollment vectors must have {n} values"
            )));
        }
        let hash = hash_vectors(eps);
        self.insert(device_id, eps, enrolled_at, hash)
    }

    fn check_count(&self, device_id: u16, n: usize) -> Result<()> {
        if n < self.config.min_enroll_frames {
            return Err(Error::validation(format!(
                "device {device_id}: {n} enrollment frames, at least {} required",
                self.config.min_enroll_frames
            )));
        }
        Ok(())
    }

    fn insert(
        &mut self,
        device_id: u16,
        eps: &[Vec<f64>],
        enrolled_at: u64,
        hash: String,
    ) -> Result<&FingerprintTemplate> {
        let t = FingerprintTemplate::from_eps(device_id, eps, enrolled_at)?;
        let replaced = self.templates.contains_key(&device_id);
        if replaced {
            log::info!("re-enrolling device {device_id}; previous template replaced");
        }
        let mut e = AuditEvent::new(if replaced { "reenroll" } else { "enroll" }, hash);
        e.device_id = Some(device_id);
        e.score = Some(t.dispersion);
        e.threshold = Some(t.calibrated_tau);
        self.log(e)?;
        self.templates.insert(device_id, t);
        Ok(&self.templates[&device_id])
    }

    fn require_nonempty(&self) -> Result<()> {
        if self.templates.is_empty() {
            return Err(Error::validation("registry has no enrolled devices"));
        }
        Ok(())
    }

    /// Best template by cosine similarity; ties go to the lowest id.
    pub fn best_match(&self, eps: &[f64]) -> Option<(u16, f64)> {
        let mut best: Option<(u16, f64)> = None;
        for t in self.templates.values() {
            let s = t.similarity(eps);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((t.device_id, s));
            }
        }
        best
    }

    fn matched_id(&self, eps: &[f64]) -> Result<Option<u16>> {
        match &self.cnn {
            None => Ok(self.best_match(eps).map(|m| m.0)),
            Some((model, ids)) => {
                let x: Vec<f32> = eps.iter().map(|&v| v as f32).collect();
                let p = model.probabilities(&[&x], Mode::Eval)?;
                Ok(Some(ids[argmax(&p[0])]))
            }
        }
    }

    /// `Legitimate` iff the best template similarity reaches `tau`, or that
    /// template's calibrated threshold when `tau` is `None`.
    pub fn screen_rogue_eps(&self, eps: &[f64], tau: Option<f64>) -> Result<(Screening, f64, f64)> {
        self.require_nonempty()?;
        let (id, s) = self.best_match(eps).expect("registry is nonempty");
        let th = tau.unwrap_or(self.templates[&id].calibrated_tau);
        let v = if s >= th {
            Screening::Legitimate
        } else {
            Screening::Rogue
        };
        Ok((v, s, th))
    }

    pub fn screen_rogue(&self, frame: &IQFrame, tau: Option<f64>) -> Result<Screening> {
        self.require_nonempty()?;
        let (v, s, th) = self.screen_rogue_eps(&self.eps_vector(frame)?, tau)?;
        self.audit_screening(v, s, th, hash_frames([frame]))?;
        Ok(v)
    }

    /// Append a screening result to the audit log, if one is attached.
    pub fn audit_screening(
        &self,
        v: Screening,
        score: f64,
        threshold: f64,
        input_sha256: String,
    ) -> Result<()> {
        let mut e = AuditEvent::new("screen", input_sha256);
        e.verdict = Some(format!("{v:?}").to_lowercase());
        e.score = Some(score);
        e.threshold = Some(threshold);
        self.log(e)
    }

    /// Accept iff the similarity to the claimed template reaches the
    /// threshold and the claimed device is also the best match.
    pub fn verify_eps(
        &self,
        eps: &[f64],
        claimed_id: u16,
        tau: Option<f64>,
    ) -> Result<AuthDecision> {
        let Some(t) = self.templates.get(&claimed_id) else {
            return Ok(AuthDecision {
                verdict: Verdict::Rejected,
                claimed_id,
                matched_id: None,
                score: f64::NEG_INFINITY,
                threshold_used: tau.unwrap_or(f64::INFINITY),
            });
        };
        let th = tau.unwrap_or(t.calibrated_tau);
        let score = t.similarity(eps);
        let matched = self.matched_id(eps)?;
        let verdict = if score >= th && matched == Some(claimed_id) {
            Verdict::Accepted
        } else {
            Verdict::Rejected
        };
        Ok(AuthDecision {
            verdict,
            claimed_id,
            matched_id: matched,
            score,
            threshold_used: th,
        })
    }

    pub fn verify(
        &self,
        frame: &IQFrame,
        claimed_id: u16,
        tau: Option<f64>,
    ) -> Result<AuthDecision> {
        let d = self.verify_eps(&self.eps_vector(frame)?, claimed_id, tau)?;
        self.audit_decision("verify", &d, hash_frames([frame]))?;
        Ok(d)
    }

    /// Append a decision to the audit log, if one is attached. The `_eps`
    /// entry points leave logging to the caller, who knows the raw input.
    pub fn audit_decision(
        &self,
        event: &str,
        d: &AuthDecision,
        input_sha256: String,
    ) -> Result<()> {
        let mut e = AuditEvent::new(event, input_sha256);
        e.device_id = Some(d.claimed_id);
        e.matched_id = d.matched_id;
        e.verdict = Some(format!("{:?}", d.verdict).to_lowercase());
        e.score = Some(d.score);
        e.threshold = Some(d.threshold_used);
        self.log(e)
    }

    /// Sliding-window authentication over per-frame EPS vectors. Each
    /// decision's score is the mean similarity to the session's template over
    /// the last `window` frames (fewer at the start); below `tau` it is an
    /// alert, otherwise accepted.
    pub fn continuous_auth_eps(
        &self,
        eps: &[Vec<f64>],
        session: &Session,
        window: usize,
        tau: Option<f64>,
    ) -> Result<Vec<AuthDecision>> {
        if window == 0 {
            return Err(Error::validation("window must be positive"));
        }
        let t = self.templates.get(&session.claimed_id).ok_or_else(|| {
            Error::validation(format!(
                "session device {} is not enrolled",
                session.claimed_id
            ))
        })?;
        let th = tau.unwrap_or(t.calibrated_tau);
        let scores: Vec<f64> = eps.iter().map(|e| t.similarity(e)).collect();
        let mut out = Vec::with_capacity(eps.len());
        for (i, e) in eps.iter().enumerate() {
            let lo = (i + 1).saturating_sub(window);
            let mean = scores[lo..=i].iter().sum::<f64>() / (i + 1 - lo) as f64;
            out.push(AuthDecision {
                verdict: if mean < th {
                    Verdict::Alert
                } else {
                    Verdict::Accepted
                },
                claimed_id: session.claimed_id,
                matched_id: self.matched_id(e)?,
                score: mean,
                threshold_used: th,
            });
        }
        Ok(out)
    }

    pub fn continuous_auth(
        &self,
        frames: &[IQFrame],
        session: &Session,
        window: usize,
        tau: Option<f64>,
    ) -> Result<Vec<AuthDecision>> {
        let eps: Vec<Vec<f64>> = frames
            .par_iter()
            .map(|f| self.eps_vector(f))
            .collect::<Result<_>>()?;
        let out = self.continuous_auth_eps(&eps, session, window, tau)?;
        for (f, d) in frames.iter().zip(&out) {
            if d.verdict == Verdict::Alert {
                self.audit_decision("alert", d, hash_frames([f]))?;
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{
        apply_channel, apply_impairments, generate_dsss_baseband, random_payload, ChannelProfile,
        DeviceProfile, DsssConfig,
    };

    fn frames(cfo: f64, id: u16, n: usize, seed: u64) -> Vec<IQFrame> {
        let s = generate_dsss_baseband(&random_payload(200, 1), &DsssConfig::default()).unwrap();
        let dev = DeviceProfile::ideal(id).with_cfo(cfo);
        (0..n as u64)
            .map(|k| {
                let r = apply_impairments(&s, &dev, seed + k).unwrap();
                let ch = ChannelProfile {
                    snr_db: Some(20.0),
                    delay_samples: (k * 7 % 200) as usize,
                    seed: seed * 1000 + k,
                    ..ChannelProfile::identity()
                };
                apply_channel(&r, &ch).unwrap().with_labels(Some(id), None)
            })
            .collect()
    }

    fn small_registry() -> Registry {
        let mut r = Registry::new(RegistryConfig::default()).unwrap();
        r.enroll(1, &frames(5_000.0, 1, 20, 10), 0).unwrap();
        r.enroll(2, &frames(11_000.0, 2, 20, 20), 0).unwrap();
        r
    }

    #[test]
    fn enrollment_rules() {
        let mut r = Registry::new(RegistryConfig::default()).unwrap();
        assert!(r.enroll(1, &frames(5_000.0, 1, 19, 1), 0).is_err());
        assert!(r.enroll(2, &frames(5_000.0, 1, 20, 1), 0).is_err());
        let t = r.enroll(1, &frames(5_000.0, 1, 20, 1), 0).unwrap();
        assert!(t.dispersion <= 0.01, "{}", t.dispersion);
        r.enroll(1, &frames(5_000.0, 1, 20, 2), 5).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r.template(1).unwrap().enrolled_at, 5);
    }

    #[test]
    fn screening_and_verification() {
        let r = small_registry();
        let genuine = &frames(5_000.0, 1, 1, 99)[0];
        let other = &frames(11_000.0, 2, 1, 98)[0];
        let rogue = &frames(20_000.0, 9, 1, 97)[0];
        assert_eq!(
            r.screen_rogue(genuine, Some(0.95)).unwrap(),
            Screening::Legitimate
        );
        assert_eq!(r.screen_rogue(rogue, Some(0.95)).unwrap(), Screening::Rogue);
        assert_eq!(
            r.screen_rogue(rogue, Some(-1.0)).unwrap(),
            Screening::Legitimate
        );
        let d = r.verify(genuine, 1, None).unwrap();
        assert_eq!(d.verdict, Verdict::Accepted, "{d:?}");
        let imp = r.verify(other, 1, None).unwrap();
        assert_eq!(imp.verdict, Verdict::Rejected);
        assert_eq!(imp.matched_id, Some(2));
        let unknown = r.verify(genuine, 42, None).unwrap();
        assert_eq!(
            (unknown.verdict, unknown.matched_id),
            (Verdict::Rejected, None)
        );
        let empty = Registry::new(RegistryConfig::default()).unwrap();
        assert!(empty.screen_rogue(genuine, None).is_err());
    }

    #[test]
    fn raising_threshold_never_accepts_more() {
        let r = small_registry();
        let f = &frames(5_000.0, 1, 1, 5)[0];
        let e = r.eps_vector(f).unwrap();
        let mut last = Verdict::Accepted;
        for k in 0..=100 {
            let v = r
                .verify_eps(&e, 1, Some(0.5 + 0.005 * k as f64))
                .unwrap()
                .verdict;
            assert!(!(last == Verdict::Rejected && v == Verdict::Accepted));
            last = v;
        }
        assert_eq!(
            r.verify_eps(&e, 1, None).unwrap(),
            r.verify_eps(&e, 1, None).unwrap()
        );
    }

    #[test]
    fn continuous_auth_detects_swap() {
        let r = small_registry();
        let open = r.verify(&frames(5_000.0, 1, 1, 50)[0], 1, None).unwrap();
        let s = Session::bind("s1", &open).unwrap();
        let mut stream = frames(5_000.0, 1, 10, 60);
        stream.extend(frames(11_000.0, 2, 5, 70));
        let window = 4;
        let d = r.continuous_auth(&stream, &s, window, None).unwrap();
        assert!(d[..10].iter().all(|x| x.verdict == Verdict::Accepted));
        let first = d.iter().position(|x| x.verdict == Verdict::Alert).unwrap();
        assert!(first >= 10 && first < 10 + window);
        assert!(r.continuous_auth(&stream, &s, 0, None).is_err());
        // Window 1 is per-frame thresholding.
        let eps: Vec<Vec<f64>> = stream.iter().map(|f| r.eps_vector(f).unwrap()).collect();
        let w1 = r.continuous_auth_eps(&eps, &s, 1, None).unwrap();
        for (x, e) in w1.iter().zip(&eps) {
            let per = r.template(1).unwrap().similarity(e) >= x.threshold_used;
            assert_eq!(x.verdict == Verdict::Accepted, per);
        }
        let rejected = AuthDecision {
            verdict: Verdict::Rejected,
            ..open
        };
        assert!(Session::bind("s2", &rejected).is_err());
    }

    #[test]
    fn audit_log_records_events() {
        let dir = tempfile::tempdir().unwrap();
        let log = AuditLog::new(dir.path().join("a.jsonl"));
        let mut r = Registry::new(RegistryConfig::default())
            .unwrap()
            .with_audit_log(log.clone());
        r.enroll(1, &frames(5_000.0, 1, 20, 10), 0).unwrap();
        r.enroll(1, &frames(5_000.0, 1, 20, 11), 0).unwrap();
        r.verify(&frames(5_000.0, 1, 1, 12)[0], 1, None).unwrap();
        let ev: Vec<String> = log.read().unwrap().into_iter().map(|e| e.event).collect();
        assert_eq!(ev, ["enroll", "reenroll", "verify"]);
    }
}
