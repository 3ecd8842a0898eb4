//! Same-domain cross-validation and cross-domain transfer runs.

use std::collections::{BTreeSet, HashSet};

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::folds::kfold_split;
use super::report::{EvalReport, ModelKind};
use crate::classifier::{predict_all, train, CentroidModel, Cnn, CnnConfig, TrainConfig};
use crate::dataset::{DatasetHeader, PayloadKind, Record, ScenarioPlan};
use crate::eps::{raw_iq_representation, EpsConfig, EpsGenerator};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng};
use crate::sim::DomainLabel;

const STREAM_FOLD_MODEL: u64 = 1;
const STREAM_CROSS_MODEL: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;

/// Which network size the CNN models use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CnnPreset {
    Reference,
    #[default]
    Compact,
}

impl CnnPreset {
    pub fn config(self, n_classes: usize) -> CnnConfig {
        match self {
            CnnPreset::Reference => CnnConfig::reference(n_classes),
            CnnPreset::Compact => CnnConfig::compact(n_classes),
        }
    }
}

/// EPS rows sum to one over 4096 bins, so they are rescaled to O(1) values
/// before the first convolution; raw IQ windows are already standardized.
pub fn input_scale_for(kind: ModelKind, n_fft: usize) -> f64 {
    if kind.uses_eps() {
        n_fft as f64
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub folds: usize,
    pub seed: u64,
    pub cnn: CnnPreset,
    pub train: TrainConfig,
    /// Models trained per cross-domain pair (each on the full source set
    /// with its own seed); defaults to `folds`.
    pub cross_domain_models: Option<usize>,
    pub iq_window_len: usize,
    pub iq_offset: usize,
    pub eps: EpsConfig,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            folds: 5,
            seed: 0,
            cnn: CnnPreset::Compact,
            train: TrainConfig::default(),
            cross_domain_models: None,
            iq_window_len: 4096,
            iq_offset: 1024,
            eps: EpsConfig::default(),
        }
    }
}

/// Feature vectors with device labels and globally unique record ids.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSet {
    pub domain: String,
    pub record_ids: Vec<u64>,
    pub device_ids: Vec<u16>,
    pub features: Vec<Vec<f32>>,
}

impl LabeledSet {
    pub fn new(
        domain: impl Into<String>,
        record_ids: Vec<u64>,
        device_ids: Vec<u16>,
        features: Vec<Vec<f32>>,
    ) -> Result<Self> {
        if record_ids.len() != device_ids.len() || device_ids.len() != features.len() {
            return Err(Error::validation(
                "record ids, labels and features differ in count",
            ));
        }
        if features.windows(2).any(|w| w[0].len() != w[1].len()) {
            return Err(Error::validation("feature vectors differ in length"));
        }
        Ok(LabeledSet {
            domain: domain.into(),
            record_ids,
            device_ids,
            features,
        })
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn devices(&self) -> BTreeSet<u16> {
        self.device_ids.iter().copied().collect()
    }

    pub fn subset(&self, idx: &[usize]) -> LabeledSet {
        LabeledSet {
            domain: self.domain.clone(),
            record_ids: idx.iter().map(|&i| self.record_ids[i]).collect(),
            device_ids: idx.iter().map(|&i| self.device_ids[i]).collect(),
            features: idx.iter().map(|&i| self.features[i].clone()).collect(),
        }
    }
}

/// Synthesize the listed frames of a plan and turn them into the input
/// representation `kind` consumes. Record ids are the frames' impairment
/// seeds, which are unique per realization.
pub fn featurize(
    plan: &ScenarioPlan,
    indices: &[usize],
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<LabeledSet> {
    let mut domains: Vec<String> = Vec::new();
    for &i in indices {
        let d = plan
            .jobs
            .get(i)
            .ok_or_else(|| Error::validation(format!("record {i} out of range")))?
            .domain
            .to_string();
        if !domains.contains(&d) {
            domains.push(d);
        }
    }
    let features = if kind.uses_eps() {
        let g = EpsGenerator::<f64>::new(cfg.eps.clone())?;
        plan.map_frames_at(indices, |f| Ok(g.eps_of_frame(f)?.cast::<f32>().to_flat()))?
    } else {
        plan.map_frames_at(indices, |f| {
            Ok(raw_iq_representation::<f32>(f, cfg.iq_window_len, cfg.iq_offset)?.to_flat())
        })?
    };
    LabeledSet::new(
        domains.join("+"),
        indices
            .iter()
            .map(|&i| plan.jobs[i].impairment_seed)
            .collect(),
        indices
            .iter()
            .map(|&i| plan.jobs[i].device.device_id)
            .collect(),
        features,
    )
}

/// Stable id for a stored record without a manifest: a hash of its labels
/// and payload, so identical records collide and trip the leakage guard.
pub fn record_fingerprint(r: &Record) -> u64 {
    let mut h = Sha256::new();
    h.update(r.device_id.to_le_bytes());
    h.update(r.domain.to_bytes());
    for v in &r.payload {
        h.update(v.to_le_bytes());
    }
    let d = h.finalize();
    u64::from_le_bytes(d[..8].try_into().expect("digest has 32 bytes"))
}

/// Feature sets from stored records, one per domain in order of first
/// appearance. Records are streamed in chunks, so only features stay in
/// memory. `record_ids` (by record position) defaults to
/// [`record_fingerprint`].
pub fn featurize_records<I>(
    header: &DatasetHeader,
    records: I,
    record_ids: Option<&[u64]>,
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<Vec<LabeledSet>>
where
    I: IntoIterator<Item = Result<Record>>,
{
    match (header.payload_kind, kind.uses_eps()) {
        (PayloadKind::Eps, false) => {
            return Err(Error::validation(format!(
                "{kind} needs raw IQ records, but the dataset holds EPS tensors"
            )))
        }
        (PayloadKind::Eps, true) if header.frame_len as usize != cfg.eps.n_fft => {
            return Err(Error::validation(format!(
                "EPS records have {} bins, configuration expects {}",
                header.frame_len, cfg.eps.n_fft
            )))
        }
        _ => {}
    }
    let g = match (header.payload_kind, kind.uses_eps()) {
        (PayloadKind::Iq, true) => Some(EpsGenerator::<f64>::new(cfg.eps.clone())?),
        _ => None,
    };
    let fs = header.sample_rate_hz;
    let feature = |r: &Record| -> Result<Vec<f32>> {
        match (&g, header.payload_kind) {
            (Some(g), _) => Ok(g.eps_of_frame(&r.to_frame(fs)?)?.cast::<f32>().to_flat()),
            (None, PayloadKind::Eps) => Ok(r.payload.clone()),
            (None, PayloadKind::Iq) => Ok(raw_iq_representation::<f32>(
                &r.to_frame(fs)?,
                cfg.iq_window_len,
                cfg.iq_offset,
            )?
            .to_flat()),
        }
    };
    const CHUNK: usize = 128;
    let mut labels: Vec<(DomainLabel, u16, u64)> = Vec::new();
    let mut features: Vec<Vec<f32>> = Vec::new();
    let mut chunk: Vec<Record> = Vec::with_capacity(CHUNK);
    let mut iter = records.into_iter();
    loop {
        let next = iter.next().transpose()?;
        let done = next.is_none();
        if let Some(r) = next {
            chunk.push(r);
        }
        if chunk.len() == CHUNK || (done && !chunk.is_empty()) {
            let f: Vec<Vec<f32>> = chunk.par_iter().map(feature).collect::<Result<_>>()?;
            for r in chunk.drain(..) {
                let i = labels.len();
                let id = match record_ids {
                    Some(ids) => *ids.get(i).ok_or_else(|| {
                        Error::validation(format!("{} record ids for more records", ids.len()))
                    })?,
                    None => record_fingerprint(&r),
                };
                labels.push((r.domain, r.device_id, id));
            }
            features.extend(f);
        }
        if done {
            break;
        }
    }
    if let Some(ids) = record_ids {
        if ids.len() != labels.len() {
            return Err(Error::validation(format!(
                "{} record ids for {} records",
                ids.len(),
                labels.len()
            )));
        }
    }
    let mut order: Vec<DomainLabel> = Vec::new();
    for l in &labels {
        if !order.contains(&l.0) {
            order.push(l.0);
        }
    }
    let mut slots: Vec<Option<Vec<f32>>> = features.into_iter().map(Some).collect();
    order
        .into_iter()
        .map(|d| {
            let idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i].0 == d).collect();
            LabeledSet::new(
                d.to_string(),
                idx.iter().map(|&i| labels[i].2).collect(),
                idx.iter().map(|&i| labels[i].1).collect(),
                idx.iter()
                    .map(|&i| slots[i].take().expect("each record is used once"))
                    .collect(),
            )
        })
        .collect()
}

/// A trainable classifier over flat feature vectors.
pub trait Learner {
    fn fit(&mut self, x: &[Vec<f32>], y: &[usize], n_classes: usize, seed: u64) -> Result<()>;
    fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>>;
}

#[derive(Default)]
pub struct CentroidLearner {
    model: Option<CentroidModel>,
}

impl Learner for CentroidLearner {
    fn fit(&mut self, x: &[Vec<f32>], y: &[usize], n_classes: usize, _seed: u64) -> Result<()> {
        self.model = Some(CentroidModel::fit(x, y, n_classes)?);
        Ok(())
    }

    fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| Error::validation("model is not fitted"))?;
        x.iter().map(|v| m.predict(v).map(|p| p.0)).collect()
    }
}

pub struct CnnLearner {
    pub preset: CnnPreset,
    pub input_rows: usize,
    pub input_width: usize,
    pub input_scale: f64,
    pub train: TrainConfig,
    pub model: Option<crate::Cnn>,
}

impl Learner for CnnLearner {
    fn fit(&mut self, x: &[Vec<f32>], y: &[usize], n_classes: usize, seed: u64) -> Result<()> {
        let mut arch = self
            .preset
            .config(n_classes)
            .with_input_scale(self.input_scale);
        arch.input_rows = self.input_rows;
        arch.input_width = self.input_width;
        let mut model = Cnn::new(arch, derive_seed(seed, &[0]))?;
        let tc = TrainConfig {
            seed: derive_seed(seed, &[1]),
            ..self.train.clone()
        };
        let hist = train(&mut model, x, y, &tc)?;
        log::info!(
            "cnn trained {} epochs, final loss {:.4}, train accuracy {:.4}",
            hist.epoch_loss.len(),
            hist.epoch_loss.last().copied().unwrap_or(f64::NAN),
            hist.epoch_accuracy.last().copied().unwrap_or(f64::NAN)
        );
        self.model = Some(model);
        Ok(())
    }

    fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
        let m = self
            .model
            .as_ref()
            .ok_or_else(|| Error::validation("model is not fitted"))?;
        Ok(predict_all(m, x)?.into_iter().map(|p| p.0).collect())
    }
}

impl Learner for Box<dyn Learner> {
    fn fit(&mut self, x: &[Vec<f32>], y: &[usize], n_classes: usize, seed: u64) -> Result<()> {
        (**self).fit(x, y, n_classes, seed)
    }

    fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
        (**self).predict(x)
    }
}

/// Fits with a seeded permutation of the labels; used to check that
/// evaluation cannot beat chance without real label information.
pub struct ShuffledLabels<L>(pub L);

impl<L: Learner> Learner for ShuffledLabels<L> {
    fn fit(&mut self, x: &[Vec<f32>], y: &[usize], n_classes: usize, seed: u64) -> Result<()> {
        let mut y = y.to_vec();
        y.shuffle(&mut rng(derive_seed(seed, &[STREAM_SHUFFLE])));
        self.0.fit(x, &y, n_classes, seed)
    }

    fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
        self.0.predict(x)
    }
}

/// The learner `kind` names, sized for the configured input representation.
pub fn learner_for(kind: ModelKind, cfg: &EvalConfig) -> Box<dyn Learner> {
    match kind {
        ModelKind::NearestCentroid => Box::new(CentroidLearner::default()),
        ModelKind::EpsCnn | ModelKind::IqCnn => {
            let width = if kind.uses_eps() {
                cfg.eps.n_fft
            } else {
                cfg.iq_window_len
            };
            Box::new(CnnLearner {
                preset: cfg.cnn,
                input_rows: 2,
                input_width: width,
                input_scale: input_scale_for(kind, cfg.eps.n_fft),
                train: cfg.train.clone(),
                model: None,
            })
        }
    }
}

fn check_no_leakage(train: &LabeledSet, test: &LabeledSet) -> Result<()> {
    let ids: HashSet<u64> = train.record_ids.iter().copied().collect();
    if let Some(id) = test.record_ids.iter().find(|i| ids.contains(i)) {
        return Err(Error::validation(format!(
            "record {id:#x} appears in both training and test data"
        )));
    }
    Ok(())
}

struct Scored {
    accuracy: f64,
    confusion: Vec<Vec<u64>>,
}

fn score(learner: &dyn Learner, test: &LabeledSet, classes: &[u16]) -> Result<Scored> {
    let truth: Vec<usize> = test
        .device_ids
        .iter()
        .map(|d| {
            classes
                .binary_search(d)
                .map_err(|_| Error::validation(format!("device {d} is not a known class")))
        })
        .collect::<Result<_>>()?;
    let pred = learner.predict(&test.features)?;
    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    for (t, p) in truth.iter().zip(&pred) {
        confusion[*t][*p] += 1;
    }
    let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
    Ok(Scored {
        accuracy: if truth.is_empty() {
            0.0
        } else {
            correct as f64 / truth.len() as f64
        },
        confusion,
    })
}

fn add(into: &mut [Vec<u64>], from: &[Vec<u64>]) {
    for (a, b) in into.iter_mut().zip(from) {
        for (x, y) in a.iter_mut().zip(b) {
            *x += y;
        }
    }
}

/// k-fold cross-validation within one dataset, with a caller-supplied learner.
pub fn evaluate_same_domain_with(
    set: &LabeledSet,
    kind: ModelKind,
    make: &dyn Fn() -> Box<dyn Learner>,
    folds: usize,
    seed: u64,
) -> Result<EvalReport> {
    if set.is_empty() {
        return Err(Error::validation("dataset is empty"));
    }
    if folds < 2 {
        return Err(Error::validation("cross-validation needs at least 2 folds"));
    }
    let classes: Vec<u16> = set.devices().into_iter().collect();
    let split = kfold_split(&set.device_ids, folds, seed)?;
    let mut accs = Vec::with_capacity(folds);
    let mut confusion = vec![vec![0u64; classes.len()]; classes.len()];
    for f in 0..split.k() {
        let (tr, te) = split.train_test(f);
        let (train, test) = (set.subset(&tr), set.subset(&te));
        check_no_leakage(&train, &test)?;
        let y: Vec<usize> = train
            .device_ids
            .iter()
            .map(|d| classes.binary_search(d).unwrap())
            .collect();
        let mut learner = make();
        learner.fit(
            &train.features,
            &y,
            classes.len(),
            derive_seed(seed, &[STREAM_FOLD_MODEL, f as u64]),
        )?;
        let s = score(learner.as_ref(), &test, &classes)?;
        log::info!("{kind} {} fold {f}: accuracy {:.4}", set.domain, s.accuracy);
        accs.push(s.accuracy);
        add(&mut confusion, &s.confusion);
    }
    Ok(EvalReport::new(
        &set.domain,
        &set.domain,
        kind,
        accs,
        classes,
        confusion,
    ))
}

pub fn evaluate_same_domain(
    set: &LabeledSet,
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_same_domain_with(set, kind, &|| learner_for(kind, cfg), cfg.folds, cfg.seed)
}

/// Train on all of `train` (one model per seed) and score each model on
/// every set in `tests`; one report per test set.
pub fn evaluate_transfer_with(
    train: &LabeledSet,
    tests: &[&LabeledSet],
    kind: ModelKind,
    make: &dyn Fn() -> Box<dyn Learner>,
    models: usize,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if train.is_empty() || tests.iter().any(|t| t.is_empty()) {
        return Err(Error::validation("dataset is empty"));
    }
    for t in tests {
        if train.devices() != t.devices() {
            return Err(Error::validation(format!(
                "device sets differ between {} and {}",
                train.domain, t.domain
            )));
        }
        check_no_leakage(train, t)?;
    }
    if models == 0 {
        return Err(Error::validation(
            "at least one model per domain pair is required",
        ));
    }
    let classes: Vec<u16> = train.devices().into_iter().collect();
    let y: Vec<usize> = train
        .device_ids
        .iter()
        .map(|d| classes.binary_search(d).unwrap())
        .collect();
    let mut accs = vec![Vec::with_capacity(models); tests.len()];
    let mut confusion = vec![vec![vec![0u64; classes.len()]; classes.len()]; tests.len()];
    for m in 0..models {
        let mut learner = make();
        learner.fit(
            &train.features,
            &y,
            classes.len(),
            derive_seed(seed, &[STREAM_CROSS_MODEL, m as u64]),
        )?;
        for (t, test) in tests.iter().enumerate() {
            let s = score(learner.as_ref(), test, &classes)?;
            log::info!(
                "{kind} {} -> {} model {m}: accuracy {:.4}",
                train.domain,
                test.domain,
                s.accuracy
            );
            accs[t].push(s.accuracy);
            add(&mut confusion[t], &s.confusion);
        }
    }
    Ok(tests
        .iter()
        .zip(accs)
        .zip(confusion)
        .map(|((t, a), c)| EvalReport::new(&train.domain, &t.domain, kind, a, classes.clone(), c))
        .collect())
}

/// Train on all of `train` and test on all of `test`.
pub fn evaluate_cross_domain_with(
    train: &LabeledSet,
    test: &LabeledSet,
    kind: ModelKind,
    make: &dyn Fn() -> Box<dyn Learner>,
    models: usize,
    seed: u64,
) -> Result<EvalReport> {
    Ok(evaluate_transfer_with(train, &[test], kind, make, models, seed)?.remove(0))
}

pub fn evaluate_transfer(
    train: &LabeledSet,
    tests: &[&LabeledSet],
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let models = cfg.cross_domain_models.unwrap_or(cfg.folds);
    evaluate_transfer_with(
        train,
        tests,
        kind,
        &|| learner_for(kind, cfg),
        models,
        cfg.seed,
    )
}

pub fn evaluate_cross_domain(
    train: &LabeledSet,
    test: &LabeledSet,
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    let models = cfg.cross_domain_models.unwrap_or(cfg.folds);
    evaluate_cross_domain_with(
        train,
        test,
        kind,
        &|| learner_for(kind, cfg),
        models,
        cfg.seed,
    )
}

/// Every train-domain × test-domain pair; the diagonal is same-domain CV.
pub fn domain_matrix(
    sets: &[LabeledSet],
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    for (i, a) in sets.iter().enumerate() {
        for (j, b) in sets.iter().enumerate() {
            out.push(if i == j {
                evaluate_same_domain(a, kind, cfg)?
            } else {
                evaluate_cross_domain(a, b, kind, cfg)?
            });
        }
    }
    Ok(out)
}

/// Same-domain CV with training labels permuted; should land near chance.
pub fn shuffled_label_accuracy(
    set: &LabeledSet,
    kind: ModelKind,
    cfg: &EvalConfig,
) -> Result<EvalReport> {
    evaluate_same_domain_with(
        set,
        kind,
        &|| Box::new(ShuffledLabels(learner_for(kind, cfg))),
        cfg.folds,
        cfg.seed,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Features carry the label in slot 0; the perfect stub reads it back.
    struct Perfect(Vec<u16>);
    impl Learner for Perfect {
        fn fit(&mut self, _: &[Vec<f32>], _: &[usize], _: usize, _: u64) -> Result<()> {
            Ok(())
        }
        fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
            Ok(x.iter()
                .map(|v| self.0.binary_search(&(v[0] as u16)).unwrap())
                .collect())
        }
    }

    struct Majority(usize);
    impl Learner for Majority {
        fn fit(&mut self, _: &[Vec<f32>], y: &[usize], n: usize, _: u64) -> Result<()> {
            let mut c = vec![0; n];
            y.iter().for_each(|&k| c[k] += 1);
            self.0 = (0..n)
                .max_by_key(|&k| (c[k], std::cmp::Reverse(k)))
                .unwrap();
            Ok(())
        }
        fn predict(&self, x: &[Vec<f32>]) -> Result<Vec<usize>> {
            Ok(vec![self.0; x.len()])
        }
    }

    fn toy(devices: u16, per: usize, id_base: u64, noise_seed: u64) -> LabeledSet {
        use rand::Rng;
        let mut r = rng(noise_seed);
        let mut ids = Vec::new();
        let mut devs = Vec::new();
        let mut feats = Vec::new();
        for d in 0..devices {
            for k in 0..per {
                ids.push(id_base + (d as u64) * 1000 + k as u64);
                devs.push(d + 10);
                let mut f = vec![0.0f32; devices as usize + 1];
                f[0] = (d + 10) as f32;
                f[d as usize + 1] = 1.0;
                for v in f.iter_mut().skip(1) {
                    *v += r.random_range(-0.1..0.1);
                }
                feats.push(f);
            }
        }
        LabeledSet::new("toy", ids, devs, feats).unwrap()
    }

    #[test]
    fn perfect_stub_scores_one() {
        let s = toy(15, 10, 0, 1);
        let classes: Vec<u16> = s.devices().into_iter().collect();
        let r = evaluate_same_domain_with(
            &s,
            ModelKind::NearestCentroid,
            &|| Box::new(Perfect(classes.clone())),
            5,
            3,
        )
        .unwrap();
        assert_eq!(r.mean_accuracy, 1.0);
        assert_eq!(r.pooled_accuracy(), 1.0);
        for (row, _) in r.confusion.iter().zip(&r.class_ids) {
            assert_eq!(row.iter().sum::<u64>(), 10);
        }
    }

    #[test]
    fn majority_stub_is_chance() {
        let s = toy(15, 10, 0, 1);
        let r = evaluate_same_domain_with(
            &s,
            ModelKind::NearestCentroid,
            &|| Box::new(Majority(0)),
            5,
            3,
        )
        .unwrap();
        assert!((r.mean_accuracy - 1.0 / 15.0).abs() < 1e-12);
        assert!((r.pooled_accuracy() - r.mean_accuracy).abs() < 1e-12);
    }

    #[test]
    fn centroid_same_and_cross_domain() {
        let cfg = EvalConfig::default();
        let a = toy(5, 10, 0, 1);
        let r = evaluate_same_domain(&a, ModelKind::NearestCentroid, &cfg).unwrap();
        assert_eq!(r.fold_accuracies.len(), 5);
        assert_eq!(r.mean_accuracy, 1.0);
        let b = toy(5, 10, 1 << 40, 2);
        let x = evaluate_cross_domain(&a, &b, ModelKind::NearestCentroid, &cfg).unwrap();
        assert_eq!(x.mean_accuracy, 1.0);
        assert_eq!(
            domain_matrix(&[a, b], ModelKind::NearestCentroid, &cfg)
                .unwrap()
                .len(),
            4
        );
    }

    #[test]
    fn leakage_and_device_mismatch_are_rejected() {
        let cfg = EvalConfig::default();
        let a = toy(3, 10, 0, 1);
        let e = evaluate_cross_domain(&a, &a, ModelKind::NearestCentroid, &cfg).unwrap_err();
        assert!(e.to_string().contains("both training and test"), "{e}");
        let b = toy(4, 10, 1 << 40, 1);
        assert!(evaluate_cross_domain(&a, &b, ModelKind::NearestCentroid, &cfg).is_err());
        assert!(evaluate_same_domain_with(
            &a,
            ModelKind::NearestCentroid,
            &|| Box::new(Majority(0)),
            1,
            0
        )
        .is_err());
    }

    #[test]
    fn shuffled_labels_fall_to_chance() {
        let cfg = EvalConfig::default();
        let s = toy(10, 40, 0, 4);
        let r = shuffled_label_accuracy(&s, ModelKind::NearestCentroid, &cfg).unwrap();
        assert!((r.mean_accuracy - 0.1).abs() <= 0.05, "{}", r.mean_accuracy);
    }

    #[test]
    fn stored_records_group_by_domain() {
        use crate::dataset::{build_scenario, ScenarioKind, ScenarioSpec};
        use crate::sim::DeviceProfile;
        let pop = [
            DeviceProfile::ideal(0).with_cfo(4_000.0),
            DeviceProfile::ideal(1).with_cfo(9_000.0),
        ];
        let plan = build_scenario(
            &pop,
            &ScenarioSpec::of_kind(ScenarioKind::FixedLocation),
            2,
            4,
        )
        .unwrap();
        let recs: Vec<Record> = (0..plan.len())
            .map(|i| Record::from_frame(&plan.frame(i).unwrap()).unwrap())
            .collect();
        let h = DatasetHeader::new(PayloadKind::Iq, 20e6, plan.spec.frame_len, recs.len()).unwrap();
        let cfg = EvalConfig::default();
        let sets = featurize_records(
            &h,
            recs.iter().cloned().map(Ok),
            None,
            ModelKind::NearestCentroid,
            &cfg,
        )
        .unwrap();
        assert_eq!(sets.len(), 3);
        assert!(sets
            .iter()
            .all(|s| s.len() == 4 && s.features[0].len() == 8192));
        let ids: HashSet<u64> = sets.iter().flat_map(|s| s.record_ids.clone()).collect();
        assert_eq!(ids.len(), 12);
        let iq = featurize_records(
            &h,
            recs.iter().cloned().map(Ok),
            None,
            ModelKind::IqCnn,
            &cfg,
        )
        .unwrap();
        assert_eq!(iq[0].features[0].len(), 2 * cfg.iq_window_len);

        let eps_h = DatasetHeader::new(PayloadKind::Eps, 20e6, 4096, 1).unwrap();
        let e = Record {
            payload: sets[0].features[0].clone(),
            ..recs[0].clone()
        };
        assert!(featurize_records(&eps_h, [Ok(e.clone())], None, ModelKind::IqCnn, &cfg).is_err());
        assert!(
            featurize_records(&eps_h, [Ok(e)], Some(&[1, 2]), ModelKind::EpsCnn, &cfg).is_err()
        );
    }
}
