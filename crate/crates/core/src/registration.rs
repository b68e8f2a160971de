//! Temporal registration of the modality streams and channel stacking.
//!
//! Thermal and optronic frames are paired first under a tight frame
//! tolerance; the stacked stream is then paired with radar reports under the
//! wider radar window. Both steps use the same greedy nearest-first matcher.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::data::{DetectionSample, Label, ModalityId, ModalitySet, Recording, Timed};
use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatchConfig {
    /// Seconds allowed between paired thermal and optronic frames.
    pub frame_tolerance: f64,
    /// Seconds allowed between a stacked sample and its radar report
    /// (a one-second window centred on the frame).
    pub radar_tolerance: f64,
    /// Only pair samples carrying the same ground-truth label.
    pub label_constrained: bool,
    /// Use each radar report at most once. When off, every stacked sample
    /// takes its nearest radar report even if another sample already did.
    pub one_to_one: bool,
}

impl Default for MatchConfig {
    fn default() -> Self {
        MatchConfig {
            frame_tolerance: 0.1,
            radar_tolerance: 0.5,
            label_constrained: true,
            one_to_one: true,
        }
    }
}

impl MatchConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = |t: f64| t.is_finite() && t >= 0.0;
        if !ok(self.frame_tolerance) || !ok(self.radar_tolerance) {
            return Err(Error::Config(format!(
                "tolerances must be non-negative (frame {}, radar {})",
                self.frame_tolerance, self.radar_tolerance
            )));
        }
        Ok(())
    }
}

fn check_sorted<T: Timed>(stream: &[T]) -> Result<()> {
    for i in 1..stream.len() {
        if stream[i].timestamp() < stream[i - 1].timestamp() {
            return Err(Error::Unsorted { index: i });
        }
    }
    Ok(())
}

struct Candidate {
    dt: f64,
    ta: f64,
    i: usize,
    j: usize,
}

/// Every `(i, j)` with `|t_a[i] - t_b[j]| <= tolerance` (and equal labels when
/// constrained). Both streams must be sorted.
fn candidates<A: Timed, B: Timed>(
    a: &[A],
    b: &[B],
    tolerance: f64,
    label_constrained: bool,
) -> Vec<Candidate> {
    let mut out = Vec::new();
    let mut lo = 0;
    for (i, sa) in a.iter().enumerate() {
        let ta = sa.timestamp();
        while lo < b.len() && ta - b[lo].timestamp() > tolerance {
            lo += 1;
        }
        for (j, sb) in b.iter().enumerate().skip(lo) {
            let tb = sb.timestamp();
            if tb - ta > tolerance {
                break;
            }
            if label_constrained && sa.label() != sb.label() {
                continue;
            }
            out.push(Candidate {
                dt: (ta - tb).abs(),
                ta,
                i,
                j,
            });
        }
    }
    out
}

/// Greedy one-to-one matching of two time-sorted streams.
///
/// Candidate pairs within `tolerance` are accepted in order of increasing
/// `|dt|`, ties broken by the earlier `a` timestamp and then the smaller `b`
/// index; a pair is accepted only while both samples are still free. The
/// result is sorted by `a` index.
pub fn match_streams<A: Timed, B: Timed>(
    a: &[A],
    b: &[B],
    tolerance: f64,
    label_constrained: bool,
) -> Result<Vec<(usize, usize)>> {
    check_sorted(a)?;
    check_sorted(b)?;
    let mut cands = candidates(a, b, tolerance, label_constrained);
    cands.sort_by(|x, y| {
        x.dt.total_cmp(&y.dt)
            .then(x.ta.total_cmp(&y.ta))
            .then(x.j.cmp(&y.j))
            .then(x.i.cmp(&y.i))
    });
    let mut used_a = alloc::vec![false; a.len()];
    let mut used_b = alloc::vec![false; b.len()];
    let mut pairs = Vec::new();
    for c in cands {
        if !used_a[c.i] && !used_b[c.j] {
            used_a[c.i] = true;
            used_b[c.j] = true;
            pairs.push((c.i, c.j));
        }
    }
    pairs.sort_unstable();
    Ok(pairs)
}

/// Each `a` sample takes its nearest eligible `b` sample (smaller index on
/// ties); `b` samples may be reused.
pub fn match_streams_with_replacement<A: Timed, B: Timed>(
    a: &[A],
    b: &[B],
    tolerance: f64,
    label_constrained: bool,
) -> Result<Vec<(usize, usize)>> {
    check_sorted(a)?;
    check_sorted(b)?;
    let mut best: BTreeMap<usize, (f64, usize)> = BTreeMap::new();
    for c in candidates(a, b, tolerance, label_constrained) {
        let e = best.entry(c.i).or_insert((c.dt, c.j));
        if c.dt < e.0 {
            *e = (c.dt, c.j);
        }
    }
    Ok(best.into_iter().map(|(i, (_, j))| (i, j)).collect())
}

/// Concatenates two `(H, W, C)` tensors along the channel axis, thermal
/// channels first.
pub fn stack_features(thermal: &Tensor<f32>, optronic: &Tensor<f32>) -> Result<Tensor<f32>> {
    let (ts, os) = (thermal.shape(), optronic.shape());
    if ts.len() != 3 || os.len() != 3 {
        return Err(Error::shape(
            "stack_features",
            format!("expected 3-d tensors, got {:?} and {:?}", ts, os),
        ));
    }
    if ts[..2] != os[..2] {
        return Err(Error::shape(
            "stack_features",
            format!("spatial sizes differ: {:?} vs {:?}", &ts[..2], &os[..2]),
        ));
    }
    let (c1, c2) = (ts[2], os[2]);
    let mut data = Vec::with_capacity(thermal.len() + optronic.len());
    for cell in 0..ts[0] * ts[1] {
        data.extend_from_slice(&thermal.data()[cell * c1..][..c1]);
        data.extend_from_slice(&optronic.data()[cell * c2..][..c2]);
    }
    Tensor::from_vec(&[ts[0], ts[1], c1 + c2], data)
}

/// Where a fused sample's contribution from one modality came from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Contribution {
    /// Index of the sample within its source recording.
    pub index: usize,
    pub timestamp: f64,
    pub label: Label,
}

impl Contribution {
    fn of(index: usize, s: &DetectionSample) -> Self {
        Contribution {
            index,
            timestamp: s.timestamp,
            label: s.label,
        }
    }
}

/// One registered instance: the image-like input, the optional radar vector
/// and the provenance of each contribution.
#[derive(Debug, Clone, PartialEq)]
pub struct FusedSample {
    /// Thermal features, or thermal and optronic stacked along channels.
    pub stacked: Tensor<f32>,
    pub radar: Option<Tensor<f32>>,
    pub label: Label,
    pub thermal: Contribution,
    pub optronic: Option<Contribution>,
    pub radar_source: Option<Contribution>,
}

impl FusedSample {
    /// `|dt|` between thermal and optronic frames.
    pub fn frame_delta(&self) -> Option<f64> {
        self.optronic
            .map(|o| (self.thermal.timestamp - o.timestamp).abs())
    }

    /// `|dt|` between the stacked sample and its radar report.
    pub fn radar_delta(&self) -> Option<f64> {
        self.radar_source
            .map(|r| (self.thermal.timestamp - r.timestamp).abs())
    }

    pub fn contributions(&self) -> impl Iterator<Item = (ModalityId, Contribution)> + '_ {
        core::iter::once((ModalityId::Thermal, self.thermal))
            .chain(self.optronic.map(|c| (ModalityId::Optronic, c)))
            .chain(self.radar_source.map(|c| (ModalityId::Radar, c)))
    }
}

impl Timed for FusedSample {
    fn timestamp(&self) -> f64 {
        self.thermal.timestamp
    }
    fn label(&self) -> Label {
        self.label
    }
}

/// Contiguous run of fused samples derived from one source recording.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub recording_id: String,
    pub sample_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedRecording {
    pub recording_id: String,
    pub missing: ModalityId,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FusedDataset {
    pub modality_set: ModalitySet,
    pub samples: Vec<FusedSample>,
    /// Source recordings in sample order; counts sum to `samples.len()`.
    pub provenance: Vec<Provenance>,
    /// Recordings dropped because a counterpart modality was missing.
    pub skipped: Vec<SkippedRecording>,
}

impl FusedDataset {
    pub fn empty(modality_set: ModalitySet) -> Self {
        FusedDataset {
            modality_set,
            samples: Vec::new(),
            provenance: Vec::new(),
            skipped: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn uav_count(&self) -> usize {
        self.samples
            .iter()
            .filter(|s| s.label == Label::Uav)
            .count()
    }

    /// Samples grouped by source recording.
    pub fn parts(&self) -> impl Iterator<Item = (&str, &[FusedSample])> + '_ {
        let mut start = 0;
        self.provenance.iter().map(move |p| {
            let part = &self.samples[start..start + p.sample_count];
            start += p.sample_count;
            (p.recording_id.as_str(), part)
        })
    }

    /// Verifies the registration invariants: deltas within tolerance, label
    /// agreement (when constrained), one-to-one use of source samples (when
    /// requested), consistent tensor shapes and provenance.
    pub fn audit(&self, cfg: &MatchConfig) -> Result<()> {
        let fail = |msg: String| Err(Error::InvalidRecording(msg));
        if self
            .provenance
            .iter()
            .map(|p| p.sample_count)
            .sum::<usize>()
            != self.samples.len()
        {
            return fail(format!(
                "provenance covers a different number of samples than {}",
                self.samples.len()
            ));
        }
        let stacked_shape = self.samples.first().map(|s| s.stacked.shape().to_vec());
        let radar_shape = self
            .samples
            .first()
            .and_then(|s| s.radar.as_ref().map(|r| r.shape().to_vec()));
        for (id, part) in self.parts() {
            let mut seen: [Vec<usize>; 3] = Default::default();
            for (k, s) in part.iter().enumerate() {
                let ctx = || format!("{} sample {}", id, k);
                let expects_optronic = self.modality_set != ModalitySet::One;
                let expects_radar = self.modality_set.has_radar();
                if s.optronic.is_some() != expects_optronic
                    || s.radar_source.is_some() != expects_radar
                    || s.radar.is_some() != expects_radar
                {
                    return fail(format!(
                        "{}: contributors do not match modality set {}",
                        ctx(),
                        self.modality_set
                    ));
                }
                if Some(s.stacked.shape().to_vec()) != stacked_shape
                    || s.radar.as_ref().map(|r| r.shape().to_vec()) != radar_shape
                {
                    return fail(format!("{}: inconsistent tensor shapes", ctx()));
                }
                if let Some(d) = s.frame_delta() {
                    if d > cfg.frame_tolerance {
                        return fail(format!(
                            "{}: frame delta {} exceeds {}",
                            ctx(),
                            d,
                            cfg.frame_tolerance
                        ));
                    }
                }
                if let Some(d) = s.radar_delta() {
                    if d > cfg.radar_tolerance {
                        return fail(format!(
                            "{}: radar delta {} exceeds {}",
                            ctx(),
                            d,
                            cfg.radar_tolerance
                        ));
                    }
                }
                for (m, c) in s.contributions() {
                    if cfg.label_constrained && c.label != s.label {
                        return fail(format!(
                            "{}: {} label {} disagrees with {}",
                            ctx(),
                            m,
                            c.label,
                            s.label
                        ));
                    }
                    seen[m as usize].push(c.index);
                }
            }
            for (m, idx) in seen.iter_mut().enumerate() {
                if m == ModalityId::Radar as usize && !cfg.one_to_one {
                    continue;
                }
                idx.sort_unstable();
                if idx.windows(2).any(|w| w[0] == w[1]) {
                    return fail(format!(
                        "{}: a {} sample is used twice",
                        id,
                        ModalityId::ALL[m]
                    ));
                }
            }
        }
        Ok(())
    }
}

fn check_modality(recs: &[Recording], expected: ModalityId) -> Result<()> {
    for r in recs {
        if r.modality != expected {
            return Err(Error::InvalidRecording(format!(
                "{} was supplied as {} but holds {} data",
                r.recording_id, expected, r.modality
            )));
        }
        r.validate()?;
    }
    Ok(())
}

/// Registers per-modality recordings (paired by recording id) into the
/// dataset for `modality_set`. Recordings are processed in lexicographic id
/// order; recordings lacking a required counterpart are skipped and listed
/// in [`FusedDataset::skipped`].
pub fn fuse_dataset(
    thermal: &[Recording],
    optronic: &[Recording],
    radar: &[Recording],
    modality_set: ModalitySet,
    cfg: &MatchConfig,
) -> Result<FusedDataset> {
    cfg.validate()?;
    check_modality(thermal, ModalityId::Thermal)?;
    check_modality(optronic, ModalityId::Optronic)?;
    check_modality(radar, ModalityId::Radar)?;
    let by_id = |recs: &[Recording]| -> BTreeMap<String, usize> {
        recs.iter()
            .enumerate()
            .map(|(i, r)| (r.recording_id.clone(), i))
            .collect()
    };
    let thermal_ids = by_id(thermal);
    let optronic_ids = by_id(optronic);
    let radar_ids = by_id(radar);

    let mut out = FusedDataset::empty(modality_set);
    for (id, &ti) in &thermal_ids {
        let t = &thermal[ti];
        let o = optronic_ids.get(id).map(|&i| &optronic[i]);
        let r = radar_ids.get(id).map(|&i| &radar[i]);
        let mut missing = false;
        if modality_set != ModalitySet::One && o.is_none() {
            out.skipped.push(SkippedRecording {
                recording_id: id.clone(),
                missing: ModalityId::Optronic,
            });
            missing = true;
        }
        if modality_set.has_radar() && r.is_none() {
            out.skipped.push(SkippedRecording {
                recording_id: id.clone(),
                missing: ModalityId::Radar,
            });
            missing = true;
        }
        if missing {
            continue;
        }
        let before = out.samples.len();
        match (modality_set, o, r) {
            (ModalitySet::One, _, _) => {
                out.samples
                    .extend(t.samples.iter().enumerate().map(|(i, s)| FusedSample {
                        stacked: s.features.clone(),
                        radar: None,
                        label: s.label,
                        thermal: Contribution::of(i, s),
                        optronic: None,
                        radar_source: None,
                    }));
            }
            (_, Some(o), r) => {
                let stacked = register_frames(t, o, cfg)?;
                match (modality_set, r) {
                    (ModalitySet::Three, Some(r)) => {
                        out.samples.extend(register_radar(stacked, r, cfg)?)
                    }
                    _ => out.samples.extend(stacked),
                }
            }
            _ => unreachable!("missing counterparts were skipped"),
        }
        out.provenance.push(Provenance {
            recording_id: id.clone(),
            sample_count: out.samples.len() - before,
        });
    }
    Ok(out)
}

fn register_frames(t: &Recording, o: &Recording, cfg: &MatchConfig) -> Result<Vec<FusedSample>> {
    let pairs = match_streams(
        &t.samples,
        &o.samples,
        cfg.frame_tolerance,
        cfg.label_constrained,
    )?;
    pairs
        .into_iter()
        .map(|(i, j)| {
            let (ts, os) = (&t.samples[i], &o.samples[j]);
            Ok(FusedSample {
                stacked: stack_features(&ts.features, &os.features)?,
                radar: None,
                label: ts.label,
                thermal: Contribution::of(i, ts),
                optronic: Some(Contribution::of(j, os)),
                radar_source: None,
            })
        })
        .collect()
}

fn register_radar(
    stacked: Vec<FusedSample>,
    r: &Recording,
    cfg: &MatchConfig,
) -> Result<Vec<FusedSample>> {
    let pairs = if cfg.one_to_one {
        match_streams(
            &stacked,
            &r.samples,
            cfg.radar_tolerance,
            cfg.label_constrained,
        )?
    } else {
        match_streams_with_replacement(
            &stacked,
            &r.samples,
            cfg.radar_tolerance,
            cfg.label_constrained,
        )?
    };
    let mut slots: Vec<Option<FusedSample>> = stacked.into_iter().map(Some).collect();
    Ok(pairs
        .into_iter()
        .map(|(i, j)| {
            let mut s = slots[i].take().expect("each stacked sample matched once");
            let rs = &r.samples[j];
            s.radar = Some(rs.features.clone());
            s.radar_source = Some(Contribution::of(j, rs));
            s
        })
        .collect())
}
