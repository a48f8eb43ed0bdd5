//! Sync-word framing and receive-side frame classification.
//!
//! A frame on the wire is `sync_len` copies of the sync symbol, an ID of
//! `id_len` printable decimal digits, then the payload. The payload is drawn
//! once from `payload_seed` and repeated in every frame.
//!
//! The detector splits the received byte stream at every maximal run of sync
//! symbols. A segment is a frame candidate when the run in front of it is at
//! least `sync_len` long and the segment has exactly the ID plus payload
//! length. Anything else is a fragment. Candidates are matched to frame
//! indices by their ID; frames skipped over are reported as dropped, so
//! every transmitted frame gets exactly one result.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::serial::UartConfig;

/// How far past the expected index the detector looks for an ID match.
const ID_SEARCH_SLACK: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpec {
    pub sync_len: usize,
    pub sync_symbol: u8,
    pub payload_len: usize,
    pub id_len: usize,
    /// Inclusive payload alphabet.
    pub alphabet_lo: u8,
    pub alphabet_hi: u8,
    pub payload_seed: u64,
}

impl Default for FrameSpec {
    fn default() -> Self {
        FrameSpec {
            sync_len: 1,
            sync_symbol: b'$',
            payload_len: 1000,
            id_len: 3,
            alphabet_lo: 64,
            alphabet_hi: 126,
            payload_seed: 1,
        }
    }
}

impl FrameSpec {
    /// Spec whose ID plus payload is `frame_len` symbols.
    pub fn with_frame_len(mut self, frame_len: usize) -> Result<Self> {
        if frame_len <= self.id_len {
            return Err(Error::invalid(format!(
                "frame length {frame_len} leaves no room for payload after a {}-symbol ID",
                self.id_len
            )));
        }
        self.payload_len = frame_len - self.id_len;
        Ok(self)
    }

    pub fn with_sync_len(mut self, sync_len: usize) -> Self {
        self.sync_len = sync_len;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.sync_len == 0 {
            return Err(Error::invalid("sync_len must be >= 1"));
        }
        if self.payload_len == 0 {
            return Err(Error::invalid("payload_len must be >= 1"));
        }
        if self.id_len == 0 || self.id_len > 9 {
            return Err(Error::invalid(format!("id_len must be in 1..=9, got {}", self.id_len)));
        }
        if self.alphabet_lo > self.alphabet_hi {
            return Err(Error::invalid("payload alphabet is empty"));
        }
        if (self.alphabet_lo..=self.alphabet_hi).contains(&self.sync_symbol) {
            return Err(Error::invalid(format!(
                "sync symbol {} lies inside the payload alphabet",
                self.sync_symbol
            )));
        }
        if self.alphabet_hi - self.alphabet_lo < 9 {
            return Err(Error::invalid("payload alphabet must hold the ten ID digits"));
        }
        Ok(())
    }

    /// ID plus payload: the length checked by the detector.
    pub fn body_len(&self) -> usize {
        self.id_len + self.payload_len
    }

    /// Symbols on the wire per frame.
    pub fn wire_len(&self) -> usize {
        self.sync_len + self.body_len()
    }

    /// Number of distinct IDs; frame indices wrap modulo this.
    pub fn id_capacity(&self) -> usize {
        10usize.pow(self.id_len as u32)
    }
}

/// A validated spec with its payload materialised.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FramePlan {
    spec: FrameSpec,
    payload: Vec<u8>,
}

impl FramePlan {
    pub fn new(spec: &FrameSpec) -> Result<Self> {
        spec.validate()?;
        let mut r = rng::seeded(spec.payload_seed);
        use rand::Rng;
        let payload = (0..spec.payload_len)
            .map(|_| r.random_range(spec.alphabet_lo..=spec.alphabet_hi))
            .collect();
        Ok(FramePlan { spec: *spec, payload })
    }

    pub fn spec(&self) -> &FrameSpec {
        &self.spec
    }

    pub fn payload(&self) -> &[u8] {
        &self.payload
    }

    /// Zero-padded decimal ID, digit `d` encoded as `alphabet_lo + d`.
    pub fn frame_id(&self, index: usize) -> Vec<u8> {
        let mut v = index % self.spec.id_capacity();
        let mut id = vec![0u8; self.spec.id_len];
        for slot in id.iter_mut().rev() {
            *slot = self.spec.alphabet_lo + (v % 10) as u8;
            v /= 10;
        }
        id
    }

    pub fn push_frame(&self, index: usize, out: &mut Vec<u8>) {
        out.resize(out.len() + self.spec.sync_len, self.spec.sync_symbol);
        out.extend(self.frame_id(index));
        out.extend_from_slice(&self.payload);
    }

    pub fn build_frame(&self, index: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.spec.wire_len());
        self.push_frame(index, &mut out);
        out
    }

    /// Frames `first..first + count` back to back.
    pub fn build_stream(&self, first: usize, count: usize) -> Vec<u8> {
        let mut out = Vec::with_capacity(count * self.spec.wire_len());
        for i in first..first + count {
            self.push_frame(i, &mut out);
        }
        out
    }

    fn id_distance(&self, got: &[u8], index: usize) -> usize {
        hamming(got, &self.frame_id(index))
    }
}

/// Sync word, ID from `frame_index`, shared payload.
pub fn build_frame(spec: &FrameSpec, frame_index: usize) -> Result<Vec<u8>> {
    Ok(FramePlan::new(spec)?.build_frame(frame_index))
}

fn hamming(a: &[u8], b: &[u8]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x != y).count()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Clean,
    Substituted,
    Dropped,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DropCause {
    None,
    LengthMismatch,
    MissedFrame,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameResult {
    /// Transmitted frame index this result accounts for.
    pub index: usize,
    pub verdict: Verdict,
    pub substitution_count: usize,
    pub drop_cause: DropCause,
    /// Received ID symbols, when the frame was received.
    pub frame_id: Option<Vec<u8>>,
}

impl FrameResult {
    fn dropped(index: usize, cause: DropCause) -> Self {
        FrameResult {
            index,
            verdict: Verdict::Dropped,
            substitution_count: 0,
            drop_cause: cause,
            frame_id: None,
        }
    }

    fn received(index: usize, id: &[u8], substitutions: usize) -> Self {
        FrameResult {
            index,
            verdict: if substitutions == 0 {
                Verdict::Clean
            } else {
                Verdict::Substituted
            },
            substitution_count: substitutions,
            drop_cause: DropCause::None,
            frame_id: Some(id.to_vec()),
        }
    }

    pub fn is_dropped(&self) -> bool {
        self.verdict == Verdict::Dropped
    }
}

/// Classifies the decoded stream of a transmission that carried frames
/// `0..frames_sent`. Returns exactly `frames_sent` results in index order.
pub fn detect_frames(stream: &[u8], plan: &FramePlan, frames_sent: usize) -> Vec<FrameResult> {
    let spec = plan.spec();
    let body_len = spec.body_len();
    let mut results = Vec::with_capacity(frames_sent);
    let mut next = 0usize;
    let mut pending = 0usize;

    let drop_until = |results: &mut Vec<FrameResult>, from: usize, to: usize, pending: usize| {
        for (k, index) in (from..to).enumerate() {
            let cause = if k < pending {
                DropCause::LengthMismatch
            } else {
                DropCause::MissedFrame
            };
            results.push(FrameResult::dropped(index, cause));
        }
    };

    for (run, body) in segments(stream, spec.sync_symbol) {
        let candidate = run >= spec.sync_len && body.len() == body_len;
        if !candidate {
            pending += 1;
            continue;
        }
        if next >= frames_sent {
            continue;
        }
        let id = &body[..spec.id_len];
        let hi = frames_sent.min(next + pending + 1 + ID_SEARCH_SLACK);
        let j = (next..hi)
            .min_by_key(|&j| (plan.id_distance(id, j), j))
            .expect("window is nonempty");
        drop_until(&mut results, next, j, pending);
        let subs = plan.id_distance(id, j) + hamming(&body[spec.id_len..], plan.payload());
        results.push(FrameResult::received(j, id, subs));
        next = j + 1;
        pending = 0;
    }
    drop_until(&mut results, next, frames_sent, pending);
    results
}

/// Splits at maximal runs of `sync`, yielding the run length and the bytes
/// up to the next run. Bytes before the first run are skipped.
fn segments(stream: &[u8], sync: u8) -> impl Iterator<Item = (usize, &[u8])> {
    let mut i = stream.iter().position(|&b| b == sync).unwrap_or(stream.len());
    std::iter::from_fn(move || {
        if i >= stream.len() {
            return None;
        }
        let run_start = i;
        while i < stream.len() && stream[i] == sync {
            i += 1;
        }
        let body_start = i;
        while i < stream.len() && stream[i] != sync {
            i += 1;
        }
        Some((body_start - run_start, &stream[body_start..i]))
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SyncErrorRate {
    pub p_bse: f64,
    pub reliability: f64,
}

pub fn block_sync_error_rate(results: &[FrameResult], frames_sent: usize) -> Result<SyncErrorRate> {
    if frames_sent == 0 {
        return Err(Error::invalid("frames_sent must be >= 1"));
    }
    if results.len() > frames_sent {
        return Err(Error::invalid(format!(
            "{} results for {frames_sent} frames sent",
            results.len()
        )));
    }
    let dropped = results.iter().filter(|r| r.is_dropped()).count();
    let p_bse = dropped as f64 / frames_sent as f64;
    Ok(SyncErrorRate {
        p_bse,
        reliability: 1.0 - p_bse,
    })
}

/// Payload bytes per second after discarding dropped frames.
pub fn effective_throughput(baud: f64, cfg: &UartConfig, spec: &FrameSpec, p_bse: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p_bse) {
        return Err(Error::invalid(format!("p_bse must be in [0, 1], got {p_bse}")));
    }
    let chars_per_s = baud / cfg.bits_per_char() as f64;
    let payload_fraction = spec.payload_len as f64 / spec.wire_len() as f64;
    Ok(chars_per_s * payload_fraction * (1.0 - p_bse))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn small(sync_len: usize) -> FramePlan {
        FramePlan::new(&FrameSpec {
            sync_len,
            payload_len: 40,
            ..FrameSpec::default()
        })
        .unwrap()
    }

    fn body_start(plan: &FramePlan, frame: usize) -> usize {
        frame * plan.spec().wire_len() + plan.spec().sync_len
    }

    #[test]
    fn build_layout() {
        let plan = small(1);
        let f = plan.build_frame(0);
        assert_eq!(f[0], b'$');
        assert_eq!(&f[1..4], b"@@@");
        assert_eq!(&f[4..], plan.payload());
        assert_eq!(&plan.frame_id(907), b"I@G");
        assert_eq!(plan.frame_id(1907), plan.frame_id(907));
    }

    #[test]
    fn payload_alphabet_and_determinism() {
        for seed in 0..20 {
            let spec = FrameSpec {
                payload_seed: seed,
                ..FrameSpec::default()
            };
            let a = FramePlan::new(&spec).unwrap();
            assert!(a.payload().iter().all(|b| (64..=126).contains(b)));
            assert_eq!(a, FramePlan::new(&spec).unwrap());
        }
    }

    #[test]
    fn spec_validation() {
        let bad = FrameSpec {
            sync_symbol: b'A',
            ..FrameSpec::default()
        };
        assert!(bad.validate().is_err());
        assert!(FrameSpec::default().with_frame_len(3).is_err());
        assert_eq!(FrameSpec::default().with_frame_len(5003).unwrap().payload_len, 5000);
    }

    #[test]
    fn clean_stream() {
        let plan = small(1);
        let r = detect_frames(&plan.build_stream(0, 10), &plan, 10);
        assert_eq!(r.len(), 10);
        assert!(r
            .iter()
            .enumerate()
            .all(|(i, f)| f.index == i && f.verdict == Verdict::Clean));
    }

    #[test]
    fn single_substitution() {
        let plan = small(1);
        let mut s = plan.build_stream(0, 5);
        let at = body_start(&plan, 2) + 10;
        s[at] = if s[at] == b'A' { b'B' } else { b'A' };
        let r = detect_frames(&s, &plan, 5);
        assert_eq!(r[2].verdict, Verdict::Substituted);
        assert_eq!(r[2].substitution_count, 1);
        assert_eq!(r.iter().filter(|f| f.verdict == Verdict::Clean).count(), 4);
    }

    #[test]
    fn deleted_sync_merges_two_frames() {
        let plan = small(1);
        let mut s = plan.build_stream(0, 6);
        s.remove(3 * plan.spec().wire_len());
        let r = detect_frames(&s, &plan, 6);
        assert_eq!(r.len(), 6);
        assert_eq!(r[2].drop_cause, DropCause::LengthMismatch);
        assert_eq!(r[3].drop_cause, DropCause::MissedFrame);
        assert_eq!(r.iter().filter(|f| f.is_dropped()).count(), 2);
    }

    #[test]
    fn payload_turned_into_sync_drops_one_frame() {
        for sync_len in [1, 5] {
            let plan = small(sync_len);
            let mut s = plan.build_stream(0, 4);
            s[body_start(&plan, 1) + 20] = b'$';
            let r = detect_frames(&s, &plan, 4);
            let dropped: Vec<usize> = r.iter().filter(|f| f.is_dropped()).map(|f| f.index).collect();
            assert_eq!(dropped, vec![1], "sync_len {sync_len}");
        }
    }

    #[test]
    fn corrupted_sync_symbol_drops_its_frame() {
        let plan = small(5);
        // Inner positions only cost the frame they introduce.
        for pos in 1..5 {
            let mut s = plan.build_stream(0, 4);
            s[2 * plan.spec().wire_len() + pos] = b'x';
            let r = detect_frames(&s, &plan, 4);
            let dropped: Vec<usize> = r.iter().filter(|f| f.is_dropped()).map(|f| f.index).collect();
            assert_eq!(dropped, vec![2], "position {pos}");
        }
        // The leading position also lengthens the previous frame.
        let mut s = plan.build_stream(0, 4);
        s[2 * plan.spec().wire_len()] = b'x';
        let r = detect_frames(&s, &plan, 4);
        assert_eq!(r.iter().filter(|f| f.is_dropped()).count(), 2);
    }

    #[test]
    fn greedy_run_next_to_sync_word() {
        let plan = small(1);
        let mut s = plan.build_stream(0, 3);
        s[body_start(&plan, 1)] = b'$';
        let r = detect_frames(&s, &plan, 3);
        assert_eq!(r[1].drop_cause, DropCause::LengthMismatch);
        assert!(!r[0].is_dropped() && !r[2].is_dropped());
    }

    #[test]
    fn empty_stream_all_missed() {
        let plan = small(1);
        let r = detect_frames(&[], &plan, 3);
        assert!(r.iter().all(|f| f.drop_cause == DropCause::MissedFrame));
    }

    #[test]
    fn sync_rates() {
        let plan = small(1);
        let clean = detect_frames(&plan.build_stream(0, 100), &plan, 100);
        let r = block_sync_error_rate(&clean, 100).unwrap();
        assert_eq!((r.p_bse, r.reliability), (0.0, 1.0));
        let lost = detect_frames(&[], &plan, 100);
        assert_eq!(block_sync_error_rate(&lost, 100).unwrap().p_bse, 1.0);
        let mut three = clean.clone();
        for f in three.iter_mut().take(3) {
            *f = FrameResult::dropped(f.index, DropCause::MissedFrame);
        }
        assert!((block_sync_error_rate(&three, 100).unwrap().p_bse - 0.03).abs() < 1e-15);
        assert!(block_sync_error_rate(&[], 0).is_err());
    }

    #[test]
    fn throughput() {
        let cfg = UartConfig::default();
        let spec = FrameSpec::default();
        assert_eq!(effective_throughput(1e4, &cfg, &spec, 1.0).unwrap(), 0.0);
        let g = effective_throughput(1e4, &cfg, &spec, 0.0).unwrap();
        assert!((g - 1e4 / 10.0 * 1000.0 / 1004.0).abs() < 1e-9);
        let g2 = effective_throughput(2e4, &cfg, &spec, 0.0).unwrap();
        assert!((g2 - 2.0 * g).abs() < 1e-9);
        assert!(effective_throughput(1e4, &cfg, &spec, 1.5).is_err());
    }

    proptest! {
        #[test]
        fn conservation_under_random_edits(
            sync_len in 1usize..4,
            frames in 1usize..12,
            edits in proptest::collection::vec((0usize..10_000, 0u8..3, any::<u8>()), 0..15),
        ) {
            let plan = small(sync_len);
            let mut s = plan.build_stream(0, frames);
            for (pos, kind, byte) in edits {
                if s.is_empty() {
                    break;
                }
                let at = pos % s.len();
                match kind {
                    0 => s[at] = byte,
                    1 => { s.remove(at); }
                    _ => s.insert(at, byte),
                }
            }
            let r = detect_frames(&s, &plan, frames);
            prop_assert_eq!(r.len(), frames);
            for (i, f) in r.iter().enumerate() {
                prop_assert_eq!(f.index, i);
                prop_assert!(f.substitution_count <= plan.spec().body_len());
                prop_assert_eq!(f.verdict == Verdict::Clean, f.substitution_count == 0 && f.drop_cause == DropCause::None);
                prop_assert_eq!(f.verdict == Verdict::Dropped, f.drop_cause != DropCause::None);
            }
        }
    }
}
